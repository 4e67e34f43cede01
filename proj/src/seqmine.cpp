#include "adapt/seqmine.hpp"

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "adapt/error.hpp"
#include "io_util.hpp"

namespace adapt {

namespace {

struct VecHash {
  std::size_t operator()(const std::vector<TokenId>& v) const {
    std::size_t h = 1469598103934665603ull;
    for (TokenId t : v) {
      h ^= static_cast<std::uint32_t>(t);
      h *= 1099511628211ull;
    }
    return h;
  }
};

// Pseudo-projection of one document: the positions where the current
// prefix's last element can match. Empty frontier = no element matched yet
// (the first element is unconstrained). With unlimited gaps only the
// leftmost feasible position is kept.
struct ProjEntry {
  int doc = 0;
  std::vector<int> frontier;
};

struct Extension {
  TokenId item = 0;
  std::vector<ProjEntry> entries;
};

std::vector<Extension> extend(const std::vector<TokenizedDoc>& corpus,
                              const std::vector<ProjEntry>& entries, int max_gap) {
  std::unordered_map<TokenId, std::vector<ProjEntry>> by_item;
  for (const ProjEntry& e : entries) {
    const auto& ids = corpus[static_cast<std::size_t>(e.doc)].ids;
    const int n = static_cast<int>(ids.size());
    if (max_gap < 0) {
      const int start = e.frontier.empty() ? 0 : e.frontier.front() + 1;
      std::unordered_map<TokenId, int> leftmost;
      for (int q = start; q < n; ++q) leftmost.emplace(ids[q], q);
      for (const auto& [item, q] : leftmost)
        by_item[item].push_back(ProjEntry{e.doc, {q}});
    } else {
      std::unordered_map<TokenId, std::vector<int>> positions;
      if (e.frontier.empty()) {
        for (int q = 0; q < n; ++q) positions[ids[q]].push_back(q);
      } else {
        const auto& f = e.frontier;
        const int lo = f.front() + 1;
        const int hi = std::min(n - 1, f.back() + max_gap + 1);
        for (int q = lo; q <= hi; ++q) {
          // feasible iff some matched position lies in [q-max_gap-1, q-1]
          auto it = std::lower_bound(f.begin(), f.end(), q - max_gap - 1);
          if (it != f.end() && *it < q) positions[ids[q]].push_back(q);
        }
      }
      for (auto& [item, qs] : positions)
        by_item[item].push_back(ProjEntry{e.doc, std::move(qs)});
    }
  }
  std::vector<Extension> result;
  result.reserve(by_item.size());
  for (auto& [item, list] : by_item) result.push_back(Extension{item, std::move(list)});
  std::sort(result.begin(), result.end(),
            [](const Extension& a, const Extension& b) { return a.item < b.item; });
  return result;
}

using Recording = std::vector<std::pair<std::vector<TokenId>, int>>;

void dfs(const std::vector<TokenizedDoc>& corpus, const MiningParams& params, int horizon,
         std::vector<TokenId>& prefix, const std::vector<ProjEntry>& entries,
         Recording& out) {
  if (static_cast<int>(prefix.size()) >= horizon) return;
  for (const Extension& ext : extend(corpus, entries, params.max_gap)) {
    const int support = static_cast<int>(ext.entries.size());
    if (support < params.min_frequency) continue;
    prefix.push_back(ext.item);
    out.emplace_back(prefix, support);
    dfs(corpus, params, horizon, prefix, ext.entries, out);
    prefix.pop_back();
  }
}

struct Rec {
  int support = 0;
  bool closed = true;
};

std::vector<MinedSequence> mine_impl(const std::vector<TokenizedDoc>& corpus,
                                     const MiningParams& params, bool parallel) {
  if (corpus.empty()) fail("EmptyCorpus", "cannot mine an empty corpus");
  if (params.min_frequency < 1 || params.min_len < 1 || params.max_len < params.min_len)
    fail("ConfigError", "invalid mining parameters");

  const int horizon = params.max_len + 1;  // closedness checked one item past max_len

  std::vector<ProjEntry> root(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) root[i].doc = static_cast<int>(i);

  std::vector<Extension> seeds;
  for (Extension& ext : extend(corpus, root, params.max_gap))
    if (static_cast<int>(ext.entries.size()) >= params.min_frequency)
      seeds.push_back(std::move(ext));

  std::vector<Recording> per_seed(seeds.size());
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(seeds.size()); ++s) {
      std::vector<TokenId> prefix{seeds[s].item};
      per_seed[s].emplace_back(prefix, static_cast<int>(seeds[s].entries.size()));
      dfs(corpus, params, horizon, prefix, seeds[s].entries, per_seed[s]);
    }
  } else {
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      std::vector<TokenId> prefix{seeds[s].item};
      per_seed[s].emplace_back(prefix, static_cast<int>(seeds[s].entries.size()));
      dfs(corpus, params, horizon, prefix, seeds[s].entries, per_seed[s]);
    }
  }

  std::unordered_map<std::vector<TokenId>, Rec, VecHash> all;
  for (const Recording& rec : per_seed)
    for (const auto& [seq, support] : rec) all.emplace(seq, Rec{support, true});

  // Absorption: a sequence is non-closed iff some one-item-longer frequent
  // super-sequence has equal support. Deleting one item from each frequent
  // sequence reaches every such pair.
  std::vector<TokenId> shorter;
  for (const auto& [seq, rec] : all) {
    if (seq.size() < 2) continue;
    shorter.resize(seq.size() - 1);
    for (std::size_t skip = 0; skip < seq.size(); ++skip) {
      std::size_t w = 0;
      for (std::size_t r = 0; r < seq.size(); ++r)
        if (r != skip) shorter[w++] = seq[r];
      auto it = all.find(shorter);
      if (it != all.end() && it->second.support == rec.support) it->second.closed = false;
    }
  }

  std::vector<MinedSequence> out;
  for (const auto& [seq, rec] : all) {
    const int len = static_cast<int>(seq.size());
    if (len < params.min_len || len > params.max_len || !rec.closed) continue;
    out.push_back(MinedSequence{seq, rec.support, false, 0.0});
  }

  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(out.size()); ++i) {
      for (const TokenizedDoc& doc : corpus)
        if (contains_contiguous(doc.ids, out[i].tokens)) {
          out[i].contiguous = true;
          break;
        }
    }
  } else {
    for (MinedSequence& m : out)
      for (const TokenizedDoc& doc : corpus)
        if (contains_contiguous(doc.ids, m.tokens)) {
          m.contiguous = true;
          break;
        }
  }

  std::sort(out.begin(), out.end(), mined_order_less);
  return out;
}

std::vector<std::string> split_tab(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::vector<TokenId> parse_token_list(const std::string& field, const std::string& where) {
  std::vector<TokenId> tokens;
  std::istringstream ss(field);
  std::string part;
  while (ss >> part)
    tokens.push_back(static_cast<TokenId>(detail::parse_int(part, where)));
  if (tokens.empty()) fail("ParseError", where + ": empty token list");
  return tokens;
}

std::vector<MinedSequence> load_tsv(const std::string& path, bool with_pplx) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line)) fail("ParseError", path + ": missing header");
  std::vector<MinedSequence> seqs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = path + ":" + std::to_string(line_no);
    auto fields = split_tab(line);
    const std::size_t expected = with_pplx ? 4 : 3;
    if (fields.size() != expected)
      fail("ParseError", where + ": expected " + std::to_string(expected) + " fields, got " +
                             std::to_string(fields.size()));
    MinedSequence m;
    m.tokens = parse_token_list(fields[0], where + " field 'tokens'");
    m.support = static_cast<int>(detail::parse_int(fields[1], where + " field 'support'"));
    long long contig = detail::parse_int(fields[2], where + " field 'contiguous'");
    if (contig != 0 && contig != 1)
      fail("ParseError", where + ": field 'contiguous' must be 0 or 1");
    m.contiguous = contig == 1;
    if (with_pplx)
      m.perplexity = detail::parse_double_or_inf(fields[3], where + " field 'pplx'");
    seqs.push_back(std::move(m));
  }
  return seqs;
}

void save_tsv(const std::vector<MinedSequence>& seqs, const std::string& path,
              bool with_pplx) {
  auto out = detail::open_output(path);
  out << (with_pplx ? "tokens\tsupport\tcontiguous\tpplx\n" : "tokens\tsupport\tcontiguous\n");
  for (const MinedSequence& m : seqs) {
    for (std::size_t i = 0; i < m.tokens.size(); ++i) {
      if (i) out << ' ';
      out << m.tokens[i];
    }
    out << '\t' << m.support << '\t' << (m.contiguous ? 1 : 0);
    if (with_pplx) out << '\t' << detail::format_double(m.perplexity);
    out << '\n';
  }
}

}  // namespace

bool contains_subsequence(std::span<const TokenId> doc, std::span<const TokenId> seq,
                          int max_gap) {
  if (seq.empty()) return true;
  if (max_gap < 0) {
    std::size_t j = 0;
    for (TokenId t : doc) {
      if (t == seq[j]) {
        ++j;
        if (j == seq.size()) return true;
      }
    }
    return false;
  }
  std::vector<int> prev;
  for (std::size_t q = 0; q < doc.size(); ++q)
    if (doc[q] == seq[0]) prev.push_back(static_cast<int>(q));
  for (std::size_t j = 1; j < seq.size() && !prev.empty(); ++j) {
    std::vector<int> next;
    for (std::size_t q = 0; q < doc.size(); ++q) {
      if (doc[q] != seq[j]) continue;
      auto it = std::lower_bound(prev.begin(), prev.end(),
                                 static_cast<int>(q) - max_gap - 1);
      if (it != prev.end() && *it < static_cast<int>(q)) next.push_back(static_cast<int>(q));
    }
    prev = std::move(next);
  }
  return !prev.empty();
}

bool contains_contiguous(std::span<const TokenId> doc, std::span<const TokenId> seq) {
  if (seq.empty()) return true;
  if (seq.size() > doc.size()) return false;
  return std::search(doc.begin(), doc.end(), seq.begin(), seq.end()) != doc.end();
}

int support_of(const std::vector<TokenizedDoc>& corpus, std::span<const TokenId> seq,
               int max_gap) {
  if (seq.empty()) fail("ConfigError", "support_of requires a non-empty sequence");
  int count = 0;
  for (const TokenizedDoc& doc : corpus)
    if (contains_subsequence(doc.ids, seq, max_gap)) ++count;
  return count;
}

std::vector<MinedSequence> mine_closed(const std::vector<TokenizedDoc>& corpus,
                                       const MiningParams& params) {
  return mine_impl(corpus, params, true);
}

std::vector<MinedSequence> mine_closed_serial(const std::vector<TokenizedDoc>& corpus,
                                              const MiningParams& params) {
  return mine_impl(corpus, params, false);
}

bool mined_order_less(const MinedSequence& a, const MinedSequence& b) {
  if (a.support != b.support) return a.support > b.support;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() > b.tokens.size();
  return a.tokens < b.tokens;
}

void save_mined_tsv(const std::vector<MinedSequence>& seqs, const std::string& path) {
  save_tsv(seqs, path, false);
}

std::vector<MinedSequence> load_mined_tsv(const std::string& path) {
  return load_tsv(path, false);
}

void save_selected_tsv(const std::vector<MinedSequence>& seqs, const std::string& path) {
  save_tsv(seqs, path, true);
}

std::vector<MinedSequence> load_selected_tsv(const std::string& path) {
  return load_tsv(path, true);
}

}  // namespace adapt
