#include "adapt/adapttok.hpp"

#include <algorithm>

#include "json.hpp"

#include "adapt/error.hpp"
#include "io_util.hpp"

namespace adapt {

namespace {

using nlohmann::json;

// Start positions of left-to-right non-overlapping contiguous occurrences.
std::vector<int> contiguous_starts(std::span<const TokenId> base,
                                   std::span<const TokenId> seq) {
  std::vector<int> starts;
  if (seq.empty() || seq.size() > base.size()) return starts;
  std::size_t i = 0;
  while (i + seq.size() <= base.size()) {
    if (std::equal(seq.begin(), seq.end(), base.begin() + static_cast<std::ptrdiff_t>(i))) {
      starts.push_back(static_cast<int>(i));
      i += seq.size();
    } else {
      ++i;
    }
  }
  return starts;
}

// Start positions of leftmost-disjoint gapped occurrences: each round
// matches greedily with the first element strictly after the previous
// match's start, never reusing a matched position.
std::vector<int> gapped_disjoint_starts(std::span<const TokenId> base,
                                        std::span<const TokenId> seq) {
  std::vector<int> starts;
  if (seq.empty() || seq.size() > base.size()) return starts;
  std::vector<bool> used(base.size(), false);
  std::size_t scan_from = 0;
  while (true) {
    std::vector<std::size_t> match;
    std::size_t pos = scan_from;
    for (std::size_t j = 0; j < seq.size(); ++j) {
      while (pos < base.size() && (used[pos] || base[pos] != seq[j])) ++pos;
      if (pos >= base.size()) break;
      match.push_back(pos);
      ++pos;
    }
    if (match.size() != seq.size()) break;
    starts.push_back(static_cast<int>(match.front()));
    for (std::size_t p : match) used[p] = true;
    scan_from = match.front() + 1;
  }
  return starts;
}

json label_to_json(const Label& label) {
  if (label.numeric) return json(std::stoll(label.text));
  return json(label.text);
}

}  // namespace

std::vector<int> candidate_lookup(const TaskVocabulary& tv, std::span<const TokenId> base_ids) {
  std::vector<char> seen(tv.entries().size(), 0);
  for (TokenId t : base_ids)
    for (int e : tv.entries_containing(t)) seen[static_cast<std::size_t>(e)] = 1;
  std::vector<int> result;
  for (std::size_t e = 0; e < seen.size(); ++e)
    if (seen[e]) result.push_back(static_cast<int>(e));
  return result;
}

AdaptiveTokenization adaptive_tokenize_ids(const TaskVocabulary& tv,
                                           std::span<const TokenId> base_ids) {
  AdaptiveTokenization result;
  for (int e : candidate_lookup(tv, base_ids)) {
    const TaskVocabEntry& entry = tv.entries()[static_cast<std::size_t>(e)];
    const std::vector<int> starts = entry.contiguous
                                        ? contiguous_starts(base_ids, entry.tokens)
                                        : gapped_disjoint_starts(base_ids, entry.tokens);
    for (int s : starts) result.insertions.push_back(Insertion{e, s});
  }

  // Same-position insertions order by sequence length descending, then new
  // id ascending; entry indices follow id order.
  std::sort(result.insertions.begin(), result.insertions.end(),
            [&](const Insertion& a, const Insertion& b) {
              if (a.pos != b.pos) return a.pos < b.pos;
              const auto& ta = tv.entries()[static_cast<std::size_t>(a.entry)].tokens;
              const auto& tb = tv.entries()[static_cast<std::size_t>(b.entry)].tokens;
              if (ta.size() != tb.size()) return ta.size() > tb.size();
              return a.entry < b.entry;
            });

  result.ids.reserve(base_ids.size() + result.insertions.size());
  std::size_t next = 0;
  for (std::size_t p = 0; p < base_ids.size(); ++p) {
    while (next < result.insertions.size() &&
           result.insertions[next].pos == static_cast<int>(p)) {
      result.ids.push_back(tv.entries()[static_cast<std::size_t>(result.insertions[next].entry)].id);
      ++next;
    }
    result.ids.push_back(base_ids[p]);
  }
  return result;
}

AdaptiveTokenization adaptive_tokenize(const TaskVocabulary& tv, const BaseVocab& vocab,
                                       std::string_view text) {
  if (tv.base_vocab_size() != vocab.size())
    fail("ConfigError", "task vocabulary base size " + std::to_string(tv.base_vocab_size()) +
                            " does not match vocabulary size " + std::to_string(vocab.size()));
  const std::vector<TokenId> base = base_tokenize(vocab, text);
  return adaptive_tokenize_ids(tv, base);
}

std::vector<AdaptiveDoc> apply_corpus_serial(const TaskVocabulary& tv, const BaseVocab& vocab,
                                             const std::vector<LabeledDoc>& docs) {
  if (docs.empty()) fail("EmptyCorpus", "no documents to tokenize");
  std::vector<AdaptiveDoc> out(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    out[i].tok = adaptive_tokenize(tv, vocab, docs[i].text);
    out[i].label = docs[i].label;
  }
  return out;
}

std::vector<AdaptiveDoc> apply_corpus(const TaskVocabulary& tv, const BaseVocab& vocab,
                                      const std::vector<LabeledDoc>& docs) {
  if (docs.empty()) fail("EmptyCorpus", "no documents to tokenize");
  if (tv.base_vocab_size() != vocab.size())
    fail("ConfigError", "task vocabulary base size " + std::to_string(tv.base_vocab_size()) +
                            " does not match vocabulary size " + std::to_string(vocab.size()));
  std::vector<AdaptiveDoc> out(docs.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(docs.size()); ++i) {
    const std::vector<TokenId> base = base_tokenize(vocab, docs[static_cast<std::size_t>(i)].text);
    out[i].tok = adaptive_tokenize_ids(tv, base);
    out[i].label = docs[static_cast<std::size_t>(i)].label;
  }
  return out;
}

void save_adaptive_jsonl(const std::vector<AdaptiveDoc>& docs, const std::string& path) {
  auto out = detail::open_output(path);
  for (const AdaptiveDoc& doc : docs) {
    json j;
    j["ids"] = doc.tok.ids;
    json ins = json::array();
    for (const Insertion& i : doc.tok.insertions) {
      json rec;
      rec["entry"] = i.entry;
      rec["pos"] = i.pos;
      ins.push_back(std::move(rec));
    }
    j["insertions"] = std::move(ins);
    j["label"] = label_to_json(doc.label);
    out << j.dump() << '\n';
  }
}

std::vector<AdaptiveDoc> load_adaptive_jsonl(const std::string& path) {
  auto in = detail::open_input(path);
  std::vector<AdaptiveDoc> docs;
  std::string line;
  std::size_t line_no = 0;
  for (; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    std::string where = path + ":" + std::to_string(line_no + 1);
    if (j.is_discarded()) fail("ParseError", where + ": invalid JSON");
    for (const char* field : {"ids", "insertions", "label"})
      if (!j.contains(field)) fail("ParseError", where + ": missing field '" + field + "'");
    AdaptiveDoc doc;
    if (!j["ids"].is_array()) fail("ParseError", where + ": field 'ids' must be an array");
    for (const json& v : j["ids"]) {
      if (!v.is_number_integer() && !v.is_number_unsigned())
        fail("ParseError", where + ": token ids must be integers");
      doc.tok.ids.push_back(static_cast<TokenId>(v.get<long long>()));
    }
    if (!j["insertions"].is_array())
      fail("ParseError", where + ": field 'insertions' must be an array");
    for (const json& rec : j["insertions"]) {
      if (!rec.is_object() || !rec.contains("entry") || !rec.contains("pos"))
        fail("ParseError", where + ": insertions need 'entry' and 'pos'");
      doc.tok.insertions.push_back(
          Insertion{rec["entry"].get<int>(), rec["pos"].get<int>()});
    }
    if (j["label"].is_string()) {
      doc.label = Label{j["label"].get<std::string>(), false};
    } else if (j["label"].is_number_integer() || j["label"].is_number_unsigned()) {
      doc.label = Label{std::to_string(j["label"].get<long long>()), true};
    } else {
      fail("ParseError", where + ": label must be a string or an integer");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace adapt
