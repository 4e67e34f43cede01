#include "adapt/corpus.hpp"

#include <algorithm>
#include <sstream>
#include <utility>

#include "json.hpp"

#include "adapt/error.hpp"
#include "io_util.hpp"

namespace adapt {

namespace {

using nlohmann::json;

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return (u >= '!' && u <= '/') || (u >= ':' && u <= '@') || (u >= '[' && u <= '`') ||
         (u >= '{' && u <= '~');
}

char lower_ascii(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; }

Label label_from_json(const json& j, const std::string& context) {
  if (j.is_string()) return Label{j.get<std::string>(), false};
  if (j.is_number_integer() || j.is_number_unsigned())
    return Label{std::to_string(j.get<long long>()), true};
  fail("ParseError", context + ": label must be a string or an integer");
}

json label_to_json(const Label& label) {
  if (label.numeric) return json(std::stoll(label.text));
  return json(label.text);
}

json parse_line(const std::string& line, std::size_t line_no, const std::string& path) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded())
    fail("ParseError", path + ":" + std::to_string(line_no + 1) + ": invalid JSON");
  return j;
}

}  // namespace

BaseVocab::BaseVocab(std::vector<std::string> tokens, std::string continuation_prefix)
    : tokens_(std::move(tokens)), continuation_prefix_(std::move(continuation_prefix)) {
  if (tokens_.empty()) fail("EmptyVocab", "vocabulary has no tokens");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted)
      fail("DuplicateToken", "token '" + tokens_[i] + "' at lines " +
                                 std::to_string(it->second) + " and " + std::to_string(i));
  }
  auto unk = index_.find(std::string_view("[UNK]"));
  unk_id_ = unk == index_.end() ? 0 : unk->second;
}

TokenId BaseVocab::find(std::string_view piece) const {
  auto it = index_.find(piece);
  return it == index_.end() ? -1 : it->second;
}

BaseVocab load_vocab(const std::string& path) {
  auto in = detail::open_input(path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  if (tokens.empty()) fail("EmptyVocab", "vocabulary file is empty: " + path);
  return BaseVocab(std::move(tokens));
}

std::vector<std::string> pretokenize(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (is_ascii_space(c)) {
      if (!current.empty()) {
        words.push_back(std::move(current));
        current.clear();
      }
    } else if (is_ascii_punct(c)) {
      if (!current.empty()) {
        words.push_back(std::move(current));
        current.clear();
      }
      words.emplace_back(1, c);
    } else {
      current.push_back(lower_ascii(c));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::vector<TokenId> base_tokenize(const BaseVocab& vocab, std::string_view text) {
  std::vector<TokenId> ids;
  std::string candidate;
  for (const std::string& word : pretokenize(text)) {
    std::vector<TokenId> pieces;
    std::size_t start = 0;
    bool bad = false;
    while (start < word.size()) {
      TokenId match = -1;
      std::size_t match_end = start;
      for (std::size_t end = word.size(); end > start; --end) {
        candidate.clear();
        if (start > 0) candidate = vocab.continuation_prefix();
        candidate.append(word, start, end - start);
        TokenId id = vocab.find(candidate);
        if (id >= 0) {
          match = id;
          match_end = end;
          break;
        }
      }
      if (match < 0) {
        bad = true;
        break;
      }
      pieces.push_back(match);
      start = match_end;
    }
    if (bad) {
      ids.push_back(vocab.unk_id());
    } else {
      ids.insert(ids.end(), pieces.begin(), pieces.end());
    }
  }
  return ids;
}

std::vector<TokenizedDoc> tokenize_corpus_serial(const BaseVocab& vocab,
                                                 const std::vector<LabeledDoc>& docs) {
  if (docs.empty()) fail("EmptyCorpus", "no documents to tokenize");
  std::vector<TokenizedDoc> out(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    out[i].ids = base_tokenize(vocab, docs[i].text);
    out[i].label = docs[i].label;
    if (out[i].ids.empty())
      fail("EmptyTokenization", "document " + std::to_string(i) + " tokenized to nothing");
  }
  return out;
}

std::vector<TokenizedDoc> tokenize_corpus(const BaseVocab& vocab,
                                          const std::vector<LabeledDoc>& docs) {
  if (docs.empty()) fail("EmptyCorpus", "no documents to tokenize");
  std::vector<TokenizedDoc> out(docs.size());
  std::ptrdiff_t first_empty = -1;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(docs.size()); ++i) {
    out[i].ids = base_tokenize(vocab, docs[i].text);
    out[i].label = docs[i].label;
    if (out[i].ids.empty()) {
#pragma omp critical
      if (first_empty < 0 || i < first_empty) first_empty = i;
    }
  }
  if (first_empty >= 0)
    fail("EmptyTokenization",
         "document " + std::to_string(first_empty) + " tokenized to nothing");
  return out;
}

std::vector<LabeledDoc> load_corpus_jsonl(const std::string& path) {
  auto in = detail::open_input(path);
  std::vector<LabeledDoc> docs;
  std::string line;
  std::size_t line_no = 0;
  for (; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    json j = parse_line(line, line_no, path);
    std::string where = path + ":" + std::to_string(line_no + 1);
    if (!j.contains("text") || !j["text"].is_string())
      fail("ParseError", where + ": missing string field 'text'");
    if (!j.contains("label")) fail("ParseError", where + ": missing field 'label'");
    LabeledDoc doc;
    doc.text = j["text"].get<std::string>();
    doc.label = label_from_json(j["label"], where);
    std::string_view trimmed(doc.text);
    while (!trimmed.empty() && is_ascii_space(trimmed.front())) trimmed.remove_prefix(1);
    while (!trimmed.empty() && is_ascii_space(trimmed.back())) trimmed.remove_suffix(1);
    if (trimmed.empty()) fail("ParseError", where + ": empty text");
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_tokenized_jsonl(const std::vector<TokenizedDoc>& docs, const std::string& path) {
  auto out = detail::open_output(path);
  for (const TokenizedDoc& doc : docs) {
    json j;
    j["ids"] = doc.ids;
    j["label"] = label_to_json(doc.label);
    out << j.dump() << '\n';
  }
}

std::vector<TokenizedDoc> load_tokenized_jsonl(const std::string& path) {
  auto in = detail::open_input(path);
  std::vector<TokenizedDoc> docs;
  std::string line;
  std::size_t line_no = 0;
  for (; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    json j = parse_line(line, line_no, path);
    std::string where = path + ":" + std::to_string(line_no + 1);
    if (!j.contains("ids") || !j["ids"].is_array())
      fail("ParseError", where + ": missing array field 'ids'");
    if (!j.contains("label")) fail("ParseError", where + ": missing field 'label'");
    TokenizedDoc doc;
    for (const json& v : j["ids"]) {
      if (!v.is_number_integer() && !v.is_number_unsigned())
        fail("ParseError", where + ": token ids must be integers");
      long long id = v.get<long long>();
      if (id < 0) fail("ParseError", where + ": negative token id");
      doc.ids.push_back(static_cast<TokenId>(id));
    }
    if (doc.ids.empty()) fail("ParseError", where + ": empty id list");
    doc.label = label_from_json(j["label"], where);
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace adapt
