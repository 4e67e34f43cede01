#include "adapt/taskvocab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <utility>

#include "json.hpp"

#include "adapt/error.hpp"
#include "io_util.hpp"

namespace adapt {

namespace {

using nlohmann::json;

const std::vector<int> kNoEntries;

json pplx_to_json(double v) {
  if (std::isinf(v)) return json("inf");
  return json(v);
}

double pplx_from_json(const json& j, const std::string& where) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    fail("ParseError", where + ": field 'pplx' string must be \"inf\"");
  }
  if (!j.is_number()) fail("ParseError", where + ": field 'pplx' must be a number or \"inf\"");
  return j.get<double>();
}

}  // namespace

TaskVocabulary::TaskVocabulary(std::size_t base_vocab_size, std::vector<TaskVocabEntry> entries)
    : base_vocab_size_(base_vocab_size), entries_(std::move(entries)) {
  std::set<std::vector<TokenId>> seen;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const TaskVocabEntry& e = entries_[i];
    if (e.tokens.empty()) fail("ParseError", "entry " + std::to_string(i) + " has no tokens");
    const TokenId expected = static_cast<TokenId>(base_vocab_size_ + i);
    if (e.id != expected)
      fail("IdRangeError", "entry " + std::to_string(i) + " has id " + std::to_string(e.id) +
                               ", expected " + std::to_string(expected));
    if (!seen.insert(e.tokens).second)
      fail("DuplicateSequence", "entry " + std::to_string(i) + " repeats an earlier sequence");
    for (TokenId t : e.tokens) {
      if (t < 0 || static_cast<std::size_t>(t) >= base_vocab_size_)
        fail("IdRangeError", "entry " + std::to_string(i) + " references base token " +
                                 std::to_string(t) + " outside the base vocabulary");
      auto& list = reverse_index_[t];
      if (list.empty() || list.back() != static_cast<int>(i))
        list.push_back(static_cast<int>(i));
    }
  }
}

const std::vector<int>& TaskVocabulary::entries_containing(TokenId base_token) const {
  auto it = reverse_index_.find(base_token);
  return it == reverse_index_.end() ? kNoEntries : it->second;
}

TaskVocabulary build_task_vocab(const std::vector<MinedSequence>& selected,
                                std::size_t base_vocab_size) {
  std::vector<TaskVocabEntry> entries;
  entries.reserve(selected.size());
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const MinedSequence& m = selected[i];
    entries.push_back(TaskVocabEntry{m.tokens, static_cast<TokenId>(base_vocab_size + i),
                                     m.contiguous, m.support, m.perplexity});
  }
  return TaskVocabulary(base_vocab_size, std::move(entries));
}

void save_task_vocab(const TaskVocabulary& tv, const std::string& path) {
  json j;
  j["base_vocab_size"] = tv.base_vocab_size();
  json seqs = json::array();
  for (const TaskVocabEntry& e : tv.entries()) {
    json s;
    s["tokens"] = e.tokens;
    s["id"] = e.id;
    s["contiguous"] = e.contiguous;
    s["support"] = e.support;
    s["pplx"] = pplx_to_json(e.pplx);
    seqs.push_back(std::move(s));
  }
  j["sequences"] = std::move(seqs);
  auto out = detail::open_output(path);
  out << j.dump(2) << '\n';
}

TaskVocabulary load_task_vocab(const std::string& path) {
  auto in = detail::open_input(path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) fail("ParseError", path + ": invalid JSON");
  if (!j.is_object() || !j.contains("base_vocab_size") || !j.contains("sequences"))
    fail("ParseError", path + ": expected fields 'base_vocab_size' and 'sequences'");
  if (!j["base_vocab_size"].is_number_unsigned() && !j["base_vocab_size"].is_number_integer())
    fail("ParseError", path + ": field 'base_vocab_size' must be an integer");
  const long long base = j["base_vocab_size"].get<long long>();
  if (base < 0) fail("ParseError", path + ": negative base_vocab_size");
  if (!j["sequences"].is_array()) fail("ParseError", path + ": field 'sequences' must be an array");

  std::vector<TaskVocabEntry> entries;
  std::size_t idx = 0;
  for (const json& s : j["sequences"]) {
    std::string where = path + ": sequences[" + std::to_string(idx) + "]";
    for (const char* field : {"tokens", "id", "contiguous", "support", "pplx"})
      if (!s.contains(field)) fail("ParseError", where + ": missing field '" + field + "'");
    TaskVocabEntry e;
    if (!s["tokens"].is_array()) fail("ParseError", where + ": field 'tokens' must be an array");
    for (const json& t : s["tokens"]) {
      if (!t.is_number_integer() && !t.is_number_unsigned())
        fail("ParseError", where + ": token ids must be integers");
      e.tokens.push_back(static_cast<TokenId>(t.get<long long>()));
    }
    if (!s["id"].is_number_integer() && !s["id"].is_number_unsigned())
      fail("ParseError", where + ": field 'id' must be an integer");
    e.id = static_cast<TokenId>(s["id"].get<long long>());
    if (!s["contiguous"].is_boolean())
      fail("ParseError", where + ": field 'contiguous' must be a boolean");
    e.contiguous = s["contiguous"].get<bool>();
    if (!s["support"].is_number_integer() && !s["support"].is_number_unsigned())
      fail("ParseError", where + ": field 'support' must be an integer");
    e.support = static_cast<int>(s["support"].get<long long>());
    e.pplx = pplx_from_json(s["pplx"], where);
    entries.push_back(std::move(e));
    ++idx;
  }
  return TaskVocabulary(static_cast<std::size_t>(base), std::move(entries));
}

}  // namespace adapt
