#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "adapt/corpus.hpp"
#include "adapt/seqmine.hpp"

namespace adapt {

struct TaskVocabEntry {
  std::vector<TokenId> tokens;  // base-token ids of the mined sequence
  TokenId id = 0;               // assigned new token id (>= base vocab size)
  bool contiguous = false;
  int support = 0;
  double pplx = 0.0;

  friend bool operator==(const TaskVocabEntry&, const TaskVocabEntry&) = default;
};

// Selected sequences promoted to new token ids appended after the base
// vocabulary, with a reverse index from base token id to the entries
// containing it. Immutable after construction.
class TaskVocabulary {
 public:
  TaskVocabulary() = default;
  TaskVocabulary(std::size_t base_vocab_size, std::vector<TaskVocabEntry> entries);

  std::size_t base_vocab_size() const { return base_vocab_size_; }
  const std::vector<TaskVocabEntry>& entries() const { return entries_; }

  // Indices of entries whose sequence contains the base token; empty when
  // none do.
  const std::vector<int>& entries_containing(TokenId base_token) const;

  friend bool operator==(const TaskVocabulary& a, const TaskVocabulary& b) {
    return a.base_vocab_size_ == b.base_vocab_size_ && a.entries_ == b.entries_;
  }

 private:
  std::size_t base_vocab_size_ = 0;
  std::vector<TaskVocabEntry> entries_;
  std::unordered_map<TokenId, std::vector<int>> reverse_index_;
};

// Assigns new ids base_vocab_size, base_vocab_size+1, ... in the order of
// the selected list and builds the reverse index. Throws DuplicateSequence
// if two inputs share a token list.
TaskVocabulary build_task_vocab(const std::vector<MinedSequence>& selected,
                                std::size_t base_vocab_size);

// Canonical JSON with sorted keys; load validates the id range
// (IdRangeError) and structure (ParseError) and rebuilds the reverse
// index. load(save(tv)) == tv.
void save_task_vocab(const TaskVocabulary& tv, const std::string& path);
TaskVocabulary load_task_vocab(const std::string& path);

}  // namespace adapt
