#pragma once

#include <span>
#include <string>
#include <vector>

#include "adapt/corpus.hpp"
#include "adapt/taskvocab.hpp"

namespace adapt {

struct Insertion {
  int entry = 0;  // index into TaskVocabulary::entries()
  int pos = 0;    // match start position in the base tokenization

  friend bool operator==(const Insertion&, const Insertion&) = default;
};

struct AdaptiveTokenization {
  std::vector<TokenId> ids;           // base tokens plus inserted new ids
  std::vector<Insertion> insertions;  // audit records, sorted by position

  friend bool operator==(const AdaptiveTokenization&, const AdaptiveTokenization&) = default;
};

struct AdaptiveDoc {
  AdaptiveTokenization tok;
  Label label;

  friend bool operator==(const AdaptiveDoc&, const AdaptiveDoc&) = default;
};

// Entry indices sharing at least one token with base_ids, ascending.
std::vector<int> candidate_lookup(const TaskVocabulary& tv, std::span<const TokenId> base_ids);

// Core of the task tokenizer: finds candidate entries via the reverse
// index and inserts each entry's new id immediately before the first token
// of every match. Contiguous entries match as left-to-right
// non-overlapping runs; non-contiguous entries as leftmost-disjoint gapped
// subsequences. All original tokens are retained; removing ids >=
// base_vocab_size recovers the base tokenization exactly.
AdaptiveTokenization adaptive_tokenize_ids(const TaskVocabulary& tv,
                                           std::span<const TokenId> base_ids);

// base_tokenize followed by adaptive_tokenize_ids. Requires
// tv.base_vocab_size() == vocab.size().
AdaptiveTokenization adaptive_tokenize(const TaskVocabulary& tv, const BaseVocab& vocab,
                                       std::string_view text);

// Per-document application over a corpus; parallel version is OpenMP with
// order restored by index.
std::vector<AdaptiveDoc> apply_corpus(const TaskVocabulary& tv, const BaseVocab& vocab,
                                      const std::vector<LabeledDoc>& docs);
std::vector<AdaptiveDoc> apply_corpus_serial(const TaskVocabulary& tv, const BaseVocab& vocab,
                                             const std::vector<LabeledDoc>& docs);

// JSONL io: {"ids": [...], "insertions": [{"entry": i, "pos": p}], "label": ...}.
void save_adaptive_jsonl(const std::vector<AdaptiveDoc>& docs, const std::string& path);
std::vector<AdaptiveDoc> load_adaptive_jsonl(const std::string& path);

}  // namespace adapt
