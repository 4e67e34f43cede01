#pragma once

#include <span>
#include <string>
#include <vector>

#include "adapt/corpus.hpp"

namespace adapt {

struct MiningParams {
  int min_frequency = 5;  // document support
  int min_len = 3;
  int max_len = 20;
  int max_gap = -1;  // max tokens skipped between consecutive matches; < 0 = unlimited
};

struct MinedSequence {
  std::vector<TokenId> tokens;
  int support = 0;        // number of supporting documents
  bool contiguous = false;  // some supporting document contains it as a run
  double perplexity = 0.0;  // filled by the selection stage

  friend bool operator==(const MinedSequence&, const MinedSequence&) = default;
};

// True if seq occurs in doc as an in-order subsequence. With max_gap >= 0
// at most max_gap tokens may be skipped between consecutive elements.
bool contains_subsequence(std::span<const TokenId> doc, std::span<const TokenId> seq,
                          int max_gap = -1);

// True if seq occurs in doc as a contiguous run.
bool contains_contiguous(std::span<const TokenId> doc, std::span<const TokenId> seq);

// Number of documents containing seq as a (possibly gapped) subsequence;
// each document counts at most once.
int support_of(const std::vector<TokenizedDoc>& corpus, std::span<const TokenId> seq,
               int max_gap = -1);

// Closed frequent sequence mining over the tokenized corpus: returns
// exactly the sequences with min_len <= |s| <= max_len, document support
// >= min_frequency, and no proper super-sequence of equal support within
// the frequent set. Output is sorted by (support desc, length desc,
// token-id lexicographic asc) and is independent of document order and
// thread count. The parallel version splits the search across first-item
// projections.
std::vector<MinedSequence> mine_closed(const std::vector<TokenizedDoc>& corpus,
                                       const MiningParams& params);
std::vector<MinedSequence> mine_closed_serial(const std::vector<TokenizedDoc>& corpus,
                                              const MiningParams& params);

// Canonical output order of mine_closed.
bool mined_order_less(const MinedSequence& a, const MinedSequence& b);

// TSV io: columns tokens (space-separated ids), support, contiguous (0/1),
// header line present. save_selected_tsv adds a pplx column (decimal or
// the literal "inf").
void save_mined_tsv(const std::vector<MinedSequence>& seqs, const std::string& path);
std::vector<MinedSequence> load_mined_tsv(const std::string& path);
void save_selected_tsv(const std::vector<MinedSequence>& seqs, const std::string& path);
std::vector<MinedSequence> load_selected_tsv(const std::string& path);

}  // namespace adapt
