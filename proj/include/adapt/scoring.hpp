#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "adapt/corpus.hpp"
#include "adapt/seqmine.hpp"

namespace adapt {

// Unigram and adjacent-bigram counts over a tokenized corpus. Bigrams
// never span document boundaries.
struct CorpusStats {
  long long total_tokens = 0;  // N
  std::unordered_map<TokenId, long long> unigram;
  std::unordered_map<std::uint64_t, long long> bigram;

  static std::uint64_t pair_key(TokenId a, TokenId b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  }

  long long unigram_count(TokenId t) const {
    auto it = unigram.find(t);
    return it == unigram.end() ? 0 : it->second;
  }
  long long bigram_count(TokenId a, TokenId b) const {
    auto it = bigram.find(pair_key(a, b));
    return it == bigram.end() ? 0 : it->second;
  }
};

struct SelectionParams {
  double pplx_cutoff = 0.0;
  long long freq_cutoff = 1;
  double vocab_cap_fraction = 0.10;
};

CorpusStats build_stats(const std::vector<TokenizedDoc>& corpus);
CorpusStats build_stats_serial(const std::vector<TokenizedDoc>& corpus);

// Unigram-normalized perplexity of a token sequence under the corpus
// counts: p = ct(x1)/N * prod ct(x_j x_{j+1})/ct(x_j), result p^(-1/k).
// A zero bigram count yields +infinity; a token absent from the corpus
// throws UnknownToken.
double compute_pplx(const CorpusStats& stats, std::span<const TokenId> seq);

// Keeps candidates with perplexity >= pplx_cutoff and support >=
// freq_cutoff, fills their perplexity fields, ranks by (perplexity desc
// with +inf first, support desc, token-id lexicographic asc) and truncates
// to floor(vocab_cap_fraction * base_vocab_size) entries.
std::vector<MinedSequence> select_sequences(std::vector<MinedSequence> candidates,
                                            const CorpusStats& stats,
                                            const SelectionParams& params,
                                            std::size_t base_vocab_size);

}  // namespace adapt
