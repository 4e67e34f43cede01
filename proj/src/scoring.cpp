#include "adapt/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adapt/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace adapt {

namespace {

void accumulate_doc(CorpusStats& stats, const TokenizedDoc& doc) {
  stats.total_tokens += static_cast<long long>(doc.ids.size());
  for (std::size_t j = 0; j < doc.ids.size(); ++j) {
    ++stats.unigram[doc.ids[j]];
    if (j + 1 < doc.ids.size())
      ++stats.bigram[CorpusStats::pair_key(doc.ids[j], doc.ids[j + 1])];
  }
}

void merge_into(CorpusStats& into, const CorpusStats& from) {
  into.total_tokens += from.total_tokens;
  for (const auto& [k, v] : from.unigram) into.unigram[k] += v;
  for (const auto& [k, v] : from.bigram) into.bigram[k] += v;
}

}  // namespace

CorpusStats build_stats_serial(const std::vector<TokenizedDoc>& corpus) {
  if (corpus.empty()) fail("EmptyCorpus", "cannot build statistics over an empty corpus");
  CorpusStats stats;
  for (const TokenizedDoc& doc : corpus) accumulate_doc(stats, doc);
  return stats;
}

CorpusStats build_stats(const std::vector<TokenizedDoc>& corpus) {
  if (corpus.empty()) fail("EmptyCorpus", "cannot build statistics over an empty corpus");
#ifdef _OPENMP
  const int threads = omp_get_max_threads();
  std::vector<CorpusStats> partial(static_cast<std::size_t>(threads));
#pragma omp parallel num_threads(threads)
  {
    CorpusStats& local = partial[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(corpus.size()); ++i)
      accumulate_doc(local, corpus[static_cast<std::size_t>(i)]);
  }
  CorpusStats stats;
  for (const CorpusStats& p : partial) merge_into(stats, p);
  return stats;
#else
  return build_stats_serial(corpus);
#endif
}

double compute_pplx(const CorpusStats& stats, std::span<const TokenId> seq) {
  if (seq.empty()) fail("ConfigError", "compute_pplx requires a non-empty sequence");
  for (TokenId t : seq)
    if (stats.unigram_count(t) == 0)
      fail("UnknownToken", "token " + std::to_string(t) + " does not occur in the corpus");

  const double k = static_cast<double>(seq.size());
  double log_p = std::log(static_cast<double>(stats.unigram_count(seq[0]))) -
                 std::log(static_cast<double>(stats.total_tokens));
  for (std::size_t j = 0; j + 1 < seq.size(); ++j) {
    const long long pair = stats.bigram_count(seq[j], seq[j + 1]);
    if (pair == 0) return std::numeric_limits<double>::infinity();
    log_p += std::log(static_cast<double>(pair)) -
             std::log(static_cast<double>(stats.unigram_count(seq[j])));
  }
  return std::exp(-log_p / k);
}

std::vector<MinedSequence> select_sequences(std::vector<MinedSequence> candidates,
                                            const CorpusStats& stats,
                                            const SelectionParams& params,
                                            std::size_t base_vocab_size) {
  if (params.vocab_cap_fraction <= 0.0 || params.vocab_cap_fraction > 1.0)
    fail("ConfigError", "vocab cap fraction must be in (0, 1]");
  if (params.freq_cutoff < 1) fail("ConfigError", "frequency cutoff must be >= 1");
  if (params.pplx_cutoff < 0.0) fail("ConfigError", "perplexity cutoff must be >= 0");

  // Exceptions cannot cross the parallel region; surface the first one after.
  std::ptrdiff_t bad = -1;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(candidates.size()); ++i) {
    MinedSequence& c = candidates[static_cast<std::size_t>(i)];
    try {
      c.perplexity = compute_pplx(stats, c.tokens);
    } catch (const Error&) {
#pragma omp critical
      if (bad < 0 || i < bad) bad = i;
    }
  }
  if (bad >= 0) compute_pplx(stats, candidates[static_cast<std::size_t>(bad)].tokens);

  std::vector<MinedSequence> kept;
  kept.reserve(candidates.size());
  for (MinedSequence& c : candidates)
    if (c.support >= params.freq_cutoff && c.perplexity >= params.pplx_cutoff)
      kept.push_back(std::move(c));

  std::sort(kept.begin(), kept.end(), [](const MinedSequence& a, const MinedSequence& b) {
    if (a.perplexity != b.perplexity) return a.perplexity > b.perplexity;  // +inf first
    if (a.support != b.support) return a.support > b.support;
    return a.tokens < b.tokens;
  });

  const std::size_t cap = static_cast<std::size_t>(
      std::floor(params.vocab_cap_fraction * static_cast<double>(base_vocab_size)));
  if (kept.size() > cap) kept.resize(cap);
  return kept;
}

}  // namespace adapt
