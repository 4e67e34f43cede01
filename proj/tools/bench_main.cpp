// Serial reference vs OpenMP kernel comparison on synthetic data.
// Run: ./adapt_bench [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "adapt/adapttok.hpp"
#include "adapt/corpus.hpp"
#include "adapt/scoring.hpp"
#include "adapt/sensitivity.hpp"
#include "adapt/seqmine.hpp"
#include "adapt/taskvocab.hpp"
#include "adapt/tinymodel.hpp"

namespace {

struct Fixture {
  adapt::BaseVocab vocab;
  std::vector<adapt::LabeledDoc> docs;
  std::vector<adapt::TokenizedDoc> tokenized;
  std::vector<adapt::TokenizedDoc> mining_corpus;
  adapt::TaskVocabulary tv;
  adapt::TinyClassifier model;
  std::vector<adapt::Example> examples;
};

Fixture make_fixture() {
  Fixture f;
  std::mt19937_64 rng(42);

  std::vector<std::string> tokens = {"[UNK]"};
  for (int i = 0; i < 600; ++i) tokens.push_back("w" + std::to_string(i));
  f.vocab = adapt::BaseVocab(tokens);

  std::uniform_int_distribution<int> word(0, 599);
  for (int d = 0; d < 4000; ++d) {
    std::ostringstream text;
    for (int k = 0; k < 40; ++k) {
      if (k) text << ' ';
      text << "w" << word(rng) % (1 + word(rng) % 600);
    }
    f.docs.push_back(adapt::LabeledDoc{text.str(), adapt::Label{std::to_string(d % 2), true}});
  }
  f.tokenized = adapt::tokenize_corpus_serial(f.vocab, f.docs);

  // Smaller, denser corpus so mining has work but bounded output.
  std::uniform_int_distribution<int> dense(0, 24);
  for (int d = 0; d < 400; ++d) {
    adapt::TokenizedDoc doc;
    for (int k = 0; k < 24; ++k) doc.ids.push_back(static_cast<adapt::TokenId>(dense(rng)));
    doc.label = adapt::Label{"0", true};
    f.mining_corpus.push_back(std::move(doc));
  }

  std::vector<adapt::MinedSequence> selected;
  for (int i = 0; i < 40; ++i) {
    adapt::MinedSequence m;
    m.tokens = {static_cast<adapt::TokenId>(1 + 3 * i), static_cast<adapt::TokenId>(2 + 3 * i)};
    m.support = 10;
    m.contiguous = i % 2 == 0;
    selected.push_back(std::move(m));
  }
  f.tv = adapt::build_task_vocab(selected, f.vocab.size());

  f.model = adapt::init_model(static_cast<std::int64_t>(f.vocab.size()), 40, 16, 32,
                              {"0", "1"}, 7, 0.02, 0, 0, 0, 0.0);
  for (int i = 0; i < 800; ++i) {
    adapt::Example ex;
    for (int k = 0; k < 30; ++k) ex.ids.push_back(static_cast<adapt::TokenId>(word(rng)));
    ex.label = std::to_string(i % 2);
    f.examples.push_back(std::move(ex));
  }
  return f;
}

const Fixture& fixture() {
  static const Fixture f = make_fixture();
  return f;
}

void BM_TokenizeCorpusSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(adapt::tokenize_corpus_serial(f.vocab, f.docs));
}

void BM_TokenizeCorpusParallel(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(adapt::tokenize_corpus(f.vocab, f.docs));
}

void BM_BuildStatsSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(adapt::build_stats_serial(f.tokenized));
}

void BM_BuildStatsParallel(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(adapt::build_stats(f.tokenized));
}

void BM_MineClosedSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  adapt::MiningParams params{.min_frequency = 40, .min_len = 2, .max_len = 4};
  for (auto _ : state)
    benchmark::DoNotOptimize(adapt::mine_closed_serial(f.mining_corpus, params));
}

void BM_MineClosedParallel(benchmark::State& state) {
  const Fixture& f = fixture();
  adapt::MiningParams params{.min_frequency = 40, .min_len = 2, .max_len = 4};
  for (auto _ : state) benchmark::DoNotOptimize(adapt::mine_closed(f.mining_corpus, params));
}

void BM_ApplyCorpusSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(adapt::apply_corpus_serial(f.tv, f.vocab, f.docs));
}

void BM_ApplyCorpusParallel(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(adapt::apply_corpus(f.tv, f.vocab, f.docs));
}

void BM_DispersionSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(adapt::measure_dispersion_serial(f.model, f.examples));
}

void BM_DispersionParallel(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(adapt::measure_dispersion(f.model, f.examples));
}

void BM_EvaluateSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(adapt::evaluate_serial(f.model, f.examples));
}

void BM_EvaluateParallel(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(adapt::evaluate(f.model, f.examples));
}

BENCHMARK(BM_TokenizeCorpusSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TokenizeCorpusParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildStatsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildStatsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MineClosedSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MineClosedParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ApplyCorpusSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ApplyCorpusParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DispersionSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DispersionParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
