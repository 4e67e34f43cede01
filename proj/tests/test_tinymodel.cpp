#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "doctest.h"

#include "adapt/error.hpp"
#include "adapt/tinymodel.hpp"
#include "helpers.hpp"

using namespace adapt;

namespace {

TinyClassifier zero_model(std::int64_t base, std::int64_t task, int d, int h,
                          std::vector<std::string> labels) {
  TinyClassifier m;
  m.base_vocab_size = base;
  m.task_vocab_size = task;
  m.dim = d;
  m.hidden = h;
  m.labels = std::move(labels);
  m.embedding.assign(static_cast<std::size_t>(m.vocab_total()) * d, 0.0);
  m.dense1_w.assign(static_cast<std::size_t>(d) * h, 0.0);
  m.dense1_b.assign(static_cast<std::size_t>(h), 0.0);
  m.dense2_w.assign(static_cast<std::size_t>(h) * m.num_classes(), 0.0);
  m.dense2_b.assign(static_cast<std::size_t>(m.num_classes()), 0.0);
  return m;
}

TinyClassifier random_model(std::int64_t base, std::int64_t task, int d, int h, int classes,
                            std::uint64_t seed) {
  std::vector<std::string> labels;
  for (int c = 0; c < classes; ++c) labels.push_back(std::to_string(c));
  return init_model(base, task, d, h, labels, seed, 0.02, 0, 0, 0, 0.0);
}

// Central finite differences over every parameter of the model.
Gradients finite_difference_grads(TinyClassifier model, const std::vector<Example>& batch,
                                  double step) {
  Gradients fd;
  auto probe = [&](std::vector<double>& params, std::vector<double>& out) {
    out.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = params[i];
      params[i] = saved + step;
      const double up = loss_and_grads(model, batch).first;
      params[i] = saved - step;
      const double down = loss_and_grads(model, batch).first;
      params[i] = saved;
      out[i] = (up - down) / (2.0 * step);
    }
  };
  probe(model.embedding, fd.embedding);
  probe(model.dense1_w, fd.dense1_w);
  probe(model.dense1_b, fd.dense1_b);
  probe(model.dense2_w, fd.dense2_w);
  probe(model.dense2_b, fd.dense2_b);
  return fd;
}

double max_rel_error(const Gradients& a, const Gradients& b) {
  double worst = 0.0;
  auto scan = [&](const std::vector<double>& x, const std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double denom = std::max({std::abs(x[i]), std::abs(y[i]), 1e-6});
      worst = std::max(worst, std::abs(x[i] - y[i]) / denom);
    }
  };
  scan(a.embedding, b.embedding);
  scan(a.dense1_w, b.dense1_w);
  scan(a.dense1_b, b.dense1_b);
  scan(a.dense2_w, b.dense2_w);
  scan(a.dense2_b, b.dense2_b);
  return worst;
}

std::vector<Example> separable_dataset() {
  std::vector<Example> data;
  for (int i = 0; i < 8; ++i) {
    data.push_back(Example{{1, 3}, "0"});
    data.push_back(Example{{2, 3}, "1"});
  }
  return data;
}

bool same_bytes(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("zero model emits the uniform distribution") {
  const TinyClassifier m = zero_model(5, 0, 4, 3, {"a", "b", "c", "d"});
  const auto probs = forward(m, std::vector<TokenId>{0, 2});
  for (double p : probs) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("probabilities sum to one") {
  const TinyClassifier m = random_model(20, 2, 8, 6, 3, 11);
  std::mt19937 rng(4);
  std::uniform_int_distribution<TokenId> tok(0, 21);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<TokenId> ids(1 + iter % 7);
    for (auto& t : ids) t = tok(rng);
    const auto probs = forward(m, ids);
    double sum = 0.0;
    for (double p : probs) sum += p;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("mean pooling makes token order irrelevant") {
  const TinyClassifier m = random_model(10, 0, 6, 5, 2, 3);
  const auto a = forward(m, std::vector<TokenId>{1, 4, 7, 4});
  const auto b = forward(m, std::vector<TokenId>{4, 7, 4, 1});
  CHECK(a == b);
}

TEST_CASE("forward rejects out-of-range and empty inputs") {
  const TinyClassifier m = zero_model(5, 1, 4, 3, {"a", "b"});
  try {
    forward(m, std::vector<TokenId>{6});
    FAIL("expected IdRangeError");
  } catch (const Error& e) {
    CHECK(e.kind() == "IdRangeError");
  }
  try {
    forward(m, std::vector<TokenId>{});
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.kind() == "ConfigError");
  }
}

TEST_CASE("uniform model loss is ln C and batch duplication keeps it") {
  const TinyClassifier m = zero_model(5, 0, 4, 3, {"x", "y"});
  std::vector<Example> batch = {{{0, 1}, "x"}, {{2}, "y"}};
  const double loss = loss_and_grads(m, batch).first;
  CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  std::vector<Example> doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  CHECK(loss_and_grads(m, doubled).first == doctest::Approx(loss).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  // exactly 20 parameters: 4x2 embedding + (2x2+2) + (2x2+2)
  TinyClassifier m = random_model(3, 1, 2, 2, 2, 99);
  std::vector<Example> batch = {{{0, 1, 3}, "0"}, {{2}, "1"}, {{1, 1}, "0"}};
  const Gradients analytic = loss_and_grads(m, batch).second;
  const Gradients fd = finite_difference_grads(m, batch, 1e-4);
  CHECK(max_rel_error(analytic, fd) <= 1e-4);

  TinyClassifier bigger = random_model(12, 3, 5, 4, 3, 7);
  std::vector<Example> batch2 = {{{0, 5, 9, 14}, "2"}, {{11}, "0"}, {{3, 3, 7}, "1"}};
  CHECK(max_rel_error(loss_and_grads(bigger, batch2).second,
                      finite_difference_grads(bigger, batch2, 1e-4)) <= 1e-4);
}

TEST_CASE("label resolution and loss validation") {
  const TinyClassifier m = zero_model(5, 0, 4, 3, {"x", "y"});
  std::vector<Example> bad = {{{0}, "zebra"}};
  try {
    loss_and_grads(m, bad);
    FAIL("expected LabelError");
  } catch (const Error& e) {
    CHECK(e.kind() == "LabelError");
  }
  TinyClassifier broken = m;
  broken.dense2_b[0] = std::numeric_limits<double>::infinity();
  std::vector<Example> batch = {{{0}, "x"}};
  try {
    loss_and_grads(broken, batch);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.kind() == "NonFiniteLoss");
  }
}

TEST_CASE("all-frozen training leaves the model bit-identical") {
  TinyClassifier m = random_model(6, 0, 4, 3, 2, 5);
  const TinyClassifier before = m;
  FreezeMask mask = full_mask();
  for (auto& [name, flag] : mask.trainable) flag = false;
  TrainConfig cfg;
  cfg.epochs = 5;
  sparse_finetune(m, separable_dataset(), mask, cfg);
  CHECK(same_bytes(m.embedding, before.embedding));
  CHECK(same_bytes(m.dense1_w, before.dense1_w));
  CHECK(same_bytes(m.dense1_b, before.dense1_b));
  CHECK(same_bytes(m.dense2_w, before.dense2_w));
  CHECK(same_bytes(m.dense2_b, before.dense2_b));
}

TEST_CASE("new-token rows train even under a frozen embedding module") {
  TinyClassifier m = random_model(6, 2, 4, 3, 2, 5);
  const TinyClassifier before = m;
  FreezeMask mask = full_mask();
  mask.trainable["embedding"] = false;
  TrainConfig cfg;
  cfg.epochs = 3;
  std::vector<Example> data = {{{0, 6}, "0"}, {{1, 7}, "1"}};  // touch the task rows
  sparse_finetune(m, data, mask, cfg);
  const std::size_t base_len = static_cast<std::size_t>(m.base_vocab_size) * m.dim;
  CHECK(std::memcmp(m.embedding.data(), before.embedding.data(),
                    base_len * sizeof(double)) == 0);
  bool task_rows_moved = false;
  for (std::size_t i = base_len; i < m.embedding.size(); ++i)
    if (m.embedding[i] != before.embedding[i]) task_rows_moved = true;
  CHECK(task_rows_moved);
  // dense layers were trainable and must have moved
  CHECK_FALSE(same_bytes(m.dense1_w, before.dense1_w));
}

TEST_CASE("training is deterministic and full-budget equals an all-trainable run") {
  const auto data = separable_dataset();
  TrainConfig cfg;
  cfg.epochs = 4;
  TinyClassifier a = random_model(6, 1, 4, 3, 2, 5);
  TinyClassifier b = random_model(6, 1, 4, 3, 2, 5);
  CHECK(same_bytes(a.embedding, b.embedding));
  sparse_finetune(a, data, full_mask(), cfg);
  sparse_finetune(b, data, full_mask(), cfg);
  CHECK(same_bytes(a.embedding, b.embedding));
  CHECK(same_bytes(a.dense1_w, b.dense1_w));
  CHECK(same_bytes(a.dense2_w, b.dense2_w));
}

TEST_CASE("loss decreases over the first epoch on the separable task") {
  TinyClassifier m = random_model(6, 0, 4, 3, 2, 21);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.epochs = 3;
  const TrainMetrics metrics = sparse_finetune(m, separable_dataset(), full_mask(), cfg);
  REQUIRE(metrics.epoch_loss.size() == 3);
  CHECK(metrics.epoch_loss[1] < metrics.epoch_loss[0]);
}

TEST_CASE("training config validation") {
  TinyClassifier m = random_model(6, 0, 4, 3, 2, 5);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  try {
    sparse_finetune(m, separable_dataset(), full_mask(), cfg);
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.kind() == "ConfigError");
  }
  FreezeMask partial;
  partial.trainable["dense1"] = true;
  TrainConfig ok;
  try {
    sparse_finetune(m, separable_dataset(), partial, ok);
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.kind() == "ConfigError");
  }
}

TEST_CASE("evaluate scores accuracy and macro F1") {
  // constant class-0 predictor via a biased output layer
  TinyClassifier constant = zero_model(5, 0, 4, 3, {"neg", "pos"});
  constant.dense2_b[0] = 1.0;
  std::vector<Example> balanced = {{{0}, "neg"}, {{1}, "neg"}, {{2}, "pos"}, {{3}, "pos"}};
  const EvalResult r = evaluate_serial(constant, balanced);
  CHECK(r.accuracy == doctest::Approx(0.5));
  CHECK(r.macro_f1 == doctest::Approx(1.0 / 3.0));

  // perfect predictor: separate the two classes via embeddings
  TinyClassifier m = random_model(6, 0, 4, 3, 2, 21);
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.epochs = 60;
  const auto data = separable_dataset();
  sparse_finetune(m, data, full_mask(), cfg);
  const EvalResult perfect = evaluate_serial(m, data);
  CHECK(perfect.accuracy == doctest::Approx(1.0));
  CHECK(perfect.macro_f1 == doctest::Approx(1.0));

  try {
    evaluate_serial(m, {{{0}, "mystery"}});
    FAIL("expected LabelError");
  } catch (const Error& e) {
    CHECK(e.kind() == "LabelError");
  }
}

TEST_CASE("absent classes count as zero in macro F1") {
  TinyClassifier constant = zero_model(5, 0, 4, 3, {"a", "b", "c"});
  constant.dense2_b[0] = 1.0;
  std::vector<Example> data = {{{0}, "a"}, {{1}, "a"}};
  // predicts "a" everywhere: class a F1 = 1, classes b and c = 0
  const EvalResult r = evaluate_serial(constant, data);
  CHECK(r.accuracy == doctest::Approx(1.0));
  CHECK(r.macro_f1 == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("model json round trip is exact") {
  testutil::TempDir tmp;
  const TinyClassifier m = random_model(9, 2, 5, 4, 3, 123);
  save_model(m, tmp.file("model.json"));
  const TinyClassifier loaded = load_model(tmp.file("model.json"));
  CHECK(same_bytes(m.embedding, loaded.embedding));
  CHECK(same_bytes(m.dense1_w, loaded.dense1_w));
  CHECK(same_bytes(m.dense1_b, loaded.dense1_b));
  CHECK(same_bytes(m.dense2_w, loaded.dense2_w));
  CHECK(same_bytes(m.dense2_b, loaded.dense2_b));
  CHECK(m.labels == loaded.labels);
  save_model(loaded, tmp.file("model2.json"));
  CHECK(testutil::read_file(tmp.file("model.json")) ==
        testutil::read_file(tmp.file("model2.json")));

  testutil::write_file(tmp.file("bad.json"), "{\"version\": 1}");
  try {
    load_model(tmp.file("bad.json"));
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == "ParseError");
  }
}

TEST_CASE("init_model draws task rows at the configured scale") {
  const TinyClassifier m = init_model(50, 5, 8, 4, {"0", "1"}, 42, 0.02, 0, 0, 0, 0.0);
  const std::size_t base_len = static_cast<std::size_t>(m.base_vocab_size) * m.dim;
  double max_task = 0.0;
  for (std::size_t i = base_len; i < m.embedding.size(); ++i)
    max_task = std::max(max_task, std::abs(m.embedding[i]));
  CHECK(max_task > 0.0);
  CHECK(max_task < 0.12);  // 0.02 stddev stays far below the base 0.1 scale tail

  // same seed, same bytes; pretraining moves the dense layers
  const TinyClassifier again = init_model(50, 5, 8, 4, {"0", "1"}, 42, 0.02, 0, 0, 0, 0.0);
  CHECK(same_bytes(m.embedding, again.embedding));
  const TinyClassifier pretrained = init_model(50, 5, 8, 4, {"0", "1"}, 42, 0.02, 64, 8, 2, 0.05);
  CHECK_FALSE(same_bytes(m.dense1_w, pretrained.dense1_w));
  // pretraining only sees base tokens, so task rows keep their init
  CHECK(std::memcmp(m.embedding.data() + base_len, pretrained.embedding.data() + base_len,
                    (m.embedding.size() - base_len) * sizeof(double)) == 0);
}
