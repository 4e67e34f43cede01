#include "adapt/tinymodel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "json.hpp"

#include "adapt/error.hpp"
#include "io_util.hpp"

namespace adapt {

namespace {

using nlohmann::json;

struct Resolved {
  const std::vector<TokenId>* ids;
  int cls;
};

std::vector<Resolved> resolve_labels(const TinyClassifier& model,
                                     std::span<const Example> batch) {
  std::vector<Resolved> out;
  out.reserve(batch.size());
  for (const Example& ex : batch) {
    const int cls = model.class_of(ex.label);
    if (cls < 0) fail("LabelError", "label '" + ex.label + "' is not in the model's label set");
    out.push_back(Resolved{&ex.ids, cls});
  }
  return out;
}

void check_ids(const TinyClassifier& model, std::span<const TokenId> ids) {
  if (ids.empty()) fail("ConfigError", "cannot run the model on an empty id list");
  for (TokenId id : ids)
    if (id < 0 || id >= model.vocab_total())
      fail("IdRangeError", "token id " + std::to_string(id) + " outside vocabulary of size " +
                               std::to_string(model.vocab_total()));
}

ForwardTrace trace_impl(const TinyClassifier& model, std::span<const TokenId> ids,
                        std::vector<double>* pre1_out) {
  const int d = model.dim, h = model.hidden, c = model.num_classes();
  ForwardTrace t;
  t.pooled.assign(static_cast<std::size_t>(d), 0.0);
  for (TokenId id : ids) {
    const double* row = model.embedding.data() + static_cast<std::size_t>(id) * d;
    for (int k = 0; k < d; ++k) t.pooled[static_cast<std::size_t>(k)] += row[k];
  }
  const double inv_len = 1.0 / static_cast<double>(ids.size());
  for (double& v : t.pooled) v *= inv_len;

  std::vector<double> pre1(static_cast<std::size_t>(h));
  for (int j = 0; j < h; ++j) {
    double acc = model.dense1_b[static_cast<std::size_t>(j)];
    for (int k = 0; k < d; ++k)
      acc += t.pooled[static_cast<std::size_t>(k)] *
             model.dense1_w[static_cast<std::size_t>(k) * h + j];
    pre1[static_cast<std::size_t>(j)] = acc;
  }
  t.hidden_act.resize(static_cast<std::size_t>(h));
  for (int j = 0; j < h; ++j)
    t.hidden_act[static_cast<std::size_t>(j)] = std::max(0.0, pre1[static_cast<std::size_t>(j)]);

  std::vector<double> logits(static_cast<std::size_t>(c));
  for (int y = 0; y < c; ++y) {
    double acc = model.dense2_b[static_cast<std::size_t>(y)];
    for (int j = 0; j < h; ++j)
      acc += t.hidden_act[static_cast<std::size_t>(j)] *
             model.dense2_w[static_cast<std::size_t>(j) * c + y];
    logits[static_cast<std::size_t>(y)] = acc;
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  t.probs.resize(static_cast<std::size_t>(c));
  for (int y = 0; y < c; ++y) {
    t.probs[static_cast<std::size_t>(y)] = std::exp(logits[static_cast<std::size_t>(y)] - peak);
    z += t.probs[static_cast<std::size_t>(y)];
  }
  for (double& p : t.probs) p /= z;

  if (pre1_out) *pre1_out = std::move(pre1);
  return t;
}

Gradients zero_grads(const TinyClassifier& model) {
  Gradients g;
  g.embedding.assign(model.embedding.size(), 0.0);
  g.dense1_w.assign(model.dense1_w.size(), 0.0);
  g.dense1_b.assign(model.dense1_b.size(), 0.0);
  g.dense2_w.assign(model.dense2_w.size(), 0.0);
  g.dense2_b.assign(model.dense2_b.size(), 0.0);
  return g;
}

// Accumulates one example's loss and gradients, scaled by `weight`.
double backprop_one(const TinyClassifier& model, const std::vector<TokenId>& ids, int cls,
                    double weight, Gradients& g) {
  const int d = model.dim, h = model.hidden, c = model.num_classes();
  std::vector<double> pre1;
  ForwardTrace t = trace_impl(model, ids, &pre1);

  const double p_true = t.probs[static_cast<std::size_t>(cls)];
  const double loss = -std::log(std::max(p_true, 1e-300));

  std::vector<double> dlogits(t.probs);
  dlogits[static_cast<std::size_t>(cls)] -= 1.0;

  std::vector<double> dact1(static_cast<std::size_t>(h), 0.0);
  for (int j = 0; j < h; ++j) {
    const double a = t.hidden_act[static_cast<std::size_t>(j)];
    double acc = 0.0;
    for (int y = 0; y < c; ++y) {
      const double dl = dlogits[static_cast<std::size_t>(y)];
      g.dense2_w[static_cast<std::size_t>(j) * c + y] += weight * a * dl;
      acc += model.dense2_w[static_cast<std::size_t>(j) * c + y] * dl;
    }
    dact1[static_cast<std::size_t>(j)] = acc;
  }
  for (int y = 0; y < c; ++y)
    g.dense2_b[static_cast<std::size_t>(y)] += weight * dlogits[static_cast<std::size_t>(y)];

  std::vector<double> dpre1(static_cast<std::size_t>(h));
  for (int j = 0; j < h; ++j)
    dpre1[static_cast<std::size_t>(j)] =
        pre1[static_cast<std::size_t>(j)] > 0.0 ? dact1[static_cast<std::size_t>(j)] : 0.0;

  std::vector<double> dpooled(static_cast<std::size_t>(d), 0.0);
  for (int k = 0; k < d; ++k) {
    const double pk = t.pooled[static_cast<std::size_t>(k)];
    double acc = 0.0;
    for (int j = 0; j < h; ++j) {
      const double dp = dpre1[static_cast<std::size_t>(j)];
      g.dense1_w[static_cast<std::size_t>(k) * h + j] += weight * pk * dp;
      acc += model.dense1_w[static_cast<std::size_t>(k) * h + j] * dp;
    }
    dpooled[static_cast<std::size_t>(k)] = acc;
  }
  for (int j = 0; j < h; ++j)
    g.dense1_b[static_cast<std::size_t>(j)] += weight * dpre1[static_cast<std::size_t>(j)];

  const double inv_len = 1.0 / static_cast<double>(ids.size());
  for (TokenId id : ids) {
    double* row = g.embedding.data() + static_cast<std::size_t>(id) * d;
    for (int k = 0; k < d; ++k)
      row[k] += weight * inv_len * dpooled[static_cast<std::size_t>(k)];
  }
  return loss;
}

std::pair<double, Gradients> loss_and_grads_resolved(const TinyClassifier& model,
                                                     std::span<const Resolved> batch) {
  if (batch.empty()) fail("ConfigError", "loss requires a non-empty batch");
  Gradients g = zero_grads(model);
  const double weight = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const Resolved& r : batch) {
    check_ids(model, *r.ids);
    loss += weight * backprop_one(model, *r.ids, r.cls, weight, g);
  }
  if (!std::isfinite(loss)) fail("NonFiniteLoss", "training loss is not finite");
  return {loss, std::move(g)};
}

void apply_update(TinyClassifier& model, const Gradients& g, const FreezeMask& mask,
                  double lr) {
  const bool emb = mask.trainable.at("embedding");
  const bool d1 = mask.trainable.at("dense1");
  const bool d2 = mask.trainable.at("dense2");
  // New-token rows are always trainable; a frozen embedding module only
  // freezes the base rows.
  const std::size_t row_start =
      emb ? 0 : static_cast<std::size_t>(model.base_vocab_size) * model.dim;
  for (std::size_t i = row_start; i < model.embedding.size(); ++i)
    model.embedding[i] -= lr * g.embedding[i];
  if (d1) {
    for (std::size_t i = 0; i < model.dense1_w.size(); ++i)
      model.dense1_w[i] -= lr * g.dense1_w[i];
    for (std::size_t i = 0; i < model.dense1_b.size(); ++i)
      model.dense1_b[i] -= lr * g.dense1_b[i];
  }
  if (d2) {
    for (std::size_t i = 0; i < model.dense2_w.size(); ++i)
      model.dense2_w[i] -= lr * g.dense2_w[i];
    for (std::size_t i = 0; i < model.dense2_b.size(); ++i)
      model.dense2_b[i] -= lr * g.dense2_b[i];
  }
}

double trainable_fraction(const TinyClassifier& model, const FreezeMask& mask) {
  std::int64_t trainable = model.new_token_param_count();
  if (mask.trainable.at("embedding"))
    trainable += model.module_param_count("embedding") - model.new_token_param_count();
  if (mask.trainable.at("dense1")) trainable += model.module_param_count("dense1");
  if (mask.trainable.at("dense2")) trainable += model.module_param_count("dense2");
  return static_cast<double>(trainable) / static_cast<double>(model.total_param_count());
}

std::vector<double> train_loop(TinyClassifier& model, std::span<const Resolved> data,
                               const FreezeMask& mask, const TrainConfig& cfg) {
  std::vector<double> epoch_loss;
  const std::size_t n = data.size();
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      auto [loss, grads] = loss_and_grads_resolved(model, data.subspan(start, len));
      apply_update(model, grads, mask, cfg.learning_rate);
      total += loss * static_cast<double>(len);
    }
    epoch_loss.push_back(total / static_cast<double>(n));
  }
  return epoch_loss;
}

void validate_mask(const FreezeMask& mask) {
  for (const char* name : kModuleNames)
    if (!mask.trainable.contains(name))
      fail("ConfigError", std::string("mask is missing module '") + name + "'");
}

EvalResult score_predictions(const TinyClassifier& model, const std::vector<int>& truth,
                             const std::vector<int>& pred) {
  const int c = model.num_classes();
  std::vector<long long> tp(static_cast<std::size_t>(c), 0), fp(static_cast<std::size_t>(c), 0),
      fn(static_cast<std::size_t>(c), 0);
  long long correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (pred[i] == truth[i]) {
      ++correct;
      ++tp[static_cast<std::size_t>(truth[i])];
    } else {
      ++fp[static_cast<std::size_t>(pred[i])];
      ++fn[static_cast<std::size_t>(truth[i])];
    }
  }
  double f1_sum = 0.0;
  for (int y = 0; y < c; ++y) {
    const auto i = static_cast<std::size_t>(y);
    const double precision = tp[i] + fp[i] > 0
                                 ? static_cast<double>(tp[i]) / static_cast<double>(tp[i] + fp[i])
                                 : 0.0;
    const double recall = tp[i] + fn[i] > 0
                              ? static_cast<double>(tp[i]) / static_cast<double>(tp[i] + fn[i])
                              : 0.0;
    f1_sum += precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  EvalResult r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  r.macro_f1 = f1_sum / static_cast<double>(c);
  return r;
}

}  // namespace

std::int64_t TinyClassifier::module_param_count(const std::string& name) const {
  if (name == "embedding") return vocab_total() * dim;
  if (name == "dense1") return static_cast<std::int64_t>(dim) * hidden + hidden;
  if (name == "dense2") return static_cast<std::int64_t>(hidden) * num_classes() + num_classes();
  fail("ConfigError", "unknown module '" + name + "'");
}

std::int64_t TinyClassifier::total_param_count() const {
  return module_param_count("embedding") + module_param_count("dense1") +
         module_param_count("dense2");
}

int TinyClassifier::class_of(const std::string& label_text) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label_text) return static_cast<int>(i);
  return -1;
}

std::vector<Example> to_examples(const std::vector<AdaptiveDoc>& docs) {
  std::vector<Example> out;
  out.reserve(docs.size());
  for (const AdaptiveDoc& d : docs) out.push_back(Example{d.tok.ids, d.label.text});
  return out;
}

TinyClassifier init_model(std::int64_t base_vocab_size, std::int64_t task_vocab_size, int dim,
                          int hidden, std::vector<std::string> labels, std::uint64_t seed,
                          double new_token_stddev, int pretrain_docs, int pretrain_len,
                          int pretrain_epochs, double pretrain_lr) {
  if (base_vocab_size < 1 || task_vocab_size < 0 || dim < 1 || hidden < 1)
    fail("ConfigError", "invalid model dimensions");
  if (labels.size() < 2) fail("ConfigError", "model needs at least two class labels");
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = i + 1; j < labels.size(); ++j)
      if (labels[i] == labels[j]) fail("ConfigError", "duplicate class label '" + labels[i] + "'");

  TinyClassifier m;
  m.base_vocab_size = base_vocab_size;
  m.task_vocab_size = task_vocab_size;
  m.dim = dim;
  m.hidden = hidden;
  m.labels = std::move(labels);
  const int c = m.num_classes();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> base_init(0.0, 0.1);
  m.embedding.resize(static_cast<std::size_t>(m.vocab_total()) * dim);
  for (std::int64_t i = 0; i < base_vocab_size * dim; ++i)
    m.embedding[static_cast<std::size_t>(i)] = base_init(rng);
  m.dense1_w.resize(static_cast<std::size_t>(dim) * hidden);
  for (double& w : m.dense1_w) w = base_init(rng);
  m.dense1_b.assign(static_cast<std::size_t>(hidden), 0.0);
  m.dense2_w.resize(static_cast<std::size_t>(hidden) * c);
  for (double& w : m.dense2_w) w = base_init(rng);
  m.dense2_b.assign(static_cast<std::size_t>(c), 0.0);

  std::normal_distribution<double> task_init(0.0, new_token_stddev);
  for (std::size_t i = static_cast<std::size_t>(base_vocab_size) * dim;
       i < m.embedding.size(); ++i)
    m.embedding[i] = task_init(rng);

  if (pretrain_docs > 0 && pretrain_epochs > 0 && pretrain_len > 0) {
    // Generic synthetic pretraining over base-vocab sequences; the label is
    // a deterministic function of the tokens so there is signal to fit.
    std::vector<std::vector<TokenId>> docs(static_cast<std::size_t>(pretrain_docs));
    std::vector<Resolved> data;
    std::uniform_int_distribution<std::int64_t> pick(0, base_vocab_size - 1);
    for (auto& ids : docs) {
      long long sum = 0;
      ids.resize(static_cast<std::size_t>(pretrain_len));
      for (TokenId& t : ids) {
        t = static_cast<TokenId>(pick(rng));
        sum += t;
      }
      data.push_back(Resolved{&ids, static_cast<int>(sum % c)});
    }
    TrainConfig cfg;
    cfg.learning_rate = pretrain_lr;
    cfg.epochs = pretrain_epochs;
    cfg.batch_size = 16;
    train_loop(m, data, full_mask(), cfg);
  }
  return m;
}

void reinit_new_token_rows(TinyClassifier& model, std::uint64_t seed, double stddev) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> init(0.0, stddev);
  for (std::size_t i = static_cast<std::size_t>(model.base_vocab_size) * model.dim;
       i < model.embedding.size(); ++i)
    model.embedding[i] = init(rng);
}

std::vector<double> forward(const TinyClassifier& model, std::span<const TokenId> ids) {
  check_ids(model, ids);
  return trace_impl(model, ids, nullptr).probs;
}

ForwardTrace forward_trace(const TinyClassifier& model, std::span<const TokenId> ids) {
  check_ids(model, ids);
  return trace_impl(model, ids, nullptr);
}

int predict(const TinyClassifier& model, std::span<const TokenId> ids) {
  const std::vector<double> probs = forward(model, ids);
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

std::pair<double, Gradients> loss_and_grads(const TinyClassifier& model,
                                            std::span<const Example> batch) {
  const std::vector<Resolved> resolved = resolve_labels(model, batch);
  return loss_and_grads_resolved(model, resolved);
}

TrainMetrics sparse_finetune(TinyClassifier& model, const std::vector<Example>& train,
                             const FreezeMask& mask, const TrainConfig& cfg) {
  if (cfg.learning_rate <= 0.0) fail("ConfigError", "learning rate must be positive");
  if (cfg.epochs < 0 || cfg.batch_size < 1) fail("ConfigError", "invalid training config");
  if (train.empty()) fail("EmptyCorpus", "no training examples");
  validate_mask(mask);

  const std::vector<Resolved> data = resolve_labels(model, train);
  TrainMetrics metrics;
  metrics.epoch_loss = train_loop(model, data, mask, cfg);
  const EvalResult r = evaluate_serial(model, train);
  metrics.accuracy = r.accuracy;
  metrics.macro_f1 = r.macro_f1;
  metrics.trainable_fraction = trainable_fraction(model, mask);
  return metrics;
}

EvalResult evaluate_serial(const TinyClassifier& model, const std::vector<Example>& dataset) {
  if (dataset.empty()) fail("EmptyCorpus", "no examples to evaluate");
  std::vector<int> truth(dataset.size()), pred(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int cls = model.class_of(dataset[i].label);
    if (cls < 0)
      fail("LabelError", "label '" + dataset[i].label + "' is not in the model's label set");
    truth[i] = cls;
    pred[i] = predict(model, dataset[i].ids);
  }
  return score_predictions(model, truth, pred);
}

EvalResult evaluate(const TinyClassifier& model, const std::vector<Example>& dataset) {
  if (dataset.empty()) fail("EmptyCorpus", "no examples to evaluate");
  std::vector<int> truth(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int cls = model.class_of(dataset[i].label);
    if (cls < 0)
      fail("LabelError", "label '" + dataset[i].label + "' is not in the model's label set");
    truth[i] = cls;
    check_ids(model, dataset[i].ids);
  }
  std::vector<int> pred(dataset.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(dataset.size()); ++i)
    pred[static_cast<std::size_t>(i)] = predict(model, dataset[static_cast<std::size_t>(i)].ids);
  return score_predictions(model, truth, pred);
}

FreezeMask full_mask() {
  FreezeMask mask;
  for (const char* name : kModuleNames) mask.trainable[name] = true;
  mask.budget_fraction = 1.0;
  mask.achieved_fraction = 1.0;
  return mask;
}

void save_model(const TinyClassifier& model, const std::string& path) {
  json j;
  j["version"] = 1;
  j["base_vocab_size"] = model.base_vocab_size;
  j["task_vocab_size"] = model.task_vocab_size;
  j["dim"] = model.dim;
  j["hidden"] = model.hidden;
  j["labels"] = model.labels;
  j["embedding"] = model.embedding;
  j["dense1_w"] = model.dense1_w;
  j["dense1_b"] = model.dense1_b;
  j["dense2_w"] = model.dense2_w;
  j["dense2_b"] = model.dense2_b;
  auto out = detail::open_output(path);
  out << j.dump() << '\n';
}

TinyClassifier load_model(const std::string& path) {
  auto in = detail::open_input(path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) fail("ParseError", path + ": invalid JSON");
  for (const char* field : {"version", "base_vocab_size", "task_vocab_size", "dim", "hidden",
                            "labels", "embedding", "dense1_w", "dense1_b", "dense2_w",
                            "dense2_b"})
    if (!j.contains(field)) fail("ParseError", path + ": missing field '" + field + "'");
  if (j["version"].get<int>() != 1) fail("ParseError", path + ": unsupported model version");

  TinyClassifier m;
  m.base_vocab_size = j["base_vocab_size"].get<std::int64_t>();
  m.task_vocab_size = j["task_vocab_size"].get<std::int64_t>();
  m.dim = j["dim"].get<int>();
  m.hidden = j["hidden"].get<int>();
  m.labels = j["labels"].get<std::vector<std::string>>();
  if (m.base_vocab_size < 1 || m.task_vocab_size < 0 || m.dim < 1 || m.hidden < 1 ||
      m.labels.size() < 2)
    fail("ParseError", path + ": invalid model dimensions");

  auto load_array = [&](const char* field, std::size_t expected) {
    if (!j[field].is_array() || j[field].size() != expected)
      fail("ParseError", std::string(path) + ": field '" + field + "' must hold " +
                             std::to_string(expected) + " numbers");
    std::vector<double> v;
    v.reserve(expected);
    for (const json& x : j[field]) {
      if (!x.is_number()) fail("ParseError", std::string(path) + ": non-numeric value in '" +
                                                 field + "'");
      v.push_back(x.get<double>());
    }
    return v;
  };
  const auto c = static_cast<std::size_t>(m.labels.size());
  m.embedding = load_array("embedding", static_cast<std::size_t>(m.vocab_total()) * m.dim);
  m.dense1_w = load_array("dense1_w", static_cast<std::size_t>(m.dim) * m.hidden);
  m.dense1_b = load_array("dense1_b", static_cast<std::size_t>(m.hidden));
  m.dense2_w = load_array("dense2_w", static_cast<std::size_t>(m.hidden) * c);
  m.dense2_b = load_array("dense2_b", c);
  return m;
}

}  // namespace adapt
