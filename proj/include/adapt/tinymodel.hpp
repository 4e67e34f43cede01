#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adapt/adapttok.hpp"
#include "adapt/corpus.hpp"

namespace adapt {

inline constexpr std::array<const char*, 3> kModuleNames = {"embedding", "dense1", "dense2"};

// Per-module trainability flags realizing a parameter budget. New-token
// embedding rows are always trainable regardless of the embedding flag.
struct FreezeMask {
  std::map<std::string, bool> trainable;  // one flag per module name
  double budget_fraction = 1.0;
  double achieved_fraction = 1.0;
};

// Minimal reference classifier with explicit forward/backward:
// mean-pool token embeddings -> dense1 -> ReLU -> dense2 -> softmax.
// Parameters are grouped into the named modules embedding, dense1, dense2.
struct TinyClassifier {
  std::int64_t base_vocab_size = 0;
  std::int64_t task_vocab_size = 0;
  int dim = 16;
  int hidden = 32;
  std::vector<std::string> labels;  // class names; index = class id

  std::vector<double> embedding;  // (base+task) x dim, row-major
  std::vector<double> dense1_w;   // dim x hidden, row-major
  std::vector<double> dense1_b;   // hidden
  std::vector<double> dense2_w;   // hidden x classes, row-major
  std::vector<double> dense2_b;   // classes

  std::int64_t vocab_total() const { return base_vocab_size + task_vocab_size; }
  int num_classes() const { return static_cast<int>(labels.size()); }
  std::int64_t module_param_count(const std::string& name) const;
  std::int64_t total_param_count() const;
  std::int64_t new_token_param_count() const { return task_vocab_size * dim; }

  // Class index of a canonical label text, or -1.
  int class_of(const std::string& label_text) const;
};

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 20;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double new_token_stddev = 0.02;
};

// A training/eval datapoint: token ids (base or adaptive) plus the
// canonical label text.
struct Example {
  std::vector<TokenId> ids;
  std::string label;
};

std::vector<Example> to_examples(const std::vector<AdaptiveDoc>& docs);

struct Gradients {
  std::vector<double> embedding, dense1_w, dense1_b, dense2_w, dense2_b;
};

struct ForwardTrace {
  std::vector<double> pooled;      // mean-pooled embedding, dim
  std::vector<double> hidden_act;  // post-ReLU, hidden
  std::vector<double> probs;       // softmax, classes
};

struct TrainMetrics {
  std::vector<double> epoch_loss;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double trainable_fraction = 0.0;
};

struct EvalResult {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

// Seeded construction: Gaussian init (new-token rows at new_token_stddev),
// then a deterministic synthetic pretraining phase over base-vocab token
// sequences so the starting point behaves like pretrained weights. Set
// pretrain_epochs = 0 to skip pretraining.
TinyClassifier init_model(std::int64_t base_vocab_size, std::int64_t task_vocab_size,
                          int dim, int hidden, std::vector<std::string> labels,
                          std::uint64_t seed, double new_token_stddev = 0.02,
                          int pretrain_docs = 200, int pretrain_len = 12,
                          int pretrain_epochs = 3, double pretrain_lr = 0.05);

// Class probability vector; ids must be < vocab_total() (IdRangeError).
std::vector<double> forward(const TinyClassifier& model, std::span<const TokenId> ids);
ForwardTrace forward_trace(const TinyClassifier& model, std::span<const TokenId> ids);
int predict(const TinyClassifier& model, std::span<const TokenId> ids);

// Mean negative log-likelihood over the batch plus analytic gradients for
// every parameter. Throws LabelError on labels outside the model's label
// set, NonFiniteLoss if the loss is not finite.
std::pair<double, Gradients> loss_and_grads(const TinyClassifier& model,
                                            std::span<const Example> batch);

// Plain gradient descent restricted to mask-trainable modules plus the
// new-token embedding rows. Frozen parameters are left bit-identical.
// Single-threaded and fully deterministic under a fixed config.
TrainMetrics sparse_finetune(TinyClassifier& model, const std::vector<Example>& train,
                             const FreezeMask& mask, const TrainConfig& cfg);

// Accuracy and macro-F1 (unweighted mean of per-class F1 over all model
// classes; absent classes contribute 0). Parallel per datapoint.
EvalResult evaluate(const TinyClassifier& model, const std::vector<Example>& dataset);
EvalResult evaluate_serial(const TinyClassifier& model, const std::vector<Example>& dataset);

// All-trainable mask for a model.
FreezeMask full_mask();

// Re-draw only the new-token embedding rows (Gaussian, seeded).
void reinit_new_token_rows(TinyClassifier& model, std::uint64_t seed, double stddev = 0.02);

// JSON model file with exact round-trip of all parameter values.
void save_model(const TinyClassifier& model, const std::string& path);
TinyClassifier load_model(const std::string& path);

}  // namespace adapt
