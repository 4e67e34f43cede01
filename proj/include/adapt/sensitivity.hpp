#pragma once

#include <string>
#include <vector>

#include "adapt/tinymodel.hpp"

namespace adapt {

// Per-module sensitivity scores: index of dispersion I = var/mean of the
// module's flattened outputs over the dataset, mean gradient norm G, and
// the combined score S = I + beta * G.
struct ModuleSensitivity {
  std::string name;
  double mu = 0.0;
  double var = 0.0;         // population variance
  double dispersion = 0.0;  // I
  double grad_norm = 0.0;   // G
  double sensitivity = 0.0; // S
  std::int64_t param_count = 0;
  bool trainable = false;
};

struct SensitivityReport {
  double beta = 0.1;
  double budget = 1.0;
  double achieved = 1.0;
  std::vector<ModuleSensitivity> modules;  // canonical order: embedding, dense1, dense2
};

// Collects every module's flattened scalar outputs over the dataset into
// one population and fills mu, var, dispersion. Accumulation follows
// datapoint index order, so results are bit-identical for any thread
// count.
std::vector<ModuleSensitivity> measure_dispersion(const TinyClassifier& model,
                                                  const std::vector<Example>& dataset);
std::vector<ModuleSensitivity> measure_dispersion_serial(const TinyClassifier& model,
                                                         const std::vector<Example>& dataset);

// Per datapoint, the L2 norm of the loss gradient w.r.t. each module's
// parameters; fills grad_norm with the mean over the dataset. Throws
// NonFiniteGradient with the module name and datapoint index.
void measure_grad_norm(const TinyClassifier& model, const std::vector<Example>& dataset,
                       std::vector<ModuleSensitivity>& stats);
void measure_grad_norm_serial(const TinyClassifier& model, const std::vector<Example>& dataset,
                              std::vector<ModuleSensitivity>& stats);

// S = I + beta * G for every module.
void combine_sensitivity(std::vector<ModuleSensitivity>& stats, double beta);

// Sorts modules by S descending (ties by name) and greedily marks them
// trainable while the cumulative parameter fraction stays within budget;
// the first module that would overshoot is included iff that lands closer
// to the budget. New-token embedding rows are forced trainable and counted
// first. Throws BudgetTooSmall if they alone exceed the budget.
FreezeMask select_modules(std::vector<ModuleSensitivity>& stats, double budget_fraction,
                          std::int64_t new_token_params, std::int64_t total_params);

// Full measurement pass: dispersion, gradient norms, combination, and
// module selection against the budget.
SensitivityReport measure_sensitivity(const TinyClassifier& model,
                                      const std::vector<Example>& dataset, double beta,
                                      double budget_fraction);

FreezeMask mask_from_report(const SensitivityReport& report);

void save_report(const SensitivityReport& report, const std::string& path);
SensitivityReport load_report(const std::string& path);

}  // namespace adapt
