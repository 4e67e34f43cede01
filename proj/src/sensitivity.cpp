#include "adapt/sensitivity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <span>

#include "json.hpp"

#include "adapt/error.hpp"
#include "io_util.hpp"

namespace adapt {

namespace {

using nlohmann::json;

struct MomentPair {
  double sum = 0.0;
  double sum_sq = 0.0;
};

void pre_validate(const TinyClassifier& model, const std::vector<Example>& dataset) {
  if (dataset.empty()) fail("EmptyCorpus", "sensitivity needs a non-empty dataset");
  for (const Example& ex : dataset) {
    if (ex.ids.empty()) fail("ConfigError", "cannot run the model on an empty id list");
    for (TokenId id : ex.ids)
      if (id < 0 || id >= model.vocab_total())
        fail("IdRangeError", "token id " + std::to_string(id) +
                                 " outside vocabulary of size " +
                                 std::to_string(model.vocab_total()));
  }
}

void moments_for(const TinyClassifier& model, const Example& ex,
                 std::array<MomentPair, 3>& m) {
  const ForwardTrace t = forward_trace(model, ex.ids);
  const std::array<const std::vector<double>*, 3> outputs = {&t.pooled, &t.hidden_act,
                                                             &t.probs};
  for (std::size_t k = 0; k < 3; ++k) {
    for (double v : *outputs[k]) {
      m[k].sum += v;
      m[k].sum_sq += v * v;
    }
  }
}

std::vector<ModuleSensitivity> dispersion_impl(const TinyClassifier& model,
                                               const std::vector<Example>& dataset,
                                               bool parallel) {
  pre_validate(model, dataset);
  const std::size_t n = dataset.size();
  std::vector<std::array<MomentPair, 3>> per_doc(n);
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
      moments_for(model, dataset[static_cast<std::size_t>(i)],
                  per_doc[static_cast<std::size_t>(i)]);
  } else {
    for (std::size_t i = 0; i < n; ++i) moments_for(model, dataset[i], per_doc[i]);
  }

  const std::array<std::size_t, 3> dims = {static_cast<std::size_t>(model.dim),
                                           static_cast<std::size_t>(model.hidden),
                                           static_cast<std::size_t>(model.num_classes())};
  std::vector<ModuleSensitivity> stats(3);
  for (std::size_t k = 0; k < 3; ++k) {
    // Fold in datapoint index order: bit-identical for any thread count.
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += per_doc[i][k].sum;
      sum_sq += per_doc[i][k].sum_sq;
    }
    const double count = static_cast<double>(n * dims[k]);
    const double mu = sum / count;
    const double var = std::max(0.0, sum_sq / count - mu * mu);
    ModuleSensitivity& s = stats[k];
    s.name = kModuleNames[k];
    s.mu = mu;
    s.var = var;
    const double sign = mu < 0.0 ? -1.0 : 1.0;
    s.dispersion = sign * var / std::max(std::abs(mu), 1e-12);
    s.param_count = model.module_param_count(s.name);
  }
  return stats;
}

std::array<double, 3> grad_norms_for(const TinyClassifier& model, const Example& ex) {
  const auto [loss, g] = loss_and_grads(model, std::span<const Example>(&ex, 1));
  (void)loss;
  auto norm = [](const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (double v : a) acc += v * v;
    for (double v : b) acc += v * v;
    return std::sqrt(acc);
  };
  static const std::vector<double> kEmptyVec;
  return {norm(g.embedding, kEmptyVec), norm(g.dense1_w, g.dense1_b),
          norm(g.dense2_w, g.dense2_b)};
}

void grad_norm_impl(const TinyClassifier& model, const std::vector<Example>& dataset,
                    std::vector<ModuleSensitivity>& stats, bool parallel) {
  pre_validate(model, dataset);
  if (stats.size() != 3) fail("ConfigError", "module stats must cover all three modules");
  const std::size_t n = dataset.size();
  std::vector<std::array<double, 3>> per_doc(n);
  if (parallel) {
    std::ptrdiff_t bad = -1;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      try {
        per_doc[static_cast<std::size_t>(i)] =
            grad_norms_for(model, dataset[static_cast<std::size_t>(i)]);
      } catch (const Error&) {
#pragma omp critical
        if (bad < 0 || i < bad) bad = i;
      }
    }
    if (bad >= 0) grad_norms_for(model, dataset[static_cast<std::size_t>(bad)]);
  } else {
    for (std::size_t i = 0; i < n; ++i) per_doc[i] = grad_norms_for(model, dataset[i]);
  }

  for (std::size_t k = 0; k < 3; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(per_doc[i][k]))
        fail("NonFiniteGradient", "module '" + std::string(kModuleNames[k]) +
                                      "' has a non-finite gradient at datapoint " +
                                      std::to_string(i));
      sum += per_doc[i][k];
    }
    stats[k].grad_norm = sum / static_cast<double>(n);
  }
}

}  // namespace

std::vector<ModuleSensitivity> measure_dispersion(const TinyClassifier& model,
                                                  const std::vector<Example>& dataset) {
  return dispersion_impl(model, dataset, true);
}

std::vector<ModuleSensitivity> measure_dispersion_serial(const TinyClassifier& model,
                                                         const std::vector<Example>& dataset) {
  return dispersion_impl(model, dataset, false);
}

void measure_grad_norm(const TinyClassifier& model, const std::vector<Example>& dataset,
                       std::vector<ModuleSensitivity>& stats) {
  grad_norm_impl(model, dataset, stats, true);
}

void measure_grad_norm_serial(const TinyClassifier& model, const std::vector<Example>& dataset,
                              std::vector<ModuleSensitivity>& stats) {
  grad_norm_impl(model, dataset, stats, false);
}

void combine_sensitivity(std::vector<ModuleSensitivity>& stats, double beta) {
  if (beta < 0.0) fail("ConfigError", "beta must be >= 0");
  for (ModuleSensitivity& s : stats) s.sensitivity = s.dispersion + beta * s.grad_norm;
}

FreezeMask select_modules(std::vector<ModuleSensitivity>& stats, double budget_fraction,
                          std::int64_t new_token_params, std::int64_t total_params) {
  if (budget_fraction <= 0.0 || budget_fraction > 1.0)
    fail("ConfigError", "budget fraction must be in (0, 1]");
  if (total_params <= 0) fail("ConfigError", "model has no parameters");
  const double budget = budget_fraction * static_cast<double>(total_params);
  if (static_cast<double>(new_token_params) > budget)
    fail("BudgetTooSmall", "new-token embeddings alone exceed the budget");

  for (ModuleSensitivity& s : stats) s.trainable = false;

  std::vector<std::size_t> order(stats.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (stats[a].sensitivity != stats[b].sensitivity)
      return stats[a].sensitivity > stats[b].sensitivity;
    return stats[a].name < stats[b].name;
  });

  double cum = static_cast<double>(new_token_params);
  for (std::size_t idx : order) {
    ModuleSensitivity& s = stats[idx];
    const double inc = static_cast<double>(
        s.param_count - (s.name == "embedding" ? new_token_params : 0));
    if (cum + inc <= budget) {
      s.trainable = true;
      cum += inc;
    } else {
      // First overshoot: include only if that lands closer to the budget.
      if (std::abs(cum + inc - budget) < std::abs(cum - budget)) {
        s.trainable = true;
        cum += inc;
      }
      break;
    }
  }

  FreezeMask mask;
  for (const ModuleSensitivity& s : stats) mask.trainable[s.name] = s.trainable;
  mask.budget_fraction = budget_fraction;
  mask.achieved_fraction = cum / static_cast<double>(total_params);
  return mask;
}

SensitivityReport measure_sensitivity(const TinyClassifier& model,
                                      const std::vector<Example>& dataset, double beta,
                                      double budget_fraction) {
  SensitivityReport report;
  report.beta = beta;
  report.budget = budget_fraction;
  report.modules = measure_dispersion(model, dataset);
  measure_grad_norm(model, dataset, report.modules);
  combine_sensitivity(report.modules, beta);
  const FreezeMask mask = select_modules(report.modules, budget_fraction,
                                         model.new_token_param_count(),
                                         model.total_param_count());
  report.achieved = mask.achieved_fraction;
  return report;
}

FreezeMask mask_from_report(const SensitivityReport& report) {
  FreezeMask mask;
  for (const ModuleSensitivity& s : report.modules) mask.trainable[s.name] = s.trainable;
  mask.budget_fraction = report.budget;
  mask.achieved_fraction = report.achieved;
  for (const char* name : kModuleNames)
    if (!mask.trainable.contains(name))
      fail("ParseError", std::string("sensitivity report is missing module '") + name + "'");
  return mask;
}

void save_report(const SensitivityReport& report, const std::string& path) {
  json j;
  j["beta"] = report.beta;
  j["budget"] = report.budget;
  j["achieved"] = report.achieved;
  json mods = json::array();
  for (const ModuleSensitivity& s : report.modules) {
    json m;
    m["name"] = s.name;
    m["mu"] = s.mu;
    m["var"] = s.var;
    m["I"] = s.dispersion;
    m["G"] = s.grad_norm;
    m["S"] = s.sensitivity;
    m["params"] = s.param_count;
    m["trainable"] = s.trainable;
    mods.push_back(std::move(m));
  }
  j["modules"] = std::move(mods);
  auto out = detail::open_output(path);
  out << j.dump(2) << '\n';
}

SensitivityReport load_report(const std::string& path) {
  auto in = detail::open_input(path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) fail("ParseError", path + ": invalid JSON");
  for (const char* field : {"beta", "budget", "achieved", "modules"})
    if (!j.contains(field)) fail("ParseError", path + ": missing field '" + field + "'");
  SensitivityReport report;
  report.beta = j["beta"].get<double>();
  report.budget = j["budget"].get<double>();
  report.achieved = j["achieved"].get<double>();
  if (!j["modules"].is_array()) fail("ParseError", path + ": field 'modules' must be an array");
  for (const json& m : j["modules"]) {
    for (const char* field : {"name", "mu", "var", "I", "G", "S", "params", "trainable"})
      if (!m.contains(field))
        fail("ParseError", path + ": module entry missing field '" + std::string(field) + "'");
    ModuleSensitivity s;
    s.name = m["name"].get<std::string>();
    s.mu = m["mu"].get<double>();
    s.var = m["var"].get<double>();
    s.dispersion = m["I"].get<double>();
    s.grad_norm = m["G"].get<double>();
    s.sensitivity = m["S"].get<double>();
    s.param_count = m["params"].get<std::int64_t>();
    s.trainable = m["trainable"].get<bool>();
    report.modules.push_back(std::move(s));
  }
  return report;
}

}  // namespace adapt
