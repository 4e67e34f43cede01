#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include "adapt/adapttok.hpp"
#include "adapt/corpus.hpp"
#include "adapt/error.hpp"
#include "adapt/scoring.hpp"
#include "adapt/sensitivity.hpp"
#include "adapt/seqmine.hpp"
#include "adapt/taskvocab.hpp"
#include "adapt/tinymodel.hpp"

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) adapt::fail("IoError", "cannot open output file: " + path);
  return out;
}

std::vector<std::string> split_labels(const std::string& csv) {
  std::vector<std::string> labels;
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t comma = csv.find(',', start);
    if (comma == std::string::npos) {
      labels.push_back(csv.substr(start));
      break;
    }
    labels.push_back(csv.substr(start, comma - start));
    start = comma + 1;
  }
  return labels;
}

std::vector<std::string> labels_from_corpus(const std::vector<adapt::LabeledDoc>& docs) {
  std::set<std::string> seen;
  for (const adapt::LabeledDoc& d : docs) seen.insert(d.label.text);
  return {seen.begin(), seen.end()};
}

double mean_of(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

double stddev_of(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double var = 0.0;
  for (double x : xs) var += (x - m) * (x - m);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

void write_train_metrics(const adapt::TrainMetrics& m, std::uint64_t seed,
                         const std::string& path) {
  json j;
  j["epoch_loss"] = m.epoch_loss;
  j["accuracy"] = m.accuracy;
  j["macro_f1"] = m.macro_f1;
  j["trainable_fraction"] = m.trainable_fraction;
  j["seed"] = seed;
  open_out(path) << j.dump(2) << '\n';
}

void write_eval_metrics(const adapt::EvalResult& r, const std::string& path) {
  json j;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  open_out(path) << j.dump(2) << '\n';
}

struct StabilityArgs {
  std::string model_path, data_path, test_path, mask_path, out_path;
  int runs = 10;
  std::uint64_t seed_base = 0;
  adapt::TrainConfig cfg;
};

void run_stability(const StabilityArgs& args) {
  if (args.runs < 2) adapt::fail("ConfigError", "stability needs at least 2 runs");
  const adapt::TinyClassifier base = adapt::load_model(args.model_path);
  const auto train = adapt::to_examples(adapt::load_adaptive_jsonl(args.data_path));
  const auto test = adapt::to_examples(adapt::load_adaptive_jsonl(args.test_path));
  const adapt::FreezeMask mask = adapt::mask_from_report(adapt::load_report(args.mask_path));

  std::vector<double> masked_f1, full_f1;
  for (int run = 0; run < args.runs; ++run) {
    const std::uint64_t seed = args.seed_base + static_cast<std::uint64_t>(run);
    adapt::TinyClassifier masked = base;
    adapt::reinit_new_token_rows(masked, seed);
    adapt::sparse_finetune(masked, train, mask, args.cfg);
    masked_f1.push_back(adapt::evaluate(masked, test).macro_f1);

    adapt::TinyClassifier full = base;
    adapt::reinit_new_token_rows(full, seed);
    adapt::sparse_finetune(full, train, adapt::full_mask(), args.cfg);
    full_f1.push_back(adapt::evaluate(full, test).macro_f1);
  }

  json j;
  j["runs"] = args.runs;
  j["masked"] = {{"f1", masked_f1}, {"mean", mean_of(masked_f1)}, {"stddev", stddev_of(masked_f1)}};
  j["full"] = {{"f1", full_f1}, {"mean", mean_of(full_f1)}, {"stddev", stddev_of(full_f1)}};
  open_out(args.out_path) << j.dump(2) << '\n';
  std::cout << "stability: masked f1 stddev=" << stddev_of(masked_f1)
            << " full f1 stddev=" << stddev_of(full_f1) << " (" << args.runs << " runs)\n";
}

struct AllArgs {
  std::string vocab_path, corpus_path, test_path, outdir;
  adapt::MiningParams mining;
  adapt::SelectionParams selection;
  double beta = 0.1;
  double budget = 0.2;
  int dim = 16, hidden = 32;
  std::uint64_t seed = 0;
  adapt::TrainConfig cfg;
  int pretrain_docs = 200, pretrain_len = 12, pretrain_epochs = 3;
  double pretrain_lr = 0.05;
};

void run_all(const AllArgs& a) {
  namespace fs = std::filesystem;
  fs::create_directories(a.outdir);
  auto at = [&](const char* name) { return (fs::path(a.outdir) / name).string(); };

  const adapt::BaseVocab vocab = adapt::load_vocab(a.vocab_path);
  const auto corpus = adapt::load_corpus_jsonl(a.corpus_path);
  const auto test_corpus = adapt::load_corpus_jsonl(a.test_path);

  const auto tokenized = adapt::tokenize_corpus(vocab, corpus);
  adapt::save_tokenized_jsonl(tokenized, at("tokens_train.jsonl"));

  const auto mined = adapt::mine_closed(tokenized, a.mining);
  adapt::save_mined_tsv(mined, at("mined.tsv"));

  const adapt::CorpusStats stats = adapt::build_stats(tokenized);
  const auto selected = adapt::select_sequences(mined, stats, a.selection, vocab.size());
  adapt::save_selected_tsv(selected, at("selected.tsv"));

  const adapt::TaskVocabulary tv = adapt::build_task_vocab(selected, vocab.size());
  adapt::save_task_vocab(tv, at("task_vocab.json"));

  const auto adaptive_train = adapt::apply_corpus(tv, vocab, corpus);
  adapt::save_adaptive_jsonl(adaptive_train, at("adaptive_train.jsonl"));
  const auto adaptive_test = adapt::apply_corpus(tv, vocab, test_corpus);
  adapt::save_adaptive_jsonl(adaptive_test, at("adaptive_test.jsonl"));

  adapt::TinyClassifier model = adapt::init_model(
      static_cast<std::int64_t>(vocab.size()), static_cast<std::int64_t>(tv.entries().size()),
      a.dim, a.hidden, labels_from_corpus(corpus), a.seed, 0.02, a.pretrain_docs,
      a.pretrain_len, a.pretrain_epochs, a.pretrain_lr);
  adapt::save_model(model, at("model_init.json"));

  const auto train_examples = adapt::to_examples(adaptive_train);
  const adapt::SensitivityReport report =
      adapt::measure_sensitivity(model, train_examples, a.beta, a.budget);
  adapt::save_report(report, at("sensitivity.json"));

  const adapt::TrainMetrics metrics =
      adapt::sparse_finetune(model, train_examples, adapt::mask_from_report(report), a.cfg);
  adapt::save_model(model, at("model_trained.json"));
  write_train_metrics(metrics, a.cfg.seed, at("metrics_train.json"));

  const adapt::EvalResult result = adapt::evaluate(model, adapt::to_examples(adaptive_test));
  write_eval_metrics(result, at("metrics_eval.json"));
  std::cout << "pipeline: test accuracy=" << result.accuracy << " macro_f1=" << result.macro_f1
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-adaptive tokenization and sparse finetuning pipeline"};
  app.require_subcommand(1);

  // Callbacks only record what to run; the work happens after parsing so
  // --threads applies first and errors map to exit codes in one place.
  std::function<void()> action;

  int threads = 0;
  app.add_option("--threads", threads, "worker thread count (0 = library default)");
  std::uint64_t global_seed = 0;
  app.add_option("--seed", global_seed, "default seed for seeded subcommands");

  std::string vocab_path, corpus_path, out_path, tokens_path, mined_path, selected_path;
  std::string task_vocab_path, model_path, data_path, mask_path, metrics_path;
  std::string labels_csv;

  auto* cmd_tokenize = app.add_subcommand("tokenize", "base-tokenize a JSONL corpus");
  cmd_tokenize->fallthrough();
  cmd_tokenize->add_option("--vocab", vocab_path)->required();
  cmd_tokenize->add_option("--corpus", corpus_path)->required();
  cmd_tokenize->add_option("--out", out_path)->required();
  cmd_tokenize->callback([&] {
    action = [&] {
      const adapt::BaseVocab vocab = adapt::load_vocab(vocab_path);
      const auto docs = adapt::load_corpus_jsonl(corpus_path);
      adapt::save_tokenized_jsonl(adapt::tokenize_corpus(vocab, docs), out_path);
    };
  });

  adapt::MiningParams mining;
  auto* cmd_mine = app.add_subcommand("mine", "mine closed frequent token sequences");
  cmd_mine->fallthrough();
  cmd_mine->add_option("--tokens", tokens_path)->required();
  cmd_mine->add_option("--min-freq", mining.min_frequency);
  cmd_mine->add_option("--min-len", mining.min_len);
  cmd_mine->add_option("--max-len", mining.max_len);
  cmd_mine->add_option("--max-gap", mining.max_gap);
  cmd_mine->add_option("--out", out_path)->required();
  cmd_mine->callback([&] {
    action = [&] {
      std::cout << "min_freq=" << mining.min_frequency << " min_len=" << mining.min_len
                << " max_len=" << mining.max_len << "\n";
      const auto corpus = adapt::load_tokenized_jsonl(tokens_path);
      adapt::save_mined_tsv(adapt::mine_closed(corpus, mining), out_path);
    };
  });

  adapt::SelectionParams selection;
  std::size_t select_base_size = 0;
  auto* cmd_select = app.add_subcommand("select", "score and select mined sequences");
  cmd_select->fallthrough();
  cmd_select->add_option("--tokens", tokens_path)->required();
  cmd_select->add_option("--mined", mined_path)->required();
  cmd_select->add_option("--pplx-cutoff", selection.pplx_cutoff);
  cmd_select->add_option("--freq-cutoff", selection.freq_cutoff);
  cmd_select->add_option("--cap", selection.vocab_cap_fraction);
  cmd_select->add_option("--base-size", select_base_size,
                         "base vocabulary size (or pass --vocab)");
  cmd_select->add_option("--vocab", vocab_path);
  bool auto_cap = false;
  cmd_select->add_flag("--auto-cap", auto_cap,
                       "ignore the perplexity cutoff and rely on ranking plus the cap");
  cmd_select->add_option("--out", out_path)->required();
  cmd_select->callback([&] {
    action = [&] {
      if (auto_cap) selection.pplx_cutoff = 0.0;
      const auto corpus = adapt::load_tokenized_jsonl(tokens_path);
      const auto mined = adapt::load_mined_tsv(mined_path);
      std::size_t base = select_base_size;
      if (base == 0) {
        if (vocab_path.empty()) adapt::fail("ConfigError", "select needs --base-size or --vocab");
        base = adapt::load_vocab(vocab_path).size();
      }
      const adapt::CorpusStats stats = adapt::build_stats(corpus);
      adapt::save_selected_tsv(adapt::select_sequences(mined, stats, selection, base), out_path);
    };
  });

  std::size_t build_base_size = 0;
  auto* cmd_build = app.add_subcommand("build-vocab", "assign new token ids to selections");
  cmd_build->fallthrough();
  cmd_build->add_option("--selected", selected_path)->required();
  cmd_build->add_option("--base-size", build_base_size)->required();
  cmd_build->add_option("--out", out_path)->required();
  cmd_build->callback([&] {
    action = [&] {
      const auto selected = adapt::load_selected_tsv(selected_path);
      adapt::save_task_vocab(adapt::build_task_vocab(selected, build_base_size), out_path);
    };
  });

  auto* cmd_apply = app.add_subcommand("apply", "adaptively tokenize a JSONL corpus");
  cmd_apply->fallthrough();
  cmd_apply->add_option("--vocab", vocab_path)->required();
  cmd_apply->add_option("--task-vocab", task_vocab_path)->required();
  cmd_apply->add_option("--corpus", corpus_path)->required();
  cmd_apply->add_option("--out", out_path)->required();
  cmd_apply->callback([&] {
    action = [&] {
      const adapt::BaseVocab vocab = adapt::load_vocab(vocab_path);
      const adapt::TaskVocabulary tv = adapt::load_task_vocab(task_vocab_path);
      const auto docs = adapt::load_corpus_jsonl(corpus_path);
      adapt::save_adaptive_jsonl(adapt::apply_corpus(tv, vocab, docs), out_path);
    };
  });

  int dim = 16, hidden = 32;
  int pretrain_docs = 200, pretrain_len = 12, pretrain_epochs = 3;
  double pretrain_lr = 0.05, new_token_stddev = 0.02;
  std::size_t init_base_size = 0;
  auto* cmd_init = app.add_subcommand("init-model", "create a seeded pretrained classifier");
  cmd_init->fallthrough();
  cmd_init->add_option("--vocab", vocab_path);
  cmd_init->add_option("--base-size", init_base_size);
  cmd_init->add_option("--task-vocab", task_vocab_path);
  cmd_init->add_option("--dim", dim);
  cmd_init->add_option("--hidden", hidden);
  cmd_init->add_option("--labels", labels_csv, "comma-separated class labels")->required();
  cmd_init->add_option("--pretrain-docs", pretrain_docs);
  cmd_init->add_option("--pretrain-len", pretrain_len);
  cmd_init->add_option("--pretrain-epochs", pretrain_epochs);
  cmd_init->add_option("--pretrain-lr", pretrain_lr);
  cmd_init->add_option("--new-token-stddev", new_token_stddev);
  cmd_init->add_option("--out", out_path)->required();
  cmd_init->callback([&] {
    action = [&] {
      std::size_t base = init_base_size;
      if (base == 0) {
        if (vocab_path.empty())
          adapt::fail("ConfigError", "init-model needs --base-size or --vocab");
        base = adapt::load_vocab(vocab_path).size();
      }
      std::size_t task = 0;
      if (!task_vocab_path.empty())
        task = adapt::load_task_vocab(task_vocab_path).entries().size();
      const adapt::TinyClassifier model = adapt::init_model(
          static_cast<std::int64_t>(base), static_cast<std::int64_t>(task), dim, hidden,
          split_labels(labels_csv), global_seed, new_token_stddev, pretrain_docs, pretrain_len,
          pretrain_epochs, pretrain_lr);
      adapt::save_model(model, out_path);
    };
  });

  double beta = 0.1, budget = 0.2;
  auto* cmd_sens = app.add_subcommand("sensitivity", "score module sensitivity, pick a mask");
  cmd_sens->fallthrough();
  cmd_sens->add_option("--model", model_path)->required();
  cmd_sens->add_option("--data", data_path)->required();
  cmd_sens->add_option("--beta", beta);
  cmd_sens->add_option("--budget", budget);
  cmd_sens->add_option("--out", out_path)->required();
  cmd_sens->callback([&] {
    action = [&] {
      const adapt::TinyClassifier model = adapt::load_model(model_path);
      const auto data = adapt::to_examples(adapt::load_adaptive_jsonl(data_path));
      adapt::save_report(adapt::measure_sensitivity(model, data, beta, budget), out_path);
    };
  });

  adapt::TrainConfig train_cfg;
  auto* cmd_train = app.add_subcommand("train", "sparse-finetune under a freeze mask");
  cmd_train->fallthrough();
  cmd_train->add_option("--model", model_path)->required();
  cmd_train->add_option("--data", data_path)->required();
  cmd_train->add_option("--mask", mask_path)->required();
  cmd_train->add_option("--lr", train_cfg.learning_rate);
  cmd_train->add_option("--epochs", train_cfg.epochs);
  cmd_train->add_option("--batch-size", train_cfg.batch_size);
  cmd_train->add_option("--out", out_path)->required();
  cmd_train->add_option("--metrics", metrics_path)->required();
  cmd_train->callback([&] {
    action = [&] {
      adapt::TinyClassifier model = adapt::load_model(model_path);
      const auto data = adapt::to_examples(adapt::load_adaptive_jsonl(data_path));
      const adapt::FreezeMask mask = adapt::mask_from_report(adapt::load_report(mask_path));
      train_cfg.seed = global_seed;
      const adapt::TrainMetrics metrics = adapt::sparse_finetune(model, data, mask, train_cfg);
      adapt::save_model(model, out_path);
      write_train_metrics(metrics, train_cfg.seed, metrics_path);
    };
  });

  auto* cmd_eval = app.add_subcommand("eval", "accuracy and macro-F1 on a dataset");
  cmd_eval->fallthrough();
  cmd_eval->add_option("--model", model_path)->required();
  cmd_eval->add_option("--data", data_path)->required();
  cmd_eval->add_option("--out", out_path)->required();
  cmd_eval->callback([&] {
    action = [&] {
      const adapt::TinyClassifier model = adapt::load_model(model_path);
      const auto data = adapt::to_examples(adapt::load_adaptive_jsonl(data_path));
      write_eval_metrics(adapt::evaluate(model, data), out_path);
    };
  });

  StabilityArgs stability;
  auto* cmd_stab = app.add_subcommand("stability", "F1 spread across reinitialized runs");
  cmd_stab->fallthrough();
  cmd_stab->add_option("--model", stability.model_path)->required();
  cmd_stab->add_option("--data", stability.data_path)->required();
  cmd_stab->add_option("--test-data", stability.test_path)->required();
  cmd_stab->add_option("--mask", stability.mask_path)->required();
  cmd_stab->add_option("--runs", stability.runs);
  cmd_stab->add_option("--seed-base", stability.seed_base);
  std::string seed_range;
  cmd_stab->add_option("--seeds", seed_range, "seed range like 0..9 (sets runs and base)");
  cmd_stab->add_option("--lr", stability.cfg.learning_rate);
  cmd_stab->add_option("--epochs", stability.cfg.epochs);
  cmd_stab->add_option("--batch-size", stability.cfg.batch_size);
  cmd_stab->add_option("--out", stability.out_path)->required();
  cmd_stab->callback([&] {
    action = [&] {
      if (!seed_range.empty()) {
        const std::size_t dots = seed_range.find("..");
        if (dots == std::string::npos)
          adapt::fail("ConfigError", "--seeds expects a range like 0..9");
        try {
          const std::uint64_t lo = std::stoull(seed_range.substr(0, dots));
          const std::uint64_t hi = std::stoull(seed_range.substr(dots + 2));
          if (hi < lo) adapt::fail("ConfigError", "--seeds range is empty");
          stability.seed_base = lo;
          stability.runs = static_cast<int>(hi - lo + 1);
        } catch (const adapt::Error&) {
          throw;
        } catch (const std::exception&) {
          adapt::fail("ConfigError", "--seeds expects a range like 0..9");
        }
      }
      run_stability(stability);
    };
  });

  AllArgs all;
  auto* cmd_all = app.add_subcommand("all", "run the whole pipeline into a directory");
  cmd_all->fallthrough();
  cmd_all->add_option("--vocab", all.vocab_path)->required();
  cmd_all->add_option("--corpus", all.corpus_path)->required();
  cmd_all->add_option("--test-corpus", all.test_path)->required();
  cmd_all->add_option("--outdir", all.outdir)->required();
  cmd_all->add_option("--min-freq", all.mining.min_frequency);
  cmd_all->add_option("--min-len", all.mining.min_len);
  cmd_all->add_option("--max-len", all.mining.max_len);
  cmd_all->add_option("--max-gap", all.mining.max_gap);
  cmd_all->add_option("--pplx-cutoff", all.selection.pplx_cutoff);
  cmd_all->add_option("--freq-cutoff", all.selection.freq_cutoff);
  cmd_all->add_option("--cap", all.selection.vocab_cap_fraction);
  cmd_all->add_option("--beta", all.beta);
  cmd_all->add_option("--budget", all.budget);
  cmd_all->add_option("--dim", all.dim);
  cmd_all->add_option("--hidden", all.hidden);
  cmd_all->add_option("--lr", all.cfg.learning_rate);
  cmd_all->add_option("--epochs", all.cfg.epochs);
  cmd_all->add_option("--batch-size", all.cfg.batch_size);
  cmd_all->add_option("--pretrain-docs", all.pretrain_docs);
  cmd_all->add_option("--pretrain-len", all.pretrain_len);
  cmd_all->add_option("--pretrain-epochs", all.pretrain_epochs);
  cmd_all->add_option("--pretrain-lr", all.pretrain_lr);
  cmd_all->callback([&] {
    action = [&] {
      all.seed = global_seed;
      all.cfg.seed = global_seed;
      run_all(all);
    };
  });

  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  try {
    if (action) action();
  } catch (const adapt::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << std::endl;
    return e.kind() == "FileNotFound" ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
