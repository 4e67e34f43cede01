// CLI conformance checks: exit codes, the mine parameter echo, and
// stage-by-stage subcommands producing the same bytes as `all`.
// Usage: cli_tests <path-to-adapt-cli> <path-to-data-dir>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_cli;

struct Shell {
  int exit_code = -1;
  std::string output;
};

Shell run(const std::string& cmd) {
  Shell result;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) return result;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) result.output.append(buf, n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

int g_failures = 0;

void expect(bool ok, const std::string& what) {
  std::cout << (ok ? "ok" : "FAILED") << " - " << what << "\n";
  if (!ok) ++g_failures;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: cli_tests <adapt-cli> <data-dir>\n";
    return 2;
  }
  g_cli = argv[1];
  const std::string data = argv[2];

  testutil::TempDir tmp;

  // missing input file: exit code 2, message names the path
  {
    const Shell r = run(g_cli + " tokenize --vocab /nonexistent/vocab.txt --corpus " + data +
                        "/toy_train.jsonl --out " + tmp.file("t.jsonl"));
    expect(r.exit_code == 2, "missing input exits 2");
    expect(r.output.find("/nonexistent/vocab.txt") != std::string::npos,
           "missing input names the path");
    expect(r.output.find("error: FileNotFound") != std::string::npos,
           "missing input error is machine-parseable");
  }

  // module errors map to exit code 1 with a single-line error
  {
    testutil::write_file(tmp.file("dup.txt"), "a\na\n");
    const Shell r = run(g_cli + " tokenize --vocab " + tmp.file("dup.txt") + " --corpus " +
                        data + "/toy_train.jsonl --out " + tmp.file("t.jsonl"));
    expect(r.exit_code == 1, "duplicate vocab token exits 1");
    expect(r.output.find("error: DuplicateToken") != std::string::npos,
           "duplicate token error is machine-parseable");
    expect(r.output.find('\n') == r.output.size() - 1, "error output is a single line");
  }

  // unknown subcommand fails
  expect(run(g_cli + " frobnicate").exit_code != 0, "unknown subcommand exits nonzero");

  // mine echoes its parameters (defaults shown here)
  {
    const Shell t = run(g_cli + " tokenize --vocab " + data + "/toy_vocab.txt --corpus " +
                        data + "/toy_train.jsonl --out " + tmp.file("tokens.jsonl"));
    expect(t.exit_code == 0, "tokenize runs");
    const Shell m = run(g_cli + " mine --tokens " + tmp.file("tokens.jsonl") + " --out " +
                        tmp.file("mined_default.tsv"));
    expect(m.exit_code == 0, "mine runs with defaults");
    expect(m.output.find("min_freq=5 min_len=3 max_len=20") != std::string::npos,
           "mine echoes default parameters");
  }

  // stage-by-stage subcommands reproduce the `all` artifacts byte for byte
  {
    const std::string flags =
        " --min-freq 3 --min-len 2 --max-len 4 --freq-cutoff 3 --cap 0.10 --budget 0.2 "
        "--epochs 30 --lr 0.3 --seed 7";
    const std::string outdir = tmp.file("all_out");
    const Shell all = run(g_cli + " all --vocab " + data + "/toy_vocab.txt --corpus " + data +
                          "/toy_train.jsonl --test-corpus " + data + "/toy_test.jsonl" +
                          flags + " --outdir " + outdir);
    expect(all.exit_code == 0, "all pipeline runs");

    const std::string tokens = tmp.file("s_tokens.jsonl");
    const std::string mined = tmp.file("s_mined.tsv");
    const std::string selected = tmp.file("s_selected.tsv");
    const std::string tv = tmp.file("s_tv.json");
    const std::string applied = tmp.file("s_applied.jsonl");

    expect(run(g_cli + " tokenize --vocab " + data + "/toy_vocab.txt --corpus " + data +
               "/toy_train.jsonl --out " + tokens)
                   .exit_code == 0,
           "tokenize stage runs");
    expect(run(g_cli + " mine --tokens " + tokens +
               " --min-freq 3 --min-len 2 --max-len 4 --out " + mined)
                   .exit_code == 0,
           "mine stage runs");
    expect(run(g_cli + " select --tokens " + tokens + " --mined " + mined +
               " --freq-cutoff 3 --cap 0.10 --vocab " + data + "/toy_vocab.txt --out " +
               selected)
                   .exit_code == 0,
           "select stage runs");
    const std::string base_size =
        std::to_string(185);  // line count of toy_vocab.txt, asserted below
    expect(run(g_cli + " build-vocab --selected " + selected + " --base-size " + base_size +
               " --out " + tv)
                   .exit_code == 0,
           "build-vocab stage runs");
    expect(run(g_cli + " apply --vocab " + data + "/toy_vocab.txt --task-vocab " + tv +
               " --corpus " + data + "/toy_train.jsonl --out " + applied)
                   .exit_code == 0,
           "apply stage runs");

    auto same = [&](const std::string& a, const std::string& b) {
      return testutil::read_file(a) == testutil::read_file(b);
    };
    expect(same(tokens, outdir + "/tokens_train.jsonl"), "tokenize matches all");
    expect(same(mined, outdir + "/mined.tsv"), "mine matches all");
    expect(same(selected, outdir + "/selected.tsv"), "select matches all");
    expect(same(tv, outdir + "/task_vocab.json"), "build-vocab matches all");
    expect(same(applied, outdir + "/adaptive_train.jsonl"), "apply matches all");

    // model handoff: init-model + sensitivity + train + eval against all's files
    const std::string model = tmp.file("s_model.json");
    const std::string report = tmp.file("s_report.json");
    const std::string trained = tmp.file("s_trained.json");
    const std::string metrics = tmp.file("s_metrics.json");
    const std::string applied_test = tmp.file("s_applied_test.jsonl");
    const std::string eval_out = tmp.file("s_eval.json");
    expect(run(g_cli + " init-model --vocab " + data + "/toy_vocab.txt --task-vocab " + tv +
               " --labels general,genetics --seed 7 --out " + model)
                   .exit_code == 0,
           "init-model stage runs");
    expect(same(model, outdir + "/model_init.json"), "init-model matches all");
    expect(run(g_cli + " sensitivity --model " + model + " --data " + applied +
               " --beta 0.1 --budget 0.2 --out " + report)
                   .exit_code == 0,
           "sensitivity stage runs");
    expect(same(report, outdir + "/sensitivity.json"), "sensitivity matches all");
    expect(run(g_cli + " apply --vocab " + data + "/toy_vocab.txt --task-vocab " + tv +
               " --corpus " + data + "/toy_test.jsonl --out " + applied_test)
                   .exit_code == 0,
           "apply test stage runs");
    expect(run(g_cli + " train --model " + model + " --data " + applied + " --mask " + report +
               " --lr 0.3 --epochs 30 --seed 7 --out " + trained + " --metrics " + metrics)
                   .exit_code == 0,
           "train stage runs");
    expect(same(trained, outdir + "/model_trained.json"), "train matches all");
    expect(same(metrics, outdir + "/metrics_train.json"), "train metrics match all");
    expect(run(g_cli + " eval --model " + trained + " --data " + applied_test + " --out " +
               eval_out)
                   .exit_code == 0,
           "eval stage runs");
    expect(same(eval_out, outdir + "/metrics_eval.json"), "eval matches all");
  }

  // vocabulary fixture sanity for the base-size constant used above
  {
    std::ifstream in(data + "/toy_vocab.txt");
    std::size_t lines = 0;
    std::string line;
    while (std::getline(in, line)) ++lines;
    expect(lines == 185, "toy vocabulary holds 185 tokens");
  }

  if (g_failures == 0) {
    std::cout << "cli checks passed\n";
    return 0;
  }
  std::cout << g_failures << " cli checks failed\n";
  return 1;
}
