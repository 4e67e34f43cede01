#include <algorithm>
#include <functional>
#include <random>
#include <sstream>

#include "doctest.h"

#include "adapt/corpus.hpp"
#include "adapt/error.hpp"
#include "helpers.hpp"

using namespace adapt;
using testutil::TempDir;
using testutil::write_file;

namespace {

BaseVocab small_vocab() { return BaseVocab({"[UNK]", "run", "##ing"}); }

std::string error_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return "";
}

}  // namespace

TEST_CASE("load_vocab assigns positional ids") {
  TempDir tmp;
  write_file(tmp.file("vocab.txt"), "[UNK]\nthe\n##ing\nrun\n");
  const BaseVocab v = load_vocab(tmp.file("vocab.txt"));
  CHECK(v.size() == 4);
  CHECK(v.find("run") == 3);
  CHECK(v.find("##ing") == 2);
  CHECK(v.unk_id() == 0);
}

TEST_CASE("load_vocab reports duplicates with both line numbers") {
  TempDir tmp;
  write_file(tmp.file("vocab.txt"), "a\na\n");
  try {
    load_vocab(tmp.file("vocab.txt"));
    FAIL("expected DuplicateToken");
  } catch (const Error& e) {
    CHECK(e.kind() == "DuplicateToken");
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
    CHECK(std::string(e.what()).find("0") != std::string::npos);
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("load_vocab rejects an empty file") {
  TempDir tmp;
  write_file(tmp.file("vocab.txt"), "");
  CHECK(error_kind([&] { load_vocab(tmp.file("vocab.txt")); }) == "EmptyVocab");
  CHECK(error_kind([&] { load_vocab(tmp.file("missing.txt")); }) == "FileNotFound");
}

TEST_CASE("load_vocab handles a bert-sized vocabulary file") {
  TempDir tmp;
  std::ostringstream content;
  for (int i = 0; i < 30522; ++i) content << "tok" << i << '\n';
  write_file(tmp.file("vocab.txt"), content.str());
  CHECK(load_vocab(tmp.file("vocab.txt")).size() == 30522);
}

TEST_CASE("base_tokenize greedy longest match") {
  const BaseVocab v = small_vocab();
  CHECK(base_tokenize(v, "runing") == std::vector<TokenId>{1, 2});
  // No vocabulary prefix covers the second 'n'; the whole word falls back
  // to the unknown id.
  CHECK(base_tokenize(v, "running") == std::vector<TokenId>{0});
  CHECK(base_tokenize(v, "xyz") == std::vector<TokenId>{0});
  CHECK(base_tokenize(v, "run") == std::vector<TokenId>{1});
}

TEST_CASE("base_tokenize lowercases before matching") {
  const BaseVocab v = small_vocab();
  CHECK(base_tokenize(v, "Runing RUNING") == std::vector<TokenId>{1, 2, 1, 2});
  CHECK(base_tokenize(v, "RUN") == std::vector<TokenId>{1});
}

TEST_CASE("base_tokenize splits punctuation into standalone tokens") {
  const BaseVocab v({"[UNK]", "gene", ",", "!", "therapy"});
  CHECK(base_tokenize(v, "gene, therapy!") == std::vector<TokenId>{1, 2, 4, 3});
  CHECK(base_tokenize(v, "gene,therapy") == std::vector<TokenId>{1, 2, 4});
}

TEST_CASE("base_tokenize longest match wins over shorter prefixes") {
  const BaseVocab v({"[UNK]", "in", "inter", "##nal", "##n"});
  CHECK(base_tokenize(v, "internal") == std::vector<TokenId>{2, 3});
}

TEST_CASE("base_tokenize is pure") {
  const BaseVocab v = small_vocab();
  const std::string text = "Runing, xyz RUN";
  CHECK(base_tokenize(v, text) == base_tokenize(v, text));
}

TEST_CASE("detokenization reassembles words when no unknown is emitted") {
  const BaseVocab v({"[UNK]", "run", "##ing", "##er", "walk", ",", "the"});
  std::mt19937 rng(7);
  const std::vector<std::string> words = {"runing", "runer", "walking", "walk", "the", ","};
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  for (int iter = 0; iter < 50; ++iter) {
    std::string text;
    std::vector<std::string> chosen;
    for (int w = 0; w < 6; ++w) {
      chosen.push_back(words[pick(rng)]);
      if (w) text += ' ';
      text += chosen.back();
    }
    std::string rebuilt;
    for (TokenId id : base_tokenize(v, text)) {
      REQUIRE(id != v.unk_id());
      std::string piece = v.token(id);
      if (piece.starts_with("##")) {
        rebuilt += piece.substr(2);
      } else {
        if (!rebuilt.empty()) rebuilt += ' ';
        rebuilt += piece;
      }
    }
    std::string expected;
    for (const std::string& w : chosen) {
      if (!expected.empty()) expected += ' ';
      expected += w;
    }
    CHECK(rebuilt == expected);
  }
}

TEST_CASE("tokenize_corpus preserves order and labels") {
  const BaseVocab v = small_vocab();
  std::vector<LabeledDoc> docs = {{"run", {"a", false}}, {"runing", {"7", true}}};
  const auto out = tokenize_corpus_serial(v, docs);
  REQUIRE(out.size() == 2);
  CHECK(out[0].ids == std::vector<TokenId>{1});
  CHECK(out[0].label == Label{"a", false});
  CHECK(out[1].ids == std::vector<TokenId>{1, 2});
  CHECK(out[1].label == Label{"7", true});
}

TEST_CASE("tokenize_corpus error paths") {
  const BaseVocab v = small_vocab();
  CHECK(error_kind([&] { tokenize_corpus_serial(v, {}); }) == "EmptyCorpus");
  std::vector<LabeledDoc> docs = {{"run", {"0", false}}, {"   \t  ", {"0", false}}};
  try {
    tokenize_corpus_serial(v, docs);
    FAIL("expected EmptyTokenization");
  } catch (const Error& e) {
    CHECK(e.kind() == "EmptyTokenization");
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
  CHECK(error_kind([&] { tokenize_corpus(v, docs); }) == "EmptyTokenization");
}

TEST_CASE("corpus token counts equal the sum of per-doc tokenizations") {
  const BaseVocab v({"[UNK]", "gene", "brca", "##1", "indicates", "cancer", "predisposition",
                     ",", "individuals", "with", "mutations", "have", "a", "higher", "risk",
                     "dna", "repair"});
  std::vector<LabeledDoc> docs = {
      {"Gene BRCA1 indicates cancer predisposition, individuals with BRCA1 mutations have a "
       "higher risk",
       {"genetics", false}},
      {"BRCA2 indicates DNA repair", {"genetics", false}}};
  const auto out = tokenize_corpus_serial(v, docs);
  std::size_t total = 0;
  for (const TokenizedDoc& d : out) total += d.ids.size();
  std::size_t expected = 0;
  for (const LabeledDoc& d : docs) expected += base_tokenize(v, d.text).size();
  CHECK(total == expected);
  CHECK(out[0].ids.size() == 16);
}

TEST_CASE("corpus jsonl round trip keeps label types") {
  TempDir tmp;
  write_file(tmp.file("corpus.jsonl"),
             "{\"text\": \"run runing\", \"label\": \"pos\"}\n"
             "{\"text\": \"xyz\", \"label\": 3}\n");
  const auto docs = load_corpus_jsonl(tmp.file("corpus.jsonl"));
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].label == Label{"pos", false});
  CHECK(docs[1].label == Label{"3", true});

  const BaseVocab v = small_vocab();
  const auto tokenized = tokenize_corpus_serial(v, docs);
  save_tokenized_jsonl(tokenized, tmp.file("tokens.jsonl"));
  const auto reloaded = load_tokenized_jsonl(tmp.file("tokens.jsonl"));
  CHECK(reloaded == tokenized);
  // integer labels stay integers on disk
  CHECK(testutil::read_file(tmp.file("tokens.jsonl")).find("\"label\":3") != std::string::npos);
}

TEST_CASE("corpus jsonl rejects malformed lines") {
  TempDir tmp;
  write_file(tmp.file("bad1.jsonl"), "{\"text\": \"x\"}\n");
  CHECK(error_kind([&] { load_corpus_jsonl(tmp.file("bad1.jsonl")); }) == "ParseError");
  write_file(tmp.file("bad2.jsonl"), "{\"text\": \"  \", \"label\": 1}\n");
  CHECK(error_kind([&] { load_corpus_jsonl(tmp.file("bad2.jsonl")); }) == "ParseError");
  write_file(tmp.file("bad3.jsonl"), "not json\n");
  CHECK(error_kind([&] { load_corpus_jsonl(tmp.file("bad3.jsonl")); }) == "ParseError");
  write_file(tmp.file("bad4.jsonl"), "{\"text\": \"x\", \"label\": 1.5}\n");
  CHECK(error_kind([&] { load_corpus_jsonl(tmp.file("bad4.jsonl")); }) == "ParseError");
  write_file(tmp.file("bad5.jsonl"), "{\"ids\": [], \"label\": 1}\n");
  CHECK(error_kind([&] { load_tokenized_jsonl(tmp.file("bad5.jsonl")); }) == "ParseError");
}

TEST_CASE("vocab constructor rejects duplicates") {
  CHECK(error_kind([&] { BaseVocab({"a", "b", "a"}); }) == "DuplicateToken");
  CHECK(error_kind([&] { BaseVocab(std::vector<std::string>{}); }) == "EmptyVocab");
}
