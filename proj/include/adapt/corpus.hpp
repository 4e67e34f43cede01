#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace adapt {

using TokenId = std::int32_t;

// Subword vocabulary with positional ids: the id of a token is its line
// number in the vocabulary file. Word-internal pieces carry the
// continuation prefix (default "##"). Immutable after construction and
// safe to share across threads.
class BaseVocab {
 public:
  BaseVocab() = default;
  explicit BaseVocab(std::vector<std::string> tokens,
                     std::string continuation_prefix = "##");

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& continuation_prefix() const { return continuation_prefix_; }
  TokenId unk_id() const { return unk_id_; }

  // Id of an exact token string, or -1 if absent.
  TokenId find(std::string_view piece) const;

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId, StringHash, std::equal_to<>> index_;
  std::string continuation_prefix_ = "##";
  TokenId unk_id_ = 0;
};

// Class label. JSONL corpora carry labels as strings or integers; the
// canonical text plus the numeric flag keeps both byte-stable through
// save/load round trips.
struct Label {
  std::string text;
  bool numeric = false;

  friend bool operator==(const Label&, const Label&) = default;
};

struct LabeledDoc {
  std::string text;
  Label label;
};

struct TokenizedDoc {
  std::vector<TokenId> ids;
  Label label;

  friend bool operator==(const TokenizedDoc&, const TokenizedDoc&) = default;
};

// One token per line, UTF-8, line number = id. Throws DuplicateToken with
// both line numbers, EmptyVocab on an empty file.
BaseVocab load_vocab(const std::string& path);

// Lowercases ASCII letters and splits on whitespace; ASCII punctuation
// becomes standalone single-character words.
std::vector<std::string> pretokenize(std::string_view text);

// Greedy longest-match segmentation of each pretokenized word. A word with
// no matching vocabulary prefix at any point maps to the unknown id as a
// whole (no partial salvage).
std::vector<TokenId> base_tokenize(const BaseVocab& vocab, std::string_view text);

// Order-preserving map of base_tokenize over docs; labels pass through.
// Throws EmptyCorpus on no docs, EmptyTokenization with the doc index if a
// doc yields no tokens. The parallel version runs per-document under
// OpenMP with order restored by index; both produce identical output.
std::vector<TokenizedDoc> tokenize_corpus(const BaseVocab& vocab,
                                          const std::vector<LabeledDoc>& docs);
std::vector<TokenizedDoc> tokenize_corpus_serial(const BaseVocab& vocab,
                                                 const std::vector<LabeledDoc>& docs);

// JSONL io. Corpus lines carry {"text": ..., "label": ...}; tokenized
// lines carry {"ids": [...], "label": ...}.
std::vector<LabeledDoc> load_corpus_jsonl(const std::string& path);
void save_tokenized_jsonl(const std::vector<TokenizedDoc>& docs, const std::string& path);
std::vector<TokenizedDoc> load_tokenized_jsonl(const std::string& path);

}  // namespace adapt
