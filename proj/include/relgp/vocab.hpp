#pragma once

// Token vocabulary with a fixed reserved prefix block, plus the tokenizer
// rules shared by task templates and attribute rendering.
//
// Tokenizer: lowercase; runs of [a-z0-9_] form word tokens; other printable
// non-space characters are single-character tokens. Attribute values become
// atomic tokens per whitespace-separated piece when the pieces rejoin to the
// original string; otherwise they fall back to character tokens with
// whitespace rendered as <sp>/<nl>/<tab>.

#include <string>
#include <unordered_map>
#include <vector>

#include "relgp/store.hpp"

namespace relgp {

std::vector<std::string> tokenize_text(const std::string& text);
std::vector<std::string> value_tokens(const std::string& value);

class Vocab {
 public:
  // Reserved prefix block; ids are fixed and recorded in the vocab file.
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kMask = 3;
  static constexpr int kOpen = 4;
  static constexpr int kClose = 5;
  static constexpr int kYes = 6;
  static constexpr int kNo = 7;
  static constexpr int kUnk = 8;
  static constexpr int kSpace = 9;
  static constexpr int kReservedCount = 10;

  Vocab();  // reserved block only

  // Reserved block + column names, attribute values, the masked-attribute
  // template glue ("is", ",", "missing"), and any extra texts, sorted after
  // the reserved prefix.
  static Vocab build(const Database& db, const std::vector<std::string>& extra_texts);

  int id(const std::string& token) const;  // -1 when absent
  int id_or_unk(const std::string& token) const;
  const std::string& token(int id) const;
  size_t size() const { return tokens_.size(); }

  std::vector<int> encode_text(const std::string& text) const;
  std::vector<int> encode_value(const std::string& value) const;
  std::string decode(const std::vector<int>& ids) const;

  // One token per line; line number = id.
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  void add(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace relgp
