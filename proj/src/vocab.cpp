#include "relgp/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace relgp {

namespace {

bool word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string escape_char(char c) {
  if (c == ' ') return "<sp>";
  if (c == '\n') return "<nl>";
  if (c == '\t') return "<tab>";
  return std::string(1, c);
}

}  // namespace

std::vector<std::string> tokenize_text(const std::string& text) {
  std::string t = lowercase(text);
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  };
  for (char c : t) {
    if (word_char(c)) {
      word += c;
    } else {
      flush();
      if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(std::string(1, c));
    }
  }
  flush();
  return out;
}

std::vector<std::string> value_tokens(const std::string& value) {
  std::string t = lowercase(value);
  std::vector<std::string> pieces;
  std::string piece;
  for (char c : t) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!piece.empty()) {
        pieces.push_back(piece);
        piece.clear();
      }
    } else {
      piece += c;
    }
  }
  if (!piece.empty()) pieces.push_back(piece);

  // Atomic pieces must rejoin to the original string; anything with leading,
  // trailing or repeated whitespace falls back to character tokens.
  std::string rejoined;
  for (size_t i = 0; i < pieces.size(); ++i) {
    if (i) rejoined += ' ';
    rejoined += pieces[i];
  }
  if (rejoined == t) return pieces;

  std::vector<std::string> chars;
  for (char c : t) chars.push_back(escape_char(c));
  return chars;
}

Vocab::Vocab() {
  add("<pad>");
  add("<bos>");
  add("<eos>");
  add("[MASK]");
  add("<open>");
  add("<close>");
  add("yes");
  add("no");
  add("<unk>");
  add("<sp>");
}

void Vocab::add(const std::string& token) {
  if (ids_.count(token)) return;
  ids_[token] = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
}

Vocab Vocab::build(const Database& db, const std::vector<std::string>& extra_texts) {
  Vocab v;
  std::set<std::string> body;
  auto collect = [&](const std::vector<std::string>& toks) {
    for (const std::string& t : toks)
      if (!v.ids_.count(t)) body.insert(t);
  };
  collect({"is", ",", "missing", "<nl>", "<tab>"});
  for (const Table& t : db.tables) {
    for (const ColumnSpec& c : t.spec.columns) collect(value_tokens(c.name));
    for (const Entity& e : t.rows)
      for (size_t ci = 0; ci < e.attrs.size(); ++ci) {
        std::string s = cell_to_string(t.spec.columns[ci], e.attrs[ci]);
        if (!s.empty()) collect(value_tokens(s));
      }
  }
  for (const std::string& text : extra_texts) collect(tokenize_text(text));
  for (const std::string& t : body) v.add(t);
  return v;
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? -1 : it->second;
}

int Vocab::id_or_unk(const std::string& token) const {
  int i = id(token);
  return i < 0 ? kUnk : i;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= static_cast<int>(tokens_.size()))
    raise(ErrorKind::DomainError, "token id out of range");
  return tokens_[id];
}

std::vector<int> Vocab::encode_text(const std::string& text) const {
  std::vector<int> out;
  for (const std::string& t : tokenize_text(text)) out.push_back(id_or_unk(t));
  return out;
}

std::vector<int> Vocab::encode_value(const std::string& value) const {
  std::vector<int> out;
  for (const std::string& t : value_tokens(value)) out.push_back(id_or_unk(t));
  return out;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::ostringstream os;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) os << ' ';
    os << token(ids[i]);
  }
  return os.str();
}

void Vocab::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) raise(ErrorKind::IoError, "cannot write " + path);
  for (const std::string& t : tokens_) os << t << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorKind::MissingFile, "cannot open " + path);
  Vocab v;
  std::string line;
  int idx = 0;
  while (std::getline(is, line)) {
    if (idx < kReservedCount) {
      if (line != v.tokens_[idx])
        raise(ErrorKind::IoError, "vocab file reserved block mismatch at id " +
                                      std::to_string(idx));
    } else {
      v.add(line);
    }
    ++idx;
  }
  return v;
}

}  // namespace relgp
