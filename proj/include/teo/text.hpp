#pragma once

// Tokenization for mixed CJK/Latin dialogue text.
//
// Every other module works on TokenSeq values produced here. Marker and
// separator literals ("[I]", "[SEP]", ...) are always emitted as single
// tokens so serialized edit scripts survive a tokenize/detokenize cycle.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace teo {

enum class TokenKind { CJK_CHAR, WORD, PUNCT, MARKER };

enum class TokenMode { CHAR, WHITESPACE, AUTO };

/// Literal strings with special meaning in edit scripts and prompts.
struct Markers {
  std::string insert{"[I]"};
  std::string remove{"[D]"};
  std::string replace{"[R]"};
  std::string none{"[NONE]"};
  std::string cls{"[CLS]"};
  std::string sep{"[SEP]"};

  bool is_edit_marker(std::string_view s) const {
    return s == insert || s == remove || s == replace;
  }

  // Literals tokenized atomically, longest first so "[NONE]" never loses to a
  // shorter prefix.
  std::vector<std::string_view> atomic_literals() const {
    std::vector<std::string_view> out{insert, remove, replace, none, cls, sep};
    out.erase(std::remove_if(out.begin(), out.end(),
                             [](std::string_view s) { return s.empty(); }),
              out.end());
    std::stable_sort(out.begin(), out.end(),
                     [](std::string_view a, std::string_view b) { return a.size() > b.size(); });
    return out;
  }

  bool operator==(const Markers&) const = default;
};

inline const Markers& default_markers() {
  static const Markers m{};
  return m;
}

struct Token {
  std::string surface;
  TokenKind kind{TokenKind::WORD};

  bool operator==(const Token&) const = default;
};

/// Tokenized utterance. Equality compares surfaces only; the mode is the
/// provenance of the sequence, not part of its value.
struct TokenSeq {
  std::vector<Token> tokens;
  TokenMode mode{TokenMode::AUTO};

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  const Token& operator[](std::size_t i) const { return tokens[i]; }
  auto begin() const { return tokens.begin(); }
  auto end() const { return tokens.end(); }

  std::vector<std::string> surfaces() const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.surface);
    return out;
  }

  TokenSeq slice(std::size_t from, std::size_t to) const {
    TokenSeq out;
    out.mode = mode;
    out.tokens.assign(tokens.begin() + static_cast<std::ptrdiff_t>(from),
                      tokens.begin() + static_cast<std::ptrdiff_t>(to));
    return out;
  }

  friend bool operator==(const TokenSeq& a, const TokenSeq& b) {
    if (a.tokens.size() != b.tokens.size()) return false;
    for (std::size_t i = 0; i < a.tokens.size(); ++i)
      if (a.tokens[i].surface != b.tokens[i].surface) return false;
    return true;
  }
};

inline std::string_view to_string(TokenMode m) {
  switch (m) {
    case TokenMode::CHAR: return "char";
    case TokenMode::WHITESPACE: return "whitespace";
    case TokenMode::AUTO: return "auto";
  }
  return "auto";
}

inline TokenMode parse_token_mode(std::string_view s) {
  if (s == "char") return TokenMode::CHAR;
  if (s == "whitespace") return TokenMode::WHITESPACE;
  if (s == "auto") return TokenMode::AUTO;
  throw std::invalid_argument("unknown tokenization mode: " + std::string(s));
}

namespace utf8 {

struct CodePoint {
  char32_t value;
  std::size_t length;  // bytes consumed
};

// Lenient decoder: a malformed lead or continuation byte is consumed alone
// and reported as U+FFFD so tokenization stays total.
inline CodePoint decode(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t k) -> int {
    if (pos + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {0xFFFD, 1};
  }
  for (std::size_t k = 1; k < len; ++k) {
    const int c = cont(k);
    if (c < 0) return {0xFFFD, 1};
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  return {cp, len};
}

}  // namespace utf8

namespace detail {

struct Range {
  char32_t lo, hi;
};

inline bool in_ranges(char32_t cp, std::initializer_list<Range> ranges) {
  return std::any_of(ranges.begin(), ranges.end(),
                     [cp](const Range& r) { return cp >= r.lo && cp <= r.hi; });
}

}  // namespace detail

// Han ideographs (URO, Ext A, Ext B+, compatibility), kana and Hangul
// syllables are segmented per character in AUTO mode.
inline bool is_cjk(char32_t cp) {
  return detail::in_ranges(cp, {{0x3040, 0x30FF},
                                {0x3400, 0x4DBF},
                                {0x4E00, 0x9FFF},
                                {0xAC00, 0xD7AF},
                                {0xF900, 0xFAFF},
                                {0x20000, 0x2FA1F}});
}

inline bool is_space(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f' ||
         cp == 0x00A0 || cp == 0x3000 || (cp >= 0x2000 && cp <= 0x200B) || cp == 0x202F ||
         cp == 0x205F || cp == 0xFEFF;
}

inline bool is_punct(char32_t cp) {
  if (cp < 0x80)
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  return detail::in_ranges(cp, {{0x00A1, 0x00BF},
                                {0x2010, 0x2027},
                                {0x2030, 0x205E},
                                {0x3001, 0x303F},
                                {0xFE30, 0xFE4F},
                                {0xFF01, 0xFF0F},
                                {0xFF1A, 0xFF20},
                                {0xFF3B, 0xFF40},
                                {0xFF5B, 0xFF65}});
}

// Opening brackets attach to the following token when detokenizing.
inline bool is_opener(std::string_view surface) {
  static constexpr std::array<std::string_view, 12> openers{
      "(", "[", "{", "“", "‘", "《", "「", "『", "【", "（",
      "［", "｛"};
  return std::find(openers.begin(), openers.end(), surface) != openers.end();
}

namespace detail {

class Tokenizer {
 public:
  Tokenizer(TokenMode mode, const Markers& markers)
      : mode_(mode), literals_(markers.atomic_literals()), markers_(markers) {}

  TokenSeq run(std::string_view text) {
    out_.mode = mode_;
    std::size_t pos = 0;
    while (pos < text.size()) {
      if (auto lit = match_literal(text, pos); !lit.empty()) {
        flush();
        out_.tokens.push_back(
            {std::string(lit), markers_.is_edit_marker(lit) ? TokenKind::MARKER : TokenKind::WORD});
        pos += lit.size();
        continue;
      }
      const auto cp = utf8::decode(text, pos);
      const std::string_view raw = text.substr(pos, cp.length);
      pos += cp.length;

      if (is_space(cp.value)) {
        flush();
        continue;
      }
      switch (mode_) {
        case TokenMode::CHAR:
          emit_single(raw, cp.value);
          break;
        case TokenMode::AUTO:
          if (is_cjk(cp.value) || is_punct(cp.value)) {
            flush();
            emit_single(raw, cp.value);
          } else {
            word_.append(raw);
          }
          break;
        case TokenMode::WHITESPACE:
          word_.append(raw);
          break;
      }
    }
    flush();
    return std::move(out_);
  }

 private:
  std::string_view match_literal(std::string_view text, std::size_t pos) const {
    if (text[pos] != '[') return {};
    for (auto lit : literals_)
      if (text.substr(pos, lit.size()) == lit) return lit;
    return {};
  }

  void emit_single(std::string_view raw, char32_t cp) {
    TokenKind kind = TokenKind::WORD;
    if (is_cjk(cp))
      kind = TokenKind::CJK_CHAR;
    else if (is_punct(cp))
      kind = TokenKind::PUNCT;
    out_.tokens.push_back({std::string(raw), kind});
  }

  // WHITESPACE mode peels leading and trailing punctuation off each chunk.
  void flush() {
    if (word_.empty()) return;
    if (mode_ != TokenMode::WHITESPACE) {
      out_.tokens.push_back({std::move(word_), TokenKind::WORD});
      word_.clear();
      return;
    }
    std::vector<std::string_view> cps;
    std::vector<bool> punct;
    for (std::size_t p = 0; p < word_.size();) {
      const auto cp = utf8::decode(word_, p);
      cps.push_back(std::string_view(word_).substr(p, cp.length));
      punct.push_back(is_punct(cp.value));
      p += cp.length;
    }
    std::size_t lo = 0, hi = cps.size();
    while (lo < hi && punct[lo]) ++lo;
    while (hi > lo && punct[hi - 1]) --hi;
    for (std::size_t i = 0; i < lo; ++i) out_.tokens.push_back({std::string(cps[i]), TokenKind::PUNCT});
    if (lo < hi) {
      std::string middle;
      for (std::size_t i = lo; i < hi; ++i) middle.append(cps[i]);
      out_.tokens.push_back({std::move(middle), TokenKind::WORD});
    }
    for (std::size_t i = hi; i < cps.size(); ++i)
      out_.tokens.push_back({std::string(cps[i]), TokenKind::PUNCT});
    word_.clear();
  }

  TokenMode mode_;
  std::vector<std::string_view> literals_;
  const Markers& markers_;
  std::string word_;
  TokenSeq out_;
};

inline bool needs_space(const Token& a, const Token& b) {
  const bool a_cjk = a.kind == TokenKind::CJK_CHAR;
  const bool b_cjk = b.kind == TokenKind::CJK_CHAR;
  if ((a_cjk || b_cjk) && (a_cjk || a.kind == TokenKind::PUNCT) &&
      (b_cjk || b.kind == TokenKind::PUNCT))
    return false;
  if (a.kind == TokenKind::PUNCT && is_opener(a.surface)) return false;
  if (b.kind == TokenKind::PUNCT && !is_opener(b.surface)) return false;
  return true;
}

}  // namespace detail

inline TokenSeq tokenize(std::string_view text, TokenMode mode = TokenMode::AUTO,
                         const Markers& markers = default_markers()) {
  return detail::Tokenizer(mode, markers).run(text);
}

/// Joins tokens with single spaces, except: no space before closing
/// punctuation or after an opener, and none between CJK characters (or a CJK
/// character and adjacent punctuation).
inline std::string detokenize(const TokenSeq& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i > 0 && detail::needs_space(seq[i - 1], seq[i])) out.push_back(' ');
    out += seq[i].surface;
  }
  return out;
}

/// Tokenizes and re-joins, collapsing whitespace variations.
inline std::string normalize(std::string_view text, TokenMode mode = TokenMode::AUTO,
                             const Markers& markers = default_markers()) {
  return detokenize(tokenize(text, mode, markers));
}

}  // namespace teo
