#pragma once

// Edit scripts over an incomplete utterance: extraction from an
// (incomplete, rewritten) pair, marker-string serialization and parsing,
// and application back onto the utterance.
//
// Marker grammar:
//   script := op*
//   op     := "[I]" span | "[D]" span "[R]" span
//   span   := one or more non-marker tokens
//
// A pure deletion is a replacement whose inserted span is the single
// sentinel token "[NONE]".

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "teo/lcs.hpp"
#include "teo/random.hpp"
#include "teo/text.hpp"

namespace teo {

enum class OpKind { INSERTION, REPLACEMENT };
enum class Layout { POSITIONAL, GROUPED };
enum class ApplyStrategy { ANCHORED, MATCHED, RANDOM };
enum class Policy { STRICT, LENIENT };

inline std::string_view to_string(Layout l) { return l == Layout::GROUPED ? "grouped" : "positional"; }

inline Layout parse_layout(std::string_view s) {
  if (s == "positional") return Layout::POSITIONAL;
  if (s == "grouped") return Layout::GROUPED;
  throw std::invalid_argument("unknown layout: " + std::string(s));
}

inline std::string_view to_string(ApplyStrategy s) {
  switch (s) {
    case ApplyStrategy::ANCHORED: return "anchored";
    case ApplyStrategy::MATCHED: return "matched";
    case ApplyStrategy::RANDOM: return "random";
  }
  return "anchored";
}

inline ApplyStrategy parse_strategy(std::string_view s) {
  if (s == "anchored") return ApplyStrategy::ANCHORED;
  if (s == "matched") return ApplyStrategy::MATCHED;
  if (s == "random") return ApplyStrategy::RANDOM;
  throw std::invalid_argument("unknown apply strategy: " + std::string(s));
}

class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t token_index)
      : std::runtime_error(what + " (token " + std::to_string(token_index) + ")"),
        token_index_(token_index) {}
  std::size_t token_index() const { return token_index_; }

 private:
  std::size_t token_index_;
};

class ApplyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EditOp {
  OpKind kind{OpKind::INSERTION};
  TokenSeq deleted;   // empty iff kind == INSERTION
  TokenSeq inserted;  // never empty
  // INSERTION: gap 0..len in the source; REPLACEMENT: start of `deleted`.
  std::optional<std::size_t> anchor;

  static EditOp insertion(TokenSeq ins, std::optional<std::size_t> at = std::nullopt) {
    return {OpKind::INSERTION, TokenSeq{{}, ins.mode}, std::move(ins), at};
  }
  static EditOp replacement(TokenSeq del, TokenSeq ins,
                            std::optional<std::size_t> at = std::nullopt) {
    return {OpKind::REPLACEMENT, std::move(del), std::move(ins), at};
  }

  bool is_deletion(const Markers& m = default_markers()) const {
    return kind == OpKind::REPLACEMENT && inserted.size() == 1 && inserted[0].surface == m.none;
  }

  /// Equality ignoring the anchor.
  bool same_edit(const EditOp& o) const {
    return kind == o.kind && deleted == o.deleted && inserted == o.inserted;
  }

  bool operator==(const EditOp& o) const { return same_edit(o) && anchor == o.anchor; }
};

struct EditScript {
  std::vector<EditOp> ops;
  std::optional<std::size_t> source_len;

  std::size_t size() const { return ops.size(); }
  bool empty() const { return ops.empty(); }

  bool anchored() const {
    return !ops.empty() && std::all_of(ops.begin(), ops.end(),
                                       [](const EditOp& op) { return op.anchor.has_value(); });
  }

  /// Order-sensitive equality ignoring anchors and source_len.
  bool same_edits(const EditScript& o) const {
    return ops.size() == o.ops.size() &&
           std::equal(ops.begin(), ops.end(), o.ops.begin(),
                      [](const EditOp& a, const EditOp& b) { return a.same_edit(b); });
  }

  std::size_t count(OpKind k) const {
    return static_cast<std::size_t>(
        std::count_if(ops.begin(), ops.end(), [k](const EditOp& op) { return op.kind == k; }));
  }

  bool operator==(const EditScript&) const = default;
};

inline TokenSeq none_span(const Markers& m = default_markers(), TokenMode mode = TokenMode::AUTO) {
  return TokenSeq{{Token{m.none, TokenKind::WORD}}, mode};
}

namespace detail {

inline bool has_marker(const TokenSeq& span, const Markers& m) {
  return std::any_of(span.begin(), span.end(), [&](const Token& t) {
    return t.kind == TokenKind::MARKER || m.is_edit_marker(t.surface);
  });
}

inline bool has_none(const TokenSeq& span, const Markers& m) {
  return std::any_of(span.begin(), span.end(), [&](const Token& t) { return t.surface == m.none; });
}

// Empty string when the op is well formed, else the reason it is not.
inline std::string op_problem(const EditOp& op, const Markers& m) {
  if (op.inserted.empty()) return "empty inserted span";
  if (has_marker(op.inserted, m) || has_marker(op.deleted, m)) return "marker token inside a span";
  if (op.kind == OpKind::INSERTION) {
    if (!op.deleted.empty()) return "insertion with a deleted span";
    if (has_none(op.inserted, m)) return "deletion sentinel inside an insertion";
    return {};
  }
  if (op.deleted.empty()) return "empty deleted span";
  if (has_none(op.deleted, m)) return "deletion sentinel inside a deleted span";
  if (has_none(op.inserted, m) && op.inserted.size() != 1)
    return "deletion sentinel mixed with other inserted tokens";
  return {};
}

}  // namespace detail

/// Throws ScriptError when the script breaks an op or anchor invariant.
inline void validate(const EditScript& script, const Markers& m = default_markers()) {
  std::size_t with_anchor = 0;
  for (std::size_t i = 0; i < script.ops.size(); ++i) {
    if (auto problem = detail::op_problem(script.ops[i], m); !problem.empty())
      throw ScriptError("op " + std::to_string(i) + ": " + problem);
    with_anchor += script.ops[i].anchor.has_value();
  }
  if (with_anchor == 0) return;
  if (with_anchor != script.ops.size()) throw ScriptError("anchors must be set on all ops or none");

  std::size_t frontier = 0;
  for (std::size_t i = 0; i < script.ops.size(); ++i) {
    const auto& op = script.ops[i];
    const std::size_t at = *op.anchor;
    if (at < frontier)
      throw ScriptError("op " + std::to_string(i) + ": anchor out of order or overlapping");
    frontier = op.kind == OpKind::REPLACEMENT ? at + op.deleted.size() : at;
    if (script.source_len && frontier > *script.source_len)
      throw ScriptError("op " + std::to_string(i) + ": anchor beyond source length");
  }
}

/// Derives the edit script turning `incomplete` into `rewritten`.
///
/// Tokens outside the LCS form deletion and insertion runs. Runs falling in
/// the same gap between consecutive LCS anchors become one op: both present
/// gives a REPLACEMENT, insertion only an INSERTION, deletion only a
/// REPLACEMENT with the "[NONE]" sentinel. Ops are in source order with all
/// anchors set.
inline EditScript extract(const TokenSeq& incomplete, const TokenSeq& rewritten,
                          const Markers& m = default_markers()) {
  auto alignment = lcs_align(incomplete.tokens, rewritten.tokens,
                             [](const Token& a, const Token& b) { return a.surface == b.surface; });
  alignment.emplace_back(incomplete.size(), rewritten.size());

  EditScript script;
  script.source_len = incomplete.size();
  std::size_t prev_i = 0, prev_j = 0;
  for (auto [i, j] : alignment) {
    const bool has_del = i > prev_i;
    const bool has_ins = j > prev_j;
    if (has_del && has_ins) {
      script.ops.push_back(EditOp::replacement(incomplete.slice(prev_i, i),
                                               rewritten.slice(prev_j, j), prev_i));
    } else if (has_ins) {
      script.ops.push_back(EditOp::insertion(rewritten.slice(prev_j, j), prev_i));
    } else if (has_del) {
      script.ops.push_back(
          EditOp::replacement(incomplete.slice(prev_i, i), none_span(m, incomplete.mode), prev_i));
    }
    prev_i = i + 1;
    prev_j = j + 1;
  }
  return script;
}

/// GROUPED order: all insertions, then all replacements, each in script order.
inline EditScript reorder(const EditScript& script, Layout layout) {
  if (layout == Layout::POSITIONAL) return script;
  EditScript out = script;
  std::stable_partition(out.ops.begin(), out.ops.end(),
                        [](const EditOp& op) { return op.kind == OpKind::INSERTION; });
  return out;
}

/// Renders the marker string. Anchors are not part of the output.
inline std::string serialize(const EditScript& script, Layout layout = Layout::POSITIONAL,
                             const Markers& m = default_markers()) {
  for (std::size_t i = 0; i < script.ops.size(); ++i)
    if (auto problem = detail::op_problem(script.ops[i], m); !problem.empty())
      throw ScriptError("cannot serialize op " + std::to_string(i) + ": " + problem);

  std::string out;
  auto append = [&out](std::string_view piece) {
    if (!out.empty()) out.push_back(' ');
    out += piece;
  };
  for (const auto& op : reorder(script, layout).ops) {
    if (op.kind == OpKind::INSERTION) {
      append(m.insert);
    } else {
      append(m.remove);
      append(detokenize(op.deleted));
      append(m.replace);
    }
    append(detokenize(op.inserted));
  }
  return out;
}

struct Diagnostic {
  std::size_t token_index;
  std::string message;
};

struct ParseResult {
  EditScript script;
  std::vector<Diagnostic> diagnostics;
};

/// Parses a marker string. STRICT throws ParseError on the first grammar
/// violation; LENIENT drops the offending piece and records a diagnostic.
inline ParseResult parse(std::string_view text, Policy policy = Policy::STRICT,
                         TokenMode mode = TokenMode::AUTO, const Markers& m = default_markers()) {
  const TokenSeq toks = tokenize(text, mode, m);
  ParseResult result;
  std::size_t i = 0;
  const std::size_t n = toks.size();

  auto fault = [&](std::size_t at, std::string msg) {
    if (policy == Policy::STRICT) throw ParseError(msg, at);
    result.diagnostics.push_back({at, std::move(msg)});
  };
  auto is_marker = [&](std::size_t k) { return toks[k].kind == TokenKind::MARKER; };
  auto take_span = [&]() {
    const std::size_t from = i;
    while (i < n && !is_marker(i)) ++i;
    return toks.slice(from, i);
  };

  if (n > 0 && !is_marker(0)) {
    take_span();
    fault(0, "text before the first marker skipped");
  }

  while (i < n) {
    const std::size_t at = i;
    const std::string& marker = toks[i++].surface;
    if (marker == m.insert) {
      auto op = EditOp::insertion(take_span());
      if (auto problem = detail::op_problem(op, m); !problem.empty())
        fault(at, "insertion dropped: " + problem);
      else
        result.script.ops.push_back(std::move(op));
    } else if (marker == m.remove) {
      auto deleted = take_span();
      if (i >= n || toks[i].surface != m.replace) {
        fault(at, m.remove + " not followed by " + m.replace);
        continue;
      }
      ++i;
      auto op = EditOp::replacement(std::move(deleted), take_span());
      if (auto problem = detail::op_problem(op, m); !problem.empty())
        fault(at, "replacement dropped: " + problem);
      else
        result.script.ops.push_back(std::move(op));
    } else {
      take_span();
      fault(at, m.replace + " without a preceding " + m.remove);
    }
  }
  return result;
}

struct ApplyResult {
  TokenSeq tokens;
  std::size_t skipped = 0;  // ops dropped under LENIENT
};

namespace detail {

// A token of the utterance under construction. (key, rank) orders insertion
// points: source tokens and replacement output carry (source index, 1);
// inserted material at gap g carries (g, 0) so it lands before source token g
// and after earlier insertions at the same gap.
struct Cell {
  Token token;
  std::size_t key;
  int rank;
};

inline std::optional<std::size_t> find_span(const std::vector<Cell>& cells, const TokenSeq& span) {
  if (span.empty() || span.size() > cells.size()) return std::nullopt;
  for (std::size_t p = 0; p + span.size() <= cells.size(); ++p) {
    bool hit = true;
    for (std::size_t k = 0; k < span.size() && hit; ++k)
      hit = cells[p + k].token.surface == span[k].surface;
    if (hit) return p;
  }
  return std::nullopt;
}

inline bool span_at(const std::vector<Cell>& cells, std::size_t p, const TokenSeq& span) {
  if (p + span.size() > cells.size()) return false;
  for (std::size_t k = 0; k < span.size(); ++k)
    if (cells[p + k].token.surface != span[k].surface) return false;
  return true;
}

}  // namespace detail

/// Applies `script` to `incomplete`.
///
/// Replacements go first, right to left: ANCHORED uses the stored start,
/// MATCHED and RANDOM the leftmost occurrence of the deleted span. Insertions
/// follow in script order: ANCHORED at the stored gap; MATCHED at the stored
/// gap when the script is anchored to this utterance, else at the end;
/// RANDOM at a gap drawn uniformly from 0..len of the current utterance.
inline ApplyResult apply(const TokenSeq& incomplete, const EditScript& script,
                         ApplyStrategy strategy = ApplyStrategy::ANCHORED,
                         RandomStream* rng = nullptr, Policy policy = Policy::STRICT,
                         const Markers& m = default_markers()) {
  ApplyResult result;
  result.tokens.mode = incomplete.mode;
  if (script.empty()) {
    result.tokens = incomplete;
    return result;
  }
  validate(script, m);

  const bool anchors_usable =
      script.anchored() && script.source_len && *script.source_len == incomplete.size();
  if (strategy == ApplyStrategy::ANCHORED && !anchors_usable)
    throw ApplyError(script.anchored() ? "anchored script does not match the utterance length"
                                       : "ANCHORED application requires anchors");
  if (strategy == ApplyStrategy::RANDOM && !rng)
    throw ApplyError("RANDOM application requires a random stream");

  std::vector<detail::Cell> cells;
  cells.reserve(incomplete.size());
  for (std::size_t i = 0; i < incomplete.size(); ++i) cells.push_back({incomplete[i], i, 1});

  auto skip_or_throw = [&](const std::string& msg) {
    if (policy == Policy::STRICT) throw ApplyError(msg);
    ++result.skipped;
  };

  for (auto it = script.ops.rbegin(); it != script.ops.rend(); ++it) {
    const EditOp& op = *it;
    if (op.kind != OpKind::REPLACEMENT) continue;
    std::optional<std::size_t> pos;
    if (strategy == ApplyStrategy::ANCHORED) {
      if (detail::span_at(cells, *op.anchor, op.deleted)) pos = *op.anchor;
    } else {
      pos = detail::find_span(cells, op.deleted);
    }
    if (!pos) {
      skip_or_throw("replacement span not found: \"" + detokenize(op.deleted) + "\"");
      continue;
    }
    const std::size_t key = cells[*pos].key;
    std::vector<detail::Cell> fresh;
    if (!op.is_deletion(m))
      for (const auto& t : op.inserted) fresh.push_back({t, key, 1});
    const auto first = cells.begin() + static_cast<std::ptrdiff_t>(*pos);
    cells.erase(first, first + static_cast<std::ptrdiff_t>(op.deleted.size()));
    cells.insert(cells.begin() + static_cast<std::ptrdiff_t>(*pos), fresh.begin(), fresh.end());
  }

  for (const EditOp& op : script.ops) {
    if (op.kind != OpKind::INSERTION) continue;
    std::size_t pos = cells.size();
    std::size_t gap = incomplete.size();
    if (strategy == ApplyStrategy::RANDOM) {
      pos = rng->index(cells.size() + 1);
      gap = pos < cells.size() ? cells[pos].key : incomplete.size();
    } else if (anchors_usable) {
      gap = *op.anchor;
      pos = static_cast<std::size_t>(
          std::find_if(cells.begin(), cells.end(),
                       [gap](const detail::Cell& c) {
                         return c.key > gap || (c.key == gap && c.rank > 0);
                       }) -
          cells.begin());
    }
    std::vector<detail::Cell> fresh;
    for (const auto& t : op.inserted) fresh.push_back({t, gap, 0});
    cells.insert(cells.begin() + static_cast<std::ptrdiff_t>(pos), fresh.begin(), fresh.end());
  }

  result.tokens.tokens.reserve(cells.size());
  for (auto& c : cells) result.tokens.tokens.push_back(std::move(c.token));
  return result;
}

/// Partitions a script into (replacements, insertions), order and anchors kept.
inline std::pair<EditScript, EditScript> split_rfis(const EditScript& script) {
  EditScript replacements, insertions;
  replacements.source_len = insertions.source_len = script.source_len;
  for (const auto& op : script.ops)
    (op.kind == OpKind::REPLACEMENT ? replacements : insertions).ops.push_back(op);
  return {std::move(replacements), std::move(insertions)};
}

}  // namespace teo
