#pragma once

// Dialogue corpora: JSONL/TSV ingestion, corpus statistics, and the prompt
// files for both generation stages.
//
// Prompt layout (literal separator strings, mapped to model tokens
// downstream):
//   stage 1: [CLS] h_1 [SEP] ... h_k [SEP] incomplete [SEP]
//   stage 2: [CLS] h_1 [SEP] ... h_k [SEP] incomplete [SEP] ops [SEP]

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "teo/editscript.hpp"
#include "teo/perturb.hpp"
#include "teo/random.hpp"
#include "teo/text.hpp"

namespace teo {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DialogueSample {
  std::string id;
  std::vector<std::string> history;
  std::string incomplete;
  std::optional<std::string> rewritten;

  bool operator==(const DialogueSample&) const = default;
};

using Corpus = std::vector<DialogueSample>;

enum class CorpusFormat { JSONL, TSV };

/// Tokenization, marker and layout settings shared by corpus operations.
struct TextOptions {
  TokenMode mode = TokenMode::AUTO;
  Markers markers;
  Layout layout = Layout::POSITIONAL;

  TokenSeq tok(std::string_view s) const { return tokenize(s, mode, markers); }
};

inline CorpusFormat format_for_path(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".tsv") == 0 ? CorpusFormat::TSV
                                                                          : CorpusFormat::JSONL;
}

namespace detail {

inline bool blank(std::string_view line) {
  return line.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

inline DialogueSample sample_from_json(const nlohmann::json& j, std::size_t line_no) {
  auto fail = [&](const std::string& why) {
    throw CorpusError("line " + std::to_string(line_no) + ": " + why);
  };
  if (!j.is_object()) fail("expected a JSON object");
  DialogueSample s;
  if (auto it = j.find("id"); it != j.end() && !it->is_null()) {
    if (it->is_string())
      s.id = it->get<std::string>();
    else if (it->is_number_integer())
      s.id = std::to_string(it->get<long long>());
    else
      fail("\"id\" must be a string or integer");
  } else {
    s.id = std::to_string(line_no);
  }
  if (auto it = j.find("history"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) fail("\"history\" must be an array of strings");
    for (const auto& h : *it) {
      if (!h.is_string()) fail("\"history\" must be an array of strings");
      s.history.push_back(h.get<std::string>());
    }
  }
  auto it = j.find("incomplete");
  if (it == j.end() || !it->is_string()) fail("missing string field \"incomplete\"");
  s.incomplete = it->get<std::string>();
  if (blank(s.incomplete)) fail("\"incomplete\" is empty");
  if (auto r = j.find("rewritten"); r != j.end() && !r->is_null()) {
    if (!r->is_string()) fail("\"rewritten\" must be a string");
    if (!r->get<std::string>().empty()) s.rewritten = r->get<std::string>();
  }
  return s;
}

inline DialogueSample sample_from_tsv(const std::string& line, std::size_t line_no) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  if (cols.size() < 2)
    throw CorpusError("line " + std::to_string(line_no) + ": expected at least 2 tab-separated columns");
  DialogueSample s;
  s.id = std::to_string(line_no);
  if (!cols.back().empty()) s.rewritten = cols.back();
  s.incomplete = cols[cols.size() - 2];
  if (blank(s.incomplete))
    throw CorpusError("line " + std::to_string(line_no) + ": incomplete utterance is empty");
  s.history.assign(cols.begin(), cols.end() - 2);
  return s;
}

}  // namespace detail

/// Reads a corpus. Blank lines are skipped; JSONL ids default to the
/// 1-based line number, TSV ids are always the line number.
inline Corpus load(std::istream& in, CorpusFormat format) {
  Corpus corpus;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(std::move(line));
    if (detail::blank(line)) continue;
    DialogueSample s;
    if (format == CorpusFormat::JSONL) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw CorpusError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
      }
      s = detail::sample_from_json(j, line_no);
    } else {
      s = detail::sample_from_tsv(line, line_no);
    }
    if (!ids.insert(s.id).second)
      throw CorpusError("line " + std::to_string(line_no) + ": duplicate id \"" + s.id + "\"");
    corpus.push_back(std::move(s));
  }
  if (corpus.empty()) throw CorpusError("empty corpus");
  return corpus;
}

inline Corpus load(const std::string& path, std::optional<CorpusFormat> format = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path);
  try {
    return load(in, format.value_or(format_for_path(path)));
  } catch (const CorpusError& e) {
    throw CorpusError(path + ": " + e.what());
  }
}

inline nlohmann::json to_json(const DialogueSample& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["history"] = s.history;
  j["incomplete"] = s.incomplete;
  if (s.rewritten) j["rewritten"] = *s.rewritten;
  return j;
}

/// Canonical JSONL form: one object per line, keys sorted.
inline void save(std::ostream& out, const Corpus& corpus) {
  for (const auto& s : corpus) out << to_json(s).dump() << '\n';
}

struct CorpusStats {
  std::size_t n_samples = 0;
  double avg_cont_len = 0.0;
  double avg_curr_len = 0.0;
  double avg_rewr_len = 0.0;
  std::size_t n_insertion = 0;
  std::size_t n_replacement = 0;
};

inline const std::string& require_rewritten(const DialogueSample& s) {
  if (!s.rewritten) throw CorpusError("sample \"" + s.id + "\" has no rewritten utterance");
  return *s.rewritten;
}

inline CorpusStats stats(const Corpus& corpus, const TextOptions& opt = {}) {
  if (corpus.empty()) throw CorpusError("stats: empty corpus");
  CorpusStats st;
  st.n_samples = corpus.size();
  std::size_t cont = 0, curr = 0, rewr = 0;
  for (const auto& s : corpus) {
    const auto& rewritten = require_rewritten(s);
    for (const auto& h : s.history) cont += opt.tok(h).size();
    const auto inc = opt.tok(s.incomplete);
    const auto rew = opt.tok(rewritten);
    curr += inc.size();
    rewr += rew.size();
    const auto script = extract(inc, rew, opt.markers);
    st.n_insertion += script.count(OpKind::INSERTION);
    st.n_replacement += script.count(OpKind::REPLACEMENT);
  }
  const auto n = static_cast<double>(corpus.size());
  st.avg_cont_len = static_cast<double>(cont) / n;
  st.avg_curr_len = static_cast<double>(curr) / n;
  st.avg_rewr_len = static_cast<double>(rewr) / n;
  return st;
}

struct PreparedExample {
  std::string id;
  std::string input;
  std::optional<std::string> target;
  bool perturbed = false;
  std::string variant;

  bool operator==(const PreparedExample&) const = default;
};

inline nlohmann::json to_json(const PreparedExample& e) {
  nlohmann::json j;
  j["id"] = e.id;
  j["input"] = e.input;
  j["target"] = e.target ? nlohmann::json(*e.target) : nlohmann::json(nullptr);
  j["meta"] = {{"perturbed", e.perturbed}, {"variant", e.variant}};
  return j;
}

inline void save(std::ostream& out, const std::vector<PreparedExample>& examples) {
  for (const auto& e : examples) out << to_json(e).dump() << '\n';
}

/// Collapses internal whitespace runs and trims.
inline std::string squeeze(std::string_view s) {
  std::string out;
  bool gap = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
      gap = !out.empty();
      continue;
    }
    if (gap) out.push_back(' ');
    gap = false;
    out.push_back(c);
  }
  return out;
}

/// "[CLS] h_1 [SEP] ... h_k [SEP] incomplete [SEP]" plus "ops [SEP]" when
/// `ops` is given (an empty ops string keeps both separators). History and
/// utterance whitespace is squeezed; ops are copied verbatim.
inline std::string build_prompt(const std::vector<std::string>& history, std::string_view incomplete,
                                const std::optional<std::string>& ops, const Markers& m) {
  std::string out = m.cls;
  auto piece = [&out](std::string_view s) {
    if (s.empty()) return;
    out.push_back(' ');
    out += s;
  };
  for (const auto& h : history) {
    piece(squeeze(h));
    piece(m.sep);
  }
  if (history.empty()) piece(m.sep);
  piece(squeeze(incomplete));
  piece(m.sep);
  if (ops) {
    piece(*ops);
    piece(m.sep);
  }
  return out;
}

/// Gold edit script of one sample, anchored to its tokenized incomplete utterance.
inline EditScript gold_script(const DialogueSample& s, const TextOptions& opt) {
  return extract(opt.tok(s.incomplete), opt.tok(require_rewritten(s)), opt.markers);
}

/// History tokens as a single span source, with marker literals removed.
inline TokenSeq history_tokens(const DialogueSample& s, const TextOptions& opt) {
  TokenSeq out;
  out.mode = opt.mode;
  for (const auto& h : s.history)
    for (auto& t : opt.tok(h).tokens)
      if (t.kind != TokenKind::MARKER && t.surface != opt.markers.none) out.tokens.push_back(std::move(t));
  return out;
}

inline std::vector<PreparedExample> build_stage1(const Corpus& corpus, const TextOptions& opt = {}) {
  std::vector<PreparedExample> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    PreparedExample e;
    e.id = s.id;
    e.input = build_prompt(s.history, s.incomplete, std::nullopt, opt.markers);
    e.target = serialize(gold_script(s, opt), opt.layout, opt.markers);
    e.variant = "stage1";
    out.push_back(std::move(e));
  }
  return out;
}

/// Stage-2 training examples. With gold ops, each sample's script is
/// perturbed using the stream derived from (cfg.seed, sample id); without,
/// the ops slot is left empty.
inline std::vector<PreparedExample> build_stage2(const Corpus& corpus, const PerturbConfig& cfg,
                                                 bool use_gold_ops = true, const TextOptions& opt = {}) {
  cfg.validate();
  std::vector<PreparedExample> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    PreparedExample e;
    e.id = s.id;
    e.target = s.rewritten;
    std::string ops;
    if (use_gold_ops) {
      auto rng = RandomStream::for_sample(cfg.seed, s.id);
      PerturbOutcome noisy;
      try {
        noisy = perturb(gold_script(s, opt), history_tokens(s, opt), opt.tok(s.incomplete), cfg, rng);
      } catch (const std::invalid_argument& err) {
        throw CorpusError("sample \"" + s.id + "\": " + err.what());
      }
      ops = serialize(noisy.script, opt.layout, opt.markers);
      e.perturbed = noisy.fired();
      e.variant = "stage2_gold";
    } else {
      e.variant = "stage2_no_ops";
    }
    e.input = build_prompt(s.history, s.incomplete, ops, opt.markers);
    out.push_back(std::move(e));
  }
  return out;
}

/// Stage-2 inference prompts carrying the raw stage-1 output verbatim.
inline std::vector<PreparedExample> build_stage2_from_predictions(
    const Corpus& corpus, const std::map<std::string, std::string>& predicted_ops,
    const TextOptions& opt = {}) {
  std::vector<PreparedExample> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    auto it = predicted_ops.find(s.id);
    if (it == predicted_ops.end())
      throw CorpusError("no predicted ops for sample \"" + s.id + "\"");
    PreparedExample e;
    e.id = s.id;
    e.input = build_prompt(s.history, s.incomplete, it->second, opt.markers);
    e.variant = "stage2_predicted";
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace teo
