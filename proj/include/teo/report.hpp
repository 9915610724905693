#pragma once

// JSON forms of reports, statistics and run outputs, plus readers for the
// per-id JSONL files the CLI exchanges.

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "teo/corpus.hpp"
#include "teo/engine.hpp"
#include "teo/metrics.hpp"

namespace teo {

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const PRF& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

inline nlohmann::json to_json(const RestorationScore& s) {
  return {{"p", s.p}, {"r", s.r}, {"f", s.f}, {"zero_denominator", s.zero_denominator}};
}

inline nlohmann::json to_json(const ErrorBreakdown& b) {
  return {{"wrong_samples", b.wrong_samples},
          {"insertion_error_count", b.insertion_error_count},
          {"replacement_error_count", b.replacement_error_count},
          {"insertion_share", optional_json(b.insertion_share())},
          {"no_edit_samples", b.no_edit_samples},
          {"no_edit_em", optional_json(b.no_edit_em)}};
}

inline nlohmann::json to_json(const StageMatrix& m) {
  return {{"right_right", m.right_right},
          {"right_wrong", m.right_wrong},
          {"wrong_right", m.wrong_right},
          {"wrong_wrong", m.wrong_wrong}};
}

/// Field names: em, bleu_<n>, rouge_<n>, rouge_l, f_<n>, e2c, c2e,
/// error_breakdown (plus n_samples, stage_matrix, warnings).
inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["n_samples"] = r.n_samples;
  j["em"] = r.em;
  for (const auto& [n, v] : r.bleu) j["bleu_" + std::to_string(n)] = v;
  for (const auto& [n, v] : r.rouge) j["rouge_" + std::to_string(n)] = to_json(v);
  j["rouge_l"] = to_json(r.rouge_l);
  for (const auto& [n, v] : r.restoration) j["f_" + std::to_string(n)] = to_json(v);
  j["e2c"] = optional_json(r.e2c);
  j["c2e"] = optional_json(r.c2e);
  j["stage_matrix"] = r.stage_matrix ? to_json(*r.stage_matrix) : nlohmann::json(nullptr);
  j["error_breakdown"] = to_json(r.error_breakdown);
  j["warnings"] = r.warnings;
  return j;
}

inline nlohmann::json to_json(const CorpusStats& s) {
  return {{"n_samples", s.n_samples},
          {"avg_cont_len", s.avg_cont_len},
          {"avg_curr_len", s.avg_curr_len},
          {"avg_rewr_len", s.avg_rewr_len},
          {"n_insertion", s.n_insertion},
          {"n_replacement", s.n_replacement}};
}

/// One predictions line per record: id, prediction, ops (raw stage-1
/// output), variant, failed, error. Run timestamps are not included so
/// repeated runs produce identical files.
inline void save_predictions(std::ostream& out, const RunResult& run) {
  for (const auto& r : run.records) {
    nlohmann::json j{{"id", r.id},
                     {"prediction", r.prediction_text},
                     {"ops", r.stage1_ops_raw},
                     {"variant", to_string(run.variant)},
                     {"failed", r.failed},
                     {"error", r.error}};
    out << j.dump() << '\n';
  }
}

inline nlohmann::json run_metadata(const RunResult& run) {
  return {{"variant", to_string(run.variant)},
          {"seed", run.seed},
          {"stage1_backend", run.stage1.to_json()},
          {"stage2_backend", run.stage2.to_json()},
          {"started_at", run.started_at},
          {"finished_at", run.finished_at},
          {"samples", run.records.size()},
          {"failed", run.failures()}};
}

/// Reads `field` of every line of a JSONL file into an id-keyed map. The
/// first field name present among `fields` is used.
inline std::map<std::string, std::string> read_field_map(const std::string& path,
                                                         const std::vector<std::string>& fields) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    const auto where = path + ":" + std::to_string(line_no) + ": ";
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw CorpusError(where + "malformed JSON line");
    if (!j.contains("id") || !(j["id"].is_string() || j["id"].is_number_integer()))
      throw CorpusError(where + "missing \"id\"");
    const std::string id = j["id"].is_string() ? j["id"].get<std::string>() : std::to_string(j["id"].get<long long>());
    const nlohmann::json* value = nullptr;
    for (const auto& f : fields)
      if (j.contains(f)) {
        value = &j[f];
        break;
      }
    if (!value || !(value->is_string() || value->is_null()))
      throw CorpusError(where + "missing string field \"" + fields.front() + "\"");
    if (!out.emplace(id, value->is_null() ? std::string{} : value->get<std::string>()).second)
      throw CorpusError(where + "duplicate id \"" + id + "\"");
  }
  return out;
}

}  // namespace teo
