#pragma once

// Implementations of the `teo` subcommands. Each returns a process exit
// status: 0 on success, 1 when a hard error occurred (a fatal input
// problem, or any sample-level error under the strict policy). A one-line
// summary always goes to `log`.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "teo/backend.hpp"
#include "teo/config.hpp"
#include "teo/corpus.hpp"
#include "teo/editscript.hpp"
#include "teo/engine.hpp"
#include "teo/report.hpp"

namespace teo::cli {

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write " + path);
  return out;
}

inline void write_report(const std::string& path, nlohmann::json report, const Config& cfg) {
  report["config"] = cfg.to_json();
  report["seed"] = cfg.seed();
  auto out = open_out(path);
  out << report.dump(2) << '\n';
}

// Reads the JSONL written by `extract` (or any {"id","ops"} file); anchors
// and source_len are attached when present.
inline std::map<std::string, nlohmann::json> read_ops_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path);
  std::map<std::string, nlohmann::json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (teo::detail::blank(line)) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    const auto where = path + ":" + std::to_string(line_no) + ": ";
    if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j["id"].is_string() ||
        !j.contains("ops") || !j["ops"].is_string())
      throw CorpusError(where + "expected {\"id\": string, \"ops\": string, ...}");
    const auto id = j["id"].get<std::string>();
    if (!out.emplace(id, std::move(j)).second) throw CorpusError(where + "duplicate id \"" + id + "\"");
  }
  return out;
}

inline EditScript script_from_ops_line(const nlohmann::json& j, const Config& cfg) {
  auto script = parse(j["ops"].get<std::string>(), cfg.policy, cfg.text.mode, cfg.text.markers).script;
  if (j.contains("anchors") && j["anchors"].is_array() && j["anchors"].size() == script.size() &&
      j.contains("source_len") && j["source_len"].is_number_unsigned()) {
    for (std::size_t i = 0; i < script.size(); ++i) script.ops[i].anchor = j["anchors"][i].get<std::size_t>();
    script.source_len = j["source_len"].get<std::size_t>();
    // Grouped files list insertions first; restore source order.
    std::stable_sort(script.ops.begin(), script.ops.end(),
                     [](const EditOp& a, const EditOp& b) { return *a.anchor < *b.anchor; });
  }
  return script;
}

}  // namespace detail

inline int cmd_extract(const Config& cfg, const std::string& in_path, const std::string& out_path,
                       std::ostream& log = std::cerr) {
  const auto corpus = load(in_path);
  auto out = detail::open_out(out_path);
  for (const auto& s : corpus) {
    const auto script = gold_script(s, cfg.text);
    const auto ordered = reorder(script, cfg.text.layout);
    std::vector<std::size_t> anchors;
    for (const auto& op : ordered.ops) anchors.push_back(*op.anchor);
    nlohmann::json j{{"id", s.id},
                     {"ops", serialize(script, cfg.text.layout, cfg.text.markers)},
                     {"anchors", anchors},
                     {"source_len", *script.source_len}};
    out << j.dump() << '\n';
  }
  log << "extract: " << corpus.size() << " scripts written to " << out_path << '\n';
  return 0;
}

inline int cmd_apply(const Config& cfg, const std::string& in_path, const std::string& ops_path,
                     ApplyStrategy strategy, const std::string& out_path, std::ostream& log = std::cerr) {
  const auto corpus = load(in_path);
  const auto ops = detail::read_ops_file(ops_path);
  for (const auto& s : corpus)
    if (!ops.count(s.id)) throw CorpusError(ops_path + ": no ops for sample \"" + s.id + "\"");

  auto out = detail::open_out(out_path);
  std::size_t failed = 0, skipped = 0;
  for (const auto& s : corpus) {
    const auto& line = ops.at(s.id);
    std::string prediction, error;
    try {
      const auto script = detail::script_from_ops_line(line, cfg);
      auto rng = RandomStream::for_sample(cfg.seed(), s.id);
      const auto applied = apply(cfg.text.tok(s.incomplete), script, strategy, &rng, cfg.policy, cfg.text.markers);
      skipped += applied.skipped;
      prediction = detokenize(applied.tokens);
    } catch (const std::exception& e) {
      error = e.what();
      ++failed;
    }
    nlohmann::json j{{"id", s.id},
                     {"prediction", prediction},
                     {"ops", line["ops"]},
                     {"variant", "apply_" + std::string(to_string(strategy))},
                     {"failed", !error.empty()},
                     {"error", error}};
    out << j.dump() << '\n';
  }
  log << "apply: " << corpus.size() << " samples, " << failed << " failed, " << skipped
      << " ops skipped -> " << out_path << '\n';
  return failed > 0 ? 1 : 0;
}

inline int cmd_prepare(const Config& cfg, int stage, const std::string& in_path, const std::string& out_path,
                       const std::optional<std::string>& predictions_path = std::nullopt, bool no_ops = false,
                       std::ostream& log = std::cerr) {
  const auto corpus = load(in_path);
  std::vector<PreparedExample> examples;
  if (stage == 1) {
    examples = build_stage1(corpus, cfg.text);
  } else if (stage == 2) {
    if (predictions_path)
      examples = build_stage2_from_predictions(corpus, read_field_map(*predictions_path, {"ops", "output"}), cfg.text);
    else
      examples = build_stage2(corpus, cfg.perturb, !no_ops, cfg.text);
  } else {
    throw std::invalid_argument("stage must be 1 or 2");
  }
  auto out = detail::open_out(out_path);
  save(out, examples);
  const auto perturbed = std::count_if(examples.begin(), examples.end(),
                                       [](const PreparedExample& e) { return e.perturbed; });
  log << "prepare: stage " << stage << ", " << examples.size() << " examples (" << perturbed
      << " perturbed) -> " << out_path << '\n';
  return 0;
}

inline int cmd_infer(const Config& cfg, Variant variant, const std::string& in_path, const std::string& out_path,
                     const std::optional<std::string>& meta_path = std::nullopt, std::ostream& log = std::cerr) {
  const auto corpus = load(in_path);
  const Backend stage1(cfg.stage1, gold_ops_targets(corpus, cfg.text));
  const Backend stage2(cfg.stage2, gold_rewrite_targets(corpus));
  const auto run = run_two_stage(corpus, stage1, stage2, variant, cfg.seed(), cfg.text);
  {
    auto out = detail::open_out(out_path);
    save_predictions(out, run);
  }
  if (meta_path) {
    auto meta = run_metadata(run);
    meta["config"] = cfg.to_json();
    auto out = detail::open_out(*meta_path);
    out << meta.dump(2) << '\n';
  }
  log << "infer: " << to_string(variant) << ", " << run.records.size() << " samples, " << run.failures()
      << " failed -> " << out_path << '\n';
  return run.failures() > 0 && cfg.policy == Policy::STRICT ? 1 : 0;
}

inline int cmd_eval(const Config& cfg, const std::string& pred_path, const std::string& ref_path,
                    const std::string& out_report, std::ostream& log = std::cerr) {
  const auto corpus = load(ref_path);
  const auto preds = read_field_map(pred_path, {"prediction", "output"});
  const auto report = analyze_outputs(corpus, preds, {}, cfg.text, cfg.orders);
  detail::write_report(out_report, to_json(report), cfg);
  log << "eval: " << report.n_samples << " samples, EM " << report.em << ", " << report.warnings.size()
      << " warning(s) -> " << out_report << '\n';
  return 0;
}

inline int cmd_stats(const Config& cfg, const std::string& in_path, std::ostream& out,
                     std::ostream& log = std::cerr) {
  const auto corpus = load(in_path);
  auto j = to_json(stats(corpus, cfg.text));
  j["tokenization"] = to_string(cfg.text.mode);
  out << j.dump(2) << '\n';
  log << "stats: " << corpus.size() << " samples\n";
  return 0;
}

inline int cmd_analyze(const Config& cfg, const std::string& stage1_path, const std::string& pred_path,
                       const std::string& ref_path, const std::string& out_report, std::ostream& log = std::cerr) {
  const auto corpus = load(ref_path);
  const auto stage1 = read_field_map(stage1_path, {"ops", "output"});
  const auto preds = read_field_map(pred_path, {"prediction", "output"});
  const auto report = analyze_outputs(corpus, preds, stage1, cfg.text, cfg.orders);
  detail::write_report(out_report, to_json(report), cfg);
  const auto& m = *report.stage_matrix;
  log << "analyze: " << report.n_samples << " samples, stage matrix [rr " << m.right_right << ", rw "
      << m.right_wrong << ", wr " << m.wrong_right << ", ww " << m.wrong_wrong << "] -> " << out_report
      << '\n';
  return 0;
}

}  // namespace teo::cli
