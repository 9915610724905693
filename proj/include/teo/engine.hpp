#pragma once

// Two-stage orchestration: stage 1 proposes an edit script, stage 2 writes
// the final utterance conditioned on it. Variants:
//   TEO        stage-1 output is fed verbatim to stage 2
//   TEO_STAGE1 no stage 2; parsed ops applied by rule, insertions at random gaps
//   TEO_RFIS   replacements applied by rule, only insertions forwarded to stage 2
//   TEO_GOLD   gold ops fed to stage 2; the stage-1 backend is never called

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "teo/backend.hpp"
#include "teo/corpus.hpp"
#include "teo/editscript.hpp"
#include "teo/metrics.hpp"
#include "teo/random.hpp"

namespace teo {

enum class Variant { TEO, TEO_STAGE1, TEO_RFIS, TEO_GOLD };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::TEO: return "teo";
    case Variant::TEO_STAGE1: return "teo_stage1";
    case Variant::TEO_RFIS: return "teo_rfis";
    case Variant::TEO_GOLD: return "teo_gold";
  }
  return "teo";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "teo") return Variant::TEO;
  if (s == "teo_stage1") return Variant::TEO_STAGE1;
  if (s == "teo_rfis") return Variant::TEO_RFIS;
  if (s == "teo_gold") return Variant::TEO_GOLD;
  throw std::invalid_argument("unknown variant: " + std::string(s));
}

struct SampleRecord {
  std::string id;
  std::string stage1_ops_raw;
  EditScript stage1_script;
  TokenSeq prediction;
  std::string prediction_text;
  bool failed = false;
  std::string error;
};

struct RunResult {
  Variant variant = Variant::TEO;
  std::uint64_t seed = 0;
  BackendSpec stage1;
  BackendSpec stage2;
  std::string started_at;
  std::string finished_at;
  std::vector<SampleRecord> records;

  std::size_t failures() const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const SampleRecord& r) { return r.failed; }));
  }
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// id -> gold serialized script, for a GOLD stage-1 backend.
inline std::map<std::string, std::string> gold_ops_targets(const Corpus& corpus, const TextOptions& opt) {
  std::map<std::string, std::string> out;
  for (const auto& s : corpus)
    if (s.rewritten) out[s.id] = serialize(gold_script(s, opt), opt.layout, opt.markers);
  return out;
}

/// id -> rewritten utterance, for a GOLD stage-2 backend.
inline std::map<std::string, std::string> gold_rewrite_targets(const Corpus& corpus) {
  std::map<std::string, std::string> out;
  for (const auto& s : corpus)
    if (s.rewritten) out[s.id] = *s.rewritten;
  return out;
}

namespace detail {

inline void fail_record(SampleRecord& r, const std::string& error) {
  r.failed = true;
  r.error = error;
  r.prediction = TokenSeq{};
  r.prediction_text.clear();
}

}  // namespace detail

inline RunResult run_two_stage(const Corpus& corpus, const Backend& stage1, const Backend& stage2,
                               Variant variant, std::uint64_t seed, const TextOptions& opt = {}) {
  RunResult run;
  run.variant = variant;
  run.seed = seed;
  run.stage1 = stage1.spec();
  run.stage2 = stage2.spec();
  run.started_at = utc_timestamp();
  run.records.resize(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    run.records[i].id = corpus[i].id;
    run.records[i].prediction.mode = opt.mode;
  }

  if (variant == Variant::TEO_GOLD) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      auto gold = gold_script(corpus[i], opt);
      run.records[i].stage1_ops_raw = serialize(gold, opt.layout, opt.markers);
      run.records[i].stage1_script = std::move(gold);
    }
  } else {
    std::vector<Prompt> prompts;
    for (const auto& s : corpus)
      prompts.push_back({s.id, build_prompt(s.history, s.incomplete, std::nullopt, opt.markers), s.incomplete});
    const auto outputs = stage1.generate(prompts);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      auto& r = run.records[i];
      if (!outputs[i].ok()) {
        detail::fail_record(r, "stage 1: " + outputs[i].error);
        continue;
      }
      r.stage1_ops_raw = *outputs[i].output;
      r.stage1_script = parse(r.stage1_ops_raw, Policy::LENIENT, opt.mode, opt.markers).script;
    }
  }

  if (variant == Variant::TEO_STAGE1) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      auto& r = run.records[i];
      if (r.failed) continue;
      auto rng = RandomStream::for_sample(seed, r.id);
      r.prediction = apply(opt.tok(corpus[i].incomplete), r.stage1_script, ApplyStrategy::RANDOM, &rng,
                           Policy::LENIENT, opt.markers)
                         .tokens;
      r.prediction_text = detokenize(r.prediction);
    }
    run.finished_at = utc_timestamp();
    return run;
  }

  std::vector<Prompt> prompts;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& s = corpus[i];
    const auto& r = run.records[i];
    if (r.failed) continue;
    if (variant == Variant::TEO_RFIS) {
      auto [replacements, insertions] = split_rfis(r.stage1_script);
      const auto replaced = apply(opt.tok(s.incomplete), replacements, ApplyStrategy::MATCHED, nullptr,
                                  Policy::LENIENT, opt.markers);
      const auto utterance = detokenize(replaced.tokens);
      prompts.push_back({s.id,
                         build_prompt(s.history, utterance, serialize(insertions, opt.layout, opt.markers),
                                      opt.markers),
                         utterance});
    } else {
      prompts.push_back({s.id, build_prompt(s.history, s.incomplete, r.stage1_ops_raw, opt.markers),
                         s.incomplete});
    }
    owner.push_back(i);
  }
  if (!prompts.empty()) {
    const auto outputs = stage2.generate(prompts);
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      auto& r = run.records[owner[k]];
      if (!outputs[k].ok()) {
        detail::fail_record(r, "stage 2: " + outputs[k].error);
        continue;
      }
      r.prediction_text = *outputs[k].output;
      r.prediction = opt.tok(r.prediction_text);
    }
  }
  run.finished_at = utc_timestamp();
  return run;
}

/// Stage-1 correctness: the parsed script equals the gold script, in
/// either layout order, ignoring anchors.
inline bool stage1_correct(const EditScript& predicted, const EditScript& gold) {
  return predicted.same_edits(gold) || predicted.same_edits(reorder(gold, Layout::GROUPED));
}

/// Full report from raw per-id outputs. `stage1_ops` may be empty, in which
/// case the stage-transition fields stay absent.
inline EvalReport analyze_outputs(const Corpus& corpus, const std::map<std::string, std::string>& predictions,
                                  const std::map<std::string, std::string>& stage1_ops,
                                  const TextOptions& opt = {}, const MetricOrders& orders = {}) {
  std::vector<TokenSeq> incs, preds, refs;
  std::vector<StageOutcome> outcomes;
  for (const auto& s : corpus) {
    auto pred = predictions.find(s.id);
    if (pred == predictions.end()) throw CorpusError("no prediction for sample \"" + s.id + "\"");
    incs.push_back(opt.tok(s.incomplete));
    preds.push_back(opt.tok(pred->second));
    refs.push_back(opt.tok(require_rewritten(s)));
    if (!stage1_ops.empty()) {
      auto ops = stage1_ops.find(s.id);
      if (ops == stage1_ops.end()) throw CorpusError("no stage-1 ops for sample \"" + s.id + "\"");
      const auto parsed = parse(ops->second, Policy::LENIENT, opt.mode, opt.markers).script;
      outcomes.push_back({stage1_correct(parsed, extract(incs.back(), refs.back(), opt.markers)),
                          preds.back() == refs.back()});
    }
  }
  auto report = evaluate(incs, preds, refs, orders, opt.markers);
  if (!outcomes.empty()) {
    const auto rates = e2c_c2e(outcomes);
    report.e2c = rates.e2c;
    report.c2e = rates.c2e;
    report.stage_matrix = StageMatrix::from(outcomes);
  }
  return report;
}

inline EvalReport analyze(const RunResult& run, const Corpus& corpus, const TextOptions& opt = {},
                          const MetricOrders& orders = {}) {
  if (run.records.size() != corpus.size()) throw CorpusError("run and corpus differ in size");
  std::map<std::string, std::string> predictions, stage1_ops;
  for (const auto& r : run.records) {
    predictions[r.id] = r.prediction_text;
    stage1_ops[r.id] = r.stage1_ops_raw;
  }
  auto report = analyze_outputs(corpus, predictions, stage1_ops, opt, orders);
  if (const auto failed = run.failures(); failed > 0)
    report.warnings.push_back(std::to_string(failed) + " sample(s) failed and were scored as empty predictions");
  return report;
}

}  // namespace teo
