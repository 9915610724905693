// teo: command-line front end for edit-script extraction, data preparation,
// two-stage inference and evaluation.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "teo/commands.hpp"
#include "teo/config.hpp"

namespace {

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> layout;
  bool strict = false;
  bool lenient = false;
};

// "kind" or "kind:endpoint", e.g. "command:python3 model.py".
void apply_backend_flag(teo::BackendSpec& spec, const std::string& flag) {
  const auto colon = flag.find(':');
  spec.kind = teo::parse_backend_kind(flag.substr(0, colon));
  if (colon != std::string::npos) spec.endpoint = flag.substr(colon + 1);
}

const std::string& need(const std::string& value, const std::string& fallback, const char* what) {
  if (!value.empty()) return value;
  if (!fallback.empty()) return fallback;
  throw CLI::ValidationError(std::string(what) + " is required (flag or [paths] config entry)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage edit-operation toolkit for incomplete utterance rewriting"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config_path, "TOML configuration file");
  app.add_option("--seed", g.seed, "Run seed (overrides config)");
  app.add_option("--mode", g.mode, "Tokenization mode: auto, char, whitespace");
  app.add_option("--layout", g.layout, "Serialization layout: positional, grouped");
  auto* strict = app.add_flag("--strict", g.strict, "Fail on any malformed script or unlocatable span");
  app.add_flag("--lenient", g.lenient, "Skip malformed pieces and record them")->excludes(strict);

  std::string input, output, ops_path, strategy = "anchored", variant = "teo", predictions, references,
                         stage1_path, stage1_backend, stage2_backend, meta;
  int stage = 1;
  bool no_ops = false;
  std::optional<double> prob_p, prob_r;

  auto* extract = app.add_subcommand("extract", "Write gold edit scripts for a corpus");
  extract->add_option("-i,--input", input, "Corpus (JSONL or .tsv)")->required();
  extract->add_option("-o,--output", output, "Output JSONL {id, ops, anchors, source_len}")->required();

  auto* apply = app.add_subcommand("apply", "Apply edit scripts to incomplete utterances");
  apply->add_option("-i,--input", input, "Corpus")->required();
  apply->add_option("--ops", ops_path, "Ops JSONL {id, ops[, anchors, source_len]}")->required();
  apply->add_option("--strategy", strategy, "anchored, matched or random");
  apply->add_option("-o,--output", output, "Predictions JSONL");

  auto* prepare = app.add_subcommand("prepare", "Build stage-1 or stage-2 model inputs");
  prepare->add_option("--stage", stage, "1 or 2")->check(CLI::IsMember({1, 2}));
  prepare->add_option("-i,--input", input, "Corpus")->required();
  prepare->add_option("-o,--output", output, "Prepared JSONL");
  prepare->add_option("--predictions", predictions, "Stage-1 outputs {id, ops} for inference inputs");
  prepare->add_flag("--no-ops", no_ops, "Stage 2 without edit scripts in the input");
  prepare->add_option("--prob-p", prob_p, "Perturbation probability");
  prepare->add_option("--prob-r", prob_r, "Span replacement probability");

  auto* infer = app.add_subcommand("infer", "Run the two-stage pipeline through generation backends");
  infer->add_option("--variant", variant, "teo, teo_stage1, teo_rfis or teo_gold");
  infer->add_option("-i,--input", input, "Corpus")->required();
  infer->add_option("-o,--output", output, "Predictions JSONL");
  infer->add_option("--stage1", stage1_backend, "Stage-1 backend kind[:endpoint]");
  infer->add_option("--stage2", stage2_backend, "Stage-2 backend kind[:endpoint]");
  infer->add_option("--meta", meta, "Run metadata JSON (timestamps, backends, config)");

  auto* eval = app.add_subcommand("eval", "Score predictions against references");
  eval->add_option("--predictions", predictions, "Predictions JSONL {id, prediction}")->required();
  eval->add_option("--references", references, "Reference corpus")->required();
  eval->add_option("-o,--output", output, "Report JSON");

  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  stats->add_option("-i,--input", input, "Corpus")->required();
  stats->add_option("-o,--output", output, "Write JSON here instead of stdout");

  auto* analyze = app.add_subcommand("analyze", "Stage-transition analysis (E2C/C2E, error breakdown)");
  analyze->add_option("--stage1", stage1_path, "Stage-1 outputs JSONL {id, ops}")->required();
  analyze->add_option("--predictions", predictions, "Predictions JSONL {id, prediction}")->required();
  analyze->add_option("--references", references, "Reference corpus")->required();
  analyze->add_option("-o,--output", output, "Report JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    teo::Config cfg;
    if (!g.config_path.empty()) teo::apply_toml_file(cfg, g.config_path);
    teo::apply_env(cfg);
    if (g.seed) cfg.perturb.seed = *g.seed;
    if (g.mode) cfg.text.mode = teo::parse_token_mode(*g.mode);
    if (g.layout) cfg.text.layout = teo::parse_layout(*g.layout);
    if (g.strict) cfg.policy = teo::Policy::STRICT;
    if (g.lenient) cfg.policy = teo::Policy::LENIENT;
    if (prob_p) cfg.perturb.prob_p = *prob_p;
    if (prob_r) cfg.perturb.prob_r = *prob_r;
    if (!stage1_backend.empty()) apply_backend_flag(cfg.stage1, stage1_backend);
    if (!stage2_backend.empty()) apply_backend_flag(cfg.stage2, stage2_backend);
    cfg.validate();

    using namespace teo::cli;
    if (*extract) return cmd_extract(cfg, input, output);
    if (*apply)
      return cmd_apply(cfg, input, ops_path, teo::parse_strategy(strategy),
                       need(output, cfg.paths.predictions, "--output"));
    if (*prepare)
      return cmd_prepare(cfg, stage, input, need(output, cfg.paths.prepared, "--output"),
                         predictions.empty() ? std::nullopt : std::optional<std::string>(predictions), no_ops);
    if (*infer)
      return cmd_infer(cfg, teo::parse_variant(variant), input, need(output, cfg.paths.predictions, "--output"),
                       meta.empty() ? std::nullopt : std::optional<std::string>(meta));
    if (*eval) return cmd_eval(cfg, predictions, references, need(output, cfg.paths.report, "--output"));
    if (*stats) {
      if (output.empty()) return cmd_stats(cfg, input, std::cout);
      std::ofstream out(output);
      if (!out) throw teo::CorpusError("cannot write " + output);
      return cmd_stats(cfg, input, out);
    }
    if (*analyze)
      return cmd_analyze(cfg, stage1_path, predictions, references, need(output, cfg.paths.report, "--output"));
  } catch (const CLI::ValidationError& e) {
    std::cerr << "teo: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "teo: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
