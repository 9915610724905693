#include <gtest/gtest.h>

#include <map>
#include <sstream>
#include <string>

#include "support.hpp"
#include "teo/config.hpp"

using namespace teo;

namespace {

Config from_toml(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  apply_toml(cfg, in, "test.toml");
  return cfg;
}

std::string error_of(const std::string& text) {
  try {
    from_toml(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, Defaults) {
  const Config cfg;
  EXPECT_EQ(cfg.text.mode, TokenMode::AUTO);
  EXPECT_EQ(cfg.text.layout, Layout::POSITIONAL);
  EXPECT_EQ(cfg.policy, Policy::STRICT);
  EXPECT_EQ(cfg.perturb.prob_p, 0.6);
  EXPECT_EQ(cfg.perturb.prob_r, 0.5);
  EXPECT_EQ(cfg.perturb.max_span_len, 5u);
  EXPECT_EQ(cfg.orders, (MetricOrders{4, 4, 4}));
  EXPECT_EQ(cfg.text.markers, default_markers());
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, FullDocument) {
  const auto cfg = from_toml(R"(# run configuration
seed = 1_234

[text]
mode = "char"          # Chinese corpora
layout = 'grouped'
policy = "lenient"

[markers]
insert = "[INS]"

[perturb]
prob_p = 0.7
prob_r = 1
max_span_len = 3

[stage1]
kind = "command"
endpoint = "python3 model.py --stage 1 # not a comment"
timeout_ms = 1500
retries = 4
backoff_ms = 50

[stage2]
kind = "http"
endpoint = "http://127.0.0.1:8000/generate"

[metrics]
bleu_max_order = 2
rouge_max_order = 3
restoration_max_order = 1

[engine]
concurrency = 8

[paths]
predictions = "out/pred.jsonl"
)");
  EXPECT_EQ(cfg.seed(), 1234u);
  EXPECT_EQ(cfg.text.mode, TokenMode::CHAR);
  EXPECT_EQ(cfg.text.layout, Layout::GROUPED);
  EXPECT_EQ(cfg.policy, Policy::LENIENT);
  EXPECT_EQ(cfg.text.markers.insert, "[INS]");
  EXPECT_EQ(cfg.perturb.prob_p, 0.7);
  EXPECT_EQ(cfg.perturb.prob_r, 1.0);
  EXPECT_EQ(cfg.perturb.max_span_len, 3u);
  EXPECT_EQ(cfg.stage1.kind, BackendKind::COMMAND);
  EXPECT_EQ(cfg.stage1.endpoint, "python3 model.py --stage 1 # not a comment");
  EXPECT_EQ(cfg.stage1.timeout.count(), 1500);
  EXPECT_EQ(cfg.stage1.retries, 4u);
  EXPECT_EQ(cfg.stage1.backoff.count(), 50);
  EXPECT_EQ(cfg.stage2.kind, BackendKind::HTTP);
  EXPECT_EQ(cfg.orders, (MetricOrders{2, 3, 1}));
  EXPECT_EQ(cfg.concurrency, 8u);
  EXPECT_EQ(cfg.paths.predictions, "out/pred.jsonl");
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, RejectsUnknownKeysAndSections) {
  EXPECT_NE(error_of("[text]\nmodee = \"char\"\n").find("unknown key \"text.modee\""), std::string::npos);
  EXPECT_NE(error_of("[model]\n").find("unknown section"), std::string::npos);
  EXPECT_NE(error_of("prob_p = 0.5\n").find("test.toml:1"), std::string::npos);
}

TEST(Config, RejectsMalformedValues) {
  EXPECT_FALSE(error_of("[perturb]\nprob_p = \"high\"\n").empty());
  EXPECT_FALSE(error_of("[perturb]\nmax_span_len = -1\n").empty());
  EXPECT_FALSE(error_of("[text]\nmode = \"bpe\"\n").empty());
  EXPECT_FALSE(error_of("[text]\nmode = char\n").empty());
  EXPECT_FALSE(error_of("[text\n").empty());
  EXPECT_FALSE(error_of("seed\n").empty());
  EXPECT_FALSE(error_of("[stage1]\nkind = \"grpc\"\n").empty());
}

TEST(Config, ValidateRejectsOutOfRange) {
  auto cfg = from_toml("[perturb]\nprob_p = 1.5\n");
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = from_toml("[stage1]\nkind = \"command\"\n");
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = from_toml("[markers]\nsep = \"SEP\"\n");
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = from_toml("[metrics]\nbleu_max_order = 0\n");
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, EnvironmentOverrides) {
  const std::map<std::string, std::string> env{{"TEO_SEED", "9"},
                                               {"TEO_TEXT_MODE", "whitespace"},
                                               {"TEO_PERTURB_PROB_P", "0.25"},
                                               {"TEO_STAGE2_KIND", "command"},
                                               {"TEO_STAGE2_ENDPOINT", "cat"},
                                               {"TEO_STAGE2_RETRIES", "0"}};
  auto cfg = from_toml("seed = 1\n[perturb]\nprob_p = 0.9\n");
  apply_env(cfg, [&](const char* name) -> const char* {
    auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  EXPECT_EQ(cfg.seed(), 9u);
  EXPECT_EQ(cfg.text.mode, TokenMode::WHITESPACE);
  EXPECT_EQ(cfg.perturb.prob_p, 0.25);
  EXPECT_EQ(cfg.stage2.kind, BackendKind::COMMAND);
  EXPECT_EQ(cfg.stage2.endpoint, "cat");
  EXPECT_EQ(cfg.stage2.retries, 0u);
  EXPECT_EQ(env_name("perturb", "prob_p"), "TEO_PERTURB_PROB_P");
  EXPECT_EQ(env_name("", "seed"), "TEO_SEED");
}

TEST(Config, BadEnvironmentValueIsAnError) {
  Config cfg;
  EXPECT_THROW(apply_env(cfg, [](const char* name) -> const char* {
                 return std::string(name) == "TEO_PERTURB_PROB_R" ? "lots" : nullptr;
               }),
               ConfigError);
}

TEST(Config, JsonEchoesEffectiveValues) {
  const auto cfg = from_toml("seed = 3\n[text]\nlayout = \"grouped\"\n");
  const auto j = cfg.to_json();
  EXPECT_EQ(j["seed"], 3);
  EXPECT_EQ(j["text"]["layout"], "grouped");
  EXPECT_EQ(j["markers"]["delete"], "[D]");
  EXPECT_EQ(j["perturb"]["prob_p"], 0.6);
  EXPECT_EQ(j["metrics"]["bleu_max_order"], 4);
}

TEST(Config, CustomMarkersFlowThroughSerialization) {
  const auto cfg = from_toml("[markers]\ninsert = \"[INS]\"\ndelete = \"[DEL]\"\nreplace = \"[REP]\"\n");
  const auto& m = cfg.text.markers;
  const auto s = extract(cfg.text.tok("It is he who acted"), cfg.text.tok("It is Ben Affleck who acted as Batman"), m);
  const auto text = serialize(s, Layout::POSITIONAL, m);
  EXPECT_EQ(text, "[DEL] he [REP] Ben Affleck [INS] as Batman");
  EXPECT_TRUE(parse(text, Policy::STRICT, TokenMode::AUTO, m).script.same_edits(s));
}

TEST(Config, FileLoading) {
  const auto dir = teo::testkit::scratch("config_file");
  teo::testkit::write_file(dir / "c.toml", "[perturb]\nprob_r = 0.1\n");
  Config cfg;
  apply_toml_file(cfg, (dir / "c.toml").string());
  EXPECT_EQ(cfg.perturb.prob_r, 0.1);
  EXPECT_THROW(apply_toml_file(cfg, (dir / "missing.toml").string()), ConfigError);
}
