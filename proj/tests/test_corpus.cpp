#include <gtest/gtest.h>

#include <set>
#include <sstream>
#include <string>

#include "support.hpp"
#include "teo/corpus.hpp"

using namespace teo;
using teo::testkit::Gen;
using teo::testkit::read_file;
using teo::testkit::scratch;
using teo::testkit::seq;
using teo::testkit::Words;
using teo::testkit::write_file;

namespace {

const char* kWorkedLine =
    R"({"history":["I think Batman is very handsome.","The poster looks a bit like Ben Affleck."],)"
    R"("incomplete":"It is he who acted.","rewritten":"It is Ben Affleck who acted as Batman."})";

Corpus from_jsonl(const std::string& text) {
  std::istringstream in(text);
  return load(in, CorpusFormat::JSONL);
}

Corpus worked() { return from_jsonl(std::string(kWorkedLine) + "\n"); }

Corpus random_corpus(Gen& g, std::size_t n) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    auto [inc, out] = g.edit_pair(8, 6);
    DialogueSample s;
    s.id = "s" + std::to_string(i);
    for (std::size_t h = g.between(1, 3); h > 0; --h) s.history.push_back(detokenize(seq(g.words(1, 8, 12))));
    s.incomplete = detokenize(seq(inc));
    s.rewritten = detokenize(seq(out));
    c.push_back(s);
  }
  return c;
}

// Every way of placing the insertions (in order) into the growing utterance.
bool reachable(Words cur, const std::vector<Words>& ins, std::size_t k, const Words& target) {
  if (k == ins.size()) return cur == target;
  for (std::size_t gap = 0; gap <= cur.size(); ++gap) {
    Words next = cur;
    next.insert(next.begin() + static_cast<std::ptrdiff_t>(gap), ins[k].begin(), ins[k].end());
    if (reachable(next, ins, k + 1, target)) return true;
  }
  return false;
}

}  // namespace

TEST(Load, WorkedExampleLine) {
  const auto c = worked();
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].id, "1");
  EXPECT_EQ(c[0].history.size(), 2u);
  EXPECT_EQ(c[0].incomplete, "It is he who acted.");
  EXPECT_EQ(c[0].rewritten, "It is Ben Affleck who acted as Batman.");
}

TEST(Load, OptionalFieldsAndIds) {
  const auto c = from_jsonl(
      "{\"id\":\"a\",\"history\":[],\"incomplete\":\"x\",\"rewritten\":\"\"}\n"
      "\n"
      "{\"id\":7,\"incomplete\":\"y\"}\n"
      "{\"incomplete\":\"z\",\"rewritten\":null}\n");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].id, "a");
  EXPECT_FALSE(c[0].rewritten.has_value());
  EXPECT_EQ(c[1].id, "7");
  EXPECT_TRUE(c[1].history.empty());
  EXPECT_EQ(c[2].id, "4");
}

TEST(Load, Errors) {
  EXPECT_THROW(from_jsonl(""), CorpusError);
  EXPECT_THROW(from_jsonl("\n\n"), CorpusError);
  try {
    from_jsonl("{\"incomplete\":\"x\"}\n{not json\n");
    FAIL();
  } catch (const CorpusError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(from_jsonl("{\"history\":[\"a\"]}\n"), CorpusError);
  EXPECT_THROW(from_jsonl("{\"incomplete\":\"  \"}\n"), CorpusError);
  EXPECT_THROW(from_jsonl("{\"incomplete\":\"x\",\"history\":\"a\"}\n"), CorpusError);
  EXPECT_THROW(from_jsonl("{\"id\":\"a\",\"incomplete\":\"x\"}\n{\"id\":\"a\",\"incomplete\":\"y\"}\n"), CorpusError);
  EXPECT_THROW(load("/nonexistent/corpus.jsonl"), CorpusError);
}

TEST(Load, Tsv) {
  std::istringstream in("h1\tinc one\trewritten one\nh1\th2\tinc two\t\nonly\tpair\n");
  const auto c = load(in, CorpusFormat::TSV);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].history, (std::vector<std::string>{"h1"}));
  EXPECT_EQ(c[0].incomplete, "inc one");
  EXPECT_EQ(c[0].rewritten, "rewritten one");
  EXPECT_EQ(c[1].history.size(), 2u);
  EXPECT_FALSE(c[1].rewritten.has_value());
  EXPECT_TRUE(c[2].history.empty());
  std::istringstream bad("one column\n");
  EXPECT_THROW(load(bad, CorpusFormat::TSV), CorpusError);
  EXPECT_EQ(format_for_path("x/train.tsv"), CorpusFormat::TSV);
  EXPECT_EQ(format_for_path("x/train.jsonl"), CorpusFormat::JSONL);
}

TEST(Load, SaveLoadIdentity) {
  Gen g(3);
  auto c = random_corpus(g, 50);
  c[3].rewritten.reset();
  c[4].history.clear();
  std::ostringstream out;
  save(out, c);
  EXPECT_EQ(from_jsonl(out.str()), c);
  std::ostringstream again;
  save(again, from_jsonl(out.str()));
  EXPECT_EQ(again.str(), out.str());
}

TEST(Load, FromFile) {
  const auto dir = scratch("corpus_file");
  write_file(dir / "c.jsonl", std::string(kWorkedLine) + "\n");
  write_file(dir / "c.tsv", "a\tb\tc\n");
  EXPECT_EQ(load((dir / "c.jsonl").string()).size(), 1u);
  EXPECT_EQ(load((dir / "c.tsv").string())[0].incomplete, "b");
}

TEST(Stats, WorkedExample) {
  const auto st = stats(worked());
  EXPECT_EQ(st.n_samples, 1u);
  EXPECT_EQ(st.n_insertion, 1u);
  EXPECT_EQ(st.n_replacement, 1u);
  EXPECT_DOUBLE_EQ(st.avg_cont_len, 16.0);
  EXPECT_DOUBLE_EQ(st.avg_curr_len, 6.0);
  EXPECT_DOUBLE_EQ(st.avg_rewr_len, 9.0);
}

TEST(Stats, NoEditCorpusAndMissingRewrite) {
  auto c = from_jsonl("{\"incomplete\":\"a b\",\"rewritten\":\"a b\"}\n{\"incomplete\":\"c\",\"rewritten\":\"c\"}\n");
  const auto st = stats(c);
  EXPECT_EQ(st.n_insertion, 0u);
  EXPECT_EQ(st.n_replacement, 0u);
  c[0].rewritten.reset();
  EXPECT_THROW(stats(c), CorpusError);
}

TEST(Prompt, Layout) {
  EXPECT_EQ(build_prompt({"h one", "h  two"}, "inc", std::nullopt, default_markers()),
            "[CLS] h one [SEP] h two [SEP] inc [SEP]");
  EXPECT_EQ(build_prompt({}, "inc", std::nullopt, default_markers()), "[CLS] [SEP] inc [SEP]");
  EXPECT_EQ(build_prompt({"h"}, "inc", std::string("[I] x"), default_markers()), "[CLS] h [SEP] inc [SEP] [I] x [SEP]");
  EXPECT_EQ(build_prompt({"h"}, "inc", std::string(""), default_markers()), "[CLS] h [SEP] inc [SEP] [SEP]");
}

TEST(Stage1, WorkedExample) {
  const auto ex = build_stage1(worked());
  ASSERT_EQ(ex.size(), 1u);
  EXPECT_EQ(ex[0].input,
            "[CLS] I think Batman is very handsome. [SEP] The poster looks a bit like Ben Affleck. [SEP] "
            "It is he who acted. [SEP]");
  EXPECT_EQ(ex[0].target, "[D] he [R] Ben Affleck [I] as Batman");
  TextOptions grouped;
  grouped.layout = Layout::GROUPED;
  EXPECT_EQ(build_stage1(worked(), grouped)[0].target, "[I] as Batman [D] he [R] Ben Affleck");
}

TEST(Stage1, NoEditTargetIsEmpty) {
  const auto ex = build_stage1(from_jsonl("{\"history\":[\"h\"],\"incomplete\":\"a b\",\"rewritten\":\"a b\"}\n"));
  EXPECT_EQ(ex[0].target, "");
}

TEST(Stage1, MissingRewriteIsAnError) {
  EXPECT_THROW(build_stage1(from_jsonl("{\"incomplete\":\"a\"}\n")), CorpusError);
}

TEST(Stage1, TargetsReachRewriteForSomeInsertionPlacement) {
  Gen g(11);
  int checked = 0;
  for (int k = 0; k < 400; ++k) {
    // Distinct incomplete tokens keep leftmost matching unambiguous.
    Words inc;
    for (std::size_t i = g.between(1, 5); i > 0; --i) inc.push_back("t" + std::to_string(inc.size()));
    Words out;
    for (std::size_t i = 0; i <= inc.size(); ++i) {
      if (g.coin(0.25)) out.push_back("n" + std::to_string(g.below(3)));
      if (i == inc.size()) break;
      if (g.coin(0.15)) {
        out.push_back("r" + std::to_string(g.below(3)));
        continue;
      }
      out.push_back(inc[i]);
    }
    DialogueSample s;
    s.id = "x";
    s.history = {"h"};
    s.incomplete = detokenize(seq(inc));
    s.rewritten = detokenize(seq(out));
    const auto target = *build_stage1({s})[0].target;
    const auto [rep, ins] = split_rfis(parse(target).script);
    if (ins.size() > 3) continue;
    const auto base = apply(tokenize(s.incomplete), rep, ApplyStrategy::MATCHED).tokens.surfaces();
    std::vector<Words> spans;
    for (const auto& op : ins.ops) spans.push_back(op.inserted.surfaces());
    ASSERT_TRUE(reachable(base, spans, 0, out)) << s.incomplete << " -> " << *s.rewritten;
    ++checked;
  }
  EXPECT_GT(checked, 300);
}

TEST(Stage2, ZeroProbabilityCarriesGoldOps) {
  PerturbConfig cfg;
  cfg.prob_p = 0.0;
  const auto ex = build_stage2(worked(), cfg);
  EXPECT_EQ(ex[0].input,
            "[CLS] I think Batman is very handsome. [SEP] The poster looks a bit like Ben Affleck. [SEP] "
            "It is he who acted. [SEP] [D] he [R] Ben Affleck [I] as Batman [SEP]");
  EXPECT_EQ(ex[0].target, "It is Ben Affleck who acted as Batman.");
  EXPECT_FALSE(ex[0].perturbed);
  EXPECT_EQ(ex[0].variant, "stage2_gold");
}

TEST(Stage2, ZeroProbabilityMatchesGoldPredictions) {
  Gen g(21);
  const auto c = random_corpus(g, 60);
  PerturbConfig cfg;
  cfg.prob_p = 0.0;
  std::map<std::string, std::string> gold;
  for (const auto& e : build_stage1(c)) gold[e.id] = *e.target;
  const auto a = build_stage2(c, cfg);
  const auto b = build_stage2_from_predictions(c, gold);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(a[i].input, b[i].input);
}

TEST(Stage2, NoOpsVariantLeavesSlotEmpty) {
  const auto ex = build_stage2(worked(), PerturbConfig{}, false);
  EXPECT_TRUE(ex[0].input.ends_with("It is he who acted. [SEP] [SEP]"));
  EXPECT_EQ(ex[0].variant, "stage2_no_ops");
}

TEST(Stage2, PerturbationFlaggedAndDeterministic) {
  Gen g(5);
  const auto c = random_corpus(g, 200);
  PerturbConfig cfg;
  cfg.seed = 99;
  const auto a = build_stage2(c, cfg);
  const auto b = build_stage2(c, cfg);
  EXPECT_EQ(a, b);
  const auto fired = std::count_if(a.begin(), a.end(), [](const PreparedExample& e) { return e.perturbed; });
  EXPECT_GT(fired, 100);
  cfg.seed = 100;
  EXPECT_NE(build_stage2(c, cfg), a);
}

TEST(Stage2, PerSampleStreamsIgnoreCorpusOrder) {
  Gen g(6);
  auto c = random_corpus(g, 30);
  const auto a = build_stage2(c, PerturbConfig{});
  std::reverse(c.begin(), c.end());
  auto b = build_stage2(c, PerturbConfig{});
  std::reverse(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(Stage2, FromPredictionsVerbatim) {
  const auto c = worked();
  const auto ex = build_stage2_from_predictions(c, {{"1", "garbage [R]   [I]"}});
  EXPECT_TRUE(ex[0].input.ends_with("[SEP] garbage [R]   [I] [SEP]"));
  EXPECT_FALSE(ex[0].target.has_value());
  const auto empty = build_stage2_from_predictions(c, {{"1", ""}});
  EXPECT_TRUE(empty[0].input.ends_with("acted. [SEP] [SEP]"));
  EXPECT_THROW(build_stage2_from_predictions(c, {{"2", "x"}}), CorpusError);
}

TEST(Prepared, JsonShape) {
  std::ostringstream out;
  save(out, build_stage1(worked()));
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j["id"], "1");
  EXPECT_EQ(j["target"], "[D] he [R] Ben Affleck [I] as Batman");
  EXPECT_EQ(j["meta"]["perturbed"], false);
  EXPECT_EQ(j["meta"]["variant"], "stage1");
  std::ostringstream inf;
  save(inf, build_stage2_from_predictions(worked(), {{"1", ""}}));
  EXPECT_TRUE(nlohmann::json::parse(inf.str())["target"].is_null());
}
