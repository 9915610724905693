#pragma once

// Adversarial noise for stage-2 training scripts: ops are resampled from the
// dialogue history, dropped, or joined by one spurious op, so the rewriter
// learns not to trust its edit-script input blindly.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>

#include "teo/editscript.hpp"
#include "teo/random.hpp"
#include "teo/text.hpp"

namespace teo {

struct PerturbConfig {
  double prob_p = 0.6;  // chance an op is touched; also the append chance
  double prob_r = 0.5;  // given a touch: resample (<= prob_r) vs drop
  std::size_t max_span_len = 5;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(prob_p >= 0.0 && prob_p <= 1.0)) throw std::invalid_argument("prob_p must lie in [0,1]");
    if (!(prob_r >= 0.0 && prob_r <= 1.0)) throw std::invalid_argument("prob_r must lie in [0,1]");
    if (max_span_len < 1) throw std::invalid_argument("max_span_len must be >= 1");
  }

  bool operator==(const PerturbConfig&) const = default;
};

/// Contiguous span: start uniform over the source, then length uniform in
/// 1..min(max_len, tokens remaining).
inline TokenSeq sample_span(const TokenSeq& source, RandomStream& rng, std::size_t max_len) {
  if (source.empty()) throw std::invalid_argument("sample_span: empty source");
  if (max_len == 0) throw std::invalid_argument("sample_span: max_len must be >= 1");
  const std::size_t start = rng.index(source.size());
  const std::size_t len = rng.between(1, std::min(max_len, source.size() - start));
  return source.slice(start, start + len);
}

struct PerturbOutcome {
  EditScript script;
  std::size_t resampled = 0;
  std::size_t dropped = 0;
  bool appended = false;

  bool fired() const { return resampled > 0 || dropped > 0 || appended; }
};

/// Perturbs a gold script. Draw order per op: prob_1, prob_2, then the span
/// draws if a resample fires; after all ops: prob_3, then origin span,
/// new span and the candidate choice if the append fires.
///
/// Resampling rewrites the op's inserted span for both kinds; a
/// replacement keeps its deleted span. When nothing fires the input script
/// is returned as is; otherwise output ops carry no anchors.
inline PerturbOutcome perturb(const EditScript& script, const TokenSeq& history,
                              const TokenSeq& incomplete, const PerturbConfig& cfg,
                              RandomStream& rng) {
  cfg.validate();
  PerturbOutcome out;
  auto history_span = [&]() {
    if (history.empty()) throw std::invalid_argument("perturb: empty dialogue history");
    return sample_span(history, rng, cfg.max_span_len);
  };

  for (const auto& op : script.ops) {
    const double prob_1 = rng.uniform01();
    const double prob_2 = rng.uniform01();
    EditOp kept = op;
    kept.anchor.reset();
    if (prob_1 <= cfg.prob_p) {
      if (prob_2 > cfg.prob_r) {
        ++out.dropped;
        continue;
      }
      kept.inserted = history_span();
      ++out.resampled;
    }
    out.script.ops.push_back(std::move(kept));
  }

  const double prob_3 = rng.uniform01();
  if (prob_3 <= cfg.prob_p) {
    if (incomplete.empty()) throw std::invalid_argument("perturb: empty incomplete utterance");
    TokenSeq origin = sample_span(incomplete, rng, cfg.max_span_len);
    TokenSeq fresh = history_span();
    if (rng.index(2) == 0)
      out.script.ops.push_back(EditOp::insertion(std::move(fresh)));
    else
      out.script.ops.push_back(EditOp::replacement(std::move(origin), std::move(fresh)));
    out.appended = true;
  }
  if (!out.fired()) out.script = script;
  return out;
}

}  // namespace teo
