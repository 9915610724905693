#pragma once

// Evaluation metrics for rewritten utterances.
//
// All corpus scores are micro-averaged (counts summed over samples before
// dividing) except ROUGE-L, which averages per-sample scores. Inputs are
// token sequences; callers tokenize with the same mode for every side.

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "teo/editscript.hpp"
#include "teo/lcs.hpp"
#include "teo/text.hpp"

namespace teo {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using NGram = std::vector<std::string>;

struct NGramCounts {
  std::size_t order = 1;
  std::map<NGram, std::size_t> counts;

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& [_, c] : counts) t += c;
    return t;
  }
};

/// Counts the order-n windows of `seq` for which keep(begin index) holds.
template <typename Keep>
NGramCounts ngram_counts_if(const TokenSeq& seq, std::size_t n, Keep keep) {
  NGramCounts out;
  out.order = n;
  if (n == 0 || seq.size() < n) return out;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    if (!keep(i)) continue;
    NGram g;
    g.reserve(n);
    for (std::size_t k = 0; k < n; ++k) g.push_back(seq[i + k].surface);
    ++out.counts[std::move(g)];
  }
  return out;
}

inline NGramCounts ngram_counts(const TokenSeq& seq, std::size_t n) {
  return ngram_counts_if(seq, n, [](std::size_t) { return true; });
}

/// Σ_g min(a[g], b[g]).
inline std::size_t clipped_overlap(const NGramCounts& a, const NGramCounts& b) {
  std::size_t matched = 0;
  for (const auto& [g, c] : a.counts)
    if (auto it = b.counts.find(g); it != b.counts.end()) matched += std::min(c, it->second);
  return matched;
}

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

inline double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

namespace detail {

inline void require_corpus(std::size_t preds, std::size_t refs) {
  if (preds != refs)
    throw MetricError("predictions and references differ in length (" + std::to_string(preds) +
                      " vs " + std::to_string(refs) + ")");
  if (preds == 0) throw MetricError("empty corpus");
}

}  // namespace detail

inline double exact_match(const std::vector<TokenSeq>& predictions,
                          const std::vector<TokenSeq>& references) {
  detail::require_corpus(predictions.size(), references.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == references[i];
  return ratio(hits, predictions.size());
}

/// Corpus BLEU with uniform weights over orders 1..max_order and the
/// corpus-level brevity penalty exp(min(0, 1 - ref_len / pred_len)).
inline double bleu(const std::vector<TokenSeq>& predictions, const std::vector<TokenSeq>& references,
                   std::size_t max_order) {
  detail::require_corpus(predictions.size(), references.size());
  if (max_order == 0) throw MetricError("bleu: max_order must be >= 1");

  std::vector<std::size_t> matched(max_order, 0), total(max_order, 0);
  std::size_t pred_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    pred_len += predictions[i].size();
    ref_len += references[i].size();
    for (std::size_t n = 1; n <= max_order; ++n) {
      const auto p = ngram_counts(predictions[i], n);
      matched[n - 1] += clipped_overlap(p, ngram_counts(references[i], n));
      total[n - 1] += p.total();
    }
  }
  if (pred_len == 0) return 0.0;

  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_order; ++n) {
    if (matched[n] == 0) return 0.0;
    log_sum += std::log(ratio(matched[n], total[n]));
  }
  const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(pred_len)));
  return bp * std::exp(log_sum / static_cast<double>(max_order));
}

inline PRF rouge_n(const std::vector<TokenSeq>& predictions, const std::vector<TokenSeq>& references,
                   std::size_t n) {
  detail::require_corpus(predictions.size(), references.size());
  if (n == 0) throw MetricError("rouge_n: n must be >= 1");
  std::size_t matched = 0, pred_total = 0, ref_total = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto p = ngram_counts(predictions[i], n);
    const auto r = ngram_counts(references[i], n);
    matched += clipped_overlap(p, r);
    pred_total += p.total();
    ref_total += r.total();
  }
  PRF out{ratio(matched, pred_total), ratio(matched, ref_total), 0.0};
  out.f1 = harmonic(out.precision, out.recall);
  return out;
}

/// Mean of per-sample LCS precision, recall and F1. Two empty sequences
/// score 1; an empty sequence against a non-empty one scores 0.
inline PRF rouge_l(const std::vector<TokenSeq>& predictions, const std::vector<TokenSeq>& references) {
  detail::require_corpus(predictions.size(), references.size());
  PRF sum;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    const auto& r = references[i];
    if (p.empty() && r.empty()) {
      sum.precision += 1.0;
      sum.recall += 1.0;
      sum.f1 += 1.0;
      continue;
    }
    const std::size_t lcs = lcs_length(p.tokens, r.tokens, [](const Token& a, const Token& b) {
      return a.surface == b.surface;
    });
    const double prec = ratio(lcs, p.size());
    const double rec = ratio(lcs, r.size());
    sum.precision += prec;
    sum.recall += rec;
    sum.f1 += harmonic(prec, rec);
  }
  const auto n = static_cast<double>(predictions.size());
  return {sum.precision / n, sum.recall / n, sum.f1 / n};
}

/// Token types present in `utterance` but absent from `incomplete`.
inline std::set<std::string> restored_words(const TokenSeq& incomplete, const TokenSeq& utterance) {
  std::set<std::string> seen;
  for (const auto& t : incomplete) seen.insert(t.surface);
  std::set<std::string> out;
  for (const auto& t : utterance)
    if (!seen.count(t.surface)) out.insert(t.surface);
  return out;
}

/// Order-n windows of `utterance` containing at least one restored word.
inline NGramCounts restored_ngrams(const TokenSeq& incomplete, const TokenSeq& utterance,
                                   std::size_t n) {
  const auto restored = restored_words(incomplete, utterance);
  return ngram_counts_if(utterance, n, [&](std::size_t i) {
    for (std::size_t k = 0; k < n; ++k)
      if (restored.count(utterance[i + k].surface)) return true;
    return false;
  });
}

struct RestorationScore {
  double p = 0.0;
  double r = 0.0;
  double f = 0.0;
  bool zero_denominator = false;  // a corpus-level count was 0; the ratio is reported as 0
};

inline RestorationScore restoration_fscore(const std::vector<TokenSeq>& incompletes,
                                           const std::vector<TokenSeq>& predictions,
                                           const std::vector<TokenSeq>& references, std::size_t n) {
  detail::require_corpus(predictions.size(), references.size());
  detail::require_corpus(incompletes.size(), references.size());
  if (n == 0) throw MetricError("restoration_fscore: n must be >= 1");
  std::size_t matched = 0, pred_total = 0, ref_total = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto p = restored_ngrams(incompletes[i], predictions[i], n);
    const auto r = restored_ngrams(incompletes[i], references[i], n);
    matched += clipped_overlap(p, r);
    pred_total += p.total();
    ref_total += r.total();
  }
  RestorationScore out;
  out.p = ratio(matched, pred_total);
  out.r = ratio(matched, ref_total);
  out.f = harmonic(out.p, out.r);
  out.zero_denominator = pred_total == 0 || ref_total == 0;
  return out;
}

struct StageOutcome {
  bool stage1_correct = false;
  bool stage2_correct = false;
};

struct TransitionRates {
  std::optional<double> e2c;  // stage-1 wrong, fixed by stage 2
  std::optional<double> c2e;  // stage-1 right, broken by stage 2
};

inline TransitionRates e2c_c2e(const std::vector<StageOutcome>& outcomes) {
  if (outcomes.empty()) throw MetricError("e2c_c2e: empty outcome list");
  std::size_t err = 0, err_cor = 0, cor = 0, cor_err = 0;
  for (const auto& o : outcomes) {
    if (o.stage1_correct) {
      ++cor;
      cor_err += !o.stage2_correct;
    } else {
      ++err;
      err_cor += o.stage2_correct;
    }
  }
  TransitionRates out;
  if (err > 0) out.e2c = ratio(err_cor, err);
  if (cor > 0) out.c2e = ratio(cor_err, cor);
  return out;
}

/// Right/wrong counts of stage 1 crossed with stage 2.
struct StageMatrix {
  std::size_t right_right = 0;
  std::size_t right_wrong = 0;
  std::size_t wrong_right = 0;
  std::size_t wrong_wrong = 0;

  static StageMatrix from(const std::vector<StageOutcome>& outcomes) {
    StageMatrix m;
    for (const auto& o : outcomes) {
      if (o.stage1_correct)
        ++(o.stage2_correct ? m.right_right : m.right_wrong);
      else
        ++(o.stage2_correct ? m.wrong_right : m.wrong_wrong);
    }
    return m;
  }

  std::size_t total() const { return right_right + right_wrong + wrong_right + wrong_wrong; }
};

struct ErrorBreakdown {
  std::size_t wrong_samples = 0;
  std::size_t insertion_error_count = 0;
  std::size_t replacement_error_count = 0;
  std::size_t no_edit_samples = 0;
  std::optional<double> no_edit_em;

  std::optional<double> insertion_share() const {
    const auto total = insertion_error_count + replacement_error_count;
    if (total == 0) return std::nullopt;
    return ratio(insertion_error_count, total);
  }
};

namespace detail {

using SpanKey = std::vector<std::string>;

inline std::multiset<SpanKey> insertion_multiset(const EditScript& s) {
  std::multiset<SpanKey> out;
  for (const auto& op : s.ops)
    if (op.kind == OpKind::INSERTION) out.insert(op.inserted.surfaces());
  return out;
}

inline std::multiset<std::pair<SpanKey, SpanKey>> replacement_multiset(const EditScript& s) {
  std::multiset<std::pair<SpanKey, SpanKey>> out;
  for (const auto& op : s.ops)
    if (op.kind == OpKind::REPLACEMENT) out.emplace(op.deleted.surfaces(), op.inserted.surfaces());
  return out;
}

}  // namespace detail

/// Charges each wrong prediction with an insertion error and/or a
/// replacement error by comparing the op multisets extracted against the
/// incomplete utterance for the prediction and for the reference.
inline ErrorBreakdown error_breakdown(const std::vector<TokenSeq>& incompletes,
                                      const std::vector<TokenSeq>& predictions,
                                      const std::vector<TokenSeq>& references,
                                      const Markers& m = default_markers()) {
  detail::require_corpus(predictions.size(), references.size());
  detail::require_corpus(incompletes.size(), references.size());
  ErrorBreakdown out;
  std::size_t no_edit_hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool correct = predictions[i] == references[i];
    if (references[i] == incompletes[i]) {
      ++out.no_edit_samples;
      no_edit_hits += correct;
    }
    if (correct) continue;
    ++out.wrong_samples;
    const auto gold = extract(incompletes[i], references[i], m);
    const auto pred = extract(incompletes[i], predictions[i], m);
    if (detail::insertion_multiset(gold) != detail::insertion_multiset(pred))
      ++out.insertion_error_count;
    if (detail::replacement_multiset(gold) != detail::replacement_multiset(pred))
      ++out.replacement_error_count;
  }
  if (out.no_edit_samples > 0) out.no_edit_em = ratio(no_edit_hits, out.no_edit_samples);
  return out;
}

struct MetricOrders {
  std::size_t bleu = 4;
  std::size_t rouge = 4;
  std::size_t restoration = 4;

  bool operator==(const MetricOrders&) const = default;
};

struct EvalReport {
  std::size_t n_samples = 0;
  double em = 0.0;
  std::map<std::size_t, double> bleu;  // keyed by max order
  std::map<std::size_t, PRF> rouge;
  PRF rouge_l;
  std::map<std::size_t, RestorationScore> restoration;
  std::optional<double> e2c;
  std::optional<double> c2e;
  std::optional<StageMatrix> stage_matrix;
  ErrorBreakdown error_breakdown;
  std::vector<std::string> warnings;
};

/// Everything that needs only the incomplete utterances, predictions and
/// references; the stage-transition fields are filled by the engine.
inline EvalReport evaluate(const std::vector<TokenSeq>& incompletes,
                           const std::vector<TokenSeq>& predictions,
                           const std::vector<TokenSeq>& references, const MetricOrders& orders = {},
                           const Markers& m = default_markers()) {
  EvalReport r;
  r.n_samples = predictions.size();
  r.em = exact_match(predictions, references);
  for (std::size_t n = 1; n <= orders.bleu; ++n) r.bleu[n] = bleu(predictions, references, n);
  for (std::size_t n = 1; n <= orders.rouge; ++n) r.rouge[n] = rouge_n(predictions, references, n);
  r.rouge_l = rouge_l(predictions, references);
  for (std::size_t n = 1; n <= orders.restoration; ++n) {
    r.restoration[n] = restoration_fscore(incompletes, predictions, references, n);
    if (r.restoration[n].zero_denominator)
      r.warnings.push_back("f_" + std::to_string(n) +
                           ": no restored n-grams on one side; zero reported");
  }
  r.error_breakdown = error_breakdown(incompletes, predictions, references, m);
  return r;
}

}  // namespace teo
