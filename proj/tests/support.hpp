#pragma once

// Test-only generators and brute-force oracles. Nothing here calls into the
// library's counting or alignment code, so the oracles stay independent of
// the implementation they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "teo/text.hpp"

namespace teo::testkit {

using Words = std::vector<std::string>;

inline TokenSeq seq(const Words& words) {
  TokenSeq s;
  for (const auto& w : words) s.tokens.push_back({w, TokenKind::WORD});
  return s;
}

inline Words words_of(const TokenSeq& s) { return s.surfaces(); }

// ---- files ---------------------------------------------------------------

#ifdef TEO_TEST_TMP
/// Fresh per-test scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::path(TEO_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}
#endif

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- LCS by exhaustive subsequence enumeration --------------------------

template <typename T>
bool is_subsequence(const std::vector<T>& needle, const std::vector<T>& hay) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < hay.size() && j < needle.size(); ++i)
    if (hay[i] == needle[j]) ++j;
  return j == needle.size();
}

/// Longest subsequence of `a` (over all 2^|a| index subsets) that is also a
/// subsequence of `b`.
template <typename T>
std::size_t brute_lcs(const std::vector<T>& a, const std::vector<T>& b) {
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    const auto len = static_cast<std::size_t>(__builtin_popcount(mask));
    if (len <= best) continue;
    std::vector<T> sub;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) sub.push_back(a[i]);
    if (is_subsequence(sub, b)) best = len;
  }
  return best;
}

// ---- n-gram counting by direct window scans ------------------------------

inline std::vector<Words> windows(const Words& s, std::size_t n) {
  std::vector<Words> out;
  for (std::size_t i = 0; i + n <= s.size() && n > 0; ++i) out.emplace_back(s.begin() + i, s.begin() + i + n);
  return out;
}

inline std::size_t occurrences(const std::vector<Words>& ws, const Words& g) {
  return static_cast<std::size_t>(std::count(ws.begin(), ws.end(), g));
}

/// Σ over distinct grams of min(count in a, count in b).
inline std::size_t brute_clipped(const std::vector<Words>& a, const std::vector<Words>& b) {
  std::vector<Words> distinct;
  std::size_t total = 0;
  for (const auto& g : a) {
    if (std::find(distinct.begin(), distinct.end(), g) != distinct.end()) continue;
    distinct.push_back(g);
    total += std::min(occurrences(a, g), occurrences(b, g));
  }
  return total;
}

inline double brute_bleu(const std::vector<Words>& preds, const std::vector<Words>& refs, std::size_t max_order) {
  double log_sum = 0.0;
  std::size_t c = 0, r = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    c += preds[i].size();
    r += refs[i].size();
  }
  if (c == 0) return 0.0;
  for (std::size_t n = 1; n <= max_order; ++n) {
    std::size_t match = 0, total = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const auto pw = windows(preds[i], n);
      match += brute_clipped(pw, windows(refs[i], n));
      total += pw.size();
    }
    if (match == 0) return 0.0;
    log_sum += std::log(static_cast<double>(match) / static_cast<double>(total));
  }
  const double bp = c >= r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return bp * std::exp(log_sum / static_cast<double>(max_order));
}

struct Triple {
  double p, r, f;
};

inline double f_of(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

inline double div0(std::size_t a, std::size_t b) { return b == 0 ? 0.0 : double(a) / double(b); }

inline Triple brute_rouge_n(const std::vector<Words>& preds, const std::vector<Words>& refs, std::size_t n) {
  std::size_t match = 0, pt = 0, rt = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto pw = windows(preds[i], n), rw = windows(refs[i], n);
    match += brute_clipped(pw, rw);
    pt += pw.size();
    rt += rw.size();
  }
  const double p = div0(match, pt), r = div0(match, rt);
  return {p, r, f_of(p, r)};
}

inline Triple brute_rouge_l(const std::vector<Words>& preds, const std::vector<Words>& refs) {
  Triple sum{0, 0, 0};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].empty() && refs[i].empty()) {
      sum.p += 1;
      sum.r += 1;
      sum.f += 1;
      continue;
    }
    const auto l = brute_lcs(preds[i], refs[i]);
    const double p = div0(l, preds[i].size()), r = div0(l, refs[i].size());
    sum.p += p;
    sum.r += r;
    sum.f += f_of(p, r);
  }
  const double n = double(preds.size());
  return {sum.p / n, sum.r / n, sum.f / n};
}

inline std::vector<Words> restored_windows(const Words& inc, const Words& utt, std::size_t n) {
  std::vector<Words> out;
  for (const auto& w : windows(utt, n)) {
    const bool restored = std::any_of(w.begin(), w.end(), [&](const std::string& t) {
      return std::find(inc.begin(), inc.end(), t) == inc.end();
    });
    if (restored) out.push_back(w);
  }
  return out;
}

inline Triple brute_restoration(const std::vector<Words>& incs, const std::vector<Words>& preds,
                                const std::vector<Words>& refs, std::size_t n) {
  std::size_t match = 0, pt = 0, rt = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto pw = restored_windows(incs[i], preds[i], n);
    const auto rw = restored_windows(incs[i], refs[i], n);
    match += brute_clipped(pw, rw);
    pt += pw.size();
    rt += rw.size();
  }
  const double p = div0(match, pt), r = div0(match, rt);
  return {p, r, f_of(p, r)};
}

// ---- generators -----------------------------------------------------------

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  std::size_t between(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }

  Words words(std::size_t lo, std::size_t hi, std::size_t vocab) {
    Words out(between(lo, hi));
    for (auto& w : out) w = "w" + std::to_string(below(vocab));
    return out;
  }

  /// (incomplete, rewritten): random insertions, replacements and deletions
  /// applied to a random utterance.
  std::pair<Words, Words> edit_pair(std::size_t max_len, std::size_t vocab) {
    Words inc = words(1, max_len, vocab);
    Words out;
    for (std::size_t i = 0; i <= inc.size(); ++i) {
      if (coin(0.2)) {
        auto extra = words(1, 3, vocab * 2);
        out.insert(out.end(), extra.begin(), extra.end());
      }
      if (i == inc.size()) break;
      const double roll = std::uniform_real_distribution<double>(0, 1)(rng_);
      if (roll < 0.1) continue;  // delete
      if (roll < 0.2) {
        auto rep = words(1, 3, vocab * 2);
        out.insert(out.end(), rep.begin(), rep.end());
        continue;
      }
      out.push_back(inc[i]);
    }
    return {inc, out};
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace teo::testkit
