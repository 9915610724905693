#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace teo {

using Alignment = std::vector<std::pair<std::size_t, std::size_t>>;

namespace detail {

// table[i][j] = LCS length of a[0..i) and b[0..j), row-major, (n+1)x(m+1).
template <typename SeqA, typename SeqB, typename Eq>
std::vector<std::size_t> lcs_table(const SeqA& a, const SeqB& b, Eq eq) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> table((n + 1) * (m + 1), 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      auto& cell = table[i * (m + 1) + j];
      if (eq(a[i - 1], b[j - 1]))
        cell = table[(i - 1) * (m + 1) + j - 1] + 1;
      else
        cell = std::max(table[(i - 1) * (m + 1) + j], table[i * (m + 1) + j - 1]);
    }
  }
  return table;
}

}  // namespace detail

/// Maximum-length common subsequence as (index in a, index in b) pairs,
/// strictly increasing in both coordinates.
///
/// Ties are broken by the backtrace from (|a|, |b|): a match is taken
/// diagonally whenever the tokens are equal; otherwise the move drops a token
/// of `a` ("up") when that keeps the optimum, else a token of `b` ("left").
template <typename SeqA, typename SeqB, typename Eq = std::equal_to<>>
Alignment lcs_align(const SeqA& a, const SeqB& b, Eq eq = {}) {
  const std::size_t m = b.size();
  const auto table = detail::lcs_table(a, b, eq);
  Alignment out;
  std::size_t i = a.size(), j = m;
  while (i > 0 && j > 0) {
    if (eq(a[i - 1], b[j - 1])) {
      out.emplace_back(i - 1, j - 1);
      --i;
      --j;
    } else if (table[(i - 1) * (m + 1) + j] >= table[i * (m + 1) + j - 1]) {
      --i;
    } else {
      --j;
    }
  }
  return {out.rbegin(), out.rend()};
}

template <typename SeqA, typename SeqB, typename Eq = std::equal_to<>>
std::size_t lcs_length(const SeqA& a, const SeqB& b, Eq eq = {}) {
  if (a.size() == 0 || b.size() == 0) return 0;
  return detail::lcs_table(a, b, eq).back();
}

}  // namespace teo
