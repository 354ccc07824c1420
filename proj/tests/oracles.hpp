#pragma once

// Brute-force metric references, deliberately naive: they work on the expanded
// list of (gold, predicted) pairs rather than on confusion-matrix marginals.

#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "argmine/eval.hpp"

namespace oracle {

using argmine::ConfusionMatrix;

using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;

inline Pairs expand(const ConfusionMatrix& cm) {
  Pairs out;
  for (std::size_t i = 0; i < cm.classes(); ++i)
    for (std::size_t j = 0; j < cm.classes(); ++j)
      for (std::uint64_t n = 0; n < cm(i, j); ++n) out.emplace_back(i, j);
  return out;
}

// Unweighted kappa from agreement rates: (p_o - p_e) / (1 - p_e).
inline double oracle_kappa(const Pairs& pairs, std::size_t K) {
  const double N = static_cast<double>(pairs.size());
  double po = 0.0;
  std::vector<double> g(K, 0.0), p(K, 0.0);
  std::vector<std::size_t> gn(K, 0), pn(K, 0);
  for (auto [a, b] : pairs) {
    po += a == b ? 1.0 / N : 0.0;
    g[a] += 1.0 / N;
    p[b] += 1.0 / N;
    ++gn[a];
    ++pn[b];
  }
  // Chance agreement of exactly 1 (both raters constant on one class) is
  // decided on counts; the rounded rates can miss it.
  std::size_t agree = 0;
  for (std::size_t k = 0; k < K; ++k) agree += gn[k] * pn[k];
  if (agree == pairs.size() * pairs.size()) return 0.0;
  double pe = 0.0;
  for (std::size_t k = 0; k < K; ++k) pe += g[k] * p[k];
  return (po - pe) / (1.0 - pe);
}

// Weighted kappa by brute force: observed disagreement over matched pairs versus
// disagreement over every (gold_i, pred_j) cross pair.
inline double oracle_weighted_kappa(const Pairs& pairs, std::size_t K) {
  auto w = [K](std::size_t i, std::size_t j) {
    const double d = (static_cast<double>(i) - static_cast<double>(j)) / static_cast<double>(K - 1);
    return d * d;
  };
  const double N = static_cast<double>(pairs.size());
  double obs = 0.0, exp = 0.0;
  for (auto [a, b] : pairs) obs += w(a, b);
  for (auto [a, _] : pairs)
    for (auto [__, b] : pairs) exp += w(a, b);
  obs /= N;
  exp /= N * N;
  if (exp == 0.0) return 0.0;
  return 1.0 - obs / exp;
}

struct OracleScores {
  std::vector<double> p, r, f;
  double macro_f = 0.0;
};

inline OracleScores oracle_prf(const Pairs& pairs, std::size_t K) {
  OracleScores s;
  for (std::size_t c = 0; c < K; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (auto [a, b] : pairs) {
      if (a == c && b == c) ++tp;
      else if (b == c) ++fp;
      else if (a == c) ++fn;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    s.p.push_back(p);
    s.r.push_back(r);
    s.f.push_back(p + r > 0 ? 2 * p * r / (p + r) : 0.0);
  }
  s.macro_f = std::accumulate(s.f.begin(), s.f.end(), 0.0) / static_cast<double>(K);
  return s;
}

}  // namespace oracle
