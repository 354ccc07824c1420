#pragma once

// Confusion matrices, Cohen's kappa (plain and quadratic-weighted), macro
// precision/recall/F, fold aggregation and a paired sign-flip permutation test.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "argmine/corpus.hpp"
#include "argmine/error.hpp"
#include "argmine/rng.hpp"

namespace argmine {

/// K x K counts, rows = gold, columns = predicted.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t k = 3) : k_(k), counts_(k * k, 0) {
    if (k < 2) throw ValidationError("confusion matrix needs at least 2 classes");
  }

  ConfusionMatrix(std::size_t k, std::vector<std::uint64_t> counts) : k_(k), counts_(std::move(counts)) {
    if (k < 2 || counts_.size() != k * k) throw ValidationError("confusion matrix: expected k*k counts");
  }

  std::size_t classes() const noexcept { return k_; }

  void add(std::size_t gold, std::size_t pred, std::uint64_t n = 1) {
    if (gold >= k_ || pred >= k_) throw ValidationError("confusion matrix: class index out of range");
    counts_[gold * k_ + pred] += n;
  }

  std::uint64_t operator()(std::size_t gold, std::size_t pred) const noexcept { return counts_[gold * k_ + pred]; }

  std::uint64_t total() const noexcept {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }

  std::uint64_t row_sum(std::size_t i) const noexcept {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < k_; ++j) s += (*this)(i, j);
    return s;
  }

  std::uint64_t col_sum(std::size_t j) const noexcept {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < k_; ++i) s += (*this)(i, j);
    return s;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.k_ != k_) throw ValidationError("confusion matrix: class count mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    return *this;
  }

  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

enum class Weighting { None, Quadratic };

struct KappaResult {
  double value = 0.0;
  bool degenerate = false;  // expected disagreement was zero
};

/// kappa = 1 - sum(w * o) / sum(w * e), e from the marginal products.
/// Both sums are kept as integers scaled by N and (K-1)^2, so the result is a
/// single rounded division (exact counts give e.g. 0.4, not 0.39999999999999991).
inline KappaResult kappa_with_flag(const ConfusionMatrix& cm, Weighting weighting) {
  __extension__ using wide = unsigned __int128;
  const std::uint64_t n = cm.total();
  if (n == 0) throw ValidationError("cohen_kappa: empty confusion matrix");
  const std::size_t K = cm.classes();
  wide observed = 0, expected = 0;
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = 0; j < K; ++j) {
      if (i == j) continue;
      const std::uint64_t d = i > j ? i - j : j - i;
      const std::uint64_t w = weighting == Weighting::Quadratic ? d * d : 1;
      observed += wide(w) * cm(i, j) * n;
      expected += wide(w) * cm.row_sum(i) * cm.col_sum(j);
    }
  }
  if (expected == 0) return {0.0, true};
  const double e = static_cast<double>(expected);
  if (observed <= expected) return {static_cast<double>(expected - observed) / e, false};
  return {-static_cast<double>(observed - expected) / e, false};
}

inline double cohen_kappa(const ConfusionMatrix& cm, Weighting weighting = Weighting::None) {
  return kappa_with_flag(cm, weighting).value;
}

struct ClassScores {
  std::vector<double> precision, recall, f;
  std::vector<std::uint64_t> support;  // gold count per class
  double macro_precision = 0.0, macro_recall = 0.0, macro_f = 0.0;
};

/// Per-class P/R/F with 0 for any 0/0, and their unweighted means.
inline ClassScores prf(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ValidationError("prf: empty confusion matrix");
  const std::size_t K = cm.classes();
  ClassScores s;
  for (std::size_t c = 0; c < K; ++c) {
    const double tp = static_cast<double>(cm(c, c));
    const double col = static_cast<double>(cm.col_sum(c));
    const double row = static_cast<double>(cm.row_sum(c));
    const double p = col > 0.0 ? tp / col : 0.0;
    const double r = row > 0.0 ? tp / row : 0.0;
    s.precision.push_back(p);
    s.recall.push_back(r);
    s.f.push_back(p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0);
    s.support.push_back(cm.row_sum(c));
  }
  const double k = static_cast<double>(K);
  for (std::size_t c = 0; c < K; ++c) {
    s.macro_precision += s.precision[c] / k;
    s.macro_recall += s.recall[c] / k;
    s.macro_f += s.f[c] / k;
  }
  return s;
}

/// One row of the results table. Per-class arrays are indexed by ArgComponent.
struct EvaluationReport {
  double kappa = 0.0;
  bool kappa_degenerate = false;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f = 0.0;
  std::array<double, 3> per_class_f{};
  std::array<std::uint64_t, 3> support{};
  std::uint64_t n = 0;
  std::optional<double> spec_kappa;  // quadratic-weighted, multi-task runs only

  double f_claim() const noexcept { return per_class_f[index_of(ArgComponent::Claim)]; }
  double f_evidence() const noexcept { return per_class_f[index_of(ArgComponent::Evidence)]; }
  double f_warrant() const noexcept { return per_class_f[index_of(ArgComponent::Warrant)]; }

  bool operator==(const EvaluationReport&) const = default;
};

inline EvaluationReport evaluate(const ConfusionMatrix& arg, const ConfusionMatrix* spec = nullptr) {
  if (arg.classes() != 3) throw ValidationError("evaluate: argument matrix must be 3x3");
  EvaluationReport r;
  const auto k = kappa_with_flag(arg, Weighting::None);
  r.kappa = k.value;
  r.kappa_degenerate = k.degenerate;
  const auto s = prf(arg);
  r.macro_precision = s.macro_precision;
  r.macro_recall = s.macro_recall;
  r.macro_f = s.macro_f;
  for (std::size_t c = 0; c < 3; ++c) {
    r.per_class_f[c] = s.f[c];
    r.support[c] = s.support[c];
  }
  r.n = arg.total();
  if (spec && spec->total() > 0) r.spec_kappa = cohen_kappa(*spec, Weighting::Quadratic);
  return r;
}

/// Field-wise mean over folds (support and n are summed).
inline EvaluationReport fold_mean(std::span<const EvaluationReport> folds) {
  EvaluationReport m;
  if (folds.empty()) return m;
  const double n = static_cast<double>(folds.size());
  double spec_sum = 0.0;
  std::size_t spec_n = 0;
  for (const auto& f : folds) {
    m.kappa += f.kappa / n;
    m.kappa_degenerate = m.kappa_degenerate || f.kappa_degenerate;
    m.macro_precision += f.macro_precision / n;
    m.macro_recall += f.macro_recall / n;
    m.macro_f += f.macro_f / n;
    for (std::size_t c = 0; c < 3; ++c) {
      m.per_class_f[c] += f.per_class_f[c] / n;
      m.support[c] += f.support[c];
    }
    m.n += f.n;
    if (f.spec_kappa) {
      spec_sum += *f.spec_kappa;
      ++spec_n;
    }
  }
  if (spec_n > 0) m.spec_kappa = spec_sum / static_cast<double>(spec_n);
  return m;
}

inline nlohmann::ordered_json to_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["kappa"] = r.kappa;
  j["kappa_degenerate"] = r.kappa_degenerate;
  j["precision"] = r.macro_precision;
  j["recall"] = r.macro_recall;
  j["f_score"] = r.macro_f;
  j["f_e"] = r.f_evidence();
  j["f_w"] = r.f_warrant();
  j["f_c"] = r.f_claim();
  j["support"] = {{"claim", r.support[0]}, {"evidence", r.support[1]}, {"warrant", r.support[2]}};
  j["n"] = r.n;
  if (r.spec_kappa) j["spec_quadratic_kappa"] = *r.spec_kappa;
  return j;
}

inline nlohmann::ordered_json to_json(const ConfusionMatrix& cm) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (std::size_t j = 0; j < cm.classes(); ++j) row.push_back(cm(i, j));
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// significance

/// Two-sided paired sign-flip permutation test on the mean difference of
/// aligned scores (per-move correctness, or per-fold metrics).
/// p = (1 + #{|permuted| >= |observed|}) / (1 + iterations).
inline double permutation_test(std::span<const double> a, std::span<const double> b, std::size_t iterations = 10000,
                               std::uint64_t seed = 0) {
  if (a.size() != b.size()) throw ValidationError("permutation_test: score vectors differ in length");
  if (iterations == 0) throw ValidationError("permutation_test: needs at least one iteration");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  double observed = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = a[i] - b[i];
    observed += d[i];
    scale += std::abs(d[i]);
  }
  // Differences of 0/1 indicators sum exactly; the slack only matters for real-valued scores.
  const double threshold = std::abs(observed) - 1e-9 * std::max(1.0, scale);
  Rng rng(seed);
  std::size_t hits = 0;
  for (std::size_t it = 0; it < iterations; ++it) {
    double s = 0.0;
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 64 == 0) bits = rng.next();
      s += (bits & 1) ? d[i] : -d[i];
      bits >>= 1;
    }
    if (std::abs(s) >= threshold) ++hits;
  }
  return static_cast<double>(1 + hits) / static_cast<double>(1 + iterations);
}

inline double permutation_test(std::span<const int> a, std::span<const int> b, std::size_t iterations = 10000,
                               std::uint64_t seed = 0) {
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  return permutation_test(std::span<const double>(x), std::span<const double>(y), iterations, seed);
}

/// Table marks: "‡" p < 0.01, "†" p < 0.05, "⋆" p < 0.1, else "".
inline std::string significance_mark(double p) {
  if (p < 0.01) return "‡";
  if (p < 0.05) return "†";
  if (p < 0.1) return "⋆";
  return "";
}

}  // namespace argmine
