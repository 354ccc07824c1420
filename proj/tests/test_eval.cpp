#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "argmine/eval.hpp"
#include "oracles.hpp"

using namespace argmine;
using namespace oracle;

namespace {

ConfusionMatrix random_matrix(Rng& rng, std::size_t K, std::uint64_t max_cell) {
  ConfusionMatrix cm(K);
  do {
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) cm.add(i, j, rng.below(max_cell + 1));
  } while (cm.total() == 0);
  return cm;
}

}  // namespace

TEST(Kappa, HandCases) {
  ConfusionMatrix diag(3, {7, 0, 0, 0, 4, 0, 0, 0, 9});
  EXPECT_EQ(cohen_kappa(diag), 1.0);
  EXPECT_EQ(cohen_kappa(diag, Weighting::Quadratic), 1.0);

  // Constant prediction against uniform gold: p_o = p_e = 1/3.
  ConfusionMatrix constant(3, {5, 0, 0, 5, 0, 0, 5, 0, 0});
  EXPECT_EQ(cohen_kappa(constant), 0.0);

  // p_o = 0.7, p_e = 0.5.
  ConfusionMatrix two(2, {40, 10, 20, 30});
  EXPECT_EQ(cohen_kappa(two), 0.4);
}

TEST(Kappa, DegenerateSingleClassIsZeroAndFlagged) {
  ConfusionMatrix cm(3, {12, 0, 0, 0, 0, 0, 0, 0, 0});
  const auto k = kappa_with_flag(cm, Weighting::None);
  EXPECT_EQ(k.value, 0.0);
  EXPECT_TRUE(k.degenerate);
  EXPECT_TRUE(evaluate(cm).kappa_degenerate);
}

TEST(Kappa, EmptyMatrixThrows) {
  EXPECT_THROW(cohen_kappa(ConfusionMatrix(3)), ValidationError);
  EXPECT_THROW(prf(ConfusionMatrix(3)), ValidationError);
}

TEST(Kappa, MatchesBruteForceOnRandomMatrices) {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t K = 2 + rng.below(3);
    const auto cm = random_matrix(rng, K, 1 + rng.below(12));
    const auto pairs = expand(cm);
    ASSERT_NEAR(cohen_kappa(cm), oracle_kappa(pairs, K), 1e-12) << "trial " << trial;
    ASSERT_NEAR(cohen_kappa(cm, Weighting::Quadratic), oracle_weighted_kappa(pairs, K), 1e-12) << "trial " << trial;
  }
}

TEST(Kappa, InvariantUnderClassRelabelling) {
  Rng rng(5);
  const std::array<std::array<std::size_t, 3>, 5> perms{{{0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  for (int trial = 0; trial < 200; ++trial) {
    const auto cm = random_matrix(rng, 3, 20);
    for (const auto& p : perms) {
      ConfusionMatrix moved(3);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) moved.add(p[i], p[j], cm(i, j));
      ASSERT_NEAR(cohen_kappa(moved), cohen_kappa(cm), 1e-12);
    }
  }
}

TEST(Kappa, QuadraticAtLeastUnweightedWhenConfusionsAreAdjacent) {
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    ConfusionMatrix cm(3);
    for (std::size_t i = 0; i < 3; ++i) {
      cm.add(i, i, 1 + rng.below(30));
      if (i + 1 < 3) cm.add(i, i + 1, rng.below(10));
      if (i > 0) cm.add(i, i - 1, rng.below(10));
    }
    ASSERT_GE(cohen_kappa(cm, Weighting::Quadratic) + 1e-12, cohen_kappa(cm));
  }
}

TEST(Prf, MatchesBruteForceOnRandomMatrices) {
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto cm = random_matrix(rng, 3, rng.below(2) ? 3 : 15);
    const auto s = prf(cm);
    const auto o = oracle_prf(expand(cm), 3);
    for (std::size_t c = 0; c < 3; ++c) {
      ASSERT_NEAR(s.precision[c], o.p[c], 1e-12);
      ASSERT_NEAR(s.recall[c], o.r[c], 1e-12);
      ASSERT_NEAR(s.f[c], o.f[c], 1e-12);
    }
    ASSERT_NEAR(s.macro_f, o.macro_f, 1e-12);
    const auto r = evaluate(cm);
    ASSERT_NEAR(r.macro_f, (r.per_class_f[0] + r.per_class_f[1] + r.per_class_f[2]) / 3.0, 1e-12);
    ASSERT_GE(r.kappa, -1.0);
    ASSERT_LE(r.kappa, 1.0);
  }
}

TEST(Prf, DiagonalIsPerfect) {
  const auto r = evaluate(ConfusionMatrix(3, {3, 0, 0, 0, 2, 0, 0, 0, 8}));
  EXPECT_EQ(r.macro_precision, 1.0);
  EXPECT_EQ(r.macro_recall, 1.0);
  EXPECT_EQ(r.macro_f, 1.0);
  EXPECT_EQ(r.f_claim(), 1.0);
  EXPECT_EQ(r.f_evidence(), 1.0);
  EXPECT_EQ(r.f_warrant(), 1.0);
}

TEST(Prf, AbsentClassScoresZero) {
  // Warrant is neither gold nor predicted.
  const auto s = prf(ConfusionMatrix(3, {6, 2, 0, 1, 3, 0, 0, 0, 0}));
  EXPECT_EQ(s.precision[2], 0.0);
  EXPECT_EQ(s.recall[2], 0.0);
  EXPECT_EQ(s.f[2], 0.0);
}

TEST(Prf, MajorityConstantPrediction) {
  // Always Claim: F_c = 2p/(1+p) with p the claim share, others 0.
  const auto r = evaluate(ConfusionMatrix(3, {6, 0, 0, 3, 0, 0, 1, 0, 0}));
  EXPECT_NEAR(r.f_claim(), 2 * 0.6 / 1.6, 1e-15);
  EXPECT_EQ(r.f_evidence(), 0.0);
  EXPECT_EQ(r.f_warrant(), 0.0);
  EXPECT_EQ(r.kappa, 0.0);
}

TEST(Evaluate, SpecKappaIsQuadratic) {
  ConfusionMatrix arg(3, {2, 0, 0, 0, 2, 0, 0, 0, 2});
  ConfusionMatrix spec(3, {3, 1, 0, 0, 4, 1, 0, 2, 5});
  const auto r = evaluate(arg, &spec);
  ASSERT_TRUE(r.spec_kappa.has_value());
  EXPECT_DOUBLE_EQ(*r.spec_kappa, cohen_kappa(spec, Weighting::Quadratic));
  EXPECT_FALSE(evaluate(arg).spec_kappa.has_value());
}

TEST(Evaluate, FoldMeanAveragesEachField) {
  const auto a = evaluate(ConfusionMatrix(3, {4, 1, 0, 1, 3, 1, 0, 1, 2}));
  const auto b = evaluate(ConfusionMatrix(3, {2, 2, 1, 0, 5, 0, 1, 0, 3}));
  const std::vector<EvaluationReport> folds{a, b};
  const auto m = fold_mean(folds);
  EXPECT_NEAR(m.kappa, (a.kappa + b.kappa) / 2, 1e-15);
  EXPECT_NEAR(m.macro_f, (a.macro_f + b.macro_f) / 2, 1e-15);
  EXPECT_NEAR(m.f_warrant(), (a.f_warrant() + b.f_warrant()) / 2, 1e-15);
  EXPECT_EQ(m.n, a.n + b.n);
  EXPECT_EQ(m.support[1], a.support[1] + b.support[1]);
}

TEST(Evaluate, JsonColumns) {
  const auto j = to_json(evaluate(ConfusionMatrix(3, {4, 1, 0, 1, 3, 1, 0, 1, 2})));
  for (const char* key : {"kappa", "precision", "recall", "f_score", "f_e", "f_w", "f_c", "support", "n"})
    EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Permutation, IdenticalScoresGiveOne) {
  const std::vector<int> a{1, 0, 1, 1, 0, 1};
  EXPECT_EQ(permutation_test(std::span<const int>(a), std::span<const int>(a), 1000, 3), 1.0);
}

TEST(Permutation, AllCorrectVersusAllWrong) {
  const std::vector<int> a(20, 1), b(20, 0);
  EXPECT_LT(permutation_test(std::span<const int>(a), std::span<const int>(b), 10000, 1), 0.001);
}

TEST(Permutation, LengthMismatchThrows) {
  const std::vector<double> a{1, 0}, b{1};
  EXPECT_THROW(permutation_test(std::span<const double>(a), std::span<const double>(b)), ValidationError);
}

TEST(Permutation, AgreesWithExactEnumeration) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 12;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(rng.below(2));
      b[i] = rng.uniform() < 0.3 ? a[i] : static_cast<double>(rng.below(2));
    }
    double observed = 0.0;
    for (std::size_t i = 0; i < n; ++i) observed += a[i] - b[i];
    std::size_t hits = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += ((mask >> i) & 1u) ? a[i] - b[i] : b[i] - a[i];
      if (std::abs(s) >= std::abs(observed) - 1e-12) ++hits;
    }
    const double exact = static_cast<double>(hits) / static_cast<double>(1u << n);
    const double p = permutation_test(std::span<const double>(a), std::span<const double>(b), 10000, 100 + trial);
    EXPECT_NEAR(p, exact, 0.02) << "trial " << trial;
  }
}

TEST(Permutation, StableAcrossSeeds) {
  Rng rng(8);
  std::vector<int> a(60), b(60);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.uniform() < 0.7;
    b[i] = rng.uniform() < 0.6;
  }
  const double p0 = permutation_test(std::span<const int>(a), std::span<const int>(b), 10000, 1);
  for (std::uint64_t seed : {2, 3}) {
    EXPECT_NEAR(permutation_test(std::span<const int>(a), std::span<const int>(b), 10000, seed), p0, 0.01);
  }
  EXPECT_EQ(permutation_test(std::span<const int>(a), std::span<const int>(b), 10000, 1), p0);
}

TEST(Permutation, Marks) {
  EXPECT_EQ(significance_mark(0.005), "‡");
  EXPECT_EQ(significance_mark(0.03), "†");
  EXPECT_EQ(significance_mark(0.07), "⋆");
  EXPECT_EQ(significance_mark(0.5), "");
}
