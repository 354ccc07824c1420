#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "argmine/tensor.hpp"

using namespace argmine;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

// Sum of y * R for a fixed random R: dL/dy = R.
double weighted_sum(const Tensor& y, const Tensor& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

}  // namespace

TEST(Tensor, ShapeAndData) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t(1, 2), 1.5);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  t(0, 1) = std::nan("");
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(t.check_finite("test"), NumericError);
}

TEST(Dense, IdentityAndBias) {
  Dense d(3, 3);
  for (std::size_t i = 0; i < 3; ++i) d.W.value(i, i) = 1.0;
  const Tensor x({2, 3}, std::vector<double>{1, -2, 3, 0.5, 0, -1});
  EXPECT_EQ(d.forward(x), x);

  d.b.value = Tensor({3}, std::vector<double>{0.1, 0.2, 0.3});
  const Tensor y = d.forward(Tensor({2, 3}));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(y(r, c), d.b.value[c]);
}

TEST(Dense, ShapeMismatchThrows) {
  Dense d(4, 2);
  EXPECT_THROW(d.forward(Tensor({1, 3})), ShapeError);
}

TEST(Dense, GradientCheck) {
  for (auto seed : kSeeds) {
    Rng rng(seed);
    const std::size_t B = 1 + rng.below(4), I = 2 + rng.below(6), O = 2 + rng.below(6);
    Dense d(I, O);
    d.init(rng);
    for (auto& v : d.b.value.values()) v = rng.normal();
    Parameter x("x", {B, I});
    x.value = random_tensor({B, I}, rng);
    const Tensor R = random_tensor({B, O}, rng);
    ParameterList params = d.parameters();
    params.push_back(&x);
    auto loss = [&] { return weighted_sum(d.forward(x.value), R); };
    auto grad = [&] {
      zero_grads(params);
      Dense::Cache c;
      d.forward(x.value, &c);
      x.grad = d.backward(c, R);
    };
    const auto res = gradient_check(params, loss, grad, {.seed = seed});
    EXPECT_LT(res.max_rel_error(), 1e-6) << "seed " << seed;
  }
}

TEST(Conv, ConstantMapForAveragingKernel) {
  Conv1dMaxPool conv(2, 1, 3);
  conv.kernels.value.fill(1.0 / 6.0);
  const Tensor pre = conv.convolve(Tensor({9, 2}, 1.0));
  for (std::size_t t = 1; t + 1 < 9; ++t) EXPECT_DOUBLE_EQ(pre(t, 0), 1.0);
}

TEST(Conv, PooledLengthIsCeilHalf) {
  Rng rng(1);
  for (std::size_t T = 1; T <= 12; ++T) {
    Conv1dMaxPool conv(3, 2, 5);
    conv.init(rng);
    const Tensor y = conv.forward(random_tensor({T, 3}, rng));
    EXPECT_EQ(y.dim(0), (T + 1) / 2);
    EXPECT_EQ(y.dim(0), Conv1dMaxPool::pooled_length(T));
    EXPECT_EQ(y.dim(1), 2u);
  }
}

TEST(Conv, ShapeMismatchThrows) {
  Conv1dMaxPool conv(3, 2, 5);
  EXPECT_THROW(conv.forward(Tensor({6, 4})), ShapeError);
}

TEST(Conv, GradientCheck) {
  for (auto seed : kSeeds) {
    Rng rng(seed);
    Conv1dMaxPool conv(8, 4, 5);
    conv.init(rng);
    for (auto& v : conv.bias.value.values()) v = 0.1 * rng.normal();
    Parameter x("x", {11, 8});
    x.value = random_tensor({11, 8}, rng);
    const Tensor R = random_tensor({Conv1dMaxPool::pooled_length(11), 4}, rng);
    ParameterList params = conv.parameters();
    params.push_back(&x);
    auto loss = [&] { return weighted_sum(conv.forward(x.value), R); };
    auto grad = [&] {
      zero_grads(params);
      Conv1dMaxPool::Cache c;
      conv.forward(x.value, &c);
      x.grad = conv.backward(c, R, true);
    };
    const auto res = gradient_check(params, loss, grad, {.seed = seed});
    EXPECT_LT(res.max_rel_error(), 1e-6) << "seed " << seed;
  }
}

TEST(GlobalMaxPool, RoutesGradientToArgmax) {
  const Tensor x({3, 2}, std::vector<double>{1, 5, 4, 2, 3, 0});
  GlobalMaxPool::Cache c;
  const Tensor y = GlobalMaxPool::forward(x, &c);
  EXPECT_EQ(y(0, 0), 4.0);
  EXPECT_EQ(y(0, 1), 5.0);
  const Tensor dx = GlobalMaxPool::backward(c, Tensor({1, 2}, std::vector<double>{1, 2}));
  EXPECT_EQ(dx, Tensor({3, 2}, std::vector<double>{0, 2, 1, 0, 0, 0}));
}

TEST(Lstm, ZeroInputZeroParamsGivesZeroState) {
  Lstm lstm(4, 75);
  const Tensor h = lstm.forward(Tensor({6, 4}));
  ASSERT_EQ(h.shape(), (std::vector<std::size_t>{1, 75}));
  for (double v : h.values()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, DefaultStateShapes) {
  Lstm lstm(50, 75);
  Rng rng(3);
  lstm.init(rng);
  const auto s = lstm.step(std::vector<double>(50, 0.1), lstm.initial_state());
  EXPECT_EQ(s.h.size(), 75u);
  EXPECT_EQ(s.c.size(), 75u);
  EXPECT_THROW(lstm.step(std::vector<double>(49, 0.0), lstm.initial_state()), ShapeError);
}

TEST(Lstm, InitUsesUnitForgetBiasAndOrthogonalRecurrence) {
  Lstm lstm(3, 6);
  Rng rng(2);
  lstm.init(rng);
  for (std::size_t j = 0; j < 6; ++j) {
    EXPECT_EQ(lstm.b.value[j], 0.0);
    EXPECT_EQ(lstm.b.value[6 + j], 1.0);
  }
  // Each H x H gate block of Wh is orthogonal: Q^T Q = I.
  for (std::size_t g = 0; g < 4; ++g)
    for (std::size_t a = 0; a < 6; ++a)
      for (std::size_t b = 0; b < 6; ++b) {
        double dot = 0.0;
        for (std::size_t r = 0; r < 6; ++r) dot += lstm.Wh.value(r, g * 6 + a) * lstm.Wh.value(r, g * 6 + b);
        EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12);
      }
}

TEST(Lstm, GradientCheckThroughSevenSteps) {
  for (auto seed : kSeeds) {
    Rng rng(seed);
    Lstm lstm(6, 75);
    lstm.init(rng);
    Parameter x("x", {7, 6});
    x.value = random_tensor({7, 6}, rng);
    const Tensor R = random_tensor({1, 75}, rng);
    ParameterList params = lstm.parameters();
    params.push_back(&x);
    auto loss = [&] { return weighted_sum(lstm.forward(x.value), R); };
    auto grad = [&] {
      zero_grads(params);
      Lstm::Cache c;
      lstm.forward(x.value, &c);
      x.grad = lstm.backward(c, R, true);
    };
    const auto res = gradient_check(params, loss, grad, {.seed = seed});
    EXPECT_LT(res.max_rel_error(), 1e-6) << "seed " << seed;
  }
}

TEST(SoftmaxCE, UniformLogits) {
  const std::vector<std::size_t> labels{0, 2};
  const auto r = softmax_ce(Tensor({2, 3}), one_hot(labels, 3));
  EXPECT_NEAR(r.loss, std::log(3.0), 1e-15);
  EXPECT_NEAR(r.grad(0, 0), (1.0 / 3.0 - 1.0) / 2.0, 1e-15);
  EXPECT_NEAR(r.grad(1, 0), (1.0 / 3.0) / 2.0, 1e-15);
}

TEST(SoftmaxCE, ProbabilitiesSumToOneAndStayFinite) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor logits = random_tensor({4, 3}, rng, trial < 100 ? 1.0 : 400.0);
    const std::vector<std::size_t> labels{0, 1, 2, 1};
    const auto r = softmax_ce(logits, one_hot(labels, 3));
    ASSERT_TRUE(std::isfinite(r.loss));
    for (std::size_t i = 0; i < 4; ++i) ASSERT_NEAR(r.probs(i, 0) + r.probs(i, 1) + r.probs(i, 2), 1.0, 1e-12);
  }
}

TEST(SoftmaxCE, GradientCheck) {
  for (auto seed : kSeeds) {
    Rng rng(seed);
    Parameter logits("logits", {5, 3});
    logits.value = random_tensor({5, 3}, rng);
    std::vector<std::size_t> labels(5);
    for (auto& l : labels) l = rng.below(3);
    const Tensor y = one_hot(labels, 3);
    ParameterList params{&logits};
    auto loss = [&] { return softmax_ce(logits.value, y).loss; };
    auto grad = [&] { logits.grad = softmax_ce(logits.value, y).grad; };
    EXPECT_LT(gradient_check(params, loss, grad, {.seed = seed}).max_rel_error(), 1e-7);
  }
}

TEST(SoftmaxCE, ClassWeightsScaleRows) {
  const std::vector<std::size_t> labels{1};
  const std::vector<double> w{1.0, 3.0, 1.0};
  const Tensor logits({1, 3}, std::vector<double>{0.2, -0.1, 0.4});
  const auto plain = softmax_ce(logits, one_hot(labels, 3));
  const auto weighted = softmax_ce(logits, one_hot(labels, 3), w);
  EXPECT_NEAR(weighted.loss, 3.0 * plain.loss, 1e-14);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Rng rng(1);
  Parameter p("p", {4, 3});
  p.value = random_tensor({4, 3}, rng);
  const Tensor before = p.value;
  Adam adam;
  ParameterList params{&p};
  for (int i = 0; i < 10; ++i) {
    zero_grads(params);
    adam.step(params);
  }
  EXPECT_EQ(p.value, before);
}

TEST(Adam, ConstantGradientStepsByLearningRate) {
  Parameter p("p", {3});
  const std::vector<double> g{0.5, -2.0, 1e-3};
  Adam adam(AdamConfig{.lr = 1e-2});
  ParameterList params{&p};
  for (int t = 1; t <= 200; ++t) {
    const Tensor before = p.value;
    for (std::size_t i = 0; i < 3; ++i) p.grad[i] = g[i];
    adam.step(params);
    if (t >= 100) {
      for (std::size_t i = 0; i < 3; ++i) {
        const double step = p.value[i] - before[i];
        EXPECT_NEAR(step, -1e-2 * (g[i] > 0 ? 1.0 : -1.0), 1e-6);
      }
    }
  }
}

TEST(Adam, Deterministic) {
  auto run = [] {
    Rng rng(9);
    Parameter p("p", {5});
    p.value = random_tensor({5}, rng);
    Adam adam;
    ParameterList params{&p};
    for (int t = 0; t < 50; ++t) {
      for (std::size_t i = 0; i < 5; ++i) p.grad[i] = std::sin(p.value[i] * 3.0 + t);
      adam.step(params);
    }
    return p.value;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, NonFiniteUpdateIsReported) {
  Parameter p("p", {2});
  p.grad[0] = std::numeric_limits<double>::quiet_NaN();
  Adam adam;
  ParameterList params{&p};
  EXPECT_THROW(adam.step(params), NumericError);
}

TEST(Clip, RescalesToMaxNorm) {
  Parameter a("a", {2}), b("b", {1});
  a.grad = Tensor({2}, std::vector<double>{3, 4});
  b.grad = Tensor({1}, std::vector<double>{12});
  ParameterList params{&a, &b};
  EXPECT_DOUBLE_EQ(global_grad_norm(params), 13.0);
  clip_grad_norm(params, 5.0);
  EXPECT_NEAR(global_grad_norm(params), 5.0, 1e-12);
  EXPECT_NEAR(a.grad[0] / a.grad[1], 0.75, 1e-12);
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(3);
  Checkpoint ck;
  ck.config = {{"format", "test"}, {"n", 3}};
  ck.tensors.emplace_back("w", random_tensor({2, 3}, rng));
  ck.tensors.emplace_back("k", random_tensor({4, 1, 2}, rng));
  ck.tensors.emplace_back("empty", Tensor({0}));
  std::stringstream buf;
  write_checkpoint(buf, ck);
  const Checkpoint back = read_checkpoint(buf);
  EXPECT_EQ(back.config, ck.config);
  ASSERT_EQ(back.tensors.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.tensors[i].first, ck.tensors[i].first);
    EXPECT_EQ(back.tensors[i].second, ck.tensors[i].second);
  }
  ASSERT_NE(back.find("k"), nullptr);
  EXPECT_EQ(back.find("missing"), nullptr);
}

TEST(Checkpoint, ByteLayout) {
  Checkpoint ck;
  ck.config = nlohmann::json::object();
  ck.tensors.emplace_back("a", Tensor({1}, std::vector<double>{1.0}));
  std::stringstream buf;
  write_checkpoint(buf, ck);
  const std::string s = buf.str();
  // magic, version, config length + "{}", count, name length + "a", rank, dim, one double
  ASSERT_EQ(s.size(), 8u + 4 + 8 + 2 + 4 + 4 + 1 + 4 + 8 + 8);
  EXPECT_EQ(s.substr(0, 8), "ARGMCKPT");
  EXPECT_EQ(static_cast<unsigned char>(s[8]), 1u);
  EXPECT_EQ(s.substr(20, 2), "{}");
  EXPECT_EQ(static_cast<unsigned char>(s[s.size() - 2]), 0xF0u);  // 1.0 = 0x3FF0000000000000
  EXPECT_EQ(static_cast<unsigned char>(s[s.size() - 1]), 0x3Fu);
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::stringstream bad("NOTACKPT....");
  EXPECT_THROW(read_checkpoint(bad), ParseError);

  Checkpoint ck;
  ck.tensors.emplace_back("a", Tensor({3}, 1.0));
  std::stringstream buf;
  write_checkpoint(buf, ck);
  std::stringstream truncated(buf.str().substr(0, buf.str().size() - 5));
  EXPECT_THROW(read_checkpoint(truncated), ParseError);
}
