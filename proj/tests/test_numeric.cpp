#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "noisyrec/autograd.hpp"
#include "noisyrec/gradcheck.hpp"
#include "noisyrec/params.hpp"
#include "noisyrec/rng.hpp"

using namespace noisyrec;
namespace fs = std::filesystem;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Weighted sum with fixed random weights so every output entry matters.
ad::Var project(ad::Tape& tape, const ad::Var& x, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w = random_matrix(x.rows(), x.cols(), rng);
  return ad::sum(ad::mul(x, tape.constant(std::move(w))));
}

double check_primitive(const std::function<ad::Var(ad::Tape&, std::vector<ad::Var>&)>& op,
                       std::vector<Tensor> inputs) {
  ParamSet params;
  for (std::size_t i = 0; i < inputs.size(); ++i) params.add("x" + std::to_string(i), inputs[i]);
  LossBuilder build = [&](ad::Tape& tape, ParamSet& ps) {
    std::vector<ad::Var> xs;
    for (std::size_t i = 0; i < inputs.size(); ++i) xs.push_back(ps.bind(tape, "x" + std::to_string(i)));
    return project(tape, op(tape, xs), 99);
  };
  return grad_check(build, params, 1e-6).max_rel_error;
}

}  // namespace

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
  EXPECT_NE(Rng(1).next_u64(), Rng(2).next_u64());
  EXPECT_NE(Rng::derive(1, 2, 3).next_u64(), Rng::derive(1, 3, 2).next_u64());
}

TEST(Rng, GammaMeanMatchesShape) {
  Rng rng(7);
  for (double shape : {0.5, 1.0, 7.5}) {
    double s = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) s += rng.gamma(shape);
    EXPECT_NEAR(s / n, shape, 0.02 * shape + 0.01);
  }
}

TEST(Autograd, SumGradientIsOnes) {
  ad::Tape tape;
  Rng rng(1);
  ad::Var w = tape.leaf(random_matrix(3, 4, rng), "W");
  tape.backward(ad::sum(w));
  for (double g : w.grad().values()) EXPECT_EQ(g, 1.0);
}

TEST(Autograd, SoftmaxCrossEntropyTwoLogits) {
  ParamSet params;
  params.add("logits", Tensor::row({0.0, 0.0}));
  LossBuilder build = [](ad::Tape& tape, ParamSet& ps) {
    ad::Var p = ad::softmax_rows(ps.bind(tape, "logits"));
    ad::Var picked = ad::sum(ad::mul(ad::log(p), tape.constant(Tensor::row({1.0, 0.0}))));
    return ad::scale(picked, -1.0);
  };
  const double loss = forward_backward(build, params);
  EXPECT_NEAR(loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(params.grad("logits")[0], -0.5, 1e-15);
  EXPECT_NEAR(params.grad("logits")[1], 0.5, 1e-15);
  EXPECT_LT(grad_check(build, params, 1e-6).max_rel_error, 1e-8);
}

TEST(Autograd, EveryPrimitiveMatchesCentralDifferences) {
  Rng rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t m = 1 + rng.index(4), k = 1 + rng.index(4), n = 1 + rng.index(4);
    auto mk = [&](std::size_t r, std::size_t c) { return random_matrix(r, c, rng); };
    using Xs = std::vector<ad::Var>;

    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::matmul(x[0], x[1]); }, {mk(m, k), mk(k, n)}), 1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::matmul(x[0], x[1], false, true); },
                              {mk(m, k), mk(n, k)}),
              1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::matmul(x[0], x[1], true, false); },
                              {mk(k, m), mk(k, n)}),
              1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::matmul(x[0], x[1], true, true); },
                              {mk(k, m), mk(n, k)}),
              1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::add(x[0], x[1]); }, {mk(m, n), mk(m, n)}), 1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::add(x[0], x[1]); }, {mk(m + 1, n), mk(1, n)}),
              1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::sub(x[0], x[1]); }, {mk(m, n), mk(m, n)}), 1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::mul(x[0], x[1]); }, {mk(m, n), mk(m, n)}), 1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::mul(x[0], x[1]); }, {mk(m, n + 1), mk(m, 1)}),
              1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::sigmoid(x[0]); }, {mk(m, n)}), 1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::tanh(x[0]); }, {mk(m, n)}), 1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::exp(x[0]); }, {mk(m, n)}), 1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::log(x[0]); }, {random_matrix(m, n, rng, 0.5, 2.0)}),
              1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::softmax_rows(x[0]); }, {mk(m, n + 1)}), 1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::normalize_rows(x[0]); }, {mk(m, n + 1)}), 1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::concat_cols(x[0], x[1]); }, {mk(m, n), mk(m, k)}),
              1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::concat_rows({x[0], x[1], x[0]}); },
                              {mk(m, n), mk(k, n)}),
              1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::gather_rows(x[0], {0, 2, 0, 1}); }, {mk(3, n)}),
              1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::scatter_add_rows(x[0], {1, 1, 0}, 4); }, {mk(3, n)}),
              1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::transpose(x[0]); }, {mk(m, n)}), 1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::sum_rows(x[0]); }, {mk(m, n)}), 1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::mean(x[0]); }, {mk(m, n)}), 1e-6);
    EXPECT_LT(check_primitive([](ad::Tape&, Xs& x) { return ad::affine(x[0], -2.5, 0.3); }, {mk(m, n)}), 1e-6);
  }
}

TEST(Autograd, SoftmaxSumsToOneAndIsShiftInvariant) {
  Rng rng(5);
  ad::Tape tape;
  Tensor logits = random_matrix(4, 9, rng, -5.0, 5.0);
  Tensor shifted = logits;
  for (double& v : shifted.values()) v += 123.456;
  ad::Var a = ad::softmax_rows(tape.constant(logits));
  ad::Var b = ad::softmax_rows(tape.constant(shifted));
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (double v : a.value().row_span(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  for (std::size_t i = 0; i < a.value().size(); ++i) EXPECT_NEAR(a.value()[i], b.value()[i], 1e-9);
}

TEST(Autograd, NonFiniteValueNamesTheNode) {
  ad::Tape tape;
  ad::Var x = tape.leaf(Tensor::row({-1.0}), "x");
  try {
    ad::log(x);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'log'"), std::string::npos);
  }
}

TEST(Autograd, NormalizeFloorKeepsZeroRowFinite) {
  ad::Tape tape;
  ad::Var x = tape.leaf(Tensor::matrix(1, 3, 0.0), "x");
  ad::Var y = ad::normalize_rows(x);
  for (double v : y.value().values()) EXPECT_EQ(v, 0.0);
  tape.backward(ad::sum(y));
  EXPECT_TRUE(x.grad().all_finite());
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  ParamSet ps;
  ps.add("w", Tensor::row({0.3, -1.2}));
  adam_step(ps, {});
  EXPECT_EQ(ps.value("w")[0], 0.3);
  EXPECT_EQ(ps.value("w")[1], -1.2);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamSet ps;
  ps.add("x", Tensor::scalar(2.0));
  ps.grad("x")[0] = 1.0;
  adam_step(ps, {.lr = 0.001});
  // bias-corrected m = v = 1, so the step is lr / (1 + eps)
  EXPECT_NEAR(2.0 - ps.value("x")[0], 0.001 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(ps.grad("x")[0], 0.0);
}

TEST(Adam, MinimizesQuadratic) {
  ParamSet ps;
  ps.add("x", Tensor::scalar(1.0));
  for (int i = 0; i < 100; ++i) {
    ps.grad("x")[0] = 2.0 * ps.value("x")[0];
    adam_step(ps, {.lr = 0.1});
  }
  EXPECT_LT(std::abs(ps.value("x")[0]), 0.5);
}

TEST(GradCheck, LinearLossIsExact) {
  Rng rng(3);
  ParamSet ps;
  ps.add("W", random_matrix(3, 3, rng));
  LossBuilder build = [](ad::Tape& tape, ParamSet& p) { return project(tape, p.bind(tape, "W"), 11); };
  const auto report = grad_check(build, ps, 1e-9);
  EXPECT_LT(report.max_rel_error, 1e-9);
  EXPECT_TRUE(report.passed());
}

TEST(GradCheck, CorruptedGradientIsReported) {
  Rng rng(3);
  ParamSet ps;
  ps.add("W", random_matrix(3, 3, rng));
  ps.add("b", random_matrix(1, 3, rng));
  LossBuilder build = [](ad::Tape& tape, ParamSet& p) {
    return ad::sum(ad::tanh(ad::add(p.bind(tape, "W"), p.bind(tape, "b"))));
  };
  const auto report = grad_check(build, ps, 1e-3, 1e-5, [](ParamSet& p) { p.grad("b")[1] += 0.5; });
  ASSERT_EQ(report.failing.size(), 1u);
  EXPECT_EQ(report.failing[0], "b");
}

TEST(Checkpoint, RoundTripAndTruncation) {
  Rng rng(4);
  ParamSet ps;
  ps.add("emb", random_matrix(5, 3, rng));
  ps.add("bias", Tensor({3}, std::vector<double>{1.0, -0.0, 1e-300}));
  ps.set_step(17);
  const fs::path dir = fs::temp_directory_path() / "noisyrec_ckpt_test";
  fs::create_directories(dir);
  const std::string path = (dir / "a.ckpt").string();
  save_checkpoint(ps, {{"d", 3}}, path);
  const Checkpoint ck = load_checkpoint(path);
  EXPECT_EQ(ck.params.step(), 17u);
  EXPECT_EQ(ck.meta.at("d"), 3);
  EXPECT_EQ(ck.params.value("emb"), ps.value("emb"));
  EXPECT_EQ(ck.params.value("bias"), ps.value("bias"));

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
  }
  EXPECT_THROW(load_checkpoint(path), Error);
  fs::remove_all(dir);
}

TEST(Determinism, IdenticalSeedsGiveBitIdenticalTrajectories) {
  auto run = [] {
    Rng rng(9);
    ParamSet ps;
    ps.add("W", random_matrix(4, 4, rng));
    std::vector<double> losses;
    for (int step = 0; step < 20; ++step) {
      LossBuilder build = [&](ad::Tape& tape, ParamSet& p) {
        ad::Var w = p.bind(tape, "W");
        return ad::sum(ad::mul(ad::sigmoid(ad::matmul(w, w)), ad::sigmoid(w)));
      };
      losses.push_back(forward_backward(build, ps));
      adam_step(ps, {.lr = 0.01});
    }
    return losses;
  };
  EXPECT_EQ(run(), run());
}
