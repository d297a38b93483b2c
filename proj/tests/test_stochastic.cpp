#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "noisyrec/autograd.hpp"
#include "noisyrec/gradcheck.hpp"
#include "noisyrec/params.hpp"
#include "noisyrec/stochastic.hpp"

using namespace noisyrec;

namespace {

std::vector<double> unit(std::vector<double> v) {
  const double n = l2_norm(v);
  for (double& x : v) x /= n;
  return v;
}

// log I_nu(k) by its power series, summed in log space.
double log_bessel_i(double nu, double k) {
  const double lx = std::log(k / 2.0);
  double top = -INFINITY;
  std::vector<double> terms;
  for (int m = 0; m < 2000; ++m) {
    const double t = (2.0 * m + nu) * lx - std::lgamma(m + 1.0) - std::lgamma(m + nu + 1.0);
    terms.push_back(t);
    top = std::max(top, t);
    if (t < top - 60.0 && m > k) break;
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - top);
  return top + std::log(s);
}

// E[cos] under vMF on S^{d-1}: I_{d/2}(k) / I_{d/2-1}(k).
double vmf_mean_cosine(double k, std::size_t d) {
  const double nu = static_cast<double>(d) / 2.0;
  return std::exp(log_bessel_i(nu, k) - log_bessel_i(nu - 1.0, k));
}

Tensor random_unit_table(std::size_t n, std::size_t d, Rng& rng) {
  Tensor t = Tensor::matrix(n, d);
  for (double& v : t.values()) v = rng.normal();
  return normalized_rows(t);
}

}  // namespace

TEST(Uniformity, PotentialKnownValues) {
  std::vector<double> a{1, 0}, b{0, 1}, c{-1, 0};
  EXPECT_DOUBLE_EQ(rbf_potential(a, a, 2.0), 1.0);
  EXPECT_NEAR(rbf_potential(a, b, 2.0), std::exp(-4.0), 1e-15);
  EXPECT_NEAR(rbf_potential(a, c, 2.0), std::exp(-8.0), 1e-15);
  EXPECT_THROW(rbf_potential(a, b, 0.0), Error);
}

TEST(Uniformity, ExactModeMatchesHandComputation) {
  // three points on the equator of S^2 at 120 degrees: every squared distance is 3
  const double s = std::sqrt(3.0) / 2.0;
  Tensor rows = Tensor::matrix(3, 3, {1, 0, 0, -0.5, s, 0, -0.5, -s, 0});
  Rng rng(1);
  EXPECT_NEAR(uniformity_loss(rows, 2.0, 100, rng), -6.0, 1e-12);
  // all identical rows: loss 0
  Tensor same = Tensor::matrix(4, 2, {1, 0, 1, 0, 1, 0, 1, 0});
  EXPECT_NEAR(uniformity_loss(same, 2.0, 100, rng), 0.0, 1e-15);
}

TEST(Uniformity, PairSamplingCoversDistinctPairs) {
  Rng rng(2);
  EXPECT_EQ(sample_pairs(5, 10, rng).size(), 10u);
  EXPECT_EQ(sample_pairs(5, 1000, rng), all_pairs(5));
  for (auto [j, k] : sample_pairs(50, 500, rng)) {
    EXPECT_LT(j, k);
    EXPECT_LT(k, 50u);
  }
  EXPECT_THROW(sample_pairs(1, 10, rng), Error);
}

TEST(Uniformity, SampledEstimateIsUnbiasedForMeanPotential) {
  Rng rng(3);
  Tensor rows = random_unit_table(40, 4, rng);
  const double exact = mean_potential(rows, all_pairs(40), 2.0);
  double acc = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) acc += mean_potential(rows, sample_pairs(40, 64, rng), 2.0);
  EXPECT_NEAR(acc / reps, exact, 0.02 * exact);
}

TEST(Uniformity, TapeMatchesDoubleAndGradChecks) {
  Rng rng(4);
  ParamSet params;
  params.add("e", random_unit_table(7, 3, rng));
  const auto pairs = all_pairs(7);
  LossBuilder build = [&](ad::Tape& t, ParamSet& p) {
    return uniformity_loss(ad::normalize_rows(p.bind(t, "e")), pairs, 2.0);
  };
  Rng unused(0);
  EXPECT_NEAR(forward_only(build, params), uniformity_loss(params.value("e"), 2.0, 1000, unused), 1e-12);
  EXPECT_TRUE(grad_check(build, params, 1e-6).passed());
}

TEST(Uniformity, DescentSpreadsPointsOnSphere) {
  // 32 points clustered around one pole of S^2 spread out under gradient descent
  Rng rng(5);
  Tensor e = Tensor::matrix(32, 3);
  for (std::size_t r = 0; r < 32; ++r) {
    e(r, 0) = 0.1 * rng.normal();
    e(r, 1) = 0.1 * rng.normal();
    e(r, 2) = 1.0;
  }
  ParamSet params;
  params.add("e", normalized_rows(e));
  const auto pairs = all_pairs(32);
  LossBuilder build = [&](ad::Tape& t, ParamSet& p) {
    return uniformity_loss(ad::normalize_rows(p.bind(t, "e")), pairs, 2.0);
  };
  const double before = forward_only(build, params);
  AdamConfig adam;
  adam.lr = 0.05;
  for (int step = 0; step < 300; ++step) {
    forward_backward(build, params);
    adam_step(params, adam);
  }
  const double after = forward_only(build, params);
  EXPECT_LT(after, before - 2.0);
  // the uniform distribution on S^2 has E[exp(-2||x-y||^2)] = (1 - e^-8)/8
  EXPECT_NEAR(after, std::log((1.0 - std::exp(-8.0)) / 8.0), 0.35);
}

TEST(Vmf, BesselOracleAgreesWithStandardLibrary) {
  for (double nu : {0.5, 1.0, 7.0, 8.0}) {
    for (double k : {0.5, 3.0, 20.0}) {
      EXPECT_NEAR(log_bessel_i(nu, k), std::log(std::cyl_bessel_i(nu, k)), 1e-10) << nu << " " << k;
    }
  }
}

TEST(Vmf, SamplesAreUnitNorm) {
  Rng rng(6);
  auto mu = unit({1, 2, 3, 4});
  for (int i = 0; i < 500; ++i) EXPECT_NEAR(l2_norm(vmf_sample({mu, 5.0}, rng)), 1.0, 1e-12);
}

TEST(Vmf, MeanResultantLengthMatchesBesselRatio) {
  const std::size_t d = 16;
  Rng mrng(7);
  std::vector<double> mu(d);
  for (double& v : mu) v = mrng.normal();
  mu = unit(mu);
  for (double kappa : {1.0, 10.0, 50.0, 250.0}) {
    Rng rng(100 + static_cast<std::uint64_t>(kappa));
    const int n = 20000;
    std::vector<double> mean(d, 0.0);
    double cos_acc = 0.0, cos_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      auto x = vmf_sample({mu, kappa}, rng);
      const double c = dot(x, mu);
      cos_acc += c;
      cos_sq += c * c;
      for (std::size_t j = 0; j < d; ++j) mean[j] += x[j] / n;
    }
    const double expect = vmf_mean_cosine(kappa, d);
    const double m = cos_acc / n;
    const double se = std::sqrt(std::max(cos_sq / n - m * m, 1e-12) / n);
    EXPECT_NEAR(m, expect, 5.0 * se + 1e-6) << "kappa " << kappa;
    // the mean direction of the draws is mu
    EXPECT_NEAR(cosine(mean, mu), 1.0, kappa < 5 ? 0.05 : 1e-3) << "kappa " << kappa;
  }
}

TEST(Vmf, KappaZeroIsUniform) {
  Rng rng(8);
  std::vector<double> mu = unit({0, 0, 1});
  const int n = 20000;
  double c = 0.0;
  int upper = 0;
  for (int i = 0; i < n; ++i) {
    double w = dot(vmf_sample({mu, 0.0}, rng), mu);
    c += w;
    upper += w > 0.5;
  }
  EXPECT_NEAR(c / n, 0.0, 0.02);
  // on S^2 the cosine is uniform on [-1, 1]
  EXPECT_NEAR(static_cast<double>(upper) / n, 0.25, 0.015);
}

TEST(Vmf, InvalidParametersThrow) {
  Rng rng(9);
  EXPECT_THROW(vmf_sample({{1.0, 1.0}, 1.0}, rng), Error);
  EXPECT_THROW(vmf_sample({{1.0, 0.0}, -1.0}, rng), Error);
  EXPECT_THROW(vmf_sample({{1.0}, 1.0}, rng), Error);
}

TEST(Vmf, InfiniteKappaDisablesDensification) {
  Rng rng(10);
  Tensor rows = random_unit_table(5, 4, rng);
  EXPECT_EQ(densify_prefix(rows, INFINITY, rng), rows);
  Tensor moved = densify_prefix(rows, 10.0, rng);
  EXPECT_NE(moved, rows);
  for (std::size_t r = 0; r < 5; ++r) EXPECT_NEAR(l2_norm(moved.row_span(r)), 1.0, 1e-12);
}

TEST(Vmf, DrawDecompositionReconstructsSample) {
  Rng rng(11);
  auto mu = unit({3, -1, 2});
  auto d = vmf_draw(mu, 20.0, rng);
  std::vector<double> x(3);
  for (std::size_t i = 0; i < 3; ++i) x[i] = d.w * mu[i] + d.offset[i];
  EXPECT_NEAR(l2_norm(x), 1.0, 1e-12);
  EXPECT_NEAR(dot(x, mu), d.w, 1e-12);
  EXPECT_NEAR(dot(d.offset, mu), 0.0, 1e-12);
}

TEST(FakeTargets, DisabledCasesReturnOneHot) {
  Rng rng(12);
  Tensor t = random_unit_table(10, 4, rng);
  FakeTargetConfig cfg;
  cfg.p_count = 0;
  EXPECT_EQ(sample_fake_targets(3, t, cfg, rng).entries, SoftTargets::one_hot(3).entries);
  cfg.p_count = 5;
  cfg.alpha = 0.0;
  EXPECT_EQ(sample_fake_targets(3, t, cfg, rng).entries, SoftTargets::one_hot(3).entries);
  cfg.alpha = 0.1;
  cfg.beta = 1.5;  // no candidate can reach it
  EXPECT_EQ(sample_fake_targets(3, t, cfg, rng).entries, SoftTargets::one_hot(3).entries);
  cfg.alpha = 1.0;
  EXPECT_THROW(sample_fake_targets(3, t, cfg, rng), Error);
}

TEST(FakeTargets, MassAndSupportInvariants) {
  Rng rng(13);
  Tensor t = random_unit_table(60, 5, rng);
  FakeTargetConfig cfg{0.1, 0.2, 7, 5.0};
  for (int trial = 0; trial < 200; ++trial) {
    const auto target = static_cast<ItemIndex>(rng.index(60));
    auto y = sample_fake_targets(target, t, cfg, rng);
    EXPECT_NEAR(y.sum(), 1.0, 1e-12);
    EXPECT_EQ(y.entries.front().first, target);
    EXPECT_NEAR(y.entries.front().second, 0.9, 1e-12);
    std::size_t eligible = 0;
    for (std::size_t j = 0; j < 60; ++j)
      if (j != target && dot(t.row_span(j), t.row_span(target)) >= cfg.beta) ++eligible;
    EXPECT_EQ(y.entries.size() - 1, std::min<std::size_t>(7, eligible));
    std::set<ItemIndex> seen{target};
    for (std::size_t k = 1; k < y.entries.size(); ++k) {
      const auto [j, w] = y.entries[k];
      EXPECT_TRUE(seen.insert(j).second);
      EXPECT_GE(dot(t.row_span(j), t.row_span(target)), cfg.beta);
      EXPECT_GT(w, 0.0);
    }
  }
}

TEST(FakeTargets, SelectionFrequenciesMatchEnumeration) {
  // target 0 and four candidates with known cosines on S^1; P = 2
  std::vector<double> angles{0.0, 0.3, 0.6, 0.9, 1.2};
  Tensor t = Tensor::matrix(5, 2);
  for (std::size_t i = 0; i < 5; ++i) {
    t(i, 0) = std::cos(angles[i]);
    t(i, 1) = std::sin(angles[i]);
  }
  const double kappa = 3.0;
  std::vector<double> w(5, 0.0);
  for (std::size_t i = 1; i < 5; ++i) w[i] = std::exp(kappa * std::cos(angles[i]));
  // P(i first) * P(j second | i) summed over orderings
  std::map<std::pair<ItemIndex, ItemIndex>, double> expect;
  const double total = w[1] + w[2] + w[3] + w[4];
  for (ItemIndex i = 1; i < 5; ++i)
    for (ItemIndex j = 1; j < 5; ++j)
      if (i != j) expect[{std::min(i, j), std::max(i, j)}] += w[i] / total * w[j] / (total - w[i]);

  FakeTargetConfig cfg{0.2, -1.0, 2, kappa};
  Rng rng(14);
  std::map<std::pair<ItemIndex, ItemIndex>, double> seen;
  const int n = 40000;
  for (int r = 0; r < n; ++r) {
    auto y = sample_fake_targets(0, t, cfg, rng);
    ASSERT_EQ(y.entries.size(), 3u);
    ItemIndex a = y.entries[1].first, b = y.entries[2].first;
    seen[{std::min(a, b), std::max(a, b)}] += 1.0 / n;
    // weights split alpha in proportion to exp(kappa * cos)
    EXPECT_NEAR(y.entries[1].second / y.entries[2].second, w[a] / w[b], 1e-9);
  }
  for (const auto& [pair, p] : expect) EXPECT_NEAR(seen[pair], p, 0.01);
}

TEST(SoftCe, OneHotEqualsNegativeLogLikelihood) {
  std::vector<double> p{0.2, 0.5, 0.3};
  EXPECT_NEAR(soft_ce_loss(p, SoftTargets::one_hot(1)), -std::log(0.5), 1e-15);
  SoftTargets y{{{1, 0.9}, {2, 0.1}}};
  EXPECT_NEAR(soft_ce_loss(p, y), -0.9 * std::log(0.5) - 0.1 * std::log(0.3), 1e-15);
  std::vector<double> zero{1.0, 0.0};
  EXPECT_NEAR(soft_ce_loss(zero, SoftTargets::one_hot(1)), -std::log(1e-12), 1e-9);
}

TEST(SoftCe, BatchedTapeMatchesAndGradChecks) {
  Rng rng(15);
  ParamSet params;
  params.add("z", uniform_tensor({3, 6}, 1.0, rng));
  std::vector<SoftTargets> ys{SoftTargets::one_hot(2), SoftTargets{{{0, 0.8}, {5, 0.15}, {1, 0.05}}},
                              SoftTargets::one_hot(4)};
  LossBuilder build = [&](ad::Tape& t, ParamSet& p) { return soft_ce_loss(ad::softmax_rows(p.bind(t, "z")), ys); };
  ad::Tape t;
  {
    Tensor probs = ad::softmax_rows(t.constant(params.value("z"))).value();
    double expect = 0.0;
    for (std::size_t r = 0; r < 3; ++r) expect += soft_ce_loss(probs.row_span(r), ys[r]) / 3.0;
    EXPECT_NEAR(forward_only(build, params), expect, 1e-12);
  }
  EXPECT_TRUE(grad_check(build, params, 1e-6).passed());
}

TEST(SoftCe, TotalLossCombinesTerms) {
  EXPECT_DOUBLE_EQ(total_loss(2.0, -3.0, 0.5), 0.5);
  ad::Tape t;
  auto v = total_loss(t.constant(Tensor::scalar(2.0)), t.constant(Tensor::scalar(-3.0)), 0.5);
  EXPECT_DOUBLE_EQ(v.value().item(), 0.5);
}

TEST(Uniformity, AntipodalPairAndPermutationInvariance) {
  Rng rng(16);
  Tensor pair = Tensor::matrix(2, 3, {0, 0, 1, 0, 0, -1});
  EXPECT_NEAR(uniformity_loss(pair, 2.0, 1, rng), -8.0, 1e-12);
  Tensor rows = random_unit_table(12, 4, rng);
  std::vector<std::size_t> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  Tensor shuffled = rows;
  for (std::size_t r = 0; r < 12; ++r)
    std::copy(rows.row_span(perm[r]).begin(), rows.row_span(perm[r]).end(), shuffled.row_span(r).begin());
  EXPECT_NEAR(uniformity_loss(rows, 2.0, 1000, rng), uniformity_loss(shuffled, 2.0, 1000, rng), 1e-14);
}

TEST(Uniformity, FiftyPointsOnSphereSpreadMonotonically) {
  Rng rng(17);
  ParamSet params;
  params.add("e", random_unit_table(50, 3, rng));
  const auto pairs = all_pairs(50);
  LossBuilder build = [&](ad::Tape& t, ParamSet& p) {
    return uniformity_loss(ad::normalize_rows(p.bind(t, "e")), pairs, 2.0);
  };
  auto min_dist = [&] {
    Tensor u = normalized_rows(params.value("e"));
    double m = INFINITY;
    for (auto [j, k] : pairs) m = std::min(m, squared_distance(u.row_span(j), u.row_span(k)));
    return std::sqrt(m);
  };
  const double d0 = min_dist();
  AdamConfig adam;
  adam.lr = 0.01;
  double prev = INFINITY;
  for (int step = 0; step < 500; ++step) {
    const double loss = forward_backward(build, params);
    ASSERT_LT(loss, prev) << "step " << step;
    prev = loss;
    adam_step(params, adam);
  }
  EXPECT_GT(min_dist(), d0);
}

TEST(Vmf, UniformAndConcentratedLimitsInSixteenDimensions) {
  const std::size_t d = 16;
  Rng rng(18);
  std::vector<double> mu(d, 0.0);
  mu[3] = 1.0;
  std::vector<double> mean(d, 0.0);
  std::vector<double> prev;
  for (int i = 0; i < 20000; ++i) {
    auto x = vmf_sample({mu, 0.0}, rng);
    EXPECT_NE(x, prev);
    for (std::size_t j = 0; j < d; ++j) mean[j] += x[j] / 20000.0;
    prev = std::move(x);
  }
  EXPECT_LT(l2_norm(mean), 0.03);
  for (int i = 0; i < 1000; ++i) EXPECT_GT(dot(vmf_sample({mu, 1e6}, rng), mu), 0.999);
}

TEST(Vmf, SameItemTwiceGetsIndependentDraws) {
  Rng rng(19);
  auto mu = unit({1, 1, 0, 0, 1});
  Tensor rows = Tensor::matrix(2, 5);
  for (std::size_t r = 0; r < 2; ++r) std::copy(mu.begin(), mu.end(), rows.row_span(r).begin());
  Tensor out = densify_prefix(rows, 250.0, rng);
  EXPECT_NE(std::vector<double>(out.row_span(0).begin(), out.row_span(0).end()),
            std::vector<double>(out.row_span(1).begin(), out.row_span(1).end()));
}

TEST(Vmf, FixedSeedIsDeterministic) {
  auto mu = unit({1, -2, 0.5, 3});
  Rng a(20), b(20);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(vmf_sample({mu, 250.0}, a), vmf_sample({mu, 250.0}, b));
}

TEST(FakeTargets, SentinelBetaAndSymmetricPair) {
  Rng rng(21);
  Tensor t = random_unit_table(8, 3, rng);
  FakeTargetConfig cfg{0.1, 1.1, 10, 250.0};
  auto y = sample_fake_targets(2, t, cfg, rng);
  ASSERT_EQ(y.entries.size(), 1u);
  EXPECT_EQ(y.weight(2), 1.0);

  // items 1 and 2 sit at the same angle on either side of the target; item 3 is below beta
  Tensor sym = Tensor::matrix(4, 2, {1, 0, std::cos(0.4), std::sin(0.4), std::cos(0.4), -std::sin(0.4), -1, 0});
  auto z = sample_fake_targets(0, sym, {0.1, 0.0, 10, 250.0}, rng);
  ASSERT_EQ(z.entries.size(), 3u);
  EXPECT_NEAR(z.weight(1), 0.05, 1e-12);
  EXPECT_NEAR(z.weight(2), 0.05, 1e-12);
  EXPECT_NEAR(z.weight(0), 0.9, 1e-12);
  EXPECT_EQ(z.weight(3), 0.0);
}

TEST(FakeTargets, WeightsMatchFormulaOverSampledSet) {
  Rng rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.index(49);
    Tensor t = random_unit_table(n, 2 + rng.index(6), rng);
    FakeTargetConfig cfg{rng.uniform(0.0, 0.5), rng.uniform(-1.0, 1.0), rng.index(21), rng.uniform(0.0, 300.0)};
    const auto target = static_cast<ItemIndex>(rng.index(n));
    auto y = sample_fake_targets(target, t, cfg, rng);
    double total = 0.0;
    for (const auto& [j, w] : y.entries) {
      EXPECT_GE(w, 0.0);
      total += w;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    if (y.entries.size() == 1) continue;
    // brute force: denominator over the sampled set, without max shifting
    long double denom = 0.0L;
    for (std::size_t k = 1; k < y.entries.size(); ++k)
      denom += std::exp(static_cast<long double>(cfg.kappa) * dot(t.row_span(y.entries[k].first), t.row_span(target)));
    for (std::size_t k = 1; k < y.entries.size(); ++k) {
      const auto j = y.entries[k].first;
      EXPECT_NE(j, target);
      const double c = dot(t.row_span(j), t.row_span(target));
      EXPECT_GE(c, cfg.beta);
      const long double expect = cfg.alpha * std::exp(static_cast<long double>(cfg.kappa) * c) / denom;
      EXPECT_NEAR(y.entries[k].second, static_cast<double>(expect), 1e-12);
    }
  }
}

TEST(SoftCe, MinimisedWhenPredictionEqualsTargets) {
  SoftTargets y{{{0, 0.6}, {1, 0.3}, {2, 0.1}}};
  const double entropy = -(0.6 * std::log(0.6) + 0.3 * std::log(0.3) + 0.1 * std::log(0.1));
  EXPECT_NEAR(soft_ce_loss(std::vector<double>{0.6, 0.3, 0.1}, y), entropy, 1e-15);
  for (int a = 1; a < 100; ++a)
    for (int b = 1; a + b < 100; ++b) {
      std::vector<double> p{a / 100.0, b / 100.0, (100 - a - b) / 100.0};
      EXPECT_GE(soft_ce_loss(p, y), entropy - 1e-15);
    }
}

TEST(SoftCe, TotalLossGradientIsSumOfComponents) {
  EXPECT_DOUBLE_EQ(total_loss(2.0, -8.0, 0.5), -2.0);
  EXPECT_DOUBLE_EQ(total_loss(2.0, -8.0, 0.0), 2.0);
  Rng rng(23);
  ParamSet params;
  params.add("z", uniform_tensor({2, 10}, 1.0, rng));
  std::vector<SoftTargets> ys{SoftTargets{{{3, 0.9}, {7, 0.1}}}, SoftTargets::one_hot(0)};
  const auto pairs = all_pairs(2);
  LossBuilder rec = [&](ad::Tape& t, ParamSet& p) { return soft_ce_loss(ad::softmax_rows(p.bind(t, "z")), ys); };
  LossBuilder unif = [&](ad::Tape& t, ParamSet& p) {
    return uniformity_loss(ad::normalize_rows(p.bind(t, "z")), pairs, 2.0);
  };
  LossBuilder both = [&](ad::Tape& t, ParamSet& p) { return total_loss(rec(t, p), unif(t, p), 0.5); };
  forward_backward(rec, params);
  Tensor g = params.grad("z");
  params.zero_grad();
  forward_backward(unif, params);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += 0.5 * params.grad("z")[i];
  params.zero_grad();
  forward_backward(both, params);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(params.grad("z")[i], g[i], 1e-14);
  EXPECT_TRUE(grad_check(both, params, 1e-6).passed());
}

TEST(FakeTargets, InfiniteKappaTakesClosestCandidates) {
  Rng rng(23);
  Tensor t = Tensor::matrix(4, 2, {1, 0, std::cos(0.3), std::sin(0.3), std::cos(0.9), std::sin(0.9), 0, -1});
  auto y = sample_fake_targets(0, t, {0.1, 0.0, 2, INFINITY}, rng);
  ASSERT_EQ(y.entries.size(), 3u);
  EXPECT_EQ(y.entries[1].first, 1u);
  EXPECT_EQ(y.entries[2].first, 2u);
  EXPECT_NEAR(y.weight(0), 0.9, 1e-15);
  EXPECT_NEAR(y.weight(1), 0.1, 1e-15);
  EXPECT_EQ(y.weight(2), 0.0);
  EXPECT_NEAR(y.sum(), 1.0, 1e-15);
}
