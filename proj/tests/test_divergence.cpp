#include <gtest/gtest.h>

#include <cmath>

#include "cizsl/divergence.hpp"
#include "cizsl/error.hpp"
#include "cizsl/rng.hpp"

using namespace cizsl;
using Div = DivergenceParams<double>;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

VectorXd random_simplex(RngStream& rng, Eigen::Index k) {
  VectorXd v(k);
  for (Eigen::Index i = 0; i < k; ++i) v[i] = sample_uniform(rng, 0.05, 1.0);
  return v / v.sum();
}

// Brute-force loops, independent of the library helpers.
double kl_oracle(const VectorXd& p, const VectorXd& q) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

double power_sum_oracle(const VectorXd& p, const VectorXd& q, double g) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) s += std::pow(p[i], g) * std::pow(q[i], 1.0 - g);
  return s;
}

double expect_kind(ErrorKind kind, const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind);
    return 1.0;
  }
  ADD_FAILURE() << "no error raised";
  return 0.0;
}

}  // namespace

TEST(SharmaMittal, IdenticalDistributionsGiveZero) {
  const VectorXd p = vec({0.3, 0.7});
  for (double g : {0.3, 0.5, 2.0})
    for (double b : {-0.5, 0.5, 2.5}) EXPECT_NEAR(sm_divergence(p, p, Div::sharma_mittal(g, b)), 0.0, 1e-12);
  for (const Div& d : {Div::kl(), Div::renyi(2.0), Div::tsallis(0.4), Div::bhattacharyya()})
    EXPECT_NEAR(sm_divergence(p, p, d), 0.0, 1e-12);
}

TEST(SharmaMittal, NamedMembersByHand) {
  const VectorXd p = vec({0.5, 0.5}), q = vec({0.25, 0.75});
  EXPECT_NEAR(sm_divergence(p, q, Div::kl()), 0.5 * std::log(4.0 / 3.0), 1e-12);
  EXPECT_NEAR(sm_divergence(p, q, Div::renyi(2.0)), std::log(4.0 / 3.0), 1e-12);
  EXPECT_NEAR(sm_divergence(p, q, Div::tsallis(2.0)), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(sm_divergence(vec({1.0, 0.0}), vec({0.5, 0.5}), Div::bhattacharyya()), -std::log(std::sqrt(0.5)),
              1e-12);
  EXPECT_NEAR(sm_divergence(p, q, Div::kl()), 0.143841, 1e-6);
  EXPECT_NEAR(sm_divergence(vec({1.0, 0.0}), vec({0.5, 0.5}), Div::bhattacharyya()), 0.346574, 1e-6);
}

TEST(SharmaMittal, ClosedFormAgainstOracle) {
  RngStream rng(3, Stream::Init);
  for (int t = 0; t < 50; ++t) {
    const VectorXd p = random_simplex(rng, 5), q = random_simplex(rng, 5);
    const double g = sample_uniform(rng, 0.1, 3.0), b = sample_uniform(rng, -1.0, 3.0);
    const double expected = (std::pow(power_sum_oracle(p, q, g), (1 - b) / (1 - g)) - 1) / (b - 1);
    EXPECT_NEAR(sm_divergence(p, q, Div::sharma_mittal(g, b)), expected, 1e-10);
  }
}

TEST(SharmaMittal, LimitsAtSmallEpsilon) {
  RngStream rng(4, Stream::Init);
  const double eps = 1e-6;
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(sample_index(rng, 15));
    const VectorXd p = random_simplex(rng, k), q = random_simplex(rng, k);
    const double g = sample_uniform(rng, 0.2, 2.5);
    EXPECT_NEAR(sharma_mittal_closed_form<double>(p, q, 1 + eps, 1 - eps), kl_oracle(p, q), 1e-5);
    EXPECT_NEAR(sharma_mittal_closed_form<double>(p, q, g, 1 + eps), std::log(power_sum_oracle(p, q, g)) / (g - 1),
                1e-5);
    EXPECT_NEAR(sharma_mittal_closed_form<double>(p, q, g, g), (power_sum_oracle(p, q, g) - 1) / (g - 1), 1e-9);
    double bc = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) bc += std::sqrt(p[i] * q[i]);
    EXPECT_NEAR(2.0 * -std::log(bc), sharma_mittal_closed_form<double>(p, q, 0.5, 1 + eps), 1e-5);
  }
}

TEST(SharmaMittal, GuardDispatchIsContinuous) {
  RngStream rng(5, Stream::Init);
  const VectorXd p = random_simplex(rng, 6), q = random_simplex(rng, 6);
  // Just inside and just outside the guard band differ by O(guard).
  const double inside = sm_divergence(p, q, Div::sharma_mittal(1.0 + 0.9e-3, 0.4));
  const double outside = sm_divergence(p, q, Div::sharma_mittal(1.0 + 1.1e-3, 0.4));
  EXPECT_NEAR(inside, outside, 2e-3);
  const double b_in = sm_divergence(p, q, Div::sharma_mittal(0.6, 1.0 + 0.9e-3));
  const double b_out = sm_divergence(p, q, Div::sharma_mittal(0.6, 1.0 + 1.1e-3));
  EXPECT_NEAR(b_in, b_out, 2e-3);
}

TEST(SharmaMittal, NonNegative) {
  RngStream rng(6, Stream::Init);
  for (int t = 0; t < 10000; ++t) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(sample_index(rng, 8));
    const VectorXd p = random_simplex(rng, k), q = random_simplex(rng, k);
    double g = sample_uniform(rng, 0.1, 3.0), b = sample_uniform(rng, -1.0, 3.0);
    if (std::abs(g - 1) < 1e-3) g += 2e-3;
    if (std::abs(b - 1) < 1e-3) b += 2e-3;
    ASSERT_GE(sm_divergence(p, q, Div::sharma_mittal(g, b)), -1e-12);
  }
}

TEST(SharmaMittal, Errors) {
  const VectorXd p = vec({0.5, 0.5});
  expect_kind(ErrorKind::DivergenceUndefined,
              [&] { sm_divergence(p, vec({1.0, 0.0}), Div::sharma_mittal(0.5, 0.5)); });
  expect_kind(ErrorKind::InvalidInput, [&] { sm_divergence(p, vec({0.2, 0.3, 0.5}), Div::kl()); });
  Div bad = Div::kl();
  bad.learn_gamma = true;
  expect_kind(ErrorKind::InvalidConfig, [&] { bad.validate(); });
  Div renyi = Div::renyi(2.0);
  renyi.learn_beta = true;
  expect_kind(ErrorKind::InvalidConfig, [&] { renyi.validate(); });
}

TEST(SharmaMittalGrads, ProjectedGradientVanishesAtEquality) {
  const VectorXd p = vec({0.2, 0.3, 0.5});
  for (const Div& d : {Div::sharma_mittal(0.5, 0.5), Div::sharma_mittal(2.0, 1.5), Div::kl(), Div::renyi(0.7),
                       Div::tsallis(1.8), Div::bhattacharyya()}) {
    const VectorXd g = sm_divergence_grads(p, p, d).d_p;
    const VectorXd projected = g.array() - g.mean();
    EXPECT_LT(projected.cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(SharmaMittalGrads, MatchFiniteDifferences) {
  RngStream rng(7, Stream::Init);
  for (int t = 0; t < 20; ++t) {
    const VectorXd p = random_simplex(rng, 4), q = random_simplex(rng, 4);
    const Div d = t % 2 == 0 ? Div::sharma_mittal(sample_uniform(rng, 0.2, 0.9), sample_uniform(rng, -0.5, 0.8))
                             : Div::sharma_mittal(sample_uniform(rng, 1.2, 2.5), sample_uniform(rng, 1.2, 2.5));
    const auto grads = sm_divergence_grads(p, q, d);
    // d_p is the free partial: perturb p off the simplex through the closed form.
    const VectorXd dp = finite_diff_gradient<double>(
        [&](const VectorXd& x) {
          return (std::pow(power_sum_oracle(x, q, d.gamma()), (1 - d.beta()) / (1 - d.gamma())) - 1) /
                 (d.beta() - 1);
        },
        p, 1e-6);
    EXPECT_LT(relative_error<double>(grads.d_p, dp), 1e-4);
    VectorXd gb(2);
    gb << grads.d_gamma, grads.d_beta;
    VectorXd at(2);
    at << d.gamma(), d.beta();
    const VectorXd numeric = finite_diff_gradient<double>(
        [&](const VectorXd& v) { return sm_divergence(p, q, Div::sharma_mittal(v[0], v[1])); }, at, 1e-6);
    EXPECT_LT(relative_error<double>(gb, numeric), 1e-4);
  }
}

TEST(SharmaMittalGrads, TsallisGammaAlongConstraint) {
  RngStream rng(8, Stream::Init);
  const VectorXd p = random_simplex(rng, 5), q = random_simplex(rng, 5);
  for (double g : {0.4, 1.7}) {
    const auto grads = sm_divergence_grads(p, q, Div::tsallis(g));
    const double numeric = (tsallis_divergence<double>(p, q, g + 1e-6) - tsallis_divergence<double>(p, q, g - 1e-6)) / 2e-6;
    EXPECT_NEAR(grads.d_gamma, numeric, 1e-4 * std::abs(numeric) + 1e-9);
    EXPECT_EQ(grads.d_beta, 0.0);
  }
}

TEST(EntropyLoss, ZeroExactlyAtUniform) {
  for (const Div& d : {Div::sharma_mittal(0.5, 0.5), Div::kl(), Div::renyi(2.0), Div::tsallis(0.5),
                       Div::bhattacharyya()}) {
    EXPECT_NEAR(entropy_loss_le(uniform_distribution<double>(4), d), 0.0, 1e-12);
    EXPECT_GT(entropy_loss_le(vec({0.4, 0.2, 0.2, 0.2}), d), 1e-9);
  }
}

TEST(EntropyLoss, OneHotKl) {
  EXPECT_NEAR(entropy_loss_le(vec({1.0, 0.0, 0.0, 0.0}), Div::kl()), std::log(4.0), 1e-12);
  expect_kind(ErrorKind::InvalidInput, [] { entropy_loss_le(vec({1.0}), Div::kl()); });
}

TEST(MinMaxNormalize, Cases) {
  EXPECT_EQ(batch_minmax_normalize(vec({2, 4, 6})), vec({0, 0.5, 1}));
  EXPECT_EQ(batch_minmax_normalize(vec({3, 3})), vec({0.5, 0.5}));
  EXPECT_EQ(batch_minmax_normalize(vec({7})), vec({0.5}));
  EXPECT_EQ(batch_extremes(vec({3, 3})).scale(), 0.0);
}

TEST(DivergenceParams, RawRoundTripAndNames) {
  Div d = Div::sharma_mittal(0.7, 0.2, true);
  Div e = d;
  e.set_raw(d.raw());
  EXPECT_DOUBLE_EQ(e.gamma(), 0.7);
  EXPECT_DOUBLE_EQ(e.beta(), 0.2);
  for (auto m : {DivergenceMode::SharmaMittal, DivergenceMode::KL, DivergenceMode::Renyi, DivergenceMode::Tsallis,
                 DivergenceMode::Bhattacharyya})
    EXPECT_EQ(parse_divergence_mode(to_string(m)), m);
  expect_kind(ErrorKind::InvalidConfig, [] { parse_divergence_mode("hellinger"); });
}
