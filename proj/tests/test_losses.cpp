#include <gtest/gtest.h>

#include <cmath>

#include "cizsl/error.hpp"
#include "cizsl/gradcheck.hpp"
#include "cizsl/losses.hpp"

using namespace cizsl;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

struct Fixture {
  Gen generator;
  Disc discriminator;
  HallucinatedBatch hallucinated;
  SeenBatch seen;
  MatrixXd centers;
};

Fixture fixture(std::uint64_t seed, Eigen::Index k = 3) {
  RngStream rng(seed, Stream::Init);
  GeneratorArch g;
  g.text_dim = 4;
  g.noise_dim = 2;
  g.text_embed_dim = 3;
  g.hidden = {6};
  g.output_dim = 5;
  Fixture f{Gen::create(g, rng), Disc::create({5, {6}, k, 0.2}, rng), {}, {}, MatrixXd::Zero(0, 0)};
  f.hallucinated.texts = sample_gaussian(rng, 6, 4);
  f.hallucinated.noise = sample_gaussian(rng, 6, 2);
  f.seen.texts = sample_gaussian(rng, 6, 4);
  f.seen.noise = sample_gaussian(rng, 6, 2);
  for (Eigen::Index i = 0; i < 6; ++i) f.seen.labels.push_back(i % k);
  f.centers = sample_gaussian(rng, k, 5).cwiseAbs();
  return f;
}

// Critic = one linear layer: row 0 is the real head, the rest are class logits.
Disc linear_disc(const MatrixXd& w, const VectorXd& b) {
  Layer<double> l;
  l.weight = w;
  l.bias = b;
  l.activation = Activation::Identity;
  return Disc(Mlp<double>({l}));
}

template <typename F>
void expect_kind(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "no error raised";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

}  // namespace

TEST(HallucinateText, FixedModeIsMidpoint) {
  RngStream rng(1, Stream::Alpha);
  EXPECT_EQ(hallucinate_text(vec({1, 0}), vec({0, 1}), rng, AlphaMode::Fixed), vec({0.5, 0.5}));
}

TEST(HallucinateText, RangeEndpoints) {
  const VectorXd a = vec({1, 2}), b = vec({-3, 5});
  EXPECT_LT((interpolate_text(a, b, 0.2) - (0.2 * a + 0.8 * b)).norm(), 1e-15);
  EXPECT_LT((interpolate_text(a, b, 0.8) - (0.8 * a + 0.2 * b)).norm(), 1e-15);
}

TEST(HallucinateText, SwapSymmetry) {
  RngStream rng(2, Stream::Alpha);
  for (int i = 0; i < 100; ++i) {
    const VectorXd a = sample_gaussian(rng, 5), b = sample_gaussian(rng, 5);
    const double alpha = sample_uniform(rng, 0.0, 1.0);
    EXPECT_LT((interpolate_text(a, b, alpha) - interpolate_text(b, a, 1.0 - alpha)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(HallucinateText, DimensionMismatch) {
  expect_kind(ErrorKind::InvalidInput, [] { interpolate_text(vec({1, 2}), vec({1}), 0.5); });
}

TEST(AlphaModes, EmpiricalStatistics) {
  RngStream rng(7, Stream::Alpha);
  struct Expect {
    AlphaMode mode;
    double lo, hi;
  };
  for (const Expect& e : {Expect{AlphaMode::Uniform0208, 0.2, 0.8}, Expect{AlphaMode::Uniform01, 0.0, 1.0},
                          Expect{AlphaMode::Normal, 0.0, 1.0}, Expect{AlphaMode::Fixed, 0.5, 0.5}}) {
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const double a = sample_alpha(rng, e.mode);
      ASSERT_GE(a, e.lo);
      ASSERT_LE(a, e.hi);
      if (e.mode != AlphaMode::Fixed && e.mode != AlphaMode::Normal) ASSERT_LT(a, e.hi);
      sum += a;
    }
    EXPECT_NEAR(sum / 10000.0, 0.5, 0.01) << to_string(e.mode);
  }
}

TEST(AlphaModes, NamesRoundTrip) {
  for (auto m : {AlphaMode::Fixed, AlphaMode::Uniform01, AlphaMode::Uniform0208, AlphaMode::Normal})
    EXPECT_EQ(parse_alpha_mode(to_string(m)), m);
  expect_kind(ErrorKind::InvalidConfig, [] { parse_alpha_mode("beta"); });
}

TEST(CreativityLoss, ZeroLambdaIsNegatedRealness) {
  auto f = fixture(1);
  CreativityOptions opts;
  opts.lambda = 0.0;
  const auto r = creativity_loss(f.generator, f.discriminator, f.hallucinated, DivParams::kl(), opts);
  const auto out = f.discriminator.forward(f.generator.forward(f.hallucinated.texts, f.hallucinated.noise));
  EXPECT_NEAR(r.value, -out.real.mean(), 1e-14);
  EXPECT_EQ(r.entropy, 0.0);
}

TEST(CreativityLoss, UniformClassHeadGivesConstantHalf) {
  auto f = fixture(2);
  // Keep the real head, zero the class head.
  MatrixXd w = MatrixXd::Zero(4, 5);
  w.row(0) = VectorXd::Ones(5).transpose();
  const Disc d = linear_disc(w, VectorXd::Zero(4));
  CreativityOptions opts;
  opts.lambda = 3.0;
  opts.realness_term = false;
  const auto r = creativity_loss(f.generator, d, f.hallucinated, DivParams::sharma_mittal(0.5, 0.5), opts);
  EXPECT_DOUBLE_EQ(r.value, 1.5);
  EXPECT_EQ(r.grad_generator, VectorXd::Zero(f.generator.num_params()));
}

TEST(CreativityLoss, EmptyBatchIsInvalidInput) {
  auto f = fixture(3);
  HallucinatedBatch empty{MatrixXd(0, 4), MatrixXd(0, 2)};
  expect_kind(ErrorKind::InvalidInput,
              [&] { creativity_loss(f.generator, f.discriminator, empty, DivParams::kl(), {}); });
}

TEST(VisualPivot, ExactCentersGiveZero) {
  MatrixXd centers(2, 2);
  centers << 1, 2, 3, 4;
  MatrixXd generated(3, 2);
  generated << 1, 2, 3, 4, 1, 2;
  EXPECT_EQ(visual_pivot_features(generated, {0, 1, 0}, centers).value, 0.0);
}

TEST(VisualPivot, OneDimensionalByHand) {
  MatrixXd generated(2, 1);
  generated << 1, 3;
  EXPECT_DOUBLE_EQ(visual_pivot_features(generated, {0, 0}, MatrixXd::Constant(1, 1, 5.0)).value, 9.0);
}

TEST(VisualPivot, AbsentClassesAreSkipped) {
  MatrixXd generated(1, 1);
  generated << 1;
  MatrixXd centers(3, 1);
  centers << 4, 100, 100;
  EXPECT_DOUBLE_EQ(visual_pivot_features(generated, {0}, centers).value, 9.0);
}

TEST(GeneratorLoss, BaselineIsSumOfThreeTerms) {
  auto f = fixture(4);
  GeneratorLossOptions opts;
  opts.creativity.lambda = 0.0;
  opts.creativity.realness_term = false;
  const auto r = generator_loss(f.generator, f.discriminator, f.seen, HallucinatedBatch{}, DivParams::kl(), f.centers,
                                opts);
  const auto out = f.discriminator.forward(f.generator.forward(f.seen.texts, f.seen.noise));
  const MatrixXd logp = log_softmax_rows(out.logits);
  double ce = 0.0;
  for (Eigen::Index i = 0; i < 6; ++i) ce -= logp(i, f.seen.labels[static_cast<std::size_t>(i)]) / 6.0;
  const double pivot = visual_pivot(f.generator, f.seen, f.centers).value;
  EXPECT_NEAR(r.value, -out.real.mean() + ce + pivot, 1e-12);
  EXPECT_EQ(r.creativity.value, 0.0);
  EXPECT_EQ(r.grad_divergence, VectorXd::Zero(2));
}

TEST(GeneratorLoss, PerfectClassifierHasNoClassificationCost) {
  auto f = fixture(5);
  MatrixXd w = MatrixXd::Zero(4, 5);
  VectorXd b = VectorXd::Zero(4);
  b[1] = 1000.0;  // class 0 always wins
  for (auto& l : f.seen.labels) l = 0;
  const auto r = generator_loss(f.generator, linear_disc(w, b), f.seen, f.hallucinated, DivParams::kl(), f.centers,
                                {});
  EXPECT_EQ(r.seen_class, 0.0);
}

TEST(GeneratorLoss, LabelOutsideSeenRange) {
  auto f = fixture(6);
  f.seen.labels[0] = 3;
  expect_kind(ErrorKind::InvalidInput, [&] {
    generator_loss(f.generator, f.discriminator, f.seen, f.hallucinated, DivParams::kl(), f.centers, {});
  });
}

TEST(DiscriminatorLoss, UnitCriticOnIdenticalBatchesIsLogK) {
  const Eigen::Index k = 4;
  MatrixXd w = MatrixXd::Zero(1 + k, 3);
  w.row(0) << 0.6, 0.0, 0.8;
  const Disc d = linear_disc(w, VectorXd::Zero(1 + k));
  RngStream rng(8, Stream::Init);
  RealBatch real{sample_gaussian(rng, 5, 3), {0, 1, 2, 3, 0}};
  VectorXd eps(5);
  for (Eigen::Index i = 0; i < 5; ++i) eps[i] = sample_uniform(rng, 0.0, 1.0);
  const auto r = discriminator_loss_on(d, real, real.features, real.labels, eps, 10.0);
  EXPECT_NEAR(r.wasserstein_gap, 0.0, 1e-15);
  EXPECT_NEAR(r.penalty, 0.0, 1e-15);
  EXPECT_NEAR(r.value, std::log(static_cast<double>(k)), 1e-12);
}

TEST(DiscriminatorLoss, SameNetSameDistributionGapNearZero) {
  auto f = fixture(9);
  RngStream rng(10, Stream::Noise);
  // Real features drawn from the generator itself.
  const MatrixXd texts = f.seen.texts.replicate(200, 1);
  std::vector<Eigen::Index> labels;
  for (int r = 0; r < 200; ++r) labels.insert(labels.end(), f.seen.labels.begin(), f.seen.labels.end());
  RealBatch real{f.generator.forward(texts, sample_gaussian(rng, texts.rows(), 2)), labels};
  SeenBatch seen{texts, labels, sample_gaussian(rng, texts.rows(), 2)};
  const auto r = discriminator_loss(f.discriminator, f.generator, real, seen, VectorXd::Constant(texts.rows(), 0.5),
                                    0.0);
  EXPECT_LT(std::abs(r.wasserstein_gap), 0.05);
}

TEST(DiscriminatorLoss, MisalignedBatchesRejected) {
  auto f = fixture(11);
  RealBatch real{MatrixXd::Zero(3, 5), {0, 1, 2}};
  expect_kind(ErrorKind::InvalidInput, [&] {
    discriminator_loss(f.discriminator, f.generator, real, f.seen, VectorXd::Zero(3), 10.0);
  });
}

TEST(GradientContract, EveryLossPasses) {
  const auto report = run_gradcheck({});
  EXPECT_GE(report.total_configs(), 20);
  for (const auto& e : report.entries) EXPECT_TRUE(e.passed()) << e.name << " " << e.max_rel_error;
  EXPECT_TRUE(report.passed());
}

TEST(GradientContract, CorruptedGradientsFail) {
  GradCheckOptions opts;
  opts.corrupt = true;
  EXPECT_FALSE(run_gradcheck(opts).passed());
}
