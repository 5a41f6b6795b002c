#include "cizsl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cizsl/error.hpp"

namespace cizsl {

namespace {

void check_labels(const std::vector<Eigen::Index>& labels, Eigen::Index num_classes, Eigen::Index rows,
                  const char* who) {
  require(static_cast<Eigen::Index>(labels.size()) == rows, ErrorKind::InvalidInput,
          std::string(who) + ": one label per row required");
  for (Eigen::Index l : labels)
    require(l >= 0 && l < num_classes, ErrorKind::InvalidInput,
            std::string(who) + ": label " + std::to_string(l) + " outside the seen classes");
}

// Gradient of -mean log softmax_y(logits) w.r.t. the logits, scaled by `weight`.
MatrixXd cross_entropy_grad(const MatrixXd& probs, const std::vector<Eigen::Index>& labels, double weight) {
  MatrixXd grad = probs;
  for (std::size_t i = 0; i < labels.size(); ++i) grad(static_cast<Eigen::Index>(i), labels[i]) -= 1.0;
  return grad * (weight / static_cast<double>(labels.size()));
}

double mean_log_prob(const MatrixXd& logits, const std::vector<Eigen::Index>& labels) {
  const MatrixXd logp = log_softmax_rows(logits);
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) sum += logp(static_cast<Eigen::Index>(i), labels[i]);
  return sum / static_cast<double>(labels.size());
}

}  // namespace

std::string_view to_string(AlphaMode mode) {
  switch (mode) {
    case AlphaMode::Fixed: return "fixed-0.5";
    case AlphaMode::Uniform01: return "uniform-0-1";
    case AlphaMode::Uniform0208: return "uniform-0.2-0.8";
    case AlphaMode::Normal: return "normal";
  }
  return "unknown";
}

AlphaMode parse_alpha_mode(std::string_view name) {
  for (auto m : {AlphaMode::Fixed, AlphaMode::Uniform01, AlphaMode::Uniform0208, AlphaMode::Normal})
    if (to_string(m) == name) return m;
  fail(ErrorKind::InvalidConfig, "unknown alpha mode '" + std::string(name) + "'");
}

double sample_alpha(RngStream& rng, AlphaMode mode) {
  switch (mode) {
    case AlphaMode::Fixed: return 0.5;
    case AlphaMode::Uniform01: return sample_uniform(rng, 0.0, 1.0);
    case AlphaMode::Uniform0208: return sample_uniform(rng, 0.2, 0.8);
    case AlphaMode::Normal: return std::clamp(0.5 + (0.5 / 3.0) * sample_standard_normal(rng), 0.0, 1.0);
  }
  return 0.5;
}

VectorXd interpolate_text(const VectorXd& t_a, const VectorXd& t_b, double alpha) {
  require(t_a.size() == t_b.size(), ErrorKind::InvalidInput, "hallucinate_text: descriptor dimensions differ");
  return alpha * t_a + (1.0 - alpha) * t_b;
}

VectorXd hallucinate_text(const VectorXd& t_a, const VectorXd& t_b, RngStream& rng, AlphaMode mode) {
  return interpolate_text(t_a, t_b, sample_alpha(rng, mode));
}

CreativityResult creativity_loss(const Gen& generator, const Disc& discriminator, const HallucinatedBatch& batch,
                                 const DivParams& divergence, const CreativityOptions& options) {
  const Eigen::Index m = batch.texts.rows();
  require(m >= 1, ErrorKind::InvalidInput, "creativity_loss: empty batch");
  require(options.lambda >= 0.0, ErrorKind::InvalidConfig, "creativity_loss: lambda must be >= 0");
  divergence.validate();

  Gen::Cache gen_cache;
  const MatrixXd features = generator.forward(batch.texts, batch.noise, &gen_cache);
  Disc::Cache disc_cache;
  const auto out = discriminator.forward(features, &disc_cache);

  CreativityResult r;
  r.raw_entropy.resize(m);
  std::vector<DivergenceGrads<double>> grads;
  grads.reserve(static_cast<std::size_t>(m));
  const MatrixXd probs = softmax_rows(out.logits);
  for (Eigen::Index i = 0; i < m; ++i) {
    grads.push_back(entropy_loss_le_grads<double>(probs.row(i).transpose(), divergence));
    r.raw_entropy[i] = grads.back().value;
  }
  r.extremes = options.frozen_extremes ? *options.frozen_extremes : batch_extremes(r.raw_entropy);
  const double scale = r.extremes.scale();
  const double inv_m = 1.0 / static_cast<double>(m);

  r.realness = options.realness_term ? -out.real.mean() : 0.0;
  r.entropy = options.lambda * batch_minmax_normalize(r.raw_entropy, std::optional(r.extremes)).mean();
  r.value = r.realness + r.entropy;

  const VectorXd d_real = VectorXd::Constant(m, options.realness_term ? -inv_m : 0.0);
  MatrixXd d_logits = MatrixXd::Zero(m, out.logits.cols());
  r.grad_divergence = VectorXd::Zero(2);
  const double weight = options.lambda * scale * inv_m;
  if (weight != 0.0) {
    const double gamma = divergence.gamma();
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& g = grads[static_cast<std::size_t>(i)];
      d_logits.row(i) = weight * softmax_backward<double>(probs.row(i).transpose(), g.d_p).transpose();
      if (divergence.learn_gamma) r.grad_divergence[0] += weight * gamma * g.d_gamma;
      if (divergence.learn_beta) r.grad_divergence[1] += weight * g.d_beta;
    }
  }
  r.grad_features = discriminator.backward(disc_cache, d_real, d_logits).input;
  r.grad_generator = generator.backward(gen_cache, r.grad_features);
  return r;
}

PivotResult visual_pivot_features(const MatrixXd& generated, const std::vector<Eigen::Index>& labels,
                                  const MatrixXd& class_centers) {
  check_labels(labels, class_centers.rows(), generated.rows(), "visual_pivot");
  require(generated.cols() == class_centers.cols(), ErrorKind::InvalidInput, "visual_pivot: dimension mismatch");
  const Eigen::Index k = class_centers.rows();
  MatrixXd sums = MatrixXd::Zero(k, generated.cols());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sums.row(labels[i]) += generated.row(static_cast<Eigen::Index>(i));
    counts[static_cast<std::size_t>(labels[i])] += 1;
  }
  const auto present = static_cast<double>(std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }));
  PivotResult r;
  r.grad_features = MatrixXd::Zero(generated.rows(), generated.cols());
  if (present == 0.0) return r;
  MatrixXd diff(k, generated.cols());
  for (Eigen::Index c = 0; c < k; ++c) {
    const int n = counts[static_cast<std::size_t>(c)];
    if (n == 0) continue;
    diff.row(c) = sums.row(c) / n - class_centers.row(c);
    r.value += diff.row(c).squaredNorm();
  }
  r.value /= present;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Eigen::Index c = labels[i];
    r.grad_features.row(static_cast<Eigen::Index>(i)) =
        diff.row(c) * (2.0 / (counts[static_cast<std::size_t>(c)] * present));
  }
  return r;
}

PivotResult visual_pivot(const Gen& generator, const SeenBatch& batch, const MatrixXd& class_centers) {
  Gen::Cache cache;
  const MatrixXd generated = generator.forward(batch.texts, batch.noise, &cache);
  PivotResult r = visual_pivot_features(generated, batch.labels, class_centers);
  r.grad_generator = generator.backward(cache, r.grad_features);
  return r;
}

GeneratorLossResult generator_loss(const Gen& generator, const Disc& discriminator, const SeenBatch& seen,
                                   const HallucinatedBatch& hallucinated, const DivParams& divergence,
                                   const MatrixXd& class_centers, const GeneratorLossOptions& options) {
  const Eigen::Index m = seen.texts.rows();
  require(m >= 1, ErrorKind::InvalidInput, "generator_loss: empty seen batch");
  check_labels(seen.labels, discriminator.num_classes(), m, "generator_loss");

  Gen::Cache gen_cache;
  const MatrixXd features = generator.forward(seen.texts, seen.noise, &gen_cache);
  Disc::Cache disc_cache;
  const auto out = discriminator.forward(features, &disc_cache);

  GeneratorLossResult r;
  r.seen_realness = -out.real.mean();
  r.seen_class = -mean_log_prob(out.logits, seen.labels);
  const VectorXd d_real = VectorXd::Constant(m, -1.0 / static_cast<double>(m));
  const MatrixXd d_logits = cross_entropy_grad(softmax_rows(out.logits), seen.labels, 1.0);
  MatrixXd d_features = discriminator.backward(disc_cache, d_real, d_logits).input;
  if (options.visual_pivot) {
    const PivotResult pivot = visual_pivot_features(features, seen.labels, class_centers);
    r.pivot = pivot.value;
    d_features += pivot.grad_features;
  }
  r.grad_generator = generator.backward(gen_cache, d_features);
  r.grad_divergence = VectorXd::Zero(2);

  const bool creative = options.creativity.realness_term || options.creativity.lambda != 0.0;
  if (creative) {
    r.creativity = creativity_loss(generator, discriminator, hallucinated, divergence, options.creativity);
    r.grad_generator += r.creativity.grad_generator;
    r.grad_divergence = r.creativity.grad_divergence;
  }
  r.value = r.creativity.value + r.seen_realness + r.seen_class + r.pivot;
  return r;
}

DiscriminatorLossResult discriminator_loss_on(const Disc& discriminator, const RealBatch& real,
                                              const MatrixXd& fake, const std::vector<Eigen::Index>& fake_labels,
                                              const VectorXd& epsilons, double gp_weight) {
  const Eigen::Index m = real.features.rows();
  require(m >= 1, ErrorKind::InvalidInput, "discriminator_loss: empty batch");
  require(fake.rows() == m && epsilons.size() == m, ErrorKind::InvalidInput,
          "discriminator_loss: real, fake and epsilon batches must align");
  require(gp_weight >= 0.0, ErrorKind::InvalidConfig, "discriminator_loss: gp weight must be >= 0");
  check_labels(real.labels, discriminator.num_classes(), m, "discriminator_loss");
  check_labels(fake_labels, discriminator.num_classes(), m, "discriminator_loss");

  const double inv_m = 1.0 / static_cast<double>(m);
  Disc::Cache real_cache, fake_cache;
  const auto real_out = discriminator.forward(real.features, &real_cache);
  const auto fake_out = discriminator.forward(fake, &fake_cache);

  DiscriminatorLossResult r;
  r.wasserstein_gap = real_out.real.mean() - fake_out.real.mean();
  r.real_class = -mean_log_prob(real_out.logits, real.labels);
  r.fake_class = -mean_log_prob(fake_out.logits, fake_labels);

  MatrixXd interpolates(m, fake.cols());
  for (Eigen::Index i = 0; i < m; ++i)
    interpolates.row(i) = epsilons[i] * real.features.row(i) + (1.0 - epsilons[i]) * fake.row(i);
  const auto penalty = discriminator.gradient_penalty(interpolates);
  r.penalty = penalty.penalty;
  r.value = -r.wasserstein_gap + gp_weight * r.penalty + 0.5 * r.real_class + 0.5 * r.fake_class;

  r.grad_discriminator =
      discriminator
          .backward(real_cache, VectorXd::Constant(m, -inv_m),
                    cross_entropy_grad(softmax_rows(real_out.logits), real.labels, 0.5))
          .params;
  r.grad_discriminator += discriminator
                              .backward(fake_cache, VectorXd::Constant(m, inv_m),
                                        cross_entropy_grad(softmax_rows(fake_out.logits), fake_labels, 0.5))
                              .params;
  r.grad_discriminator += gp_weight * penalty.param_grad;
  return r;
}

DiscriminatorLossResult discriminator_loss(const Disc& discriminator, const Gen& generator, const RealBatch& real,
                                           const SeenBatch& seen, const VectorXd& epsilons, double gp_weight) {
  const MatrixXd fake = generator.forward(seen.texts, seen.noise);
  return discriminator_loss_on(discriminator, real, fake, seen.labels, epsilons, gp_weight);
}

}  // namespace cizsl
