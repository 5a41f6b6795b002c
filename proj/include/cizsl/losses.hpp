#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "cizsl/divergence.hpp"
#include "cizsl/net.hpp"
#include "cizsl/rng.hpp"

namespace cizsl {

using Gen = Generator<double>;
using Disc = Discriminator<double>;
using DivParams = DivergenceParams<double>;

/// How the interpolation weight of a hallucinated descriptor is drawn.
enum class AlphaMode { Fixed, Uniform01, Uniform0208, Normal };

std::string_view to_string(AlphaMode mode);
AlphaMode parse_alpha_mode(std::string_view name);

/// fixed 0.5, U(0,1), U(0.2,0.8), or N(0.5, 0.5/3) clamped to [0, 1].
double sample_alpha(RngStream& rng, AlphaMode mode);

/// alpha * t_a + (1 - alpha) * t_b with alpha drawn per `mode`.
VectorXd hallucinate_text(const VectorXd& t_a, const VectorXd& t_b, RngStream& rng, AlphaMode mode);
VectorXd interpolate_text(const VectorXd& t_a, const VectorXd& t_b, double alpha);

/// Generator inputs for one batch. Labels are seen-class indices in [0, K).
struct SeenBatch {
  MatrixXd texts;
  std::vector<Eigen::Index> labels;
  MatrixXd noise;
};

struct HallucinatedBatch {
  MatrixXd texts;
  MatrixXd noise;
};

struct RealBatch {
  MatrixXd features;
  std::vector<Eigen::Index> labels;
};

struct CreativityOptions {
  double lambda = 1.0;
  bool realness_term = true;
  /// Extremes for the L_e normalization; computed from the batch when unset.
  std::optional<MinMax<double>> frozen_extremes;
};

struct CreativityResult {
  double value = 0.0;
  double realness = 0.0;     // -mean D^r(G(t^h, z))
  double entropy = 0.0;      // lambda * mean of normalized L_e
  VectorXd raw_entropy;      // per-sample L_e before normalization
  MinMax<double> extremes;
  VectorXd grad_generator;
  VectorXd grad_divergence;  // w.r.t. DivParams::raw()
  MatrixXd grad_features;    // w.r.t. G(t^h, z), before the generator backward
};

/// Hallucinated-text term: realness of G(t^h, z) plus lambda times the
/// batch-normalized divergence of D's seen-class softmax from uniform.
CreativityResult creativity_loss(const Gen& generator, const Disc& discriminator, const HallucinatedBatch& batch,
                                 const DivParams& divergence, const CreativityOptions& options = {});

struct PivotResult {
  double value = 0.0;
  MatrixXd grad_features;
  VectorXd grad_generator;
};

/// (1/K') sum_k || mean of generated rows of class k - center_k ||^2 over the
/// K' classes present in the batch.
PivotResult visual_pivot_features(const MatrixXd& generated, const std::vector<Eigen::Index>& labels,
                                  const MatrixXd& class_centers);
PivotResult visual_pivot(const Gen& generator, const SeenBatch& batch, const MatrixXd& class_centers);

struct GeneratorLossOptions {
  CreativityOptions creativity;
  bool visual_pivot = true;
};

struct GeneratorLossResult {
  double value = 0.0;
  CreativityResult creativity;
  double seen_realness = 0.0;  // -mean D^r(G(t^s, z))
  double seen_class = 0.0;     // -mean log softmax_y
  double pivot = 0.0;
  VectorXd grad_generator;
  VectorXd grad_divergence;
};

/// Four-term generator objective; `hallucinated` may be empty when both
/// creativity terms are disabled.
GeneratorLossResult generator_loss(const Gen& generator, const Disc& discriminator, const SeenBatch& seen,
                                   const HallucinatedBatch& hallucinated, const DivParams& divergence,
                                   const MatrixXd& class_centers, const GeneratorLossOptions& options);

struct DiscriminatorLossResult {
  double value = 0.0;
  double wasserstein_gap = 0.0;  // mean D^r(real) - mean D^r(fake)
  double penalty = 0.0;          // mean L_Lip before weighting
  double real_class = 0.0;
  double fake_class = 0.0;
  VectorXd grad_discriminator;
};

/// Critic objective with the gradient penalty at eps * x + (1 - eps) * fake.
/// `epsilons` holds one interpolation weight per sample.
DiscriminatorLossResult discriminator_loss(const Disc& discriminator, const Gen& generator, const RealBatch& real,
                                           const SeenBatch& seen, const VectorXd& epsilons, double gp_weight);

/// Same objective against precomputed fake features.
DiscriminatorLossResult discriminator_loss_on(const Disc& discriminator, const RealBatch& real,
                                              const MatrixXd& fake, const std::vector<Eigen::Index>& fake_labels,
                                              const VectorXd& epsilons, double gp_weight);

}  // namespace cizsl
