#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cizsl/data.hpp"
#include "cizsl/eval.hpp"
#include "cizsl/losses.hpp"

namespace cizsl {

struct TrainConfig {
  double lambda = 1.0;
  int critic_steps = 5;
  int steps = 3000;
  int batch_size = 64;
  AdamConfig<double> adam{0.001, 0.5, 0.9, 1e-8};
  AlphaMode alpha_mode = AlphaMode::Uniform0208;
  DivParams divergence = DivParams::sharma_mittal(0.5, 0.5, true);
  double gp_weight = 10.0;
  bool hallucinated_realness = true;
  bool visual_pivot = true;
  Eigen::Index noise_dim = 16;
  Eigen::Index text_embed_dim = 64;
  std::vector<Eigen::Index> generator_hidden = {128};
  std::vector<Eigen::Index> discriminator_hidden = {128};
  std::uint64_t seed = 0;

  /// Creativity terms off: the plain conditional WGAN-GP baseline.
  TrainConfig baseline() const {
    TrainConfig c = *this;
    c.lambda = 0.0;
    c.hallucinated_realness = false;
    return c;
  }

  void validate() const;
};

struct HistoryRow {
  int iteration = 0;
  double generator_loss = 0.0;
  double discriminator_loss = 0.0;  // mean over the critic steps
  double mean_entropy = 0.0;        // raw L_e over the hallucinated batch
  double gamma = 0.0;
  double beta = 0.0;
  double wasserstein_gap = 0.0;     // last critic step
};

struct TrainedModel {
  Gen generator;
  Disc discriminator;
  DivParams divergence;
  std::vector<ClassId> seen_classes;  // discriminator class index -> class-id
  std::vector<HistoryRow> history;
};

/// Called after iteration `iteration` with the model as of that point.
using TrainObserver = std::function<void(int iteration, const TrainedModel& model)>;

/// Alternating optimization: per loop, n_d critic Adam steps on L_D, one
/// generator Adam step on L_G, one Adam step on the divergence parameters
/// when they are learnable. Deterministic in (dataset, config).
TrainedModel train(const ZslDataset& dataset, const TrainConfig& config, const TrainObserver& observer = {},
                   int observe_every = 0);

/// iteration,generator_loss,discriminator_loss,mean_entropy_loss,gamma,beta
void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& history);
std::string history_csv(const std::vector<HistoryRow>& history);

struct EvalOptions {
  int samples_per_center = 60;
  Metric metric = Metric::L2;
  int grid_size = 201;
  std::uint64_t seed = 0;
};

struct EvalReport {
  double top1 = 0.0;
  SeenUnseenCurve curve;
  CurvePoint uncalibrated;  // c = 0
  double h_mean = 0.0;
  ClassCenters seen_centers;
  ClassCenters unseen_centers;
};

/// Real centers for seen classes, synthesized centers for unseen classes,
/// scored on the dataset's test instances.
EvalReport evaluate_gzsl(const Gen& generator, const ZslDataset& dataset, const EvalOptions& options);

struct CrossValidationOptions {
  double ratio = 0.8;
  int eval_interval = 100;
  EvalOptions eval;
  unsigned threads = 1;
};

struct LambdaScore {
  double lambda = 0.0;
  int iteration = 0;
  double auc = 0.0;
};

struct LambdaSelection {
  double best_lambda = 0.0;
  double best_auc = 0.0;
  int best_iteration = 0;  // checkpoint where best_auc was recorded
  std::vector<LambdaScore> table;  // grid order, then checkpoint order
};

/// Trains once per lambda on the training-class split and scores validation
/// SU-AUC at every checkpoint; the best checkpoint decides, ties to the
/// smaller lambda.
LambdaSelection cross_validate_lambda(const ZslDataset& dataset, const TrainConfig& config,
                                      const std::vector<double>& grid, const CrossValidationOptions& options = {});

void write_lambda_table_csv(const std::filesystem::path& path, const LambdaSelection& selection);

/// CIZSL_THREADS, clamped to [1, hardware threads]; 1 when unset.
unsigned thread_cap();

}  // namespace cizsl
