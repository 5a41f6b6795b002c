#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cizsl/data.hpp"
#include "cizsl/train.hpp"

namespace cizsl {

/// Everything one CLI run needs. Exactly one of `dataset` / `synthetic` is set.
struct ExperimentConfig {
  std::optional<std::filesystem::path> dataset;
  std::optional<SyntheticConfig> synthetic;
  TrainConfig train;
  EvalOptions eval;
  std::vector<double> retrieval_ratios = {0.25, 0.5, 1.0};
  std::vector<double> lambda_grid = {0.01, 0.1, 1.0, 10.0};
  CrossValidationOptions cross_validation;
  std::filesystem::path out = "run";

  void validate() const;
  /// The configured dataset: loaded from disk or generated.
  ZslDataset load_data() const;
};

/// Defaults with a synthetic dataset.
ExperimentConfig default_experiment_config();

/// Keys absent from `text` keep their defaults; unknown keys and type errors
/// raise InvalidConfig naming the field.
ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Pretty-printed JSON with every field.
std::string experiment_config_json(const ExperimentConfig& config);

}  // namespace cizsl
