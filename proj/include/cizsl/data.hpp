#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cizsl/numerics.hpp"

namespace cizsl {

using ClassId = std::uint32_t;

struct ClassInfo {
  ClassId id = 0;
  std::string name;
  std::uint32_t super_category = 0;
  bool seen = true;
  VectorXd descriptor;

  bool operator==(const ClassInfo&) const = default;
};

/// Seen/unseen split with per-instance features.
///
/// Training instances belong to seen classes only. Test instances may come
/// from any class and are what the evaluation stack scores.
struct ZslDataset {
  std::vector<ClassInfo> classes;
  MatrixXd train_features;
  std::vector<ClassId> train_labels;
  MatrixXd test_features;
  std::vector<ClassId> test_labels;

  /// Throws Error(LoadError) naming the first violated invariant.
  void validate() const;

  const ClassInfo& class_info(ClassId id) const;
  bool has_class(ClassId id) const;
  std::vector<ClassId> seen_ids() const;
  std::vector<ClassId> unseen_ids() const;
  Eigen::Index feature_dim() const;
  Eigen::Index text_dim() const;
  /// Descriptor rows for the given classes, in order.
  MatrixXd descriptors(const std::vector<ClassId>& ids) const;

  bool operator==(const ZslDataset& other) const;
};

/// Per-class center vectors, rows aligned with `ids` (ascending).
struct ClassCenters {
  enum class Source { Real, Generated };

  std::vector<ClassId> ids;
  MatrixXd centers;
  Source source = Source::Real;
  int samples_per_class = 0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(ids.size()); }
  Eigen::Index row_of(ClassId id) const;
  bool contains(ClassId id) const;
};

/// Arithmetic mean of the rows of `features` labelled with each requested
/// class. An empty class is an invalid-input error.
ClassCenters class_means(const MatrixXd& features, const std::vector<ClassId>& labels,
                         std::vector<ClassId> ids);
/// Means over the training instances of `dataset`.
ClassCenters class_means(const ZslDataset& dataset, const std::vector<ClassId>& ids);

// On-disk format ------------------------------------------------------------

inline constexpr char kBlobMagic[4] = {'C', 'Z', 'F', 'D'};
inline constexpr std::uint16_t kBlobVersion = 1;

void write_matrix_blob(const std::filesystem::path& path, const MatrixXd& m);
MatrixXd read_matrix_blob(const std::filesystem::path& path);
void write_label_blob(const std::filesystem::path& path, const std::vector<ClassId>& labels);
std::vector<ClassId> read_label_blob(const std::filesystem::path& path);

/// Writes `<manifest>` (JSON) plus blobs next to it.
void save_dataset(const ZslDataset& dataset, const std::filesystem::path& manifest);
ZslDataset load_dataset(const std::filesystem::path& manifest);

// Synthetic benchmark -------------------------------------------------------

enum class SplitMode { Easy, Hard };

struct SyntheticConfig {
  int super_categories = 8;
  int classes_per_super = 4;
  int instances_per_class = 50;
  int text_dim = 32;
  int feature_dim = 48;
  double prototype_scale = 1.0;
  double descriptor_noise = 0.5;
  double feature_noise = 0.3;
  bool nonlinear = true;
  SplitMode split = SplitMode::Hard;
  double unseen_fraction = 0.25;
  double test_fraction = 0.2;  // of each seen class's instances
  std::uint64_t seed = 0;

  void validate() const;
};

/// Super-category prototypes, noisy class descriptors, features from a fixed
/// random map of the descriptor. Hard mode holds out whole super-categories;
/// easy mode holds out classes inside every super-category.
ZslDataset make_synthetic(const SyntheticConfig& config);

/// Class-level split of the seen classes. `train` keeps every seen class of
/// the input: the training fraction stays seen (with a held-out share of
/// their instances moved to test), the validation classes become
/// pseudo-unseen with all their instances in test, and the original unseen
/// classes are dropped. `val` holds the validation classes as seen classes.
struct TrainValSplit {
  ZslDataset train;
  ZslDataset val;
};
TrainValSplit split_train_val(const ZslDataset& dataset, double ratio, std::uint64_t seed,
                              double seen_holdout = 0.2);

std::string_view to_string(SplitMode mode);
SplitMode parse_split_mode(std::string_view name);

}  // namespace cizsl
