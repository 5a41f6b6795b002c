#include <algorithm>
#include <cmath>
#include <numeric>

#include "cizsl/data.hpp"
#include "cizsl/error.hpp"
#include "cizsl/rng.hpp"

namespace cizsl {

namespace {

template <typename T>
void shuffle(std::vector<T>& items, RngStream& rng) {
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[sample_index(rng, i)]);
}

int rounded(double v) { return static_cast<int>(std::lround(v)); }

}  // namespace

void SyntheticConfig::validate() const {
  require(super_categories >= 1 && classes_per_super >= 1 && instances_per_class >= 1, ErrorKind::InvalidConfig,
          "synthetic: counts must be >= 1");
  require(text_dim >= 1 && feature_dim >= 1, ErrorKind::InvalidConfig,
          "synthetic: dimensions must be >= 1");
  require(unseen_fraction > 0.0 && unseen_fraction < 1.0, ErrorKind::InvalidConfig,
          "synthetic: unseen_fraction must be in (0, 1)");
  require(test_fraction >= 0.0 && test_fraction < 1.0, ErrorKind::InvalidConfig,
          "synthetic: test_fraction must be in [0, 1)");
  require(descriptor_noise >= 0.0 && feature_noise >= 0.0 && prototype_scale >= 0.0, ErrorKind::InvalidConfig,
          "synthetic: noise scales must be >= 0");
}

ZslDataset make_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  RngStream rng(cfg.seed, Stream::Synthetic);
  const int num_classes = cfg.super_categories * cfg.classes_per_super;

  // Which classes are held out.
  std::vector<bool> unseen(static_cast<std::size_t>(num_classes), false);
  RngStream split_rng(cfg.seed, Stream::Split);
  if (cfg.split == SplitMode::Hard) {
    const int held = rounded(cfg.unseen_fraction * cfg.super_categories);
    require(held >= 1, ErrorKind::InvalidConfig, "synthetic: unseen fraction produces no unseen classes");
    require(held < cfg.super_categories, ErrorKind::InvalidConfig,
            "synthetic: hard split would hold out every super-category");
    std::vector<int> supers(static_cast<std::size_t>(cfg.super_categories));
    std::iota(supers.begin(), supers.end(), 0);
    shuffle(supers, split_rng);
    for (int k = 0; k < held; ++k)
      for (int c = 0; c < cfg.classes_per_super; ++c)
        unseen[static_cast<std::size_t>(supers[static_cast<std::size_t>(k)] * cfg.classes_per_super + c)] = true;
  } else {
    const int held = rounded(cfg.unseen_fraction * cfg.classes_per_super);
    require(held >= 1, ErrorKind::InvalidConfig, "synthetic: unseen fraction produces no unseen classes");
    require(held < cfg.classes_per_super, ErrorKind::InvalidConfig,
            "synthetic: easy split needs a seen class left in every super-category");
    for (int s = 0; s < cfg.super_categories; ++s) {
      std::vector<int> members(static_cast<std::size_t>(cfg.classes_per_super));
      std::iota(members.begin(), members.end(), 0);
      shuffle(members, split_rng);
      for (int k = 0; k < held; ++k)
        unseen[static_cast<std::size_t>(s * cfg.classes_per_super + members[static_cast<std::size_t>(k)])] = true;
    }
  }
  const int num_seen = static_cast<int>(std::count(unseen.begin(), unseen.end(), false));
  require(num_seen >= 2, ErrorKind::InvalidConfig, "synthetic: need at least two seen classes");

  const MatrixXd prototypes = cfg.prototype_scale * sample_gaussian(rng, cfg.super_categories, cfg.text_dim);
  const MatrixXd map = sample_gaussian(rng, cfg.feature_dim, cfg.text_dim) / std::sqrt(static_cast<double>(cfg.text_dim));

  ZslDataset ds;
  std::vector<VectorXd> train_rows, test_rows;
  for (int k = 0; k < num_classes; ++k) {
    ClassInfo c;
    c.id = static_cast<ClassId>(k);
    c.name = "class_" + std::to_string(k);
    c.super_category = static_cast<std::uint32_t>(k / cfg.classes_per_super);
    c.seen = !unseen[static_cast<std::size_t>(k)];
    c.descriptor = prototypes.row(c.super_category).transpose() + cfg.descriptor_noise * sample_gaussian(rng, cfg.text_dim);
    VectorXd mapped = map * c.descriptor;
    if (cfg.nonlinear) mapped = mapped.cwiseMax(0.0);

    const int n_test = c.seen ? rounded(cfg.test_fraction * cfg.instances_per_class) : cfg.instances_per_class;
    for (int i = 0; i < cfg.instances_per_class; ++i) {
      VectorXd x = mapped + cfg.feature_noise * sample_gaussian(rng, cfg.feature_dim);
      if (i < cfg.instances_per_class - n_test) {
        train_rows.push_back(std::move(x));
        ds.train_labels.push_back(c.id);
      } else {
        test_rows.push_back(std::move(x));
        ds.test_labels.push_back(c.id);
      }
    }
    ds.classes.push_back(std::move(c));
  }
  auto stack = [&](const std::vector<VectorXd>& rows) {
    MatrixXd m(static_cast<Eigen::Index>(rows.size()), cfg.feature_dim);
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i];
    return m;
  };
  ds.train_features = stack(train_rows);
  ds.test_features = stack(test_rows);
  ds.validate();
  return ds;
}

TrainValSplit split_train_val(const ZslDataset& dataset, double ratio, std::uint64_t seed, double seen_holdout) {
  require(ratio > 0.0 && ratio < 1.0, ErrorKind::InvalidSplit, "split_train_val: ratio must be in (0, 1)");
  require(seen_holdout >= 0.0 && seen_holdout < 1.0, ErrorKind::InvalidSplit,
          "split_train_val: seen holdout must be in [0, 1)");
  std::vector<ClassId> seen = dataset.seen_ids();
  require(seen.size() >= 2, ErrorKind::InvalidSplit, "split_train_val: need at least two seen classes");
  RngStream rng(seed, Stream::Split);
  shuffle(seen, rng);
  const auto n_train = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(seen.size())));
  require(n_train < seen.size(), ErrorKind::InvalidSplit, "split_train_val: ratio leaves no validation classes");
  require(n_train >= 1, ErrorKind::InvalidSplit, "split_train_val: ratio leaves no training classes");
  std::vector<ClassId> train_ids(seen.begin(), seen.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<ClassId> val_ids(seen.begin() + static_cast<std::ptrdiff_t>(n_train), seen.end());
  std::sort(train_ids.begin(), train_ids.end());
  std::sort(val_ids.begin(), val_ids.end());
  auto is_val = [&](ClassId id) { return std::binary_search(val_ids.begin(), val_ids.end(), id); };

  TrainValSplit out;
  for (const auto& c : dataset.classes) {
    if (!c.seen) continue;
    ClassInfo in_train = c;
    in_train.seen = !is_val(c.id);
    out.train.classes.push_back(std::move(in_train));
    if (is_val(c.id)) out.val.classes.push_back(c);
  }

  // Per class, the trailing share of its training instances becomes seen-test.
  std::vector<Eigen::Index> train_rows, test_rows, val_rows;
  for (ClassId id : seen) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < dataset.train_labels.size(); ++i)
      if (dataset.train_labels[i] == id) rows.push_back(static_cast<Eigen::Index>(i));
    if (is_val(id)) {
      test_rows.insert(test_rows.end(), rows.begin(), rows.end());
      val_rows.insert(val_rows.end(), rows.begin(), rows.end());
      continue;
    }
    if (rows.empty()) continue;
    shuffle(rows, rng);
    auto held = static_cast<std::size_t>(std::lround(seen_holdout * static_cast<double>(rows.size())));
    if (held >= rows.size()) held = rows.size() - 1;
    train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(held), rows.end());
    test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(held));
  }
  for (auto* rows : {&train_rows, &test_rows, &val_rows}) std::sort(rows->begin(), rows->end());

  auto gather = [&](const std::vector<Eigen::Index>& rows, MatrixXd& features, std::vector<ClassId>& labels) {
    features.resize(static_cast<Eigen::Index>(rows.size()), dataset.feature_dim());
    labels.clear();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      features.row(static_cast<Eigen::Index>(i)) = dataset.train_features.row(rows[i]);
      labels.push_back(dataset.train_labels[static_cast<std::size_t>(rows[i])]);
    }
  };
  gather(train_rows, out.train.train_features, out.train.train_labels);
  gather(test_rows, out.train.test_features, out.train.test_labels);
  gather(val_rows, out.val.train_features, out.val.train_labels);
  out.val.test_features.resize(0, dataset.feature_dim());
  out.train.validate();
  out.val.validate();
  return out;
}

}  // namespace cizsl
