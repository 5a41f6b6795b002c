#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include "cizsl/checkpoint.hpp"
#include "cizsl/data.hpp"
#include "cizsl/error.hpp"
#include "json.hpp"

using namespace cizsl;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("cizsl_data_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

SyntheticConfig small_config(SplitMode split = SplitMode::Hard, std::uint64_t seed = 1) {
  SyntheticConfig c;
  c.super_categories = 4;
  c.classes_per_super = 3;
  c.instances_per_class = 10;
  c.text_dim = 6;
  c.feature_dim = 5;
  c.split = split;
  c.seed = seed;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void expect_load_error(const std::function<void()>& f, const std::string& fragment) {
  try {
    f();
    ADD_FAILURE() << "no error raised";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LoadError);
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(Dataset, SaveLoadRoundTripIsExact) {
  TempDir dir;
  const ZslDataset ds = make_synthetic(small_config());
  save_dataset(ds, dir.path() / "toy.json");
  const ZslDataset back = load_dataset(dir.path() / "toy.json");
  EXPECT_TRUE(back == ds);
  // Same bytes on a second save.
  save_dataset(back, dir.path() / "again.json");
  EXPECT_EQ(slurp(dir.path() / "toy.features.czfd"), slurp(dir.path() / "again.features.czfd"));
}

TEST(Dataset, ManifestUsesFixedFieldNames) {
  TempDir dir;
  save_dataset(make_synthetic(small_config()), dir.path() / "toy.json");
  const auto j = nlohmann::json::parse(slurp(dir.path() / "toy.json"));
  for (const char* key : {"classes", "features_blob", "labels_blob"}) EXPECT_TRUE(j.contains(key)) << key;
  for (const char* key : {"id", "name", "super", "seen", "descriptor_blob", "descriptor_row"})
    EXPECT_TRUE(j["classes"][0].contains(key)) << key;
}

TEST(Dataset, MissingBlob) {
  TempDir dir;
  save_dataset(make_synthetic(small_config()), dir.path() / "toy.json");
  fs::remove(dir.path() / "toy.labels.czfd");
  expect_load_error([&] { load_dataset(dir.path() / "toy.json"); }, "missing blob");
}

TEST(Dataset, DanglingLabel) {
  ZslDataset ds = make_synthetic(small_config());
  ds.test_labels[0] = 999;
  expect_load_error([&] { ds.validate(); }, "dangling label 999");
}

TEST(Dataset, DuplicateClassId) {
  TempDir dir;
  save_dataset(make_synthetic(small_config()), dir.path() / "toy.json");
  auto j = nlohmann::json::parse(slurp(dir.path() / "toy.json"));
  j["classes"][1]["id"] = j["classes"][0]["id"];
  std::ofstream(dir.path() / "toy.json") << j.dump();
  expect_load_error([&] { load_dataset(dir.path() / "toy.json"); }, "duplicate class-id");
}

TEST(Dataset, UnseenClassWithTrainingInstances) {
  ZslDataset ds = make_synthetic(small_config());
  ds.train_labels[0] = ds.unseen_ids().front();
  expect_load_error([&] { ds.validate(); }, "has training instances");
}

TEST(Blob, MatrixAndLabelRoundTrip) {
  TempDir dir;
  MatrixXd m(3, 2);
  m << 1.5, -0.0, 1e-300, 7, 3.25, -9;
  write_matrix_blob(dir.path() / "m.czfd", m);
  const MatrixXd back = read_matrix_blob(dir.path() / "m.czfd");
  EXPECT_EQ(std::memcmp(back.data(), m.data(), sizeof(double) * 6), 0);
  write_label_blob(dir.path() / "l.czfd", {4, 0, 4294967295u});
  EXPECT_EQ(read_label_blob(dir.path() / "l.czfd"), (std::vector<ClassId>{4, 0, 4294967295u}));
}

TEST(Blob, CorruptMagicVersionAndLength) {
  TempDir dir;
  write_matrix_blob(dir.path() / "m.czfd", MatrixXd::Ones(2, 2));
  std::string bytes = slurp(dir.path() / "m.czfd");
  auto rewrite = [&](std::string b) { std::ofstream(dir.path() / "m.czfd", std::ios::binary) << b; };

  std::string bad = bytes;
  bad[0] = 'X';
  rewrite(bad);
  expect_load_error([&] { read_matrix_blob(dir.path() / "m.czfd"); }, "bad magic");
  bad = bytes;
  bad[4] = 2;
  rewrite(bad);
  expect_load_error([&] { read_matrix_blob(dir.path() / "m.czfd"); }, "unsupported blob version");
  rewrite(bytes.substr(0, bytes.size() - 3));
  expect_load_error([&] { read_matrix_blob(dir.path() / "m.czfd"); }, "truncated");
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  RngStream rng(3, Stream::Init);
  GeneratorArch g;
  g.text_dim = 4;
  g.noise_dim = 3;
  g.text_embed_dim = 5;
  g.hidden = {6, 7};
  g.output_dim = 8;
  g.output_activation = Activation::Sigmoid;
  const auto gen = Generator<double>::create(g, rng);
  const auto disc = Discriminator<double>::create({8, {9}, 3, 0.1}, rng);
  save_checkpoint(dir.path() / "a.czsl", gen, disc);
  const NetworkPair back = load_checkpoint(dir.path() / "a.czsl");
  EXPECT_EQ(back.generator.params(), gen.params());
  EXPECT_EQ(back.discriminator.params(), disc.params());
  EXPECT_EQ(back.generator.noise_dim(), 3);
  EXPECT_EQ(back.generator.trunk().layers().back().activation, Activation::Sigmoid);
  EXPECT_EQ(back.discriminator.net().layers().front().slope, 0.1);
  save_checkpoint(dir.path() / "b.czsl", back.generator, back.discriminator);
  EXPECT_EQ(slurp(dir.path() / "a.czsl"), slurp(dir.path() / "b.czsl"));
}

TEST(Checkpoint, RejectsCorruption) {
  TempDir dir;
  RngStream rng(4, Stream::Init);
  GeneratorArch g;
  g.text_dim = 2;
  g.noise_dim = 1;
  g.output_dim = 3;
  save_checkpoint(dir.path() / "a.czsl", Generator<double>::create(g, rng),
                  Discriminator<double>::create({3, {4}, 2, 0.2}, rng));
  const std::string bytes = slurp(dir.path() / "a.czsl");
  auto rewrite = [&](std::string b) { std::ofstream(dir.path() / "a.czsl", std::ios::binary) << b; };
  std::string bad = bytes;
  bad[1] = '?';
  rewrite(bad);
  expect_load_error([&] { load_checkpoint(dir.path() / "a.czsl"); }, "bad magic");
  bad = bytes;
  bad[4] = 9;
  rewrite(bad);
  expect_load_error([&] { load_checkpoint(dir.path() / "a.czsl"); }, "unsupported");
  rewrite(bytes.substr(0, bytes.size() - 8));
  expect_load_error([&] { load_checkpoint(dir.path() / "a.czsl"); }, "truncated");
  rewrite(bytes + "x");
  expect_load_error([&] { load_checkpoint(dir.path() / "a.czsl"); }, "trailing");
  expect_load_error([&] { load_checkpoint(dir.path() / "nope.czsl"); }, "missing checkpoint");
}

TEST(ClassMeans, Cases) {
  MatrixXd x(3, 2);
  x << 0, 0, 2, 4, 9, 9;
  const auto c = class_means(x, {1, 1, 5}, {1, 5});
  EXPECT_EQ(c.centers.row(0), (Eigen::RowVector2d() << 1, 2).finished());
  EXPECT_EQ(c.centers.row(1), (Eigen::RowVector2d() << 9, 9).finished());
  try {
    class_means(x, {1, 1, 5}, {1, 6});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
}

TEST(ClassMeans, MatchesBruteForce) {
  const ZslDataset ds = make_synthetic(small_config());
  const auto seen = ds.seen_ids();
  const auto c = class_means(ds, seen);
  for (std::size_t k = 0; k < seen.size(); ++k) {
    VectorXd sum = VectorXd::Zero(ds.feature_dim());
    int n = 0;
    for (std::size_t i = 0; i < ds.train_labels.size(); ++i)
      if (ds.train_labels[i] == seen[k]) sum += ds.train_features.row(static_cast<Eigen::Index>(i)).transpose(), ++n;
    EXPECT_LT((c.centers.row(static_cast<Eigen::Index>(k)).transpose() - sum / n).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Synthetic, HardSplitHoldsOutWholeSuperCategories) {
  const ZslDataset ds = make_synthetic(small_config(SplitMode::Hard));
  std::set<std::uint32_t> seen_supers, unseen_supers;
  for (const auto& c : ds.classes) (c.seen ? seen_supers : unseen_supers).insert(c.super_category);
  EXPECT_FALSE(unseen_supers.empty());
  for (auto s : unseen_supers) EXPECT_FALSE(seen_supers.count(s));
}

TEST(Synthetic, EasySplitSharesSuperCategories) {
  const ZslDataset ds = make_synthetic(small_config(SplitMode::Easy));
  std::set<std::uint32_t> seen_supers;
  for (const auto& c : ds.classes)
    if (c.seen) seen_supers.insert(c.super_category);
  ASSERT_FALSE(ds.unseen_ids().empty());
  for (const auto& c : ds.classes)
    if (!c.seen) EXPECT_TRUE(seen_supers.count(c.super_category));
}

TEST(Synthetic, ZeroNoiseLinearMapIsExact) {
  SyntheticConfig cfg = small_config();
  cfg.descriptor_noise = 0.0;
  cfg.feature_noise = 0.0;
  cfg.nonlinear = false;
  const ZslDataset ds = make_synthetic(cfg);
  for (std::size_t i = 1; i < ds.train_labels.size(); ++i)
    if (ds.train_labels[i] == ds.train_labels[i - 1])
      EXPECT_EQ(ds.train_features.row(static_cast<Eigen::Index>(i)),
                ds.train_features.row(static_cast<Eigen::Index>(i - 1)));
}

TEST(Synthetic, DeterministicPerSeed) {
  EXPECT_TRUE(make_synthetic(small_config(SplitMode::Hard, 5)) == make_synthetic(small_config(SplitMode::Hard, 5)));
  EXPECT_FALSE(make_synthetic(small_config(SplitMode::Hard, 5)).classes[0].descriptor ==
               make_synthetic(small_config(SplitMode::Hard, 6)).classes[0].descriptor);
}

TEST(Synthetic, ZeroUnseenClassesIsInvalidConfig) {
  SyntheticConfig cfg = small_config();
  cfg.unseen_fraction = 0.05;
  try {
    make_synthetic(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig);
  }
}

TEST(Synthetic, HardUnseenClassesAreFartherFromSeen) {
  double hard = 0.0, easy = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (SplitMode mode : {SplitMode::Hard, SplitMode::Easy}) {
      SyntheticConfig cfg = small_config(mode, seed);
      cfg.super_categories = 8;
      cfg.classes_per_super = 4;
      const ZslDataset ds = make_synthetic(cfg);
      double total = 0.0;
      for (ClassId u : ds.unseen_ids()) {
        double best = INFINITY;
        for (ClassId s : ds.seen_ids())
          best = std::min(best, (ds.class_info(u).descriptor - ds.class_info(s).descriptor).norm());
        total += best;
      }
      (mode == SplitMode::Hard ? hard : easy) += total / static_cast<double>(ds.unseen_ids().size());
    }
  }
  EXPECT_GT(hard, easy);
}

TEST(SplitTrainVal, TenSeenClassesSplitEightTwo) {
  SyntheticConfig cfg = small_config();
  cfg.super_categories = 7;  // 5 seen supers x 2 classes
  cfg.classes_per_super = 2;
  cfg.unseen_fraction = 2.0 / 7.0;
  const ZslDataset ds = make_synthetic(cfg);
  ASSERT_EQ(ds.seen_ids().size(), 10u);
  const auto split = split_train_val(ds, 0.8, 3);
  EXPECT_EQ(split.train.seen_ids().size(), 8u);
  EXPECT_EQ(split.train.unseen_ids().size(), 2u);
  EXPECT_EQ(split.val.seen_ids().size(), 2u);

  const auto train_ids = split.train.seen_ids();
  std::set<ClassId> train(train_ids.begin(), train_ids.end());
  const auto val_ids = split.val.seen_ids();
  std::set<ClassId> val(val_ids.begin(), val_ids.end());
  std::set<ClassId> all(train);
  all.insert(val.begin(), val.end());
  const auto seen = ds.seen_ids();
  EXPECT_EQ(all, std::set<ClassId>(seen.begin(), seen.end()));
  for (ClassId v : val) EXPECT_FALSE(train.count(v));
  split.train.validate();
  split.val.validate();
}

TEST(SplitTrainVal, DeterministicAndErrors) {
  const ZslDataset ds = make_synthetic(small_config());
  EXPECT_TRUE(split_train_val(ds, 0.8, 4).train == split_train_val(ds, 0.8, 4).train);
  try {
    split_train_val(ds, 0.99, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidSplit);
  }
}

TEST(SplitModes, NamesRoundTrip) {
  EXPECT_EQ(parse_split_mode("easy"), SplitMode::Easy);
  EXPECT_EQ(parse_split_mode(to_string(SplitMode::Hard)), SplitMode::Hard);
}
