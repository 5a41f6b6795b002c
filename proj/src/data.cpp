#include "cizsl/data.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include "json.hpp"

#include "cizsl/error.hpp"

namespace cizsl {

namespace fs = std::filesystem;

namespace {

bool same_matrix(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

[[noreturn]] void load_error(const std::string& what) { fail(ErrorKind::LoadError, what); }

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  U u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

template <typename T>
T get_le(const std::string& buf, std::size_t& pos) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  pos += sizeof(T);
  return static_cast<T>(u);
}

std::string read_file(const fs::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) load_error("missing " + what + ": " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::InvalidInput, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string blob_header(std::uint32_t rows, std::uint32_t cols) {
  std::string out(kBlobMagic, 4);
  put_le<std::uint16_t>(out, kBlobVersion);
  put_le<std::uint32_t>(out, rows);
  put_le<std::uint32_t>(out, cols);
  return out;
}

struct BlobView {
  std::string bytes;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::size_t payload = 0;
};

BlobView open_blob(const fs::path& path, std::size_t element_size) {
  BlobView view;
  view.bytes = read_file(path, "blob");
  if (view.bytes.size() < 14 || std::memcmp(view.bytes.data(), kBlobMagic, 4) != 0)
    load_error("bad magic in blob " + path.string());
  std::size_t pos = 4;
  const auto version = get_le<std::uint16_t>(view.bytes, pos);
  if (version != kBlobVersion) load_error("unsupported blob version " + std::to_string(version) + " in " + path.string());
  view.rows = get_le<std::uint32_t>(view.bytes, pos);
  view.cols = get_le<std::uint32_t>(view.bytes, pos);
  view.payload = pos;
  const std::size_t expected = pos + static_cast<std::size_t>(view.rows) * view.cols * element_size;
  if (view.bytes.size() != expected) load_error("truncated or oversized blob " + path.string());
  return view;
}

}  // namespace

void ZslDataset::validate() const {
  std::set<ClassId> ids;
  for (const auto& c : classes) {
    if (!ids.insert(c.id).second) load_error("duplicate class-id " + std::to_string(c.id));
    if (c.descriptor.size() != text_dim()) load_error("descriptor dimension mismatch for class " + std::to_string(c.id));
    if (!c.descriptor.allFinite()) load_error("non-finite descriptor for class " + std::to_string(c.id));
  }
  if (static_cast<std::size_t>(train_features.rows()) != train_labels.size())
    load_error("training feature rows do not match label count");
  if (static_cast<std::size_t>(test_features.rows()) != test_labels.size())
    load_error("test feature rows do not match label count");
  if (train_features.rows() > 0 && test_features.rows() > 0 && train_features.cols() != test_features.cols())
    load_error("training and test feature dimensions differ");
  if (!train_features.allFinite() || !test_features.allFinite()) load_error("non-finite feature value");
  for (ClassId label : train_labels) {
    if (!ids.count(label)) load_error("dangling label " + std::to_string(label));
    if (!class_info(label).seen) load_error("unseen class " + std::to_string(label) + " has training instances");
  }
  for (ClassId label : test_labels)
    if (!ids.count(label)) load_error("dangling label " + std::to_string(label));
}

const ClassInfo& ZslDataset::class_info(ClassId id) const {
  for (const auto& c : classes)
    if (c.id == id) return c;
  fail(ErrorKind::InvalidInput, "unknown class-id " + std::to_string(id));
}

bool ZslDataset::has_class(ClassId id) const {
  return std::any_of(classes.begin(), classes.end(), [&](const ClassInfo& c) { return c.id == id; });
}

std::vector<ClassId> ZslDataset::seen_ids() const {
  std::vector<ClassId> out;
  for (const auto& c : classes)
    if (c.seen) out.push_back(c.id);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ClassId> ZslDataset::unseen_ids() const {
  std::vector<ClassId> out;
  for (const auto& c : classes)
    if (!c.seen) out.push_back(c.id);
  std::sort(out.begin(), out.end());
  return out;
}

Eigen::Index ZslDataset::feature_dim() const {
  return train_features.rows() > 0 ? train_features.cols() : test_features.cols();
}

Eigen::Index ZslDataset::text_dim() const { return classes.empty() ? 0 : classes.front().descriptor.size(); }

MatrixXd ZslDataset::descriptors(const std::vector<ClassId>& ids) const {
  MatrixXd out(static_cast<Eigen::Index>(ids.size()), text_dim());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = class_info(ids[i]).descriptor;
  return out;
}

bool ZslDataset::operator==(const ZslDataset& o) const {
  return classes == o.classes && same_matrix(train_features, o.train_features) && train_labels == o.train_labels &&
         same_matrix(test_features, o.test_features) && test_labels == o.test_labels;
}

Eigen::Index ClassCenters::row_of(ClassId id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) fail(ErrorKind::InvalidInput, "no center for class-id " + std::to_string(id));
  return static_cast<Eigen::Index>(it - ids.begin());
}

bool ClassCenters::contains(ClassId id) const { return std::binary_search(ids.begin(), ids.end(), id); }

ClassCenters class_means(const MatrixXd& features, const std::vector<ClassId>& labels, std::vector<ClassId> ids) {
  require(static_cast<std::size_t>(features.rows()) == labels.size(), ErrorKind::InvalidInput,
          "class_means: feature rows and labels differ");
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  ClassCenters out;
  out.ids = ids;
  out.centers = MatrixXd::Zero(static_cast<Eigen::Index>(ids.size()), features.cols());
  std::vector<int> counts(ids.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::lower_bound(ids.begin(), ids.end(), labels[i]);
    if (it == ids.end() || *it != labels[i]) continue;
    const auto r = it - ids.begin();
    out.centers.row(r) += features.row(static_cast<Eigen::Index>(i));
    counts[static_cast<std::size_t>(r)] += 1;
  }
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (counts[r] == 0) fail(ErrorKind::InvalidInput, "class_means: class " + std::to_string(ids[r]) + " has no instances");
    out.centers.row(static_cast<Eigen::Index>(r)) /= static_cast<double>(counts[r]);
  }
  out.source = ClassCenters::Source::Real;
  return out;
}

ClassCenters class_means(const ZslDataset& dataset, const std::vector<ClassId>& ids) {
  return class_means(dataset.train_features, dataset.train_labels, ids);
}

void write_matrix_blob(const fs::path& path, const MatrixXd& m) {
  std::string out = blob_header(static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols()));
  out.reserve(out.size() + static_cast<std::size_t>(m.size()) * 8);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
  write_file(path, out);
}

MatrixXd read_matrix_blob(const fs::path& path) {
  BlobView view = open_blob(path, 8);
  MatrixXd m(view.rows, view.cols);
  std::size_t pos = view.payload;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std::bit_cast<double>(get_le<std::uint64_t>(view.bytes, pos));
  return m;
}

void write_label_blob(const fs::path& path, const std::vector<ClassId>& labels) {
  std::string out = blob_header(static_cast<std::uint32_t>(labels.size()), 1);
  for (ClassId l : labels) put_le<std::uint32_t>(out, l);
  write_file(path, out);
}

std::vector<ClassId> read_label_blob(const fs::path& path) {
  BlobView view = open_blob(path, 4);
  if (view.cols != 1) load_error("label blob must have one column: " + path.string());
  std::vector<ClassId> labels(view.rows);
  std::size_t pos = view.payload;
  for (auto& l : labels) l = get_le<std::uint32_t>(view.bytes, pos);
  return labels;
}

void save_dataset(const ZslDataset& dataset, const fs::path& manifest) {
  dataset.validate();
  const fs::path dir = manifest.has_parent_path() ? manifest.parent_path() : fs::path(".");
  if (!dir.empty()) fs::create_directories(dir);
  const std::string stem = manifest.stem().string();
  const std::string descriptors = stem + ".descriptors.czfd";
  const std::string features = stem + ".features.czfd";
  const std::string labels = stem + ".labels.czfd";
  const std::string test_features = stem + ".test_features.czfd";
  const std::string test_labels = stem + ".test_labels.czfd";

  MatrixXd desc(static_cast<Eigen::Index>(dataset.classes.size()), dataset.text_dim());
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < dataset.classes.size(); ++i) {
    const auto& c = dataset.classes[i];
    desc.row(static_cast<Eigen::Index>(i)) = c.descriptor;
    classes.push_back({{"id", c.id},
                       {"name", c.name},
                       {"super", c.super_category},
                       {"seen", c.seen},
                       {"descriptor_blob", descriptors},
                       {"descriptor_row", i}});
  }
  MatrixXd train = dataset.train_features;
  MatrixXd test = dataset.test_features;
  if (train.rows() == 0) train.resize(0, dataset.feature_dim());
  if (test.rows() == 0) test.resize(0, dataset.feature_dim());
  write_matrix_blob(dir / descriptors, desc);
  write_matrix_blob(dir / features, train);
  write_label_blob(dir / labels, dataset.train_labels);
  write_matrix_blob(dir / test_features, test);
  write_label_blob(dir / test_labels, dataset.test_labels);

  nlohmann::ordered_json doc;
  doc["classes"] = classes;
  doc["features_blob"] = features;
  doc["labels_blob"] = labels;
  doc["test_features_blob"] = test_features;
  doc["test_labels_blob"] = test_labels;
  write_file(manifest, doc.dump(2) + "\n");
}

ZslDataset load_dataset(const fs::path& manifest) {
  const std::string text = read_file(manifest, "manifest");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    load_error(std::string("malformed manifest: ") + e.what());
  }
  const fs::path dir = manifest.has_parent_path() ? manifest.parent_path() : fs::path(".");
  auto field = [&](const nlohmann::json& obj, const char* key) -> const nlohmann::json& {
    if (!obj.is_object() || !obj.contains(key)) load_error(std::string("manifest missing field '") + key + "'");
    return obj.at(key);
  };

  ZslDataset ds;
  std::map<std::string, MatrixXd> blob_cache;
  try {
    for (const auto& entry : field(doc, "classes")) {
      ClassInfo c;
      c.id = field(entry, "id").get<ClassId>();
      c.name = field(entry, "name").get<std::string>();
      c.super_category = field(entry, "super").get<std::uint32_t>();
      c.seen = field(entry, "seen").get<bool>();
      const auto blob = field(entry, "descriptor_blob").get<std::string>();
      const auto row = field(entry, "descriptor_row").get<std::size_t>();
      auto it = blob_cache.find(blob);
      if (it == blob_cache.end()) it = blob_cache.emplace(blob, read_matrix_blob(dir / blob)).first;
      if (row >= static_cast<std::size_t>(it->second.rows()))
        load_error("descriptor_row out of range for class " + std::to_string(c.id));
      c.descriptor = it->second.row(static_cast<Eigen::Index>(row)).transpose();
      ds.classes.push_back(std::move(c));
    }
    ds.train_features = read_matrix_blob(dir / field(doc, "features_blob").get<std::string>());
    ds.train_labels = read_label_blob(dir / field(doc, "labels_blob").get<std::string>());
    if (doc.contains("test_features_blob")) {
      ds.test_features = read_matrix_blob(dir / doc.at("test_features_blob").get<std::string>());
      ds.test_labels = read_label_blob(dir / field(doc, "test_labels_blob").get<std::string>());
    } else {
      ds.test_features.resize(0, ds.train_features.cols());
    }
  } catch (const nlohmann::json::exception& e) {
    load_error(std::string("malformed manifest field: ") + e.what());
  }
  ds.validate();
  return ds;
}

std::string_view to_string(SplitMode mode) { return mode == SplitMode::Easy ? "easy" : "hard"; }

SplitMode parse_split_mode(std::string_view name) {
  if (name == "easy") return SplitMode::Easy;
  if (name == "hard") return SplitMode::Hard;
  fail(ErrorKind::InvalidConfig, "unknown split mode '" + std::string(name) + "'");
}

}  // namespace cizsl
