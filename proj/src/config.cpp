#include "cizsl/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cizsl/error.hpp"
#include "json.hpp"

namespace cizsl {

using nlohmann::json;

namespace {

// Reads keys of one JSON object, rejecting anything not consumed.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(ErrorKind::InvalidConfig, "config: '" + label() + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    try {
      out = node_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(ErrorKind::InvalidConfig, "config: field '" + field(key) + "' has the wrong type");
    }
  }

  bool has(const char* key) const { return node_.contains(key); }
  Section child(const char* key) {
    seen_.insert(key);
    return Section(node_.at(key), field(key));
  }
  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : node_.items())
      if (!seen_.count(key)) fail(ErrorKind::InvalidConfig, "config: unknown field '" + field(key.c_str()) + "'");
  }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Parse>
void read_enum(Section& s, const char* key, Parse parse) {
  std::string name;
  s.read(key, name);
  if (name.empty()) return;
  try {
    parse(name);
  } catch (const Error& e) {
    fail(ErrorKind::InvalidConfig, "config: field '" + s.field(key) + "': " + e.what());
  }
}

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) fail(ErrorKind::InvalidConfig, "config: field '" + field + "' " + what);
}

json divergence_json(const DivParams& d) {
  return {{"mode", std::string(to_string(d.mode))}, {"gamma", d.gamma()},      {"beta", d.beta()},
          {"learn_gamma", d.learn_gamma},          {"learn_beta", d.learn_beta}};
}

DivParams divergence_from(Section& s, const DivParams& current) {
  DivergenceMode mode = current.mode;
  double gamma = current.gamma(), beta = current.beta();
  bool learn_gamma = current.learn_gamma, learn_beta = current.learn_beta;
  read_enum(s, "mode", [&](const std::string& n) { mode = parse_divergence_mode(n); });
  s.read("gamma", gamma);
  s.read("beta", beta);
  s.read("learn_gamma", learn_gamma);
  s.read("learn_beta", learn_beta);
  s.finish();
  check(gamma > 0.0 && std::isfinite(gamma), s.field("gamma"), "must be > 0");
  check(std::isfinite(beta), s.field("beta"), "must be finite");
  DivParams d;
  switch (mode) {
    case DivergenceMode::SharmaMittal: d = DivParams::sharma_mittal(gamma, beta); break;
    case DivergenceMode::KL: d = DivParams::kl(); break;
    case DivergenceMode::Renyi: d = DivParams::renyi(gamma); break;
    case DivergenceMode::Tsallis: d = DivParams::tsallis(gamma); break;
    case DivergenceMode::Bhattacharyya: d = DivParams::bhattacharyya(); break;
  }
  d.learn_gamma = learn_gamma;
  d.learn_beta = learn_beta;
  try {
    d.validate();
  } catch (const Error& e) {
    fail(ErrorKind::InvalidConfig, "config: field '" + s.field("mode") + "': " + e.what());
  }
  return d;
}

}  // namespace

void ExperimentConfig::validate() const {
  check(dataset.has_value() != synthetic.has_value(), "dataset",
        "exactly one of 'dataset' and 'synthetic' must be given");
  if (synthetic) synthetic->validate();
  train.validate();
  check(eval.samples_per_center >= 1, "eval.samples_per_center", "must be >= 1");
  check(eval.grid_size >= 2, "eval.grid_size", "must be >= 2");
  for (double r : retrieval_ratios) check(r > 0.0 && r <= 1.0, "eval.retrieval_ratios", "entries must be in (0, 1]");
  check(!lambda_grid.empty(), "lambda_grid", "must not be empty");
  for (double l : lambda_grid) check(l >= 0.0 && std::isfinite(l), "lambda_grid", "entries must be >= 0");
  check(cross_validation.ratio > 0.0 && cross_validation.ratio < 1.0, "cross_validation.ratio", "must be in (0, 1)");
  check(cross_validation.eval_interval >= 1, "cross_validation.eval_interval", "must be >= 1");
}

ZslDataset ExperimentConfig::load_data() const {
  if (dataset) return load_dataset(*dataset);
  require(synthetic.has_value(), ErrorKind::InvalidConfig, "config: no dataset configured");
  return make_synthetic(*synthetic);
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig c;
  c.synthetic = SyntheticConfig{};
  return c;
}

std::string experiment_config_json(const ExperimentConfig& c) {
  json j;
  if (c.dataset) j["dataset"] = c.dataset->string();
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    j["synthetic"] = {{"super_categories", s.super_categories},
                      {"classes_per_super", s.classes_per_super},
                      {"instances_per_class", s.instances_per_class},
                      {"text_dim", s.text_dim},
                      {"feature_dim", s.feature_dim},
                      {"prototype_scale", s.prototype_scale},
                      {"descriptor_noise", s.descriptor_noise},
                      {"feature_noise", s.feature_noise},
                      {"nonlinear", s.nonlinear},
                      {"split", std::string(to_string(s.split))},
                      {"unseen_fraction", s.unseen_fraction},
                      {"test_fraction", s.test_fraction},
                      {"seed", s.seed}};
  }
  const auto& t = c.train;
  j["train"] = {{"lambda", t.lambda},
                {"critic_steps", t.critic_steps},
                {"steps", t.steps},
                {"batch_size", t.batch_size},
                {"learning_rate", t.adam.learning_rate},
                {"adam_beta1", t.adam.beta1},
                {"adam_beta2", t.adam.beta2},
                {"adam_epsilon", t.adam.epsilon},
                {"alpha_mode", std::string(to_string(t.alpha_mode))},
                {"divergence", divergence_json(t.divergence)},
                {"gp_weight", t.gp_weight},
                {"hallucinated_realness", t.hallucinated_realness},
                {"visual_pivot", t.visual_pivot},
                {"noise_dim", t.noise_dim},
                {"text_embed_dim", t.text_embed_dim},
                {"generator_hidden", t.generator_hidden},
                {"discriminator_hidden", t.discriminator_hidden},
                {"seed", t.seed}};
  j["eval"] = {{"samples_per_center", c.eval.samples_per_center},
               {"metric", std::string(to_string(c.eval.metric))},
               {"grid_size", c.eval.grid_size},
               {"retrieval_ratios", c.retrieval_ratios},
               {"seed", c.eval.seed}};
  j["lambda_grid"] = c.lambda_grid;
  j["cross_validation"] = {{"ratio", c.cross_validation.ratio}, {"eval_interval", c.cross_validation.eval_interval}};
  j["out"] = c.out.string();
  return j.dump(2) + "\n";
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::InvalidConfig, std::string("config: malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section s(root, "");

  if (s.has("dataset")) {
    std::string path;
    s.read("dataset", path);
    check(!path.empty(), "dataset", "must be a non-empty path");
    const std::filesystem::path p(path);
    c.dataset = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  }
  if (s.has("synthetic")) {
    SyntheticConfig syn;
    Section n = s.child("synthetic");
    n.read("super_categories", syn.super_categories);
    n.read("classes_per_super", syn.classes_per_super);
    n.read("instances_per_class", syn.instances_per_class);
    n.read("text_dim", syn.text_dim);
    n.read("feature_dim", syn.feature_dim);
    n.read("prototype_scale", syn.prototype_scale);
    n.read("descriptor_noise", syn.descriptor_noise);
    n.read("feature_noise", syn.feature_noise);
    n.read("nonlinear", syn.nonlinear);
    read_enum(n, "split", [&](const std::string& v) { syn.split = parse_split_mode(v); });
    n.read("unseen_fraction", syn.unseen_fraction);
    n.read("test_fraction", syn.test_fraction);
    n.read("seed", syn.seed);
    n.finish();
    c.synthetic = syn;
  }
  if (s.has("train")) {
    TrainConfig& t = c.train;
    Section n = s.child("train");
    n.read("lambda", t.lambda);
    n.read("critic_steps", t.critic_steps);
    n.read("steps", t.steps);
    n.read("batch_size", t.batch_size);
    n.read("learning_rate", t.adam.learning_rate);
    n.read("adam_beta1", t.adam.beta1);
    n.read("adam_beta2", t.adam.beta2);
    n.read("adam_epsilon", t.adam.epsilon);
    read_enum(n, "alpha_mode", [&](const std::string& v) { t.alpha_mode = parse_alpha_mode(v); });
    if (n.has("divergence")) {
      Section d = n.child("divergence");
      t.divergence = divergence_from(d, t.divergence);
    }
    n.read("gp_weight", t.gp_weight);
    n.read("hallucinated_realness", t.hallucinated_realness);
    n.read("visual_pivot", t.visual_pivot);
    n.read("noise_dim", t.noise_dim);
    n.read("text_embed_dim", t.text_embed_dim);
    n.read("generator_hidden", t.generator_hidden);
    n.read("discriminator_hidden", t.discriminator_hidden);
    n.read("seed", t.seed);
    n.finish();
    check(t.lambda >= 0.0, n.field("lambda"), "must be >= 0");
    check(t.critic_steps >= 1, n.field("critic_steps"), "must be >= 1");
    check(t.steps >= 0, n.field("steps"), "must be >= 0");
    check(t.batch_size >= 2, n.field("batch_size"), "must be >= 2");
    check(t.noise_dim >= 1, n.field("noise_dim"), "must be >= 1");
  }
  if (s.has("eval")) {
    Section n = s.child("eval");
    n.read("samples_per_center", c.eval.samples_per_center);
    read_enum(n, "metric", [&](const std::string& v) { c.eval.metric = parse_metric(v); });
    n.read("grid_size", c.eval.grid_size);
    n.read("retrieval_ratios", c.retrieval_ratios);
    n.read("seed", c.eval.seed);
    n.finish();
  }
  s.read("lambda_grid", c.lambda_grid);
  if (s.has("cross_validation")) {
    Section n = s.child("cross_validation");
    n.read("ratio", c.cross_validation.ratio);
    n.read("eval_interval", c.cross_validation.eval_interval);
    n.finish();
  }
  std::string out = c.out.string();
  s.read("out", out);
  c.out = out;
  s.finish();
  if (!c.dataset && !c.synthetic) c.synthetic = SyntheticConfig{};
  c.cross_validation.eval = c.eval;
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::InvalidConfig, "config: cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_experiment_config(text.str(), path.parent_path());
}

}  // namespace cizsl
