#include "cizsl/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "cizsl/error.hpp"

namespace cizsl {

void TrainConfig::validate() const {
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::InvalidConfig, "train: lambda must be >= 0");
  require(critic_steps >= 1, ErrorKind::InvalidConfig, "train: critic_steps must be >= 1");
  require(steps >= 0, ErrorKind::InvalidConfig, "train: steps must be >= 0");
  require(batch_size >= 2, ErrorKind::InvalidConfig, "train: batch_size must be >= 2");
  require(adam.learning_rate > 0.0 && adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 &&
              adam.epsilon > 0.0,
          ErrorKind::InvalidConfig, "train: invalid Adam hyperparameters");
  require(gp_weight >= 0.0, ErrorKind::InvalidConfig, "train: gp_weight must be >= 0");
  require(noise_dim >= 1, ErrorKind::InvalidConfig, "train: noise_dim must be >= 1");
  require(text_embed_dim >= 0, ErrorKind::InvalidConfig, "train: text_embed_dim must be >= 0");
  divergence.validate();
}

namespace {

struct TrainingData {
  std::vector<ClassId> seen;
  MatrixXd descriptors;  // K x T
  MatrixXd centers;      // K x X
  MatrixXd features;     // training rows
  std::vector<Eigen::Index> labels;  // seen-class index per row
};

TrainingData prepare(const ZslDataset& dataset) {
  dataset.validate();
  TrainingData d;
  d.seen = dataset.seen_ids();
  require(d.seen.size() >= 2, ErrorKind::InvalidInput, "train: need at least two seen classes");
  require(dataset.train_features.rows() >= 1, ErrorKind::InvalidInput, "train: no training instances");
  d.descriptors = dataset.descriptors(d.seen);
  d.centers = class_means(dataset, d.seen).centers;
  d.features = dataset.train_features;
  for (ClassId l : dataset.train_labels)
    d.labels.push_back(std::lower_bound(d.seen.begin(), d.seen.end(), l) - d.seen.begin());
  return d;
}

SeenBatch seen_batch(const TrainingData& d, std::vector<Eigen::Index> labels, RngStream& noise, Eigen::Index noise_dim) {
  SeenBatch b;
  b.texts.resize(static_cast<Eigen::Index>(labels.size()), d.descriptors.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) b.texts.row(static_cast<Eigen::Index>(i)) = d.descriptors.row(labels[i]);
  b.noise = sample_gaussian(noise, static_cast<Eigen::Index>(labels.size()), noise_dim);
  b.labels = std::move(labels);
  return b;
}

template <typename Net>
void adam_update(Net& net, const VectorXd& grad, AdamState<double>& state) {
  auto r = adam_step<double>(net.params(), grad, std::move(state));
  net.set_params(r.params);
  state = std::move(r.state);
}

void check_finite(double v, int iteration, const char* what) {
  if (!std::isfinite(v))
    fail(ErrorKind::TrainingDiverged, std::string(what) + " became non-finite at iteration " + std::to_string(iteration));
}

}  // namespace

TrainedModel train(const ZslDataset& dataset, const TrainConfig& config, const TrainObserver& observer,
                   int observe_every) {
  config.validate();
  const TrainingData data = prepare(dataset);
  const auto k = static_cast<Eigen::Index>(data.seen.size());
  const Eigen::Index m = config.batch_size;

  RngStream init_rng(config.seed, Stream::Init);
  RngStream noise_rng(config.seed, Stream::Noise);
  RngStream alpha_rng(config.seed, Stream::Alpha);
  RngStream shuffle_rng(config.seed, Stream::Shuffle);
  RngStream gp_rng(config.seed, Stream::GpEpsilon);

  GeneratorArch g_arch;
  g_arch.text_dim = dataset.text_dim();
  g_arch.noise_dim = config.noise_dim;
  g_arch.text_embed_dim = config.text_embed_dim;
  g_arch.hidden = config.generator_hidden;
  g_arch.output_dim = dataset.feature_dim();
  DiscriminatorArch d_arch;
  d_arch.input_dim = dataset.feature_dim();
  d_arch.hidden = config.discriminator_hidden;
  d_arch.num_classes = k;

  TrainedModel model;
  model.generator = Gen::create(g_arch, init_rng);
  model.discriminator = Disc::create(d_arch, init_rng);
  model.divergence = config.divergence;
  model.seen_classes = data.seen;
  model.history.reserve(static_cast<std::size_t>(config.steps));

  AdamState<double> g_state(model.generator.num_params(), config.adam);
  AdamState<double> d_state(model.discriminator.num_params(), config.adam);
  AdamState<double> e_state(2, config.adam);

  GeneratorLossOptions g_opts;
  g_opts.creativity.lambda = config.lambda;
  g_opts.creativity.realness_term = config.hallucinated_realness;
  g_opts.visual_pivot = config.visual_pivot;
  const bool creative = config.lambda != 0.0 || config.hallucinated_realness;

  for (int iter = 1; iter <= config.steps; ++iter) {
    // Hallucinated descriptors from two distinct seen classes, one alpha per row.
    HallucinatedBatch hallucinated;
    hallucinated.texts.resize(m, data.descriptors.cols());
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto a = static_cast<Eigen::Index>(sample_index(shuffle_rng, static_cast<std::size_t>(k)));
      auto b = static_cast<Eigen::Index>(sample_index(shuffle_rng, static_cast<std::size_t>(k - 1)));
      if (b >= a) ++b;
      hallucinated.texts.row(i) =
          hallucinate_text(data.descriptors.row(a).transpose(), data.descriptors.row(b).transpose(), alpha_rng,
                           config.alpha_mode)
              .transpose();
    }
    hallucinated.noise = sample_gaussian(noise_rng, m, config.noise_dim);

    HistoryRow row;
    row.iteration = iter;
    for (int step = 0; step < config.critic_steps; ++step) {
      RealBatch real;
      real.features.resize(m, data.features.cols());
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto r = static_cast<Eigen::Index>(sample_index(shuffle_rng, static_cast<std::size_t>(data.features.rows())));
        real.features.row(i) = data.features.row(r);
        real.labels.push_back(data.labels[static_cast<std::size_t>(r)]);
      }
      const SeenBatch fake_in = seen_batch(data, real.labels, noise_rng, config.noise_dim);
      VectorXd eps(m);
      for (Eigen::Index i = 0; i < m; ++i) eps[i] = sample_uniform(gp_rng, 0.0, 1.0);
      const auto d_loss = discriminator_loss(model.discriminator, model.generator, real, fake_in, eps, config.gp_weight);
      check_finite(d_loss.value, iter, "discriminator loss");
      adam_update(model.discriminator, d_loss.grad_discriminator, d_state);
      row.discriminator_loss += d_loss.value / config.critic_steps;
      row.wasserstein_gap = d_loss.wasserstein_gap;
    }

    std::vector<Eigen::Index> classes(static_cast<std::size_t>(m));
    for (auto& c : classes) c = static_cast<Eigen::Index>(sample_index(shuffle_rng, static_cast<std::size_t>(k)));
    const SeenBatch seen = seen_batch(data, std::move(classes), noise_rng, config.noise_dim);
    const auto g_loss = generator_loss(model.generator, model.discriminator, seen,
                                       creative ? hallucinated : HallucinatedBatch{}, model.divergence, data.centers,
                                       g_opts);
    check_finite(g_loss.value, iter, "generator loss");
    adam_update(model.generator, g_loss.grad_generator, g_state);
    if (creative && model.divergence.any_learnable()) {
      auto r = adam_step<double>(model.divergence.raw(), g_loss.grad_divergence, std::move(e_state));
      model.divergence.set_raw(r.params);
      e_state = std::move(r.state);
      check_finite(model.divergence.gamma() + model.divergence.beta(), iter, "divergence parameters");
    }

    row.generator_loss = g_loss.value;
    row.mean_entropy = creative ? g_loss.creativity.raw_entropy.mean() : 0.0;
    row.gamma = model.divergence.gamma();
    row.beta = model.divergence.beta();
    model.history.push_back(row);
    if (observer && observe_every > 0 && (iter % observe_every == 0 || iter == config.steps)) observer(iter, model);
  }
  return model;
}

std::string history_csv(const std::vector<HistoryRow>& history) {
  std::ostringstream out;
  out << "iteration,generator_loss,discriminator_loss,mean_entropy_loss,gamma,beta\n";
  for (const auto& r : history)
    out << r.iteration << ',' << format_number(r.generator_loss) << ',' << format_number(r.discriminator_loss) << ','
        << format_number(r.mean_entropy) << ',' << format_number(r.gamma) << ',' << format_number(r.beta) << '\n';
  return out.str();
}

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& history) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::InvalidInput, "cannot write " + path.string());
  out << history_csv(history);
}

EvalReport evaluate_gzsl(const Gen& generator, const ZslDataset& dataset, const EvalOptions& options) {
  const auto seen = dataset.seen_ids();
  const auto unseen = dataset.unseen_ids();
  require(!unseen.empty(), ErrorKind::InvalidInput, "evaluate: dataset has no unseen classes");
  require(generator.text_dim() == dataset.text_dim() && generator.output_dim() == dataset.feature_dim(),
          ErrorKind::InvalidInput, "evaluate: model dimensions do not match the dataset");

  EvalReport report;
  RngStream rng(options.seed, Stream::Eval);
  report.seen_centers = class_means(dataset, seen);
  report.unseen_centers = synthesize_centers(generator, dataset, unseen, options.samples_per_center, rng);

  MatrixXd unseen_features(0, dataset.feature_dim());
  std::vector<ClassId> unseen_labels;
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < dataset.test_labels.size(); ++i)
    if (report.unseen_centers.contains(dataset.test_labels[i])) rows.push_back(static_cast<Eigen::Index>(i));
  unseen_features.resize(static_cast<Eigen::Index>(rows.size()), dataset.feature_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    unseen_features.row(static_cast<Eigen::Index>(i)) = dataset.test_features.row(rows[i]);
    unseen_labels.push_back(dataset.test_labels[static_cast<std::size_t>(rows[i])]);
  }
  report.top1 = zsl_top1(unseen_features, unseen_labels, report.unseen_centers, options.metric);

  const auto grid = default_calibration_grid(dataset.test_features, report.seen_centers, report.unseen_centers,
                                             options.metric, options.grid_size);
  report.curve = seen_unseen_curve(dataset.test_features, dataset.test_labels, report.seen_centers,
                                   report.unseen_centers, grid, options.metric);
  report.uncalibrated = accuracy_pair(dataset.test_features, dataset.test_labels, report.seen_centers,
                                      report.unseen_centers, 0.0, options.metric);
  report.h_mean = harmonic_mean(report.uncalibrated.acc_seen, report.uncalibrated.acc_unseen);
  return report;
}

unsigned thread_cap() {
  const char* env = std::getenv("CIZSL_THREADS");
  if (!env) return 1;
  const long n = std::strtol(env, nullptr, 10);
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (n < 1) return 1;
  return std::min<unsigned>(static_cast<unsigned>(n), hw);
}

LambdaSelection cross_validate_lambda(const ZslDataset& dataset, const TrainConfig& config,
                                      const std::vector<double>& grid, const CrossValidationOptions& options) {
  require(!grid.empty(), ErrorKind::InvalidInput, "cross_validate_lambda: empty lambda grid");
  require(options.eval_interval >= 1, ErrorKind::InvalidConfig, "cross_validate_lambda: eval_interval must be >= 1");
  for (double l : grid) require(l >= 0.0 && std::isfinite(l), ErrorKind::InvalidConfig, "cross_validate_lambda: bad lambda");
  const TrainValSplit split = split_train_val(dataset, options.ratio, config.seed);
  require(split.val.seen_ids().size() >= 2, ErrorKind::InvalidSplit,
          "cross_validate_lambda: fewer than 2 validation classes");
  require(split.train.seen_ids().size() >= 2, ErrorKind::InvalidSplit,
          "cross_validate_lambda: fewer than 2 training classes");

  std::vector<std::vector<LambdaScore>> per_lambda(grid.size());
  auto run = [&](std::size_t idx) {
    TrainConfig cfg = config;
    cfg.lambda = grid[idx];
    auto observe = [&](int iteration, const TrainedModel& model) {
      const EvalReport report = evaluate_gzsl(model.generator, split.train, options.eval);
      per_lambda[idx].push_back({grid[idx], iteration, report.curve.auc});
    };
    train(split.train, cfg, observe, options.eval_interval);
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(grid.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) run(i);
  } else {
    std::vector<std::exception_ptr> errors(grid.size());
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < grid.size(); i = next++) {
          try {
            run(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  LambdaSelection out;
  bool first = true;
  for (const auto& rows : per_lambda)
    for (const auto& row : rows) {
      out.table.push_back(row);
      if (first || row.auc > out.best_auc || (row.auc == out.best_auc && row.lambda < out.best_lambda)) {
        out.best_auc = row.auc;
        out.best_lambda = row.lambda;
        out.best_iteration = row.iteration;
        first = false;
      }
    }
  return out;
}

void write_lambda_table_csv(const std::filesystem::path& path, const LambdaSelection& selection) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::InvalidInput, "cannot write " + path.string());
  out << "lambda,iteration,val_su_auc\n";
  for (const auto& r : selection.table)
    out << format_number(r.lambda) << ',' << r.iteration << ',' << format_number(r.auc) << '\n';
}

}  // namespace cizsl
