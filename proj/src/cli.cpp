#include "cizsl/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "cizsl/checkpoint.hpp"
#include "cizsl/config.hpp"
#include "cizsl/error.hpp"
#include "cizsl/gradcheck.hpp"

namespace cizsl {

namespace {

namespace fs = std::filesystem;

// Flags shared by every subcommand. Unset flags leave the config untouched.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "Experiment config (JSON)");
    app->add_option("--seed", seed, "Seed for training, sampling and evaluation");
    app->add_option("--out", out, "Output directory");
  }

  ExperimentConfig load() const {
    ExperimentConfig c = config.empty() ? default_experiment_config() : load_experiment_config(config);
    if (seed) {
      c.train.seed = *seed;
      c.eval.seed = *seed;
      if (c.synthetic) c.synthetic->seed = *seed;
    }
    if (!out.empty()) c.out = out;
    c.cross_validation.eval = c.eval;
    return c;
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::InvalidInput, "cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::InvalidInput, "cannot write " + path.string());
  f << text;
}

void print(std::ostream& out, const std::string& name, double value) {
  out << name << '=' << format_number(value) << '\n';
}

std::string checkpoint_name(int iteration) {
  std::ostringstream s;
  s << "checkpoint_" << std::setw(6) << std::setfill('0') << iteration << ".czsl";
  return s.str();
}

// Dataset for eval/retrieve: --dataset wins over the config.
ZslDataset dataset_for(const ExperimentConfig& config, const std::string& dataset_flag) {
  if (!dataset_flag.empty()) return load_dataset(dataset_flag);
  return config.load_data();
}

Generator<double> generator_for(const std::string& checkpoint, const ZslDataset& dataset) {
  if (checkpoint.empty()) fail(ErrorKind::InvalidInput, "--checkpoint is required");
  NetworkPair nets = load_checkpoint(checkpoint);
  if (nets.generator.text_dim() != dataset.text_dim() || nets.generator.output_dim() != dataset.feature_dim())
    fail(ErrorKind::InvalidInput, "checkpoint dimensions (text " + std::to_string(nets.generator.text_dim()) +
                                      ", feature " + std::to_string(nets.generator.output_dim()) +
                                      ") do not match the dataset (text " + std::to_string(dataset.text_dim()) +
                                      ", feature " + std::to_string(dataset.feature_dim()) + ")");
  return std::move(nets.generator);
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::TrainingDiverged:
    case ErrorKind::OracleFailure:
    case ErrorKind::InvalidState:
    case ErrorKind::DivergenceUndefined: return 2;
    default: return 1;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Creativity-inspired zero-shot feature generation", "cizsl"};
  app.require_subcommand(1);

  // train
  CommonFlags train_flags;
  std::optional<double> train_lambda;
  std::optional<int> train_steps;
  bool train_baseline = false;
  auto* train_cmd = app.add_subcommand("train", "Train a generator/critic pair and write a run directory");
  train_flags.attach(train_cmd);
  train_cmd->add_option("--lambda", train_lambda, "Creativity weight");
  train_cmd->add_option("--steps", train_steps, "Training loops");
  train_cmd->add_flag("--baseline", train_baseline, "Disable both creativity terms");

  // eval
  CommonFlags eval_flags;
  std::string eval_checkpoint, eval_dataset, eval_metric;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint: top-1, seen-unseen curve, harmonic mean");
  eval_flags.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--dataset", eval_dataset, "Dataset manifest");
  eval_cmd->add_option("--metric", eval_metric, "l2 or cosine");

  // retrieve
  CommonFlags retrieve_flags;
  std::string retrieve_checkpoint, retrieve_dataset;
  std::vector<double> retrieve_ratios;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Unseen-class retrieval precision per ratio");
  retrieve_flags.attach(retrieve_cmd);
  retrieve_cmd->add_option("--checkpoint", retrieve_checkpoint, "Checkpoint file")->required();
  retrieve_cmd->add_option("--dataset", retrieve_dataset, "Dataset manifest");
  retrieve_cmd->add_option("--ratios", retrieve_ratios, "Retrieval ratios")->delimiter(',');

  // synth
  CommonFlags synth_flags;
  bool example_config = false;
  std::string synth_split;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset, or print the default config");
  synth_flags.attach(synth_cmd);
  synth_cmd->add_flag("--example-config", example_config, "Print a config with every default and exit");
  synth_cmd->add_option("--split", synth_split, "easy or hard");

  // gradcheck
  std::uint64_t gradcheck_seed = 0;
  bool gradcheck_corrupt = false;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
  gradcheck_cmd->add_option("--seed", gradcheck_seed, "Seed for the random configurations");
  gradcheck_cmd->add_flag("--corrupt", gradcheck_corrupt, "Perturb the analytic gradients (must fail)");

  // sweep-lambda
  CommonFlags sweep_flags;
  std::vector<double> sweep_grid;
  std::optional<int> sweep_steps;
  auto* sweep_cmd = app.add_subcommand("sweep-lambda", "Cross-validate the creativity weight");
  sweep_flags.attach(sweep_cmd);
  sweep_cmd->add_option("--grid", sweep_grid, "Lambda values")->delimiter(',');
  sweep_cmd->add_option("--steps", sweep_steps, "Training loops per lambda");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*train_cmd) {
      ExperimentConfig c = train_flags.load();
      if (train_lambda) c.train.lambda = *train_lambda;
      if (train_steps) c.train.steps = *train_steps;
      if (train_baseline) c.train = c.train.baseline();
      c.validate();
      const ZslDataset data = c.load_data();
      ensure_dir(c.out);
      write_text(c.out / "config.json", experiment_config_json(c));
      auto checkpoint = [&](int iteration, const TrainedModel& model) {
        save_checkpoint(c.out / checkpoint_name(iteration), model.generator, model.discriminator);
      };
      const TrainedModel model = train(data, c.train, checkpoint, c.cross_validation.eval_interval);
      write_history_csv(c.out / "history.csv", model.history);
      save_checkpoint(c.out / "model.czsl", model.generator, model.discriminator);
      out << "steps=" << model.history.size() << '\n';
      if (!model.history.empty()) {
        const HistoryRow& last = model.history.back();
        print(out, "generator_loss", last.generator_loss);
        print(out, "discriminator_loss", last.discriminator_loss);
        print(out, "mean_entropy_loss", last.mean_entropy);
      }
      print(out, "gamma", model.divergence.gamma());
      print(out, "beta", model.divergence.beta());
      out << "run_dir=" << c.out.string() << '\n';
      return 0;
    }

    if (*eval_cmd) {
      ExperimentConfig c = eval_flags.load();
      if (!eval_metric.empty()) c.eval.metric = parse_metric(eval_metric);
      const ZslDataset data = dataset_for(c, eval_dataset);
      const Generator<double> generator = generator_for(eval_checkpoint, data);
      const EvalReport report = evaluate_gzsl(generator, data, c.eval);
      print(out, "top1", report.top1);
      print(out, "su_auc", report.curve.auc);
      print(out, "acc_seen", report.uncalibrated.acc_seen);
      print(out, "acc_unseen", report.uncalibrated.acc_unseen);
      print(out, "h_mean", report.h_mean);
      ensure_dir(c.out);
      write_curve_csv(c.out / "curve.csv", report.curve);
      write_text(c.out / "curve.svg", curve_svg(report.curve, "Seen-unseen accuracy"));
      return 0;
    }

    if (*retrieve_cmd) {
      ExperimentConfig c = retrieve_flags.load();
      if (!retrieve_ratios.empty()) c.retrieval_ratios = retrieve_ratios;
      const ZslDataset data = dataset_for(c, retrieve_dataset);
      const Generator<double> generator = generator_for(retrieve_checkpoint, data);
      const auto unseen = data.unseen_ids();
      if (unseen.empty()) fail(ErrorKind::InvalidInput, "retrieve: dataset has no unseen classes");
      RngStream rng(c.eval.seed, Stream::Eval);
      const ClassCenters centers = synthesize_centers(generator, data, unseen, c.eval.samples_per_center, rng);
      std::vector<Eigen::Index> rows;
      for (std::size_t i = 0; i < data.test_labels.size(); ++i)
        if (centers.contains(data.test_labels[i])) rows.push_back(static_cast<Eigen::Index>(i));
      if (rows.empty()) fail(ErrorKind::InvalidInput, "retrieve: no unseen test instances");
      MatrixXd features(static_cast<Eigen::Index>(rows.size()), data.feature_dim());
      std::vector<ClassId> labels;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        features.row(static_cast<Eigen::Index>(i)) = data.test_features.row(rows[i]);
        labels.push_back(data.test_labels[static_cast<std::size_t>(rows[i])]);
      }
      const auto precision = retrieval_precision(features, labels, centers, c.retrieval_ratios, c.eval.metric);
      for (std::size_t i = 0; i < precision.size(); ++i)
        print(out, "precision@" + format_number(c.retrieval_ratios[i]), precision[i]);
      return 0;
    }

    if (*synth_cmd) {
      ExperimentConfig c = synth_flags.load();
      if (example_config) {
        out << experiment_config_json(default_experiment_config());
        return 0;
      }
      if (!c.synthetic) fail(ErrorKind::InvalidConfig, "synth: config has no 'synthetic' section");
      if (!synth_split.empty()) c.synthetic->split = parse_split_mode(synth_split);
      const ZslDataset data = make_synthetic(*c.synthetic);
      ensure_dir(c.out);
      const fs::path manifest = c.out / "dataset.json";
      save_dataset(data, manifest);
      out << "manifest=" << manifest.string() << '\n';
      out << "seen_classes=" << data.seen_ids().size() << '\n';
      out << "unseen_classes=" << data.unseen_ids().size() << '\n';
      out << "train_instances=" << data.train_labels.size() << '\n';
      out << "test_instances=" << data.test_labels.size() << '\n';
      return 0;
    }

    if (*gradcheck_cmd) {
      GradCheckOptions options;
      options.seed = gradcheck_seed;
      options.corrupt = gradcheck_corrupt;
      const GradCheckReport report = run_gradcheck(options);
      for (const auto& e : report.entries)
        out << e.name << " max_rel_error=" << format_number(e.max_rel_error)
            << " tolerance=" << format_number(e.tolerance) << " configs=" << e.configs << ' '
            << (e.passed() ? "ok" : "FAIL") << '\n';
      out << "configurations=" << report.total_configs() << '\n';
      out << "status=" << (report.passed() ? "pass" : "fail") << '\n';
      return report.passed() ? 0 : 2;
    }

    if (*sweep_cmd) {
      ExperimentConfig c = sweep_flags.load();
      if (!sweep_grid.empty()) c.lambda_grid = sweep_grid;
      if (sweep_steps) c.train.steps = *sweep_steps;
      c.validate();
      const ZslDataset data = c.load_data();
      CrossValidationOptions options = c.cross_validation;
      options.threads = thread_cap();
      const LambdaSelection selection = cross_validate_lambda(data, c.train, c.lambda_grid, options);
      ensure_dir(c.out);
      write_lambda_table_csv(c.out / "lambda_table.csv", selection);
      for (const auto& row : selection.table)
        out << "lambda=" << format_number(row.lambda) << " iteration=" << row.iteration
            << " val_su_auc=" << format_number(row.auc) << '\n';
      print(out, "best_lambda", selection.best_lambda);
      print(out, "best_val_su_auc", selection.best_auc);
      out << "best_iteration=" << selection.best_iteration << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace cizsl
