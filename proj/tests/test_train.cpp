#include <gtest/gtest.h>

#include <cstdlib>

#include "cizsl/error.hpp"
#include "cizsl/train.hpp"

using namespace cizsl;

namespace {

ZslDataset toy_data(std::uint64_t seed = 1) {
  SyntheticConfig c;
  c.super_categories = 4;
  c.classes_per_super = 3;
  c.instances_per_class = 12;
  c.text_dim = 6;
  c.feature_dim = 5;
  c.seed = seed;
  return make_synthetic(c);
}

TrainConfig small_config(int steps) {
  TrainConfig t;
  t.steps = steps;
  t.batch_size = 8;
  t.critic_steps = 2;
  t.noise_dim = 3;
  t.text_embed_dim = 4;
  t.generator_hidden = {8};
  t.discriminator_hidden = {8};
  t.seed = 7;
  return t;
}

template <typename F>
void expect_kind(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "no error raised";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

}  // namespace

TEST(TrainConfig, Validation) {
  TrainConfig t;
  t.lambda = -1;
  expect_kind(ErrorKind::InvalidConfig, [&] { t.validate(); });
  t = TrainConfig{};
  t.critic_steps = 0;
  expect_kind(ErrorKind::InvalidConfig, [&] { t.validate(); });
  t = TrainConfig{};
  t.batch_size = 1;
  expect_kind(ErrorKind::InvalidConfig, [&] { t.validate(); });
  const TrainConfig b = TrainConfig{}.baseline();
  EXPECT_EQ(b.lambda, 0.0);
  EXPECT_FALSE(b.hallucinated_realness);
}

TEST(Train, ZeroStepsReturnsInitialNetworks) {
  const ZslDataset ds = toy_data();
  const TrainConfig cfg = small_config(0);
  const TrainedModel m = train(ds, cfg);
  EXPECT_TRUE(m.history.empty());
  RngStream init(cfg.seed, Stream::Init);
  GeneratorArch g;
  g.text_dim = ds.text_dim();
  g.noise_dim = cfg.noise_dim;
  g.text_embed_dim = cfg.text_embed_dim;
  g.hidden = cfg.generator_hidden;
  g.output_dim = ds.feature_dim();
  const auto gen = Generator<double>::create(g, init);
  EXPECT_EQ(m.generator.params(), gen.params());
  EXPECT_EQ(m.divergence.gamma(), cfg.divergence.gamma());
  EXPECT_EQ(m.seen_classes, ds.seen_ids());
}

TEST(Train, DeterministicAndHistoryLength) {
  const ZslDataset ds = toy_data();
  const TrainConfig cfg = small_config(15);
  const TrainedModel a = train(ds, cfg);
  const TrainedModel b = train(ds, cfg);
  ASSERT_EQ(a.history.size(), 15u);
  EXPECT_EQ(a.generator.params(), b.generator.params());
  EXPECT_EQ(a.discriminator.params(), b.discriminator.params());
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].iteration, static_cast<int>(i + 1));
}

TEST(Train, LearnsDivergenceParametersOnlyWhenCreative) {
  const ZslDataset ds = toy_data();
  const TrainedModel full = train(ds, small_config(5));
  EXPECT_NE(full.divergence.gamma(), 0.5);
  const TrainedModel base = train(ds, small_config(5).baseline());
  EXPECT_EQ(base.divergence.gamma(), 0.5);
  EXPECT_EQ(base.history.back().mean_entropy, 0.0);
}

TEST(Train, ObserverSeesCheckpoints) {
  std::vector<int> seen;
  train(toy_data(), small_config(7), [&](int it, const TrainedModel&) { seen.push_back(it); }, 3);
  EXPECT_EQ(seen, (std::vector<int>{3, 6, 7}));
}

TEST(Train, NonFiniteLossIsTrainingDiverged) {
  ZslDataset ds = toy_data();
  ds.train_features *= 1e160;
  ds.test_features *= 1e160;
  try {
    train(ds, small_config(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TrainingDiverged);
    EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos) << e.what();
  }
}

TEST(HistoryCsv, HeaderAndPrecision) {
  HistoryRow r;
  r.iteration = 3;
  r.generator_loss = 1.0 / 3.0;
  r.gamma = 0.5;
  r.beta = 2;
  EXPECT_EQ(history_csv({r}),
            "iteration,generator_loss,discriminator_loss,mean_entropy_loss,gamma,beta\n3,0.333333,0,0,0.5,2\n");
}

TEST(EvaluateGzsl, ReportIsConsistent) {
  const ZslDataset ds = toy_data();
  const TrainedModel m = train(ds, small_config(10));
  EvalOptions opts;
  opts.samples_per_center = 5;
  const EvalReport r = evaluate_gzsl(m.generator, ds, opts);
  EXPECT_GE(r.top1, 0.0);
  EXPECT_LE(r.top1, 1.0);
  EXPECT_GE(r.curve.auc, 0.0);
  EXPECT_LE(r.curve.auc, 1.0);
  EXPECT_EQ(r.curve.points.size(), 203u);
  EXPECT_DOUBLE_EQ(r.h_mean, harmonic_mean(r.uncalibrated.acc_seen, r.uncalibrated.acc_unseen));
  EXPECT_EQ(r.unseen_centers.ids, ds.unseen_ids());
  const EvalReport again = evaluate_gzsl(m.generator, ds, opts);
  EXPECT_EQ(again.curve.auc, r.curve.auc);
}

TEST(CrossValidateLambda, SingleLambdaIsReturned) {
  const auto sel = cross_validate_lambda(toy_data(), small_config(4), {0.3}, {0.8, 2, {}, 1});
  EXPECT_EQ(sel.best_lambda, 0.3);
  EXPECT_EQ(sel.table.size(), 2u);
}

TEST(CrossValidateLambda, TiesGoToSmallerLambda) {
  const auto sel = cross_validate_lambda(toy_data(), small_config(4), {0.0, 0.0}, {0.8, 4, {}, 1});
  EXPECT_EQ(sel.best_lambda, 0.0);
  ASSERT_EQ(sel.table.size(), 2u);
  EXPECT_EQ(sel.table[0].auc, sel.table[1].auc);
}

TEST(CrossValidateLambda, TableMatchesBestChoice) {
  const std::vector<double> grid = {0.0, 0.1, 1.0, 10.0};
  const auto sel = cross_validate_lambda(toy_data(), small_config(6), grid, {0.8, 3, {}, 2});
  EXPECT_EQ(sel.table.size(), grid.size() * 2);
  double best = -1.0, best_lambda = -1.0;
  for (const auto& row : sel.table)
    if (row.auc > best) best = row.auc, best_lambda = row.lambda;
  int best_iteration = 0;
  for (const auto& row : sel.table)
    if (row.auc == best && row.lambda == best_lambda) {
      best_iteration = row.iteration;
      break;
    }
  EXPECT_EQ(sel.best_auc, best);
  EXPECT_EQ(sel.best_lambda, best_lambda);
  EXPECT_EQ(sel.best_iteration, best_iteration);
  // Threads do not change the result.
  const auto serial = cross_validate_lambda(toy_data(), small_config(6), grid, {0.8, 3, {}, 1});
  EXPECT_EQ(serial.best_auc, sel.best_auc);
}

TEST(CrossValidateLambda, TooFewValidationClasses) {
  // Nine seen classes at ratio 0.9 leave one validation class.
  expect_kind(ErrorKind::InvalidSplit,
              [] { cross_validate_lambda(toy_data(), small_config(2), {1.0}, {0.9, 1, {}, 1}); });
}

TEST(ThreadCap, ReadsEnvironment) {
  ::setenv("CIZSL_THREADS", "1", 1);
  EXPECT_EQ(thread_cap(), 1u);
  ::setenv("CIZSL_THREADS", "0", 1);
  EXPECT_EQ(thread_cap(), 1u);
  ::unsetenv("CIZSL_THREADS");
  EXPECT_EQ(thread_cap(), 1u);
}
