#include "cizsl/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <functional>

#include "cizsl/losses.hpp"

namespace cizsl {

namespace {

constexpr double kPenaltyTolerance = 1e-3;
constexpr double kTolerance = 1e-4;

struct SmallNets {
  Gen generator;
  Disc discriminator;
  MatrixXd descriptors;  // K x T
  MatrixXd centers;      // K x X
};

SmallNets small_nets(RngStream& rng, Eigen::Index k, bool embed) {
  GeneratorArch g;
  g.text_dim = 3 + static_cast<Eigen::Index>(sample_index(rng, 3));
  g.noise_dim = 2;
  g.text_embed_dim = embed ? 4 : 0;
  g.hidden = {5 + static_cast<Eigen::Index>(sample_index(rng, 3))};
  g.output_dim = 4;
  g.output_activation = sample_index(rng, 2) == 0 ? Activation::Relu : Activation::Sigmoid;
  DiscriminatorArch d;
  d.input_dim = g.output_dim;
  d.hidden = {6};
  d.num_classes = k;
  SmallNets nets{Gen::create(g, rng), Disc::create(d, rng), sample_gaussian<double>(rng, k, g.text_dim),
                 sample_gaussian<double>(rng, k, g.output_dim)};
  nets.centers = nets.centers.cwiseAbs();
  return nets;
}

SeenBatch seen_batch(RngStream& rng, const SmallNets& nets, Eigen::Index m) {
  SeenBatch b;
  const Eigen::Index k = nets.descriptors.rows();
  b.texts.resize(m, nets.descriptors.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto y = static_cast<Eigen::Index>(i < k ? i : sample_index(rng, static_cast<std::size_t>(k)));
    b.labels.push_back(y);
    b.texts.row(i) = nets.descriptors.row(y);
  }
  b.noise = sample_gaussian<double>(rng, m, nets.generator.noise_dim());
  return b;
}

HallucinatedBatch hallucinated_batch(RngStream& rng, const SmallNets& nets, Eigen::Index m) {
  HallucinatedBatch b;
  const auto k = static_cast<std::size_t>(nets.descriptors.rows());
  b.texts.resize(m, nets.descriptors.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto a = static_cast<Eigen::Index>(sample_index(rng, k));
    auto c = static_cast<Eigen::Index>(sample_index(rng, k - 1));
    if (c >= a) ++c;
    b.texts.row(i) = interpolate_text(nets.descriptors.row(a).transpose(), nets.descriptors.row(c).transpose(),
                                      sample_uniform(rng, 0.2, 0.8))
                         .transpose();
  }
  b.noise = sample_gaussian<double>(rng, m, nets.generator.noise_dim());
  return b;
}

DivParams random_divergence(RngStream& rng, int variant) {
  switch (variant % 6) {
    case 0: return DivParams::sharma_mittal(sample_uniform(rng, 0.2, 0.8), sample_uniform(rng, 0.1, 0.8), true);
    case 1: return DivParams::sharma_mittal(sample_uniform(rng, 1.3, 2.5), sample_uniform(rng, 1.2, 2.0), true);
    case 2: return DivParams::renyi(sample_uniform(rng, 0.3, 0.8), true);
    case 3: return DivParams::tsallis(sample_uniform(rng, 1.3, 2.0), true);
    case 4: return DivParams::kl();
    default: return DivParams::bhattacharyya();
  }
}

class Checker {
 public:
  Checker(const GradCheckOptions& options) : options_(options) {}

  void check(const std::string& name, double tolerance, const std::function<double(const VectorXd&)>& f,
             const VectorXd& x, VectorXd analytic) {
    if (options_.corrupt) analytic *= 1.01;
    const VectorXd numeric = finite_diff_gradient<double>(f, x, options_.step);
    const double err = relative_error<double>(analytic, numeric);
    auto it = std::find_if(report_.entries.begin(), report_.entries.end(),
                           [&](const GradCheckEntry& e) { return e.name == name; });
    if (it == report_.entries.end()) {
      report_.entries.push_back({name, 0, 0.0, tolerance});
      it = report_.entries.end() - 1;
    }
    it->configs += 1;
    it->max_rel_error = std::max(it->max_rel_error, err);
  }

  GradCheckReport take() { return std::move(report_); }

 private:
  GradCheckOptions options_;
  GradCheckReport report_;
};

}  // namespace

int GradCheckReport::total_configs() const {
  int n = 0;
  for (const auto& e : entries) n += e.configs;
  return n;
}

bool GradCheckReport::passed() const {
  return !entries.empty() && std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed(); });
}

GradCheckReport run_gradcheck(const GradCheckOptions& options) {
  Checker checker(options);
  RngStream base(options.seed, Stream::Init);
  const Eigen::Index m = 5;

  for (int c = 0; c < options.configs_per_check; ++c) {
    RngStream rng = base.derive(static_cast<std::uint64_t>(c));
    const Eigen::Index k = 3 + static_cast<Eigen::Index>(sample_index(rng, 3));

    // Softmax backward against a random upstream gradient.
    {
      const VectorXd logits = 2.0 * sample_gaussian<double>(rng, k);
      const VectorXd g = sample_gaussian<double>(rng, k);
      checker.check("softmax", kTolerance, [&](const VectorXd& v) { return softmax(v).dot(g); }, logits,
                    softmax_backward<double>(softmax(logits), g));
    }

    // Network backward, parameters and inputs.
    {
      const auto act = static_cast<Activation>(c % 4);
      Mlp<double> net =
          Mlp<double>::glorot({{4, 6, Activation::LeakyRelu, 0.2}, {6, 3, act, 0.2}}, rng);
      const MatrixXd x = sample_gaussian<double>(rng, m, 4);
      const MatrixXd w = sample_gaussian<double>(rng, m, 3);
      Mlp<double>::Cache cache;
      net.forward(x, &cache);
      const auto grads = net.backward(cache, w);
      checker.check(
          "mlp_params", kTolerance,
          [&](const VectorXd& p) {
            Mlp<double> probe = net;
            probe.set_params(p);
            return probe.forward(x).cwiseProduct(w).sum();
          },
          net.params(), grads.params);
      const VectorXd flat_x = x.reshaped<Eigen::RowMajor>();
      checker.check(
          "mlp_input", kTolerance,
          [&](const VectorXd& v) {
            const MatrixXd probe = v.reshaped<Eigen::RowMajor>(m, 4);
            return net.forward(probe).cwiseProduct(w).sum();
          },
          flat_x, VectorXd(grads.input.reshaped<Eigen::RowMajor>()));
    }

    // Every divergence member, then L_e through the softmax and batch normalization.
    for (int v = 0; v < 6; ++v) {
      const DivParams div = random_divergence(rng, v + c);
      const std::string tag = std::string(to_string(div.mode));
      const VectorXd logits = 1.5 * sample_gaussian<double>(rng, k);
      const VectorXd p = softmax(logits);
      const auto g = entropy_loss_le_grads<double>(p, div);
      checker.check(
          "divergence_p/" + tag, kTolerance,
          [&](const VectorXd& l) { return entropy_loss_le<double>(softmax(l), div); }, logits,
          softmax_backward<double>(p, g.d_p));
      if (div.any_learnable()) {
        VectorXd analytic(2);
        analytic << (div.learn_gamma ? div.gamma() * g.d_gamma : 0.0), (div.learn_beta ? g.d_beta : 0.0);
        checker.check(
            "divergence_gamma_beta/" + tag, kTolerance,
            [&](const VectorXd& raw) {
              DivParams probe = div;
              probe.set_raw(raw);
              return entropy_loss_le<double>(p, probe);
            },
            div.raw(), analytic);
      }

      const MatrixXd batch_logits = 1.5 * sample_gaussian<double>(rng, m, k);
      VectorXd le(m);
      std::vector<DivergenceGrads<double>> per_row;
      for (Eigen::Index i = 0; i < m; ++i) {
        per_row.push_back(entropy_loss_le_grads<double>(softmax(batch_logits.row(i).transpose()), div));
        le[i] = per_row.back().value;
      }
      const MinMax<double> extremes = batch_extremes(le);
      MatrixXd analytic(m, k);
      for (Eigen::Index i = 0; i < m; ++i)
        analytic.row(i) = (extremes.scale() / static_cast<double>(m)) *
                          softmax_backward<double>(softmax(batch_logits.row(i).transpose()), per_row[i].d_p)
                              .transpose();
      checker.check(
          "entropy_loss_normalized/" + tag, kTolerance,
          [&](const VectorXd& flat) {
            const MatrixXd l = flat.reshaped<Eigen::RowMajor>(m, k);
            VectorXd values(m);
            for (Eigen::Index i = 0; i < m; ++i) values[i] = entropy_loss_le<double>(softmax(l.row(i).transpose()), div);
            return batch_minmax_normalize(values, std::optional(extremes)).mean();
          },
          VectorXd(batch_logits.reshaped<Eigen::RowMajor>()), VectorXd(analytic.reshaped<Eigen::RowMajor>()));
    }

    // Losses over small generator/critic pairs.
    const SmallNets nets = small_nets(rng, k, c % 2 == 0);
    const SeenBatch seen = seen_batch(rng, nets, m);
    const HallucinatedBatch halluc = hallucinated_batch(rng, nets, m);
    const DivParams div = random_divergence(rng, c == 1 ? 3 : c % 3);
    const double lambda = std::array<double, 3>{0.1, 1.0, 10.0}[static_cast<std::size_t>(c % 3)];

    CreativityOptions copts;
    copts.lambda = lambda;
    copts.frozen_extremes = creativity_loss(nets.generator, nets.discriminator, halluc, div, copts).extremes;
    const auto creative = creativity_loss(nets.generator, nets.discriminator, halluc, div, copts);
    checker.check(
        "creativity_loss/generator", kTolerance,
        [&](const VectorXd& p) {
          Gen probe = nets.generator;
          probe.set_params(p);
          return creativity_loss(probe, nets.discriminator, halluc, div, copts).value;
        },
        nets.generator.params(), creative.grad_generator);
    checker.check(
        "creativity_loss/gamma_beta", kTolerance,
        [&](const VectorXd& raw) {
          DivParams probe = div;
          probe.set_raw(raw);
          return creativity_loss(nets.generator, nets.discriminator, halluc, probe, copts).value;
        },
        div.raw(), creative.grad_divergence);

    const auto pivot = visual_pivot(nets.generator, seen, nets.centers);
    checker.check(
        "visual_pivot/generator", kTolerance,
        [&](const VectorXd& p) {
          Gen probe = nets.generator;
          probe.set_params(p);
          return visual_pivot(probe, seen, nets.centers).value;
        },
        nets.generator.params(), pivot.grad_generator);

    GeneratorLossOptions gopts;
    gopts.creativity = copts;
    const auto gl = generator_loss(nets.generator, nets.discriminator, seen, halluc, div, nets.centers, gopts);
    checker.check(
        "generator_loss/generator", kTolerance,
        [&](const VectorXd& p) {
          Gen probe = nets.generator;
          probe.set_params(p);
          return generator_loss(probe, nets.discriminator, seen, halluc, div, nets.centers, gopts).value;
        },
        nets.generator.params(), gl.grad_generator);
    checker.check(
        "generator_loss/gamma_beta", kTolerance,
        [&](const VectorXd& raw) {
          DivParams probe = div;
          probe.set_raw(raw);
          return generator_loss(nets.generator, nets.discriminator, seen, halluc, probe, nets.centers, gopts).value;
        },
        div.raw(), gl.grad_divergence);

    RealBatch real;
    real.features = sample_gaussian<double>(rng, m, nets.generator.output_dim());
    real.labels = seen.labels;
    VectorXd eps(m);
    for (Eigen::Index i = 0; i < m; ++i) eps[i] = sample_uniform(rng, 0.0, 1.0);
    const double gp_weight = c == 0 ? 1.0 : 10.0;
    const auto dl = discriminator_loss(nets.discriminator, nets.generator, real, seen, eps, gp_weight);
    checker.check(
        "discriminator_loss/critic", kPenaltyTolerance,
        [&](const VectorXd& p) {
          Disc probe = nets.discriminator;
          probe.set_params(p);
          return discriminator_loss(probe, nets.generator, real, seen, eps, gp_weight).value;
        },
        nets.discriminator.params(), dl.grad_discriminator);
    const auto gp = nets.discriminator.gradient_penalty(real.features);
    checker.check(
        "gradient_penalty/critic", kPenaltyTolerance,
        [&](const VectorXd& p) {
          Disc probe = nets.discriminator;
          probe.set_params(p);
          return probe.gradient_penalty(real.features).penalty;
        },
        nets.discriminator.params(), gp.param_grad);
  }
  return checker.take();
}

}  // namespace cizsl
