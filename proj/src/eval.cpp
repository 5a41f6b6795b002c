#include "cizsl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "cizsl/error.hpp"

namespace cizsl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct LabelSpace {
  std::vector<ClassId> ids;  // ascending
  std::vector<bool> seen;
  MatrixXd centers;
};

LabelSpace joint_space(const ClassCenters& seen, const ClassCenters& unseen) {
  std::vector<std::pair<ClassId, std::pair<bool, Eigen::Index>>> all;
  for (Eigen::Index r = 0; r < seen.size(); ++r) all.push_back({seen.ids[static_cast<std::size_t>(r)], {true, r}});
  for (Eigen::Index r = 0; r < unseen.size(); ++r)
    all.push_back({unseen.ids[static_cast<std::size_t>(r)], {false, r}});
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < all.size(); ++i)
    require(all[i].first != all[i - 1].first, ErrorKind::InvalidInput,
            "seen and unseen centers share class-id " + std::to_string(all[i].first));
  LabelSpace space;
  const Eigen::Index dim = seen.size() > 0 ? seen.centers.cols() : unseen.centers.cols();
  space.centers.resize(static_cast<Eigen::Index>(all.size()), dim);
  for (std::size_t i = 0; i < all.size(); ++i) {
    space.ids.push_back(all[i].first);
    space.seen.push_back(all[i].second.first);
    const auto& src = all[i].second.first ? seen.centers : unseen.centers;
    space.centers.row(static_cast<Eigen::Index>(i)) = src.row(all[i].second.second);
  }
  return space;
}

// Index of the best column; strict comparison keeps the smallest index on ties.
template <typename Pred>
Eigen::Index argmax_where(const MatrixXd& scores, Eigen::Index row, const std::vector<bool>& seen, double calibration,
                          Pred include) {
  Eigen::Index best = -1;
  double best_score = -kInf;
  for (Eigen::Index k = 0; k < scores.cols(); ++k) {
    if (!include(seen[static_cast<std::size_t>(k)])) continue;
    const double s = scores(row, k) - (seen[static_cast<std::size_t>(k)] ? calibration : 0.0);
    if (best < 0 || s > best_score) {
      best = k;
      best_score = s;
    }
  }
  return best;
}

// Macro accuracy over the classes that occur among the rows in `rows`.
double macro_accuracy(const std::vector<ClassId>& labels, const std::vector<ClassId>& predicted,
                      const std::vector<std::size_t>& rows) {
  std::map<ClassId, std::pair<int, int>> per_class;
  for (std::size_t i : rows) {
    auto& [hit, total] = per_class[labels[i]];
    total += 1;
    if (predicted[i] == labels[i]) hit += 1;
  }
  if (per_class.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [id, counts] : per_class) sum += static_cast<double>(counts.first) / counts.second;
  return sum / static_cast<double>(per_class.size());
}

}  // namespace

std::string_view to_string(Metric metric) { return metric == Metric::L2 ? "l2" : "cosine"; }

Metric parse_metric(std::string_view name) {
  if (name == "l2") return Metric::L2;
  if (name == "cosine") return Metric::Cosine;
  fail(ErrorKind::InvalidConfig, "unknown metric '" + std::string(name) + "'");
}

ClassCenters synthesize_centers(const Generator<double>& generator, const std::vector<ClassId>& ids,
                                const MatrixXd& descriptors, int samples, RngStream& rng) {
  require(samples >= 1, ErrorKind::InvalidInput, "synthesize_centers: need at least one sample per class");
  require(descriptors.rows() == static_cast<Eigen::Index>(ids.size()), ErrorKind::InvalidInput,
          "synthesize_centers: one descriptor per class id");
  require(std::is_sorted(ids.begin(), ids.end()), ErrorKind::InvalidInput, "synthesize_centers: ids must be ascending");
  ClassCenters out;
  out.ids = ids;
  out.source = ClassCenters::Source::Generated;
  out.samples_per_class = samples;
  out.centers.resize(descriptors.rows(), generator.output_dim());
  for (Eigen::Index r = 0; r < descriptors.rows(); ++r) {
    MatrixXd texts = descriptors.row(r).replicate(samples, 1);
    MatrixXd noise = sample_gaussian(rng, samples, generator.noise_dim());
    out.centers.row(r) = generator.forward(texts, noise).colwise().mean();
  }
  return out;
}

ClassCenters synthesize_centers(const Generator<double>& generator, const ZslDataset& dataset,
                                const std::vector<ClassId>& ids, int samples, RngStream& rng) {
  std::vector<ClassId> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  return synthesize_centers(generator, sorted, dataset.descriptors(sorted), samples, rng);
}

MatrixXd center_scores(const MatrixXd& features, const MatrixXd& centers, Metric metric) {
  require(features.cols() == centers.cols(), ErrorKind::InvalidInput, "center_scores: dimension mismatch");
  MatrixXd scores(features.rows(), centers.rows());
  if (metric == Metric::L2) {
    for (Eigen::Index i = 0; i < features.rows(); ++i)
      for (Eigen::Index k = 0; k < centers.rows(); ++k) scores(i, k) = -(features.row(i) - centers.row(k)).norm();
  } else {
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      const double fn = features.row(i).norm();
      for (Eigen::Index k = 0; k < centers.rows(); ++k) {
        const double denom = fn * centers.row(k).norm();
        scores(i, k) = denom > 0.0 ? features.row(i).dot(centers.row(k)) / denom : 0.0;
      }
    }
  }
  return scores;
}

std::vector<ClassId> nearest_center(const MatrixXd& features, const ClassCenters& centers, Metric metric) {
  require(centers.size() >= 1, ErrorKind::InvalidInput, "nearest_center: no centers");
  const MatrixXd scores = center_scores(features, centers.centers, metric);
  const std::vector<bool> flags(static_cast<std::size_t>(centers.size()), false);
  std::vector<ClassId> out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    out[static_cast<std::size_t>(i)] =
        centers.ids[static_cast<std::size_t>(argmax_where(scores, i, flags, 0.0, [](bool) { return true; }))];
  return out;
}

double zsl_top1(const MatrixXd& features, const std::vector<ClassId>& labels, const ClassCenters& centers,
                Metric metric) {
  require(!labels.empty(), ErrorKind::InvalidInput, "zsl_top1: empty test set");
  require(static_cast<std::size_t>(features.rows()) == labels.size(), ErrorKind::InvalidInput,
          "zsl_top1: feature rows and labels differ");
  for (ClassId l : labels)
    require(centers.contains(l), ErrorKind::InvalidInput, "zsl_top1: no center for label " + std::to_string(l));
  const auto predicted = nearest_center(features, centers, metric);
  std::vector<std::size_t> rows(labels.size());
  std::iota(rows.begin(), rows.end(), 0);
  return macro_accuracy(labels, predicted, rows);
}

double curve_auc(std::vector<CurvePoint> points) {
  std::sort(points.begin(), points.end(), [](const CurvePoint& a, const CurvePoint& b) {
    if (a.acc_unseen != b.acc_unseen) return a.acc_unseen < b.acc_unseen;
    return a.acc_seen > b.acc_seen;
  });
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].acc_unseen - points[i - 1].acc_unseen) * (points[i].acc_seen + points[i - 1].acc_seen) / 2.0;
  return area;
}

std::vector<double> default_calibration_grid(const MatrixXd& features, const ClassCenters& seen_centers,
                                             const ClassCenters& unseen_centers, Metric metric, int count) {
  require(count >= 1, ErrorKind::InvalidInput, "calibration grid: count must be >= 1");
  const MatrixXd seen_scores = center_scores(features, seen_centers.centers, metric);
  const MatrixXd unseen_scores = center_scores(features, unseen_centers.centers, metric);
  double gap = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    gap = std::max(gap, std::abs(seen_scores.row(i).maxCoeff() - unseen_scores.row(i).maxCoeff()));
  if (count == 1 || gap == 0.0) return {0.0};
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = -gap + 2.0 * gap * i / (count - 1);
  return grid;
}

SeenUnseenCurve seen_unseen_curve(const MatrixXd& features, const std::vector<ClassId>& labels,
                                  const ClassCenters& seen_centers, const ClassCenters& unseen_centers,
                                  const std::vector<double>& grid, Metric metric, std::optional<ClassFilter> filter) {
  require(!grid.empty(), ErrorKind::InvalidInput, "seen_unseen_curve: empty calibration grid");
  require(std::is_sorted(grid.begin(), grid.end()), ErrorKind::InvalidInput,
          "seen_unseen_curve: calibration grid must be sorted");
  for (double c : grid) require(std::isfinite(c), ErrorKind::InvalidInput, "seen_unseen_curve: non-finite calibration");
  require(static_cast<std::size_t>(features.rows()) == labels.size(), ErrorKind::InvalidInput,
          "seen_unseen_curve: feature rows and labels differ");
  require(seen_centers.size() >= 1 && unseen_centers.size() >= 1, ErrorKind::InvalidInput,
          "seen_unseen_curve: need seen and unseen centers");
  const LabelSpace space = joint_space(seen_centers, unseen_centers);
  const MatrixXd scores = center_scores(features, space.centers, metric);

  std::vector<std::size_t> seen_rows, unseen_rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const ClassId l = labels[i];
    if (seen_centers.contains(l)) {
      if (!filter || filter->seen == l) seen_rows.push_back(i);
    } else if (unseen_centers.contains(l)) {
      if (!filter || filter->unseen == l) unseen_rows.push_back(i);
    } else {
      fail(ErrorKind::InvalidInput, "seen_unseen_curve: no center for label " + std::to_string(l));
    }
  }
  require(!seen_rows.empty() && !unseen_rows.empty(), ErrorKind::InvalidInput,
          "seen_unseen_curve: both seen and unseen test populations must be non-empty");

  std::vector<ClassId> predicted(labels.size());
  auto evaluate = [&](double c, auto include) {
    for (auto* rows : {&seen_rows, &unseen_rows})
      for (std::size_t i : *rows)
        predicted[i] =
            space.ids[static_cast<std::size_t>(argmax_where(scores, static_cast<Eigen::Index>(i), space.seen, c, include))];
    return CurvePoint{c, macro_accuracy(labels, predicted, seen_rows), macro_accuracy(labels, predicted, unseen_rows)};
  };

  SeenUnseenCurve curve;
  CurvePoint low = evaluate(0.0, [](bool seen) { return seen; });
  curve.points.push_back({-kInf, low.acc_seen, 0.0});
  for (double c : grid) curve.points.push_back(evaluate(c, [](bool) { return true; }));
  CurvePoint high = evaluate(0.0, [](bool seen) { return !seen; });
  curve.points.push_back({kInf, 0.0, high.acc_unseen});
  curve.auc = curve_auc(curve.points);
  return curve;
}

CurvePoint accuracy_pair(const MatrixXd& features, const std::vector<ClassId>& labels,
                         const ClassCenters& seen_centers, const ClassCenters& unseen_centers, double calibration,
                         Metric metric) {
  auto curve = seen_unseen_curve(features, labels, seen_centers, unseen_centers, {calibration}, metric);
  return curve.points[1];
}

double harmonic_mean(double acc_seen, double acc_unseen) {
  const double sum = acc_seen + acc_unseen;
  return sum > 0.0 ? 2.0 * acc_seen * acc_unseen / sum : 0.0;
}

std::vector<double> retrieval_precision(const MatrixXd& features, const std::vector<ClassId>& labels,
                                        const ClassCenters& centers, const std::vector<double>& ratios,
                                        Metric metric) {
  require(static_cast<std::size_t>(features.rows()) == labels.size(), ErrorKind::InvalidInput,
          "retrieval_precision: feature rows and labels differ");
  require(centers.size() >= 1, ErrorKind::InvalidInput, "retrieval_precision: no centers");
  for (double r : ratios)
    require(r > 0.0 && r <= 1.0, ErrorKind::InvalidInput, "retrieval_precision: ratios must be in (0, 1]");
  const MatrixXd scores = center_scores(features, centers.centers, metric);
  std::vector<double> sums(ratios.size(), 0.0);
  std::vector<std::size_t> order(labels.size());
  for (Eigen::Index k = 0; k < centers.size(); ++k) {
    const ClassId id = centers.ids[static_cast<std::size_t>(k)];
    const auto n_true = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), id));
    require(n_true >= 1, ErrorKind::InvalidInput,
            "retrieval_precision: class " + std::to_string(id) + " has no test instances");
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores(static_cast<Eigen::Index>(a), k) > scores(static_cast<Eigen::Index>(b), k);
    });
    for (std::size_t r = 0; r < ratios.size(); ++r) {
      auto top = static_cast<std::size_t>(std::ceil(ratios[r] * static_cast<double>(n_true) - 1e-9));
      top = std::clamp<std::size_t>(top, 1, order.size());
      std::size_t hits = 0;
      for (std::size_t j = 0; j < top; ++j) hits += labels[order[j]] == id ? 1 : 0;
      sums[r] += static_cast<double>(hits) / static_cast<double>(top);
    }
  }
  for (auto& s : sums) s /= static_cast<double>(centers.size());
  return sums;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_curve_csv(const std::filesystem::path& path, const SeenUnseenCurve& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::InvalidInput, "cannot write " + path.string());
  out << "calibration,acc_seen,acc_unseen\n";
  for (const auto& p : curve.points)
    out << format_number(p.calibration) << ',' << format_number(p.acc_seen) << ',' << format_number(p.acc_unseen)
        << '\n';
}

std::string curve_svg(const SeenUnseenCurve& curve, const std::string& title) {
  constexpr double size = 400.0, margin = 50.0;
  std::vector<CurvePoint> pts = curve.points;
  std::stable_sort(pts.begin(), pts.end(),
                   [](const CurvePoint& a, const CurvePoint& b) { return a.acc_unseen < b.acc_unseen; });
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * margin << "\" height=\""
      << size + 2 * margin << "\">\n";
  svg << "  <title>" << title << " (AUC " << format_number(curve.auc) << ")</title>\n";
  svg << "  <text x=\"" << margin << "\" y=\"" << margin / 2 << "\" font-size=\"14\">" << title << " (AUC "
      << format_number(curve.auc) << ")</text>\n";
  svg << "  <rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\"" << size
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "  <text x=\"" << margin + size / 2 - 40 << "\" y=\"" << size + margin + 30
      << "\" font-size=\"12\">unseen accuracy</text>\n";
  svg << "  <text x=\"12\" y=\"" << margin + size / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 "
      << margin + size / 2 << ")\">seen accuracy</text>\n";
  svg << "  <polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (const auto& p : pts)
    svg << format_number(margin + p.acc_unseen * size) << ',' << format_number(margin + (1.0 - p.acc_seen) * size)
        << ' ';
  svg << "\"/>\n</svg>\n";
  return svg.str();
}

}  // namespace cizsl
