#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cizsl/data.hpp"
#include "cizsl/net.hpp"
#include "cizsl/rng.hpp"

namespace cizsl {

enum class Metric { L2, Cosine };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view name);

/// Center of G(t_u, z) over n noise draws, per class.
ClassCenters synthesize_centers(const Generator<double>& generator, const std::vector<ClassId>& ids,
                                const MatrixXd& descriptors, int samples, RngStream& rng);
ClassCenters synthesize_centers(const Generator<double>& generator, const ZslDataset& dataset,
                                const std::vector<ClassId>& ids, int samples, RngStream& rng);

/// Similarity of every row of `features` to every center; larger is closer.
/// L2 uses the negated Euclidean distance.
MatrixXd center_scores(const MatrixXd& features, const MatrixXd& centers, Metric metric);

/// Nearest-center class for each row; ties go to the smaller class-id.
std::vector<ClassId> nearest_center(const MatrixXd& features, const ClassCenters& centers, Metric metric);

/// Per-class accuracy averaged over the classes present in `labels`.
double zsl_top1(const MatrixXd& features, const std::vector<ClassId>& labels, const ClassCenters& centers,
                Metric metric = Metric::L2);

struct CurvePoint {
  double calibration = 0.0;
  double acc_seen = 0.0;
  double acc_unseen = 0.0;
};

struct SeenUnseenCurve {
  std::vector<CurvePoint> points;  // ascending calibration, infinite anchors at both ends
  double auc = 0.0;
};

/// Restricts the reported accuracy pair to one seen and one unseen class;
/// prediction still ranges over every class.
struct ClassFilter {
  ClassId seen;
  ClassId unseen;
};

/// Trapezoid area under the polyline through (acc_unseen, acc_seen) pairs
/// after sorting by acc_unseen.
double curve_auc(std::vector<CurvePoint> points);

/// Evenly spaced grid over [-D, D], D the largest gap between a sample's best
/// seen score and best unseen score.
std::vector<double> default_calibration_grid(const MatrixXd& features, const ClassCenters& seen_centers,
                                             const ClassCenters& unseen_centers, Metric metric, int count = 201);

/// Calibrated stacking: seen-class scores are lowered by c before the argmax.
SeenUnseenCurve seen_unseen_curve(const MatrixXd& features, const std::vector<ClassId>& labels,
                                  const ClassCenters& seen_centers, const ClassCenters& unseen_centers,
                                  const std::vector<double>& grid, Metric metric = Metric::L2,
                                  std::optional<ClassFilter> filter = std::nullopt);

/// Seen and unseen accuracy at one calibration value.
CurvePoint accuracy_pair(const MatrixXd& features, const std::vector<ClassId>& labels,
                         const ClassCenters& seen_centers, const ClassCenters& unseen_centers, double calibration,
                         Metric metric = Metric::L2);

double harmonic_mean(double acc_seen, double acc_unseen);

/// Precision@K per ratio, K = ceil(ratio * n_c), averaged over the classes
/// of `centers`. Ranking ties go to the smaller instance index.
std::vector<double> retrieval_precision(const MatrixXd& features, const std::vector<ClassId>& labels,
                                        const ClassCenters& centers, const std::vector<double>& ratios,
                                        Metric metric = Metric::L2);

void write_curve_csv(const std::filesystem::path& path, const SeenUnseenCurve& curve);
std::string curve_svg(const SeenUnseenCurve& curve, const std::string& title);

/// Six significant digits, used for every number the tools print.
std::string format_number(double v);

}  // namespace cizsl
