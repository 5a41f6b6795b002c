#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cizsl {

struct GradCheckOptions {
  std::uint64_t seed = 0;
  int configs_per_check = 3;
  double step = 1e-5;
  /// Scales every analytic gradient by 1.01 before comparing; the run must fail.
  bool corrupt = false;
};

struct GradCheckEntry {
  std::string name;
  int configs = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  int total_configs() const;
  bool passed() const;
};

/// Central finite differences against every analytic gradient: softmax,
/// network backward, L_e through the softmax and batch normalization, the
/// divergence parameters, the creativity loss, the visual pivot, the full
/// generator loss and the critic loss including its gradient penalty.
GradCheckReport run_gradcheck(const GradCheckOptions& options = {});

}  // namespace cizsl
