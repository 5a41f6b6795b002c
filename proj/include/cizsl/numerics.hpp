#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "cizsl/error.hpp"

namespace cizsl {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Batches are stored one sample per row.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// Max-subtracted softmax.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  require(logits.size() > 0, ErrorKind::InvalidInput, "softmax: empty logits");
  require(logits.allFinite(), ErrorKind::InvalidInput, "softmax: non-finite logits");
  const Scalar top = logits.maxCoeff();
  Vector<Scalar> e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
Vector<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  require(logits.size() > 0, ErrorKind::InvalidInput, "log_softmax: empty logits");
  require(logits.allFinite(), ErrorKind::InvalidInput, "log_softmax: non-finite logits");
  const Scalar top = logits.maxCoeff();
  const Scalar lse = top + std::log((logits.array() - top).exp().sum());
  return (logits.array() - lse).matrix();
}

/// Row-wise softmax of a batch of logits.
template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) out.row(r) = softmax(logits.row(r).transpose()).transpose();
  return out;
}

template <typename Scalar>
Matrix<Scalar> log_softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) out.row(r) = log_softmax(logits.row(r).transpose()).transpose();
  return out;
}

/// Pulls a gradient w.r.t. softmax probabilities back to the logits:
/// J^T g = p * (g - <p, g>).
template <typename Scalar>
Vector<Scalar> softmax_backward(const Vector<Scalar>& probs, const Vector<Scalar>& grad_probs) {
  return (probs.array() * (grad_probs.array() - probs.dot(grad_probs))).matrix();
}

template <typename Scalar>
struct AdamConfig {
  Scalar learning_rate = Scalar(0.001);
  Scalar beta1 = Scalar(0.5);
  Scalar beta2 = Scalar(0.9);
  Scalar epsilon = Scalar(1e-8);
};

template <typename Scalar>
struct AdamState {
  Vector<Scalar> first_moment;
  Vector<Scalar> second_moment;
  std::uint64_t step = 0;
  AdamConfig<Scalar> config;

  AdamState() = default;
  explicit AdamState(Eigen::Index size, AdamConfig<Scalar> cfg = {})
      : first_moment(Vector<Scalar>::Zero(size)), second_moment(Vector<Scalar>::Zero(size)), config(cfg) {}
};

template <typename Scalar>
struct AdamResult {
  Vector<Scalar> params;
  AdamState<Scalar> state;
};

/// Bias-corrected Adam update. An all-zero gradient leaves the parameters
/// untouched for any state; the moments still decay and the step count
/// still advances.
template <typename Scalar>
AdamResult<Scalar> adam_step(const Vector<Scalar>& params, const Vector<Scalar>& grad, AdamState<Scalar> state) {
  require(params.size() == grad.size() && params.size() == state.first_moment.size() &&
              params.size() == state.second_moment.size(),
          ErrorKind::InvalidInput, "adam_step: length mismatch");
  const auto& c = state.config;
  state.step += 1;
  state.first_moment = c.beta1 * state.first_moment + (Scalar(1) - c.beta1) * grad;
  state.second_moment = c.beta2 * state.second_moment + (Scalar(1) - c.beta2) * grad.cwiseAbs2();
  const Scalar t = static_cast<Scalar>(state.step);
  const Scalar corr1 = Scalar(1) - std::pow(c.beta1, t);
  const Scalar corr2 = Scalar(1) - std::pow(c.beta2, t);
  Vector<Scalar> out = params;
  if ((grad.array() == Scalar(0)).all()) return {std::move(out), std::move(state)};
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const Scalar m_hat = state.first_moment[i] / corr1;
    const Scalar v_hat = state.second_moment[i] / corr2;
    out[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
  return {std::move(out), std::move(state)};
}

/// Central-difference gradient oracle.
template <typename Scalar, typename Fn>
Vector<Scalar> finite_diff_gradient(Fn&& f, const Vector<Scalar>& x, Scalar h) {
  require(h > Scalar(0), ErrorKind::InvalidInput, "finite_diff_gradient: h must be positive");
  Vector<Scalar> grad(x.size());
  Vector<Scalar> probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Scalar orig = probe[i];
    probe[i] = orig + h;
    const Scalar up = static_cast<Scalar>(f(probe));
    probe[i] = orig - h;
    const Scalar down = static_cast<Scalar>(f(probe));
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      fail(ErrorKind::OracleFailure, "finite_diff_gradient: non-finite value at coordinate " + std::to_string(i));
    grad[i] = (up - down) / (Scalar(2) * h);
  }
  return grad;
}

/// ||a - b|| / max(||a||, ||b||, floor): the comparison used by every
/// gradient check in the project.
template <typename Scalar>
Scalar relative_error(const Vector<Scalar>& a, const Vector<Scalar>& b, Scalar floor = Scalar(1e-10)) {
  const Scalar scale = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / scale;
}

}  // namespace cizsl
