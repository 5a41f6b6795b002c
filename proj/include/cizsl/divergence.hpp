#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "cizsl/error.hpp"
#include "cizsl/numerics.hpp"

namespace cizsl {

enum class DivergenceMode { SharmaMittal, KL, Renyi, Tsallis, Bhattacharyya };

std::string_view to_string(DivergenceMode mode);
DivergenceMode parse_divergence_mode(std::string_view name);

/// Selects a member of the Sharma-Mittal family.
///
/// gamma is stored as log_gamma so that unconstrained optimizer steps keep
/// gamma > 0. Which of (gamma, beta) are free depends on the mode: renyi
/// pins beta -> 1, tsallis ties beta = gamma, kl and bhattacharyya have no
/// free parameters.
template <typename Scalar>
struct DivergenceParams {
  DivergenceMode mode = DivergenceMode::SharmaMittal;
  Scalar log_gamma = std::log(Scalar(0.5));
  Scalar beta_value = Scalar(0.5);
  bool learn_gamma = false;
  bool learn_beta = false;
  Scalar guard = Scalar(1e-3);

  static DivergenceParams sharma_mittal(Scalar gamma, Scalar beta, bool learnable = false) {
    require(gamma > Scalar(0), ErrorKind::InvalidConfig, "sharma-mittal: gamma must be > 0");
    return {DivergenceMode::SharmaMittal, std::log(gamma), beta, learnable, learnable};
  }
  static DivergenceParams kl() { return {DivergenceMode::KL, Scalar(0), Scalar(1)}; }
  static DivergenceParams renyi(Scalar gamma, bool learnable = false) {
    require(gamma > Scalar(0), ErrorKind::InvalidConfig, "renyi: gamma must be > 0");
    return {DivergenceMode::Renyi, std::log(gamma), Scalar(1), learnable, false};
  }
  static DivergenceParams tsallis(Scalar gamma, bool learnable = false) {
    require(gamma > Scalar(0), ErrorKind::InvalidConfig, "tsallis: gamma must be > 0");
    return {DivergenceMode::Tsallis, std::log(gamma), gamma, learnable, false};
  }
  static DivergenceParams bhattacharyya() {
    return {DivergenceMode::Bhattacharyya, std::log(Scalar(0.5)), Scalar(1)};
  }

  /// Effective gamma of the selected member.
  Scalar gamma() const {
    switch (mode) {
      case DivergenceMode::KL: return Scalar(1);
      case DivergenceMode::Bhattacharyya: return Scalar(0.5);
      default: return std::exp(log_gamma);
    }
  }

  /// Effective beta of the selected member.
  Scalar beta() const {
    switch (mode) {
      case DivergenceMode::SharmaMittal: return beta_value;
      case DivergenceMode::Tsallis: return gamma();
      default: return Scalar(1);
    }
  }

  bool any_learnable() const { return learn_gamma || learn_beta; }

  void validate() const {
    require(guard > Scalar(0), ErrorKind::InvalidConfig, "divergence: guard epsilon must be positive");
    require(std::isfinite(log_gamma) && std::isfinite(beta_value), ErrorKind::InvalidConfig,
            "divergence: non-finite gamma/beta");
    switch (mode) {
      case DivergenceMode::KL:
      case DivergenceMode::Bhattacharyya:
        require(!learn_gamma && !learn_beta, ErrorKind::InvalidConfig,
                std::string(to_string(mode)) + " has no learnable parameters");
        break;
      case DivergenceMode::Renyi:
      case DivergenceMode::Tsallis:
        require(!learn_beta, ErrorKind::InvalidConfig,
                std::string(to_string(mode)) + " pins beta; only gamma may be learnable");
        break;
      case DivergenceMode::SharmaMittal: break;
    }
  }

  /// Unconstrained optimizer view (log_gamma, beta).
  Vector<Scalar> raw() const {
    Vector<Scalar> v(2);
    v << log_gamma, beta_value;
    return v;
  }
  void set_raw(const Vector<Scalar>& v) {
    require(v.size() == 2, ErrorKind::InvalidInput, "DivergenceParams::set_raw: expected two values");
    log_gamma = v[0];
    beta_value = mode == DivergenceMode::Tsallis ? std::exp(v[0]) : v[1];
  }
};

/// Partial derivatives of a divergence value. d_gamma/d_beta are taken
/// w.r.t. the effective gamma and beta; for tsallis d_gamma is the total
/// derivative along beta = gamma and d_beta is zero.
template <typename Scalar>
struct DivergenceGrads {
  Scalar value = Scalar(0);
  Vector<Scalar> d_p;
  Scalar d_gamma = Scalar(0);
  Scalar d_beta = Scalar(0);
};

namespace detail {

template <typename Scalar>
void check_distributions(const Vector<Scalar>& p, const Vector<Scalar>& q) {
  require(p.size() == q.size(), ErrorKind::InvalidInput, "divergence: p and q differ in length");
  require(p.size() >= 2, ErrorKind::InvalidInput, "divergence: need at least two outcomes");
  require(p.allFinite() && q.allFinite(), ErrorKind::InvalidInput, "divergence: non-finite probability");
  require((p.array() >= Scalar(0)).all() && (q.array() >= Scalar(0)).all(), ErrorKind::InvalidInput,
          "divergence: negative probability");
  require(std::abs(p.sum() - Scalar(1)) <= Scalar(1e-9) && std::abs(q.sum() - Scalar(1)) <= Scalar(1e-9),
          ErrorKind::InvalidInput, "divergence: probabilities must sum to 1");
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > Scalar(0) && q[i] == Scalar(0))
      fail(ErrorKind::DivergenceUndefined, "divergence: q is zero where p is positive (index " + std::to_string(i) + ")");
}

// Sum_i p_i^gamma q_i^(1-gamma) over the support of p, and its gamma-derivative.
template <typename Scalar>
std::pair<Scalar, Scalar> power_sum(const Vector<Scalar>& p, const Vector<Scalar>& q, Scalar gamma) {
  Scalar s = 0, ds = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] == Scalar(0)) continue;
    const Scalar term = std::pow(p[i], gamma) * std::pow(q[i], Scalar(1) - gamma);
    s += term;
    ds += term * std::log(p[i] / q[i]);
  }
  return {s, ds};
}

template <typename Scalar>
Vector<Scalar> power_sum_dp(const Vector<Scalar>& p, const Vector<Scalar>& q, Scalar gamma) {
  Vector<Scalar> d(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i)
    d[i] = gamma * std::pow(p[i], gamma - Scalar(1)) * std::pow(q[i], Scalar(1) - gamma);
  return d;
}

// Mean and second moment of log(p/q) under p; mean is KL(p||q).
template <typename Scalar>
std::pair<Scalar, Scalar> log_ratio_moments(const Vector<Scalar>& p, const Vector<Scalar>& q) {
  Scalar m1 = 0, m2 = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] == Scalar(0)) continue;
    const Scalar l = std::log(p[i] / q[i]);
    m1 += p[i] * l;
    m2 += p[i] * l * l;
  }
  return {m1, m2};
}

template <typename Scalar>
Vector<Scalar> kl_dp(const Vector<Scalar>& p, const Vector<Scalar>& q) {
  return ((p.array() / q.array()).log() + Scalar(1)).matrix();
}

}  // namespace detail

/// Literal two-parameter form (1/(beta-1)) [ S^((1-beta)/(1-gamma)) - 1 ],
/// S = sum_i p_i^gamma q_i^(1-gamma). No limit dispatch; undefined at
/// gamma = 1 or beta = 1.
template <typename Scalar>
Scalar sharma_mittal_closed_form(const Vector<Scalar>& p, const Vector<Scalar>& q, Scalar gamma, Scalar beta) {
  detail::check_distributions(p, q);
  require(gamma > Scalar(0) && gamma != Scalar(1) && beta != Scalar(1), ErrorKind::InvalidInput,
          "sharma_mittal_closed_form: requires gamma > 0, gamma != 1, beta != 1");
  const Scalar s = detail::power_sum(p, q, gamma).first;
  return (std::pow(s, (Scalar(1) - beta) / (Scalar(1) - gamma)) - Scalar(1)) / (beta - Scalar(1));
}

template <typename Scalar>
Scalar kl_divergence(const Vector<Scalar>& p, const Vector<Scalar>& q) {
  detail::check_distributions(p, q);
  return detail::log_ratio_moments(p, q).first;
}

template <typename Scalar>
Scalar renyi_divergence(const Vector<Scalar>& p, const Vector<Scalar>& q, Scalar gamma) {
  detail::check_distributions(p, q);
  return std::log(detail::power_sum(p, q, gamma).first) / (gamma - Scalar(1));
}

template <typename Scalar>
Scalar tsallis_divergence(const Vector<Scalar>& p, const Vector<Scalar>& q, Scalar gamma) {
  detail::check_distributions(p, q);
  return (detail::power_sum(p, q, gamma).first - Scalar(1)) / (gamma - Scalar(1));
}

template <typename Scalar>
Scalar bhattacharyya_divergence(const Vector<Scalar>& p, const Vector<Scalar>& q) {
  detail::check_distributions(p, q);
  return -std::log((p.array() * q.array()).sqrt().sum());
}

/// Value and analytic gradients of the selected divergence. Parameters
/// within `guard` of a removable singularity (gamma = 1 or beta = 1)
/// dispatch to the limit formula and its first-order expansion.
template <typename Scalar>
DivergenceGrads<Scalar> sm_divergence_grads(const Vector<Scalar>& p, const Vector<Scalar>& q,
                                            const DivergenceParams<Scalar>& params) {
  params.validate();
  detail::check_distributions(p, q);
  const Scalar gamma = params.gamma();
  const Scalar beta = params.beta();
  const bool gamma_at_one = std::abs(gamma - Scalar(1)) < params.guard;
  const bool beta_at_one = std::abs(beta - Scalar(1)) < params.guard;

  DivergenceGrads<Scalar> out;
  switch (params.mode) {
    case DivergenceMode::KL: {
      out.value = detail::log_ratio_moments(p, q).first;
      out.d_p = detail::kl_dp(p, q);
      return out;
    }
    case DivergenceMode::Bhattacharyya: {
      const Scalar bc = (p.array() * q.array()).sqrt().sum();
      out.value = -std::log(bc);
      out.d_p = (Scalar(-0.5) * (q.array() / p.array()).sqrt() / bc).matrix();
      return out;
    }
    case DivergenceMode::Renyi: {
      if (gamma_at_one) {
        const auto [kl, m2] = detail::log_ratio_moments(p, q);
        out.value = kl;
        out.d_p = detail::kl_dp(p, q);
        out.d_gamma = (m2 - kl * kl) / Scalar(2);
        return out;
      }
      const auto [s, ds] = detail::power_sum(p, q, gamma);
      const Scalar g1 = gamma - Scalar(1);
      out.value = std::log(s) / g1;
      out.d_p = detail::power_sum_dp(p, q, gamma) / (s * g1);
      out.d_gamma = ds / (s * g1) - std::log(s) / (g1 * g1);
      return out;
    }
    case DivergenceMode::Tsallis: {
      if (gamma_at_one) {
        const auto [kl, m2] = detail::log_ratio_moments(p, q);
        out.value = kl;
        out.d_p = detail::kl_dp(p, q);
        out.d_gamma = m2 / Scalar(2);
        return out;
      }
      const auto [s, ds] = detail::power_sum(p, q, gamma);
      const Scalar g1 = gamma - Scalar(1);
      out.value = (s - Scalar(1)) / g1;
      out.d_p = detail::power_sum_dp(p, q, gamma) / g1;
      out.d_gamma = ds / g1 - (s - Scalar(1)) / (g1 * g1);
      return out;
    }
    case DivergenceMode::SharmaMittal: break;
  }

  if (gamma_at_one) {
    // Renyi order -> 1 gives KL; SM reduces to expm1((beta-1) KL) / (beta-1).
    const auto [kl, m2] = detail::log_ratio_moments(p, q);
    const Scalar var_half = (m2 - kl * kl) / Scalar(2);
    const Vector<Scalar> kl_grad = detail::kl_dp(p, q);
    if (beta_at_one) {
      out.value = kl;
      out.d_p = kl_grad;
      out.d_gamma = var_half;
      out.d_beta = kl * kl / Scalar(2);
      return out;
    }
    const Scalar c = beta - Scalar(1);
    const Scalar e = std::exp(c * kl);
    out.value = std::expm1(c * kl) / c;
    out.d_p = e * kl_grad;
    out.d_gamma = e * var_half;
    out.d_beta = (kl * e * c - std::expm1(c * kl)) / (c * c);
    return out;
  }

  const auto [s, ds] = detail::power_sum(p, q, gamma);
  const Scalar g1 = gamma - Scalar(1);
  const Scalar log_s = std::log(s);
  if (beta_at_one) {
    // Renyi limit; SM = R + (beta-1) R^2 / 2 + O((beta-1)^2).
    const Scalar r = log_s / g1;
    out.value = r;
    out.d_p = detail::power_sum_dp(p, q, gamma) / (s * g1);
    out.d_gamma = ds / (s * g1) - log_s / (g1 * g1);
    out.d_beta = r * r / Scalar(2);
    return out;
  }

  const Scalar b1 = beta - Scalar(1);
  const Scalar expo = (Scalar(1) - beta) / (Scalar(1) - gamma);
  const Scalar s_pow = std::pow(s, expo);
  const Scalar d_value_d_s = s_pow / (s * g1);
  out.value = (s_pow - Scalar(1)) / b1;
  out.d_p = d_value_d_s * detail::power_sum_dp(p, q, gamma);
  out.d_gamma = d_value_d_s * ds - s_pow * log_s / (g1 * g1);
  out.d_beta = -s_pow * log_s / ((Scalar(1) - gamma) * b1) - (s_pow - Scalar(1)) / (b1 * b1);
  return out;
}

template <typename Scalar>
Scalar sm_divergence(const Vector<Scalar>& p, const Vector<Scalar>& q, const DivergenceParams<Scalar>& params) {
  params.validate();
  detail::check_distributions(p, q);
  switch (params.mode) {
    case DivergenceMode::KL: return detail::log_ratio_moments(p, q).first;
    case DivergenceMode::Bhattacharyya: return -std::log((p.array() * q.array()).sqrt().sum());
    default: break;
  }
  // The remaining modes share the guarded evaluation.
  auto pp = params;
  pp.learn_gamma = pp.learn_beta = false;
  return sm_divergence_grads(p, q, pp).value;
}

template <typename Scalar>
Vector<Scalar> uniform_distribution(Eigen::Index k) {
  return Vector<Scalar>::Constant(k, Scalar(1) / static_cast<Scalar>(k));
}

/// Divergence of seen-class probabilities from the uniform distribution;
/// zero exactly at uniform.
template <typename Scalar>
Scalar entropy_loss_le(const Vector<Scalar>& class_probs, const DivergenceParams<Scalar>& params) {
  require(class_probs.size() >= 2, ErrorKind::InvalidInput, "entropy_loss_le: need at least two seen classes");
  return sm_divergence(class_probs, uniform_distribution<Scalar>(class_probs.size()), params);
}

template <typename Scalar>
DivergenceGrads<Scalar> entropy_loss_le_grads(const Vector<Scalar>& class_probs,
                                              const DivergenceParams<Scalar>& params) {
  require(class_probs.size() >= 2, ErrorKind::InvalidInput, "entropy_loss_le: need at least two seen classes");
  return sm_divergence_grads(class_probs, uniform_distribution<Scalar>(class_probs.size()), params);
}

/// Extremes used by batch min-max normalization; they carry no gradient.
template <typename Scalar>
struct MinMax {
  Scalar min = Scalar(0);
  Scalar max = Scalar(0);

  bool degenerate() const { return !(max > min); }
  /// d(normalized)/d(value); zero for a degenerate batch.
  Scalar scale() const { return degenerate() ? Scalar(0) : Scalar(1) / (max - min); }
  Scalar apply(Scalar v) const { return degenerate() ? Scalar(0.5) : (v - min) / (max - min); }
};

template <typename Scalar>
MinMax<Scalar> batch_extremes(const Vector<Scalar>& values) {
  require(values.size() >= 1, ErrorKind::InvalidInput, "batch_minmax_normalize: empty batch");
  return {values.minCoeff(), values.maxCoeff()};
}

/// (v - min) / (max - min) per element; an all-equal batch maps to 0.5.
template <typename Scalar>
Vector<Scalar> batch_minmax_normalize(const Vector<Scalar>& values,
                                      std::optional<MinMax<Scalar>> frozen = std::nullopt) {
  const MinMax<Scalar> mm = frozen ? *frozen : batch_extremes(values);
  return values.unaryExpr([&](Scalar v) { return mm.apply(v); });
}

inline std::string_view to_string(DivergenceMode mode) {
  switch (mode) {
    case DivergenceMode::SharmaMittal: return "sharma-mittal";
    case DivergenceMode::KL: return "kl";
    case DivergenceMode::Renyi: return "renyi";
    case DivergenceMode::Tsallis: return "tsallis";
    case DivergenceMode::Bhattacharyya: return "bhattacharyya";
  }
  return "unknown";
}

inline DivergenceMode parse_divergence_mode(std::string_view name) {
  for (auto m : {DivergenceMode::SharmaMittal, DivergenceMode::KL, DivergenceMode::Renyi, DivergenceMode::Tsallis,
                 DivergenceMode::Bhattacharyya})
    if (to_string(m) == name) return m;
  fail(ErrorKind::InvalidConfig, "unknown divergence mode '" + std::string(name) + "'");
}

}  // namespace cizsl
