#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "amod/common.hpp"

namespace amod::gp {

enum class KernelKind { RBF, Periodic, Product };

/// Covariance function over scalar time (hours). The top-level
/// `output_scale` is the trainable signal variance; scales of Product
/// children are fixed multipliers and stay out of the hyperparameter vector.
struct KernelSpec {
  KernelKind kind = KernelKind::RBF;
  double lengthscale = 1.0;
  double period = 1.0;
  double output_scale = 1.0;
  std::vector<KernelSpec> children;

  static KernelSpec rbf(double lengthscale, double scale = 1.0) {
    return {KernelKind::RBF, lengthscale, 1.0, scale, {}};
  }
  static KernelSpec periodic(double lengthscale, double period, double scale = 1.0) {
    return {KernelKind::Periodic, lengthscale, period, scale, {}};
  }
  static KernelSpec product(KernelSpec a, KernelSpec b, double scale = 1.0) {
    return {KernelKind::Product, 1.0, 1.0, scale, {std::move(a), std::move(b)}};
  }
  /// RBF x Periodic.
  static KernelSpec locally_periodic(double rbf_lengthscale, double periodic_lengthscale,
                                     double period, double scale = 1.0) {
    return product(rbf(rbf_lengthscale), periodic(periodic_lengthscale, period), scale);
  }

  bool operator==(const KernelSpec&) const = default;
};

inline void validate(const KernelSpec& s) {
  if (!(s.output_scale >= 0.0) || !std::isfinite(s.output_scale))
    throw InvalidInput("kernel output scale must be finite and >= 0");
  switch (s.kind) {
    case KernelKind::RBF:
      if (!(s.lengthscale > 0.0) || !std::isfinite(s.lengthscale))
        throw InvalidInput("RBF lengthscale must be positive");
      break;
    case KernelKind::Periodic:
      if (!(s.lengthscale > 0.0) || !(s.period > 0.0) || !std::isfinite(s.lengthscale) ||
          !std::isfinite(s.period))
        throw InvalidInput("periodic lengthscale and period must be positive");
      break;
    case KernelKind::Product:
      if (s.children.size() != 2) throw InvalidInput("product kernel needs exactly two factors");
      for (const auto& c : s.children) validate(c);
      break;
  }
}

namespace detail {

inline std::size_t leaf_param_count(const KernelSpec& s) {
  switch (s.kind) {
    case KernelKind::RBF:
      return 1;
    case KernelKind::Periodic:
      return 2;
    case KernelKind::Product:
      return leaf_param_count(s.children[0]) + leaf_param_count(s.children[1]);
  }
  return 0;
}

// Value of the node (including its own scale) at lag d. When `g` is non-null
// it receives d value / d log(param) for the node's leaf parameters.
inline double eval_node(const KernelSpec& s, double d, double* g) {
  switch (s.kind) {
    case KernelKind::RBF: {
      const double r2 = d * d / (s.lengthscale * s.lengthscale);
      const double v = s.output_scale * std::exp(-0.5 * r2);
      if (g) g[0] = v * r2;
      return v;
    }
    case KernelKind::Periodic: {
      const double u = std::numbers::pi * d / s.period;
      const double sn = std::sin(u);
      const double l2 = s.lengthscale * s.lengthscale;
      const double v = s.output_scale * std::exp(-2.0 * sn * sn / l2);
      if (g) {
        g[0] = v * 4.0 * sn * sn / l2;
        g[1] = v * 2.0 * u * std::sin(2.0 * u) / l2;
      }
      return v;
    }
    case KernelKind::Product: {
      const std::size_t na = leaf_param_count(s.children[0]);
      const std::size_t nb = leaf_param_count(s.children[1]);
      const double a = eval_node(s.children[0], d, g);
      const double b = eval_node(s.children[1], d, g ? g + na : nullptr);
      if (g) {
        for (std::size_t i = 0; i < na; ++i) g[i] *= b * s.output_scale;
        for (std::size_t i = 0; i < nb; ++i) g[na + i] *= a * s.output_scale;
      }
      return s.output_scale * a * b;
    }
  }
  return 0.0;
}

inline void collect_leaf(const KernelSpec& s, std::vector<double>& out) {
  switch (s.kind) {
    case KernelKind::RBF:
      out.push_back(std::log(s.lengthscale));
      break;
    case KernelKind::Periodic:
      out.push_back(std::log(s.lengthscale));
      out.push_back(std::log(s.period));
      break;
    case KernelKind::Product:
      collect_leaf(s.children[0], out);
      collect_leaf(s.children[1], out);
      break;
  }
}

inline const double* assign_leaf(KernelSpec& s, const double* p) {
  switch (s.kind) {
    case KernelKind::RBF:
      s.lengthscale = std::exp(*p++);
      break;
    case KernelKind::Periodic:
      s.lengthscale = std::exp(*p++);
      s.period = std::exp(*p++);
      break;
    case KernelKind::Product:
      p = assign_leaf(s.children[0], p);
      p = assign_leaf(s.children[1], p);
      break;
  }
  return p;
}

}  // namespace detail

/// Number of trainable kernel hyperparameters: output scale plus leaf
/// lengthscales and periods.
inline std::size_t param_count(const KernelSpec& s) { return 1 + detail::leaf_param_count(s); }

/// Hyperparameters in log space, ordered [scale, leaves depth-first].
inline std::vector<double> log_params(const KernelSpec& s) {
  std::vector<double> out{std::log(s.output_scale)};
  detail::collect_leaf(s, out);
  return out;
}

inline KernelSpec with_log_params(KernelSpec s, std::span<const double> theta) {
  if (theta.size() != param_count(s)) throw InvalidInput("hyperparameter vector size mismatch");
  s.output_scale = std::exp(theta[0]);
  detail::assign_leaf(s, theta.data() + 1);
  return s;
}

inline double kernel_eval(const KernelSpec& s, double t, double t_prime) {
  return detail::eval_node(s, t - t_prime, nullptr);
}

/// Kernel value and its gradient over log-hyperparameters (size param_count).
inline double kernel_eval_grad(const KernelSpec& s, double t, double t_prime, double* grad) {
  const double v = detail::eval_node(s, t - t_prime, grad + 1);
  grad[0] = v;
  return v;
}

}  // namespace amod::gp
