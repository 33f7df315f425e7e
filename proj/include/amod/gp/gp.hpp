#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <numbers>
#include <vector>

#include "amod/common.hpp"
#include "amod/gp/kernel.hpp"
#include "amod/gp/toeplitz.hpp"

namespace amod::gp {

/// Scalar-input regression data: inputs in hours (strictly increasing),
/// targets as reals, and the observation noise variance.
struct GPTrainingSet {
  std::vector<double> inputs;
  std::vector<double> targets;
  double noise_variance = 1.0;
};

inline void validate(const GPTrainingSet& d) {
  if (d.inputs.empty()) throw InvalidInput("training set is empty");
  if (d.inputs.size() != d.targets.size()) throw InvalidInput("inputs and targets differ in length");
  if (!(d.noise_variance > 0.0) || !std::isfinite(d.noise_variance))
    throw InvalidInput("noise variance must be positive");
  for (std::size_t i = 0; i < d.inputs.size(); ++i) {
    if (!std::isfinite(d.inputs[i]) || !std::isfinite(d.targets[i]))
      throw InvalidInput("training data must be finite");
    if (i > 0 && !(d.inputs[i] > d.inputs[i - 1]))
      throw InvalidInput("training inputs must be strictly increasing");
  }
}

/// Sigma_ij = k(t_i, t_j) + (noise + jitter) * [i == j].
inline Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const std::vector<double>& inputs,
                                   double noise_variance, double jitter) {
  const auto n = static_cast<Eigen::Index>(inputs.size());
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s(i, i) = kernel_eval(spec, inputs[i], inputs[i]) + noise_variance + jitter;
    for (Eigen::Index j = 0; j < i; ++j) s(i, j) = s(j, i) = kernel_eval(spec, inputs[i], inputs[j]);
  }
  return s;
}

/// Cholesky factor of the Gram matrix. Jitter starts at 1e-6 * trace(K)/n
/// and grows x10 at most three times.
struct GramFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  double jitter_rel = 0.0;  // jitter / (trace(K)/n)
};

inline constexpr double kJitterBase = 1e-6;
inline constexpr int kJitterEscalations = 3;

inline GramFactor factorize(const KernelSpec& spec, const std::vector<double>& inputs,
                            double noise_variance) {
  const auto n = static_cast<Eigen::Index>(inputs.size());
  Eigen::MatrixXd k = gram_matrix(spec, inputs, 0.0, 0.0);
  const double mean_diag = k.trace() / static_cast<double>(n);
  GramFactor f;
  f.jitter_rel = kJitterBase;
  for (int attempt = 0; attempt <= kJitterEscalations; ++attempt, f.jitter_rel *= 10.0) {
    f.jitter = f.jitter_rel * mean_diag;
    Eigen::MatrixXd s = k;
    s.diagonal().array() += noise_variance + f.jitter;
    f.llt.compute(s);
    if (f.llt.info() == Eigen::Success) {
      const auto& l = f.llt.matrixLLT();
      bool ok = true;
      for (Eigen::Index i = 0; i < n && ok; ++i) ok = std::isfinite(l(i, i)) && l(i, i) > 0.0;
      if (ok) return f;
    }
  }
  throw NumericalError("Cholesky factorization failed after jitter escalation");
}

namespace detail {

inline Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline double lml_from_factor(const GramFactor& f, const Eigen::VectorXd& y) {
  const Eigen::VectorXd alpha = f.llt.solve(y);
  const auto& l = f.llt.matrixLLT();
  double half_logdet = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) half_logdet += std::log(l(i, i));
  const double n = static_cast<double>(y.size());
  return -0.5 * y.dot(alpha) - half_logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

// Equally spaced inputs make the Gram matrix of a stationary kernel
// symmetric Toeplitz, which is factored in O(n^2) instead of O(n^3).
struct ToeplitzGram {
  ToeplitzInverse inv;
  double spacing = 0.0;
  double jitter_rel = 0.0;
};

inline std::optional<double> uniform_spacing(const std::vector<double>& t) {
  if (t.size() < 3) return std::nullopt;
  const double h = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i)
    if (std::abs(t[i] - t[0] - static_cast<double>(i) * h) > 1e-9 * std::max(1.0, std::abs(t[i])))
      return std::nullopt;
  return h;
}

// Same jitter schedule as `factorize`; nothing when the inputs are not
// equally spaced or the recursion breaks down (callers fall back to Cholesky).
inline std::optional<ToeplitzGram> toeplitz_factorize(const KernelSpec& spec, const std::vector<double>& inputs,
                                                      double noise_variance) {
  const auto h = uniform_spacing(inputs);
  if (!h) return std::nullopt;
  std::vector<double> r(inputs.size());
  for (std::size_t d = 0; d < r.size(); ++d) r[d] = kernel_eval(spec, inputs[d], inputs[0]);
  const double k0 = r[0];
  double rel = kJitterBase;
  for (int attempt = 0; attempt <= kJitterEscalations; ++attempt, rel *= 10.0) {
    r[0] = k0 + noise_variance + rel * k0;
    if (auto inv = ToeplitzInverse::factor(r)) return ToeplitzGram{std::move(*inv), *h, rel};
  }
  return std::nullopt;
}

// Every dSigma/dtheta is Toeplitz too, so tr(W dSigma) only needs the
// diagonal sums of W = alpha alpha' - Sigma^-1.
inline std::vector<double> toeplitz_gradient(const ToeplitzGram& t, const GPTrainingSet& data,
                                             const KernelSpec& spec) {
  const std::size_t n = data.inputs.size();
  const std::size_t p = param_count(spec);
  const auto alpha = t.inv.solve(data.targets);
  const auto c = t.inv.diagonal_sums();
  std::vector<double> wsum(n);
  for (std::size_t d = 0; d < n; ++d) {
    double a = 0.0;
    for (std::size_t i = 0; i + d < n; ++i) a += alpha[i] * alpha[i + d];
    wsum[d] = (d == 0 ? 1.0 : 2.0) * (a - c[d]);
  }
  std::vector<double> grad(p + 1, 0.0), g(p), g0(p);
  kernel_eval_grad(spec, data.inputs[0], data.inputs[0], g0.data());
  for (std::size_t d = 0; d < n; ++d) {
    kernel_eval_grad(spec, data.inputs[d], data.inputs[0], g.data());
    for (std::size_t q = 0; q < p; ++q) grad[q] += 0.5 * wsum[d] * g[q];
  }
  for (std::size_t q = 0; q < p; ++q) grad[q] += 0.5 * wsum[0] * t.jitter_rel * g0[q];
  grad[p] = 0.5 * wsum[0] * data.noise_variance;
  return grad;
}

}  // namespace detail

/// -1/2 y' Sigma^-1 y - 1/2 log|Sigma| - n/2 log(2 pi). Equally spaced inputs take the
/// Levinson path, anything else the Cholesky factor.
inline double log_marginal_likelihood(const GPTrainingSet& data, const KernelSpec& spec) {
  if (auto t = detail::toeplitz_factorize(spec, data.inputs, data.noise_variance)) {
    const auto alpha = t->inv.solve(data.targets);
    double quad = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) quad += data.targets[i] * alpha[i];
    const double n = static_cast<double>(alpha.size());
    return -0.5 * quad - 0.5 * t->inv.log_det() - 0.5 * n * std::log(2.0 * std::numbers::pi);
  }
  const GramFactor f = factorize(spec, data.inputs, data.noise_variance);
  return detail::lml_from_factor(f, detail::to_vec(data.targets));
}

/// Gradient of the log marginal likelihood over log-hyperparameters:
/// kernel parameters (see log_params) followed by log noise variance.
/// Uses dLML/dtheta = 1/2 tr((alpha alpha' - Sigma^-1) dSigma/dtheta); the
/// jitter's dependence on trace(K) is carried through so the result is the
/// exact derivative of log_marginal_likelihood.
inline std::vector<double> lml_gradient(const GPTrainingSet& data, const KernelSpec& spec) {
  if (auto t = detail::toeplitz_factorize(spec, data.inputs, data.noise_variance))
    return detail::toeplitz_gradient(*t, data, spec);
  const GramFactor f = factorize(spec, data.inputs, data.noise_variance);
  const auto n = static_cast<Eigen::Index>(data.inputs.size());
  const std::size_t p = param_count(spec);
  const Eigen::VectorXd y = detail::to_vec(data.targets);
  const Eigen::VectorXd alpha = f.llt.solve(y);
  Eigen::MatrixXd w = f.llt.solve(Eigen::MatrixXd::Identity(n, n));
  w = alpha * alpha.transpose() - w;  // W = alpha alpha' - Sigma^-1

  std::vector<double> grad(p + 1, 0.0);
  std::vector<double> trace_dk(p, 0.0);
  std::vector<double> g(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    kernel_eval_grad(spec, data.inputs[i], data.inputs[i], g.data());
    for (std::size_t q = 0; q < p; ++q) {
      grad[q] += 0.5 * w(i, i) * g[q];
      trace_dk[q] += g[q];
    }
    for (Eigen::Index j = 0; j < i; ++j) {
      kernel_eval_grad(spec, data.inputs[i], data.inputs[j], g.data());
      const double wij = w(i, j);  // W symmetric, off-diagonal counted twice
      for (std::size_t q = 0; q < p; ++q) grad[q] += wij * g[q];
    }
  }
  const double trace_w = w.trace();
  for (std::size_t q = 0; q < p; ++q)
    grad[q] += 0.5 * trace_w * f.jitter_rel * trace_dk[q] / static_cast<double>(n);
  grad[p] = 0.5 * trace_w * data.noise_variance;
  return grad;
}

/// GP conditioned on its training data. Targets are stored centered by
/// `mean_offset`; predictions add it back.
struct TrainedGP {
  KernelSpec kernel;
  double noise_variance = 1.0;
  double mean_offset = 0.0;
  std::vector<double> inputs;
  GramFactor factor;
  Eigen::VectorXd alpha;
};

struct Forecast {
  double mean = 0.0;
  double std = 0.0;

  bool operator==(const Forecast&) const = default;
};

/// Builds the posterior for fixed hyperparameters. With `center` the sample
/// mean of the targets becomes the constant prior mean.
inline TrainedGP condition(const GPTrainingSet& data, const KernelSpec& spec, bool center = false) {
  validate(data);
  validate(spec);
  TrainedGP gp;
  gp.kernel = spec;
  gp.noise_variance = data.noise_variance;
  gp.inputs = data.inputs;
  Eigen::VectorXd y = detail::to_vec(data.targets);
  if (center) {
    gp.mean_offset = y.mean();
    y.array() -= gp.mean_offset;
  }
  gp.factor = factorize(spec, data.inputs, data.noise_variance);
  gp.alpha = gp.factor.llt.solve(y);
  return gp;
}

/// mu = m + k*' Sigma^-1 y; var = k(t*,t*) + noise - k*' Sigma^-1 k*, floored at 0.
inline Forecast predict(const TrainedGP& gp, double t_star) {
  const auto n = static_cast<Eigen::Index>(gp.inputs.size());
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) ks(i) = kernel_eval(gp.kernel, t_star, gp.inputs[i]);
  const double mean = gp.mean_offset + ks.dot(gp.alpha);
  const Eigen::VectorXd v = gp.factor.llt.matrixL().solve(ks);
  const double var = kernel_eval(gp.kernel, t_star, t_star) + gp.noise_variance - v.squaredNorm();
  return {mean, std::sqrt(std::max(0.0, var))};
}

struct TrainConfig {
  int max_iters = 100;
  double learning_rate = 0.01;
  double tolerance = 1e-3;
  bool train_noise = true;
  double log_bound = 13.8;  // |log theta| <= ~log(1e6)
};

struct TrainResult {
  TrainedGP gp;
  std::vector<double> lml_trace;  // LML after every accepted step, starting at init
  int iterations = 0;
  double grad_norm = 0.0;
};

namespace detail {

struct Objective {
  const GPTrainingSet& data;  // centered targets
  const KernelSpec& shape;
  bool train_noise;
  double fixed_noise;

  std::size_t dim() const { return param_count(shape) + (train_noise ? 1 : 0); }

  std::pair<KernelSpec, double> unpack(const std::vector<double>& theta) const {
    KernelSpec k = with_log_params(shape, std::span<const double>(theta.data(), param_count(shape)));
    const double noise = train_noise ? std::exp(theta.back()) : fixed_noise;
    return {std::move(k), noise};
  }

  double value(const std::vector<double>& theta) const {
    auto [k, noise] = unpack(theta);
    GPTrainingSet d{data.inputs, data.targets, noise};
    try {
      const double v = log_marginal_likelihood(d, k);
      return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    } catch (const NumericalError&) {
      return -std::numeric_limits<double>::infinity();
    }
  }

  std::vector<double> gradient(const std::vector<double>& theta) const {
    auto [k, noise] = unpack(theta);
    GPTrainingSet d{data.inputs, data.targets, noise};
    auto g = lml_gradient(d, k);
    if (!train_noise) g.pop_back();
    return g;
  }
};

inline double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace detail

/// Maximizes the log marginal likelihood by gradient ascent in
/// log-hyperparameter space. Step sizes follow Barzilai-Borwein and are
/// halved until the likelihood increases, so the accepted LML trace is
/// non-decreasing. Targets are centered before fitting.
inline TrainResult train(const GPTrainingSet& raw, const KernelSpec& init, const TrainConfig& cfg = {}) {
  validate(raw);
  validate(init);
  if (!(init.output_scale > 0.0)) throw InvalidInput("initial output scale must be positive");

  GPTrainingSet data = raw;
  double mean = 0.0;
  for (double y : data.targets) mean += y;
  mean /= static_cast<double>(data.targets.size());
  for (double& y : data.targets) y -= mean;

  detail::Objective obj{data, init, cfg.train_noise, raw.noise_variance};
  std::vector<double> theta = log_params(init);
  if (cfg.train_noise) theta.push_back(std::log(raw.noise_variance));

  double f = obj.value(theta);
  if (!std::isfinite(f)) throw InvalidInput("log marginal likelihood is not finite at the initial point");

  TrainResult res;
  res.lml_trace.push_back(f);
  std::vector<double> g = obj.gradient(theta);
  double step = cfg.learning_rate;
  std::vector<double> cand(theta.size());
  for (res.iterations = 0; res.iterations < cfg.max_iters; ++res.iterations) {
    if (detail::norm(g) < cfg.tolerance) break;
    bool accepted = false;
    double f_new = f;
    for (int halving = 0; halving < 50; ++halving) {
      for (std::size_t i = 0; i < theta.size(); ++i)
        cand[i] = std::clamp(theta[i] + step * g[i], -cfg.log_bound, cfg.log_bound);
      f_new = obj.value(cand);
      if (f_new > f) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    std::vector<double> g_new = obj.gradient(cand);
    double ss = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double s = cand[i] - theta[i];
      const double y = g_new[i] - g[i];
      ss += s * s;
      sy += s * y;
    }
    step = sy < 0.0 ? ss / -sy : step * 2.0;
    step = std::clamp(step, 1e-10, 1e4);
    theta = cand;
    g = std::move(g_new);
    f = f_new;
    res.lml_trace.push_back(f);
  }
  res.grad_norm = detail::norm(g);

  auto [kernel, noise] = obj.unpack(theta);
  res.gp = condition(GPTrainingSet{raw.inputs, raw.targets, noise}, kernel, true);
  return res;
}

}  // namespace amod::gp
