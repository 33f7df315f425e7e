#pragma once

#include <cmath>
#include <optional>
#include <vector>

namespace amod::gp {

/// Symmetric positive definite Toeplitz matrix T with first column r, held
/// through the first column x of T^-1 (Levinson-Durbin, O(n^2)). Products
/// with T^-1 use the Gohberg-Semencul form
///   T^-1 = (L(x) L(x)' - L(u) L(u)') / x0,  u = [0, x_{n-1}, ..., x_1],
/// where L(a) is lower triangular Toeplitz with first column a.
class ToeplitzInverse {
 public:
  /// Returns nothing when T is not numerically positive definite.
  static std::optional<ToeplitzInverse> factor(const std::vector<double>& r) {
    const std::size_t n = r.size();
    if (n == 0 || !(r[0] > 0.0) || !std::isfinite(r[0])) return std::nullopt;
    ToeplitzInverse t;
    t.n_ = n;
    t.log_det_ = static_cast<double>(n) * std::log(r[0]);
    std::vector<double> rho(n);
    for (std::size_t k = 0; k < n; ++k) rho[k] = r[k] / r[0];

    // Durbin: y solves T_k y = -rho[1..k] for growing k; beta tracks the
    // normalized prediction error, whose product is det(T) / r0^n.
    std::vector<double> y, z;
    double err = 1.0;
    if (n > 1) {
      y.push_back(-rho[1]);
      double alpha = -rho[1], beta = 1.0;
      for (std::size_t k = 1; k + 1 < n; ++k) {
        beta *= (1.0 - alpha * alpha);
        if (!(beta > 0.0) || !std::isfinite(beta)) return std::nullopt;
        t.log_det_ += std::log(beta);
        double s = rho[k + 1];
        for (std::size_t i = 0; i < k; ++i) s += rho[k - i] * y[i];
        alpha = -s / beta;
        z.resize(k);
        for (std::size_t i = 0; i < k; ++i) z[i] = y[i] + alpha * y[k - 1 - i];
        y.swap(z);
        y.push_back(alpha);
      }
      err = beta * (1.0 - alpha * alpha);
      if (!(err > 0.0) || !std::isfinite(err)) return std::nullopt;
      t.log_det_ += std::log(err);
    }
    const double scale = 1.0 / (r[0] * err);
    t.x_.resize(n);
    t.x_[0] = scale;
    for (std::size_t i = 1; i < n; ++i) t.x_[i] = scale * y[i - 1];
    t.u_.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) t.u_[i] = t.x_[n - i];
    return t;
  }

  std::size_t size() const { return n_; }
  double log_det() const { return log_det_; }

  /// T^-1 b.
  std::vector<double> solve(const std::vector<double>& b) const {
    std::vector<double> out(n_, 0.0);
    accumulate(x_, b, out, 1.0);
    accumulate(u_, b, out, -1.0);
    for (double& v : out) v /= x_[0];
    return out;
  }

  /// Sums along the diagonals of T^-1: entry d is sum_i (T^-1)_{i,i+d}.
  std::vector<double> diagonal_sums() const {
    std::vector<double> c(n_);
    for (std::size_t d = 0; d < n_; ++d) {
      double s = 0.0;
      for (std::size_t p = 0; p + d < n_; ++p)
        s += static_cast<double>(n_ - d - p) * (x_[p] * x_[p + d] - u_[p] * u_[p + d]);
      c[d] = s / x_[0];
    }
    return c;
  }

 private:
  // out += sign * L(a) L(a)' b
  void accumulate(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& out,
                  double sign) const {
    std::vector<double> w(n_, 0.0);
    for (std::size_t m = 0; m < n_; ++m) {
      double s = 0.0;
      for (std::size_t i = m; i < n_; ++i) s += a[i - m] * b[i];
      w[m] = s;
    }
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t m = 0; m <= i; ++m) s += a[i - m] * w[m];
      out[i] += sign * s;
    }
  }

  std::size_t n_ = 0;
  double log_det_ = 0.0;
  std::vector<double> x_, u_;
};

}  // namespace amod::gp
