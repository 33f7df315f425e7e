#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "amod/gp/forecast.hpp"
#include "amod/gp/gp.hpp"
#include "amod/gp/kernel.hpp"
#include "amod/gp/quantile.hpp"
#include "amod/gp/toeplitz.hpp"

using namespace amod;
using namespace amod::gp;

namespace {

constexpr double kPi = std::numbers::pi;

double rbf_ref(double d, double l) { return std::exp(-d * d / (2.0 * l * l)); }
double periodic_ref(double d, double l, double p) {
  const double s = std::sin(kPi * std::abs(d) / p);
  return std::exp(-2.0 * s * s / (l * l));
}

// Dense reference: same jitter rule, Eigen LDLT instead of the library's path.
double lml_ref(const GPTrainingSet& d, const KernelSpec& k) {
  const auto n = static_cast<Eigen::Index>(d.inputs.size());
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) s(i, j) = kernel_eval(k, d.inputs[i], d.inputs[j]);
  const double jitter = kJitterBase * s.trace() / static_cast<double>(n);
  s.diagonal().array() += d.noise_variance + jitter;
  const Eigen::LDLT<Eigen::MatrixXd> f(s);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(d.targets.data(), n);
  const double logdet = f.vectorD().array().log().sum();
  return -0.5 * y.dot(f.solve(y)) - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * kPi);
}

KernelSpec random_kernel(std::mt19937_64& rng, int which) {
  std::uniform_real_distribution<double> u(0.5, 3.0);
  switch (which % 3) {
    case 0: return KernelSpec::rbf(u(rng), u(rng));
    case 1: return KernelSpec::periodic(u(rng), 2.0 + u(rng), u(rng));
    default: return KernelSpec::locally_periodic(2.0 * u(rng), u(rng), 3.0 + u(rng), u(rng));
  }
}

GPTrainingSet noisy_sine(std::mt19937_64& rng, std::size_t n, bool uniform) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  GPTrainingSet d;
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    t += uniform ? 0.25 : 0.05 + 0.5 * u(rng);
    d.inputs.push_back(t);
    d.targets.push_back(std::sin(t) + 0.3 * g(rng));
  }
  d.noise_variance = 0.05 + 0.2 * u(rng);
  return d;
}

std::vector<double> fd_gradient(const GPTrainingSet& d, const KernelSpec& k, double h = 1e-5) {
  std::vector<double> theta = log_params(k);
  theta.push_back(std::log(d.noise_variance));
  std::vector<double> out(theta.size());
  const auto f = [&](const std::vector<double>& th) {
    const KernelSpec kk = with_log_params(k, std::span<const double>(th.data(), th.size() - 1));
    GPTrainingSet dd = d;
    dd.noise_variance = std::exp(th.back());
    return log_marginal_likelihood(dd, kk);
  };
  for (std::size_t q = 0; q < theta.size(); ++q) {
    auto p = theta, m = theta;
    p[q] += h;
    m[q] -= h;
    out[q] = (f(p) - f(m)) / (2.0 * h);
  }
  return out;
}

}  // namespace

TEST(Kernel, MatchesClosedForms) {
  EXPECT_NEAR(kernel_eval(KernelSpec::rbf(2.0, 3.0), 1.0, 4.0), 3.0 * rbf_ref(3.0, 2.0), 1e-15);
  EXPECT_NEAR(kernel_eval(KernelSpec::periodic(0.7, 5.0, 2.0), 0.3, 2.2), 2.0 * periodic_ref(1.9, 0.7, 5.0), 1e-15);
  const double p = 24.0;
  EXPECT_NEAR(kernel_eval(KernelSpec::periodic(1.3, p), 5.0, 5.0 + p), 1.0, 1e-12);
  EXPECT_NEAR(kernel_eval(KernelSpec::locally_periodic(2.0 * p, 1.0, p), 0.0, p), std::exp(-1.0 / 8.0), 1e-12);
  const KernelSpec lp = KernelSpec::locally_periodic(3.0, 0.8, 7.0, 1.7);
  EXPECT_NEAR(kernel_eval(lp, 1.0, 3.5), 1.7 * rbf_ref(2.5, 3.0) * periodic_ref(2.5, 0.8, 7.0), 1e-15);
  EXPECT_DOUBLE_EQ(kernel_eval(lp, 1.0, 3.5), kernel_eval(lp, 3.5, 1.0));
  EXPECT_DOUBLE_EQ(kernel_eval(KernelSpec::rbf(1.0, 0.0), 0.0, 1.0), 0.0);
}

TEST(Kernel, ValidationRejectsBadParameters) {
  EXPECT_THROW(validate(KernelSpec::rbf(0.0)), InvalidInput);
  EXPECT_THROW(validate(KernelSpec::periodic(1.0, -1.0)), InvalidInput);
  EXPECT_THROW(validate(KernelSpec::rbf(1.0, -1.0)), InvalidInput);
  KernelSpec bad = KernelSpec::product(KernelSpec::rbf(1.0), KernelSpec::rbf(1.0));
  bad.children.pop_back();
  EXPECT_THROW(validate(bad), InvalidInput);
}

TEST(Kernel, LogParameterRoundTrip) {
  const KernelSpec k = KernelSpec::locally_periodic(3.0, 0.8, 7.0, 1.7);
  const auto th = log_params(k);
  EXPECT_EQ(th.size(), param_count(k));
  const KernelSpec back = with_log_params(k, th);
  EXPECT_NEAR(back.output_scale, 1.7, 1e-14);
  EXPECT_NEAR(back.children[1].period, 7.0, 1e-14);
}

TEST(Kernel, GradientMatchesFiniteDifferences) {
  const KernelSpec k = KernelSpec::locally_periodic(3.0, 0.8, 7.0, 1.7);
  std::vector<double> g(param_count(k));
  kernel_eval_grad(k, 0.4, 2.9, g.data());
  auto th = log_params(k);
  for (std::size_t q = 0; q < th.size(); ++q) {
    auto p = th, m = th;
    p[q] += 1e-6;
    m[q] -= 1e-6;
    const double fd = (kernel_eval(with_log_params(k, p), 0.4, 2.9) - kernel_eval(with_log_params(k, m), 0.4, 2.9)) / 2e-6;
    EXPECT_NEAR(g[q], fd, 1e-8) << q;
  }
}

TEST(Toeplitz, SolveAndLogDetMatchDense) {
  std::mt19937_64 rng(3);
  for (std::size_t n : {1u, 2u, 7u, 40u}) {
    std::vector<double> r(n);
    for (std::size_t d = 0; d < n; ++d) r[d] = std::exp(-0.1 * static_cast<double>(d * d)) + (d == 0 ? 0.3 : 0.0);
    const auto t = ToeplitzInverse::factor(r);
    ASSERT_TRUE(t.has_value());
    Eigen::MatrixXd a(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a(i, j) = r[i > j ? i - j : j - i];
    std::normal_distribution<double> g;
    std::vector<double> b(n);
    for (auto& x : b) x = g(rng);
    const auto x = t->solve(b);
    const Eigen::VectorXd ref = a.ldlt().solve(Eigen::Map<Eigen::VectorXd>(b.data(), n));
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(x[i], ref[i], 1e-10);
    EXPECT_NEAR(t->log_det(), a.ldlt().vectorD().array().log().sum(), 1e-10);
    const Eigen::MatrixXd inv = a.inverse();
    const auto sums = t->diagonal_sums();
    for (std::size_t d = 0; d < n; ++d) {
      double s = 0.0;
      for (std::size_t i = 0; i + d < n; ++i) s += inv(i, i + d);
      EXPECT_NEAR(sums[d], s, 1e-9);
    }
  }
  EXPECT_FALSE(ToeplitzInverse::factor({1.0, 2.0}).has_value());  // indefinite
}

TEST(Gp, LogMarginalLikelihoodMatchesDenseReference) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 12; ++trial) {
    const GPTrainingSet d = noisy_sine(rng, 5 + trial * 3, trial % 2 == 0);
    const KernelSpec k = random_kernel(rng, trial);
    const double ref = lml_ref(d, k);
    EXPECT_NEAR(log_marginal_likelihood(d, k), ref, 1e-8 * std::max(1.0, std::abs(ref))) << trial;
  }
}

TEST(Gp, ToeplitzAndCholeskyPathsAgree) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 6; ++trial) {
    const GPTrainingSet d = noisy_sine(rng, 60, true);
    const KernelSpec k = random_kernel(rng, trial);
    ASSERT_TRUE(detail::toeplitz_factorize(k, d.inputs, d.noise_variance).has_value());
    const GramFactor f = factorize(k, d.inputs, d.noise_variance);
    const double dense = detail::lml_from_factor(f, detail::to_vec(d.targets));
    EXPECT_NEAR(log_marginal_likelihood(d, k), dense, 1e-9 * std::abs(dense));
  }
}

TEST(Gp, GradientMatchesFiniteDifferencesOnBothPaths) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const GPTrainingSet d = noisy_sine(rng, 8 + 2 * trial, trial % 2 == 1);
    const KernelSpec k = random_kernel(rng, trial);
    const auto g = lml_gradient(d, k);
    const auto fd = fd_gradient(d, k);
    ASSERT_EQ(g.size(), fd.size());
    for (std::size_t q = 0; q < g.size(); ++q)
      EXPECT_NEAR(g[q], fd[q], 1e-5 * std::max(1.0, std::abs(fd[q]))) << "trial " << trial << " param " << q;
  }
}

TEST(Gp, ScalingTargetsByZeroLeavesOnlyTheLogDet) {
  std::mt19937_64 rng(14);
  GPTrainingSet d = noisy_sine(rng, 10, false);
  for (double& y : d.targets) y = 0.0;
  const KernelSpec k = KernelSpec::rbf(1.0);
  const GramFactor f = factorize(k, d.inputs, d.noise_variance);
  double half_logdet = 0.0;
  for (Eigen::Index i = 0; i < 10; ++i) half_logdet += std::log(f.llt.matrixLLT()(i, i));
  EXPECT_NEAR(log_marginal_likelihood(d, k), -half_logdet - 5.0 * std::log(2.0 * kPi), 1e-10);
}

TEST(Gp, InvalidTrainingSetsAreRejected) {
  GPTrainingSet d{{0.0, 1.0}, {1.0}, 0.1};
  EXPECT_THROW(validate(d), InvalidInput);
  d = {{1.0, 0.0}, {1.0, 2.0}, 0.1};
  EXPECT_THROW(validate(d), InvalidInput);
  d = {{0.0, 1.0}, {1.0, 2.0}, 0.0};
  EXPECT_THROW(validate(d), InvalidInput);
  d = {{}, {}, 1.0};
  EXPECT_THROW(validate(d), InvalidInput);
}

TEST(Gp, PosteriorInterpolatesAndRevertsToPrior) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.6, 1.4);
  GPTrainingSet d;
  for (double t = 0.0; d.inputs.size() < 12; t += u(rng)) {
    d.inputs.push_back(t);
    d.targets.push_back(2.0 * std::sin(0.7 * t) + 0.5 * std::cos(1.9 * t));
  }
  d.noise_variance = 1e-8;
  const KernelSpec k = KernelSpec::rbf(0.8, 1.5);
  const TrainedGP gp = condition(d, k);
  for (std::size_t i = 0; i < d.inputs.size(); ++i) {
    const Forecast f = predict(gp, d.inputs[i]);
    EXPECT_NEAR(f.mean, d.targets[i], 1e-3);
    EXPECT_LT(f.std * f.std, 1e-3);
  }
  const Forecast far = predict(gp, 1e4);
  EXPECT_NEAR(far.mean, 0.0, 1e-9);
  EXPECT_NEAR(far.std * far.std, 1.5 + 1e-8, 1e-6);
}

TEST(Gp, PosteriorMatchesExplicitThreeByThreeSolve) {
  const GPTrainingSet d{{0.0, 0.7, 2.1}, {1.0, -0.5, 2.0}, 0.2};
  const KernelSpec k = KernelSpec::locally_periodic(2.0, 1.1, 3.0, 1.3);
  const TrainedGP gp = condition(d, k);
  Eigen::Matrix3d s;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s(i, j) = kernel_eval(k, d.inputs[i], d.inputs[j]);
  s.diagonal().array() += 0.2 + kJitterBase * s.trace() / 3.0;
  const Eigen::Matrix3d inv = s.inverse();
  const Eigen::Vector3d y(1.0, -0.5, 2.0);
  for (double ts : {-0.4, 0.35, 1.5, 4.0}) {
    const Eigen::Vector3d ks(kernel_eval(k, ts, 0.0), kernel_eval(k, ts, 0.7), kernel_eval(k, ts, 2.1));
    const Forecast f = predict(gp, ts);
    EXPECT_NEAR(f.mean, ks.dot(inv * y), 1e-8);
    EXPECT_NEAR(f.std * f.std, kernel_eval(k, ts, ts) + 0.2 - ks.dot(inv * ks), 1e-8);
  }
}

TEST(Gp, GramMatrixSymmetricPositiveDefinite) {
  const KernelSpec k = KernelSpec::locally_periodic(2.0, 0.9, 5.0, 1.0);
  const Eigen::MatrixXd one = gram_matrix(k, {3.0}, 0.5, 1e-6);
  EXPECT_DOUBLE_EQ(one(0, 0), 1.0 + 0.5 + 1e-6);
  const std::vector<double> t{0.1, 0.4, 1.3, 2.2, 7.9};
  const Eigen::MatrixXd s = gram_matrix(k, t, 0.1, 0.0);
  EXPECT_TRUE((s.array() == s.transpose().array()).all());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

TEST(Gp, LikelihoodClosedFormsForTinyProblems) {
  const KernelSpec k = KernelSpec::rbf(1.0, 2.0);
  const GPTrainingSet one{{0.0}, {0.0}, 0.5};
  const double v = 2.0 + 0.5 + kJitterBase * 2.0;
  EXPECT_NEAR(log_marginal_likelihood(one, k), -0.5 * std::log(v) - 0.5 * std::log(2.0 * kPi), 1e-12);
  const auto g1 = lml_gradient(one, k);  // only the log-det term remains
  EXPECT_NEAR(g1[0], -0.5 * 2.0 / v, 1e-6);
  EXPECT_DOUBLE_EQ(g1[1], 0.0);
  EXPECT_NEAR(g1[2], -0.5 * 0.5 / v, 1e-6);

  const GPTrainingSet two{{0.3, 1.1}, {0.8, -0.4}, 0.3};
  const double jit = kJitterBase * 2.0;
  const double a = 2.0 + 0.3 + jit, b = 2.0 * rbf_ref(0.8, 1.0);
  const double det = a * a - b * b;
  const double quad = (a * 0.8 * 0.8 - 2.0 * b * 0.8 * -0.4 + a * 0.4 * 0.4) / det;
  EXPECT_NEAR(log_marginal_likelihood(two, k), -0.5 * quad - 0.5 * std::log(det) - std::log(2.0 * kPi), 1e-10);
}

TEST(Gp, CenteringRestoresTheSampleMean) {
  GPTrainingSet d{{0.0, 1.0, 2.0, 3.0}, {5.0, 6.0, 7.0, 6.0}, 0.1};
  const TrainedGP gp = condition(d, KernelSpec::rbf(0.5), true);
  EXPECT_NEAR(gp.mean_offset, 6.0, 1e-15);
  EXPECT_NEAR(predict(gp, 1e5).mean, 6.0, 1e-9);
}

TEST(Gp, PosteriorVarianceBoundedAndMonotone) {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> t(6);
    for (auto& x : t) x = u(rng);
    std::sort(t.begin(), t.end());
    GPTrainingSet big{t, std::vector<double>(6, 0.0), 0.1};
    for (auto& y : big.targets) y = u(rng);
    GPTrainingSet small = big;
    const std::size_t drop = static_cast<std::size_t>(trial) % 6;
    small.inputs.erase(small.inputs.begin() + static_cast<long>(drop));
    small.targets.erase(small.targets.begin() + static_cast<long>(drop));
    const KernelSpec k = random_kernel(rng, trial);
    const TrainedGP a = condition(small, k), b = condition(big, k);
    for (double ts = -2.0; ts < 12.0; ts += 0.37) {
      const double va = predict(a, ts).std, vb = predict(b, ts).std;
      EXPECT_LE(vb * vb, va * va + 1e-8);
      EXPECT_LE(va * va, kernel_eval(k, ts, ts) + 0.1 + 1e-9);
    }
  }
}

TEST(Gp, TrainingNeverLowersTheLikelihood) {
  std::mt19937_64 rng(17);
  const GPTrainingSet d = noisy_sine(rng, 40, true);
  const TrainResult r = train(d, KernelSpec::locally_periodic(3.0, 3.0, 6.0, 1.0));
  ASSERT_FALSE(r.lml_trace.empty());
  for (std::size_t i = 1; i < r.lml_trace.size(); ++i) EXPECT_GE(r.lml_trace[i], r.lml_trace[i - 1]);
  EXPECT_GT(r.lml_trace.back(), r.lml_trace.front());
  EXPECT_THROW(train(d, KernelSpec::rbf(1.0, 0.0)), InvalidInput);
}

TEST(Gp, RefitRecoversGeneratingLengthscale) {
  std::mt19937_64 rng(18);
  std::normal_distribution<double> g;
  GPTrainingSet d;
  for (int i = 0; i < 40; ++i) d.inputs.push_back(0.25 * i);
  const Eigen::MatrixXd k = gram_matrix(KernelSpec::rbf(1.0), d.inputs, 0.01, 0.0);
  const Eigen::MatrixXd l = k.llt().matrixL();
  Eigen::VectorXd z(40);
  for (auto& x : z) x = g(rng);
  const Eigen::VectorXd y = l * z;
  d.targets.assign(y.data(), y.data() + 40);
  d.noise_variance = 0.1;
  TrainConfig cfg;
  cfg.max_iters = 500;
  const TrainResult r = train(d, KernelSpec::rbf(2.0), cfg);
  EXPECT_GE(r.gp.kernel.lengthscale, 0.5);
  EXPECT_LE(r.gp.kernel.lengthscale, 2.0);
  EXPECT_LT(r.grad_norm, 1e-3);

  // restarting at the optimum changes nothing
  GPTrainingSet again = d;
  again.noise_variance = r.gp.noise_variance;
  const TrainResult s = train(again, r.gp.kernel, cfg);
  EXPECT_GE(s.lml_trace.back(), r.lml_trace.back() - 1e-9);
  EXPECT_LE(s.iterations, 1);
}

TEST(Quantile, InverseNormalKnownValues) {
  EXPECT_DOUBLE_EQ(inverse_normal_cdf(0.5), 0.0);
  EXPECT_NEAR(inverse_normal_cdf(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(inverse_normal_cdf(0.05), -1.6448536269514722, 1e-12);
  EXPECT_NEAR(inverse_normal_cdf(1e-10), -6.361340902404056, 1e-9);
  for (double p = 0.001; p < 1.0; p += 0.0137) EXPECT_NEAR(normal_cdf(inverse_normal_cdf(p)), p, 1e-13);
  EXPECT_THROW(inverse_normal_cdf(0.0), InvalidInput);
  EXPECT_THROW(inverse_normal_cdf(1.0), InvalidInput);
}

TEST(Quantile, GaussianQuantileShape) {
  EXPECT_DOUBLE_EQ(gaussian_quantile(0.5, 3.2, 7.0), 3.2);
  EXPECT_DOUBLE_EQ(gaussian_quantile(0.99, 3.2, 0.0), 3.2);
  EXPECT_NEAR(gaussian_quantile(0.975, 1.0, 2.0), 1.0 + 2.0 * 1.959963984540054, 1e-11);
  EXPECT_LT(gaussian_quantile(0.3, 1.0, 2.0), gaussian_quantile(0.4, 1.0, 2.0));
  EXPECT_THROW(gaussian_quantile(0.5, 0.0, -1.0), InvalidInput);
}

TEST(Forecast, ConstantAndZeroFlowsAvoidGps) {
  DemandSeries s(2, 0.0, 900.0, 96 * 2);
  for (std::size_t k = 0; k < s.intervals; ++k) {
    s.counts(0, 1, k) = 3;
    s.counts(1, 0, k) = static_cast<int>(k % 96 < 40 ? 0 : 4);
  }
  FlowTrainingConfig cfg;
  cfg.window_days = 2.0;
  cfg.optimizer.max_iters = 15;
  const ForecastModelSet m = train_flow_models(s, 2 * 86400.0, cfg);
  EXPECT_FALSE(m.fit(0, 1).is_gp);
  EXPECT_DOUBLE_EQ(m.fit(0, 1).constant, 3.0);
  EXPECT_FALSE(m.fit(0, 0).is_gp);
  const auto zero = forecast_demand(m, 2 * 86400.0, 900.0, 6);
  for (std::size_t k = 0; k <= 6; ++k) EXPECT_EQ(zero(0, 0, k), (Forecast{0.0, 0.0}));
  EXPECT_DOUBLE_EQ(m.fit(0, 0).constant, 0.0);
  EXPECT_TRUE(m.fit(1, 0).is_gp);
  const auto f = forecast_at(m, 2 * 86400.0 + 450.0);
  EXPECT_EQ(f[1], (Forecast{3.0, 0.0}));
  EXPECT_EQ(f[0], (Forecast{0.0, 0.0}));
}

TEST(Forecast, TensorMatchesScalarPredictions) {
  DemandSeries s(1, 0.0, 900.0, 96);
  for (std::size_t k = 0; k < 96; ++k)
    s.counts(0, 0, k) = static_cast<int>(std::lround(4.0 + 3.0 * std::sin(2.0 * kPi * static_cast<double>(k) / 96.0)));
  FlowTrainingConfig cfg;
  cfg.window_days = 1.0;
  cfg.optimizer.max_iters = 20;
  const ForecastModelSet m = train_flow_models(s, 86400.0, cfg);
  ASSERT_TRUE(m.models[0].has_value());
  const auto t = forecast_demand(m, 86400.0, 900.0, 12);
  EXPECT_EQ(t.stations(), 1u);
  EXPECT_EQ(t.steps(), 13u);
  for (std::size_t k = 0; k <= 12; ++k) {
    const double hours = (static_cast<double>(k) - 0.5) * 0.25 + 24.0;
    EXPECT_EQ(t(0, 0, k), predict(*m.models[0], hours));
  }
}

TEST(Forecast, TenStationsGiveTheFullTensor) {
  DemandSeries s(10, 0.0, 900.0, 96);
  const ForecastModelSet m = train_flow_models(s, 86400.0, {.window_days = 1.0});
  EXPECT_EQ(m.fits.size(), 100u);
  const auto t = forecast_demand(m, 86400.0, 900.0, 12);
  EXPECT_EQ(t.stations(), 10u);
  EXPECT_EQ(t.steps(), 13u);
}

TEST(Forecast, ModelsRoundTripThroughText) {
  DemandSeries s(2, 0.0, 900.0, 96);
  std::mt19937_64 rng(4);
  for (std::size_t k = 0; k < s.intervals; ++k) s.counts(1, 0, k) = static_cast<int>(rng() % 5);
  FlowTrainingConfig cfg;
  cfg.window_days = 1.0;
  cfg.optimizer.max_iters = 10;
  const ForecastModelSet m = train_flow_models(s, 86400.0, cfg);
  std::stringstream ss;
  write_models(ss, m);
  ForecastModelSet back = read_models(ss);
  attach_history(back, s);
  EXPECT_EQ(back.fits.size(), m.fits.size());
  const auto a = forecast_at(m, 86400.0 + 450.0), b = forecast_at(back, 86400.0 + 450.0);
  for (std::size_t f = 0; f < a.size(); ++f) {
    EXPECT_NEAR(a[f].mean, b[f].mean, 1e-9);
    EXPECT_NEAR(a[f].std, b[f].std, 1e-9);
  }
  std::stringstream bad("amod-gp-models 1\nstations x\n");
  EXPECT_THROW(read_models(bad), InvalidInput);
}
