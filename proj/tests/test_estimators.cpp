#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "robsel/dataset.hpp"
#include "robsel/estimators.hpp"
#include "robsel/family.hpp"
#include "robsel/rng.hpp"

using robsel::Dataset;
using robsel::EstimatorKind;
using robsel::EstimatorSpec;
using robsel::FamilyKind;
using robsel::FitResult;
using robsel::GlmFamily;
using robsel::ModelSubset;

namespace {

Dataset gaussian_data(int n, std::uint64_t seed) {
  auto gen = robsel::rng::stream(seed, {1});
  std::normal_distribution<double> cov(1.0, 1.0), noise(0.0, 1.0);
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = cov(gen);
    X(i, 2) = cov(gen);
    y[i] = 2.0 + 0.5 * X(i, 1) - 1.0 * X(i, 2) + noise(gen);
  }
  return robsel::make_dataset(y, X, {"(intercept)", "x1", "x2"});
}

Dataset poisson_data(int n, std::uint64_t seed, double b0 = -1.0, double b1 = 1.2) {
  auto gen = robsel::rng::stream(seed, {2});
  std::normal_distribution<double> cov(1.0, 1.0);
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = cov(gen);
    std::poisson_distribution<long> pois(std::exp(b0 + b1 * X(i, 1)));
    y[i] = static_cast<double>(pois(gen));
  }
  return robsel::make_dataset(y, X, {"(intercept)", "x1"});
}

}  // namespace

TEST_CASE("intercept-only poisson likelihood fit is log of the mean") {
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 6;  // mean 3
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 1);
  const Dataset data = robsel::make_dataset(y, X, {"(intercept)"});
  const GlmFamily pois(FamilyKind::poisson_log);
  const FitResult fit = robsel::fit_ml(data, pois, robsel::full_subset(1));
  REQUIRE(fit.converged);
  REQUIRE(fit.beta_hat[0] == Catch::Approx(std::log(3.0)).margin(1e-8));
}

TEST_CASE("gaussian likelihood fit equals the normal-equation solve") {
  const Dataset data = gaussian_data(40, 99);
  const GlmFamily gauss(FamilyKind::gaussian_identity);
  const FitResult fit = robsel::fit_ml(data, gauss, robsel::full_subset(3));
  REQUIRE(fit.converged);

  const Eigen::MatrixXd& X = data.X;
  const Eigen::VectorXd ols =
      (X.transpose() * X).ldlt().solve(X.transpose() * data.y);
  for (int k = 0; k < 3; ++k)
    REQUIRE(fit.beta_hat[k] == Catch::Approx(ols[k]).margin(1e-10));

  // profile log-likelihood at the least-squares solution
  const double n = static_cast<double>(data.n());
  const double rss = (data.y - X * ols).squaredNorm();
  const double ll = -0.5 * n * (std::log(2.0 * M_PI * rss / n) + 1.0);
  REQUIRE(fit.loglik.has_value());
  REQUIRE(*fit.loglik == Catch::Approx(ll).margin(1e-8));
}

TEST_CASE("poisson likelihood fit zeroes the score equations") {
  const Dataset data = poisson_data(80, 5);
  const GlmFamily pois(FamilyKind::poisson_log);
  const FitResult fit = robsel::fit_ml(data, pois, robsel::full_subset(2));
  REQUIRE(fit.converged);
  const Eigen::VectorXd mu = (data.X * fit.beta_hat).array().exp();
  const Eigen::VectorXd score = data.X.transpose() * (data.y - mu);
  REQUIRE(score.lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("binomial likelihood fit zeroes the score equations") {
  auto gen = robsel::rng::stream(11, {3});
  std::normal_distribution<double> cov(0.0, 1.0);
  const int n = 120;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  const GlmFamily logit(FamilyKind::binomial_logit);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = cov(gen);
    const double mu = logit.mean(0.3 + 0.8 * X(i, 1));
    std::bernoulli_distribution bern(mu);
    y[i] = bern(gen) ? 1.0 : 0.0;
  }
  const Dataset data = robsel::make_dataset(y, X, {"(intercept)", "x1"});
  const FitResult fit = robsel::fit_ml(data, logit, robsel::full_subset(2));
  REQUIRE(fit.converged);
  Eigen::VectorXd mu(n);
  for (int i = 0; i < n; ++i) mu[i] = logit.mean(X.row(i) * fit.beta_hat);
  const Eigen::VectorXd score = data.X.transpose() * (data.y - mu);
  REQUIRE(score.lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("gamma fits work on both links") {
  auto gen = robsel::rng::stream(21, {4});
  std::normal_distribution<double> cov(1.0, 0.5);
  const int n = 100;
  const double sigma = 0.4;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  const GlmFamily glog(FamilyKind::gamma_log);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = cov(gen);
    const double mu = std::exp(0.5 + 0.7 * X(i, 1));
    std::gamma_distribution<double> gam(1.0 / (sigma * sigma), mu * sigma * sigma);
    y[i] = gam(gen);
  }
  const Dataset data = robsel::make_dataset(y, X, {"(intercept)", "x1"});
  const FitResult fit = robsel::fit_ml(data, glog, robsel::full_subset(2));
  REQUIRE(fit.converged);
  REQUIRE(fit.beta_hat[0] == Catch::Approx(0.5).margin(0.3));
  REQUIRE(fit.beta_hat[1] == Catch::Approx(0.7).margin(0.3));
  REQUIRE(fit.loglik.has_value());

  // quasi-score at the solution: sum x (y - mu) h' / v^2 with v = mu
  Eigen::VectorXd score = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) {
    const double eta = X.row(i) * fit.beta_hat;
    const double mu = std::exp(eta);
    score += (y[i] - mu) * mu / (mu * mu) * X.row(i).transpose();
  }
  REQUIRE(score.lpNorm<Eigen::Infinity>() < 1e-6);

  // reciprocal link on strictly positive linear predictors
  auto gen2 = robsel::rng::stream(22, {4});
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  Eigen::MatrixXd X2(n, 2);
  Eigen::VectorXd y2(n);
  for (int i = 0; i < n; ++i) {
    X2(i, 0) = 1.0;
    X2(i, 1) = unif(gen2);
    const double eta = 1.0 + 0.8 * X2(i, 1);
    std::gamma_distribution<double> gam(1.0 / (sigma * sigma),
                                        (1.0 / eta) * sigma * sigma);
    y2[i] = gam(gen2);
  }
  const Dataset data2 = robsel::make_dataset(y2, X2, {"(intercept)", "x1"});
  const GlmFamily recip(FamilyKind::gamma_reciprocal);
  const FitResult fit2 = robsel::fit_ml(data2, recip, robsel::full_subset(2));
  REQUIRE(fit2.converged);
  REQUIRE(fit2.beta_hat[0] == Catch::Approx(1.0).margin(0.5));
  REQUIRE(fit2.beta_hat[1] == Catch::Approx(0.8).margin(0.6));
}

TEST_CASE("robust fit with a huge clip matches maximum likelihood") {
  const Dataset data = poisson_data(80, 7);
  const GlmFamily pois(FamilyKind::poisson_log);
  const FitResult ml = robsel::fit_ml(data, pois, robsel::full_subset(2));

  EstimatorSpec spec;
  spec.kind = EstimatorKind::cantoni_ronchetti;
  spec.huber_c = 1e6;
  const FitResult cr = robsel::fit_cr(data, pois, robsel::full_subset(2), spec);
  REQUIRE(cr.converged);
  for (int k = 0; k < 2; ++k)
    REQUIRE(cr.beta_hat[k] == Catch::Approx(ml.beta_hat[k]).margin(1e-6));
}

TEST_CASE("robust fit zeroes its estimating equation") {
  const Dataset data = poisson_data(100, 13);
  const GlmFamily pois(FamilyKind::poisson_log);
  EstimatorSpec spec;
  spec.kind = EstimatorKind::cantoni_ronchetti;
  const double c = spec.huber_c;
  const FitResult fit = robsel::fit_cr(data, pois, robsel::full_subset(2), spec);
  REQUIRE(fit.converged);

  // independent evaluation of the estimating equation, with the consistency
  // shift computed by a direct probability-weighted Poisson sum
  Eigen::VectorXd ee = Eigen::VectorXd::Zero(2);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double eta = data.X.row(i) * fit.beta_hat;
    const double mu = std::exp(eta);
    const double v = std::sqrt(mu);
    double epsi = 0.0;
    double logp = -mu;
    for (int k = 0; k <= 400; ++k) {
      const double z = (static_cast<double>(k) - mu) / v;
      epsi += std::exp(logp) * std::clamp(z, -c, c);
      logp += std::log(mu) - std::log(static_cast<double>(k + 1));
    }
    const double r = (data.y[i] - mu) / v;
    ee += (std::clamp(r, -c, c) - epsi) * (mu / v) * data.X.row(i).transpose();
  }
  REQUIRE(ee.lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("robust fit resists response contamination") {
  const GlmFamily pois(FamilyKind::poisson_log);
  int cr_wins = 0;
  const int reps = 120;
  for (int rep = 0; rep < reps; ++rep) {
    Dataset data = poisson_data(60, 1000 + static_cast<std::uint64_t>(rep));
    // corrupt three responses upward
    auto gen = robsel::rng::stream(77, {static_cast<std::uint64_t>(rep)});
    std::poisson_distribution<long> bad(25.0);
    for (int j = 0; j < 3; ++j) data.y[j * 17 % 60] = static_cast<double>(bad(gen));

    EstimatorSpec cr_spec;
    cr_spec.kind = EstimatorKind::cantoni_ronchetti;
    FitResult ml, cr;
    try {
      ml = robsel::fit_ml(data, pois, robsel::full_subset(2));
      cr = robsel::fit_cr(data, pois, robsel::full_subset(2), cr_spec);
    } catch (const robsel::Error&) {
      continue;
    }
    if (!ml.converged || !cr.converged) continue;
    Eigen::VectorXd truth(2);
    truth << -1.0, 1.2;
    if ((cr.beta_hat - truth).norm() < (ml.beta_hat - truth).norm()) ++cr_wins;
  }
  REQUIRE(cr_wins > reps * 3 / 5);
}

TEST_CASE("estimates recover the truth across simulated draws") {
  const GlmFamily pois(FamilyKind::poisson_log);
  Eigen::VectorXd truth(2);
  truth << -1.0, 1.2;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(2);
  const int reps = 150;
  int used = 0;
  for (int rep = 0; rep < reps; ++rep) {
    const Dataset data = poisson_data(120, 5000 + static_cast<std::uint64_t>(rep));
    const FitResult fit = robsel::fit_ml(data, pois, robsel::full_subset(2));
    if (!fit.converged) continue;
    acc += fit.beta_hat;
    ++used;
  }
  REQUIRE(used > reps * 9 / 10);
  acc /= static_cast<double>(used);
  REQUIRE(acc[0] == Catch::Approx(truth[0]).margin(0.08));
  REQUIRE(acc[1] == Catch::Approx(truth[1]).margin(0.08));
}

TEST_CASE("non-convergence is reported as a value") {
  const Dataset data = poisson_data(50, 31);
  const GlmFamily pois(FamilyKind::poisson_log);
  EstimatorSpec spec;
  spec.max_iter = 1;
  Eigen::VectorXd far(2);
  far << 5.0, -4.0;
  const FitResult fit =
      robsel::fit_ml(data, pois, robsel::full_subset(2), spec, far);
  REQUIRE_FALSE(fit.converged);
}

TEST_CASE("singular designs are rejected by name") {
  Eigen::VectorXd y(5);
  y << 1, 2, 3, 4, 5;
  Eigen::MatrixXd X(5, 2);
  for (int i = 0; i < 5; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = 2.0;  // duplicate of the intercept direction
  }
  const Dataset data = robsel::make_dataset(y, X, {"(intercept)", "dup"});
  const GlmFamily gauss(FamilyKind::gaussian_identity);
  REQUIRE_THROWS_MATCHES(
      robsel::fit_ml(data, gauss, robsel::full_subset(2)),
      robsel::SingularDesignError,
      Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("dup")));
}

TEST_CASE("null model fit is the zero-dimensional trivial case") {
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 1);
  const Dataset data = robsel::make_dataset(y, X, {"(intercept)"});
  const GlmFamily pois(FamilyKind::poisson_log);
  const FitResult fit = robsel::fit_ml(data, pois, ModelSubset{});
  REQUIRE(fit.converged);
  REQUIRE(fit.beta_hat.size() == 0);
  REQUIRE(fit.iterations == 0);
  // residuals computed at eta = 0: (y - 1) / 1
  REQUIRE(fit.pearson_residuals[0] == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(fit.pearson_residuals[2] == Catch::Approx(2.0).margin(1e-14));
}

TEST_CASE("scale estimators: fixed, moment, mad") {
  Eigen::VectorXd y(5);
  y << 0.0, 1.0, 2.0, 3.0, 10.0;
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(5, 1);
  const Dataset data = robsel::make_dataset(y, X, {"(intercept)"});
  const GlmFamily gauss(FamilyKind::gaussian_identity);
  const FitResult fit = robsel::fit_ml(data, gauss, robsel::full_subset(1));
  REQUIRE(fit.converged);
  // residuals around the mean 3.2: -3.2, -2.2, -1.2, -0.2, 6.8

  const auto fixed = robsel::estimate_sigma(fit, robsel::ScaleMethod::fixed_one);
  REQUIRE(fixed.sigma_hat == 1.0);

  const auto pearson = robsel::estimate_sigma(fit, robsel::ScaleMethod::pearson_moment);
  const double ss = 3.2 * 3.2 + 2.2 * 2.2 + 1.2 * 1.2 + 0.2 * 0.2 + 6.8 * 6.8;
  REQUIRE(pearson.sigma_hat == Catch::Approx(std::sqrt(ss / 4.0)).margin(1e-12));

  const auto mad = robsel::estimate_sigma(fit, robsel::ScaleMethod::mad);
  // median residual -1.2; |r - med| = {2, 1, 0, 1, 8}; median 1
  REQUIRE(mad.sigma_hat == Catch::Approx(1.4826).margin(1e-12));
}

TEST_CASE("degenerate spread raises a scale error") {
  Eigen::VectorXd y = Eigen::VectorXd::Constant(4, 2.5);
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 1);
  const Dataset data = robsel::make_dataset(y, X, {"(intercept)"});
  const GlmFamily gauss(FamilyKind::gaussian_identity);
  const FitResult fit = robsel::fit_ml(data, gauss, robsel::full_subset(1));
  REQUIRE_THROWS_AS(robsel::estimate_sigma(fit, robsel::ScaleMethod::mad),
                    robsel::DegenerateScaleError);
}

TEST_CASE("default scale method follows the family") {
  REQUIRE(robsel::default_scale_method(GlmFamily(FamilyKind::poisson_log)) ==
          robsel::ScaleMethod::fixed_one);
  REQUIRE(robsel::default_scale_method(GlmFamily(FamilyKind::gaussian_identity)) ==
          robsel::ScaleMethod::mad);
}

TEST_CASE("mallows weights downweight chosen rows in the robust fit") {
  Dataset data = poisson_data(60, 41);
  const GlmFamily pois(FamilyKind::poisson_log);
  // blow up one response; weight zero removes its influence entirely
  data.y[10] = 80.0;
  EstimatorSpec spec;
  spec.kind = EstimatorKind::cantoni_ronchetti;
  Eigen::VectorXd w = Eigen::VectorXd::Ones(60);
  w[10] = 0.0;
  spec.mallows_weights = w;
  const FitResult weighted = robsel::fit_cr(data, pois, robsel::full_subset(2), spec);

  Dataset clean = poisson_data(60, 41);
  Eigen::VectorXd y_backup = clean.y;
  // same dataset with row 10 untouched influences nothing when weighted out
  Dataset poisoned = clean;
  poisoned.y[10] = 80.0;
  EstimatorSpec unweighted;
  unweighted.kind = EstimatorKind::cantoni_ronchetti;
  const FitResult plain = robsel::fit_cr(poisoned, pois, robsel::full_subset(2),
                                         unweighted);
  Eigen::VectorXd truth(2);
  truth << -1.0, 1.2;
  REQUIRE((weighted.beta_hat - truth).norm() <= (plain.beta_hat - truth).norm() + 1e-9);
  REQUIRE(weighted.converged);
}
