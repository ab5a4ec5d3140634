#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "robsel/bootstrap.hpp"
#include "robsel/estimators.hpp"
#include "robsel/rng.hpp"
#include "robsel/theory.hpp"

using robsel::Dataset;
using robsel::EstimatorKind;
using robsel::EstimatorSpec;
using robsel::FamilyKind;
using robsel::GlmFamily;
using robsel::ModelSubset;

namespace {

Dataset random_poisson_design(int n, int p, std::uint64_t seed,
                              const Eigen::VectorXd& beta) {
  auto gen = robsel::rng::stream(seed, {20});
  std::normal_distribution<double> cov(1.0, 1.0);
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  std::vector<std::string> names{"(intercept)"};
  for (int j = 1; j < p; ++j) names.push_back("x" + std::to_string(j));
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (int j = 1; j < p; ++j) X(i, j) = cov(gen);
    std::poisson_distribution<long> pois(std::exp(X.row(i).head(p) * beta));
    y[i] = static_cast<double>(pois(gen));
  }
  return robsel::make_dataset(y, X, names);
}

}  // namespace

TEST_CASE("two-by-two example where the full trace difference is negative") {
  const auto ex = robsel::trace_counterexample();
  REQUIRE(ex.trace_small == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(ex.trace_big == Catch::Approx(0.9).margin(1e-12));
  REQUIRE(ex.difference == Catch::Approx(-0.1).margin(1e-12));
}

TEST_CASE("gaussian curvature with a non-binding clip is the design moment") {
  auto gen = robsel::rng::stream(40, {21});
  std::normal_distribution<double> cov(0.0, 1.0);
  const int n = 25;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = cov(gen);
    y[i] = cov(gen);
  }
  const Dataset data = robsel::make_dataset(y, X, {"(intercept)", "x1"});
  const GlmFamily gauss(FamilyKind::gaussian_identity);
  Eigen::VectorXd beta(2);
  beta << 0.3, -0.2;

  // identity mean, unit variance, clip far out: the row weight is exactly one
  const auto parts = robsel::gamma_matrix(data, gauss, robsel::full_subset(2), beta,
                                          1.0, robsel::BoundedQuadraticLoss(1e9));
  const Eigen::MatrixXd expect = X.transpose() * X / static_cast<double>(n);
  REQUIRE((parts.gamma - expect).lpNorm<Eigen::Infinity>() < 1e-9);
  for (int i = 0; i < n; ++i)
    REQUIRE(parts.w_gamma[i] == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("gaussian variance at unit scale is n times the inverse moment") {
  auto gen = robsel::rng::stream(41, {21});
  std::normal_distribution<double> cov(0.0, 1.0);
  const int n = 30;
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = cov(gen);
    X(i, 2) = cov(gen);
  }
  const Dataset data = robsel::make_dataset(y, X, {"(intercept)", "x1", "x2"});
  const GlmFamily gauss(FamilyKind::gaussian_identity);
  const auto var = robsel::ml_variance_matrix(data, gauss, robsel::full_subset(3),
                                              Eigen::VectorXd::Zero(3), 1.0);
  const Eigen::MatrixXd expect =
      static_cast<double>(n) * (X.transpose() * X).inverse();
  REQUIRE((var.sigma_matrix - expect).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("poisson intercept-only variance is the reciprocal mean") {
  Eigen::VectorXd y(10);
  y.setConstant(2.0);
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(10, 1);
  const Dataset data = robsel::make_dataset(y, X, {"(intercept)"});
  const GlmFamily pois(FamilyKind::poisson_log);
  Eigen::VectorXd beta(1);
  beta << 0.7;
  const auto var = robsel::ml_variance_matrix(data, pois, robsel::full_subset(1),
                                              beta, 1.0);
  REQUIRE(var.sigma_matrix(0, 0) ==
          Catch::Approx(std::exp(-0.7)).margin(1e-10));
  REQUIRE(var.w_sigma[3] == Catch::Approx(std::exp(0.7)).margin(1e-10));
}

TEST_CASE("robust variance approaches the likelihood variance as the clip opens") {
  Eigen::VectorXd beta(3);
  beta << 0.4, 0.5, -0.3;
  const Dataset data = random_poisson_design(50, 3, 42, beta);
  const GlmFamily pois(FamilyKind::poisson_log);

  EstimatorSpec spec;
  spec.kind = EstimatorKind::cantoni_ronchetti;
  spec.huber_c = 1e9;
  const auto cr = robsel::cr_variance_matrix(data, pois, robsel::full_subset(3),
                                             beta, 1.0, spec);
  const auto ml = robsel::ml_variance_matrix(data, pois, robsel::full_subset(3),
                                             beta, 1.0);
  const double scale = ml.sigma_matrix.lpNorm<Eigen::Infinity>();
  REQUIRE((cr.sigma_matrix - ml.sigma_matrix).lpNorm<Eigen::Infinity>() <
          1e-6 * scale);
}

TEST_CASE("greedy row selection picks spanning rows deterministically") {
  Eigen::MatrixXd X(4, 2);
  X << 3, 0, 0, 2, 1, 1, 0.1, 0.1;
  REQUIRE(robsel::greedy_spanning_rows(X) == std::vector<int>{0, 1});

  Eigen::MatrixXd tie(3, 2);
  tie << 1, 0, 1, 0, 0, 1;
  REQUIRE(robsel::greedy_spanning_rows(tie) == std::vector<int>{0, 2});

  Eigen::MatrixXd degenerate(3, 2);
  degenerate << 1, 0, 2, 0, 3, 0;  // second direction absent
  REQUIRE_THROWS_AS(robsel::greedy_spanning_rows(degenerate),
                    robsel::ReorderingError);
  REQUIRE_THROWS_AS(robsel::greedy_spanning_rows(Eigen::MatrixXd::Ones(1, 2)),
                    robsel::ReorderingError);
}

TEST_CASE("selected-row blocks make the product trace a diagonal ratio sum") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Eigen::VectorXd beta(3);
    beta << 0.3 + 0.02 * static_cast<double>(seed % 5), 0.4, -0.25;
    const Dataset data = random_poisson_design(40, 3, 300 + seed, beta);
    const GlmFamily pois(FamilyKind::poisson_log);
    const auto full = robsel::full_subset(3);
    const auto rows = robsel::greedy_spanning_rows(data.X);

    EstimatorSpec ml_spec;
    const auto ml_diag = robsel::trace_diagnostic(
        data, pois, full, beta, 1.0, robsel::BoundedQuadraticLoss(), EstimatorKind::ml,
        ml_spec, rows);
    REQUIRE(std::abs(ml_diag.trace_product - ml_diag.per_term_sum) < 1e-8);

    EstimatorSpec cr_spec;
    cr_spec.kind = EstimatorKind::cantoni_ronchetti;
    const auto cr_diag = robsel::trace_diagnostic(
        data, pois, full, beta, 1.0, robsel::BoundedQuadraticLoss(),
        EstimatorKind::cantoni_ronchetti, cr_spec, rows);
    REQUIRE(std::abs(cr_diag.trace_product - cr_diag.per_term_sum) < 1e-8);
  }
}

TEST_CASE("the diagnostic insists on exactly p rows forming a regular block") {
  Eigen::VectorXd beta(2);
  beta << 0.5, 0.3;
  const Dataset data = random_poisson_design(20, 2, 9, beta);
  const GlmFamily pois(FamilyKind::poisson_log);
  EstimatorSpec spec;
  REQUIRE_THROWS_AS(
      robsel::trace_diagnostic(data, pois, robsel::full_subset(2), beta, 1.0,
                               robsel::BoundedQuadraticLoss(), EstimatorKind::ml,
                               spec, {0, 1, 2}),
      robsel::ContractError);
}

TEST_CASE("the trace grows along nested correct poisson chains") {
  Eigen::VectorXd beta_true(4);
  beta_true << 0.6, 0.0, 0.0, 0.0;
  const Dataset data = random_poisson_design(64, 4, 500, beta_true);
  const GlmFamily pois(FamilyKind::poisson_log);
  const std::vector<ModelSubset> chain{
      robsel::make_subset({0}, 4), robsel::make_subset({0, 1}, 4),
      robsel::make_subset({0, 1, 2}, 4), robsel::full_subset(4)};
  EstimatorSpec spec;
  const auto check = robsel::trace_monotonicity_check(
      data, pois, chain, beta_true, 1.0, robsel::BoundedQuadraticLoss(),
      EstimatorKind::ml, spec);
  REQUIRE(check.steps.size() == 4);
  REQUIRE(check.monotone);
  for (std::size_t j = 1; j < check.steps.size(); ++j)
    REQUIRE(check.steps[j].trace_product >= check.steps[j - 1].trace_product);

  EstimatorSpec cr_spec;
  cr_spec.kind = EstimatorKind::cantoni_ronchetti;
  const auto cr_check = robsel::trace_monotonicity_check(
      data, pois, chain, beta_true, 1.0, robsel::BoundedQuadraticLoss(),
      EstimatorKind::cantoni_ronchetti, cr_spec);
  REQUIRE(cr_check.steps.size() == 4);
}

TEST_CASE("chain validation rejects broken nesting and wrong supports") {
  Eigen::VectorXd beta_true(3);
  beta_true << 0.5, 0.4, 0.0;
  const Dataset data = random_poisson_design(30, 3, 7, beta_true);
  const GlmFamily pois(FamilyKind::poisson_log);
  EstimatorSpec spec;
  const robsel::BoundedQuadraticLoss loss;

  REQUIRE_THROWS_AS(
      robsel::trace_monotonicity_check(data, pois, {}, beta_true, 1.0, loss,
                                       EstimatorKind::ml, spec),
      robsel::ContractError);
  // not nested
  REQUIRE_THROWS_AS(
      robsel::trace_monotonicity_check(
          data, pois,
          {robsel::make_subset({0, 1}, 3), robsel::make_subset({0, 2}, 3)},
          beta_true, 1.0, loss, EstimatorKind::ml, spec),
      robsel::ContractError);
  // smallest model misses an active column
  REQUIRE_THROWS_AS(
      robsel::trace_monotonicity_check(
          data, pois, {robsel::make_subset({0}, 3), robsel::full_subset(3)},
          beta_true, 1.0, loss, EstimatorKind::ml, spec),
      robsel::ContractError);
}

TEST_CASE("replicate variability ratio sits near one for the plain bootstrap") {
  auto gen = robsel::rng::stream(60, {22});
  std::normal_distribution<double> noise(0.0, 1.0);
  const int n = 60;
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = 1.0 + noise(gen);
  const Dataset data = robsel::make_dataset(y, X, {"(intercept)"});
  const GlmFamily gauss(FamilyKind::gaussian_identity);
  const auto alpha = robsel::full_subset(1);
  const auto base = robsel::fit_ml(data, gauss, alpha);

  robsel::BootstrapConfig cfg;
  cfg.m = 30;
  cfg.B = 300;
  cfg.K = 1;  // a single stratum keeps the full sampling variability
  cfg.seed = 99;
  const auto strat = robsel::stratify(base.pearson_residuals, cfg.K, cfg.m);
  const auto reps = robsel::replicate_estimators(data, gauss, alpha, {}, strat,
                                                 cfg, base);
  const auto var = robsel::ml_variance_matrix(data, gauss, alpha, base.beta_hat, 1.0);
  const double kappa = robsel::kappa_hat(reps, var.sigma_matrix, cfg.m);
  REQUIRE(kappa > 0.4);
  REQUIRE(kappa < 2.5);
}

TEST_CASE("variability ratio rejects unusable input") {
  robsel::ReplicateSet reps;
  reps.betas = Eigen::MatrixXd::Zero(1, 2);
  const Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(2, 2);
  REQUIRE_THROWS_AS(robsel::kappa_hat(reps, sigma, 10), robsel::ContractError);
  reps.betas = Eigen::MatrixXd::Random(5, 2);
  REQUIRE_THROWS_AS(robsel::kappa_hat(reps, sigma, 0), robsel::ContractError);
  REQUIRE_THROWS_AS(robsel::kappa_hat(reps, Eigen::MatrixXd::Identity(3, 3), 10),
                    robsel::ContractError);
}

TEST_CASE("singular designs are refused by the variance builders") {
  Eigen::MatrixXd X(6, 2);
  for (int i = 0; i < 6; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = 2.0;
  }
  const Dataset data =
      robsel::make_dataset(Eigen::VectorXd::Ones(6), X, {"(intercept)", "dup"});
  const GlmFamily gauss(FamilyKind::gaussian_identity);
  REQUIRE_THROWS_AS(
      robsel::ml_variance_matrix(data, gauss, robsel::full_subset(2),
                                 Eigen::VectorXd::Zero(2), 1.0),
      robsel::SingularDesignError);
  EstimatorSpec spec;
  spec.kind = EstimatorKind::cantoni_ronchetti;
  REQUIRE_THROWS_AS(
      robsel::cr_variance_matrix(data, gauss, robsel::full_subset(2),
                                 Eigen::VectorXd::Zero(2), 1.0, spec),
      robsel::SingularDesignError);
}
