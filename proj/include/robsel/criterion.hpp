#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>

#include "robsel/dataset.hpp"
#include "robsel/errors.hpp"
#include "robsel/estimators.hpp"
#include "robsel/family.hpp"
#include "robsel/loss.hpp"

namespace robsel {

struct CriterionConfig {
  double k = 2.0;  // penalty rate: k * log(n) * p / n
  BoundedQuadraticLoss loss{2.0};
  std::optional<Eigen::VectorXd> weights;  // per-observation, default all one
};

/// Everything the ranked-model report needs for one candidate.
struct CriterionBreakdown {
  ModelSubset alpha;
  std::string label;
  double m1 = 0.0;
  double penalty = 0.0;
  double m2 = 0.0;
  double total = 0.0;
  double sigma_hat = 1.0;
  int replicates_used = 0;
  int replicates_skipped = 0;
  bool converged = false;
  std::optional<double> aic;
  std::optional<double> bic;
};

/// Scaling for the loss argument: d_i = sigma_hat * v(eta_full,i), the same
/// denominator for every candidate so their criterion values are comparable.
inline Eigen::VectorXd criterion_denominators(const Dataset& data,
                                              const GlmFamily& family,
                                              const FitResult& full_fit,
                                              double sigma_hat) {
  if (!(sigma_hat > 0.0) || !std::isfinite(sigma_hat))
    throw ContractError("criterion: scale estimate must be positive and finite");
  const Eigen::VectorXd eta = linear_predictor(design_columns(data, full_fit.alpha),
                                               full_fit.beta_hat);
  Eigen::VectorXd d(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    family.require_admissible(eta[i], i);
    d[i] = sigma_hat * family.sd_unit(eta[i]);
    if (!(d[i] > 0.0) || !std::isfinite(d[i]))
      throw NumericError("criterion: degenerate denominator at row " +
                         std::to_string(i + 1));
  }
  return d;
}

namespace detail {

inline Eigen::VectorXd criterion_weights(const CriterionConfig& cfg, Eigen::Index n) {
  if (!cfg.weights) return Eigen::VectorXd::Ones(n);
  if (cfg.weights->size() != n)
    throw ContractError("criterion: weight vector length mismatch");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isfinite((*cfg.weights)[i]) || (*cfg.weights)[i] < 0.0)
      throw ContractError("criterion: weights must be finite and nonnegative");
  return *cfg.weights;
}

/// Average weighted loss of the standardized prediction errors at one
/// coefficient vector. strict=true (in-sample term) rejects any non-finite
/// standardized residual; strict=false (bootstrap term) accepts +-inf, which
/// the bounded loss clips to its limit, and rejects only NaN.
inline double rho_average(const Dataset& data, const GlmFamily& family,
                          const ModelSubset& alpha, const Eigen::VectorXd& beta,
                          const Eigen::VectorXd& denom, const Eigen::VectorXd& w,
                          const BoundedQuadraticLoss& loss, bool strict,
                          const std::string& context) {
  const Eigen::Index n = data.n();
  Eigen::VectorXd eta;
  if (alpha.empty()) {
    eta = Eigen::VectorXd::Zero(n);
  } else {
    eta = linear_predictor(design_columns(data, alpha), beta);
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    family.require_admissible(eta[i], i);
    const double z = (data.y[i] - family.mean(eta[i])) / denom[i];
    if (std::isnan(z) || (strict && !std::isfinite(z)))
      throw NumericError(context + ": non-finite standardized residual at row " +
                         std::to_string(i + 1));
    acc += w[i] * loss.rho(z);
  }
  return acc / static_cast<double>(n);
}

}  // namespace detail

inline double m1_in_sample(const Dataset& data, const GlmFamily& family,
                           const ModelSubset& alpha, const Eigen::VectorXd& beta,
                           const Eigen::VectorXd& denom, const CriterionConfig& cfg) {
  const Eigen::VectorXd w = detail::criterion_weights(cfg, data.n());
  return detail::rho_average(data, family, alpha, beta, denom, w, cfg.loss,
                             /*strict=*/true, "criterion m1");
}

/// Bootstrap prediction term: the in-sample average loss re-evaluated at each
/// adjusted replicate, averaged over replicates.
inline double m2_prediction(const Dataset& data, const GlmFamily& family,
                            const ModelSubset& alpha,
                            const Eigen::MatrixXd& adjusted_replicates,
                            const Eigen::VectorXd& denom,
                            const CriterionConfig& cfg) {
  if (adjusted_replicates.rows() < 1)
    throw ContractError("criterion m2: no replicates");
  if (adjusted_replicates.cols() != alpha.size())
    throw ContractError("criterion m2: replicate dimension mismatch");
  const Eigen::VectorXd w = detail::criterion_weights(cfg, data.n());
  double acc = 0.0;
  for (Eigen::Index b = 0; b < adjusted_replicates.rows(); ++b) {
    acc += detail::rho_average(data, family, alpha,
                               adjusted_replicates.row(b).transpose(), denom, w,
                               cfg.loss, /*strict=*/false,
                               "criterion m2 (replicate " + std::to_string(b + 1) + ")");
  }
  return acc / static_cast<double>(adjusted_replicates.rows());
}

inline double penalty_term(Eigen::Index n, int p_alpha, double k) {
  if (n < 1) throw ContractError("penalty: empty sample");
  if (p_alpha < 0) throw ContractError("penalty: negative dimension");
  if (!(k > 0.0)) throw ContractError("penalty: rate k must be positive");
  return k * std::log(static_cast<double>(n)) * static_cast<double>(p_alpha) /
         static_cast<double>(n);
}

inline double mn_total(double m1, double penalty, double m2, double sigma_hat) {
  return sigma_hat * sigma_hat * (m1 + penalty + m2);
}

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
};

/// Classical likelihood penalties; defined only for maximum-likelihood fits.
inline InformationCriteria aic_bic(const FitResult& fit, Eigen::Index n) {
  if (fit.kind != EstimatorKind::ml)
    throw UnsupportedError("aic/bic: defined for maximum-likelihood fits only");
  if (!fit.loglik)
    throw UnsupportedError("aic/bic: log-likelihood unavailable for this fit");
  const double p = static_cast<double>(fit.alpha.size());
  InformationCriteria ic;
  ic.aic = -2.0 * *fit.loglik + 2.0 * p;
  ic.bic = -2.0 * *fit.loglik + p * std::log(static_cast<double>(n));
  return ic;
}

}  // namespace robsel
