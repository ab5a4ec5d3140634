#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "robsel/bootstrap.hpp"
#include "robsel/dataset.hpp"
#include "robsel/errors.hpp"
#include "robsel/estimators.hpp"
#include "robsel/family.hpp"
#include "robsel/loss.hpp"

namespace robsel {

namespace detail {

/// Per-row ingredients for the variance and curvature matrices, evaluated at
/// eta_i with response scale sigma: the distribution of y_i is the family at
/// mean h(eta_i) and standard deviation sigma * v(eta_i).
struct TheoryRow {
  double w_sigma = 0.0;  // h'^2 / (sigma v)^2, inverse-variance weight
  double w_gamma = 0.0;  // (1/2) w / (sigma v)^2 (h'^2 E psi' - h'' E psi)
  double a = 0.0;        // robust score second moment  w^2 h'^2 E psi_c^2 / v^2
  double b = 0.0;        // robust score sensitivity    w h'^2 E[r psi_c] / (sigma v)^2
  double s = 0.0;        // consistency shift           w h' E psi_c / v
};

inline TheoryRow theory_row(const GlmFamily& family, double eta, double sigma,
                            double w, const BoundedQuadraticLoss& loss,
                            const HuberScore& huber, Eigen::Index row) {
  family.require_admissible(eta, row);
  const double mu = family.mean(eta);
  const double d1 = family.mean_d1(eta);
  const double d2 = family.mean_d2(eta);
  const double v = family.sd_unit(eta);
  const double sv = sigma * v;
  if (!(sv > 0.0) || !std::isfinite(sv))
    throw NumericError("variance matrices: degenerate scale at row " +
                       std::to_string(row + 1));

  TheoryRow out;
  out.w_sigma = d1 * d1 / (sv * sv);

  // clipped-loss score expectations in z = (y - mu) / (sigma v)
  const double e_psi = family.expect(
      mu, sigma, [&](double y) { return loss.psi((y - mu) / sv); },
      {mu - loss.b() * sv, mu + loss.b() * sv});
  const double e_psi_prime = family.expect(
      mu, sigma, [&](double y) { return loss.psi_prime((y - mu) / sv); },
      {mu - loss.b() * sv, mu + loss.b() * sv});
  out.w_gamma = 0.5 * w / (sv * sv) * (d1 * d1 * e_psi_prime - d2 * sv * e_psi);

  // bounded-score expectations in r = (y - mu) / v
  const double cv_lo = mu - huber.c() * v;
  const double cv_hi = mu + huber.c() * v;
  const double e_h = family.expect(
      mu, sigma, [&](double y) { return huber.psi((y - mu) / v); }, {cv_lo, cv_hi});
  const double e_h2 = family.expect(
      mu, sigma,
      [&](double y) {
        const double p = huber.psi((y - mu) / v);
        return p * p;
      },
      {cv_lo, cv_hi});
  const double e_rh = family.expect(
      mu, sigma,
      [&](double y) {
        const double r = (y - mu) / v;
        return r * huber.psi(r);
      },
      {cv_lo, cv_hi});
  out.a = w * w * d1 * d1 * e_h2 / (v * v);
  out.b = w * d1 * d1 * e_rh / (sv * sv);
  out.s = w * d1 * e_h / v;
  return out;
}

inline Eigen::VectorXd theory_weights(const std::optional<Eigen::VectorXd>& w,
                                      Eigen::Index n) {
  if (!w) return Eigen::VectorXd::Ones(n);
  if (w->size() != n) throw ContractError("variance matrices: weight length mismatch");
  return *w;
}

}  // namespace detail

/// Expected curvature of the clipped criterion loss:
///   Gamma = (1/n) sum_i W_gamma,ii x_i x_i'
/// with W_gamma,ii = (1/2) w_i (sigma v_i)^-2 (h'^2 E psi' - h'' sigma v E psi).
struct CurvatureParts {
  Eigen::MatrixXd gamma;       // p x p, full-sample average
  Eigen::VectorXd w_gamma;     // n, per-row diagonal weights
};

inline CurvatureParts gamma_matrix(const Dataset& data, const GlmFamily& family,
                                   const ModelSubset& alpha,
                                   const Eigen::VectorXd& beta, double sigma,
                                   const BoundedQuadraticLoss& loss,
                                   const std::optional<Eigen::VectorXd>& weights =
                                       std::nullopt) {
  const Eigen::MatrixXd Xa = design_columns(data, alpha);
  const Eigen::VectorXd eta = linear_predictor(Xa, beta);
  const Eigen::VectorXd w = detail::theory_weights(weights, data.n());
  const HuberScore huber;  // unused entries; row helper computes all parts
  CurvatureParts out;
  out.w_gamma.resize(data.n());
  out.gamma = Eigen::MatrixXd::Zero(alpha.size(), alpha.size());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const detail::TheoryRow tr =
        detail::theory_row(family, eta[i], sigma, w[i], loss, huber, i);
    out.w_gamma[i] = tr.w_gamma;
    out.gamma.noalias() += tr.w_gamma * Xa.row(i).transpose() * Xa.row(i);
  }
  out.gamma /= static_cast<double>(data.n());
  return out;
}

/// Likelihood-estimator variance: n (X' W_sigma X)^-1 with
/// W_sigma,ii = h'^2 / (sigma v_i)^2.
struct MlVarianceParts {
  Eigen::MatrixXd sigma_matrix;  // p x p
  Eigen::VectorXd w_sigma;       // n, per-row diagonal weights
};

inline MlVarianceParts ml_variance_matrix(const Dataset& data, const GlmFamily& family,
                                          const ModelSubset& alpha,
                                          const Eigen::VectorXd& beta, double sigma) {
  const Eigen::MatrixXd Xa = design_columns(data, alpha);
  const Eigen::VectorXd eta = linear_predictor(Xa, beta);
  MlVarianceParts out;
  out.w_sigma.resize(data.n());
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(alpha.size(), alpha.size());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    family.require_admissible(eta[i], i);
    const double d1 = family.mean_d1(eta[i]);
    const double sv = sigma * family.sd_unit(eta[i]);
    out.w_sigma[i] = d1 * d1 / (sv * sv);
    info.noalias() += out.w_sigma[i] * Xa.row(i).transpose() * Xa.row(i);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
  if (!lu.isInvertible())
    throw SingularDesignError("variance: information matrix singular for model " +
                              subset_label(data, alpha));
  out.sigma_matrix = static_cast<double>(data.n()) * lu.inverse();
  return out;
}

/// Sandwich variance of the bounded-score estimator, M^-1 Q M^-1 with
///   Q = (1/n) X' A X - s(beta) s(beta)',  M = (1/n) X' B X,
/// A and B the per-row score second moment and sensitivity, s the
/// consistency-correction vector of the estimating equation.
struct CrVarianceParts {
  Eigen::MatrixXd sigma_matrix;  // p x p
  Eigen::VectorXd a_diag;        // n
  Eigen::VectorXd b_diag;        // n
};

inline CrVarianceParts cr_variance_matrix(const Dataset& data, const GlmFamily& family,
                                          const ModelSubset& alpha,
                                          const Eigen::VectorXd& beta, double sigma,
                                          const EstimatorSpec& spec) {
  const Eigen::MatrixXd Xa = design_columns(data, alpha);
  const Eigen::VectorXd eta = linear_predictor(Xa, beta);
  const Eigen::VectorXd w = detail::theory_weights(spec.mallows_weights, data.n());
  const BoundedQuadraticLoss loss;  // row helper computes all parts
  const HuberScore huber(spec.huber_c);
  const Eigen::Index n = data.n();
  const Eigen::Index p = alpha.size();

  CrVarianceParts out;
  out.a_diag.resize(n);
  out.b_diag.resize(n);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const detail::TheoryRow tr =
        detail::theory_row(family, eta[i], sigma, w[i], loss, huber, i);
    out.a_diag[i] = tr.a;
    out.b_diag[i] = tr.b;
    Q.noalias() += tr.a * Xa.row(i).transpose() * Xa.row(i);
    M.noalias() += tr.b * Xa.row(i).transpose() * Xa.row(i);
    shift.noalias() += tr.s * Xa.row(i).transpose();
  }
  Q /= static_cast<double>(n);
  M /= static_cast<double>(n);
  shift /= static_cast<double>(n);
  Q.noalias() -= shift * shift.transpose();

  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible())
    throw SingularDesignError("variance: sensitivity matrix singular for model " +
                              subset_label(data, alpha));
  const Eigen::MatrixXd Minv = lu.inverse();
  out.sigma_matrix = Minv * Q * Minv;
  return out;
}

/// Greedy spanning rows of a design block: repeatedly pick the row with the
/// largest residual norm after projecting out the rows already chosen. This
/// is column-pivoted orthogonalization of the transposed block, so the first
/// p_alpha rows of the returned order always form an invertible square block
/// when the design has full column rank.
inline std::vector<int> greedy_spanning_rows(const Eigen::MatrixXd& Xa) {
  const Eigen::Index n = Xa.rows();
  const Eigen::Index p = Xa.cols();
  if (n < p) throw ReorderingError("reordering: fewer rows than columns");
  Eigen::MatrixXd work = Xa;
  const double scale = std::max(1.0, work.norm());
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index k = 0; k < p; ++k) {
    Eigen::Index best = -1;
    double best_norm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      const double nrm = work.row(i).squaredNorm();
      if (nrm > best_norm) {
        best_norm = nrm;
        best = i;
      }
    }
    if (best < 0 || best_norm <= 1e-24 * scale * scale)
      throw ReorderingError("reordering: design rows do not span the model space");
    used[static_cast<std::size_t>(best)] = 1;
    order.push_back(static_cast<int>(best));
    const Eigen::RowVectorXd u = work.row(best) / work.row(best).norm();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      work.row(i) -= (work.row(i).dot(u)) * u;
    }
    work.row(best).setZero();
  }
  return order;
}

/// Trace comparison for one model: the p_alpha selected rows give square
/// blocks C, and the product trace tr((C' W_sigma C)^-1 (C' W_gamma C))
/// collapses to the plain diagonal-ratio sum over those rows. Both sides are
/// reported, together with the full-sample matrices.
struct TraceDiagnostic {
  ModelSubset alpha;
  std::vector<int> rows;         // selected observation rows
  double trace_product = 0.0;    // matrix-product form on the selected block
  double per_term_sum = 0.0;     // sum of W_gamma,ii / W_sigma,ii over rows
  Eigen::MatrixXd gamma_full;    // full-sample Gamma
  Eigen::MatrixXd sigma_full;    // full-sample variance matrix
};

namespace detail {

inline Eigen::MatrixXd select_rows(const Eigen::MatrixXd& X, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  return out;
}

inline Eigen::VectorXd select_entries(const Eigen::VectorXd& v, const std::vector<int>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = v[rows[i]];
  return out;
}

}  // namespace detail

inline TraceDiagnostic trace_diagnostic(const Dataset& data, const GlmFamily& family,
                                        const ModelSubset& alpha,
                                        const Eigen::VectorXd& beta, double sigma,
                                        const BoundedQuadraticLoss& loss,
                                        EstimatorKind kind, const EstimatorSpec& spec,
                                        const std::vector<int>& rows) {
  if (static_cast<int>(rows.size()) != alpha.size())
    throw ContractError("trace diagnostic: need exactly p_alpha rows");
  const Eigen::MatrixXd Xa = design_columns(data, alpha);
  TraceDiagnostic out;
  out.alpha = alpha;
  out.rows = rows;

  const CurvatureParts cur = gamma_matrix(data, family, alpha, beta, sigma, loss,
                                          kind == EstimatorKind::cantoni_ronchetti
                                              ? spec.mallows_weights
                                              : std::nullopt);
  out.gamma_full = cur.gamma;

  const Eigen::MatrixXd C = detail::select_rows(Xa, rows);
  const Eigen::VectorXd wg = detail::select_entries(cur.w_gamma, rows);
  Eigen::FullPivLU<Eigen::MatrixXd> c_lu(C);
  if (!c_lu.isInvertible())
    throw ReorderingError("trace diagnostic: selected rows give a singular block for " +
                          subset_label(data, alpha));

  if (kind == EstimatorKind::ml) {
    const MlVarianceParts var = ml_variance_matrix(data, family, alpha, beta, sigma);
    out.sigma_full = var.sigma_matrix;
    const Eigen::VectorXd ws = detail::select_entries(var.w_sigma, rows);
    const Eigen::MatrixXd info_block = C.transpose() * ws.asDiagonal() * C;
    const Eigen::MatrixXd gamma_block = C.transpose() * wg.asDiagonal() * C;
    out.trace_product = info_block.fullPivLu().solve(gamma_block).trace();
    out.per_term_sum = (wg.array() / ws.array()).sum();
  } else {
    const CrVarianceParts var = cr_variance_matrix(data, family, alpha, beta, sigma, spec);
    out.sigma_full = var.sigma_matrix;
    const Eigen::VectorXd av = detail::select_entries(var.a_diag, rows);
    const Eigen::VectorXd bv = detail::select_entries(var.b_diag, rows);
    const Eigen::MatrixXd Mb = C.transpose() * bv.asDiagonal() * C;
    const Eigen::MatrixXd Qb = C.transpose() * av.asDiagonal() * C;
    const Eigen::MatrixXd Gb = C.transpose() * wg.asDiagonal() * C;
    const Eigen::MatrixXd Minv = Mb.fullPivLu().inverse();
    out.trace_product = (Minv * Qb * Minv * Gb).trace();
    out.per_term_sum = (av.array() * wg.array() / (bv.array() * bv.array())).sum();
  }
  return out;
}

struct ChainCheck {
  std::vector<TraceDiagnostic> steps;  // ascending model size
  bool monotone = false;               // trace_product nondecreasing along the chain
};

/// Evaluates the trace diagnostic along a nested chain of correct models at
/// the true coefficients. One greedy row ordering is computed from the
/// largest model and reused, so smaller models use a prefix of the same rows;
/// a model whose prefix block happens to be singular falls back to its own
/// greedy ordering.
inline ChainCheck trace_monotonicity_check(const Dataset& data, const GlmFamily& family,
                                           const std::vector<ModelSubset>& chain,
                                           const Eigen::VectorXd& beta_true_full,
                                           double sigma, const BoundedQuadraticLoss& loss,
                                           EstimatorKind kind, const EstimatorSpec& spec) {
  if (chain.empty()) throw ContractError("monotonicity check: empty chain");
  if (beta_true_full.size() != data.p())
    throw ContractError("monotonicity check: coefficient length must match the design");
  for (std::size_t j = 0; j < chain.size(); ++j) {
    if (chain[j].empty())
      throw ContractError("monotonicity check: chain models must be nonempty");
    if (j > 0 && !chain[j].contains_all(chain[j - 1]))
      throw ContractError("monotonicity check: chain must be nested");
  }
  // correctness of every chain model: the true support must lie in the smallest
  for (Eigen::Index c = 0; c < data.p(); ++c)
    if (beta_true_full[c] != 0.0 && !chain.front().contains(static_cast<int>(c)))
      throw ContractError("monotonicity check: column " + std::to_string(c) +
                          " has nonzero true coefficient outside the smallest model");

  const ModelSubset& top = chain.back();
  const std::vector<int> top_rows = greedy_spanning_rows(design_columns(data, top));

  ChainCheck out;
  out.monotone = true;
  double prev = 0.0;
  for (std::size_t j = 0; j < chain.size(); ++j) {
    const ModelSubset& alpha = chain[j];
    Eigen::VectorXd beta(alpha.size());
    for (int k = 0; k < alpha.size(); ++k) beta[k] = beta_true_full[alpha.indices[static_cast<std::size_t>(k)]];

    std::vector<int> rows(top_rows.begin(), top_rows.begin() + alpha.size());
    TraceDiagnostic step;
    try {
      step = trace_diagnostic(data, family, alpha, beta, sigma, loss, kind, spec, rows);
    } catch (const ReorderingError&) {
      rows = greedy_spanning_rows(design_columns(data, alpha));
      step = trace_diagnostic(data, family, alpha, beta, sigma, loss, kind, spec, rows);
    }
    if (j > 0 && step.trace_product < prev) out.monotone = false;
    prev = step.trace_product;
    out.steps.push_back(std::move(step));
  }
  return out;
}

/// Fixed 2 x 2 versus 1 x 1 example where the full-sample matrix-trace
/// difference between nested models is negative: the penalty ordering cannot
/// be read off full-sample traces, which is why the diagnostic above works on
/// square selected-row blocks instead.
struct TraceCounterexample {
  Eigen::MatrixXd sigma_small, gamma_small;
  Eigen::MatrixXd sigma_big, gamma_big;
  double trace_small = 0.0;
  double trace_big = 0.0;
  double difference = 0.0;  // trace_big - trace_small, negative here
};

inline TraceCounterexample trace_counterexample() {
  TraceCounterexample ex;
  ex.sigma_small = Eigen::MatrixXd::Constant(1, 1, 1.0);
  ex.gamma_small = Eigen::MatrixXd::Constant(1, 1, 1.0);
  ex.sigma_big.resize(2, 2);
  ex.sigma_big << 1.0, -0.5, -0.5, 1.0;
  ex.gamma_big.resize(2, 2);
  ex.gamma_big << 1.0, 0.2, 0.2, 0.1;
  ex.trace_small = (ex.sigma_small * ex.gamma_small).trace();
  ex.trace_big = (ex.sigma_big * ex.gamma_big).trace();
  ex.difference = ex.trace_big - ex.trace_small;
  return ex;
}

/// Ratio of the bootstrap-replicate coefficient variability to the analytic
/// variance, scaled by the resample size: values near one indicate the
/// resampling scheme reproduces the estimator's sampling noise.
inline double kappa_hat(const ReplicateSet& reps, const Eigen::MatrixXd& sigma_matrix,
                        int m) {
  if (reps.retained() < 2)
    throw ContractError("kappa: need at least two retained replicates");
  if (m < 1) throw ContractError("kappa: resample size must be positive");
  if (sigma_matrix.rows() != reps.betas.cols())
    throw ContractError("kappa: dimension mismatch");
  const double denom = sigma_matrix.trace();
  if (!(denom > 0.0) || !std::isfinite(denom))
    throw NumericError("kappa: analytic variance trace not positive");
  const Eigen::MatrixXd centered = reps.betas.rowwise() - reps.betas.colwise().mean();
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(reps.retained() - 1);
  return static_cast<double>(m) * cov.trace() / denom;
}

}  // namespace robsel
