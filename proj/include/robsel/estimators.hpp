#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "robsel/dataset.hpp"
#include "robsel/errors.hpp"
#include "robsel/family.hpp"
#include "robsel/loss.hpp"

namespace robsel {

enum class EstimatorKind { ml, cantoni_ronchetti };

inline std::string estimator_name(EstimatorKind k) {
  return k == EstimatorKind::ml ? "ml" : "cr";
}

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::ml;
  double huber_c = 1.345;
  int max_iter = 100;
  double tol = 1e-8;
  // optional Mallows weights w(x_i), one per row; empty means unit weights
  std::optional<Eigen::VectorXd> mallows_weights;
};

struct FitResult {
  ModelSubset alpha;
  Eigen::VectorXd beta_hat;
  bool converged = false;
  int iterations = 0;
  // (y - h(eta))/v(eta) at beta_hat; empty when the final state was invalid
  Eigen::VectorXd pearson_residuals;
  std::optional<double> loglik;  // ML fits only
  EstimatorKind kind = EstimatorKind::ml;
};

enum class ScaleMethod { fixed_one, pearson_moment, mad };

inline std::string scale_method_name(ScaleMethod m) {
  switch (m) {
    case ScaleMethod::fixed_one: return "fixed-one";
    case ScaleMethod::pearson_moment: return "pearson-moment";
    case ScaleMethod::mad: return "mad";
  }
  return "?";
}

inline ScaleMethod scale_method_from_name(const std::string& s) {
  if (s == "fixed-one") return ScaleMethod::fixed_one;
  if (s == "pearson-moment") return ScaleMethod::pearson_moment;
  if (s == "mad") return ScaleMethod::mad;
  throw ConfigError("unknown scale method '" + s + "'");
}

struct ScaleEstimate {
  double sigma_hat = 1.0;
  ScaleMethod method = ScaleMethod::fixed_one;
};

inline ScaleMethod default_scale_method(const GlmFamily& family) {
  return family.fixed_dispersion() ? ScaleMethod::fixed_one : ScaleMethod::mad;
}

inline Eigen::VectorXd pearson_residuals(const Dataset& data, const GlmFamily& family,
                                         const ModelSubset& alpha,
                                         const Eigen::VectorXd& beta) {
  const Eigen::MatrixXd Xa = design_columns(data, alpha);
  const Eigen::VectorXd eta =
      alpha.empty() ? Eigen::VectorXd::Zero(data.n()) : linear_predictor(Xa, beta);
  const FamilyMoments m = family_moments(family, eta);
  Eigen::VectorXd r(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    r[i] = (data.y[i] - m.mean[i]) / m.v[i];
    if (!std::isfinite(r[i]))
      throw NumericError("pearson residual non-finite at row " + std::to_string(i + 1));
  }
  return r;
}

namespace detail {

inline double median_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// weighted least squares by column-pivoted QR; throws on rank deficiency
inline Eigen::VectorXd wls_solve(const Eigen::MatrixXd& Xa, const Eigen::VectorXd& w,
                                 const Eigen::VectorXd& z, const Dataset& data,
                                 const ModelSubset& alpha) {
  Eigen::VectorXd sw = w.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd A = sw.asDiagonal() * Xa;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < Xa.cols())
    throw SingularDesignError("singular weighted design for model " +
                              subset_label(data, alpha));
  return qr.solve(sw.asDiagonal() * z);
}

inline bool eta_valid(const GlmFamily& family, const Eigen::VectorXd& eta) {
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (!family.admissible(eta[i])) return false;
    if (!std::isfinite(family.mean(eta[i])) || !std::isfinite(family.sd_unit(eta[i])))
      return false;
  }
  return true;
}

// quasi-score X' { (y - mu) h' / v^2 }, the gradient whose root IRLS seeks
inline Eigen::VectorXd ml_score(const Eigen::MatrixXd& Xa, const Eigen::VectorXd& y,
                                const FamilyMoments& m) {
  Eigen::VectorXd u(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i)
    u[i] = (y[i] - m.mean[i]) * m.d1[i] / (m.v[i] * m.v[i]);
  return Xa.transpose() * u;
}

inline double gamma_profile_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  // profile the shape parameter by golden-section on log-shape
  const Eigen::Index n = y.size();
  double sum_ly = 0.0, sum_lmu = 0.0, sum_ratio = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    sum_ly += std::log(y[i]);
    sum_lmu += std::log(mu[i]);
    sum_ratio += y[i] / mu[i];
  }
  auto ell = [&](double loga) {
    const double a = std::exp(loga);
    return n * (a * loga - std::lgamma(a)) + (a - 1.0) * sum_ly - a * sum_lmu -
           a * sum_ratio;
  };
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = -6.0, hi = 10.0;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = ell(x1), f2 = ell(x2);
  for (int it = 0; it < 120; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = ell(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = ell(x1);
    }
  }
  return std::max(f1, f2);
}

inline std::optional<double> ml_loglik(const GlmFamily& family, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& mu) {
  const Eigen::Index n = y.size();
  double ll = 0.0;
  switch (family.kind()) {
    case FamilyKind::gaussian_identity: {
      const double rss = (y - mu).squaredNorm();
      const double s2 = rss / static_cast<double>(n);
      if (s2 <= 0.0) return std::nullopt;
      return -0.5 * n * (std::log(2.0 * M_PI * s2) + 1.0);
    }
    case FamilyKind::poisson_log: {
      for (Eigen::Index i = 0; i < n; ++i)
        ll += y[i] * std::log(mu[i]) - mu[i] - std::lgamma(y[i] + 1.0);
      return ll;
    }
    case FamilyKind::binomial_logit: {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double m = std::clamp(mu[i], 1e-12, 1.0 - 1e-12);
        ll += y[i] * std::log(m) + (1.0 - y[i]) * std::log(1.0 - m);
      }
      return ll;
    }
    case FamilyKind::gamma_log:
    case FamilyKind::gamma_reciprocal: {
      for (Eigen::Index i = 0; i < n; ++i)
        if (!(y[i] > 0.0)) return std::nullopt;
      return gamma_profile_loglik(y, mu);
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Maximum (quasi-)likelihood fit by iteratively reweighted least squares.
/// Non-convergence is reported in the result, never thrown. `init` supplies
/// starting coefficients (bootstrap replicates start at the base fit).
inline FitResult fit_ml(const Dataset& data, const GlmFamily& family,
                        const ModelSubset& alpha, const EstimatorSpec& spec = {},
                        const std::optional<Eigen::VectorXd>& init = std::nullopt) {
  FitResult out;
  out.alpha = alpha;
  out.kind = EstimatorKind::ml;

  const Eigen::Index n = data.n();
  if (alpha.empty()) {  // null model: eta identically zero, nothing to fit
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    if (!detail::eta_valid(family, eta))
      throw DomainError("null model inadmissible for family " + family.name());
    const FamilyMoments m = family_moments(family, eta);
    out.beta_hat = Eigen::VectorXd(0);
    out.converged = true;
    out.pearson_residuals = (data.y - m.mean).cwiseQuotient(m.v);
    out.loglik = detail::ml_loglik(family, data.y, m.mean);
    return out;
  }

  const Eigen::MatrixXd Xa = design_columns(data, alpha);
  const Eigen::Index p = Xa.cols();
  if (n < p)
    throw ContractError("fit: fewer rows (" + std::to_string(n) + ") than columns (" +
                        std::to_string(p) + ")");

  Eigen::VectorXd eta(n);
  if (init) {
    if (init->size() != p)
      throw ContractError("fit: starting beta has wrong length");
    eta = Xa * (*init);
  }
  if (!init || !detail::eta_valid(family, eta)) {
    for (Eigen::Index i = 0; i < n; ++i)
      eta[i] = family.link(family.initial_mean(data.y[i]));
  }

  Eigen::VectorXd beta;
  bool have_consistent_state = false;  // eta == Xa * beta holds
  for (int it = 1; it <= spec.max_iter; ++it) {
    out.iterations = it;
    const FamilyMoments m = family_moments(family, eta);
    Eigen::VectorXd w(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d1 = m.d1[i];
      const double safe_d1 = std::abs(d1) < 1e-10 ? (d1 < 0.0 ? -1e-10 : 1e-10) : d1;
      w[i] = (d1 * d1) / (m.v[i] * m.v[i]);
      z[i] = eta[i] + (data.y[i] - m.mean[i]) / safe_d1;
    }
    const Eigen::VectorXd target = detail::wls_solve(Xa, w, z, data, alpha);
    const Eigen::VectorXd eta_target = Xa * target;

    // damp toward the previous state if the step left the admissible region;
    // damping in beta keeps eta == Xa*beta once a consistent state exists,
    // before that (family starting values) the damping happens in eta space
    Eigen::VectorXd beta_cand = target;
    Eigen::VectorXd eta_cand = eta_target;
    double t = 1.0;
    int halvings = 0;
    bool consistent_cand = true;  // raw target always corresponds to beta_cand
    while (!detail::eta_valid(family, eta_cand) && halvings < 20) {
      t *= 0.5;
      ++halvings;
      if (have_consistent_state) {
        beta_cand = beta + t * (target - beta);
        eta_cand = Xa * beta_cand;
      } else {
        eta_cand = eta + t * (eta_target - eta);
        consistent_cand = false;
      }
    }
    if (!detail::eta_valid(family, eta_cand)) {
      out.converged = false;
      if (have_consistent_state) {
        out.beta_hat = beta;
        out.pearson_residuals = pearson_residuals(data, family, alpha, beta);
      } else {
        out.beta_hat = Eigen::VectorXd::Zero(p);
      }
      return out;
    }
    eta = eta_cand;
    if (consistent_cand) {
      beta = beta_cand;
      have_consistent_state = true;
      const FamilyMoments mc = family_moments(family, eta);
      const Eigen::VectorXd score = detail::ml_score(Xa, data.y, mc);
      if (score.lpNorm<Eigen::Infinity>() <= spec.tol) {
        out.converged = true;
        break;
      }
    }
  }

  if (!have_consistent_state) {
    out.converged = false;
    out.beta_hat = Eigen::VectorXd::Zero(p);
    return out;
  }
  out.beta_hat = beta;
  out.pearson_residuals = pearson_residuals(data, family, alpha, beta);
  const FamilyMoments m = family_moments(family, Xa * beta);
  out.loglik = detail::ml_loglik(family, data.y, m.mean);
  return out;
}

namespace detail {

// E psi_c(r), E psi_c'(r) at one observation; kinks sit at y = mu +- c v
struct HuberExpectations {
  double epsi;
  double ewindow;  // P(|r| < c)
};

inline HuberExpectations huber_expectations(const GlmFamily& family, double mu,
                                            double v, double sigma, double c) {
  HuberExpectations e{};
  const double lo = mu - c * v, hi = mu + c * v;
  e.epsi = family.expect(
      mu, sigma,
      [&](double y) { return std::clamp((y - mu) / v, -c, c); }, {lo, hi});
  e.ewindow = family.expect(
      mu, sigma,
      [&](double y) {
        const double r = (y - mu) / v;
        return std::abs(r) < c ? 1.0 : 0.0;
      },
      {lo, hi});
  return e;
}

// The corrected Huber-score system for one candidate model. score() returns
// false instead of throwing when a trial point is not evaluable (family
// expectation overflow), so the solver can treat such points as rejected.
struct CrEquation {
  const Dataset& data;
  const GlmFamily& family;
  Eigen::MatrixXd Xa;
  Eigen::VectorXd w;
  double c;
  double sigma_expect;

  Eigen::Index n() const { return Xa.rows(); }
  Eigen::Index p() const { return Xa.cols(); }

  bool score(const Eigen::VectorXd& eta, Eigen::VectorXd& s,
             Eigen::MatrixXd* H) const {
    if (!eta_valid(family, eta)) return false;
    try {
      const FamilyMoments m = family_moments(family, eta);
      s.setZero(p());
      if (H) H->setZero(p(), p());
      for (Eigen::Index i = 0; i < n(); ++i) {
        const double v = m.v[i];
        const double r = (data.y[i] - m.mean[i]) / v;
        const auto e = huber_expectations(family, m.mean[i], v, sigma_expect, c);
        const double gain = w[i] * m.d1[i] / v;
        s += (gain * (std::clamp(r, -c, c) - e.epsi)) * Xa.row(i).transpose();
        if (H) {
          const double hw = w[i] * (m.d1[i] * m.d1[i]) / (v * v) * e.ewindow;
          H->noalias() += hw * (Xa.row(i).transpose() * Xa.row(i));
        }
      }
    } catch (const Error&) {
      return false;
    }
    return true;
  }
};

// Damped Newton on the corrected system with the expected-derivative matrix
// sum_i w_i (h'^2/v^2) P(|r_i|<c) x_i x_i' as Jacobian surrogate; steps are
// accepted on Euclidean score decrease, convergence is judged on the sup norm.
// Tracks the best iterate seen so later phases can resume from it.
inline bool cr_newton(const CrEquation& eq, Eigen::VectorXd& beta, int budget,
                      double tol, int& iterations, Eigen::VectorXd& best_beta,
                      double& best_norm) {
  const Eigen::Index p = eq.p();
  Eigen::VectorXd eta = eq.Xa * beta;
  Eigen::VectorXd score(p);
  Eigen::MatrixXd H(p, p);
  for (int it = 1; it <= budget; ++it) {
    ++iterations;
    if (!eq.score(eta, score, &H)) return false;
    const double norm = score.lpNorm<Eigen::Infinity>();
    if (norm < best_norm) {
      best_norm = norm;
      best_beta = beta;
    }
    if (norm <= tol) return true;
    // small ridge keeps the step defined when every residual is clipped
    H.diagonal().array() += 1e-12;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success) return false;
    const Eigen::VectorXd delta = ldlt.solve(score);
    const double base = score.norm();
    double t = 1.0;
    bool stepped = false;
    for (int halvings = 0; halvings <= 20; ++halvings) {
      const Eigen::VectorXd beta_try = beta + t * delta;
      const Eigen::VectorXd eta_try = eq.Xa * beta_try;
      Eigen::VectorXd s_try(p);
      if (eq.score(eta_try, s_try, nullptr) && s_try.norm() < base) {
        beta = beta_try;
        eta = eta_try;
        stepped = true;
        break;
      }
      t *= 0.5;
    }
    if (!stepped) return false;  // no progress possible from here
  }
  return false;
}

// Iteratively reweighted fit with Huber proportional weights min(1, c/|r_i|):
// its fixed point solves the uncorrected bounded-score equations, which puts
// the iterate inside the basin of the corrected root even when gross outliers
// drag the likelihood fit far away.
inline Eigen::VectorXd cr_downweighted_seed(const CrEquation& eq,
                                            const Eigen::VectorXd& beta0,
                                            int& iterations) {
  const Eigen::Index n = eq.n(), p = eq.p();
  Eigen::VectorXd beta = beta0;
  Eigen::VectorXd eta = eq.Xa * beta;
  if (!eta_valid(eq.family, eta)) return beta;
  for (int round = 0; round < 80; ++round) {
    ++iterations;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
    try {
      const FamilyMoments m = family_moments(eq.family, eta);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = m.v[i];
        const double r = (eq.data.y[i] - m.mean[i]) / v;
        const double u = std::abs(r) > eq.c ? eq.c / std::abs(r) : 1.0;
        const double wi = eq.w[i] * u * m.d1[i] * m.d1[i] / (v * v);
        H.noalias() += wi * (eq.Xa.row(i).transpose() * eq.Xa.row(i));
        g += (eq.w[i] * u * m.d1[i] / v * r) * eq.Xa.row(i).transpose();
      }
    } catch (const Error&) {
      break;
    }
    H.diagonal().array() += 1e-12;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success) break;
    const Eigen::VectorXd delta = ldlt.solve(g);
    double t = 1.0;
    bool moved = false;
    for (int halvings = 0; halvings <= 20; ++halvings) {
      const Eigen::VectorXd beta_try = beta + t * delta;
      const Eigen::VectorXd eta_try = eq.Xa * beta_try;
      if (eta_valid(eq.family, eta_try)) {
        const double change = (beta_try - beta).lpNorm<Eigen::Infinity>();
        beta = beta_try;
        eta = eta_try;
        moved = change > 1e-10 * (1.0 + beta.lpNorm<Eigen::Infinity>());
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  return beta;
}

// Levenberg-Marquardt descent of the squared score with a finite-difference
// Jacobian. Rescues two stall patterns of the Newton phases: plateaus just
// above tol (the expected derivative jumps as integer responses cross the
// clipping window) and narrow curved valleys where that matrix is
// near-singular.
inline bool cr_polish(const CrEquation& eq, Eigen::VectorXd& beta, int budget,
                      double tol, int& iterations) {
  const Eigen::Index p = eq.p();
  Eigen::VectorXd s(p);
  if (!eq.score(eq.Xa * beta, s, nullptr)) return false;
  double lambda = 1e-3;
  for (int it = 1; it <= budget; ++it) {
    ++iterations;
    if (s.lpNorm<Eigen::Infinity>() <= tol) return true;
    Eigen::MatrixXd J(p, p);
    bool have_jac = true;
    for (Eigen::Index j = 0; j < p && have_jac; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(beta[j]));
      Eigen::VectorXd bj = beta;
      bj[j] += h;
      Eigen::VectorXd sj(p);
      if (eq.score(eq.Xa * bj, sj, nullptr)) {
        J.col(j) = (sj - s) / h;
      } else {
        bj[j] = beta[j] - h;
        if (!eq.score(eq.Xa * bj, sj, nullptr)) have_jac = false;
        else J.col(j) = (s - sj) / h;
      }
    }
    if (!have_jac) return false;
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * s;
    const double base = s.squaredNorm();
    bool stepped = false;
    for (int tries = 0; tries < 25; ++tries) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal().array() += lambda * (1.0 + JtJ.diagonal().array());
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
      if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd beta_try = beta + ldlt.solve(-g).eval();
        Eigen::VectorXd s_try(p);
        if (eq.score(eq.Xa * beta_try, s_try, nullptr) &&
            s_try.squaredNorm() < base) {
          beta = beta_try;
          s = s_try;
          lambda = std::max(lambda * 0.3, 1e-12);
          stepped = true;
          break;
        }
      }
      lambda *= 3.0;
      if (lambda > 1e12) break;
    }
    if (!stepped) return false;
  }
  return false;
}

}  // namespace detail

/// Robust quasi-likelihood fit: solves the Huber-score estimating equations
///   sum_i w_i x_i (h'_i/v_i) { psi_c(r_i) - E psi_c(r_i) } = 0,
/// r_i = (y_i - h_i)/v_i. Three deterministic phases: damped Newton with the
/// expected derivative sum_i w_i (h'^2/v^2) P(|r_i|<c) x_i x_i' as Jacobian,
/// restarted from a Huber-downweighted reweighted fit if it stalls, then a
/// finite-difference least-squares polish from the best iterate seen. Gross
/// outliers routinely strand the first phase because the likelihood starting
/// point sits in the wrong basin; the restarts recover the bounded-score root.
/// `sigma_expect` parameterizes the response distribution inside the
/// Fisher-consistency expectations (1 for the fixed-dispersion families).
/// Starts at the maximum likelihood fit unless `init` is given.
inline FitResult fit_cr(const Dataset& data, const GlmFamily& family,
                        const ModelSubset& alpha, const EstimatorSpec& spec,
                        double sigma_expect = 1.0,
                        const std::optional<Eigen::VectorXd>& init = std::nullopt) {
  FitResult out;
  out.alpha = alpha;
  out.kind = EstimatorKind::cantoni_ronchetti;

  const Eigen::Index n = data.n();
  if (alpha.empty()) {
    FitResult null = fit_ml(data, family, alpha);
    null.kind = EstimatorKind::cantoni_ronchetti;
    null.loglik.reset();
    return null;
  }
  const Eigen::MatrixXd Xa = design_columns(data, alpha);
  const Eigen::Index p = Xa.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (spec.mallows_weights) {
    if (spec.mallows_weights->size() != n)
      throw ContractError("fit: Mallows weights length mismatch");
    w = *spec.mallows_weights;
  }
  const double c = spec.huber_c;

  Eigen::VectorXd beta;
  if (init) {
    if (init->size() != p) throw ContractError("fit: starting beta has wrong length");
    beta = *init;
  } else {
    EstimatorSpec ml_spec = spec;
    ml_spec.kind = EstimatorKind::ml;
    FitResult start = fit_ml(data, family, alpha, ml_spec);
    if (start.beta_hat.size() != p) {
      out.converged = false;
      out.beta_hat = Eigen::VectorXd::Zero(p);
      return out;
    }
    beta = start.beta_hat;
  }
  if (!detail::eta_valid(family, Xa * beta)) {
    out.converged = false;
    out.beta_hat = beta;
    return out;
  }
  const Eigen::VectorXd start_beta = beta;

  const detail::CrEquation eq{data, family, Xa, w, c, sigma_expect};
  Eigen::VectorXd best_beta = beta;
  double best_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = detail::cr_newton(eq, beta, spec.max_iter, spec.tol,
                                     iterations, best_beta, best_norm);

  if (!converged) {
    // reseed from the downweighted fit around the likelihood estimate; a warm
    // start that stalled gets replaced by a fresh likelihood fit first
    Eigen::VectorXd anchor = start_beta;
    if (init) {
      EstimatorSpec ml_spec = spec;
      ml_spec.kind = EstimatorKind::ml;
      const FitResult ml = fit_ml(data, family, alpha, ml_spec);
      if (ml.beta_hat.size() == p && detail::eta_valid(family, Xa * ml.beta_hat))
        anchor = ml.beta_hat;
    }
    beta = detail::cr_downweighted_seed(eq, anchor, iterations);
    converged = detail::cr_newton(eq, beta, spec.max_iter, spec.tol,
                                  iterations, best_beta, best_norm);
  }
  if (!converged) {
    beta = best_beta;
    converged = detail::cr_polish(eq, beta, spec.max_iter, spec.tol, iterations);
  }
  if (!converged) {
    // a step taken on the last budgeted iteration may already satisfy the
    // equations; test the end point before reporting failure
    Eigen::VectorXd score(p);
    converged = eq.score(Xa * beta, score, nullptr) &&
                score.lpNorm<Eigen::Infinity>() <= spec.tol;
  }
  out.iterations = iterations;
  out.converged = converged;
  out.beta_hat = beta;
  out.pearson_residuals = pearson_residuals(data, family, alpha, beta);
  return out;
}

inline FitResult fit_estimator(const Dataset& data, const GlmFamily& family,
                               const ModelSubset& alpha, const EstimatorSpec& spec,
                               double sigma_expect = 1.0,
                               const std::optional<Eigen::VectorXd>& init = std::nullopt) {
  if (spec.kind == EstimatorKind::ml) return fit_ml(data, family, alpha, spec, init);
  return fit_cr(data, family, alpha, spec, sigma_expect, init);
}

/// Scale estimate from a converged full-model fit's Pearson residuals.
inline ScaleEstimate estimate_sigma(const FitResult& full_fit, ScaleMethod method) {
  if (full_fit.pearson_residuals.size() == 0)
    throw ContractError("scale: fit carries no residuals");
  ScaleEstimate s;
  s.method = method;
  const Eigen::VectorXd& r = full_fit.pearson_residuals;
  const Eigen::Index n = r.size();
  switch (method) {
    case ScaleMethod::fixed_one:
      s.sigma_hat = 1.0;
      return s;
    case ScaleMethod::pearson_moment: {
      const Eigen::Index dof = n - full_fit.alpha.size();
      if (dof <= 0) throw ContractError("scale: no degrees of freedom");
      s.sigma_hat = std::sqrt(r.squaredNorm() / static_cast<double>(dof));
      if (!(s.sigma_hat > 0.0))
        throw DegenerateScaleError("scale: pearson moment collapsed to zero");
      return s;
    }
    case ScaleMethod::mad: {
      std::vector<double> v(r.data(), r.data() + n);
      const double med = detail::median_sorted(v);
      for (double& x : v) x = std::abs(x - med);
      const double mad = detail::median_sorted(v);
      s.sigma_hat = 1.4826 * mad;
      if (!(s.sigma_hat > 0.0))
        throw DegenerateScaleError("scale: mad is zero (residuals degenerate)");
      return s;
    }
  }
  throw ContractError("scale: unknown method");
}

}  // namespace robsel
