#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "robsel/dataset.hpp"
#include "robsel/errors.hpp"
#include "robsel/estimators.hpp"
#include "robsel/rng.hpp"

namespace robsel {

struct BootstrapConfig {
  int m = 0;       // resample size (m out of n)
  int B = 50;      // requested replicates
  int K = 8;       // residual strata
  std::uint64_t seed = 12345;
  int max_retries = 10;          // per replicate, after the first attempt
  double max_skip_fraction = 0.2;
};

/// Residual-quantile strata of the observation indices. Boundaries are the
/// j/K empirical quantiles b_j = sorted[ceil(j*n/K)] (stable sort by value
/// then row index); stratum k collects residuals in the left-closed interval
/// [b_{k-1}, b_k). Tied boundaries would leave a stratum empty; such strata
/// are merged away with a warning.
struct Stratification {
  int requested_K = 0;
  std::vector<double> boundaries;          // between surviving strata
  std::vector<int> assignment;             // row -> surviving stratum id
  std::vector<std::vector<int>> members;   // per stratum, ascending row order
  std::vector<int> draws;                  // per stratum, sums to m
  int m = 0;
  std::vector<std::string> warnings;

  int effective_K() const { return static_cast<int>(members.size()); }
};

/// Exact-total integer allocation proportional to counts: round by largest
/// remainder, ties resolved toward the smaller stratum index.
inline std::vector<int> largest_remainder_allocation(const std::vector<int>& counts,
                                                     int total) {
  const int n = std::accumulate(counts.begin(), counts.end(), 0);
  if (n <= 0) throw ContractError("allocation: empty strata");
  const std::size_t K = counts.size();
  std::vector<int> out(K);
  std::vector<std::pair<double, std::size_t>> frac(K);
  int assigned = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double quota = static_cast<double>(counts[k]) * total / n;
    out[k] = static_cast<int>(std::floor(quota));
    frac[k] = {quota - std::floor(quota), k};
    assigned += out[k];
  }
  std::stable_sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int r = 0; r < total - assigned; ++r) ++out[frac[static_cast<std::size_t>(r)].second];
  return out;
}

inline Stratification stratify(const Eigen::VectorXd& residuals, int K, int m) {
  const Eigen::Index n = residuals.size();
  if (n < 1) throw ContractError("stratify: empty residual vector");
  if (K < 1) throw ContractError("stratify: K must be at least 1");
  if (m < 1 || m > n)
    throw ContractError("stratify: resample size m=" + std::to_string(m) +
                        " outside [1, n=" + std::to_string(n) + "]");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isfinite(residuals[i]))
      throw NumericError("stratify: non-finite residual at row " + std::to_string(i + 1));

  Stratification s;
  s.requested_K = K;
  s.m = m;

  std::vector<std::pair<double, int>> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    order[static_cast<std::size_t>(i)] = {residuals[i], static_cast<int>(i)};
  std::stable_sort(order.begin(), order.end());

  std::vector<double> raw_bounds;
  for (int j = 1; j < K; ++j) {
    // ceil(j*n/K), clamped into the sorted range
    long idx = (static_cast<long>(j) * n + K - 1) / K;
    idx = std::min<long>(idx, n - 1);
    raw_bounds.push_back(order[static_cast<std::size_t>(idx)].first);
  }

  std::vector<std::vector<int>> raw_members(static_cast<std::size_t>(K));
  std::vector<int> raw_assign(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = residuals[i];
    const auto it = std::upper_bound(raw_bounds.begin(), raw_bounds.end(), r);
    const int k = static_cast<int>(it - raw_bounds.begin());
    raw_assign[static_cast<std::size_t>(i)] = k;
    raw_members[static_cast<std::size_t>(k)].push_back(static_cast<int>(i));
  }

  // drop empty strata (tied boundaries); members stay in row order
  std::vector<int> relabel(static_cast<std::size_t>(K), -1);
  for (int k = 0; k < K; ++k) {
    if (raw_members[static_cast<std::size_t>(k)].empty()) {
      s.warnings.push_back("stratum " + std::to_string(k + 1) +
                           " empty (tied residual boundaries), merged with neighbor");
      continue;
    }
    relabel[static_cast<std::size_t>(k)] = static_cast<int>(s.members.size());
    if (!s.members.empty() && k >= 1)
      s.boundaries.push_back(raw_bounds[static_cast<std::size_t>(k - 1)]);
    s.members.push_back(std::move(raw_members[static_cast<std::size_t>(k)]));
  }
  s.assignment.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    s.assignment[static_cast<std::size_t>(i)] =
        relabel[static_cast<std::size_t>(raw_assign[static_cast<std::size_t>(i)])];

  std::vector<int> counts;
  counts.reserve(s.members.size());
  for (const auto& mem : s.members) counts.push_back(static_cast<int>(mem.size()));
  s.draws = largest_remainder_allocation(counts, m);
  return s;
}

/// One stratified resample: draws[k] indices uniformly with replacement from
/// each stratum, stratum-major order. Deterministic given the generator state.
inline std::vector<int> draw_replicate(const Stratification& strat,
                                       std::mt19937_64& gen) {
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(strat.m));
  for (std::size_t k = 0; k < strat.members.size(); ++k) {
    const auto& mem = strat.members[k];
    std::uniform_int_distribution<std::size_t> pick(0, mem.size() - 1);
    for (int d = 0; d < strat.draws[k]; ++d) idx.push_back(mem[pick(gen)]);
  }
  return idx;
}

inline Dataset resample_rows(const Dataset& data, const std::vector<int>& rows) {
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd y(m);
  Eigen::MatrixXd X(m, data.p());
  for (Eigen::Index i = 0; i < m; ++i) {
    y[i] = data.y[rows[static_cast<std::size_t>(i)]];
    X.row(i) = data.X.row(rows[static_cast<std::size_t>(i)]);
  }
  return Dataset{std::move(y), std::move(X), data.column_names};
}

/// Raw replicate estimates, one row per retained replicate.
struct ReplicateSet {
  Eigen::MatrixXd betas;  // B' x p_alpha
  int requested = 0;
  int skipped = 0;

  int retained() const { return static_cast<int>(betas.rows()); }
};

/// Fits the estimator on B stratified m-out-of-n resamples. Replicate b uses
/// the substream (seed, b, attempt); a non-convergent or singular resample is
/// retried with a fresh draw up to max_retries times, then skipped. The draw
/// for (b, attempt) does not depend on the model being fitted, so concurrent
/// or reordered evaluation of different models sees identical resamples.
inline ReplicateSet replicate_estimators(const Dataset& data, const GlmFamily& family,
                                         const ModelSubset& alpha,
                                         const EstimatorSpec& spec,
                                         const Stratification& strat,
                                         const BootstrapConfig& cfg,
                                         const FitResult& base_fit,
                                         double sigma_expect = 1.0) {
  if (cfg.B < 1) throw ContractError("bootstrap: B must be positive");
  if (!base_fit.converged)
    throw ContractError("bootstrap: base fit for model " + subset_label(data, alpha) +
                        " did not converge");
  ReplicateSet out;
  out.requested = cfg.B;
  std::vector<Eigen::VectorXd> kept;
  kept.reserve(static_cast<std::size_t>(cfg.B));
  std::optional<Eigen::VectorXd> mallows = spec.mallows_weights;

  for (int b = 0; b < cfg.B; ++b) {
    bool ok = false;
    for (int attempt = 0; attempt <= cfg.max_retries && !ok; ++attempt) {
      auto gen = rng::stream(cfg.seed, {static_cast<std::uint64_t>(b),
                                        static_cast<std::uint64_t>(attempt)});
      const std::vector<int> rows = draw_replicate(strat, gen);
      Dataset sub = resample_rows(data, rows);
      EstimatorSpec sub_spec = spec;
      if (mallows) {
        Eigen::VectorXd w(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
          w[static_cast<Eigen::Index>(i)] = (*mallows)[rows[i]];
        sub_spec.mallows_weights = std::move(w);
      }
      try {
        FitResult fit = fit_estimator(sub, family, alpha, sub_spec, sigma_expect,
                                      base_fit.beta_hat);
        if (fit.converged) {
          kept.push_back(fit.beta_hat);
          ok = true;
        }
      } catch (const SingularDesignError&) {
        // resample lost a direction; retry with a fresh draw
      }
    }
    if (!ok) ++out.skipped;
  }

  if (out.skipped > cfg.max_skip_fraction * cfg.B)
    throw BootstrapDegeneracyError(
        "bootstrap: " + std::to_string(out.skipped) + " of " + std::to_string(cfg.B) +
        " replicates failed for model " + subset_label(data, alpha));

  out.betas.resize(static_cast<Eigen::Index>(kept.size()), alpha.size());
  for (std::size_t b = 0; b < kept.size(); ++b)
    out.betas.row(static_cast<Eigen::Index>(b)) = kept[b];
  return out;
}

/// Centers the replicates so their mean reproduces the base estimate:
/// row_b -> row_b - (mean(rows) - beta_hat). Column means of the result
/// equal beta_hat (to roundoff), the invariant the criterion relies on.
inline Eigen::MatrixXd bias_adjusted_replicates(const ReplicateSet& reps,
                                                const Eigen::VectorXd& beta_hat) {
  if (reps.retained() < 1)
    throw ContractError("bias adjustment: no retained replicates");
  if (reps.betas.cols() != beta_hat.size())
    throw ContractError("bias adjustment: dimension mismatch");
  const Eigen::RowVectorXd mean = reps.betas.colwise().mean();
  Eigen::MatrixXd adjusted = reps.betas;
  adjusted.rowwise() -= (mean - beta_hat.transpose());
  return adjusted;
}

}  // namespace robsel
