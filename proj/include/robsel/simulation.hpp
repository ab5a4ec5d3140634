#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "robsel/dataset.hpp"
#include "robsel/errors.hpp"
#include "robsel/rng.hpp"
#include "robsel/selection.hpp"

namespace robsel {

enum class Contamination { none, moderate8, strong2 };

inline Contamination contamination_from_name(const std::string& name) {
  if (name == "none") return Contamination::none;
  if (name == "moderate-8") return Contamination::moderate8;
  if (name == "strong-2") return Contamination::strong2;
  throw ConfigError("unknown contamination scheme '" + name +
                    "' (expected none, moderate-8, strong-2)");
}

inline std::string contamination_name(Contamination c) {
  switch (c) {
    case Contamination::none: return "none";
    case Contamination::moderate8: return "moderate-8";
    case Contamination::strong2: return "strong-2";
  }
  return "none";
}

/// Poisson log-link design: an intercept plus three independent N(1,1)
/// covariates, response drawn at mean exp(x' beta_true), then optionally
/// contaminated. moderate-8 overwrites the responses of the eight rows with
/// the largest last covariate by Poisson(10) draws; strong-2 overwrites the
/// two rows with the smallest last covariate by Poisson(100) draws.
struct SimDesign {
  int n = 64;
  Eigen::VectorXd beta_true;  // length 4, intercept first
  Contamination contamination = Contamination::none;
  std::uint64_t seed = 12345;
};

namespace detail {

inline std::vector<int> extreme_rows(const Eigen::VectorXd& col, int count, bool largest) {
  std::vector<int> idx(static_cast<std::size_t>(col.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return largest ? col[a] > col[b] : col[a] < col[b];
  });
  idx.resize(static_cast<std::size_t>(count));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

/// Deterministic per run: the design, response, and contamination values come
/// from separate substreams keyed by (seed, run, purpose, attempt), so
/// contaminating a dataset changes nothing about its covariates or the clean
/// responses of untouched rows.
inline Dataset generate_dataset(const SimDesign& design, std::uint64_t run,
                                std::uint64_t attempt = 0) {
  if (design.n < 8) throw ContractError("simulation: need at least 8 observations");
  if (design.beta_true.size() != 4)
    throw ContractError("simulation: true coefficient vector must have length 4");

  const Eigen::Index n = design.n;
  Eigen::MatrixXd X(n, 4);
  X.col(0).setOnes();
  {
    auto gen = rng::stream(design.seed, run, rng::Purpose::design, attempt);
    std::normal_distribution<double> normal(1.0, 1.0);
    for (int j = 1; j < 4; ++j)
      for (Eigen::Index i = 0; i < n; ++i) X(i, j) = normal(gen);
  }

  Eigen::VectorXd y(n);
  {
    auto gen = rng::stream(design.seed, run, rng::Purpose::response, attempt);
    const Eigen::VectorXd eta = X * design.beta_true;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = std::exp(eta[i]);
      if (!std::isfinite(mu))
        throw NumericError("simulation: mean overflow at row " + std::to_string(i + 1));
      std::poisson_distribution<long> pois(mu);
      y[i] = static_cast<double>(pois(gen));
    }
  }

  if (design.contamination != Contamination::none) {
    auto gen = rng::stream(design.seed, run, rng::Purpose::contamination, attempt);
    const bool moderate = design.contamination == Contamination::moderate8;
    const std::vector<int> rows =
        detail::extreme_rows(X.col(3), moderate ? 8 : 2, /*largest=*/moderate);
    std::poisson_distribution<long> pois(moderate ? 10.0 : 100.0);
    for (int r : rows) y[r] = static_cast<double>(pois(gen));
  }

  return make_dataset(std::move(y), std::move(X),
                      {"(intercept)", "x2", "x3", "x4"});
}

/// The eight intercept-containing submodels of the four-column design, in the
/// customary report order: by size, then by index order within a size.
inline std::vector<ModelSubset> simulation_candidates() {
  return all_subsets_candidates(full_subset(4), {0}, /*include_null=*/false);
}

/// How a candidate relates to the truth: exact support, strict superset of
/// the support, or neither.
inline std::string candidate_type(const ModelSubset& alpha,
                                  const Eigen::VectorXd& beta_true) {
  std::vector<int> support;
  for (Eigen::Index c = 0; c < beta_true.size(); ++c)
    if (beta_true[c] != 0.0) support.push_back(static_cast<int>(c));
  const ModelSubset truth{support};
  if (alpha.indices == truth.indices) return "a0";
  if (alpha.contains_all(truth)) return "Ac";
  return "-";
}

struct ExperimentConfig {
  SimDesign design;
  int runs = 500;
  BootstrapConfig bootstrap;    // per-run seed derived from design.seed and run
  CriterionConfig criterion;
  EstimatorSpec estimator_base;  // huber_c, tolerances; kind set per column
  int threads = 1;
  double max_regen_fraction = 0.05;
};

/// Selection frequencies over Monte Carlo runs, one row per candidate and one
/// column per (estimator, criterion) pair.
struct SelectionProbabilityTable {
  std::vector<ModelSubset> models;
  std::vector<std::string> row_type;  // a0 / Ac / -
  std::vector<std::string> columns;   // ml_aic, ml_bic, ml_mn, cr_mn
  Eigen::MatrixXd prob;               // models x columns
  Eigen::MatrixXd stderr_mc;          // sqrt(p(1-p)/runs)
  int runs = 0;
  int regenerated = 0;  // datasets replaced after a full-model fit failure
};

namespace detail {

struct RunWinners {
  int ml_aic = -1, ml_bic = -1, ml_mn = -1, cr_mn = -1;
  int regenerated = 0;
};

inline int index_of(const std::vector<ModelSubset>& models, const ModelSubset& alpha) {
  for (std::size_t i = 0; i < models.size(); ++i)
    if (models[i].indices == alpha.indices) return static_cast<int>(i);
  throw ContractError("simulation: winner not among the candidate models");
}

inline RunWinners run_one(const ExperimentConfig& cfg,
                          const std::vector<ModelSubset>& candidates,
                          std::uint64_t run) {
  const int max_attempts = 16;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const Dataset data = generate_dataset(cfg.design, run,
                                          static_cast<std::uint64_t>(attempt));
    const GlmFamily family(FamilyKind::poisson_log);
    BootstrapConfig boot = cfg.bootstrap;
    boot.seed = rng::derive_key(cfg.design.seed,
                                {run, static_cast<std::uint64_t>(rng::Purpose::bootstrap),
                                 static_cast<std::uint64_t>(attempt)});

    RunWinners win;
    win.regenerated = attempt;
    try {
      // likelihood columns
      SelectionConfig ml_cfg;
      ml_cfg.estimator = cfg.estimator_base;
      ml_cfg.estimator.kind = EstimatorKind::ml;
      ml_cfg.bootstrap = boot;
      ml_cfg.criterion = cfg.criterion;
      ml_cfg.scale = ScaleMethod::fixed_one;
      ml_cfg.always_include = {0};
      SelectionContext ml_ctx = prepare_selection(data, family, full_subset(4), ml_cfg);
      SelectionOutcome ml_out = select_exhaustive(ml_ctx, candidates);
      if (ml_out.table.size() != candidates.size())
        throw NumericError("simulation: a candidate evaluation failed");
      win.ml_mn = index_of(candidates, ml_out.best);

      double best_aic = std::numeric_limits<double>::infinity();
      double best_bic = std::numeric_limits<double>::infinity();
      for (const auto& row : ml_out.table) {
        if (!row.aic || !row.bic)
          throw NumericError("simulation: likelihood criteria unavailable");
        if (*row.aic < best_aic) {
          best_aic = *row.aic;
          win.ml_aic = index_of(candidates, row.alpha);
        }
        if (*row.bic < best_bic) {
          best_bic = *row.bic;
          win.ml_bic = index_of(candidates, row.alpha);
        }
      }

      // robust column
      SelectionConfig cr_cfg = ml_cfg;
      cr_cfg.estimator.kind = EstimatorKind::cantoni_ronchetti;
      SelectionContext cr_ctx = prepare_selection(data, family, full_subset(4), cr_cfg);
      SelectionOutcome cr_out = select_exhaustive(cr_ctx, candidates);
      if (cr_out.table.size() != candidates.size())
        throw NumericError("simulation: a candidate evaluation failed");
      win.cr_mn = index_of(candidates, cr_out.best);
      return win;
    } catch (const Error&) {
      // fit or bootstrap failure on this dataset; draw a replacement
      continue;
    }
  }
  throw NumericError("simulation: run " + std::to_string(run) +
                     " failed " + std::to_string(max_attempts) + " datasets in a row");
}

}  // namespace detail

inline SelectionProbabilityTable run_experiment(const ExperimentConfig& cfg) {
  if (cfg.runs < 1) throw ContractError("simulation: runs must be positive");
  const std::vector<ModelSubset> candidates = simulation_candidates();

  std::vector<detail::RunWinners> winners(static_cast<std::size_t>(cfg.runs));
  const int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    for (int r = 0; r < cfg.runs; ++r)
      winners[static_cast<std::size_t>(r)] =
          detail::run_one(cfg, candidates, static_cast<std::uint64_t>(r));
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          while (true) {
            const int r = next.fetch_add(1);
            if (r >= cfg.runs) break;
            winners[static_cast<std::size_t>(r)] =
                detail::run_one(cfg, candidates, static_cast<std::uint64_t>(r));
          }
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
          next.store(cfg.runs);
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  SelectionProbabilityTable table;
  table.models = candidates;
  table.runs = cfg.runs;
  table.columns = {"ml_aic", "ml_bic", "ml_mn", "cr_mn"};
  for (const auto& alpha : candidates)
    table.row_type.push_back(candidate_type(alpha, cfg.design.beta_true));

  Eigen::MatrixXd counts =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(candidates.size()), 4);
  for (const auto& win : winners) {
    table.regenerated += win.regenerated;
    counts(win.ml_aic, 0) += 1.0;
    counts(win.ml_bic, 1) += 1.0;
    counts(win.ml_mn, 2) += 1.0;
    counts(win.cr_mn, 3) += 1.0;
  }
  if (table.regenerated > cfg.max_regen_fraction * cfg.runs)
    throw NumericError("simulation: " + std::to_string(table.regenerated) +
                       " regenerated datasets exceed the allowed fraction");

  table.prob = counts / static_cast<double>(cfg.runs);
  table.stderr_mc = (table.prob.array() * (1.0 - table.prob.array()) /
                     static_cast<double>(cfg.runs))
                        .sqrt();
  return table;
}

}  // namespace robsel
