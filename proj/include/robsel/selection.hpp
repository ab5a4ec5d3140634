#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "robsel/bootstrap.hpp"
#include "robsel/criterion.hpp"
#include "robsel/dataset.hpp"
#include "robsel/errors.hpp"
#include "robsel/estimators.hpp"
#include "robsel/family.hpp"

namespace robsel {

/// All subsets of the full model that contain every always-include column,
/// ordered by (size, lexicographic index order). include_null adds the empty
/// model when the always-include set is itself empty.
inline std::vector<ModelSubset> all_subsets_candidates(const ModelSubset& full,
                                                       const std::vector<int>& always,
                                                       bool include_null = false) {
  for (int a : always)
    if (!full.contains(a))
      throw ContractError("candidates: always-include column " + std::to_string(a) +
                          " not in the full model");
  std::vector<int> free_cols;
  for (int c : full.indices)
    if (std::find(always.begin(), always.end(), c) == always.end())
      free_cols.push_back(c);
  const std::size_t q = free_cols.size();
  if (q > 20) throw ContractError("candidates: too many free columns for exhaustive search");

  std::vector<ModelSubset> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << q); ++mask) {
    std::vector<int> idx(always.begin(), always.end());
    for (std::size_t j = 0; j < q; ++j)
      if (mask & (std::size_t{1} << j)) idx.push_back(free_cols[j]);
    std::sort(idx.begin(), idx.end());
    if (idx.empty() && !include_null) continue;
    out.push_back(ModelSubset{std::move(idx)});
  }
  std::sort(out.begin(), out.end(), [](const ModelSubset& a, const ModelSubset& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a.indices < b.indices;
  });
  return out;
}

struct SelectionConfig {
  EstimatorSpec estimator;
  BootstrapConfig bootstrap;
  CriterionConfig criterion;
  ScaleMethod scale = ScaleMethod::fixed_one;
  std::vector<int> always_include;  // column indices always kept
};

/// Work shared by every candidate evaluation: the full-model fit, the scale
/// estimate, the residual stratification, and the criterion denominators.
struct SelectionContext {
  const Dataset* data = nullptr;
  GlmFamily family{FamilyKind::gaussian_identity};
  SelectionConfig cfg;
  ModelSubset full_model;
  FitResult full_fit;
  ScaleEstimate scale;
  double sigma_expect = 1.0;  // scale used inside robust-score expectations
  Stratification strat;
  Eigen::VectorXd denominators;
};

inline SelectionContext prepare_selection(const Dataset& data, const GlmFamily& family,
                                          const ModelSubset& full_model,
                                          const SelectionConfig& cfg) {
  SelectionContext ctx;
  ctx.data = &data;
  ctx.family = family;
  ctx.cfg = cfg;
  ctx.full_model = full_model;

  // the robust score needs a scale before any robust fit exists; bootstrap it
  // from a likelihood fit when the family has free dispersion
  if (cfg.estimator.kind == EstimatorKind::cantoni_ronchetti &&
      !family.fixed_dispersion()) {
    EstimatorSpec ml_spec = cfg.estimator;
    ml_spec.kind = EstimatorKind::ml;
    FitResult pilot = fit_ml(data, family, full_model, ml_spec);
    if (!pilot.converged)
      throw NumericError("selection: pilot likelihood fit for the scale did not converge");
    ctx.sigma_expect = estimate_sigma(pilot, ScaleMethod::mad).sigma_hat;
  }

  ctx.full_fit = fit_estimator(data, family, full_model, cfg.estimator, ctx.sigma_expect);
  if (!ctx.full_fit.converged)
    throw NumericError("selection: full model " + subset_label(data, full_model) +
                       " did not converge");
  ctx.scale = estimate_sigma(ctx.full_fit, cfg.scale);
  ctx.strat = stratify(ctx.full_fit.pearson_residuals, cfg.bootstrap.K, cfg.bootstrap.m);
  ctx.denominators = criterion_denominators(data, family, ctx.full_fit,
                                            ctx.scale.sigma_hat);
  return ctx;
}

/// Criterion breakdown for one candidate. Throws on singular designs, domain
/// violations, and bootstrap degeneracy; callers record those as failed
/// evaluations. A non-convergent candidate fit is also reported by throwing,
/// so search code treats it like any other failed candidate.
inline CriterionBreakdown evaluate_model(const SelectionContext& ctx,
                                         const ModelSubset& alpha) {
  const Dataset& data = *ctx.data;
  CriterionBreakdown out;
  out.alpha = alpha;
  out.label = subset_label(data, alpha);
  out.sigma_hat = ctx.scale.sigma_hat;

  FitResult fit = fit_estimator(data, ctx.family, alpha, ctx.cfg.estimator,
                                ctx.sigma_expect);
  if (!fit.converged)
    throw NumericError("candidate " + out.label + " did not converge");
  out.converged = true;

  out.m1 = m1_in_sample(data, ctx.family, alpha, fit.beta_hat, ctx.denominators,
                        ctx.cfg.criterion);
  out.penalty = penalty_term(data.n(), alpha.size(), ctx.cfg.criterion.k);
  if (alpha.empty()) {
    // nothing to estimate, so replicate estimates equal the base estimate
    out.m2 = out.m1;
    out.replicates_used = ctx.cfg.bootstrap.B;
  } else {
    ReplicateSet reps = replicate_estimators(data, ctx.family, alpha,
                                             ctx.cfg.estimator, ctx.strat,
                                             ctx.cfg.bootstrap, fit, ctx.sigma_expect);
    const Eigen::MatrixXd adjusted = bias_adjusted_replicates(reps, fit.beta_hat);
    out.m2 = m2_prediction(data, ctx.family, alpha, adjusted, ctx.denominators,
                           ctx.cfg.criterion);
    out.replicates_used = reps.retained();
    out.replicates_skipped = reps.skipped;
  }
  out.total = mn_total(out.m1, out.penalty, out.m2, ctx.scale.sigma_hat);

  if (fit.kind == EstimatorKind::ml && fit.loglik) {
    const InformationCriteria ic = aic_bic(fit, data.n());
    out.aic = ic.aic;
    out.bic = ic.bic;
  }
  return out;
}

/// Deterministic ranking: total, then fewer columns, then index order.
inline bool criterion_order(const CriterionBreakdown& a, const CriterionBreakdown& b) {
  if (a.total != b.total) return a.total < b.total;
  if (a.alpha.size() != b.alpha.size()) return a.alpha.size() < b.alpha.size();
  return a.alpha.indices < b.alpha.indices;
}

struct PathPoint {
  int size = 0;
  double min_total = 0.0;
};

/// Best criterion value at each model size among the evaluated candidates.
inline std::vector<PathPoint> solution_path(const std::vector<CriterionBreakdown>& table) {
  std::map<int, double> best;
  for (const auto& row : table) {
    auto [it, inserted] = best.try_emplace(row.alpha.size(), row.total);
    if (!inserted && row.total < it->second) it->second = row.total;
  }
  std::vector<PathPoint> out;
  out.reserve(best.size());
  for (const auto& [size, total] : best) out.push_back(PathPoint{size, total});
  return out;
}

struct FailedEvaluation {
  std::string label;
  std::string reason;
};

struct SelectionOutcome {
  ModelSubset best;
  std::vector<CriterionBreakdown> table;  // ranked by criterion_order
  std::vector<PathPoint> path;
  long evaluations = 0;  // attempted candidate evaluations
  std::string search_kind;
  double sigma_hat = 1.0;
  std::vector<FailedEvaluation> failed;
  std::vector<std::string> warnings;
};

namespace detail {

inline void finish_outcome(SelectionOutcome& out, const SelectionContext& ctx) {
  if (out.table.empty())
    throw Error("selection: no candidate could be evaluated");
  std::sort(out.table.begin(), out.table.end(), criterion_order);
  out.best = out.table.front().alpha;
  out.path = solution_path(out.table);
  out.sigma_hat = ctx.scale.sigma_hat;
  out.warnings.insert(out.warnings.end(), ctx.strat.warnings.begin(),
                      ctx.strat.warnings.end());
}

}  // namespace detail

inline SelectionOutcome select_exhaustive(const SelectionContext& ctx,
                                          const std::vector<ModelSubset>& candidates) {
  if (candidates.empty()) throw ContractError("selection: empty candidate set");
  SelectionOutcome out;
  out.search_kind = "exhaustive";
  for (const ModelSubset& alpha : candidates) {
    ++out.evaluations;
    try {
      out.table.push_back(evaluate_model(ctx, alpha));
    } catch (const Error& e) {
      out.failed.push_back({subset_label(*ctx.data, alpha), e.what()});
    }
  }
  detail::finish_outcome(out, ctx);
  return out;
}

/// Greedy backward elimination. Starting from the full model, each round
/// evaluates every single-column deletion of the current model (columns in
/// the always-include set are never deleted) and descends to the best one;
/// the reported winner is the best model seen anywhere along the way. With q
/// removable columns this evaluates 1 + q(q+1)/2 candidates. A full model
/// with a single column and nothing forced in has no meaningful deletion
/// round, so it is reported as is.
inline SelectionOutcome select_backward(const SelectionContext& ctx) {
  const std::vector<int>& always = ctx.cfg.always_include;
  for (int a : always)
    if (!ctx.full_model.contains(a))
      throw ContractError("selection: always-include column " + std::to_string(a) +
                          " not in the full model");
  SelectionOutcome out;
  out.search_kind = "backward";

  auto try_eval = [&](const ModelSubset& alpha) -> std::optional<CriterionBreakdown> {
    ++out.evaluations;
    try {
      CriterionBreakdown row = evaluate_model(ctx, alpha);
      out.table.push_back(row);
      return row;
    } catch (const Error& e) {
      out.failed.push_back({subset_label(*ctx.data, alpha), e.what()});
      return std::nullopt;
    }
  };

  std::optional<CriterionBreakdown> current = try_eval(ctx.full_model);
  if (!current) throw Error("selection: full model evaluation failed: " +
                            out.failed.back().reason);

  const bool single_free_column = ctx.full_model.size() == 1 && always.empty();
  if (!single_free_column) {
    while (current->alpha.size() > static_cast<int>(always.size())) {
      std::optional<CriterionBreakdown> round_best;
      for (int c : current->alpha.indices) {
        if (std::find(always.begin(), always.end(), c) != always.end()) continue;
        std::optional<CriterionBreakdown> row = try_eval(current->alpha.without(c));
        if (row && (!round_best || criterion_order(*row, *round_best)))
          round_best = row;
      }
      if (!round_best) {
        out.warnings.push_back("backward search stopped at " + current->label +
                               ": every deletion failed");
        break;
      }
      current = round_best;
    }
  }

  detail::finish_outcome(out, ctx);
  return out;
}

}  // namespace robsel
