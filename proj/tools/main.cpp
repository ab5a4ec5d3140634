// Command line front end: fit, select, simulate, check-monotonicity.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "robsel/robsel.hpp"

namespace fs = std::filesystem;
using robsel::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = "robsel-out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_path, "JSON configuration file");
  cmd->add_option("--set", a.sets, "override one config entry, section.key=value")
      ->take_all();
  cmd->add_option("--out", a.out_dir, "output directory (default robsel-out)");
  cmd->add_option("--seed", a.seed, "random seed");
  cmd->add_option("--threads", a.threads, "worker threads for simulation");
}

robsel::ConfigDoc build_doc(const CommonArgs& a,
                            const std::vector<std::pair<std::string, json>>& flags) {
  robsel::ConfigDoc doc;
  if (!a.config_path.empty()) doc.load_file(a.config_path);
  for (const auto& s : a.sets) doc.apply_set(s);
  for (const auto& [key, value] : flags) doc.set(key, value);
  if (a.seed) doc.set("seed", json(*a.seed));
  if (a.threads) doc.set("threads", json(*a.threads));
  return doc;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    parts.push_back(text.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return parts;
}

fs::path prepare_out_dir(const CommonArgs& a, const robsel::ConfigDoc& doc) {
  fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::ofstream echo(dir / "config.json");
  echo << doc.dump();
  return dir;
}

struct LoadedProblem {
  robsel::Dataset data;
  robsel::GlmFamily family{robsel::FamilyKind::gaussian_identity};
  robsel::RunConfig rc;
  robsel::ScaleMethod scale = robsel::ScaleMethod::fixed_one;
  std::vector<int> always_include;
};

LoadedProblem load_problem(const robsel::ConfigDoc& doc) {
  robsel::RunConfig rc = robsel::resolve_config(doc);
  if (rc.data_path.empty()) throw robsel::ConfigError("data.path is required");
  if (rc.response.empty()) throw robsel::ConfigError("data.response is required");

  robsel::LoadedData loaded = robsel::dataset_from_csv(
      rc.data_path, rc.response, rc.add_intercept, rc.mallows_weights_column);
  if (loaded.weights) rc.estimator.mallows_weights = *loaded.weights;

  LoadedProblem out{std::move(loaded.data), robsel::GlmFamily::from_name(rc.family_name),
                    std::move(rc), robsel::ScaleMethod::fixed_one, {}};
  out.scale = out.rc.scale_method == "default"
                  ? robsel::default_scale_method(out.family)
                  : robsel::scale_method_from_name(out.rc.scale_method);
  for (const std::string& name : out.rc.always_include_names) {
    bool found = false;
    for (std::size_t c = 0; c < out.data.column_names.size(); ++c) {
      if (out.data.column_names[c] == name) {
        out.always_include.push_back(static_cast<int>(c));
        found = true;
        break;
      }
    }
    if (!found)
      throw robsel::ConfigError("always-include column '" + name +
                                "' not found in the design");
  }
  std::sort(out.always_include.begin(), out.always_include.end());
  if (out.rc.bootstrap.m == 0)
    out.rc.bootstrap.m = robsel::default_resample_size(out.data.n());
  out.rc.bootstrap.seed = out.rc.seed;
  return out;
}

robsel::ModelSubset subset_from_names(const robsel::Dataset& data,
                                      const std::string& joined) {
  std::vector<int> idx;
  for (const std::string& name : split_commas(joined)) {
    bool found = false;
    for (std::size_t c = 0; c < data.column_names.size(); ++c) {
      if (data.column_names[c] == name) {
        idx.push_back(static_cast<int>(c));
        found = true;
        break;
      }
    }
    if (!found)
      throw robsel::ConfigError("model column '" + name + "' not found in the design");
  }
  std::sort(idx.begin(), idx.end());
  return robsel::make_subset(idx, static_cast<int>(data.p()));
}

std::string opt_str(const std::optional<double>& v) {
  return v ? robsel::csv::format(*v) : "";
}

// ---------------------------------------------------------------- fit

int run_fit(const CommonArgs& common, const robsel::ConfigDoc& doc,
            const std::string& model_names) {
  LoadedProblem prob = load_problem(doc);
  const fs::path out_dir = prepare_out_dir(common, doc);

  robsel::ModelSubset alpha = model_names.empty()
                                  ? robsel::full_subset(static_cast<int>(prob.data.p()))
                                  : subset_from_names(prob.data, model_names);

  double sigma_expect = 1.0;
  if (prob.rc.estimator.kind == robsel::EstimatorKind::cantoni_ronchetti &&
      !prob.family.fixed_dispersion()) {
    robsel::EstimatorSpec pilot_spec = prob.rc.estimator;
    pilot_spec.kind = robsel::EstimatorKind::ml;
    robsel::FitResult pilot = robsel::fit_ml(prob.data, prob.family, alpha, pilot_spec);
    if (!pilot.converged)
      throw robsel::NumericError("pilot likelihood fit for the scale did not converge");
    sigma_expect = robsel::estimate_sigma(pilot, robsel::ScaleMethod::mad).sigma_hat;
  }

  robsel::FitResult fit = robsel::fit_estimator(prob.data, prob.family, alpha,
                                                prob.rc.estimator, sigma_expect);
  std::optional<robsel::ScaleEstimate> scale;
  if (fit.converged) scale = robsel::estimate_sigma(fit, prob.scale);

  {
    robsel::csv::Writer w(out_dir / "coefficients.csv");
    w.row({"term", "estimate"});
    for (int k = 0; k < alpha.size(); ++k)
      w.row({prob.data.column_names[static_cast<std::size_t>(alpha.indices[static_cast<std::size_t>(k)])],
             robsel::csv::format(fit.beta_hat[k])});
  }
  {
    robsel::csv::Writer w(out_dir / "summary.csv");
    w.row({"key", "value"});
    w.row({"family", prob.rc.family_name});
    w.row({"estimator", robsel::estimator_name(fit.kind)});
    w.row({"model", robsel::subset_label(prob.data, alpha)});
    w.row({"n", std::to_string(prob.data.n())});
    w.row({"p_alpha", std::to_string(alpha.size())});
    w.row({"converged", fit.converged ? "true" : "false"});
    w.row({"iterations", std::to_string(fit.iterations)});
    w.row({"sigma_hat", scale ? robsel::csv::format(scale->sigma_hat) : ""});
    w.row({"scale_method", robsel::scale_method_name(prob.scale)});
    w.row({"loglik", opt_str(fit.loglik)});
    if (fit.kind == robsel::EstimatorKind::ml && fit.loglik) {
      const robsel::InformationCriteria ic = robsel::aic_bic(fit, prob.data.n());
      w.row({"aic", robsel::csv::format(ic.aic)});
      w.row({"bic", robsel::csv::format(ic.bic)});
    } else {
      w.row({"aic", ""});
      w.row({"bic", ""});
    }
  }

  std::cout << "model " << robsel::subset_label(prob.data, alpha) << ": "
            << (fit.converged ? "converged" : "did not converge") << " after "
            << fit.iterations << " iterations\n";
  for (int k = 0; k < alpha.size(); ++k)
    std::cout << "  " << prob.data.column_names[static_cast<std::size_t>(
                             alpha.indices[static_cast<std::size_t>(k)])]
              << " = " << robsel::csv::format(fit.beta_hat[k]) << "\n";
  if (scale)
    std::cout << "  sigma_hat = " << robsel::csv::format(scale->sigma_hat) << " ("
              << robsel::scale_method_name(prob.scale) << ")\n";
  std::cout << "wrote " << (out_dir / "coefficients.csv").string() << "\n";
  if (!fit.converged) return 1;
  return 0;
}

// ---------------------------------------------------------------- select

void write_models_csv(const fs::path& path,
                      const std::vector<robsel::CriterionBreakdown>& table) {
  robsel::csv::Writer w(path);
  w.row({"rank", "model", "p_alpha", "m1", "penalty", "m2", "total", "aic", "bic"});
  int rank = 1;
  for (const auto& row : table) {
    w.row({std::to_string(rank++), row.label, std::to_string(row.alpha.size()),
           robsel::csv::format(row.m1), robsel::csv::format(row.penalty),
           robsel::csv::format(row.m2), robsel::csv::format(row.total),
           opt_str(row.aic), opt_str(row.bic)});
  }
}

int run_select(const CommonArgs& common, const robsel::ConfigDoc& doc) {
  LoadedProblem prob = load_problem(doc);
  const fs::path out_dir = prepare_out_dir(common, doc);

  robsel::SelectionConfig scfg;
  scfg.estimator = prob.rc.estimator;
  scfg.bootstrap = prob.rc.bootstrap;
  scfg.criterion.k = prob.rc.criterion_k;
  scfg.criterion.loss = robsel::BoundedQuadraticLoss(prob.rc.loss_b);
  scfg.criterion.weights = prob.rc.estimator.mallows_weights;
  scfg.scale = prob.scale;
  scfg.always_include = prob.always_include;

  const robsel::ModelSubset full = robsel::full_subset(static_cast<int>(prob.data.p()));
  robsel::SelectionContext ctx =
      robsel::prepare_selection(prob.data, prob.family, full, scfg);

  std::vector<robsel::SelectionOutcome> outcomes;
  if (prob.rc.search == "exhaustive" || prob.rc.search == "both") {
    outcomes.push_back(robsel::select_exhaustive(
        ctx, robsel::all_subsets_candidates(full, prob.always_include,
                                            prob.rc.include_null)));
  }
  if (prob.rc.search == "backward" || prob.rc.search == "both") {
    outcomes.push_back(robsel::select_backward(ctx));
  }

  write_models_csv(out_dir / "models.csv", outcomes.front().table);
  {
    robsel::csv::Writer w(out_dir / "path.csv");
    w.row({"search", "size", "min_total"});
    for (const auto& outcome : outcomes)
      for (const auto& pt : outcome.path)
        w.row({outcome.search_kind, std::to_string(pt.size),
               robsel::csv::format(pt.min_total)});
  }

  for (const auto& outcome : outcomes) {
    std::cout << outcome.search_kind << " best: "
              << robsel::subset_label(prob.data, outcome.best)
              << " (total " << robsel::csv::format(outcome.table.front().total)
              << ", " << outcome.evaluations << " evaluations)\n";
    for (const auto& fail : outcome.failed)
      std::cout << "  skipped " << fail.label << ": " << fail.reason << "\n";
    for (const auto& warn : outcome.warnings) std::cout << "  note: " << warn << "\n";
  }
  std::cout << "sigma_hat = " << robsel::csv::format(ctx.scale.sigma_hat) << " ("
            << robsel::scale_method_name(prob.scale) << ")\n";
  std::cout << "wrote " << (out_dir / "models.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- simulate

int run_simulate(const CommonArgs& common, const robsel::ConfigDoc& doc) {
  robsel::RunConfig rc = robsel::resolve_config(doc);
  const fs::path out_dir = prepare_out_dir(common, doc);
  if (rc.sim_truth.size() != 4)
    throw robsel::ConfigError("simulate.truth must have exactly 4 entries");

  robsel::ExperimentConfig ecfg;
  ecfg.design.n = rc.sim_n;
  ecfg.design.beta_true = rc.sim_truth;
  ecfg.design.contamination = robsel::contamination_from_name(rc.sim_contamination);
  ecfg.design.seed = rc.seed;
  ecfg.runs = rc.sim_runs;
  ecfg.bootstrap = rc.bootstrap;
  if (ecfg.bootstrap.m == 0)
    ecfg.bootstrap.m = robsel::default_resample_size(rc.sim_n);
  ecfg.criterion.k = rc.criterion_k;
  ecfg.criterion.loss = robsel::BoundedQuadraticLoss(rc.loss_b);
  ecfg.estimator_base = rc.estimator;
  ecfg.threads = rc.threads;

  const robsel::SelectionProbabilityTable table = robsel::run_experiment(ecfg);

  const std::vector<std::string> sim_names = {"(intercept)", "x2", "x3", "x4"};
  auto sim_label = [&](const robsel::ModelSubset& alpha) {
    std::string s;
    for (int j : alpha.indices) {
      if (!s.empty()) s += '+';
      s += sim_names[static_cast<std::size_t>(j)];
    }
    return s;
  };
  auto write_table = [&](const fs::path& path, const Eigen::MatrixXd& values) {
    robsel::csv::Writer w(path);
    std::vector<std::string> header = {"model", "type"};
    header.insert(header.end(), table.columns.begin(), table.columns.end());
    w.row(header);
    for (std::size_t r = 0; r < table.models.size(); ++r) {
      std::vector<std::string> row = {sim_label(table.models[r]), table.row_type[r]};
      for (Eigen::Index c = 0; c < values.cols(); ++c)
        row.push_back(robsel::csv::format(values(static_cast<Eigen::Index>(r), c)));
      w.row(row);
    }
  };
  write_table(out_dir / "table.csv", table.prob);
  write_table(out_dir / "table_stderr.csv", table.stderr_mc);

  std::cout << "selection frequencies over " << table.runs << " runs (truth type a0 = "
            << "exact support, Ac = strict superset):\n";
  std::cout << "model,type";
  for (const auto& c : table.columns) std::cout << "," << c;
  std::cout << "\n";
  for (std::size_t r = 0; r < table.models.size(); ++r) {
    std::cout << sim_label(table.models[r]) << "," << table.row_type[r];
    for (Eigen::Index c = 0; c < table.prob.cols(); ++c)
      std::cout << "," << robsel::csv::format(table.prob(static_cast<Eigen::Index>(r), c));
    std::cout << "\n";
  }
  if (table.regenerated > 0)
    std::cout << "note: " << table.regenerated << " datasets regenerated\n";
  std::cout << "wrote " << (out_dir / "table.csv").string() << "\n";
  return 0;
}

// ------------------------------------------------- check-monotonicity

std::vector<robsel::ModelSubset> support_first_chain(const Eigen::VectorXd& beta_true,
                                                     int p) {
  std::vector<int> order;
  for (int c = 0; c < p; ++c)
    if (beta_true[c] != 0.0) order.push_back(c);
  const std::size_t support = order.empty() ? 1 : order.size();
  if (order.empty()) order.push_back(0);
  for (int c = 0; c < p; ++c)
    if (std::find(order.begin(), order.end(), c) == order.end()) order.push_back(c);
  std::vector<robsel::ModelSubset> chain;
  for (std::size_t k = support; k <= static_cast<std::size_t>(p); ++k) {
    std::vector<int> idx(order.begin(), order.begin() + static_cast<long>(k));
    std::sort(idx.begin(), idx.end());
    chain.push_back(robsel::ModelSubset{idx});
  }
  return chain;
}

int run_check_monotonicity(const CommonArgs& common, const robsel::ConfigDoc& doc,
                           bool counterexample, int designs, double sigma,
                           const std::string& beta_csv) {
  const fs::path out_dir = prepare_out_dir(common, doc);

  if (counterexample) {
    const robsel::TraceCounterexample ex = robsel::trace_counterexample();
    std::cout << "full-sample trace comparison of nested 1- and 2-column models\n";
    std::cout << "  trace(sigma_1 gamma_1) = " << robsel::csv::format(ex.trace_small)
              << "\n";
    std::cout << "  trace(sigma_2 gamma_2) = " << robsel::csv::format(ex.trace_big)
              << "\n";
    std::cout << "  difference = " << robsel::csv::format(ex.difference)
              << " (negative: full-sample traces are not monotone in model size)\n";
    robsel::csv::Writer w(out_dir / "counterexample.csv");
    w.row({"quantity", "value"});
    w.row({"trace_small", robsel::csv::format(ex.trace_small)});
    w.row({"trace_big", robsel::csv::format(ex.trace_big)});
    w.row({"difference", robsel::csv::format(ex.difference)});
    return 0;
  }

  robsel::RunConfig rc = robsel::resolve_config(doc);
  const robsel::BoundedQuadraticLoss loss(rc.loss_b);

  bool all_monotone = true;
  bool identity_ok = true;
  robsel::csv::Writer w(out_dir / "monotonicity.csv");
  w.row({"design", "model", "p_alpha", "trace_product", "per_term_sum",
         "monotone_so_far"});

  auto check_one = [&](int design_id, const robsel::Dataset& data,
                       const robsel::GlmFamily& family, const Eigen::VectorXd& beta) {
    const std::vector<robsel::ModelSubset> chain =
        support_first_chain(beta, static_cast<int>(data.p()));
    const robsel::ChainCheck check = robsel::trace_monotonicity_check(
        data, family, chain, beta, sigma, loss, rc.estimator.kind, rc.estimator);
    double prev = -std::numeric_limits<double>::infinity();
    bool so_far = true;
    for (const auto& step : check.steps) {
      if (step.trace_product < prev) so_far = false;
      prev = step.trace_product;
      if (std::abs(step.trace_product - step.per_term_sum) > 1e-8) identity_ok = false;
      w.row({std::to_string(design_id), robsel::subset_label(data, step.alpha),
             std::to_string(step.alpha.size()),
             robsel::csv::format(step.trace_product),
             robsel::csv::format(step.per_term_sum), so_far ? "true" : "false"});
    }
    if (!check.monotone) all_monotone = false;
  };

  if (!rc.data_path.empty()) {
    if (beta_csv.empty())
      throw robsel::ConfigError("--beta is required with --data (true coefficients)");
    robsel::LoadedData loaded = robsel::dataset_from_csv(
        rc.data_path, rc.response, rc.add_intercept, rc.mallows_weights_column);
    std::vector<double> vals;
    for (const std::string& part : split_commas(beta_csv))
      vals.push_back(robsel::csv::parse_number(part, "--beta"));
    if (static_cast<Eigen::Index>(vals.size()) != loaded.data.p())
      throw robsel::ConfigError("--beta length must match the design column count");
    Eigen::VectorXd beta = Eigen::Map<Eigen::VectorXd>(
        vals.data(), static_cast<Eigen::Index>(vals.size()));
    check_one(0, loaded.data, robsel::GlmFamily::from_name(rc.family_name), beta);
  } else {
    if (rc.sim_truth.size() != 4)
      throw robsel::ConfigError("simulate.truth must have exactly 4 entries");
    robsel::SimDesign design;
    design.n = rc.sim_n;
    design.beta_true = rc.sim_truth;
    design.contamination = robsel::Contamination::none;
    design.seed = rc.seed;
    const robsel::GlmFamily family(robsel::FamilyKind::poisson_log);
    for (int d = 0; d < designs; ++d) {
      const robsel::Dataset data =
          robsel::generate_dataset(design, static_cast<std::uint64_t>(d));
      check_one(d, data, family, rc.sim_truth);
    }
  }

  std::cout << (all_monotone ? "monotone: yes" : "monotone: NO") << "\n";
  std::cout << (identity_ok ? "trace identity: holds (1e-8)"
                            : "trace identity: VIOLATED")
            << "\n";
  std::cout << "wrote " << (out_dir / "monotonicity.csv").string() << "\n";
  return (all_monotone && identity_ok) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust bootstrap model selection for generalized linear models"};
  app.require_subcommand(1);

  CommonArgs fit_common, select_common, sim_common, mono_common;

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit one model");
  add_common(fit_cmd, fit_common);
  std::string fit_data, fit_response, fit_family, fit_estimator, fit_scale, fit_model;
  bool fit_no_intercept = false;
  fit_cmd->add_option("--data", fit_data, "CSV file with header row");
  fit_cmd->add_option("--response", fit_response, "response column name");
  fit_cmd->add_option("--family", fit_family, "family-link name");
  fit_cmd->add_option("--estimator", fit_estimator, "ml or cr");
  fit_cmd->add_option("--scale", fit_scale, "scale method");
  fit_cmd->add_option("--model", fit_model, "comma-separated design columns (default all)");
  fit_cmd->add_flag("--no-intercept", fit_no_intercept, "do not prepend an intercept");

  CLI::App* select_cmd = app.add_subcommand("select", "rank candidate models");
  add_common(select_cmd, select_common);
  std::string sel_data, sel_response, sel_family, sel_estimator, sel_scale, sel_search,
      sel_always;
  bool sel_no_intercept = false, sel_include_null = false;
  std::optional<int> sel_m, sel_B, sel_K;
  select_cmd->add_option("--data", sel_data, "CSV file with header row");
  select_cmd->add_option("--response", sel_response, "response column name");
  select_cmd->add_option("--family", sel_family, "family-link name");
  select_cmd->add_option("--estimator", sel_estimator, "ml or cr");
  select_cmd->add_option("--scale", sel_scale, "scale method");
  select_cmd->add_option("--search", sel_search, "exhaustive, backward, or both");
  select_cmd->add_option("--always-include", sel_always,
                         "comma-separated columns kept in every candidate");
  select_cmd->add_option("--m", sel_m, "resample size");
  select_cmd->add_option("--B", sel_B, "bootstrap replicates");
  select_cmd->add_option("--K", sel_K, "residual strata");
  select_cmd->add_flag("--no-intercept", sel_no_intercept, "do not prepend an intercept");
  select_cmd->add_flag("--include-null", sel_include_null,
                       "add the empty model to the exhaustive candidates");

  CLI::App* sim_cmd = app.add_subcommand("simulate", "selection-probability experiment");
  add_common(sim_cmd, sim_common);
  std::string sim_truth, sim_contamination, sim_estimator;
  std::optional<int> sim_runs, sim_n, sim_m, sim_B, sim_K;
  sim_cmd->add_option("--truth", sim_truth, "true coefficients, four comma-separated values");
  sim_cmd->add_option("--contamination", sim_contamination, "none, moderate-8, strong-2");
  sim_cmd->add_option("--runs", sim_runs, "Monte Carlo runs");
  sim_cmd->add_option("--n", sim_n, "observations per dataset");
  sim_cmd->add_option("--m", sim_m, "resample size");
  sim_cmd->add_option("--B", sim_B, "bootstrap replicates");
  sim_cmd->add_option("--K", sim_K, "residual strata");
  sim_cmd->add_option("--estimator", sim_estimator, "estimator settings base (huber_c etc)");

  CLI::App* mono_cmd = app.add_subcommand(
      "check-monotonicity", "trace identity and chain monotonicity diagnostics");
  add_common(mono_cmd, mono_common);
  bool mono_counterexample = false;
  int mono_designs = 1;
  double mono_sigma = 1.0;
  std::string mono_data, mono_response, mono_family, mono_estimator, mono_truth,
      mono_beta;
  std::optional<int> mono_n;
  mono_cmd->add_flag("--counterexample", mono_counterexample,
                     "print the fixed full-sample trace counterexample");
  mono_cmd->add_option("--designs", mono_designs, "number of simulated designs");
  mono_cmd->add_option("--sigma", mono_sigma, "response scale for the expectations");
  mono_cmd->add_option("--data", mono_data, "CSV design to check instead of simulating");
  mono_cmd->add_option("--response", mono_response, "response column name");
  mono_cmd->add_option("--family", mono_family, "family-link name");
  mono_cmd->add_option("--estimator", mono_estimator, "ml or cr");
  mono_cmd->add_option("--truth", mono_truth, "true coefficients for simulated designs");
  mono_cmd->add_option("--beta", mono_beta, "true coefficients for --data mode");
  mono_cmd->add_option("--n", mono_n, "observations per simulated design");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*fit_cmd) {
      std::vector<std::pair<std::string, json>> flags;
      if (!fit_data.empty()) flags.emplace_back("data.path", json(fit_data));
      if (!fit_response.empty()) flags.emplace_back("data.response", json(fit_response));
      if (!fit_family.empty()) flags.emplace_back("family.name", json(fit_family));
      if (!fit_estimator.empty()) flags.emplace_back("estimator.kind", json(fit_estimator));
      if (!fit_scale.empty()) flags.emplace_back("scale.method", json(fit_scale));
      if (fit_no_intercept) flags.emplace_back("data.add_intercept", json(false));
      return run_fit(fit_common, build_doc(fit_common, flags), fit_model);
    }
    if (*select_cmd) {
      std::vector<std::pair<std::string, json>> flags;
      if (!sel_data.empty()) flags.emplace_back("data.path", json(sel_data));
      if (!sel_response.empty()) flags.emplace_back("data.response", json(sel_response));
      if (!sel_family.empty()) flags.emplace_back("family.name", json(sel_family));
      if (!sel_estimator.empty()) flags.emplace_back("estimator.kind", json(sel_estimator));
      if (!sel_scale.empty()) flags.emplace_back("scale.method", json(sel_scale));
      if (!sel_search.empty()) flags.emplace_back("selection.search", json(sel_search));
      if (!sel_always.empty()) {
        json arr = json::array();
        for (const auto& name : split_commas(sel_always)) arr.push_back(name);
        flags.emplace_back("data.always_include", arr);
      }
      if (sel_m) flags.emplace_back("bootstrap.m", json(*sel_m));
      if (sel_B) flags.emplace_back("bootstrap.B", json(*sel_B));
      if (sel_K) flags.emplace_back("bootstrap.K", json(*sel_K));
      if (sel_no_intercept) flags.emplace_back("data.add_intercept", json(false));
      if (sel_include_null) flags.emplace_back("selection.include_null", json(true));
      return run_select(select_common, build_doc(select_common, flags));
    }
    if (*sim_cmd) {
      std::vector<std::pair<std::string, json>> flags;
      if (!sim_truth.empty()) {
        json arr = json::array();
        for (const auto& part : split_commas(sim_truth))
          arr.push_back(robsel::csv::parse_number(part, "--truth"));
        flags.emplace_back("simulate.truth", arr);
      }
      if (!sim_contamination.empty())
        flags.emplace_back("simulate.contamination", json(sim_contamination));
      if (sim_runs) flags.emplace_back("simulate.runs", json(*sim_runs));
      if (sim_n) flags.emplace_back("simulate.n", json(*sim_n));
      if (sim_m) flags.emplace_back("bootstrap.m", json(*sim_m));
      if (sim_B) flags.emplace_back("bootstrap.B", json(*sim_B));
      if (sim_K) flags.emplace_back("bootstrap.K", json(*sim_K));
      if (!sim_estimator.empty())
        flags.emplace_back("estimator.kind", json(sim_estimator));
      return run_simulate(sim_common, build_doc(sim_common, flags));
    }
    if (*mono_cmd) {
      std::vector<std::pair<std::string, json>> flags;
      if (!mono_data.empty()) flags.emplace_back("data.path", json(mono_data));
      if (!mono_response.empty())
        flags.emplace_back("data.response", json(mono_response));
      if (!mono_family.empty()) flags.emplace_back("family.name", json(mono_family));
      if (!mono_estimator.empty())
        flags.emplace_back("estimator.kind", json(mono_estimator));
      if (!mono_truth.empty()) {
        json arr = json::array();
        for (const auto& part : split_commas(mono_truth))
          arr.push_back(robsel::csv::parse_number(part, "--truth"));
        flags.emplace_back("simulate.truth", arr);
      }
      if (mono_n) flags.emplace_back("simulate.n", json(*mono_n));
      return run_check_monotonicity(mono_common, build_doc(mono_common, flags),
                                    mono_counterexample, mono_designs, mono_sigma,
                                    mono_beta);
    }
  } catch (const robsel::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const robsel::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
