#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "robsel/csv.hpp"
#include "robsel/errors.hpp"

namespace robsel {

/// Immutable regression data: response y, design X, column names.
/// Validated on construction; all downstream code may assume finiteness.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<std::string> column_names;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return X.cols(); }
};

inline Dataset make_dataset(Eigen::VectorXd y, Eigen::MatrixXd X,
                            std::vector<std::string> names) {
  if (y.size() == 0) throw ContractError("dataset: empty response");
  if (X.rows() != y.size())
    throw ContractError("dataset: X has " + std::to_string(X.rows()) +
                        " rows but y has " + std::to_string(y.size()));
  if (X.cols() == 0) throw ContractError("dataset: no predictor columns");
  if (static_cast<Eigen::Index>(names.size()) != X.cols())
    throw ContractError("dataset: " + std::to_string(names.size()) +
                        " column names for " + std::to_string(X.cols()) +
                        " columns");
  std::set<std::string> seen;
  for (const auto& nm : names)
    if (!seen.insert(nm).second)
      throw DataError("dataset: duplicate column name '" + nm + "'");
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (!std::isfinite(y[i]))
      throw DataError("dataset: non-finite response at row " + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      if (!std::isfinite(X(i, j)))
        throw DataError("dataset: non-finite value at row " + std::to_string(i + 1) +
                        ", column '" + names[static_cast<std::size_t>(j)] + "'");
  return Dataset{std::move(y), std::move(X), std::move(names)};
}

/// A candidate model: strictly increasing 0-based column indices into the
/// dataset design. Empty only where an operation explicitly allows the null
/// model (backward search's terminal step).
struct ModelSubset {
  std::vector<int> indices;

  int size() const { return static_cast<int>(indices.size()); }
  bool empty() const { return indices.empty(); }

  bool contains(int j) const {
    return std::binary_search(indices.begin(), indices.end(), j);
  }
  bool contains_all(const ModelSubset& other) const {
    return std::includes(indices.begin(), indices.end(), other.indices.begin(),
                         other.indices.end());
  }
  ModelSubset without(int j) const {
    ModelSubset out;
    out.indices.reserve(indices.size());
    for (int k : indices)
      if (k != j) out.indices.push_back(k);
    return out;
  }
  bool operator==(const ModelSubset& o) const { return indices == o.indices; }
  bool operator<(const ModelSubset& o) const { return indices < o.indices; }
};

inline ModelSubset make_subset(std::vector<int> idx, Eigen::Index p) {
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= p)
      throw ContractError("model subset: column index " + std::to_string(idx[k]) +
                          " outside [0," + std::to_string(p) + ")");
    if (k > 0 && idx[k] <= idx[k - 1])
      throw ContractError("model subset: indices must be strictly increasing");
  }
  return ModelSubset{std::move(idx)};
}

inline ModelSubset full_subset(Eigen::Index p) {
  std::vector<int> idx(static_cast<std::size_t>(p));
  std::iota(idx.begin(), idx.end(), 0);
  return ModelSubset{std::move(idx)};
}

/// Columns of X restricted to the subset, in subset order.
inline Eigen::MatrixXd design_columns(const Dataset& data, const ModelSubset& alpha) {
  Eigen::MatrixXd Xa(data.n(), alpha.size());
  for (int k = 0; k < alpha.size(); ++k)
    Xa.col(k) = data.X.col(alpha.indices[static_cast<std::size_t>(k)]);
  return Xa;
}

inline std::string subset_label(const Dataset& data, const ModelSubset& alpha) {
  if (alpha.empty()) return "(null)";
  std::string s;
  for (int j : alpha.indices) {
    if (!s.empty()) s += '+';
    s += data.column_names[static_cast<std::size_t>(j)];
  }
  return s;
}

struct LoadedData {
  Dataset data;
  std::optional<Eigen::VectorXd> weights;  // optional Mallows weights column
};

/// CSV ingestion: header row names columns; the response is selected by
/// name; every remaining numeric column becomes a predictor in file order.
/// An intercept column of ones can be prepended. Missing values are an error.
inline LoadedData dataset_from_csv(const std::string& path,
                                   const std::string& response,
                                   bool add_intercept = true,
                                   const std::string& weights_column = "") {
  csv::Table t = csv::read(path);
  int resp_idx = -1, wt_idx = -1;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (t.header[j] == response) resp_idx = static_cast<int>(j);
    if (!weights_column.empty() && t.header[j] == weights_column)
      wt_idx = static_cast<int>(j);
  }
  if (resp_idx < 0)
    throw DataError(path + ": response column '" + response + "' not found");
  if (!weights_column.empty() && wt_idx < 0)
    throw DataError(path + ": weights column '" + weights_column + "' not found");
  if (t.rows.empty()) throw DataError(path + ": no data rows");

  const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
  std::vector<int> pred_cols;
  std::vector<std::string> names;
  if (add_intercept) names.push_back("(intercept)");
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (static_cast<int>(j) == resp_idx || static_cast<int>(j) == wt_idx) continue;
    pred_cols.push_back(static_cast<int>(j));
    names.push_back(t.header[j]);
  }
  if (pred_cols.empty() && !add_intercept)
    throw DataError(path + ": no predictor columns remain");

  Eigen::VectorXd y(n);
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(names.size()));
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    auto where = [&](int col) {
      return "row " + std::to_string(i + 2) + ", column '" + t.header[static_cast<std::size_t>(col)] + "'";
    };
    y[i] = csv::parse_number(row[static_cast<std::size_t>(resp_idx)], where(resp_idx));
    if (wt_idx >= 0)
      w[i] = csv::parse_number(row[static_cast<std::size_t>(wt_idx)], where(wt_idx));
    Eigen::Index k = 0;
    if (add_intercept) X(i, k++) = 1.0;
    for (int col : pred_cols)
      X(i, k++) = csv::parse_number(row[static_cast<std::size_t>(col)], where(col));
  }
  LoadedData out{make_dataset(std::move(y), std::move(X), std::move(names)), std::nullopt};
  if (wt_idx >= 0) out.weights = std::move(w);
  return out;
}

}  // namespace robsel
