// Copyright 2026 The apres Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "apres/error.hpp"
#include "json.hpp"

namespace apres {

enum class RegressionErrc {
  InvalidInput,
  DegenerateDesign,
  DimensionMismatch,
  LengthMismatch,
  Empty,
  AllCandidatesFailed,
};
constexpr std::string_view module_name(RegressionErrc) { return "nb-regression"; }
using RegressionError = ModuleError<RegressionErrc>;

// Rows are papers, columns are rubric items in rubric order.
struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> column_keys;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

// NB2 count model: mu = exp(intercept + z . coefficients) where
// z = (x - feature_means) / feature_stds, Var = mu + alpha mu^2.
// Dropped constant columns keep a zero coefficient and unit std so the model
// still accepts full-width feature vectors.
struct NBModel {
  std::vector<std::string> column_keys;
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  double dispersion_alpha = 0.0;  // 0 means the Poisson limit
  Eigen::VectorXd feature_means;
  Eigen::VectorXd feature_stds;
  double ridge_lambda = 0.0;

  std::size_t dimension() const { return static_cast<std::size_t>(coefficients.size()); }
};

struct FitReport {
  double log_likelihood = 0.0;  // unpenalized, at the returned estimate
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> dropped_columns;
  double alpha_estimate = 0.0;  // before Poisson-limit rounding
};

struct FitOptions {
  int max_iterations = 200;
  double tolerance = 1e-8;  // relative change of the penalized log-likelihood
  double alpha_min = 1e-8;
  double alpha_max = 50.0;
  double poisson_limit = 1e-4;  // alpha below this is reported as 0
};

struct FitResult {
  NBModel model;
  FitReport report;
};

// Ridge-penalized NB2 maximum likelihood. The penalty is (n lambda / 2) |beta|^2
// on the standardized non-intercept coefficients. Non-convergence is reported
// through FitReport::converged rather than thrown.
FitResult fit(const DesignMatrix& x, std::span<const std::int64_t> y, double lambda,
              const FitOptions& options = {});

double predict(const NBModel& model, std::span<const double> features);
Eigen::VectorXd predict(const NBModel& model, const Eigen::MatrixXd& rows);

double mae(std::span<const double> predictions, std::span<const double> truth);

// Intercept-only model with exp(intercept) = mean(y_train), accepting
// feature vectors of width `dimension`.
NBModel constant_baseline(std::span<const std::int64_t> y_train, std::size_t dimension = 0);

// Gradient of the penalized log-likelihood with respect to
// (intercept, standardized coefficients..., alpha) at the model's estimate.
Eigen::VectorXd penalized_gradient(const NBModel& model, const DesignMatrix& x,
                                   std::span<const std::int64_t> y, double alpha);

struct LambdaCandidate {
  double lambda = 0.0;
  bool ok = false;
  double validation_mae = 0.0;
  std::string error;
};

struct GridSearchResult {
  double best_lambda = 0.0;
  FitResult best;
  double validation_mae = 0.0;
  std::vector<LambdaCandidate> candidates;  // ascending lambda
};

std::vector<double> default_lambda_grid();

// Fits each lambda on the training rows and keeps the minimal validation MAE;
// exact ties go to the smaller lambda.
GridSearchResult grid_search(const DesignMatrix& x_train, std::span<const std::int64_t> y_train,
                             const DesignMatrix& x_val, std::span<const std::int64_t> y_val,
                             std::span<const double> lambdas, std::size_t workers = 1);

nlohmann::ordered_json model_to_json(const NBModel& model);
NBModel model_from_json(const nlohmann::ordered_json& j);

std::vector<double> to_doubles(std::span<const std::int64_t> counts);

}  // namespace apres
