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

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "apres/nb_regression.hpp"
#include "apres/rng.hpp"

using namespace apres;

namespace {

struct Synthetic {
  DesignMatrix x;
  std::vector<std::int64_t> y;
};

Synthetic nb_data(std::size_t n, const std::vector<double>& beta, double beta0, double alpha, std::uint64_t seed,
                  std::size_t noise_columns = 0) {
  Rng rng(seed);
  const auto k = beta.size() + noise_columns;
  Synthetic s;
  s.x.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) s.x.column_keys.push_back("x" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) {
    double eta = beta0;
    for (std::size_t j = 0; j < k; ++j) {
      const double v = rng.normal();
      s.x.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      if (j < beta.size()) eta += beta[j] * v;
    }
    s.y.push_back(rng.negative_binomial(std::exp(eta), alpha));
  }
  return s;
}

// Raw-scale slopes and intercept from a model fitted on standardized columns.
std::pair<double, std::vector<double>> raw_scale(const NBModel& m) {
  double b0 = m.intercept;
  std::vector<double> b;
  for (Eigen::Index j = 0; j < m.coefficients.size(); ++j) {
    b.push_back(m.coefficients(j) / m.feature_stds(j));
    b0 -= m.coefficients(j) * m.feature_means(j) / m.feature_stds(j);
  }
  return {b0, b};
}

// NB2 log-likelihood written out directly from the probability mass function.
double nb2_loglik(const Synthetic& s, double b0, const std::vector<double>& b, double alpha) {
  const double r = 1.0 / alpha;
  double ll = 0;
  for (std::size_t i = 0; i < s.y.size(); ++i) {
    double eta = b0;
    for (std::size_t j = 0; j < b.size(); ++j) eta += b[j] * s.x.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    const double mu = std::exp(eta);
    const double y = static_cast<double>(s.y[i]);
    ll += std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1) + r * std::log(r / (r + mu)) +
          y * std::log(mu / (r + mu));
  }
  return ll;
}

std::vector<double> as_doubles(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST(Regression, ConstantCountsGiveConstantPredictionsAndPoissonLimit) {
  DesignMatrix x;
  x.values.resize(4, 0);
  const std::vector<std::int64_t> y = {3, 3, 3, 3};
  const FitResult r = fit(x, y, 0.0);
  EXPECT_NEAR(predict(r.model, std::vector<double>{}), 3.0, 1e-9);
  EXPECT_EQ(r.model.dispersion_alpha, 0.0);
  EXPECT_TRUE(r.report.converged);
}

TEST(Regression, RecoversKnownCoefficients) {
  const Synthetic s = nb_data(20000, {0.5, -0.3, 0.2}, 0.7, 0.5, 12345);
  const auto start = std::chrono::steady_clock::now();
  const FitResult r = fit(s.x, s.y, 0.0);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto [b0, b] = raw_scale(r.model);
  EXPECT_NEAR(b[0], 0.5, 0.05);
  EXPECT_NEAR(b[1], -0.3, 0.05);
  EXPECT_NEAR(b[2], 0.2, 0.05);
  EXPECT_NEAR(b0, 0.7, 0.05);
  EXPECT_NEAR(r.model.dispersion_alpha, 0.5, 0.10);
  EXPECT_TRUE(r.report.converged);
  EXPECT_LT(seconds, 10.0);
}

TEST(Regression, FitMaximizesAnIndependentLikelihood) {
  const Synthetic s = nb_data(4000, {0.5, -0.3, 0.2}, 0.7, 0.5, 777);
  const FitResult r = fit(s.x, s.y, 0.0);
  const auto [b0, b] = raw_scale(r.model);
  const double fitted = nb2_loglik(s, b0, b, r.model.dispersion_alpha);
  EXPECT_NEAR(fitted, r.report.log_likelihood, 1e-6 * std::abs(fitted));
  // Coarse grid around the truth; no grid point may beat the fitted optimum.
  double best = -INFINITY;
  std::vector<double> arg;
  for (double d0 : {-0.1, -0.05, 0.0, 0.05, 0.1})
    for (double d1 : {-0.1, -0.05, 0.0, 0.05, 0.1})
      for (double d2 : {-0.1, -0.05, 0.0, 0.05, 0.1})
        for (double d3 : {-0.1, -0.05, 0.0, 0.05, 0.1})
          for (double a : {0.3, 0.4, 0.5, 0.6, 0.7}) {
            const double ll = nb2_loglik(s, 0.7 + d0, {0.5 + d1, -0.3 + d2, 0.2 + d3}, a);
            if (ll > best) {
              best = ll;
              arg = {0.7 + d0, 0.5 + d1, -0.3 + d2, 0.2 + d3, a};
            }
          }
  EXPECT_GE(fitted, best - 1e-9);
  EXPECT_NEAR(b0, arg[0], 0.05 + 1e-9);
  EXPECT_NEAR(b[0], arg[1], 0.05 + 1e-9);
  EXPECT_NEAR(b[1], arg[2], 0.05 + 1e-9);
  EXPECT_NEAR(b[2], arg[3], 0.05 + 1e-9);
  EXPECT_NEAR(r.model.dispersion_alpha, arg[4], 0.1 + 1e-9);
}

TEST(Regression, PoissonDataGivesSmallDispersion) {
  Rng rng(4);
  DesignMatrix x;
  x.values.resize(5000, 0);
  std::vector<std::int64_t> y;
  for (int i = 0; i < 5000; ++i) y.push_back(rng.poisson(std::exp(0.5)));
  const FitResult r = fit(x, y, 0.0);
  EXPECT_LE(r.model.dispersion_alpha, 0.05);
  EXPECT_NEAR(std::exp(r.model.intercept), std::exp(0.5), 0.05);
}

TEST(Regression, FittedMeanMatchesTrainingMean) {
  // The intercept score equation makes the average fitted value equal the
  // average count; the prediction at the feature means is exp(intercept),
  // which sits below that average by the convexity of exp.
  const Synthetic s = nb_data(20000, {0.5, -0.3, 0.2}, 0.7, 0.5, 12345);
  const FitResult r = fit(s.x, s.y, 0.0);
  const Eigen::VectorXd pred = predict(r.model, s.x.values);
  double ybar = 0;
  for (auto v : s.y) ybar += static_cast<double>(v);
  ybar /= static_cast<double>(s.y.size());
  EXPECT_NEAR(pred.mean(), ybar, 0.02 * ybar);
  const std::vector<double> means = as_doubles(r.model.feature_means);
  EXPECT_NEAR(predict(r.model, means), std::exp(r.model.intercept), 1e-12);
  EXPECT_LT(predict(r.model, means), ybar);
}

TEST(Regression, ScoreEquationsHoldAtTheOptimum) {
  for (double lambda : {0.0, 1e-3, 1e-1}) {
    const Synthetic s = nb_data(1500, {0.4, -0.2}, 0.3, 0.8, 21);
    const FitResult r = fit(s.x, s.y, lambda);
    ASSERT_TRUE(r.report.converged);
    const Eigen::VectorXd g = penalized_gradient(r.model, s.x, s.y, r.report.alpha_estimate);
    EXPECT_LT(g.head(g.size() - 1).cwiseAbs().maxCoeff(), 1e-6) << "lambda " << lambda;
    EXPECT_LT(std::abs(g(g.size() - 1)), 1e-3) << "lambda " << lambda;
  }
}

TEST(Regression, RidgeShrinksCoefficients) {
  const Synthetic s = nb_data(600, {0.5, -0.3, 0.2}, 0.7, 0.5, 3);
  const double n0 = fit(s.x, s.y, 0.0).model.coefficients.norm();
  const double n1 = fit(s.x, s.y, 0.1).model.coefficients.norm();
  const double n2 = fit(s.x, s.y, 10.0).model.coefficients.norm();
  EXPECT_LT(n1, n0);
  EXPECT_LT(n2, n1);
}

TEST(Regression, StandardizationInvariance) {
  const Synthetic s = nb_data(800, {0.5, -0.3}, 0.2, 0.4, 8);
  Synthetic t = s;
  t.x.values.col(0) = t.x.values.col(0) * 37.0 + Eigen::VectorXd::Constant(800, 5.0);
  t.x.values.col(1) = t.x.values.col(1) * -0.01 + Eigen::VectorXd::Constant(800, -300.0);
  for (double lambda : {0.0, 0.01}) {
    const Eigen::VectorXd a = predict(fit(s.x, s.y, lambda).model, s.x.values);
    const Eigen::VectorXd b = predict(fit(t.x, t.y, lambda).model, t.x.values);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Regression, ConstantColumnsDroppedAndReported) {
  Synthetic s = nb_data(500, {0.3}, 0.5, 0.3, 9, 1);
  s.x.values.col(1).setConstant(4.0);
  const FitResult r = fit(s.x, s.y, 0.0);
  ASSERT_EQ(r.report.dropped_columns, std::vector<std::string>{"x1"});
  EXPECT_GT(r.model.feature_stds.minCoeff(), 0.0);
  std::vector<double> row = {1.0, 123.0};
  std::vector<double> row2 = {1.0, -9.0};
  EXPECT_EQ(predict(r.model, row), predict(r.model, row2));
}

TEST(Regression, DegenerateDesign) {
  Synthetic s = nb_data(300, {0.3, 0.1}, 0.5, 0.3, 10);
  s.x.values.col(1) = s.x.values.col(0) * 2.0;
  try {
    fit(s.x, s.y, 0.0);
    FAIL();
  } catch (const RegressionError& e) {
    EXPECT_EQ(e.code(), RegressionErrc::DegenerateDesign);
  }
  DesignMatrix tiny;
  tiny.values = Eigen::MatrixXd::Random(2, 3);
  EXPECT_THROW(fit(tiny, std::vector<std::int64_t>{1, 2}, 0.0), RegressionError);
}

TEST(Regression, InputValidation) {
  DesignMatrix x;
  x.values = Eigen::MatrixXd::Zero(3, 1);
  x.values(0, 0) = 1;
  EXPECT_THROW(fit(x, std::vector<std::int64_t>{1, -1, 2}, 0.0), RegressionError);
  EXPECT_THROW(fit(x, std::vector<std::int64_t>{1, 2}, 0.0), RegressionError);
  x.values(1, 0) = NAN;
  EXPECT_THROW(fit(x, std::vector<std::int64_t>{1, 2, 3}, 0.0), RegressionError);
}

TEST(Predict, LinkFunctionExamples) {
  NBModel m;
  m.intercept = std::log(2.0);
  m.coefficients = Eigen::VectorXd::Zero(2);
  m.feature_means = Eigen::VectorXd::Zero(2);
  m.feature_stds = Eigen::VectorXd::Ones(2);
  EXPECT_DOUBLE_EQ(predict(m, std::vector<double>{5, -7}), 2.0);
  NBModel one;
  one.intercept = 0;
  one.coefficients = Eigen::VectorXd::Ones(1);
  one.feature_means = Eigen::VectorXd::Zero(1);
  one.feature_stds = Eigen::VectorXd::Ones(1);
  EXPECT_NEAR(predict(one, std::vector<double>{std::log(3.0)}), 3.0, 1e-12);
  try {
    predict(one, std::vector<double>{1, 2});
    FAIL();
  } catch (const RegressionError& e) {
    EXPECT_EQ(e.code(), RegressionErrc::DimensionMismatch);
  }
}

TEST(Predict, MonotoneInPositiveCoefficients) {
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    NBModel m;
    const int k = 1 + static_cast<int>(rng.uniform_index(5));
    m.intercept = rng.normal();
    m.coefficients = Eigen::VectorXd(k);
    m.feature_means = Eigen::VectorXd(k);
    m.feature_stds = Eigen::VectorXd(k);
    std::vector<double> x(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
      m.coefficients(j) = rng.normal();
      m.feature_means(j) = rng.normal() * 3;
      m.feature_stds(j) = 0.1 + rng.uniform01() * 3;
      x[static_cast<std::size_t>(j)] = rng.normal() * 5;
    }
    const double base = predict(m, x);
    ASSERT_TRUE(std::isfinite(base) && base > 0);
    for (int j = 0; j < k; ++j) {
      std::vector<double> up = x;
      up[static_cast<std::size_t>(j)] += 0.5;
      if (m.coefficients(j) > 0) {
        ASSERT_GT(predict(m, up), base);
      } else if (m.coefficients(j) < 0) {
        ASSERT_LT(predict(m, up), base);
      }
    }
  }
}

TEST(Mae, Examples) {
  EXPECT_EQ(mae(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 5}), 1.0);
  EXPECT_EQ(mae(std::vector<double>{4, 4}, std::vector<double>{4, 4}), 0.0);
  try {
    mae(std::vector<double>{1}, std::vector<double>{1, 2});
    FAIL();
  } catch (const RegressionError& e) {
    EXPECT_EQ(e.code(), RegressionErrc::LengthMismatch);
  }
  try {
    mae(std::vector<double>{}, std::vector<double>{});
    FAIL();
  } catch (const RegressionError& e) {
    EXPECT_EQ(e.code(), RegressionErrc::Empty);
  }
}

TEST(Mae, SymmetricNonNegativeAndZeroOnlyOnEquality) {
  Rng rng(13);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto n = 1 + rng.uniform_index(10);
    std::vector<double> p, t;
    for (std::uint64_t i = 0; i < n; ++i) {
      p.push_back(static_cast<double>(rng.uniform_index(5)));
      t.push_back(static_cast<double>(rng.uniform_index(5)));
    }
    const double a = mae(p, t);
    ASSERT_EQ(a, mae(t, p));
    ASSERT_GE(a, 0.0);
    ASSERT_EQ(a == 0.0, p == t);
  }
}

TEST(Baseline, ConstantMean) {
  const NBModel two = constant_baseline(std::vector<std::int64_t>{0, 4}, 2);
  EXPECT_DOUBLE_EQ(predict(two, std::vector<double>{1, 9}), 2.0);
  const NBModel five = constant_baseline(std::vector<std::int64_t>{5});
  EXPECT_DOUBLE_EQ(predict(five, std::vector<double>{}), 5.0);
  EXPECT_THROW(constant_baseline(std::vector<std::int64_t>{}), RegressionError);
}

TEST(GridSearch, SingleCandidate) {
  const Synthetic s = nb_data(400, {0.3}, 0.5, 0.3, 14);
  const double grid[] = {0.01};
  const GridSearchResult g = grid_search(s.x, s.y, s.x, s.y, grid);
  EXPECT_EQ(g.best_lambda, 0.01);
  EXPECT_EQ(g.candidates.size(), 1u);
}

TEST(GridSearch, TiesGoToTheSmallestLambda) {
  DesignMatrix x;
  x.values.resize(6, 0);
  const std::vector<std::int64_t> y = {1, 2, 3, 1, 2, 3};
  const double grid[] = {0.1, 0.001, 0.01};
  const GridSearchResult g = grid_search(x, y, x, y, grid);
  EXPECT_EQ(g.best_lambda, 0.001);
  EXPECT_EQ(g.candidates.front().lambda, 0.001);
}

TEST(GridSearch, NoiseColumnsNeverBeatTheUnpenalizedFitOnValidation) {
  const Synthetic train = nb_data(300, {0.4, -0.2}, 0.6, 0.5, 15, 5);
  const Synthetic val = nb_data(300, {0.4, -0.2}, 0.6, 0.5, 16, 5);
  const auto grid = default_lambda_grid();
  const GridSearchResult g = grid_search(train.x, train.y, val.x, val.y, grid, 2);
  double unpenalized = 0;
  for (const auto& c : g.candidates)
    if (c.lambda == 0.0) unpenalized = c.validation_mae;
  EXPECT_LE(g.validation_mae, unpenalized);
}

TEST(GridSearch, AllCandidatesFailed) {
  DesignMatrix x;
  x.values = Eigen::MatrixXd::Random(2, 3);
  const std::vector<std::int64_t> y = {1, 2};
  const double grid[] = {0.0, 0.1};
  try {
    grid_search(x, y, x, y, grid);
    FAIL();
  } catch (const RegressionError& e) {
    EXPECT_EQ(e.code(), RegressionErrc::AllCandidatesFailed);
  }
}

TEST(Model, JsonRoundTrip) {
  const Synthetic s = nb_data(300, {0.3, 0.2}, 0.5, 0.3, 17);
  const NBModel m = fit(s.x, s.y, 0.01).model;
  const NBModel back = model_from_json(model_to_json(m));
  EXPECT_EQ(back.column_keys, m.column_keys);
  EXPECT_EQ(back.intercept, m.intercept);
  EXPECT_EQ(back.coefficients, m.coefficients);
  EXPECT_EQ(back.dispersion_alpha, m.dispersion_alpha);
  EXPECT_EQ(back.ridge_lambda, m.ridge_lambda);
  const std::vector<double> x = {0.4, -1.0};
  EXPECT_EQ(predict(back, x), predict(m, x));
}
