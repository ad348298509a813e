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

#include "apres/nb_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <fmt/format.h>

#include "apres/parallel.hpp"

namespace apres {

namespace {

constexpr double kMaxLinearPredictor = 700.0;

double safe_exp(double eta) {
  return std::exp(std::clamp(eta, -kMaxLinearPredictor, kMaxLinearPredictor));
}

struct Standardized {
  Eigen::MatrixXd design;  // [1, z_kept]
  Eigen::VectorXd means;
  Eigen::VectorXd stds;
  std::vector<Eigen::Index> kept;
  std::vector<std::string> dropped;
};

Standardized standardize(const DesignMatrix& x) {
  const Eigen::Index n = x.values.rows();
  const Eigen::Index k = x.values.cols();
  Standardized s;
  s.means = Eigen::VectorXd::Zero(k);
  s.stds = Eigen::VectorXd::Ones(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double mean = x.values.col(j).mean();
    const double var = (x.values.col(j).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    s.means(j) = mean;
    if (sd > 1e-10 * (1.0 + std::abs(mean))) {
      s.stds(j) = sd;
      s.kept.push_back(j);
    } else {
      s.dropped.push_back(j < static_cast<Eigen::Index>(x.column_keys.size())
                              ? x.column_keys[static_cast<std::size_t>(j)]
                              : fmt::format("column_{}", j));
    }
  }
  s.design.resize(n, static_cast<Eigen::Index>(s.kept.size()) + 1);
  s.design.col(0).setOnes();
  for (std::size_t c = 0; c < s.kept.size(); ++c) {
    const auto j = s.kept[c];
    s.design.col(static_cast<Eigen::Index>(c) + 1) = (x.values.col(j).array() - s.means(j)) / s.stds(j);
  }
  return s;
}

// NB2 log-likelihood pieces that depend on alpha, with the sum over
// log(1 + alpha j), j < y_i, regrouped by j so its cost is O(max y).
class NbLikelihood {
 public:
  explicit NbLikelihood(std::span<const std::int64_t> y) : y_(y.size()) {
    std::int64_t max_y = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      y_(static_cast<Eigen::Index>(i)) = static_cast<double>(y[i]);
      max_y = std::max(max_y, y[i]);
      log_factorial_ += std::lgamma(static_cast<double>(y[i]) + 1.0);
    }
    // tail_[j] = #{i : y_i > j}
    tail_.assign(static_cast<std::size_t>(max_y), 0.0);
    std::vector<double> hist(static_cast<std::size_t>(max_y) + 1, 0.0);
    for (auto v : y) hist[static_cast<std::size_t>(v)] += 1.0;
    double above = static_cast<double>(y.size());
    for (std::size_t j = 0; j < tail_.size(); ++j) {
      above -= hist[j];
      tail_[j] = above;
    }
  }

  const Eigen::VectorXd& y() const { return y_; }

  double loglik(const Eigen::VectorXd& mu, double alpha) const {
    double s = -log_factorial_;
    for (std::size_t j = 1; j < tail_.size(); ++j) s += tail_[j] * std::log1p(alpha * static_cast<double>(j));
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      const double am = alpha * mu(i);
      s += y_(i) * std::log(mu(i)) - y_(i) * std::log1p(am) - std::log1p(am) / alpha;
    }
    return s;
  }

  double dalpha(const Eigen::VectorXd& mu, double alpha) const {
    double s = 0.0;
    for (std::size_t j = 1; j < tail_.size(); ++j) {
      const double jd = static_cast<double>(j);
      s += tail_[j] * jd / (1.0 + alpha * jd);
    }
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
      const double am = alpha * mu(i);
      s += std::log1p(am) / (alpha * alpha) - (y_(i) + 1.0 / alpha) * mu(i) / (1.0 + am);
    }
    return s;
  }

 private:
  Eigen::VectorXd y_;
  std::vector<double> tail_;
  double log_factorial_ = 0.0;
};

class Fitter {
 public:
  Fitter(const Eigen::MatrixXd& design, const NbLikelihood& lik, double lambda)
      : a_(design), lik_(lik), penalty_(static_cast<double>(design.rows()) * lambda) {}

  Eigen::VectorXd mean(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd eta = a_ * theta;
    return eta.unaryExpr([](double v) { return safe_exp(v); });
  }

  double penalty_term(const Eigen::VectorXd& theta) const {
    return 0.5 * penalty_ * theta.tail(theta.size() - 1).squaredNorm();
  }

  double penalized(const Eigen::VectorXd& theta, double alpha) const {
    return lik_.loglik(mean(theta), alpha) - penalty_term(theta);
  }

  // Newton-Raphson in the coefficients at fixed alpha. The observed-information
  // weights mu (1 + alpha y) / (1 + alpha mu)^2 are positive, so the
  // objective is concave in theta and every solve is well posed.
  void newton(Eigen::VectorXd& theta, double alpha) const {
    const auto p = theta.size();
    const Eigen::VectorXd& y = lik_.y();
    for (int inner = 0; inner < 100; ++inner) {
      const Eigen::VectorXd mu = mean(theta);
      const Eigen::ArrayXd denom = 1.0 + alpha * mu.array();
      const Eigen::VectorXd resid = ((y.array() - mu.array()) / denom).matrix();
      Eigen::VectorXd grad = a_.transpose() * resid;
      grad.tail(p - 1) -= penalty_ * theta.tail(p - 1);
      const Eigen::VectorXd w = (mu.array() * (1.0 + alpha * y.array()) / denom.square()).matrix();
      Eigen::MatrixXd hess = a_.transpose() * w.asDiagonal() * a_;
      hess.diagonal().tail(p - 1).array() += penalty_;
      const Eigen::VectorXd step = hess.ldlt().solve(grad);
      if (!step.allFinite()) return;

      const double f0 = penalized(theta, alpha);
      double t = 1.0;
      Eigen::VectorXd candidate = theta + step;
      while (penalized(candidate, alpha) < f0 - 1e-12 * std::abs(f0) && t > 1e-10) {
        t *= 0.5;
        candidate = theta + t * step;
      }
      theta = candidate;
      if ((t * step).cwiseAbs().maxCoeff() < 1e-12) return;
    }
  }

  // Golden-section search over log(alpha) for the likelihood at fixed mean.
  double best_alpha(const Eigen::VectorXd& mu, double lo, double hi) const {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = std::log(lo), b = std::log(hi);
    double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
    double fc = lik_.loglik(mu, std::exp(c)), fd = lik_.loglik(mu, std::exp(d));
    while (b - a > 1e-10) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - kInvPhi * (b - a);
        fc = lik_.loglik(mu, std::exp(c));
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + kInvPhi * (b - a);
        fd = lik_.loglik(mu, std::exp(d));
      }
    }
    // The interior probe never reaches the bracket ends; compare them directly.
    double best = std::exp(0.5 * (a + b));
    double fbest = lik_.loglik(mu, best);
    for (double edge : {lo, hi}) {
      const double f = lik_.loglik(mu, edge);
      if (f > fbest) {
        fbest = f;
        best = edge;
      }
    }
    return best;
  }

 private:
  const Eigen::MatrixXd& a_;
  const NbLikelihood& lik_;
  double penalty_;
};

}  // namespace

std::vector<double> to_doubles(std::span<const std::int64_t> counts) {
  return {counts.begin(), counts.end()};
}

FitResult fit(const DesignMatrix& x, std::span<const std::int64_t> y, double lambda, const FitOptions& options) {
  const auto n = x.values.rows();
  if (static_cast<std::size_t>(n) != y.size()) {
    throw RegressionError(RegressionErrc::LengthMismatch,
                          fmt::format("design has {} rows but {} counts were given", n, y.size()));
  }
  if (!x.values.allFinite()) throw RegressionError(RegressionErrc::InvalidInput, "design matrix has non-finite entries");
  if (std::any_of(y.begin(), y.end(), [](std::int64_t v) { return v < 0; })) {
    throw RegressionError(RegressionErrc::InvalidInput, "counts must be non-negative");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw RegressionError(RegressionErrc::InvalidInput, "ridge lambda must be finite and >= 0");
  }

  Standardized s = standardize(x);
  const auto p = s.design.cols();
  if (n < p) {
    throw RegressionError(RegressionErrc::DegenerateDesign,
                          fmt::format("{} rows cannot identify {} parameters", n, p));
  }
  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(s.design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
      throw RegressionError(RegressionErrc::DegenerateDesign,
                            fmt::format("design has rank {} after dropping constant columns, needs {}", qr.rank(), p));
    }
  }

  NbLikelihood lik(y);
  Fitter fitter(s.design, lik, lambda);

  const double ybar = lik.y().mean();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  theta(0) = std::log(std::max(ybar, 1e-8));
  const double yvar = (lik.y().array() - ybar).square().mean();
  double alpha = ybar > 0.0 ? (yvar - ybar) / (ybar * ybar) : options.alpha_min;
  alpha = std::clamp(alpha, options.alpha_min, options.alpha_max);

  FitReport report;
  report.dropped_columns = s.dropped;
  double previous = -std::numeric_limits<double>::infinity();
  for (int it = 1; it <= options.max_iterations; ++it) {
    report.iterations = it;
    fitter.newton(theta, alpha);
    alpha = fitter.best_alpha(fitter.mean(theta), options.alpha_min, options.alpha_max);
    const double current = fitter.penalized(theta, alpha);
    if (std::abs(current - previous) <= options.tolerance * std::abs(current)) {
      report.converged = true;
      break;
    }
    previous = current;
  }
  fitter.newton(theta, alpha);

  NBModel model;
  model.column_keys = x.column_keys;
  model.intercept = theta(0);
  model.coefficients = Eigen::VectorXd::Zero(x.values.cols());
  for (std::size_t c = 0; c < s.kept.size(); ++c) model.coefficients(s.kept[c]) = theta(static_cast<Eigen::Index>(c) + 1);
  model.feature_means = s.means;
  model.feature_stds = s.stds;
  model.ridge_lambda = lambda;
  model.dispersion_alpha = alpha < options.poisson_limit ? 0.0 : alpha;

  report.alpha_estimate = alpha;
  report.log_likelihood = lik.loglik(fitter.mean(theta), alpha);
  return FitResult{std::move(model), std::move(report)};
}

double predict(const NBModel& model, std::span<const double> features) {
  if (features.size() != model.dimension()) {
    throw RegressionError(RegressionErrc::DimensionMismatch,
                          fmt::format("model expects {} features, got {}", model.dimension(), features.size()));
  }
  double eta = model.intercept;
  for (std::size_t j = 0; j < features.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    eta += model.coefficients(jj) * (features[j] - model.feature_means(jj)) / model.feature_stds(jj);
  }
  return safe_exp(eta);
}

Eigen::VectorXd predict(const NBModel& model, const Eigen::MatrixXd& rows) {
  if (static_cast<std::size_t>(rows.cols()) != model.dimension()) {
    throw RegressionError(RegressionErrc::DimensionMismatch,
                          fmt::format("model expects {} features, got {}", model.dimension(), rows.cols()));
  }
  Eigen::VectorXd out(rows.rows());
  std::vector<double> buf(static_cast<std::size_t>(rows.cols()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) buf[static_cast<std::size_t>(j)] = rows(i, j);
    out(i) = predict(model, buf);
  }
  return out;
}

double mae(std::span<const double> predictions, std::span<const double> truth) {
  if (predictions.size() != truth.size()) {
    throw RegressionError(RegressionErrc::LengthMismatch,
                          fmt::format("{} predictions vs {} truths", predictions.size(), truth.size()));
  }
  if (predictions.empty()) throw RegressionError(RegressionErrc::Empty, "mae of empty vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) s += std::abs(predictions[i] - truth[i]);
  return s / static_cast<double>(predictions.size());
}

NBModel constant_baseline(std::span<const std::int64_t> y_train, std::size_t dimension) {
  if (y_train.empty()) throw RegressionError(RegressionErrc::Empty, "constant baseline needs training counts");
  const double sum = std::accumulate(y_train.begin(), y_train.end(), 0.0,
                                     [](double acc, std::int64_t v) { return acc + static_cast<double>(v); });
  const double mean = sum / static_cast<double>(y_train.size());
  NBModel model;
  model.intercept = std::log(std::max(mean, std::numeric_limits<double>::min()));
  const auto k = static_cast<Eigen::Index>(dimension);
  model.coefficients = Eigen::VectorXd::Zero(k);
  model.feature_means = Eigen::VectorXd::Zero(k);
  model.feature_stds = Eigen::VectorXd::Ones(k);
  for (std::size_t j = 0; j < dimension; ++j) model.column_keys.push_back(fmt::format("column_{}", j));
  return model;
}

Eigen::VectorXd penalized_gradient(const NBModel& model, const DesignMatrix& x, std::span<const std::int64_t> y,
                                   double alpha) {
  const auto n = x.values.rows();
  const auto k = x.values.cols();
  Eigen::MatrixXd design(n, k + 1);
  design.col(0).setOnes();
  for (Eigen::Index j = 0; j < k; ++j) {
    design.col(j + 1) = (x.values.col(j).array() - model.feature_means(j)) / model.feature_stds(j);
  }
  Eigen::VectorXd theta(k + 1);
  theta(0) = model.intercept;
  theta.tail(k) = model.coefficients;

  NbLikelihood lik(y);
  const Eigen::VectorXd mu = (design * theta).unaryExpr([](double v) { return safe_exp(v); });
  const Eigen::VectorXd resid = ((lik.y().array() - mu.array()) / (1.0 + alpha * mu.array())).matrix();
  Eigen::VectorXd grad(k + 2);
  grad.head(k + 1) = design.transpose() * resid;
  grad.segment(1, k) -= static_cast<double>(n) * model.ridge_lambda * model.coefficients;
  grad(k + 1) = lik.dalpha(mu, alpha);
  return grad;
}

std::vector<double> default_lambda_grid() { return {0.0, 1e-4, 1e-3, 1e-2, 1e-1}; }

GridSearchResult grid_search(const DesignMatrix& x_train, std::span<const std::int64_t> y_train,
                             const DesignMatrix& x_val, std::span<const std::int64_t> y_val,
                             std::span<const double> lambdas, std::size_t workers) {
  if (lambdas.empty()) throw RegressionError(RegressionErrc::Empty, "empty lambda grid");
  std::vector<double> grid(lambdas.begin(), lambdas.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const std::vector<double> truth = to_doubles(y_val);
  std::vector<LambdaCandidate> candidates(grid.size());
  std::vector<std::optional<FitResult>> fits(grid.size());
  parallel_for(grid.size(), workers, [&](std::size_t i) {
    candidates[i].lambda = grid[i];
    try {
      FitResult r = fit(x_train, y_train, grid[i]);
      const Eigen::VectorXd pred = predict(r.model, x_val.values);
      candidates[i].validation_mae = mae(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())), truth);
      candidates[i].ok = true;
      fits[i] = std::move(r);
    } catch (const Error& e) {
      candidates[i].error = e.what();
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!candidates[i].ok) continue;
    if (!best || candidates[i].validation_mae < candidates[*best].validation_mae) best = i;
  }
  if (!best) {
    std::string why;
    for (const auto& c : candidates) why += fmt::format("\n  lambda={}: {}", c.lambda, c.error);
    throw RegressionError(RegressionErrc::AllCandidatesFailed, "every lambda candidate failed:" + why);
  }
  GridSearchResult result;
  result.best_lambda = grid[*best];
  result.validation_mae = candidates[*best].validation_mae;
  result.best = std::move(*fits[*best]);
  result.candidates = std::move(candidates);
  return result;
}

nlohmann::ordered_json model_to_json(const NBModel& model) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return nlohmann::ordered_json{{"column_keys", model.column_keys},
                                {"intercept", model.intercept},
                                {"coefficients", vec(model.coefficients)},
                                {"alpha", model.dispersion_alpha},
                                {"means", vec(model.feature_means)},
                                {"stds", vec(model.feature_stds)},
                                {"lambda", model.ridge_lambda}};
}

NBModel model_from_json(const nlohmann::ordered_json& j) {
  auto vec = [](const nlohmann::ordered_json& a) {
    const auto v = a.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  NBModel m;
  m.column_keys = j.at("column_keys").get<std::vector<std::string>>();
  m.intercept = j.at("intercept").get<double>();
  m.coefficients = vec(j.at("coefficients"));
  m.dispersion_alpha = j.at("alpha").get<double>();
  m.feature_means = vec(j.at("means"));
  m.feature_stds = vec(j.at("stds"));
  m.ridge_lambda = j.at("lambda").get<double>();
  if (m.feature_means.size() != m.coefficients.size() || m.feature_stds.size() != m.coefficients.size() ||
      m.column_keys.size() != static_cast<std::size_t>(m.coefficients.size())) {
    throw RegressionError(RegressionErrc::DimensionMismatch, "model export has inconsistent vector lengths");
  }
  return m;
}

}  // namespace apres
