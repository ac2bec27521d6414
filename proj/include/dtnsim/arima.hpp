#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace dtnsim {

struct ArimaOrder {
  int p = 1;
  int d = 1;
  int q = 0;

  int min_length() const { return p + d + q + 1; }
  friend bool operator==(const ArimaOrder&, const ArimaOrder&) = default;
};

/// ARIMA(p,d,q) fitted by conditional least squares on the d-times differenced
/// series, with an intercept. MA terms use the Hannan-Rissanen two-stage
/// regression (long AR residuals as regressors), shrunk to be invertible.
/// Rank-deficient designs, e.g. a constant differenced series, resolve to the minimum-norm solution.
class ArimaModel {
 public:
  ArimaModel() = default;

  void fit(std::span<const double> series, ArimaOrder order) {
    if (order.p < 0 || order.d < 0 || order.q < 0) throw std::invalid_argument("ARIMA orders must be non-negative");
    if (series.size() < static_cast<std::size_t>(order.min_length()))
      throw std::invalid_argument("series too short for ARIMA order");
    for (double v : series)
      if (!std::isfinite(v)) throw std::invalid_argument("series contains non-finite values");
    order_ = order;

    levels_.clear();
    std::vector<double> w(series.begin(), series.end());
    for (int k = 0; k < order.d; ++k) {
      levels_.push_back(w.back());
      std::vector<double> next(w.size() - 1);
      for (std::size_t i = 1; i < w.size(); ++i) next[i - 1] = w[i] - w[i - 1];
      w = std::move(next);
    }
    w_ = w;

    residual_.assign(w.size(), 0.0);
    if (order.q > 0) residual_ = long_ar_residuals(w, order);

    const int p = order.p, q = order.q;
    const std::size_t start = static_cast<std::size_t>(std::max(p, q));
    const std::size_t rows = w.size() > start ? w.size() - start : 0;
    if (rows == 0) throw std::invalid_argument("series too short for ARIMA order");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows), 1 + p + q);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t t = start + r;
      const auto row = static_cast<Eigen::Index>(r);
      y(row) = w[t];
      X(row, 0) = 1.0;
      for (int i = 1; i <= p; ++i) X(row, i) = w[t - static_cast<std::size_t>(i)];
      for (int j = 1; j <= q; ++j) X(row, p + j) = residual_[t - static_cast<std::size_t>(j)];
    }
    Eigen::VectorXd beta = X.completeOrthogonalDecomposition().solve(y);
    intercept_ = beta(0);
    ar_.assign(static_cast<std::size_t>(p), 0.0);
    ma_.assign(static_cast<std::size_t>(q), 0.0);
    for (int i = 0; i < p; ++i) ar_[static_cast<std::size_t>(i)] = beta(1 + i);
    for (int j = 0; j < q; ++j) ma_[static_cast<std::size_t>(j)] = beta(1 + p + j);
    // Keep the residual recursion stable: shrink into the invertible region.
    double ma_norm = 0;
    for (double c : ma_) ma_norm += std::abs(c);
    if (ma_norm >= 0.99)
      for (double& c : ma_) c *= 0.99 / ma_norm;

    // Conditional residuals of the final model, used by the MA part of the forecast.
    if (q > 0) {
      std::vector<double> e(w.size(), 0.0);
      for (std::size_t t = start; t < w.size(); ++t) e[t] = w[t] - one_step(w, e, t);
      residual_ = std::move(e);
    }
    fitted_ = true;
  }

  /// One-step-ahead forecast on the original (undifferenced) scale.
  double forecast() const {
    if (!fitted_) throw std::logic_error("ARIMA model not fitted");
    double next = one_step(w_, residual_, w_.size());
    for (auto it = levels_.rbegin(); it != levels_.rend(); ++it) next += *it;
    return next;
  }

  const std::vector<double>& ar_coefficients() const noexcept { return ar_; }
  const std::vector<double>& ma_coefficients() const noexcept { return ma_; }
  double intercept() const noexcept { return intercept_; }
  ArimaOrder order() const noexcept { return order_; }

 private:
  double one_step(const std::vector<double>& w, const std::vector<double>& e, std::size_t t) const {
    double v = intercept_;
    for (std::size_t i = 1; i <= ar_.size(); ++i)
      if (t >= i) v += ar_[i - 1] * w[t - i];
    for (std::size_t j = 1; j <= ma_.size(); ++j)
      if (t >= j) v += ma_[j - 1] * e[t - j];
    return v;
  }

  static std::vector<double> long_ar_residuals(const std::vector<double>& w, ArimaOrder order) {
    const int n = static_cast<int>(w.size());
    int m = std::max(order.p + order.q, std::min(10, n / 4));
    m = std::min(m, std::max(0, n - 2));
    std::vector<double> e(w.size(), 0.0);
    if (m == 0) {
      double mean = 0;
      for (double v : w) mean += v;
      mean /= n;
      for (int t = 0; t < n; ++t) e[static_cast<std::size_t>(t)] = w[static_cast<std::size_t>(t)] - mean;
      return e;
    }
    const int rows = n - m;
    Eigen::MatrixXd X(rows, m + 1);
    Eigen::VectorXd y(rows);
    for (int r = 0; r < rows; ++r) {
      const int t = m + r;
      y(r) = w[static_cast<std::size_t>(t)];
      X(r, 0) = 1.0;
      for (int i = 1; i <= m; ++i) X(r, i) = w[static_cast<std::size_t>(t - i)];
    }
    Eigen::VectorXd beta = X.completeOrthogonalDecomposition().solve(y);
    for (int r = 0; r < rows; ++r) e[static_cast<std::size_t>(m + r)] = y(r) - X.row(r).dot(beta);
    return e;
  }

  ArimaOrder order_;
  std::vector<double> levels_;  // last value at each differencing level
  std::vector<double> w_;
  std::vector<double> residual_;
  std::vector<double> ar_, ma_;
  double intercept_ = 0;
  bool fitted_ = false;
};

inline double arima_fit_forecast(std::span<const double> series, ArimaOrder order) {
  ArimaModel m;
  m.fit(series, order);
  return m.forecast();
}

}  // namespace dtnsim
