#include "evtrap/spline.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "evtrap/errors.hpp"

namespace evtrap {

namespace {

struct Fit {
  Eigen::VectorXd g;
  Eigen::VectorXd gamma;
  double gcv = 0.0;
  double dof = 0.0;
};

Fit solve(const std::vector<double>& x, const std::vector<double>& y,
          const std::vector<double>& w, double lambda) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n - 2);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n - 2, n - 2);
  for (int j = 1; j + 1 < n; ++j) {
    double h0 = x[j] - x[j - 1], h1 = x[j + 1] - x[j];
    q(j - 1, j - 1) = 1.0 / h0;
    q(j, j - 1) = -1.0 / h0 - 1.0 / h1;
    q(j + 1, j - 1) = 1.0 / h1;
    r(j - 1, j - 1) = (h0 + h1) / 3.0;
    if (j + 2 < n) {
      r(j - 1, j) = h1 / 6.0;
      r(j, j - 1) = h1 / 6.0;
    }
  }
  Eigen::MatrixXd k = q * r.ldlt().solve(q.transpose());
  Eigen::VectorXd wv(n), yv(n);
  for (int i = 0; i < n; ++i) {
    wv[i] = w[i];
    yv[i] = y[i];
  }
  Eigen::MatrixXd lhs = lambda * k;
  lhs.diagonal() += wv;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
  Eigen::MatrixXd hat = ldlt.solve(Eigen::MatrixXd(wv.asDiagonal()));

  Fit f;
  f.g = hat * yv;
  f.gamma = r.ldlt().solve(q.transpose() * f.g);
  double rss = 0.0;
  for (int i = 0; i < n; ++i) rss += wv[i] * (yv[i] - f.g[i]) * (yv[i] - f.g[i]);
  f.dof = hat.trace();
  double denom = 1.0 - f.dof / n;
  f.gcv = (rss / n) / (denom * denom);
  return f;
}

}  // namespace

double SmoothingSpline::gcv_score(const std::vector<double>& x, const std::vector<double>& y,
                                  const std::vector<double>& w, double lambda) {
  return solve(x, y, w, lambda).gcv;
}

SmoothingSpline::SmoothingSpline(std::vector<double> x, std::vector<double> y,
                                 std::vector<double> w, double lambda)
    : x_(std::move(x)), y_(std::move(y)), w_(std::move(w)) {
  const std::size_t n = x_.size();
  if (n < 4 || y_.size() != n || w_.size() != n)
    throw DomainError("smoothing spline needs at least 4 matching points");
  for (std::size_t i = 1; i < n; ++i)
    if (!(x_[i] > x_[i - 1])) throw DomainError("spline abscissae must be strictly increasing");
  for (double wi : w_)
    if (!(wi > 0.0)) throw DomainError("spline weights must be positive");

  if (lambda >= 0.0) {
    fit(lambda);
    return;
  }
  // Scale the search to the data: lambda0 balances tr(W) against tr(K).
  double span = x_.back() - x_.front();
  double wmean = 0.0;
  for (double wi : w_) wmean += wi;
  wmean /= static_cast<double>(n);
  double lam0 = wmean * std::pow(span / static_cast<double>(n - 1), 3);
  auto score = [&](double lg) { return gcv_score(x_, y_, w_, lam0 * std::pow(10.0, lg)); };
  const double lo = -8.0, hi = 8.0;
  const int grid = 96;
  int best = 0;
  double best_v = 0.0;
  for (int k = 0; k <= grid; ++k) {
    double v = score(lo + (hi - lo) * k / grid);
    if (k == 0 || v < best_v) {
      best_v = v;
      best = k;
    }
  }
  double step = (hi - lo) / grid;
  double a = lo + step * std::max(0, best - 1), b = lo + step * std::min(grid, best + 1);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = score(c), fd = score(d);
  for (int it = 0; it < 40; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = score(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = score(d);
    }
  }
  double lg = 0.5 * (a + b);
  if (score(lg) > best_v) lg = lo + step * best;
  fit(lam0 * std::pow(10.0, lg));
}

void SmoothingSpline::fit(double lambda) {
  Fit f = solve(x_, y_, w_, lambda);
  lambda_ = lambda;
  gcv_ = f.gcv;
  dof_ = f.dof;
  const std::size_t n = x_.size();
  g_.assign(f.g.data(), f.g.data() + n);
  gamma_.assign(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) gamma_[i] = f.gamma[static_cast<Eigen::Index>(i - 1)];
}

double SmoothingSpline::operator()(double x) const {
  const std::size_t n = x_.size();
  if (x <= x_.front()) {
    double h = x_[1] - x_[0];
    double slope = (g_[1] - g_[0]) / h - h / 6.0 * gamma_[1];
    return g_[0] + slope * (x - x_[0]);
  }
  if (x >= x_.back()) {
    double h = x_[n - 1] - x_[n - 2];
    double slope = (g_[n - 1] - g_[n - 2]) / h + h / 6.0 * gamma_[n - 2];
    return g_[n - 1] + slope * (x - x_[n - 1]);
  }
  std::size_t i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
  double h = x_[i + 1] - x_[i];
  double a = x - x_[i], b = x_[i + 1] - x;
  return (a * g_[i + 1] + b * g_[i]) / h -
         a * b / 6.0 * ((1.0 + a / h) * gamma_[i + 1] + (1.0 + b / h) * gamma_[i]);
}

}  // namespace evtrap
