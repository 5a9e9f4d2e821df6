#include "evtrap/lsq.hpp"

#include <cmath>
#include <limits>

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

namespace evtrap {

namespace {

struct Functor {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const ResidualFn* fn;
  int m;
  int n;
  mutable int evals = 0;

  int inputs() const { return n; }
  int values() const { return m; }

  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    r.resize(m);
    (*fn)(p, r);
    ++evals;
    for (int i = 0; i < m; ++i)
      if (!std::isfinite(r[i])) r[i] = 1e150;
    return 0;
  }
};

}  // namespace

double LsqResult::rms() const {
  if (residuals.size() == 0) return 0.0;
  return std::sqrt(residuals.squaredNorm() / static_cast<double>(residuals.size()));
}

std::vector<double> LsqResult::sigma() const {
  std::vector<double> s(static_cast<std::size_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i) s[i] = std::sqrt(std::max(0.0, covariance(i, i)));
  return s;
}

Eigen::MatrixXd central_jacobian(const ResidualFn& f, int m, const Eigen::VectorXd& p) {
  const Eigen::Index n = p.size();
  Eigen::MatrixXd jac(m, n);
  Eigen::VectorXd rp(m), rm(m);
  const double eps = std::cbrt(std::numeric_limits<double>::epsilon());
  for (Eigen::Index j = 0; j < n; ++j) {
    double h = eps * std::max(1.0, std::abs(p[j]));
    Eigen::VectorXd q = p;
    q[j] = p[j] + h;
    f(q, rp);
    q[j] = p[j] - h;
    f(q, rm);
    jac.col(j) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

LsqResult least_squares(const ResidualFn& f, int m, const Eigen::VectorXd& p0,
                        const LsqOptions& opts) {
  const int n = static_cast<int>(p0.size());
  Functor fun{&f, m, n};
  Eigen::NumericalDiff<Functor, Eigen::Central> numdiff(fun);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<Functor, Eigen::Central>> lm(numdiff);
  lm.parameters.xtol = opts.xtol;
  lm.parameters.ftol = opts.ftol;
  lm.parameters.maxfev = opts.max_evals;

  Eigen::VectorXd p = p0;
  int status = lm.minimize(p);

  LsqResult out;
  out.params = p;
  out.status = status;
  out.evaluations = fun.evals;
  out.residuals.resize(m);
  f(p, out.residuals);
  out.chi2 = out.residuals.squaredNorm();
  out.jacobian = central_jacobian(f, m, p);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(out.jacobian);
  qr.setThreshold(1e-10);
  out.rank = static_cast<int>(qr.rank());

  Eigen::MatrixXd jtj = out.jacobian.transpose() * out.jacobian;
  out.covariance = jtj.completeOrthogonalDecomposition().pseudoInverse();
  if (opts.scale_covariance && m > n) out.covariance *= out.chi2 / static_cast<double>(m - n);
  return out;
}

}  // namespace evtrap
