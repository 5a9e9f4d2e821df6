#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace evtrap {

using ResidualFn = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r)>;

struct LsqOptions {
  double xtol = 1e-12;
  double ftol = 1e-14;
  int max_evals = 4000;
  // Scale the covariance by the reduced chi-square (unknown noise level).
  bool scale_covariance = true;
};

struct LsqResult {
  Eigen::VectorXd params;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  int rank = 0;
  int evaluations = 0;
  int status = 0;

  double rms() const;
  std::vector<double> sigma() const;
};

// Levenberg-Marquardt with central-difference Jacobian. The covariance is
// (J^T J)^-1, optionally scaled by chi2/(m-n). Rank is from a pivoted QR of J.
LsqResult least_squares(const ResidualFn& f, int n_residuals, const Eigen::VectorXd& p0,
                        const LsqOptions& opts = {});

Eigen::MatrixXd central_jacobian(const ResidualFn& f, int n_residuals, const Eigen::VectorXd& p);

}  // namespace evtrap
