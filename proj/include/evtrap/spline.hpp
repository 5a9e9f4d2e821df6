#pragma once

#include <vector>

namespace evtrap {

// Natural cubic smoothing spline (Reinsch form) minimizing
//   sum w_i (y_i - f(x_i))^2 + lambda * integral f''^2,
// with lambda chosen by generalized cross-validation unless given.
class SmoothingSpline {
public:
  SmoothingSpline(std::vector<double> x, std::vector<double> y, std::vector<double> w,
                  double lambda = -1.0);

  double operator()(double x) const;
  double lambda() const { return lambda_; }
  double gcv() const { return gcv_; }
  double effective_dof() const { return dof_; }
  const std::vector<double>& fitted() const { return g_; }
  const std::vector<double>& knots() const { return x_; }

  // Sets up the spline for one lambda and returns its GCV score.
  static double gcv_score(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& w, double lambda);

private:
  void fit(double lambda);

  std::vector<double> x_, y_, w_;
  std::vector<double> g_, gamma_;
  double lambda_ = 0.0;
  double gcv_ = 0.0;
  double dof_ = 0.0;
};

}  // namespace evtrap
