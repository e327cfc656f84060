#include "biopt/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace biopt {

const Tolerances& default_tolerances() {
  static const Tolerances tol{};
  return tol;
}

Metric::Metric(int dim) : dim_(dim), identity_(true), B_(Matrix::Identity(dim, dim)) {
  if (dim <= 0) throw Error("metric dimension must be positive");
  llt_.compute(B_);
}

Metric::Metric(const Matrix& B) : dim_(static_cast<int>(B.rows())), identity_(false), B_(B) {
  if (B.rows() != B.cols() || B.rows() == 0) throw Error("metric must be a non-empty square matrix");
  if (!B.allFinite()) throw Error("metric has non-finite entries");
  const double scale = B.cwiseAbs().maxCoeff();
  if ((B - B.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw Error("metric is not symmetric");
  llt_.compute(B_);
  if (llt_.info() != Eigen::Success) throw Error("metric is not positive definite");
  identity_ = B_.isIdentity(0.0);
}

Vector Metric::apply(const Vector& x) const { return identity_ ? x : Vector(B_ * x); }

Vector Metric::solve(const Vector& g) const { return identity_ ? g : Vector(llt_.solve(g)); }

double Metric::norm(const Vector& x) const {
  if (identity_) return x.norm();
  return std::sqrt(std::max(0.0, x.dot(B_ * x)));
}

double Metric::dual_norm(const Vector& g) const {
  if (identity_) return g.norm();
  return std::sqrt(std::max(0.0, g.dot(llt_.solve(g))));
}

Matrix Metric::factor() const {
  if (identity_) return Matrix::Identity(dim_, dim_);
  return llt_.matrixL();
}

void require_finite(const Vector& x, const char* what) {
  if (!x.allFinite()) throw Error(what);
}

ValueGrad prox_power(const Metric& metric, const Point& x, int p) {
  if (p < 1) throw Error("prox power requires p >= 1");
  require_finite(x);
  const double r = metric.norm(x);
  ValueGrad out;
  out.value = std::pow(r, p + 1) / (p + 1);
  out.gradient = (p == 1 ? 1.0 : std::pow(r, p - 1)) * metric.apply(x);
  return out;
}

Matrix prox_power_hessian(const Metric& metric, const Point& x, int p) {
  if (p < 1) throw Error("prox power requires p >= 1");
  const double r = metric.norm(x);
  const int n = metric.dim();
  if (p == 1) return metric.matrix();
  if (r == 0.0) return Matrix::Zero(n, n);
  const Vector bx = metric.apply(x);
  Matrix hess = std::pow(r, p - 1) * metric.matrix();
  hess.noalias() += (p - 1) * std::pow(r, p - 3) * bx * bx.transpose();
  return hess;
}

double solve_step_coefficient(double A, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw Error("degenerate coefficient");
  if (A < 0.0) throw Error("accumulated weight must be nonnegative");
  // Written as c(1 + sqrt(1 + 4A/c))/2 to avoid cancellation for tiny c.
  return 0.5 * c * (1.0 + std::sqrt(1.0 + 4.0 * A / c));
}

double power_mean_norm(double alpha, double n1, double n2, int p) {
  const double e = static_cast<double>(p + 1) / p;
  const double t1 = n1 > 0.0 ? std::pow(n1, e) : 0.0;
  const double t2 = n2 > 0.0 ? std::pow(n2, e) : 0.0;
  const double mean = alpha * t1 + (1.0 - alpha) * t2;
  if (mean <= 0.0) return 0.0;
  const double out = std::pow(mean, 1.0 / e);
  // Keep the result inside [min, max] despite rounding in pow.
  return std::clamp(out, std::min(n1, n2), std::max(n1, n2));
}

double uniform_convexity_gap(const Metric& metric, const Point& x, const Point& y, int p) {
  const ValueGrad at_x = prox_power(metric, x, p);
  const double dy = prox_power(metric, y, p).value;
  const Vector diff = y - x;
  const double modulus = std::pow(2.0, 1 - p) / (p + 1);
  return dy - at_x.value - at_x.gradient.dot(diff) - modulus * std::pow(metric.norm(diff), p + 1);
}

double factorial(int n) {
  double out = 1.0;
  for (int i = 2; i <= n; ++i) out *= i;
  return out;
}

}  // namespace biopt
