#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace biopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Primal points live in E, gradients and subgradients in E*. Both are stored
// as plain coordinate vectors; the aliases only document intent.
using Point = Vector;
using Dual = Vector;

/// Numerical slacks shared by every module.
struct Tolerances {
  double gradient_check = 1e-6;
  double root_solve = 1e-12;
  double invariant_slack = 1e-10;
  double accept_abs = 1e-12;
  double accept_rel = 1e-12;
  double lemma_rel = 1e-9;
};

const Tolerances& default_tolerances();

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an oracle is evaluated outside the domain of f.
class DomainError : public Error {
 public:
  DomainError(int index, const std::string& detail)
      : Error("domain violation at index " + std::to_string(index) + ": " + detail), index_(index) {}
  int index() const { return index_; }

 private:
  int index_;
};

/// Iterative procedure gave up; carries the residual history for diagnostics.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> history = {})
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// Euclidean structure ‖x‖ = ⟨Bx, x⟩^{1/2}, ‖g‖_* = ⟨g, B⁻¹g⟩^{1/2}.
class Metric {
 public:
  explicit Metric(int dim);
  explicit Metric(const Matrix& B);

  int dim() const { return dim_; }
  bool is_identity() const { return identity_; }
  const Matrix& matrix() const { return B_; }

  Vector apply(const Vector& x) const;
  Vector solve(const Vector& g) const;
  double norm(const Vector& x) const;
  double dual_norm(const Vector& g) const;
  /// Lower Cholesky factor C with B = C Cᵀ.
  Matrix factor() const;

 private:
  int dim_;
  bool identity_;
  Matrix B_;
  Eigen::LLT<Matrix> llt_;
};

struct ValueGrad {
  double value = 0.0;
  Vector gradient;
};

void require_finite(const Vector& x, const char* what = "non-finite point");

/// d_{p+1}(x) = ‖x‖^{p+1}/(p+1) and its gradient ‖x‖^{p-1} Bx.
ValueGrad prox_power(const Metric& metric, const Point& x, int p);

/// Hessian ‖x‖^{p-1}B + (p-1)‖x‖^{p-3} Bx (Bx)ᵀ.
Matrix prox_power_hessian(const Metric& metric, const Point& x, int p);

/// Positive root of a²/(A + a) = c.
double solve_step_coefficient(double A, double c);

/// (α n1^{(p+1)/p} + (1-α) n2^{(p+1)/p})^{p/(p+1)}.
double power_mean_norm(double alpha, double n1, double n2, int p);

/// Slack in the uniform convexity inequality of d_{p+1}; never negative.
double uniform_convexity_gap(const Metric& metric, const Point& x, const Point& y, int p);

double factorial(int n);

}  // namespace biopt
