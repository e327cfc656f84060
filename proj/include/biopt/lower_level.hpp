#pragma once

#include "biopt/acceptance.hpp"

#include <vector>

namespace biopt {

struct RelSmoothParams {
  double xi = 2.0;
  double H = 0.0;
  double mu = 0.5;
  double L = 1.5;
  double kappa = 1.0 / 3.0;
};

/// ξ = 2 and H = 6 M_{p+1} / (p-1)!, so that ξ(1 + ξ) = (p-1)! H / M_{p+1}.
RelSmoothParams rel_smooth_params(int p, double M_next);

/// ρ_{y,H}(x) = Σ_{k=1}^{q} D^{2k}f(y)[x-y]^{2k}/(2k)! + H d_{p+1}(x-y), q = ⌊p/2⌋.
class ScalingFunction {
 public:
  ScalingFunction(const ProblemInstance& inst, Point y, double H, int p);

  const ProblemInstance& instance() const { return *inst_; }
  const Point& center() const { return y_; }
  double H() const { return H_; }
  int p() const { return p_; }
  int q() const { return p_ / 2; }

  ValueGrad value_grad(const Point& x) const;
  Matrix hessian(const Point& x) const;
  double bregman(const Point& x, const Point& z) const;

  /// Stationary point of ⟨c,h⟩ + 2L ρ(y+h) when q = 1 and ψ plays no role.
  Point radial_solve(double L, const Dual& c_shift) const;

 private:
  const ProblemInstance* inst_;
  Point y_;
  double H_;
  int p_;
  // Spectral data of C⁻¹ ∇²f(y) C⁻ᵀ with B = C Cᵀ, used by radial_solve.
  Matrix C_;
  Matrix V_;
  Vector lambda_;
};

/// Minimizer h of ⟨c,h⟩ + 2L Σ D^{2k}f(y)[h]^{2k}/(2k)! + ψ(y+h) + 2LH d_{p+1}(h).
Point subproblem_solve(const ScalingFunction& sf, double L, const Dual& c_shift, const SimpleOracle& psi,
                       double tol = 1e-13, int max_iter = 500, const Point* warm_h = nullptr);

struct LowerCaps {
  int outer = 200;
  int inner = 500;
};

struct AcceptResult {
  AcceptedPoint point;
  int iters = 0;
  std::vector<double> phi_history;  // φ(z_0), φ(z_1), ... with φ = f^p_{y,H} + ψ
};

/// Non-Euclidean composite gradient loop started at z_0 = y; stops at the
/// first iterate that lies in the acceptance set.
AcceptResult solve_acceptable(const ProblemInstance& inst, const Point& y, double H, int p, double beta,
                              const RelSmoothParams& params, const LowerCaps& caps = {});

}  // namespace biopt
