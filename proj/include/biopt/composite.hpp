#pragma once

#include "biopt/problem.hpp"

#include <functional>

namespace biopt {

/// Smooth part of a composite objective given through callbacks. value may
/// return +inf to reject a trial point.
struct SmoothModel {
  std::function<double(const Point&)> value;
  std::function<Dual(const Point&)> gradient;
  std::function<Matrix(const Point&)> hessian;
};

struct CompositeOptions {
  double tol = 1e-13;
  int max_iter = 200;
  int max_sweeps = 2000;
};

struct CompositeResult {
  Point x;
  Dual g;  // element of ∂ψ(x) closest to -∇s(x)
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Damped proximal Newton for min s(x) + ψ(x) with separable ψ. The Newton
/// model is minimized exactly (linear solve) when ψ = 0 and by coordinate
/// descent otherwise.
CompositeResult minimize_composite(const SmoothModel& model, const SimpleOracle& psi, const Point& start,
                                   const CompositeOptions& opts = {});

/// Exact solution of min f(x) + ψ(x) + H d_{p+1}(x - anchor).
CompositeResult prox_exact(const ProblemInstance& inst, const Point& anchor, double H, int p,
                           const CompositeOptions& opts = {}, const Point* warm_start = nullptr);

}  // namespace biopt
