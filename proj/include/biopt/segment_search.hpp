#pragma once

#include "biopt/acceptance.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace biopt {

/// Which piece of the closed-form solution produced an exact 1-D segment prox.
enum class Sprox1dBranch { interior_zero, start_pos, start_neg, end_pos, end_neg };

std::string branch_name(Sprox1dBranch b);

struct Sprox1dResult {
  double x = 0.0;
  double tau = 0.0;
  double g = 0.0;
  Sprox1dBranch branch = Sprox1dBranch::interior_zero;
};

/// Exact segment prox for f = ½x², ψ = |x|: minimizes
/// ½x² + |x| + H|x - x̄ - τū|^{p+1}/(p+1) over x and τ ∈ [0,1].
Sprox1dResult exact_sprox_1d(double xbar, double ubar, int p = 3, double H = 1.0);

double sprox_objective_1d(double x, double tau, double xbar, double ubar, int p = 3, double H = 1.0);

struct SproxResult {
  Point x;
  double tau = 0.0;
  Dual g;  // subgradient of ψ at x from the x-optimality condition
  double objective = 0.0;
};

/// f(x) + ψ(x) + H d_{p+1}(x - x̄ - τū).
double sprox_objective(const ProblemInstance& inst, const Point& x, double tau, const Point& xbar, const Point& u,
                       double H, int p);

/// Brute-force segment prox: τ grid, exact inner prox, golden-section polish.
SproxResult sprox_reference(const ProblemInstance& inst, const Point& xbar, const Point& u, double H, int p,
                            int grid_tau, double inner_tol);

/// Segment prox by bisection on the derivative of the τ-value function.
SproxResult sprox_precise(const ProblemInstance& inst, const Point& xbar, const Point& u, double H, int p);

/// Returns an accepted point around the given anchor and the number of
/// lower-level iterations spent.
using AcceptanceOracle = std::function<std::pair<AcceptedPoint, int>(const Point& anchor)>;

struct SegmentCaps {
  int max_bisections = 60;
};

struct SegmentResult {
  double tau1 = 0.0, tau2 = 1.0;
  AcceptedPoint T1, T2;
  double beta1 = 0.0, beta2 = 0.0;
  double alpha = 0.0;
  double g_k = 0.0;
  int bisections = 0;
  int lower_iters = 0;
  std::vector<AcceptedPoint> generated;  // midpoint solutions, in order
};

/// α = β²/(β² - β¹), with the degenerate case β¹ = β² = 0 mapped to 1.
double segment_alpha(double beta1, double beta2);

/// Left side minus right side of the segment termination inequality.
double segment_excess(double alpha, double tau1, double tau2, double beta1, double g_k, double H, int p,
                      double beta);

/// Bisection on τ between two accepted endpoints whose directional products
/// along u have opposite signs.
SegmentResult bisect_segment(const ProblemInstance& inst, const Point& x_k, const Point& u_k,
                             const AcceptedPoint& end0, const AcceptedPoint& end1, double H, int p, double beta,
                             const AcceptanceOracle& oracle, const SegmentCaps& caps = {});

}  // namespace biopt
