#pragma once

#include "biopt/problem.hpp"

#include <optional>
#include <string>
#include <vector>

namespace biopt {

/// A pair (T, g) certified to lie in the acceptance set around `anchor`,
/// together with the scalars needed to replay the acceptance lemmas.
struct AcceptedPoint {
  Point T;
  Dual g;
  Point anchor;
  double H = 0.0;
  int p = 1;
  double beta_used = 0.0;
  double r = 0.0;             // ‖T - anchor‖
  double grad_F_norm = 0.0;   // ‖∇f(T) + g‖_*
  double reg_grad_norm = 0.0; // ‖∇f^p_{anchor,H}(T) + g‖_*
  double inner = 0.0;         // ⟨∇f(T) + g, anchor - T⟩
  double f_value = 0.0;
  Dual grad_f;

  /// ∇f(T) + g.
  Dual composite_gradient() const { return grad_f + g; }
};

/// f^p_{anchor,H}(x) = f(x) + H d_{p+1}(x - anchor) and its gradient.
ValueGrad reg_value_grad(const ProblemInstance& inst, const Point& anchor, double H, int p, const Point& x);

/// Slack used by every acceptance comparison.
double acceptance_slack(double rhs);

bool is_acceptable(const ProblemInstance& inst, const Point& anchor, double H, int p, double beta, const Point& T,
                   const Dual& g);

/// Builds an AcceptedPoint; throws if g is not a subgradient of ψ at T, if
/// the acceptance inequality fails, or if a consequence of it fails.
AcceptedPoint make_accepted_point(const ProblemInstance& inst, const Point& anchor, double H, int p, double beta,
                                  const Point& T, const Dual& g);

struct LemmaCheck {
  std::string name;
  bool applicable = true;
  bool pass = true;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct LemmaReport {
  std::vector<LemmaCheck> checks;
  bool all_pass() const;
};

/// Scalar replay of the acceptance lemmas: the two-sided radius bound, the
/// inner-product bounds, and (with x* and β ≤ 3/8) the distance bound.
LemmaReport check_lemma_scalars(double H, int p, double beta, double r, double grad_F_norm, double inner,
                                std::optional<std::pair<double, double>> dist_T_anchor_to_xstar = std::nullopt);

LemmaReport check_lemma_properties(const ProblemInstance& inst, const AcceptedPoint& accepted, double H, int p,
                                   const std::optional<Point>& x_star = std::nullopt);

}  // namespace biopt
