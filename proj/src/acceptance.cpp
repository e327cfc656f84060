#include "biopt/acceptance.hpp"

#include <cmath>
#include <sstream>

namespace biopt {

ValueGrad reg_value_grad(const ProblemInstance& inst, const Point& anchor, double H, int p, const Point& x) {
  const ValueGrad reg = prox_power(inst.metric, x - anchor, p);
  ValueGrad out;
  out.value = inst.smooth->value(x) + H * reg.value;
  out.gradient = inst.smooth->gradient(x) + H * reg.gradient;
  return out;
}

double acceptance_slack(double rhs) {
  const Tolerances& tol = default_tolerances();
  return tol.accept_abs + tol.accept_rel * std::abs(rhs);
}

bool is_acceptable(const ProblemInstance& inst, const Point& anchor, double H, int p, double beta, const Point& T,
                   const Dual& g) {
  const Dual grad_f = inst.smooth->gradient(T);
  const Dual reg = grad_f + H * prox_power(inst.metric, T - anchor, p).gradient + g;
  const double lhs = inst.metric.dual_norm(reg);
  const double rhs = beta * inst.metric.dual_norm(grad_f + g);
  return lhs <= rhs + acceptance_slack(rhs);
}

AcceptedPoint make_accepted_point(const ProblemInstance& inst, const Point& anchor, double H, int p, double beta,
                                  const Point& T, const Dual& g) {
  const double sub_tol = 1e-9 * (1.0 + g.lpNorm<Eigen::Infinity>());
  if (inst.simple.subgradient_violation(T, g) > sub_tol) throw Error("g is not a subgradient of psi at T");
  AcceptedPoint a;
  a.T = T;
  a.g = g;
  a.anchor = anchor;
  a.H = H;
  a.p = p;
  a.beta_used = beta;
  a.f_value = inst.smooth->value(T);
  a.grad_f = inst.smooth->gradient(T);
  const Vector diff = T - anchor;
  a.r = inst.metric.norm(diff);
  const Dual G = a.grad_f + g;
  a.grad_F_norm = inst.metric.dual_norm(G);
  a.reg_grad_norm = inst.metric.dual_norm(G + H * prox_power(inst.metric, diff, p).gradient);
  a.inner = -G.dot(diff);

  const double rhs = beta * a.grad_F_norm;
  if (a.reg_grad_norm > rhs + acceptance_slack(rhs)) {
    std::ostringstream os;
    os << "acceptance inequality violated: " << a.reg_grad_norm << " > " << rhs;
    throw Error(os.str());
  }
  const LemmaReport rep = check_lemma_scalars(H, p, beta, a.r, a.grad_F_norm, a.inner);
  for (const auto& c : rep.checks) {
    if (c.applicable && !c.pass) {
      std::ostringstream os;
      os << "accepted point fails " << c.name << ": " << c.lhs << " vs " << c.rhs;
      throw Error(os.str());
    }
  }
  return a;
}

bool LemmaReport::all_pass() const {
  for (const auto& c : checks)
    if (c.applicable && !c.pass) return false;
  return true;
}

LemmaReport check_lemma_scalars(double H, int p, double beta, double r, double grad_F_norm, double inner,
                                std::optional<std::pair<double, double>> dist_T_anchor_to_xstar) {
  const double rel = default_tolerances().lemma_rel;
  // Relative slack plus the absolute slack used by the acceptance test itself,
  // scaled to each quantity.
  auto leq = [&](double lhs, double rhs, double scale) {
    return lhs <= rhs + rel * std::abs(scale) + acceptance_slack(scale);
  };
  LemmaReport rep;
  const double Hrp = H * std::pow(r, p);
  {
    LemmaCheck c{"radius_lower", true, false, (1.0 - beta) * grad_F_norm, Hrp};
    c.pass = leq(c.lhs, c.rhs, grad_F_norm + Hrp);
    rep.checks.push_back(c);
  }
  {
    LemmaCheck c{"radius_upper", true, false, Hrp, (1.0 + beta) * grad_F_norm};
    c.pass = leq(c.lhs, c.rhs, grad_F_norm + Hrp);
    rep.checks.push_back(c);
  }
  {
    LemmaCheck c{"inner_radius", true, false, H / (1.0 + beta) * std::pow(r, p + 1), inner};
    c.pass = leq(c.lhs, c.rhs, std::abs(inner) + c.lhs + r * grad_F_norm);
    rep.checks.push_back(c);
  }
  {
    LemmaCheck c{"inner_gradient", beta <= 1.0 / p, false,
                 std::pow((1.0 - beta) / H, 1.0 / p) * std::pow(grad_F_norm, (p + 1.0) / p), inner};
    c.pass = leq(c.lhs, c.rhs, std::abs(inner) + c.lhs + r * grad_F_norm);
    rep.checks.push_back(c);
  }
  if (dist_T_anchor_to_xstar) {
    const auto [dT, dA] = *dist_T_anchor_to_xstar;
    LemmaCheck c{"distance_to_optimum", beta <= 3.0 / 8.0, false, dT, 1.25 * dA};
    c.pass = leq(c.lhs, c.rhs, dT + dA);
    rep.checks.push_back(c);
  }
  return rep;
}

LemmaReport check_lemma_properties(const ProblemInstance& inst, const AcceptedPoint& a, double H, int p,
                                   const std::optional<Point>& x_star) {
  std::optional<std::pair<double, double>> dist;
  if (x_star) dist = std::make_pair(inst.metric.norm(a.T - *x_star), inst.metric.norm(a.anchor - *x_star));
  return check_lemma_scalars(H, p, a.beta_used, a.r, a.grad_F_norm, a.inner, dist);
}

}  // namespace biopt
