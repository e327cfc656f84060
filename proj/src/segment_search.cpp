#include "biopt/segment_search.hpp"

#include "biopt/composite.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <sstream>

namespace biopt {
namespace {

// 1-D prox of ½x² + |x| with the regularizer H|x - y|^{p+1}/(p+1).
double prox_1d_example(double y, int p, double H) {
  if (H * std::pow(std::abs(y), p) <= 1.0) return 0.0;
  const double a = std::abs(y);
  // x + 1 = H (a - x)^p has exactly one root in (0, a).
  auto fn = [&](double x) { return x + 1.0 - H * std::pow(a - x, p); };
  boost::uintmax_t iters = 200;
  const auto br = boost::math::tools::toms748_solve(fn, 0.0, a, fn(0.0), fn(a),
                                                    boost::math::tools::eps_tolerance<double>(52), iters);
  const double x = 0.5 * (br.first + br.second);
  return y > 0 ? x : -x;
}

struct ProxAtTau {
  Point x;
  Dual g;
  double value = 0.0;
  double slope = 0.0;  // derivative of the τ-value function
};

ProxAtTau prox_at(const ProblemInstance& inst, const Point& xbar, const Point& u, double tau, double H, int p,
                  double tol, const Point* warm) {
  const Point y = xbar + tau * u;
  CompositeOptions opts;
  opts.tol = tol;
  const CompositeResult res = prox_exact(inst, y, H, p, opts, warm);
  ProxAtTau out;
  out.x = res.x;
  const ValueGrad reg = prox_power(inst.metric, res.x - y, p);
  out.value = inst.F(res.x) + H * reg.value;
  out.g = inst.simple.clamp_subgradient(res.x, -inst.smooth->gradient(res.x) - H * reg.gradient);
  out.slope = -H * reg.gradient.dot(u);
  return out;
}

}  // namespace

std::string branch_name(Sprox1dBranch b) {
  switch (b) {
    case Sprox1dBranch::interior_zero:
      return "interior_zero";
    case Sprox1dBranch::start_pos:
      return "start_pos";
    case Sprox1dBranch::start_neg:
      return "start_neg";
    case Sprox1dBranch::end_pos:
      return "end_pos";
    case Sprox1dBranch::end_neg:
      return "end_neg";
  }
  return "?";
}

double sprox_objective_1d(double x, double tau, double xbar, double ubar, int p, double H) {
  const double d = std::abs(x - xbar - tau * ubar);
  return 0.5 * x * x + std::abs(x) + H * std::pow(d, p + 1) / (p + 1);
}

Sprox1dResult exact_sprox_1d(double xbar, double ubar, int p, double H) {
  Sprox1dResult out;
  // The value function of τ is the envelope of an even convex F, so it is
  // even and convex in y = x̄ + τū: the best τ brings y closest to 0.
  const double y0 = xbar, y1 = xbar + ubar;
  if (y0 == 0.0 || (ubar != 0.0 && -xbar / ubar >= 0.0 && -xbar / ubar <= 1.0)) {
    out.tau = ubar == 0.0 ? 0.0 : -xbar / ubar;
    out.branch = Sprox1dBranch::interior_zero;
    return out;
  }
  double y;
  if (ubar == 0.0 || std::abs(y0) <= std::abs(y1)) {
    out.tau = 0.0;
    y = y0;
    out.branch = y > 0 ? Sprox1dBranch::start_pos : Sprox1dBranch::start_neg;
  } else {
    out.tau = 1.0;
    y = y1;
    out.branch = y > 0 ? Sprox1dBranch::end_pos : Sprox1dBranch::end_neg;
  }
  out.x = prox_1d_example(y, p, H);
  if (out.x == 0.0)
    out.g = H * std::pow(std::abs(y), p - 1) * y;
  else
    out.g = out.x > 0 ? 1.0 : -1.0;
  return out;
}

double sprox_objective(const ProblemInstance& inst, const Point& x, double tau, const Point& xbar, const Point& u,
                       double H, int p) {
  return inst.F(x) + H * prox_power(inst.metric, x - xbar - tau * u, p).value;
}

SproxResult sprox_reference(const ProblemInstance& inst, const Point& xbar, const Point& u, double H, int p,
                            int grid_tau, double inner_tol) {
  if (inst.dim() > 5 || grid_tau > 10000 || grid_tau < 1)
    throw Error("sprox_reference cost guard: needs dim <= 5 and 1 <= grid_tau <= 10000");
  if (u.lpNorm<Eigen::Infinity>() == 0.0) grid_tau = 1;

  std::vector<double> vals(grid_tau + 1);
  std::vector<Point> xs(grid_tau + 1);
  Point warm = xbar;
  for (int j = 0; j <= grid_tau; ++j) {
    const ProxAtTau r = prox_at(inst, xbar, u, static_cast<double>(j) / grid_tau, H, p, inner_tol, &warm);
    vals[j] = r.value;
    xs[j] = r.x;
    warm = r.x;
  }
  int best = 0;
  for (int j = 1; j <= grid_tau; ++j)
    if (vals[j] < vals[best]) best = j;

  SproxResult out;
  double best_tau = static_cast<double>(best) / grid_tau;
  double best_val = vals[best];
  Point best_x = xs[best];

  // Golden-section polish on the two grid cells around the best node.
  double a = std::max(0.0, (best - 1.0) / grid_tau), b = std::min(1.0, (best + 1.0) / grid_tau);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  ProxAtTau pc = prox_at(inst, xbar, u, c, H, p, inner_tol, &best_x);
  ProxAtTau pd = prox_at(inst, xbar, u, d, H, p, inner_tol, &best_x);
  for (int it = 0; it < 80 && b - a > 1e-15; ++it) {
    if (pc.value < pd.value) {
      b = d;
      d = c;
      pd = pc;
      c = b - invphi * (b - a);
      pc = prox_at(inst, xbar, u, c, H, p, inner_tol, &pd.x);
    } else {
      a = c;
      c = d;
      pc = pd;
      d = a + invphi * (b - a);
      pd = prox_at(inst, xbar, u, d, H, p, inner_tol, &pc.x);
    }
  }
  for (const auto& [t, pr] : {std::make_pair(c, &pc), std::make_pair(d, &pd)}) {
    if (pr->value < best_val) {
      best_val = pr->value;
      best_tau = t;
      best_x = pr->x;
    }
  }
  const ProxAtTau fin = prox_at(inst, xbar, u, best_tau, H, p, inner_tol, &best_x);
  out.x = fin.x;
  out.tau = best_tau;
  out.g = fin.g;
  out.objective = sprox_objective(inst, fin.x, best_tau, xbar, u, H, p);
  return out;
}

SproxResult sprox_precise(const ProblemInstance& inst, const Point& xbar, const Point& u, double H, int p) {
  const double tol = 1e-14;
  auto finish = [&](double tau, const ProxAtTau& r) {
    SproxResult out;
    out.x = r.x;
    out.tau = tau;
    out.g = r.g;
    out.objective = sprox_objective(inst, r.x, tau, xbar, u, H, p);
    return out;
  };
  const ProxAtTau at0 = prox_at(inst, xbar, u, 0.0, H, p, tol, nullptr);
  if (u.lpNorm<Eigen::Infinity>() == 0.0 || at0.slope >= 0.0) return finish(0.0, at0);
  const ProxAtTau at1 = prox_at(inst, xbar, u, 1.0, H, p, tol, &at0.x);
  if (at1.slope <= 0.0) return finish(1.0, at1);
  // The τ-value function is convex, so its derivative is monotone.
  double lo = 0.0, hi = 1.0;
  Point warm = at0.x;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const ProxAtTau r = prox_at(inst, xbar, u, mid, H, p, tol, &warm);
    warm = r.x;
    if (r.slope == 0.0) return finish(mid, r);
    (r.slope < 0.0 ? lo : hi) = mid;
  }
  const double tau = 0.5 * (lo + hi);
  return finish(tau, prox_at(inst, xbar, u, tau, H, p, tol, &warm));
}

double segment_alpha(double beta1, double beta2) {
  if (beta2 - beta1 <= 0.0) return 1.0;
  return std::clamp(beta2 / (beta2 - beta1), 0.0, 1.0);
}

double segment_excess(double alpha, double tau1, double tau2, double beta1, double g_k, double H, int p,
                      double beta) {
  const double rhs = 0.5 * std::pow((1.0 - beta) / H, 1.0 / p) * std::pow(g_k, (p + 1.0) / p);
  return alpha * (tau1 - tau2) * beta1 - rhs;
}

SegmentResult bisect_segment(const ProblemInstance& /*inst*/, const Point& x_k, const Point& u_k,
                             const AcceptedPoint& end0, const AcceptedPoint& end1, double H, int p, double beta,
                             const AcceptanceOracle& oracle, const SegmentCaps& caps) {
  SegmentResult s;
  s.tau1 = 0.0;
  s.tau2 = 1.0;
  s.T1 = end0;
  s.T2 = end1;
  s.beta1 = end0.composite_gradient().dot(u_k);
  s.beta2 = end1.composite_gradient().dot(u_k);
  if (!(s.beta1 < 0.0) || !(s.beta2 > 0.0)) {
    std::ostringstream os;
    os << "segment endpoints do not bracket: beta1 = " << s.beta1 << ", beta2 = " << s.beta2;
    throw Error(os.str());
  }
  std::vector<double> history;
  for (;;) {
    s.alpha = segment_alpha(s.beta1, s.beta2);
    s.g_k = power_mean_norm(s.alpha, s.T1.grad_F_norm, s.T2.grad_F_norm, p);
    const double excess = segment_excess(s.alpha, s.tau1, s.tau2, s.beta1, s.g_k, H, p, beta);
    history.push_back(excess);
    if (excess <= 0.0) return s;
    if (s.bisections >= caps.max_bisections) throw SolverError("bisection stall", history);
    const double tau = 0.5 * (s.tau1 + s.tau2);
    auto [T, iters] = oracle(x_k + tau * u_k);
    s.lower_iters += iters;
    ++s.bisections;
    const double b = T.composite_gradient().dot(u_k);
    s.generated.push_back(T);
    if (b <= 0.0) {
      s.tau1 = tau;
      s.beta1 = b;
      s.T1 = std::move(T);
    } else {
      s.tau2 = tau;
      s.beta2 = b;
      s.T2 = std::move(T);
    }
  }
}

}  // namespace biopt
