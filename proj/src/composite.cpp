#include "biopt/composite.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

namespace biopt {
namespace {

// Coordinatewise distance of -grad from ∂ψ(x).
double stationarity(const SimpleOracle& psi, const Point& x, const Dual& grad) {
  return psi.subgradient_violation(x, -grad);
}

// Minimize ⟨G, z - x⟩ + ½ (z - x)ᵀ Hm (z - x) + ψ(z) over z.
Point solve_model(const SimpleOracle& psi, const Point& x, const Dual& G, const Matrix& Hm, int max_sweeps) {
  const int n = static_cast<int>(x.size());
  if (psi.kind() == SimpleKind::none) {
    Eigen::LDLT<Matrix> ldlt(Hm);
    Point z = x - ldlt.solve(G);
    if (z.allFinite()) return z;
    return x - G / std::max(Hm.diagonal().maxCoeff(), 1e-300);
  }
  Point z = psi.project_to_domain(x);
  Vector grad = G + Hm * (z - x);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    double scale = 0.0;
    for (int j = 0; j < n; ++j) {
      const double hjj = Hm(j, j);
      const double zj = psi.prox_1d(j, hjj, z(j) - grad(j) / hjj);
      const double dz = zj - z(j);
      if (dz != 0.0) {
        grad.noalias() += Hm.col(j) * dz;
        z(j) = zj;
      }
      change = std::max(change, std::abs(dz));
      scale = std::max(scale, std::abs(zj));
    }
    if (change <= 1e-16 * (1.0 + scale)) break;
  }
  return z;
}

}  // namespace

CompositeResult minimize_composite(const SmoothModel& model, const SimpleOracle& psi, const Point& start,
                                   const CompositeOptions& opts) {
  CompositeResult out;
  Point x = psi.project_to_domain(start);
  double sval = model.value(x);
  if (!std::isfinite(sval)) throw Error("composite solver started outside the domain");
  double phi = sval + psi.value(x);
  Dual grad = model.gradient(x);
  double res = stationarity(psi, x, grad);
  const double gscale = 1.0 + grad.lpNorm<Eigen::Infinity>();

  int it = 0;
  for (; it < opts.max_iter; ++it) {
    if (res <= opts.tol * gscale) {
      out.converged = true;
      break;
    }
    Matrix Hm = model.hessian(x);
    const double reg = 1e-14 * (1.0 + Hm.diagonal().cwiseAbs().maxCoeff());
    Hm.diagonal().array() += reg;
    const Point z = solve_model(psi, x, grad, Hm, opts.max_sweeps);
    const Vector d = z - x;
    if (d.lpNorm<Eigen::Infinity>() == 0.0) {
      out.converged = res <= 1e-9 * gscale;
      break;
    }
    const double decrease = grad.dot(d) + psi.value(z) - psi.value(x);

    double alpha = 1.0;
    bool accepted = false;
    Point xt;
    double phit = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      xt = x + alpha * d;
      if (psi.kind() == SimpleKind::box) xt = psi.project_to_domain(xt);
      const double st = model.value(xt);
      if (std::isfinite(st)) {
        phit = st + psi.value(xt);
        if (phit <= phi + 1e-4 * alpha * std::min(decrease, 0.0)) {
          accepted = true;
          break;
        }
        // Near the optimum, rounding hides the decrease; fall back on the
        // stationarity measure for full steps.
        if (alpha == 1.0 && phit <= phi + 64 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(phi))) {
          const Dual gt = model.gradient(xt);
          if (stationarity(psi, xt, gt) < res) {
            accepted = true;
            break;
          }
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    x = xt;
    phi = phit;
    grad = model.gradient(x);
    res = stationarity(psi, x, grad);
  }
  if (!out.converged && res <= opts.tol * gscale) out.converged = true;
  out.x = x;
  out.g = psi.clamp_subgradient(x, -grad);
  out.value = phi;
  out.residual = res;
  out.iterations = it;
  return out;
}

CompositeResult prox_exact(const ProblemInstance& inst, const Point& anchor, double H, int p,
                           const CompositeOptions& opts, const Point* warm_start) {
  const SmoothOracle& f = *inst.smooth;
  const Metric& metric = inst.metric;
  SmoothModel model;
  model.value = [&](const Point& x) {
    const double fx = f.value(x);
    if (!std::isfinite(fx)) return fx;
    return fx + H * prox_power(metric, x - anchor, p).value;
  };
  model.gradient = [&](const Point& x) -> Dual {
    return f.gradient(x) + H * prox_power(metric, x - anchor, p).gradient;
  };
  model.hessian = [&](const Point& x) -> Matrix {
    return f.hessian(x) + H * prox_power_hessian(metric, x - anchor, p);
  };
  Point start = warm_start ? *warm_start : anchor;
  if (!std::isfinite(f.value(inst.simple.project_to_domain(start)))) start = anchor;
  return minimize_composite(model, inst.simple, start, opts);
}

}  // namespace biopt
