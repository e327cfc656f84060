#include "biopt/lower_level.hpp"

#include "biopt/composite.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <limits>

namespace biopt {

RelSmoothParams rel_smooth_params(int p, double M_next) {
  if (p < 2) throw Error("relative smoothness parameters need p >= 2");
  if (!(M_next > 0.0) || !std::isfinite(M_next)) throw Error("M_{p+1} must be positive and finite");
  RelSmoothParams out;
  out.xi = 2.0;
  out.H = 6.0 * M_next / factorial(p - 1);
  out.mu = 1.0 - 1.0 / out.xi;
  out.L = 1.0 + 1.0 / out.xi;
  out.kappa = (out.xi - 1.0) / (out.xi + 1.0);
  return out;
}

ScalingFunction::ScalingFunction(const ProblemInstance& inst, Point y, double H, int p)
    : inst_(&inst), y_(std::move(y)), H_(H), p_(p) {
  if (p < 1) throw Error("scaling function needs p >= 1");
  if (!(H > 0.0)) throw Error("scaling function needs H > 0");
  require_finite(y_);
  if (q() == 1) {
    C_ = inst.metric.factor();
    const Matrix Q = inst.smooth->hessian(y_);
    const auto Cl = C_.triangularView<Eigen::Lower>();
    Matrix S = Cl.solve(Cl.solve(Q).transpose());
    S = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    V_ = es.eigenvectors();
    lambda_ = es.eigenvalues().cwiseMax(0.0);
  }
}

ValueGrad ScalingFunction::value_grad(const Point& x) const {
  const Point h = x - y_;
  ValueGrad out = prox_power(inst_->metric, h, p_);
  out.value *= H_;
  out.gradient *= H_;
  for (int k = 1; k <= q(); ++k) {
    const double w = 1.0 / factorial(2 * k);
    out.value += w * inst_->smooth->even_form(y_, h, 2 * k);
    out.gradient += w * inst_->smooth->even_form_grad(y_, h, 2 * k);
  }
  return out;
}

Matrix ScalingFunction::hessian(const Point& x) const {
  const Point h = x - y_;
  Matrix out = H_ * prox_power_hessian(inst_->metric, h, p_);
  for (int k = 1; k <= q(); ++k) out += inst_->smooth->even_form_hess(y_, h, 2 * k) / factorial(2 * k);
  return out;
}

double ScalingFunction::bregman(const Point& x, const Point& z) const {
  const ValueGrad at_x = value_grad(x);
  const double rz = value_grad(z).value;
  return rz - at_x.value - at_x.gradient.dot(z - x);
}

Point ScalingFunction::radial_solve(double L, const Dual& c_shift) const {
  if (q() != 1) throw Error("radial solve needs q = 1");
  const int n = static_cast<int>(y_.size());
  const auto Cl = C_.triangularView<Eigen::Lower>();
  const Vector chat = V_.transpose() * Cl.solve(c_shift);
  const double cnorm = chat.norm();
  if (cnorm == 0.0) return Point::Zero(n);

  auto w_of = [&](double shift) -> Vector {
    return (-1.0 / (2.0 * L)) * chat.cwiseQuotient((lambda_.array() + shift).matrix());
  };
  auto to_h = [&](const Vector& w) -> Point { return Cl.transpose().solve(V_ * w); };

  if (p_ == 1) return to_h(w_of(H_));

  auto phi = [&](double r) { return w_of(H_ * std::pow(r, p_ - 1)).norm() - r; };
  const double r_hi = std::pow(cnorm / (2.0 * L * H_), 1.0 / p_);
  double f_hi = phi(r_hi);
  if (f_hi >= 0.0) return to_h(w_of(H_ * std::pow(r_hi, p_ - 1)));
  double r_lo = 0.5 * r_hi;
  double f_lo = phi(r_lo);
  while (!(f_lo > 0.0)) {
    if (f_lo == 0.0) return to_h(w_of(H_ * std::pow(r_lo, p_ - 1)));
    r_lo *= 0.5;
    if (r_lo < 1e-300) return Point::Zero(n);
    f_lo = phi(r_lo);
  }
  boost::uintmax_t iters = 200;
  const auto bracket = boost::math::tools::toms748_solve(
      phi, r_lo, r_hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(52), iters);
  const double r = 0.5 * (bracket.first + bracket.second);
  return to_h(w_of(H_ * std::pow(r, p_ - 1)));
}

Point subproblem_solve(const ScalingFunction& sf, double L, const Dual& c_shift, const SimpleOracle& psi,
                       double tol, int max_iter, const Point* warm_h) {
  if (!(tol > 0.0)) throw Error("subproblem tolerance must be positive");
  const Point& y = sf.center();
  if (sf.q() == 1 && psi.kind() != SimpleKind::l1) {
    const Point h = sf.radial_solve(L, c_shift);
    if (psi.kind() == SimpleKind::none) return h;
    const Point z = y + h;
    const bool strictly_inside =
        ((z.array() > psi.lo().array()) && (z.array() < psi.hi().array())).all();
    if (strictly_inside) return h;
  }
  SmoothModel model;
  model.value = [&](const Point& x) {
    return c_shift.dot(x - y) + 2.0 * L * sf.value_grad(x).value;
  };
  model.gradient = [&](const Point& x) -> Dual { return c_shift + 2.0 * L * sf.value_grad(x).gradient; };
  model.hessian = [&](const Point& x) -> Matrix { return 2.0 * L * sf.hessian(x); };
  CompositeOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  const Point start = warm_h ? Point(y + *warm_h) : y;
  const CompositeResult res = minimize_composite(model, psi, start, opts);
  if (!res.converged) {
    // Accept a stalled solve only if it is close to stationary in absolute terms.
    const double scale = 1.0 + c_shift.lpNorm<Eigen::Infinity>();
    if (!(res.residual <= 1e-9 * scale)) throw SolverError("subproblem stall", {res.residual});
  }
  return res.x - y;
}

AcceptResult solve_acceptable(const ProblemInstance& inst, const Point& y, double H, int p, double beta,
                              const RelSmoothParams& params, const LowerCaps& caps) {
  if (beta < 0.0 || beta > 3.0 / (3.0 * p + 2.0)) throw Error("beta out of range [0, 3/(3p+2)]");
  const ScalingFunction sf(inst, y, H, p);
  const double L = params.L;
  const Metric& metric = inst.metric;

  AcceptResult out;
  Point z = y;
  auto reg_grad = [&](const Point& x) -> Dual {
    return inst.smooth->gradient(x) + H * prox_power(metric, x - y, p).gradient;
  };
  auto phi = [&](const Point& x) { return reg_value_grad(inst, y, H, p, x).value + inst.simple.value(x); };
  out.phi_history.push_back(phi(z));
  std::vector<double> residuals;
  Point h_prev = Point::Zero(y.size());

  for (int i = 0; i < caps.outer; ++i) {
    const Dual grad_reg = reg_grad(z);
    const Dual grad_rho = sf.value_grad(z).gradient;
    const Dual c = grad_reg - 2.0 * L * grad_rho;
    const Point h = subproblem_solve(sf, L, c, inst.simple, 1e-13, caps.inner, &h_prev);
    const Point z_next = inst.simple.kind() == SimpleKind::box ? inst.simple.project_to_domain(y + h) : Point(y + h);
    const Dual g_raw = 2.0 * L * (grad_rho - sf.value_grad(z_next).gradient) - grad_reg;
    const Dual g = inst.simple.clamp_subgradient(z_next, g_raw);
    h_prev = z_next - y;
    z = z_next;
    out.phi_history.push_back(phi(z));
    if (is_acceptable(inst, y, H, p, beta, z, g)) {
      out.point = make_accepted_point(inst, y, H, p, beta, z, g);
      out.iters = i + 1;
      return out;
    }
    residuals.push_back(metric.dual_norm(reg_grad(z) + g));
  }
  throw SolverError("acceptance not reached", residuals);
}

}  // namespace biopt
