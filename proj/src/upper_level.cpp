#include "biopt/upper_level.hpp"

#include "biopt/composite.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace biopt {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

bool known(double v) { return v == v; }

// Value of Σ a_i ℓ_{T_i} at x, stored as ⟨s, x⟩ + constant.
double affine_value(const EstimatingState& st, const Point& x) { return st.s.dot(x) + st.constant; }

void add_pieces(EstimatingState& st, double a, const std::vector<ModelPiece>& pieces) {
  for (const ModelPiece& m : pieces) {
    st.s += (a * m.weight) * m.grad_f;
    st.constant += a * m.weight * (m.f_value - m.grad_f.dot(m.T));
  }
}

// 𝓛(x) = Σ w_j ℓ_{T_j}(x) + ψ(x).
double model_value(const ProblemInstance& inst, const std::vector<ModelPiece>& pieces, const Point& x) {
  double v = inst.simple.value(x);
  for (const ModelPiece& m : pieces) v += m.weight * (m.f_value + m.grad_f.dot(x - m.T));
  return v;
}

ModelPiece piece_of(const AcceptedPoint& P, double weight) { return {weight, P.T, P.f_value, P.grad_f}; }

AcceptedSummary summarize(const AcceptedPoint& P, const ProblemInstance& inst) {
  AcceptedSummary s;
  s.beta = P.beta_used;
  s.r = P.r;
  s.grad_F_norm = P.grad_F_norm;
  s.reg_grad_norm = P.reg_grad_norm;
  s.inner = P.inner;
  if (inst.optimum) {
    s.dist_T_xstar = inst.metric.norm(P.T - inst.optimum->x);
    s.dist_anchor_xstar = inst.metric.norm(P.anchor - inst.optimum->x);
    s.F_gap = P.f_value + inst.simple.value(P.T) - inst.optimum->F;
  }
  return s;
}

// Shared tail of both drivers: coefficient, accumulators and the new minimizer.
void advance(StepOutcome& out, const ProblemInstance& inst, const CoefficientRule& rule, double H, int p,
             const std::vector<ModelPiece>& pieces) {
  EstimatingState& st = out.state;
  const double g = out.record.g_k;
  const double a = solve_step_coefficient(st.A, coefficient_target(rule, H, p, g));
  const double A_next = st.A + a;
  add_pieces(st, a, pieces);
  st.A = A_next;
  st.B_cert += certificate_increment(rule, H, p, A_next, g);
  st.upsilon = estimating_min(inst.metric, st, inst.simple);
  out.record.a = a;
  out.record.A = A_next;
  out.record.B_cert = st.B_cert;
}

double box_farthest(const SimpleOracle& psi, const Metric& metric, const Point& c) {
  Vector far(c.size());
  for (int j = 0; j < c.size(); ++j) far(j) = std::max(c(j) - psi.lo()(j), psi.hi()(j) - c(j));
  if (metric.is_identity()) return far.norm();
  Eigen::SelfAdjointEigenSolver<Matrix> es(metric.matrix(), Eigen::EigenvaluesOnly);
  return std::sqrt(es.eigenvalues().maxCoeff()) * far.norm();
}

// Largest t with F(x* + t d) ≤ level, for a direction d of unit metric norm.
double ray_extent(const ProblemInstance& inst, const Point& xs, const Point& d, double level) {
  auto inside = [&](double t) { return inst.F(xs + t * d) <= level; };
  double lo = 0.0, hi = 1.0;
  while (inside(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) return kInf;
  }
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (inside(mid) ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::exact:
      return "exact";
    case Mode::inexact:
      return "inexact";
    case Mode::superfast:
      return "superfast";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  if (s == "exact") return Mode::exact;
  if (s == "inexact") return Mode::inexact;
  if (s == "superfast") return Mode::superfast;
  throw Error("unknown mode '" + s + "' (expected exact, inexact or superfast)");
}

std::string branch_label(Branch b) {
  switch (b) {
    case Branch::initial:
      return "initial";
    case Branch::exact:
      return "exact";
    case Branch::case_i:
      return "case_i";
    case Branch::case_ii:
      return "case_ii";
    case Branch::case_iii:
      return "case_iii";
    case Branch::optimal:
      return "optimal";
  }
  return "?";
}

Branch parse_branch(const std::string& s) {
  for (Branch b : {Branch::initial, Branch::exact, Branch::case_i, Branch::case_ii, Branch::case_iii, Branch::optimal})
    if (branch_label(b) == s) return b;
  throw Error("unknown branch '" + s + "'");
}

std::string stop_name(StopRule s) {
  switch (s) {
    case StopRule::gap:
      return "gap";
    case StopRule::A_threshold:
      return "A_threshold";
    case StopRule::budget:
      return "budget";
  }
  return "?";
}

StopRule parse_stop(const std::string& s) {
  if (s == "gap") return StopRule::gap;
  if (s == "A_threshold") return StopRule::A_threshold;
  if (s == "budget") return StopRule::budget;
  throw Error("unknown stopping rule '" + s + "' (expected gap, A_threshold or budget)");
}

EstimatingState initial_state(const Point& x0) {
  require_finite(x0, "non-finite starting point");
  EstimatingState st;
  st.x0 = x0;
  st.s = Dual::Zero(x0.size());
  st.upsilon = x0;
  st.x = x0;
  return st;
}

Point estimating_min(const Metric& metric, const EstimatingState& state, const SimpleOracle& psi) {
  return psi.scaled_prox(metric, state.A, state.x0 - metric.solve(state.s));
}

double estimating_value(const ProblemInstance& inst, const EstimatingState& state, const Point& x) {
  const double psi = inst.simple.value(x);
  if (!std::isfinite(psi)) return kInf;
  const double d = inst.metric.norm(x - state.x0);
  return 0.5 * d * d + affine_value(state, x) + state.A * psi;
}

double gap_certificate(const ProblemInstance& inst, const EstimatingState& state, double R) {
  if (!(state.A > 0.0)) throw Error("certificate undefined: A = 0");
  if (!(R >= 0.0)) throw Error("certificate radius must be nonnegative");
  const Metric& metric = inst.metric;
  const double A = state.A;
  const double Fx = inst.F(state.x);
  const Dual s = state.s / A;
  const double c = state.constant / A;
  const double sn = metric.dual_norm(s);

  if (inst.simple.kind() == SimpleKind::none) return Fx - (s.dot(state.x0) - R * sn + c);

  // Lagrangian lower bound: for any λ > 0,
  //   min_{‖x-x0‖≤R} ⟨s,x⟩ + c + ψ(x) ≥ min_x ⟨s,x⟩ + c + ψ(x) + (λ/2)(‖x-x0‖² - R²).
  // The inner problem is λ-strongly convex, so an approximate minimizer with
  // residual r gives a certified bound after subtracting ‖r‖²_*/(2λ).
  auto dual_value = [&](double lambda, double* radius) {
    const Point x = inst.simple.scaled_prox(metric, 1.0 / lambda, state.x0 - metric.solve(s) / lambda);
    const Dual grad = s + lambda * metric.apply(x - state.x0);
    const Dual g = inst.simple.clamp_subgradient(x, -grad);
    const double rn = metric.dual_norm(grad + g);
    const double d = metric.norm(x - state.x0);
    *radius = d;
    return s.dot(x) + c + inst.simple.value(x) + 0.5 * lambda * (d * d - R * R) - rn * rn / (2.0 * lambda);
  };
  const double lam0 = (sn > 0.0 && R > 0.0) ? sn / R : 1.0;
  double best = -kInf, radius = 0.0;
  double lo = std::log(lam0) - 30.0, hi = std::log(lam0) + 30.0;
  best = std::max(best, dual_value(lam0, &radius));
  for (int it = 0; it < 120; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = dual_value(std::exp(mid), &radius);
    if (std::isfinite(v)) best = std::max(best, v);
    // The inner minimizer moves toward x0 as λ grows.
    (radius > R ? lo : hi) = mid;
  }
  if (!std::isfinite(best)) throw SolverError("gap certificate lower bound not finite");
  return Fx - best;
}

CoefficientRule coefficient_rule(Mode mode, double beta, double coef_factor) {
  if (mode == Mode::exact) return {1.0, 0.5, 1.0};
  if (!(coef_factor > 0.0) || !(coef_factor < 0.5)) throw Error("coef_factor must lie in (0, 1/2)");
  return {coef_factor, 0.5 - coef_factor, 1.0 - beta};
}

double coefficient_target(const CoefficientRule& rule, double H, int p, double g) {
  return rule.c_factor * std::pow(rule.scale / H, 1.0 / p) * std::pow(g, (1.0 - p) / p);
}

double certificate_increment(const CoefficientRule& rule, double H, int p, double A_next, double g) {
  return rule.b_factor * std::pow(rule.scale / H, 1.0 / p) * A_next * std::pow(g, (p + 1.0) / p);
}

StepOutcome step_exact(const EstimatingState& state, const ProblemInstance& inst, double H, int p,
                       const SproxOracle& sprox) {
  StepOutcome out;
  out.state = state;
  IterationRecord& rec = out.record;
  rec.branch = Branch::exact;
  const Point u = state.upsilon - state.x;
  const SproxResult sp = sprox(state.x, u);
  const Point& xn = sp.x;
  const Dual grad = inst.smooth->gradient(xn);
  rec.tau = sp.tau;
  rec.g_k = inst.metric.dual_norm(grad + sp.g);
  rec.residual = rec.g_k;
  std::vector<ModelPiece> pieces{{1.0, xn, inst.smooth->value(xn), grad}};
  rec.model_prev = model_value(inst, pieces, state.x);
  out.state.x = xn;
  if (rec.g_k == 0.0) {
    rec.branch = Branch::optimal;
    rec.A = state.A;
    rec.B_cert = state.B_cert;
    out.optimal = true;
    return out;
  }
  advance(out, inst, coefficient_rule(Mode::exact, 0.0, 1.0), H, p, pieces);
  return out;
}

StepOutcome step_inexact(const EstimatingState& state, const ProblemInstance& inst, double H, int p, double beta,
                         double coef_factor, const AcceptanceOracle& oracle, const SegmentCaps& caps) {
  const CoefficientRule rule = coefficient_rule(Mode::inexact, beta, coef_factor);
  StepOutcome out;
  out.state = state;
  IterationRecord& rec = out.record;
  const Point u = state.upsilon - state.x;
  std::vector<ModelPiece> pieces;

  auto [P0, it0] = oracle(state.x);
  rec.lower_iters += it0;
  out.accepted.push_back(P0);
  const bool zero_u = u.lpNorm<Eigen::Infinity>() == 0.0;
  const double b0 = zero_u ? 0.0 : P0.composite_gradient().dot(u);
  if (zero_u || b0 >= 0.0) {
    rec.branch = Branch::case_i;
    rec.tau = 0.0;
    out.state.x = P0.T;
    rec.g_k = P0.grad_F_norm;
    rec.residual = rec.g_k;
    pieces.push_back(piece_of(P0, 1.0));
  } else {
    auto [P1, it1] = oracle(state.upsilon);
    rec.lower_iters += it1;
    out.accepted.push_back(P1);
    const double b1 = P1.composite_gradient().dot(u);
    if (b1 <= 0.0) {
      rec.branch = Branch::case_ii;
      rec.tau = 1.0;
      out.state.x = P1.T;
      rec.g_k = P1.grad_F_norm;
      rec.residual = rec.g_k;
      pieces.push_back(piece_of(P1, 1.0));
    } else {
      rec.branch = Branch::case_iii;
      SegmentResult seg = bisect_segment(inst, state.x, u, P0, P1, H, p, beta, oracle, caps);
      rec.lower_iters += seg.lower_iters;
      rec.bisections = seg.bisections;
      for (AcceptedPoint& P : seg.generated) out.accepted.push_back(std::move(P));
      rec.tau1 = seg.tau1;
      rec.tau2 = seg.tau2;
      rec.alpha = seg.alpha;
      rec.g_k = seg.g_k;
      const double al = seg.alpha;
      Point xn = al * seg.T1.T + (1.0 - al) * seg.T2.T;
      if (inst.simple.kind() == SimpleKind::box) xn = inst.simple.project_to_domain(xn);
      out.state.x = xn;
      rec.residual =
          inst.metric.dual_norm(al * seg.T1.composite_gradient() + (1.0 - al) * seg.T2.composite_gradient());
      pieces.push_back(piece_of(seg.T1, al));
      pieces.push_back(piece_of(seg.T2, 1.0 - al));
    }
  }
  rec.model_prev = model_value(inst, pieces, state.x);
  for (const AcceptedPoint& P : out.accepted) rec.accepted.push_back(summarize(P, inst));
  if (rec.g_k == 0.0) {
    rec.branch = Branch::optimal;
    rec.A = state.A;
    rec.B_cert = state.B_cert;
    out.optimal = true;
    return out;
  }
  advance(out, inst, rule, H, p, pieces);
  return out;
}

RunHeader validate_config(const ProblemInstance& inst, const RunConfig& cfg) {
  RunHeader h;
  h.instance = inst.name;
  h.mode = cfg.mode;
  h.p = cfg.p;
  h.dim = inst.dim();
  h.budget = cfg.budget;
  h.epsilon = cfg.epsilon;
  h.stop = cfg.stop;
  if (cfg.p < 1) throw Error("p must be >= 1");
  if (cfg.budget < 0) throw Error("budget must be nonnegative");
  if (cfg.mode == Mode::exact) {
    if (cfg.beta != 0.0) throw Error("beta applies only to the inexact and superfast modes");
  } else if (cfg.beta < 0.0 || cfg.beta > 3.0 / (3.0 * cfg.p + 2.0)) {
    throw Error("beta out of range [0, 3/(3p+2)]");
  }
  h.beta = cfg.beta;
  if (cfg.mode == Mode::superfast) {
    if (cfg.p < 2) throw Error("superfast mode needs p >= 2");
    if (cfg.H) throw Error("superfast mode derives H from M_next; do not set H");
    std::optional<double> M = cfg.M_next ? cfg.M_next : inst.smooth->M(cfg.p + 1);
    if (!M) throw Error("superfast mode needs M_next (no bound known for this instance)");
    if (!(*M > 0.0) || !std::isfinite(*M)) throw Error("superfast mode needs a positive finite M_next");
    const RelSmoothParams params = rel_smooth_params(cfg.p, *M);
    h.H = params.H;
    h.L = params.L;
  } else {
    h.H = cfg.H.value_or(1.0);
    if (!(h.H > 0.0) || !std::isfinite(h.H)) throw Error("H must be positive and finite");
  }
  h.coef_factor = cfg.mode == Mode::exact ? 1.0 : cfg.coef_factor;
  coefficient_rule(cfg.mode, cfg.beta, h.coef_factor);
  if (!(cfg.epsilon > 0.0)) throw Error("epsilon must be positive");
  const Point x0 = cfg.x0 ? *cfg.x0 : inst.x0;
  if (x0.size() != inst.dim()) throw Error("x0 has the wrong dimension");
  if (!std::isfinite(inst.F(x0))) throw Error("x0 is outside dom F");
  if (inst.optimum) {
    h.F_star = inst.optimum->F;
    h.R0 = inst.metric.norm(x0 - inst.optimum->x);
    const auto [Ds, D0] = level_set_radii(inst, x0, inst.optimum->x);
    h.D_star = Ds;
    h.D0 = D0;
  }
  if (cfg.R) {
    if (!(*cfg.R >= 0.0)) throw Error("R must be nonnegative");
    h.R = *cfg.R;
  } else if (inst.optimum) {
    h.R = 2.0 * h.R0;
  }
  if (cfg.stop != StopRule::budget && !known(h.R))
    throw Error("stopping rule '" + stop_name(cfg.stop) + "' needs R (no optimum known to derive it)");
  return h;
}

std::pair<double, double> level_set_radii(const ProblemInstance& inst, const Point& x0, const Point& x_star) {
  const double level = inst.F(x0);
  const double R0 = inst.metric.norm(x0 - x_star);
  double D_star = kInf;
  if (inst.simple.kind() == SimpleKind::box) D_star = box_farthest(inst.simple, inst.metric, x_star);
  const auto M3 = inst.smooth->M(3);
  if (inst.simple.kind() == SimpleKind::none && M3 && *M3 == 0.0) {
    // Quadratic with ψ = 0: the level set is an ellipsoid around x*.
    const Matrix C = inst.metric.factor();
    const auto Cl = C.triangularView<Eigen::Lower>();
    Matrix S = Cl.solve(Cl.solve(inst.smooth->hessian(x_star)).transpose());
    S = 0.5 * (S + S.transpose());
    const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(S, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    const double delta = std::max(0.0, level - inst.F(x_star));
    if (lmin > 0.0) D_star = std::min(D_star, std::sqrt(2.0 * delta / lmin));
  } else if (inst.dim() == 1) {
    const Point d = Point::Constant(1, 1.0 / inst.metric.norm(Point::Constant(1, 1.0)));
    D_star = std::min(D_star, std::max(ray_extent(inst, x_star, d, level), ray_extent(inst, x_star, -d, level)));
  } else if (!std::isfinite(D_star)) {
    // Sampled rays: an estimate, not a certified bound.
    std::mt19937 rng(12345);
    std::normal_distribution<double> nd;
    double best = R0;
    for (int i = 0; i < 200 + 2 * inst.dim(); ++i) {
      Point d(inst.dim());
      if (i < 2 * inst.dim()) {
        d.setZero();
        d(i / 2) = (i % 2) ? -1.0 : 1.0;
      } else {
        for (int j = 0; j < d.size(); ++j) d(j) = nd(rng);
      }
      d /= inst.metric.norm(d);
      best = std::max(best, ray_extent(inst, x_star, d, level));
    }
    D_star = best;
  }
  D_star = std::max(D_star, R0);
  double D0 = R0 + D_star;
  if (inst.simple.kind() == SimpleKind::box) {
    const Point diag = inst.simple.hi() - inst.simple.lo();
    double diam = diag.norm();
    if (!inst.metric.is_identity())
      diam *= std::sqrt(Eigen::SelfAdjointEigenSolver<Matrix>(inst.metric.matrix(), Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .maxCoeff());
    D0 = std::min(D0, diam);
  }
  return {D_star, D0};
}

namespace {

void fill_diagnostics(IterationRecord& rec, const ProblemInstance& inst, const EstimatingState& st,
                      const RunHeader& h, double prev_best) {
  rec.F_val = inst.F(st.x);
  rec.A = st.A;
  rec.B_cert = st.B_cert;
  rec.psi_star = estimating_value(inst, st, st.upsilon);
  rec.dist_upsilon_x = inst.metric.norm(st.upsilon - st.x);
  if (inst.optimum) {
    const Point& xs = inst.optimum->x;
    rec.F_gap = rec.F_val - inst.optimum->F;
    rec.psi_at_xstar = estimating_value(inst, st, xs);
    rec.dist_x_xstar = inst.metric.norm(st.x - xs);
    rec.dist_upsilon_xstar = inst.metric.norm(st.upsilon - xs);
  }
  if (st.A > 0.0 && known(h.R)) rec.gap_cert = gap_certificate(inst, st, h.R);
  if (known(rec.residual))
    rec.best_residual = known(prev_best) ? std::min(prev_best, rec.residual) : rec.residual;
  else
    rec.best_residual = prev_best;
}

bool should_stop(const RunHeader& h, const IterationRecord& rec) {
  switch (h.stop) {
    case StopRule::gap:
      return known(rec.gap_cert) && rec.gap_cert <= h.epsilon;
    case StopRule::A_threshold:
      return rec.A >= h.R * h.R / (2.0 * h.epsilon);
    case StopRule::budget:
      return false;
  }
  return false;
}

}  // namespace

RunTrace run(const ProblemInstance& inst, const RunConfig& cfg, unsigned seed) {
  RunTrace trace;
  trace.header = validate_config(inst, cfg);
  trace.header.seed = seed;
  const RunHeader& h = trace.header;
  const double H = h.H;
  const int p = h.p;

  EstimatingState st = initial_state(cfg.x0 ? *cfg.x0 : inst.x0);
  IterationRecord rec0;
  fill_diagnostics(rec0, inst, st, h, kNaN);
  trace.records.push_back(rec0);

  SproxOracle sprox;
  AcceptanceOracle accept;
  if (cfg.mode == Mode::exact) {
    if (inst.name == "example1d") {
      sprox = [&](const Point& xbar, const Point& u) {
        const Sprox1dResult r = exact_sprox_1d(xbar(0), u(0), p, H);
        SproxResult out;
        out.x = Point::Constant(1, r.x);
        out.tau = r.tau;
        out.g = Dual::Constant(1, r.g);
        out.objective = sprox_objective_1d(r.x, r.tau, xbar(0), u(0), p, H);
        return out;
      };
    } else {
      sprox = [&](const Point& xbar, const Point& u) { return sprox_precise(inst, xbar, u, H, p); };
    }
  } else if (cfg.mode == Mode::superfast) {
    const RelSmoothParams params = rel_smooth_params(p, cfg.M_next ? *cfg.M_next : *inst.smooth->M(p + 1));
    accept = [&inst, &cfg, H, p, params](const Point& anchor) {
      AcceptResult r = solve_acceptable(inst, anchor, H, p, cfg.beta, params, cfg.lower);
      return std::make_pair(std::move(r.point), r.iters);
    };
  } else {
    accept = [&inst, &cfg, H, p](const Point& anchor) {
      CompositeOptions opts;
      opts.tol = 1e-14;
      const CompositeResult r = prox_exact(inst, anchor, H, p, opts, nullptr);
      const Dual g = inst.simple.clamp_subgradient(
          r.x, -inst.smooth->gradient(r.x) - H * prox_power(inst.metric, r.x - anchor, p).gradient);
      return std::make_pair(make_accepted_point(inst, anchor, H, p, cfg.beta, r.x, g), r.iterations);
    };
  }

  trace.status = "budget";
  if (should_stop(h, rec0)) {
    trace.status = "converged";
    return trace;
  }
  for (int k = 1; k <= cfg.budget; ++k) {
    StepOutcome step = cfg.mode == Mode::exact
                           ? step_exact(st, inst, H, p, sprox)
                           : step_inexact(st, inst, H, p, cfg.beta, h.coef_factor, accept, cfg.segment);
    st = std::move(step.state);
    IterationRecord rec = std::move(step.record);
    rec.k = k;
    fill_diagnostics(rec, inst, st, h, trace.records.back().best_residual);
    trace.records.push_back(std::move(rec));
    if (step.optimal) {
      trace.status = "optimal";
      break;
    }
    if (should_stop(h, trace.records.back())) {
      trace.status = "converged";
      break;
    }
  }
  return trace;
}

double exact_rate_bound(int p, double H, double R0, int k) {
  return std::pow(2.0, p) * H * std::pow(R0, p + 1) *
         std::pow(1.0 + 2.0 * (k - 1.0) / (p + 1.0), -(3.0 * p + 1.0) / 2.0);
}

double inexact_rate_bound(int p, double H, double R0, double beta, int k) {
  return std::pow(4.0, p) * H * std::pow(R0, p + 1) / (1.0 - beta) *
         std::pow(1.0 + 2.0 * (k - 1.0) / (p + 1.0), -(3.0 * p + 1.0) / 2.0);
}

double bisection_bound(int p, double H, double D_star, double beta, double eps) {
  const double inner = 2.0 + std::log2(5.0 * H * D_star / (4.0 * (1.0 - beta) * eps)) / p;
  return std::max(inner, 0.0) + 1.0;
}

bool VerifyReport::all_pass() const {
  for (const auto& inv : invariants)
    if (inv.failed > 0) return false;
  return true;
}

const InvariantResult* VerifyReport::find(const std::string& name) const {
  for (const auto& inv : invariants)
    if (inv.name == name) return &inv;
  return nullptr;
}

namespace {

class Checker {
 public:
  InvariantResult& get(const std::string& name) {
    for (auto& inv : report.invariants)
      if (inv.name == name) return inv;
    report.invariants.push_back({name, 0, 0, ""});
    return report.invariants.back();
  }
  void check(const std::string& name, bool ok, int k, double lhs, double rhs) {
    InvariantResult& inv = get(name);
    ++inv.checked;
    if (!ok) {
      if (inv.failed == 0) {
        std::ostringstream os;
        os.precision(17);
        os << "k=" << k << " lhs=" << lhs << " rhs=" << rhs;
        inv.first_failure = os.str();
      }
      ++inv.failed;
    }
  }
  VerifyReport report;
};

bool close_rel(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

VerifyReport verify_trace(const RunTrace& trace) {
  Checker c;
  const RunHeader& h = trace.header;
  const auto& recs = trace.records;
  const int p = h.p;
  const double H = h.H;
  const bool opt = h.has_optimum();
  const double slack = default_tolerances().invariant_slack;
  // Register the always-present names so that an empty trace still reports them.
  for (const char* n : {"descent", "A_monotone", "coefficient_replay", "certificate_replay", "estimating_upper",
                        "residual_bound", "best_residual_monotone"})
    c.get(n);
  if (recs.empty()) {
    c.check("trace_nonempty", false, 0, 0.0, 1.0);
    return c.report;
  }
  c.check("initial_record", recs[0].k == 0 && recs[0].A == 0.0 && recs[0].B_cert == 0.0, 0, recs[0].A, 0.0);

  const CoefficientRule rule = coefficient_rule(h.mode, h.beta, h.coef_factor);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const IterationRecord& r = recs[i];
    const int k = r.k;
    c.check("record_index", k == static_cast<int>(i), k, k, static_cast<double>(i));

    const double ub_tol = 1e-8 * (1.0 + std::abs(r.psi_star));
    c.check("estimating_upper", r.A * r.F_val + r.B_cert <= r.psi_star + ub_tol, k, r.A * r.F_val + r.B_cert,
            r.psi_star);
    if (opt && known(h.R0)) {
      const double rhs = r.A * h.F_star + 0.5 * h.R0 * h.R0;
      c.check("estimating_lower", r.psi_at_xstar <= rhs + 1e-8 * (1.0 + std::abs(rhs)), k, r.psi_at_xstar, rhs);
    }
    if (known(r.gap_cert)) {
      const double cert_tol = 1e-12 * (1.0 + std::abs(r.F_val));
      if (opt) {
        c.check("certificate_sound", r.F_gap >= -cert_tol && r.F_gap <= r.gap_cert + cert_tol, k, r.F_gap,
                r.gap_cert);
      }
      if (known(h.R) && r.A > 0.0 && (!opt || h.R >= h.R0))
        c.check("certificate_bound", r.gap_cert <= h.R * h.R / (2.0 * r.A) + 1e-9, k, r.gap_cert,
                h.R * h.R / (2.0 * r.A));
    }
    if (opt) {
      const double dtol = 1e-9 * (1.0 + h.D_star);
      if (known(h.D0)) c.check("distance_upsilon_x", r.dist_upsilon_x <= h.D0 + dtol, k, r.dist_upsilon_x, h.D0);
      c.check("distance_x_xstar", r.dist_x_xstar <= h.D_star + dtol, k, r.dist_x_xstar, h.D_star);
      c.check("distance_upsilon_xstar", r.dist_upsilon_xstar <= h.D_star + dtol, k, r.dist_upsilon_xstar, h.D_star);
    }
    for (const AcceptedSummary& a : r.accepted) {
      std::optional<std::pair<double, double>> dists;
      if (known(a.dist_T_xstar)) dists = std::make_pair(a.dist_T_xstar, a.dist_anchor_xstar);
      const LemmaReport lr = check_lemma_scalars(H, p, a.beta, a.r, a.grad_F_norm, a.inner, dists);
      for (const LemmaCheck& lc : lr.checks)
        if (lc.applicable) c.check("lemma_" + lc.name, lc.pass, k, lc.lhs, lc.rhs);
      c.check("acceptance", a.reg_grad_norm <= a.beta * a.grad_F_norm + acceptance_slack(a.beta * a.grad_F_norm), k,
              a.reg_grad_norm, a.beta * a.grad_F_norm);
    }
    if (i == 0) continue;

    const IterationRecord& q = recs[i - 1];
    const double ftol = slack * (1.0 + std::abs(q.F_val));
    c.check("descent", r.F_val <= r.model_prev + ftol && r.model_prev <= q.F_val + ftol, k, r.F_val,
            std::min(r.model_prev, q.F_val));
    c.check("A_monotone", r.A >= q.A, k, r.A, q.A);
    if (r.branch == Branch::optimal) {
      c.check("coefficient_replay", r.A == q.A && r.g_k == 0.0, k, r.A, q.A);
    } else {
      const double target = coefficient_target(rule, H, p, r.g_k);
      const bool ok_a = close_rel(r.A - q.A, r.a, 1e-9);
      const bool ok_c = r.A > 0.0 && close_rel(r.a * r.a / r.A, target, 1e-9);
      c.check("coefficient_replay", ok_a && ok_c, k, r.a * r.a / r.A, target);
      const double incr = certificate_increment(rule, H, p, r.A, r.g_k);
      c.check("certificate_replay", close_rel(r.B_cert, q.B_cert + incr, 1e-9), k, r.B_cert, q.B_cert + incr);
      if (h.mode != Mode::exact) {
        const double dec = 0.5 * std::pow((1.0 - h.beta) / H, 1.0 / p) * std::pow(r.g_k, (p + 1.0) / p);
        c.check("model_decrease", r.model_prev >= r.F_val + dec - ftol, k, r.model_prev, r.F_val + dec);
      }
    }
    const double rb = r.branch == Branch::case_iii ? 2.0 * r.g_k : r.g_k;
    c.check("residual_bound", r.residual <= rb * (1.0 + 1e-12) + 1e-300, k, r.residual, rb);
    c.check("best_residual_monotone", r.best_residual <= q.best_residual || !known(q.best_residual), k,
            r.best_residual, q.best_residual);
    if (opt && known(h.R0) && h.R0 > 0.0 && r.branch != Branch::optimal) {
      const double bound = h.mode == Mode::exact ? exact_rate_bound(p, H, h.R0, k)
                                                 : inexact_rate_bound(p, H, h.R0, h.beta, k);
      c.check("rate_bound", r.F_gap <= bound, k, r.F_gap, bound);
      if (h.mode == Mode::exact) {
        const double lower =
            std::pow(0.25, (p + 1.0) / 2.0) / H * std::pow(h.R0, -(p - 1.0)) * std::pow(k, (3.0 * p + 1.0) / 2.0);
        c.check("A_growth", r.A >= lower * (1.0 - 1e-12), k, r.A, lower);
      }
    }
  }

  // Summability of the residual powers, tail by tail.
  if (opt && h.mode != Mode::exact) {
    std::vector<double> tail(recs.size() + 1, 0.0);
    for (std::size_t i = recs.size(); i-- > 1;)
      tail[i] = tail[i + 1] + std::pow(recs[i].g_k, (p + 1.0) / p);
    const double factor = 2.0 * std::pow(H / (1.0 - h.beta), 1.0 / p);
    for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
      const double rhs = factor * recs[i].F_gap + slack * (1.0 + std::abs(recs[i].F_val)) * factor;
      c.check("summability", tail[i + 1] <= rhs, recs[i].k, tail[i + 1], rhs);
    }
  }

  // Bisection counts against the a-priori bound, with ε the smallest gap
  // F(T) - F* among the points generated in that iteration. The bound says
  // nothing once some T is already optimal, so such events are skipped.
  if (opt && known(h.D_star) && h.mode != Mode::exact) {
    for (const auto& r : recs) {
      if (r.branch != Branch::case_iii) continue;
      double eps = kInf;
      for (const auto& a : r.accepted) eps = std::min(eps, a.F_gap);
      if (!(eps > 0.0) || !std::isfinite(eps)) continue;
      const double bound = bisection_bound(p, H, h.D_star, h.beta, eps);
      c.check("bisection_bound", r.bisections <= bound, r.k, r.bisections, bound);
    }
  }
  return c.report;
}

}  // namespace biopt
