#include "biopt/problem.hpp"

#include "biopt/composite.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <random>
#include <regex>

namespace biopt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// Box membership tolerates a few ulps so that convex combinations of boundary
// points are not rejected.
bool within(double v, double lo, double hi) {
  const double slack = 1e-12 * (1.0 + std::max(std::abs(lo), std::abs(hi)));
  return v >= lo - slack && v <= hi + slack;
}

class QuadraticOracle final : public SmoothOracle {
 public:
  QuadraticOracle(Matrix Q, Vector c, const Metric& metric) : Q_(std::move(Q)), c_(std::move(c)) {
    if (Q_.rows() != Q_.cols() || Q_.rows() != c_.size()) throw Error("quadratic data has inconsistent sizes");
    const Matrix C = metric.factor();
    const Matrix scaled = C.triangularView<Eigen::Lower>().solve(
        C.triangularView<Eigen::Lower>().solve(Q_).transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (scaled + scaled.transpose()));
    if (es.eigenvalues().minCoeff() < -1e-10 * (1.0 + es.eigenvalues().cwiseAbs().maxCoeff()))
      throw Error("quadratic form is not positive semidefinite");
    m2_ = es.eigenvalues().cwiseAbs().maxCoeff();
  }

  int dim() const override { return static_cast<int>(c_.size()); }
  double value(const Point& x) const override { return 0.5 * x.dot(Q_ * x) - c_.dot(x); }
  Dual gradient(const Point& x) const override { return Q_ * x - c_; }
  Matrix hessian(const Point&) const override { return Q_; }

  double even_form(const Point&, const Point& h, int order) const override {
    check_order(order);
    return order == 2 ? h.dot(Q_ * h) : 0.0;
  }
  Dual even_form_grad(const Point&, const Point& h, int order) const override {
    check_order(order);
    return order == 2 ? Dual(2.0 * (Q_ * h)) : Dual(Dual::Zero(h.size()));
  }
  Matrix even_form_hess(const Point&, const Point& h, int order) const override {
    check_order(order);
    return order == 2 ? Matrix(2.0 * Q_) : Matrix(Matrix::Zero(h.size(), h.size()));
  }
  std::optional<double> M(int order) const override {
    if (order == 2) return m2_;
    if (order >= 3) return 0.0;
    return std::nullopt;
  }

 private:
  static void check_order(int order) {
    if (order < 2 || order % 2 != 0) throw Error("even_form needs an even order >= 2");
  }
  Matrix Q_;
  Vector c_;
  double m2_ = 0.0;
};

}  // namespace

SimpleOracle SimpleOracle::zero(int dim) { return SimpleOracle(SimpleKind::none, dim); }

SimpleOracle SimpleOracle::l1(int dim, double weight) {
  if (!(weight >= 0.0)) throw Error("l1 weight must be nonnegative");
  SimpleOracle s(SimpleKind::l1, dim);
  s.weight_ = weight;
  return s;
}

SimpleOracle SimpleOracle::box(const Vector& lo, const Vector& hi) {
  if (lo.size() != hi.size() || lo.size() == 0) throw Error("box bounds have inconsistent sizes");
  if ((lo.array() > hi.array()).any()) throw Error("box has lo > hi");
  SimpleOracle s(SimpleKind::box, static_cast<int>(lo.size()));
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

double SimpleOracle::value(const Point& x) const {
  switch (kind_) {
    case SimpleKind::none:
      return 0.0;
    case SimpleKind::l1:
      return weight_ * x.lpNorm<1>();
    case SimpleKind::box:
      return in_domain(x) ? 0.0 : kInf;
  }
  return 0.0;
}

bool SimpleOracle::in_domain(const Point& x) const {
  if (!x.allFinite()) return false;
  if (kind_ != SimpleKind::box) return true;
  for (int j = 0; j < dim_; ++j)
    if (!within(x(j), lo_(j), hi_(j))) return false;
  return true;
}

Point SimpleOracle::project_to_domain(const Point& x) const {
  if (kind_ != SimpleKind::box) return x;
  return x.cwiseMax(lo_).cwiseMin(hi_);
}

double SimpleOracle::prox_1d(int j, double curvature, double center) const {
  switch (kind_) {
    case SimpleKind::none:
      return center;
    case SimpleKind::l1:
      return soft_threshold(center, weight_ / curvature);
    case SimpleKind::box:
      return std::clamp(center, lo_(j), hi_(j));
  }
  return center;
}

Point SimpleOracle::scaled_prox(const Metric& metric, double lambda, const Point& w) const {
  if (lambda < 0.0) throw Error("prox weight must be nonnegative");
  if (kind_ == SimpleKind::none || (lambda == 0.0 && kind_ == SimpleKind::l1)) return w;
  if (metric.is_identity()) {
    if (kind_ == SimpleKind::box) return project_to_domain(w);
    Point out(w.size());
    for (int j = 0; j < dim_; ++j) out(j) = soft_threshold(w(j), lambda * weight_);
    return out;
  }
  // Coordinate descent on ½‖x - w‖² + λψ(x); the objective is an exact
  // quadratic plus a separable term, so this converges to the minimizer.
  const Matrix& B = metric.matrix();
  const double curv_scale = lambda > 0.0 ? 1.0 / lambda : kInf;
  Point x = project_to_domain(w);
  Vector grad = B * (x - w);
  for (int sweep = 0; sweep < 20000; ++sweep) {
    double change = 0.0, scale = 0.0;
    for (int j = 0; j < dim_; ++j) {
      const double bjj = B(j, j);
      const double center = x(j) - grad(j) / bjj;
      const double xj = kind_ == SimpleKind::box ? std::clamp(center, lo_(j), hi_(j))
                                                 : prox_1d(j, bjj * curv_scale, center);
      const double dx = xj - x(j);
      if (dx != 0.0) {
        grad.noalias() += B.col(j) * dx;
        x(j) = xj;
      }
      change = std::max(change, std::abs(dx));
      scale = std::max(scale, std::abs(xj));
    }
    if (change <= 1e-16 * (1.0 + scale)) break;
  }
  return x;
}

Dual SimpleOracle::clamp_subgradient(const Point& x, const Dual& g) const {
  Dual out(g.size());
  for (int j = 0; j < dim_; ++j) {
    switch (kind_) {
      case SimpleKind::none:
        out(j) = 0.0;
        break;
      case SimpleKind::l1:
        if (x(j) > 0.0)
          out(j) = weight_;
        else if (x(j) < 0.0)
          out(j) = -weight_;
        else
          out(j) = std::clamp(g(j), -weight_, weight_);
        break;
      case SimpleKind::box:
        if (lo_(j) == hi_(j))
          out(j) = g(j);
        else if (x(j) <= lo_(j))
          out(j) = std::min(g(j), 0.0);
        else if (x(j) >= hi_(j))
          out(j) = std::max(g(j), 0.0);
        else
          out(j) = 0.0;
        break;
    }
  }
  return out;
}

double SimpleOracle::subgradient_violation(const Point& x, const Dual& g) const {
  if (!in_domain(x)) return kInf;
  return (g - clamp_subgradient(x, g)).lpNorm<Eigen::Infinity>();
}

double ProblemInstance::F(const Point& x) const {
  const double psi = simple.value(x);
  if (!std::isfinite(psi)) return kInf;
  return smooth->value(x) + psi;
}

Optimum solve_optimum(const ProblemInstance& inst, const Point& start) {
  const SmoothOracle& f = *inst.smooth;
  SmoothModel model{[&](const Point& x) { return f.value(x); }, [&](const Point& x) { return f.gradient(x); },
                    [&](const Point& x) { return f.hessian(x); }};
  CompositeOptions opts;
  opts.tol = 1e-14;
  opts.max_iter = 500;
  const CompositeResult res = minimize_composite(model, inst.simple, start, opts);
  if (res.residual > 1e-10 * (1.0 + f.gradient(res.x).norm()))
    throw SolverError("reference optimum did not converge", {res.residual});
  return Optimum{res.x, inst.F(res.x)};
}

ProblemInstance build_quadratic(const Matrix& Q, const Vector& c, const SimpleOracle& psi) {
  const int n = static_cast<int>(c.size());
  if (psi.dim() != n) throw Error("simple part has the wrong dimension");
  Metric metric(n);
  auto oracle = std::make_shared<QuadraticOracle>(Q, c, metric);
  ProblemInstance inst{"quadratic", metric, oracle, psi, std::nullopt, psi.project_to_domain(Point::Zero(n))};
  if (psi.kind() == SimpleKind::none) {
    Eigen::LLT<Matrix> llt(Q);
    if (llt.info() == Eigen::Success) {
      const Point xs = llt.solve(c);
      inst.optimum = Optimum{xs, -0.5 * c.dot(xs)};
    }
  } else {
    try {
      inst.optimum = solve_optimum(inst, inst.x0);
    } catch (const Error&) {
      // Leave the optimum unknown for unbounded or degenerate data.
    }
  }
  return inst;
}

ProblemInstance build_example_1d() {
  Matrix Q(1, 1);
  Q(0, 0) = 1.0;
  ProblemInstance inst = build_quadratic(Q, Vector::Zero(1), SimpleOracle::l1(1, 1.0));
  inst.name = "example1d";
  inst.optimum = Optimum{Point::Zero(1), 0.0};
  inst.x0 = Point::Constant(1, 2.0);
  return inst;
}

ProblemInstance build_quad(int d, unsigned seed) {
  if (d <= 0) throw Error("quad dimension must be positive");
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.5, 2.0);
  Matrix G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = normal(rng);
  const Matrix V = Eigen::HouseholderQR<Matrix>(G).householderQ();
  Vector lambda(d);
  for (int i = 0; i < d; ++i) lambda(i) = unif(rng);
  Matrix Q = V * lambda.asDiagonal() * V.transpose();
  Q = 0.5 * (Q + Q.transpose());
  Vector c(d);
  for (int i = 0; i < d; ++i) c(i) = normal(rng);
  ProblemInstance inst = build_quadratic(Q, c, SimpleOracle::zero(d));
  inst.name = "quad-" + std::to_string(d);
  Point x0(d);
  for (int i = 0; i < d; ++i) x0(i) = normal(rng);
  inst.x0 = x0;
  return inst;
}

ProblemInstance builtin_instance(const std::string& name, unsigned seed) {
  if (name == "example1d") return build_example_1d();
  std::smatch m;
  static const std::regex logbar(R"(logbar-(\d+)-(\d+))");
  static const std::regex quad(R"(quad-(\d+))");
  if (std::regex_match(name, m, logbar)) return build_logbar(std::stoi(m[1]), std::stoi(m[2]), seed);
  if (std::regex_match(name, m, quad)) return build_quad(std::stoi(m[1]), seed);
  throw Error("unknown builtin instance '" + name + "'");
}

}  // namespace biopt
