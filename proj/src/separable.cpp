#include "biopt/problem.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace biopt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Softplus derivatives are polynomials in σ = 1/(1+e^{-t}):
// P_1(σ) = σ and P_{j+1}(σ) = P_j'(σ) σ(1-σ).
const std::vector<std::vector<double>>& softplus_polys() {
  static const std::vector<std::vector<double>> polys = [] {
    std::vector<std::vector<double>> out(1);
    out.push_back({0.0, 1.0});
    for (int j = 1; j < 12; ++j) {
      const auto& P = out.back();
      std::vector<double> dP(P.size() > 1 ? P.size() - 1 : 1, 0.0);
      for (size_t k = 1; k < P.size(); ++k) dP[k - 1] = k * P[k];
      std::vector<double> next(dP.size() + 2, 0.0);
      for (size_t k = 0; k < dP.size(); ++k) {
        next[k + 1] += dP[k];
        next[k + 2] -= dP[k];
      }
      out.push_back(next);
    }
    return out;
  }();
  return polys;
}

double poly_eval(const std::vector<double>& P, double s) {
  double v = 0.0;
  for (size_t k = P.size(); k-- > 0;) v = v * s + P[k];
  return v;
}

double sigmoid(double t) { return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

class SeparableOracle final : public SmoothOracle {
 public:
  SeparableOracle(Matrix rows, Vector b, Family family, const Metric& metric, Vector t_lo, Vector t_hi)
      : A_(std::move(rows)), b_(std::move(b)), family_(family), t_lo_(std::move(t_lo)), t_hi_(std::move(t_hi)) {
    if (A_.rows() != b_.size()) throw Error("separable data: rows and b differ in length");
    row_dual_norm_.resize(A_.rows());
    for (int i = 0; i < A_.rows(); ++i) row_dual_norm_(i) = metric.dual_norm(A_.row(i).transpose());
  }

  int dim() const override { return static_cast<int>(A_.cols()); }

  double value(const Point& x) const override {
    const Vector t = A_ * x - b_;
    double v = 0.0;
    for (int i = 0; i < t.size(); ++i) {
      if (family_ == Family::log_barrier && !(t(i) > 0.0)) return kInf;
      v += family_derivative(family_, 0, t(i));
    }
    return v;
  }

  Dual gradient(const Point& x) const override { return A_.transpose() * derivs(args(x), 1); }

  Matrix hessian(const Point& x) const override {
    const Vector w = derivs(args(x), 2);
    return A_.transpose() * w.asDiagonal() * A_;
  }

  double even_form(const Point& y, const Point& h, int order) const override {
    check_order(order);
    const Vector w = derivs(args(y), order);
    const Vector s = A_ * h;
    return (w.array() * s.array().pow(order)).sum();
  }

  Dual even_form_grad(const Point& y, const Point& h, int order) const override {
    check_order(order);
    const Vector w = derivs(args(y), order);
    const Vector s = A_ * h;
    const Vector coef = order * (w.array() * s.array().pow(order - 1)).matrix();
    return A_.transpose() * coef;
  }

  Matrix even_form_hess(const Point& y, const Point& h, int order) const override {
    check_order(order);
    const Vector w = derivs(args(y), order);
    const Vector s = A_ * h;
    const Vector coef = (order * (order - 1)) * (w.array() * s.array().pow(order - 2)).matrix();
    return A_.transpose() * coef.asDiagonal() * A_;
  }

  std::optional<double> M(int order) const override {
    if (order < 1) return std::nullopt;
    double total = 0.0;
    for (int i = 0; i < A_.rows(); ++i) {
      const double sup = family_derivative_sup(family_, order, t_lo_(i), t_hi_(i));
      if (!std::isfinite(sup)) return std::nullopt;
      total += sup * std::pow(row_dual_norm_(i), order);
    }
    return total;
  }

 private:
  static void check_order(int order) {
    if (order < 2 || order % 2 != 0) throw Error("even_form needs an even order >= 2");
  }

  Vector args(const Point& x) const {
    Vector t = A_ * x - b_;
    if (family_ == Family::log_barrier) {
      for (int i = 0; i < t.size(); ++i) {
        if (!(t(i) > 0.0)) {
          std::ostringstream os;
          os << "log argument " << t(i) << " is not positive";
          throw DomainError(i, os.str());
        }
      }
    }
    return t;
  }

  Vector derivs(const Vector& t, int order) const {
    Vector out(t.size());
    for (int i = 0; i < t.size(); ++i) out(i) = family_derivative(family_, order, t(i));
    return out;
  }

  Matrix A_;
  Vector b_;
  Family family_;
  Vector t_lo_, t_hi_;
  Vector row_dual_norm_;
};

}  // namespace

Family parse_family(const std::string& name) {
  if (name == "log_barrier") return Family::log_barrier;
  if (name == "power4") return Family::power4;
  if (name == "softplus") return Family::softplus;
  throw Error("unknown separable family '" + name + "'");
}

std::string family_name(Family family) {
  switch (family) {
    case Family::log_barrier:
      return "log_barrier";
    case Family::power4:
      return "power4";
    case Family::softplus:
      return "softplus";
  }
  return "?";
}

double family_derivative(Family family, int order, double t) {
  if (order < 0) throw Error("negative derivative order");
  switch (family) {
    case Family::log_barrier: {
      if (!(t > 0.0)) return order == 0 ? kInf : std::numeric_limits<double>::quiet_NaN();
      if (order == 0) return -std::log(t);
      const double sign = order % 2 == 0 ? 1.0 : -1.0;
      return sign * factorial(order - 1) / std::pow(t, order);
    }
    case Family::power4:
      switch (order) {
        case 0:
          return std::pow(t, 4) / 12.0;
        case 1:
          return t * t * t / 3.0;
        case 2:
          return t * t;
        case 3:
          return 2.0 * t;
        case 4:
          return 2.0;
        default:
          return 0.0;
      }
    case Family::softplus: {
      if (order == 0) return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
      const auto& polys = softplus_polys();
      if (order >= static_cast<int>(polys.size())) throw Error("softplus derivative order too high");
      return poly_eval(polys[order], sigmoid(t));
    }
  }
  return 0.0;
}

double family_derivative_sup(Family family, int order, double lo, double hi) {
  if (lo > hi) throw Error("empty interval");
  switch (family) {
    case Family::log_barrier:
      if (order == 0 || !(lo > 0.0)) return kInf;
      return factorial(order - 1) / std::pow(lo, order);
    case Family::power4: {
      if (order >= 4) return order == 4 ? 2.0 : 0.0;
      const double m = std::max(std::abs(lo), std::abs(hi));
      if (!std::isfinite(m)) return kInf;
      return std::abs(family_derivative(family, order, m));
    }
    case Family::softplus: {
      if (order == 0) return std::isfinite(hi) ? family_derivative(family, 0, hi) : kInf;
      const auto& P = softplus_polys().at(order);
      const double s_lo = std::isfinite(lo) ? sigmoid(lo) : (lo < 0 ? 0.0 : 1.0);
      const double s_hi = std::isfinite(hi) ? sigmoid(hi) : (hi < 0 ? 0.0 : 1.0);
      // Grid maximum plus a Lipschitz correction makes this a true upper bound.
      double lip = 0.0;
      for (size_t k = 1; k < P.size(); ++k) lip += k * std::abs(P[k]);
      const int n = 4000;
      const double step = (s_hi - s_lo) / n;
      double best = 0.0;
      for (int i = 0; i <= n; ++i) best = std::max(best, std::abs(poly_eval(P, s_lo + i * step)));
      return best + 0.5 * lip * step;
    }
  }
  return kInf;
}

ProblemInstance build_separable(const Matrix& rows, const Vector& b, Family family, const SimpleOracle& psi,
                                std::optional<std::pair<Vector, Vector>> operating_box) {
  const int n = static_cast<int>(rows.cols());
  if (psi.dim() != n) throw Error("simple part has the wrong dimension");
  if (!operating_box && psi.kind() == SimpleKind::box) operating_box = std::make_pair(psi.lo(), psi.hi());
  const int N = static_cast<int>(rows.rows());
  Vector t_lo = Vector::Constant(N, -kInf), t_hi = Vector::Constant(N, kInf);
  if (operating_box) {
    const auto& [lo, hi] = *operating_box;
    for (int i = 0; i < N; ++i) {
      double a = 0.0, c = 0.0;
      for (int j = 0; j < n; ++j) {
        const double u = rows(i, j) * lo(j), v = rows(i, j) * hi(j);
        a += std::min(u, v);
        c += std::max(u, v);
      }
      t_lo(i) = a - b(i);
      t_hi(i) = c - b(i);
    }
  }
  Metric metric(n);
  auto oracle = std::make_shared<SeparableOracle>(rows, b, family, metric, t_lo, t_hi);
  return ProblemInstance{"separable-" + family_name(family), metric, oracle, psi, std::nullopt,
                         psi.project_to_domain(Point::Zero(n))};
}

ProblemInstance build_logbar(int N, int d, unsigned seed) {
  if (N < 2 || d < 1) throw Error("logbar needs N >= 2 rows and d >= 1");
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> width(0.5, 1.5);

  // Half of the rows are negated copies of the other half, so every row
  // direction is capped from both sides and f is bounded below.
  Matrix rows(N, d);
  const int half = N / 2;
  for (int i = 0; i < half; ++i) {
    Vector g(d);
    for (int j = 0; j < d; ++j) g(j) = normal(rng);
    g /= g.norm();
    rows.row(i) = g.transpose();
    rows.row(i + half) = -g.transpose();
  }
  if (N % 2 == 1) {
    Vector g(d);
    for (int j = 0; j < d; ++j) g(j) = normal(rng);
    rows.row(N - 1) = (g / g.norm()).transpose();
  }

  const Vector e = Vector::Ones(d);
  Vector s(N), b(N);
  for (int i = 0; i < N; ++i) {
    s(i) = width(rng);
    b(i) = rows.row(i).dot(e) - s(i);
  }
  double delta = kInf;
  for (int i = 0; i < N; ++i) delta = std::min(delta, 0.5 * s(i) / rows.row(i).lpNorm<1>());

  const SimpleOracle psi = SimpleOracle::box(e.array() - delta, e.array() + delta);
  ProblemInstance inst = build_separable(rows, b, Family::log_barrier, psi);
  inst.name = "logbar-" + std::to_string(N) + "-" + std::to_string(d);
  Point x0(d);
  for (int j = 0; j < d; ++j) x0(j) = 1.0 + (normal(rng) >= 0 ? 0.9 : -0.9) * delta;
  inst.x0 = x0;
  inst.optimum = solve_optimum(inst, e);
  return inst;
}

}  // namespace biopt
