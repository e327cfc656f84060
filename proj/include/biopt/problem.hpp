#pragma once

#include "biopt/numerics.hpp"

#include <memory>
#include <optional>
#include <string>

namespace biopt {

/// Smooth convex part f. value() is extended-valued (+inf outside dom f);
/// every derivative oracle throws DomainError outside the domain.
class SmoothOracle {
 public:
  virtual ~SmoothOracle() = default;

  virtual int dim() const = 0;
  virtual double value(const Point& x) const = 0;
  virtual Dual gradient(const Point& x) const = 0;
  virtual Matrix hessian(const Point& x) const = 0;

  /// D^{2k}f(y)[h]^{2k}.
  virtual double even_form(const Point& y, const Point& h, int order) const = 0;
  /// h-gradient of even_form: 2k D^{2k}f(y)[h]^{2k-1}.
  virtual Dual even_form_grad(const Point& y, const Point& h, int order) const = 0;
  /// h-Hessian of even_form.
  virtual Matrix even_form_hess(const Point& y, const Point& h, int order) const = 0;

  /// Uniform bound on ‖D^j f‖ over the operating region, if one is known.
  virtual std::optional<double> M(int order) const = 0;
};

enum class SimpleKind { none, l1, box };

/// Separable simple part ψ: zero, a weighted ℓ1 norm, or a box indicator.
class SimpleOracle {
 public:
  static SimpleOracle zero(int dim);
  static SimpleOracle l1(int dim, double weight);
  static SimpleOracle box(const Vector& lo, const Vector& hi);

  SimpleKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double weight() const { return weight_; }
  const Vector& lo() const { return lo_; }
  const Vector& hi() const { return hi_; }

  double value(const Point& x) const;
  bool in_domain(const Point& x) const;
  Point project_to_domain(const Point& x) const;

  /// argmin_t ½ curvature (t - center)² + ψ_j(t), the coordinate prox.
  double prox_1d(int j, double curvature, double center) const;

  /// argmin_x ½‖x - w‖² + λψ(x) in the metric norm.
  Point scaled_prox(const Metric& metric, double lambda, const Point& w) const;

  /// Nearest element of ∂ψ(x) to g, coordinatewise.
  Dual clamp_subgradient(const Point& x, const Dual& g) const;

  /// Coordinatewise distance from g to ∂ψ(x) (infinity norm).
  double subgradient_violation(const Point& x, const Dual& g) const;

 private:
  SimpleOracle(SimpleKind kind, int dim) : kind_(kind), dim_(dim) {}

  SimpleKind kind_;
  int dim_;
  double weight_ = 0.0;
  Vector lo_, hi_;
};

struct Optimum {
  Point x;
  double F = 0.0;
};

struct ProblemInstance {
  std::string name;
  Metric metric;
  std::shared_ptr<const SmoothOracle> smooth;
  SimpleOracle simple;
  std::optional<Optimum> optimum;
  Point x0;

  int dim() const { return metric.dim(); }
  double F(const Point& x) const;
};

enum class Family { log_barrier, power4, softplus };

Family parse_family(const std::string& name);
std::string family_name(Family family);

/// Scalar derivative f_i^{(order)}(t) of a separable family member.
double family_derivative(Family family, int order, double t);

/// sup |f_i^{(order)}| over t in [lo, hi]; infinite when unbounded.
double family_derivative_sup(Family family, int order, double lo, double hi);

/// f(x) = Σ f_i(⟨a_i, x⟩ - b_i). The operating box (if any) bounds x for the
/// M_j estimates; it defaults to the box of ψ when ψ is a box indicator.
ProblemInstance build_separable(const Matrix& rows, const Vector& b, Family family, const SimpleOracle& psi,
                                std::optional<std::pair<Vector, Vector>> operating_box = std::nullopt);

/// f(x) = ½x², ψ(x) = |x|.
ProblemInstance build_example_1d();

/// f(x) = ½⟨Qx, x⟩ - ⟨c, x⟩.
ProblemInstance build_quadratic(const Matrix& Q, const Vector& c, const SimpleOracle& psi);

/// Random log-barrier instance with N rows in dimension d, bounded by a box.
ProblemInstance build_logbar(int N, int d, unsigned seed);

/// Random strongly convex quadratic in dimension d with ψ = 0.
ProblemInstance build_quad(int d, unsigned seed);

/// Names: "example1d", "logbar-N-d", "quad-d".
ProblemInstance builtin_instance(const std::string& name, unsigned seed);

/// JSON instance description; see README for the schema.
ProblemInstance load_instance(const std::string& path);

/// Minimizer of F by composite Newton, started from a point of dom F.
Optimum solve_optimum(const ProblemInstance& inst, const Point& start);

}  // namespace biopt
