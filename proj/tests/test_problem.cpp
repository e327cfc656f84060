#include "biopt/composite.hpp"
#include "biopt/problem.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

using namespace biopt;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Central difference of a scalar function along coordinate j.
template <class Fn>
double central(Fn fn, const Point& x, int j, double h) {
  Point xp = x, xm = x;
  xp(j) += h;
  xm(j) -= h;
  return (fn(xp) - fn(xm)) / (2 * h);
}

ProblemInstance small_separable(Family fam, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  Matrix rows(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) rows(i, j) = nd(rng);
  Vector b(4);
  for (int i = 0; i < 4; ++i) b(i) = fam == Family::log_barrier ? -3.0 - std::abs(nd(rng)) : nd(rng);
  return build_separable(rows, b, fam, SimpleOracle::zero(3));
}

}  // namespace

TEST(SimpleOracle, ValuesAndDomains) {
  const SimpleOracle z = SimpleOracle::zero(2);
  EXPECT_EQ(z.value(vec({3, -4})), 0.0);
  const SimpleOracle l1 = SimpleOracle::l1(2, 0.5);
  EXPECT_DOUBLE_EQ(l1.value(vec({3, -4})), 3.5);
  const SimpleOracle box = SimpleOracle::box(vec({0, 0}), vec({1, 1}));
  EXPECT_EQ(box.value(vec({0.5, 1.0})), 0.0);
  EXPECT_TRUE(std::isinf(box.value(vec({0.5, 1.1}))));
  EXPECT_FALSE(box.in_domain(vec({-0.1, 0.5})));
  EXPECT_EQ(box.project_to_domain(vec({-1, 2})), vec({0, 1}));
  EXPECT_THROW(SimpleOracle::box(vec({1}), vec({0})), Error);
  EXPECT_THROW(SimpleOracle::l1(2, -1.0), Error);
}

TEST(SimpleOracle, SoftThresholdProx) {
  const SimpleOracle l1 = SimpleOracle::l1(3, 1.0);
  const Point x = l1.scaled_prox(Metric(3), 2.0, vec({3.0, -0.5, -5.0}));
  EXPECT_EQ(x, vec({1.0, 0.0, -3.0}));
}

TEST(SimpleOracle, ScaledProxMinimizesInNonIdentityMetric) {
  // Compare against random perturbations of the returned point.
  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  Matrix B(3, 3);
  B << 2, 0.5, 0.1, 0.5, 1.5, -0.3, 0.1, -0.3, 1.0;
  const Metric m(B);
  for (const SimpleOracle& psi :
       {SimpleOracle::l1(3, 0.7), SimpleOracle::box(vec({-0.2, -0.3, 0.0}), vec({0.4, 0.1, 0.5}))}) {
    const Point w = vec({1.0, -0.8, 0.9});
    const double lam = 0.6;
    auto obj = [&](const Point& x) {
      const double d = m.norm(x - w);
      return 0.5 * d * d + lam * psi.value(x);
    };
    const Point x = psi.scaled_prox(m, lam, w);
    for (int t = 0; t < 300; ++t) {
      Point y = x;
      for (int j = 0; j < 3; ++j) y(j) += 1e-3 * nd(rng);
      y = psi.project_to_domain(y);
      EXPECT_LE(obj(x), obj(y) + 1e-13);
    }
  }
}

TEST(SimpleOracle, ClampSubgradient) {
  const SimpleOracle l1 = SimpleOracle::l1(3, 1.0);
  EXPECT_EQ(l1.clamp_subgradient(vec({1, 0, -2}), vec({5, 5, 5})), vec({1, 1, -1}));
  const SimpleOracle box = SimpleOracle::box(vec({0, 0}), vec({1, 1}));
  EXPECT_EQ(box.clamp_subgradient(vec({0, 1}), vec({3, 3})), vec({0, 3}));
  EXPECT_EQ(box.clamp_subgradient(vec({0, 1}), vec({-3, -3})), vec({-3, 0}));
  EXPECT_EQ(box.clamp_subgradient(vec({0.5, 0.5}), vec({-3, 3})), vec({0, 0}));
  EXPECT_EQ(l1.subgradient_violation(vec({0, 0, 0}), vec({0.5, -1, 1})), 0.0);
  EXPECT_DOUBLE_EQ(l1.subgradient_violation(vec({1, 0, 0}), vec({0.5, 0, 0})), 0.5);
}

TEST(Quadratic, KnownOptimum) {
  Matrix Q(2, 2);
  Q << 1, 0, 0, 2;
  const ProblemInstance inst = build_quadratic(Q, vec({1, 0}), SimpleOracle::zero(2));
  ASSERT_TRUE(inst.optimum.has_value());
  EXPECT_NEAR((inst.optimum->x - vec({1, 0})).norm(), 0.0, 1e-14);
  EXPECT_NEAR(inst.optimum->F, -0.5, 1e-14);
  EXPECT_EQ(inst.smooth->M(3).value(), 0.0);
  EXPECT_NEAR(inst.smooth->M(2).value(), 2.0, 1e-14);
}

TEST(Quadratic, L1OptimumFromSolver) {
  // f = ½(x - 3)² with ψ = |x|: the minimizer is 2.
  Matrix Q(1, 1);
  Q << 1;
  const ProblemInstance inst = build_quadratic(Q, vec({3}), SimpleOracle::l1(1, 1.0));
  ASSERT_TRUE(inst.optimum.has_value());
  EXPECT_NEAR(inst.optimum->x(0), 2.0, 1e-12);
}

TEST(Example1d, Data) {
  const ProblemInstance inst = build_example_1d();
  EXPECT_EQ(inst.name, "example1d");
  EXPECT_EQ(inst.x0(0), 2.0);
  EXPECT_EQ(inst.optimum->x(0), 0.0);
  EXPECT_DOUBLE_EQ(inst.F(vec({-1.5})), 0.5 * 2.25 + 1.5);
}

TEST(FamilyDerivatives, LogBarrierEvenOrders) {
  // f(t) = -log t has f^{(k)}(t) = (-1)^k (k-1)!/t^k.
  EXPECT_DOUBLE_EQ(family_derivative(Family::log_barrier, 2, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(family_derivative(Family::log_barrier, 4, 1.0), 6.0);
  EXPECT_DOUBLE_EQ(family_derivative(Family::log_barrier, 3, 2.0), -2.0 / 8.0);
  EXPECT_TRUE(std::isinf(family_derivative(Family::log_barrier, 0, -1.0)));
}

TEST(FamilyDerivatives, MatchFiniteDifferences) {
  for (Family fam : {Family::log_barrier, Family::power4, Family::softplus}) {
    for (double t : {0.4, 1.3, 2.7}) {
      for (int k = 0; k < 5; ++k) {
        const double h = 1e-5;
        const double fd =
            (family_derivative(fam, k, t + h) - family_derivative(fam, k, t - h)) / (2 * h);
        const double an = family_derivative(fam, k + 1, t);
        EXPECT_NEAR(an, fd, 1e-6 * (1.0 + std::abs(an))) << family_name(fam) << " k=" << k << " t=" << t;
      }
    }
  }
}

TEST(FamilyDerivatives, SupBoundsDominateSamples) {
  for (Family fam : {Family::log_barrier, Family::power4, Family::softplus}) {
    for (int k = 1; k <= 5; ++k) {
      const double lo = 0.3, hi = 2.5;
      const double sup = family_derivative_sup(fam, k, lo, hi);
      for (int i = 0; i <= 1000; ++i) {
        const double t = lo + (hi - lo) * i / 1000.0;
        EXPECT_LE(std::abs(family_derivative(fam, k, t)), sup * (1 + 1e-12)) << family_name(fam) << " " << k;
      }
    }
  }
  EXPECT_TRUE(std::isinf(family_derivative_sup(Family::log_barrier, 3, 0.0, 1.0)));
}

TEST(Separable, GradientHessianAndEvenFormsMatchFiniteDifferences) {
  for (Family fam : {Family::log_barrier, Family::power4, Family::softplus}) {
    const ProblemInstance inst = small_separable(fam, 21);
    const SmoothOracle& f = *inst.smooth;
    std::mt19937 rng(22);
    std::normal_distribution<double> nd(0.0, 0.3);
    for (int t = 0; t < 5; ++t) {
      Point x(3), h(3);
      for (int j = 0; j < 3; ++j) {
        x(j) = nd(rng);
        h(j) = nd(rng);
      }
      ASSERT_TRUE(std::isfinite(f.value(x)));
      const Dual g = f.gradient(x);
      const Matrix Hm = f.hessian(x);
      for (int j = 0; j < 3; ++j) {
        const double e = 1e-6;
        const double fd = central([&](const Point& z) { return f.value(z); }, x, j, e);
        EXPECT_NEAR(g(j), fd, 1e-6 * (1.0 + std::abs(fd)));
        for (int i = 0; i < 3; ++i) {
          const double fdh = central([&](const Point& z) { return f.gradient(z)(i); }, x, j, e);
          EXPECT_NEAR(Hm(i, j), fdh, 1e-6 * (1.0 + std::abs(fdh)));
        }
      }
      // D²f(x)[h]² = hᵀ∇²f h, and the form gradients match differences in h.
      EXPECT_NEAR(f.even_form(x, h, 2), h.dot(Hm * h), 1e-10 * (1 + std::abs(h.dot(Hm * h))));
      for (int order : {2, 4}) {
        const Dual eg = f.even_form_grad(x, h, order);
        const Matrix eh = f.even_form_hess(x, h, order);
        for (int j = 0; j < 3; ++j) {
          const double fd = central([&](const Point& z) { return f.even_form(x, z, order); }, h, j, 1e-6);
          EXPECT_NEAR(eg(j), fd, 1e-6 * (1.0 + std::abs(fd)));
          for (int i = 0; i < 3; ++i) {
            const double fdh = central([&](const Point& z) { return f.even_form_grad(x, z, order)(i); }, h, j, 1e-6);
            EXPECT_NEAR(eh(i, j), fdh, 1e-6 * (1.0 + std::abs(fdh)));
          }
        }
      }
    }
  }
}

TEST(Separable, LogBarrierDomainErrors) {
  Matrix rows(1, 1);
  rows << 1;
  const ProblemInstance inst = build_separable(rows, vec({1.0}), Family::log_barrier, SimpleOracle::zero(1));
  EXPECT_TRUE(std::isinf(inst.smooth->value(vec({0.5}))));
  try {
    inst.smooth->gradient(vec({0.5}));
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_EQ(e.index(), 0);
  }
}

TEST(Logbar, BuiltinIsWellFormed) {
  const ProblemInstance inst = builtin_instance("logbar-10-5", 0);
  EXPECT_EQ(inst.dim(), 5);
  ASSERT_TRUE(inst.optimum.has_value());
  EXPECT_TRUE(inst.simple.in_domain(inst.x0));
  EXPECT_TRUE(std::isfinite(inst.F(inst.x0)));
  EXPECT_LE(inst.optimum->F, inst.F(inst.x0));
  // Every point of the box stays inside dom f, so the M_j bounds are finite.
  for (int j = 2; j <= 5; ++j) EXPECT_TRUE(inst.smooth->M(j).has_value());
  // Optimality: the clamped residual vanishes at x*.
  const Dual g = inst.smooth->gradient(inst.optimum->x);
  const Dual sub = inst.simple.clamp_subgradient(inst.optimum->x, -g);
  EXPECT_LT((g + sub).norm(), 1e-9);
}

TEST(Logbar, MBoundDominatesSampledHessians) {
  const ProblemInstance inst = builtin_instance("logbar-10-5", 3);
  const double M2 = inst.smooth->M(2).value();
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    Point x(5);
    for (int j = 0; j < 5; ++j) x(j) = inst.simple.lo()(j) + u(rng) * (inst.simple.hi()(j) - inst.simple.lo()(j));
    EXPECT_LE(inst.smooth->hessian(x).norm(), M2 * (1 + 1e-12));
  }
}

TEST(Builtins, NamesAndSeeds) {
  EXPECT_EQ(builtin_instance("quad-5", 1).dim(), 5);
  EXPECT_THROW(builtin_instance("nope", 0), Error);
  const ProblemInstance a = builtin_instance("quad-4", 7), b = builtin_instance("quad-4", 7);
  EXPECT_EQ(a.x0, b.x0);
  EXPECT_EQ(a.optimum->x, b.optimum->x);
}

TEST(InstanceIo, LoadsQuadraticWithBox) {
  const std::string path = ::testing::TempDir() + "biopt_instance.json";
  {
    std::ofstream f(path);
    f << R"({"family":"quadratic","Q":[[2,0],[0,1]],"c":[4,-1],"psi":{"kind":"box","lo":[-1,-1],"hi":[1,1]},
            "name":"boxed","x0":[0,0]})";
  }
  const ProblemInstance inst = load_instance(path);
  EXPECT_EQ(inst.name, "boxed");
  ASSERT_TRUE(inst.optimum.has_value());
  // Unconstrained minimizer (2, -1) clamps to (1, -1).
  EXPECT_NEAR((inst.optimum->x - vec({1, -1})).norm(), 0.0, 1e-10);
  std::remove(path.c_str());
}

TEST(InstanceIo, Errors) {
  EXPECT_THROW(load_instance("/nonexistent/instance.json"), Error);
  const std::string path = ::testing::TempDir() + "biopt_bad.json";
  {
    std::ofstream f(path);
    f << R"({"family":"cubic"})";
  }
  EXPECT_THROW(load_instance(path), Error);
  std::remove(path.c_str());
}

TEST(ProxExact, OneDimensionalClosedForm) {
  // ½x² + |x| + ½(x - 3)²: stationarity x + 1 + (x - 3) = 0 gives x = 1.
  const ProblemInstance inst = build_example_1d();
  const CompositeResult r = prox_exact(inst, vec({3.0}), 1.0, 1);
  EXPECT_NEAR(r.x(0), 1.0, 1e-12);
  EXPECT_TRUE(r.converged);
}
