#pragma once

#include "biopt/lower_level.hpp"
#include "biopt/segment_search.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace biopt {

enum class Mode { exact, inexact, superfast };
enum class Branch { initial, exact, case_i, case_ii, case_iii, optimal };
enum class StopRule { gap, A_threshold, budget };

std::string mode_name(Mode m);
Mode parse_mode(const std::string& s);
std::string branch_label(Branch b);
Branch parse_branch(const std::string& s);
std::string stop_name(StopRule s);
StopRule parse_stop(const std::string& s);

/// Ψ_k(x) = ½‖x - x0‖² + ⟨s, x⟩ + constant + A ψ(x), plus the iterates.
struct EstimatingState {
  Point x0;
  Dual s;
  double constant = 0.0;
  double A = 0.0;
  double B_cert = 0.0;
  Point upsilon;
  Point x;
};

EstimatingState initial_state(const Point& x0);

/// argmin Ψ_k, computed as scaled_prox(A, x0 - B⁻¹s).
Point estimating_min(const Metric& metric, const EstimatingState& state, const SimpleOracle& psi);

double estimating_value(const ProblemInstance& inst, const EstimatingState& state, const Point& x);

/// F(x_k) minus a certified lower bound on the minimum of the averaged
/// linear model over the ball ‖x - x0‖ ≤ R.
double gap_certificate(const ProblemInstance& inst, const EstimatingState& state, double R);

/// One linear piece of the model used in an update: weight·ℓ_T.
struct ModelPiece {
  double weight;
  Point T;
  double f_value;
  Dual grad_f;
};

/// Step coefficient factor and certificate increment for each driver.
struct CoefficientRule {
  double c_factor;    // a²/A_{k+1} = c_factor · (scale/H)^{1/p} g^{(1-p)/p}
  double b_factor;    // B_{k+1} - B_k = b_factor · (scale/H)^{1/p} A_{k+1} g^{(p+1)/p}
  double scale;       // 1 for the exact driver, 1 - β otherwise
};

CoefficientRule coefficient_rule(Mode mode, double beta, double coef_factor);
double coefficient_target(const CoefficientRule& rule, double H, int p, double g);
double certificate_increment(const CoefficientRule& rule, double H, int p, double A_next, double g);

struct AcceptedSummary {
  double beta = 0.0;
  double r = 0.0;
  double grad_F_norm = 0.0;
  double reg_grad_norm = 0.0;
  double inner = 0.0;
  double dist_T_xstar = std::numeric_limits<double>::quiet_NaN();
  double dist_anchor_xstar = std::numeric_limits<double>::quiet_NaN();
  double F_gap = std::numeric_limits<double>::quiet_NaN();  // F(T) - F*
};

struct IterationRecord {
  int k = 0;
  double F_val = 0.0;
  double F_gap = std::numeric_limits<double>::quiet_NaN();
  double A = 0.0;
  double a = 0.0;
  double B_cert = 0.0;
  double g_k = 0.0;
  Branch branch = Branch::initial;
  double tau = std::numeric_limits<double>::quiet_NaN();
  double tau1 = std::numeric_limits<double>::quiet_NaN();
  double tau2 = std::numeric_limits<double>::quiet_NaN();
  double alpha = std::numeric_limits<double>::quiet_NaN();
  int bisections = 0;
  int lower_iters = 0;
  double gap_cert = std::numeric_limits<double>::quiet_NaN();
  double residual = std::numeric_limits<double>::quiet_NaN();
  double best_residual = std::numeric_limits<double>::quiet_NaN();
  double psi_star = 0.0;
  double psi_at_xstar = std::numeric_limits<double>::quiet_NaN();
  double model_prev = std::numeric_limits<double>::quiet_NaN();  // 𝓛_{k-1}(x_{k-1})
  double dist_upsilon_x = 0.0;
  double dist_x_xstar = std::numeric_limits<double>::quiet_NaN();
  double dist_upsilon_xstar = std::numeric_limits<double>::quiet_NaN();
  std::vector<AcceptedSummary> accepted;
};

struct StepOutcome {
  EstimatingState state;
  IterationRecord record;
  bool optimal = false;
  std::vector<AcceptedPoint> accepted;
};

using SproxOracle = std::function<SproxResult(const Point& xbar, const Point& u)>;

/// One iteration of the exact segment-search method.
StepOutcome step_exact(const EstimatingState& state, const ProblemInstance& inst, double H, int p,
                       const SproxOracle& sprox);

/// One iteration of the inexact segment-search method (three-case logic).
StepOutcome step_inexact(const EstimatingState& state, const ProblemInstance& inst, double H, int p, double beta,
                         double coef_factor, const AcceptanceOracle& oracle, const SegmentCaps& caps = {});

struct RunConfig {
  Mode mode = Mode::superfast;
  int p = 3;
  double beta = 0.0;
  std::optional<double> H;
  std::optional<double> M_next;
  int budget = 100;
  double epsilon = 1e-10;
  std::optional<double> R;
  StopRule stop = StopRule::gap;
  double coef_factor = 0.25;
  LowerCaps lower;
  SegmentCaps segment;
  std::optional<Point> x0;
};

/// Run-level constants needed to replay the trace checks.
struct RunHeader {
  std::string instance;
  Mode mode = Mode::superfast;
  int p = 3;
  double beta = 0.0;
  double H = 0.0;
  double L = 1.5;
  double coef_factor = 0.25;
  int dim = 0;
  int budget = 0;
  double epsilon = 0.0;
  StopRule stop = StopRule::gap;
  double R = std::numeric_limits<double>::quiet_NaN();
  double R0 = std::numeric_limits<double>::quiet_NaN();
  double F_star = std::numeric_limits<double>::quiet_NaN();
  double D_star = std::numeric_limits<double>::quiet_NaN();
  double D0 = std::numeric_limits<double>::quiet_NaN();
  unsigned seed = 0;
  bool has_optimum() const { return F_star == F_star; }
};

struct RunTrace {
  RunHeader header;
  std::vector<IterationRecord> records;
  std::string status;
};

/// Checks the configuration and fills in derived parameters (H for the
/// superfast driver); throws Error with a user-facing message.
RunHeader validate_config(const ProblemInstance& inst, const RunConfig& cfg);

RunTrace run(const ProblemInstance& inst, const RunConfig& cfg, unsigned seed = 0);

/// Upper bounds on the radii of the initial level set around x* and x0.
std::pair<double, double> level_set_radii(const ProblemInstance& inst, const Point& x0, const Point& x_star);

struct InvariantResult {
  std::string name;
  int checked = 0;
  int failed = 0;
  std::string first_failure;
};

struct VerifyReport {
  std::vector<InvariantResult> invariants;
  bool all_pass() const;
  const InvariantResult* find(const std::string& name) const;
};

/// Replays every per-iteration and trace-wide invariant from the scalars
/// stored in the trace.
VerifyReport verify_trace(const RunTrace& trace);

/// Worst-case bounds on F(x_k) - F* and on the bisection count.
double exact_rate_bound(int p, double H, double R0, int k);
double inexact_rate_bound(int p, double H, double R0, double beta, int k);
double bisection_bound(int p, double H, double D_star, double beta, double eps);

}  // namespace biopt
