#include "biopt/bench.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace biopt {
namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double get_num(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(std::string("corrupt trace: missing field '") + key + "'");
  const json& v = j.at(key);
  if (v.is_null()) return kNaN;
  if (!v.is_number()) throw Error(std::string("corrupt trace: field '") + key + "' is not a number");
  return v.get<double>();
}

int get_int(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    throw Error(std::string("corrupt trace: missing integer field '") + key + "'");
  return j.at(key).get<int>();
}

std::string get_str(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw Error(std::string("corrupt trace: missing string field '") + key + "'");
  return j.at(key).get<std::string>();
}

json header_to_json(const RunHeader& h) {
  json j;
  j["type"] = "header";
  j["instance"] = h.instance;
  j["mode"] = mode_name(h.mode);
  j["p"] = h.p;
  j["beta"] = h.beta;
  j["H"] = h.H;
  j["L"] = h.L;
  j["coef_factor"] = h.coef_factor;
  j["dim"] = h.dim;
  j["budget"] = h.budget;
  j["epsilon"] = h.epsilon;
  j["stop"] = stop_name(h.stop);
  j["R"] = num(h.R);
  j["R0"] = num(h.R0);
  j["F_star"] = num(h.F_star);
  j["D_star"] = num(h.D_star);
  j["D0"] = num(h.D0);
  j["seed"] = h.seed;
  return j;
}

RunHeader header_from_json(const json& j) {
  RunHeader h;
  h.instance = get_str(j, "instance");
  h.mode = parse_mode(get_str(j, "mode"));
  h.p = get_int(j, "p");
  h.beta = get_num(j, "beta");
  h.H = get_num(j, "H");
  h.L = get_num(j, "L");
  h.coef_factor = get_num(j, "coef_factor");
  h.dim = get_int(j, "dim");
  h.budget = get_int(j, "budget");
  h.epsilon = get_num(j, "epsilon");
  h.stop = parse_stop(get_str(j, "stop"));
  h.R = get_num(j, "R");
  h.R0 = get_num(j, "R0");
  h.F_star = get_num(j, "F_star");
  h.D_star = get_num(j, "D_star");
  h.D0 = get_num(j, "D0");
  h.seed = static_cast<unsigned>(get_int(j, "seed"));
  return h;
}

json record_to_json(const IterationRecord& r) {
  json j;
  j["type"] = "iter";
  j["k"] = r.k;
  j["F_val"] = num(r.F_val);
  j["F_gap"] = num(r.F_gap);
  j["A"] = r.A;
  j["a"] = r.a;
  j["B_cert"] = r.B_cert;
  j["g_k"] = r.g_k;
  j["branch"] = branch_label(r.branch);
  j["tau"] = num(r.tau);
  j["tau1"] = num(r.tau1);
  j["tau2"] = num(r.tau2);
  j["alpha"] = num(r.alpha);
  j["bisections"] = r.bisections;
  j["lower_iters"] = r.lower_iters;
  j["gap_cert"] = num(r.gap_cert);
  j["residual"] = num(r.residual);
  j["best_residual"] = num(r.best_residual);
  j["psi_star"] = num(r.psi_star);
  j["psi_at_xstar"] = num(r.psi_at_xstar);
  j["model_prev"] = num(r.model_prev);
  j["dist_upsilon_x"] = num(r.dist_upsilon_x);
  j["dist_x_xstar"] = num(r.dist_x_xstar);
  j["dist_upsilon_xstar"] = num(r.dist_upsilon_xstar);
  json acc = json::array();
  for (const AcceptedSummary& a : r.accepted) {
    acc.push_back({{"beta", a.beta},
                   {"r", a.r},
                   {"grad_F_norm", a.grad_F_norm},
                   {"reg_grad_norm", a.reg_grad_norm},
                   {"inner", a.inner},
                   {"dist_T_xstar", num(a.dist_T_xstar)},
                   {"dist_anchor_xstar", num(a.dist_anchor_xstar)},
                   {"F_gap", num(a.F_gap)}});
  }
  j["accepted"] = acc;
  return j;
}

IterationRecord record_from_json(const json& j) {
  IterationRecord r;
  r.k = get_int(j, "k");
  r.F_val = get_num(j, "F_val");
  r.F_gap = get_num(j, "F_gap");
  r.A = get_num(j, "A");
  r.a = get_num(j, "a");
  r.B_cert = get_num(j, "B_cert");
  r.g_k = get_num(j, "g_k");
  r.branch = parse_branch(get_str(j, "branch"));
  r.tau = get_num(j, "tau");
  r.tau1 = get_num(j, "tau1");
  r.tau2 = get_num(j, "tau2");
  r.alpha = get_num(j, "alpha");
  r.bisections = get_int(j, "bisections");
  r.lower_iters = get_int(j, "lower_iters");
  r.gap_cert = get_num(j, "gap_cert");
  r.residual = get_num(j, "residual");
  r.best_residual = get_num(j, "best_residual");
  r.psi_star = get_num(j, "psi_star");
  r.psi_at_xstar = get_num(j, "psi_at_xstar");
  r.model_prev = get_num(j, "model_prev");
  r.dist_upsilon_x = get_num(j, "dist_upsilon_x");
  r.dist_x_xstar = get_num(j, "dist_x_xstar");
  r.dist_upsilon_xstar = get_num(j, "dist_upsilon_xstar");
  if (!j.contains("accepted") || !j.at("accepted").is_array())
    throw Error("corrupt trace: missing array field 'accepted'");
  for (const json& a : j.at("accepted")) {
    AcceptedSummary s;
    s.beta = get_num(a, "beta");
    s.r = get_num(a, "r");
    s.grad_F_norm = get_num(a, "grad_F_norm");
    s.reg_grad_norm = get_num(a, "reg_grad_norm");
    s.inner = get_num(a, "inner");
    s.dist_T_xstar = get_num(a, "dist_T_xstar");
    s.dist_anchor_xstar = get_num(a, "dist_anchor_xstar");
    s.F_gap = get_num(a, "F_gap");
    r.accepted.push_back(s);
  }
  return r;
}

std::optional<double> opt_num(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number()) throw Error(std::string("config field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

struct RunOutcome {
  int code = kExitOk;
  std::string out, err;
};

RunOutcome run_one(const std::string& path) {
  RunOutcome res;
  std::ostringstream out, err;
  ExperimentConfig cfg;
  ProblemInstance inst{"", Metric(1), nullptr, SimpleOracle::zero(1), std::nullopt, Point()};
  try {
    cfg = load_config(path);
    apply_seed_override(cfg);
    inst = make_instance(cfg);
    validate_config(inst, cfg.run);
  } catch (const std::exception& e) {
    err << "error: " << path << ": " << e.what() << "\n";
    res.code = kExitUsage;
    res.err = err.str();
    return res;
  }
  try {
    const RunTrace trace = run(inst, cfg.run, cfg.seed);
    if (!cfg.trace_path.empty()) {
      std::ofstream f(cfg.trace_path);
      if (!f) throw Error("cannot write trace file " + cfg.trace_path);
      write_ndjson(trace, f);
    }
    if (!cfg.csv_path.empty()) {
      std::ofstream f(cfg.csv_path);
      if (!f) throw Error("cannot write csv file " + cfg.csv_path);
      write_csv(trace, f);
    }
    const VerifyReport rep = verify_trace(trace);
    long lower = 0, bis = 0;
    for (const auto& r : trace.records) {
      lower += r.lower_iters;
      bis += r.bisections;
    }
    const IterationRecord& last = trace.records.back();
    out << std::setprecision(6) << "instance=" << inst.name << " mode=" << mode_name(cfg.run.mode)
        << " p=" << cfg.run.p << " status=" << trace.status << " iterations=" << last.k
        << " final_gap=" << (std::isfinite(last.F_gap) ? last.F_gap : last.gap_cert) << " gap_cert=" << last.gap_cert
        << " lower_iters=" << lower << " bisections=" << bis << " invariants=" << (rep.all_pass() ? "pass" : "FAIL")
        << "\n";
    if (!rep.all_pass()) {
      for (const auto& inv : rep.invariants)
        if (inv.failed > 0)
          err << "invariant " << inv.name << " failed " << inv.failed << "/" << inv.checked << " (first: "
              << inv.first_failure << ")\n";
      res.code = kExitSolver;
    }
  } catch (const SolverError& e) {
    err << "solver failure: " << path << ": " << e.what();
    if (!e.history().empty()) {
      err << " (last residuals:";
      const auto& h = e.history();
      for (std::size_t i = h.size() > 5 ? h.size() - 5 : 0; i < h.size(); ++i) err << " " << h[i];
      err << ")";
    }
    err << "\n";
    res.code = kExitSolver;
  } catch (const std::exception& e) {
    err << "solver failure: " << path << ": " << e.what() << "\n";
    res.code = kExitSolver;
  }
  res.out = out.str();
  res.err = err.str();
  return res;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("config must be a JSON object");
  static const std::set<std::string> allowed = {
      "instance", "instance_file", "mode",     "p",        "beta",        "H",           "M_next",
      "budget",   "epsilon",       "R",        "stop",     "coef_factor", "seed",        "trace",
      "csv",      "lower_outer",   "lower_inner", "max_bisections", "x0"};
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw Error("unknown config key '" + key + "'");

  ExperimentConfig cfg;
  try {
    cfg.instance = j.value("instance", std::string());
    cfg.instance_file = j.value("instance_file", std::string());
    if (cfg.instance.empty() == cfg.instance_file.empty())
      throw Error("config needs exactly one of 'instance' or 'instance_file'");
    RunConfig& rc = cfg.run;
    if (j.contains("mode")) rc.mode = parse_mode(j.at("mode").get<std::string>());
    rc.p = j.value("p", rc.p);
    rc.beta = j.value("beta", rc.beta);
    rc.H = opt_num(j, "H");
    rc.M_next = opt_num(j, "M_next");
    rc.budget = j.value("budget", rc.budget);
    rc.epsilon = j.value("epsilon", rc.epsilon);
    rc.R = opt_num(j, "R");
    if (j.contains("stop")) rc.stop = parse_stop(j.at("stop").get<std::string>());
    rc.coef_factor = j.value("coef_factor", rc.coef_factor);
    rc.lower.outer = j.value("lower_outer", rc.lower.outer);
    rc.lower.inner = j.value("lower_inner", rc.lower.inner);
    rc.segment.max_bisections = j.value("max_bisections", rc.segment.max_bisections);
    if (j.contains("x0")) {
      const auto v = j.at("x0").get<std::vector<double>>();
      rc.x0 = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    cfg.seed = j.value("seed", 0u);
    cfg.trace_path = j.value("trace", std::string());
    cfg.csv_path = j.value("csv", std::string());
  } catch (const json::exception& e) {
    throw Error(std::string("ill-typed config value: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

void apply_seed_override(ExperimentConfig& cfg) {
  const char* env = std::getenv("BIOPT_SEED");
  if (!env || !*env) return;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0') throw Error(std::string("BIOPT_SEED is not an unsigned integer: ") + env);
  cfg.seed = static_cast<unsigned>(v);
}

ProblemInstance make_instance(const ExperimentConfig& cfg) {
  if (!cfg.instance.empty()) return builtin_instance(cfg.instance, cfg.seed);
  return load_instance(cfg.instance_file);
}

void write_ndjson(const RunTrace& trace, std::ostream& os) {
  os << header_to_json(trace.header).dump() << "\n";
  for (const auto& r : trace.records) os << record_to_json(r).dump() << "\n";
  json s;
  s["type"] = "summary";
  s["status"] = trace.status;
  s["iterations"] = trace.records.empty() ? 0 : trace.records.back().k;
  os << s.dump() << "\n";
}

RunTrace read_ndjson(std::istream& is) {
  RunTrace t;
  std::string line;
  bool have_header = false, have_summary = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw Error("corrupt trace: line " + std::to_string(lineno) + " is not JSON");
    }
    try {
      const std::string type = get_str(j, "type");
      if (type == "header") {
        if (have_header) throw Error("corrupt trace: duplicate header");
        t.header = header_from_json(j);
        have_header = true;
      } else if (type == "iter") {
        if (!have_header) throw Error("corrupt trace: record before header");
        t.records.push_back(record_from_json(j));
      } else if (type == "summary") {
        t.status = get_str(j, "status");
        have_summary = true;
      } else {
        throw Error("corrupt trace: unknown line type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw Error("corrupt trace: line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      const std::string msg = e.what();
      if (msg.rfind("corrupt trace", 0) == 0) throw;
      throw Error("corrupt trace: line " + std::to_string(lineno) + ": " + msg);
    }
  }
  if (!have_header) throw Error("corrupt trace: no header line");
  if (!have_summary) throw Error("corrupt trace: no summary line");
  return t;
}

RunTrace read_ndjson_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open trace file " + path);
  return read_ndjson(f);
}

void write_csv(const RunTrace& trace, std::ostream& os) {
  os << "k,F_gap,A,g_k,branch,bisections,lower_iters\n";
  os << std::setprecision(17);
  for (const auto& r : trace.records) {
    os << r.k << ',';
    if (std::isfinite(r.F_gap)) os << r.F_gap;
    os << ',' << r.A << ',' << r.g_k << ',' << branch_label(r.branch) << ',' << r.bisections << ','
       << r.lower_iters << '\n';
  }
}

RateFit rate_fit(const std::vector<std::pair<int, double>>& k_gap, int k_min, int k_max) {
  if (k_min < 1 || k_max < k_min) throw Error("rate fit needs 1 <= kmin <= kmax");
  RateFit fit;
  std::vector<double> xs, ys;
  for (const auto& [k, gap] : k_gap) {
    if (k < k_min || k > k_max) continue;
    if (!std::isfinite(gap)) throw Error("rate fit needs a known optimal value (gap missing at k=" +
                                         std::to_string(k) + ")");
    if (gap <= 1e-14) {
      fit.warnings.push_back("gap underflow at k=" + std::to_string(k) + "; range truncated");
      break;
    }
    xs.push_back(std::log(static_cast<double>(k)));
    ys.push_back(std::log(gap));
  }
  fit.points = static_cast<int>(xs.size());
  if (fit.points < 10)
    throw Error("rate fit needs at least 10 points in range, found " + std::to_string(fit.points));
  const double n = fit.points;
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < fit.points; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < fit.points; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

RateFit rate_fit(const RunTrace& trace, int k_min, int k_max) {
  std::vector<std::pair<int, double>> pts;
  for (const auto& r : trace.records) pts.emplace_back(r.k, r.F_gap);
  return rate_fit(pts, k_min, k_max);
}

int cmd_run(const std::vector<std::string>& config_paths, int jobs, std::ostream& out, std::ostream& err) {
  if (config_paths.empty()) {
    err << "error: no config given\n";
    return kExitUsage;
  }
  if (jobs < 1) {
    err << "error: --jobs must be >= 1\n";
    return kExitUsage;
  }
  std::vector<RunOutcome> results(config_paths.size());
  if (jobs == 1) {
    for (std::size_t i = 0; i < config_paths.size(); ++i) results[i] = run_one(config_paths[i]);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= config_paths.size()) return;
          i = next++;
        }
        results[i] = run_one(config_paths[i]);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  int code = kExitOk;
  for (const auto& r : results) {
    out << r.out;
    err << r.err;
    code = std::max(code, r.code);
  }
  return code;
}

int cmd_rate_fit(const std::string& trace_path, int k_min, int k_max, std::ostream& out, std::ostream& err) {
  RunTrace trace;
  try {
    trace = read_ndjson_file(trace_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    const RateFit fit = rate_fit(trace, k_min, k_max);
    for (const auto& w : fit.warnings) err << "warning: " << w << "\n";
    out << std::setprecision(10) << "slope=" << fit.slope << " intercept=" << fit.intercept
        << " points=" << fit.points << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

int cmd_verify(const std::string& trace_path, std::ostream& out, std::ostream& err) {
  RunTrace trace;
  try {
    trace = read_ndjson_file(trace_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  VerifyReport rep;
  try {
    rep = verify_trace(trace);
  } catch (const std::exception& e) {
    err << "error: corrupt trace: " << e.what() << "\n";
    return kExitUsage;
  }
  json j;
  j["pass"] = rep.all_pass();
  json inv = json::array();
  for (const auto& r : rep.invariants)
    inv.push_back({{"name", r.name},
                   {"checked", r.checked},
                   {"failed", r.failed},
                   {"pass", r.failed == 0},
                   {"first_failure", r.first_failure}});
  j["invariants"] = inv;
  out << j.dump(2) << "\n";
  return rep.all_pass() ? kExitOk : kExitSolver;
}

}  // namespace biopt
