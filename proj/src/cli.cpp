#include "nsift/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "nsift/csv.hpp"
#include "nsift/fixtures.hpp"
#include "nsift/mpass.hpp"
#include "nsift/solve.hpp"
#include "nsift/theorems.hpp"

#ifndef NSIFT_VERSION
#define NSIFT_VERSION "unknown"
#endif

namespace nsift {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string vec_text(const Vec& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v(i));
  return s + ")";
}

double to_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw UsageError("--set " + key + ": not a number: '" + text + "'");
  return v;
}

int to_int(const std::string& key, const std::string& text) {
  const double v = to_double(key, text);
  if (v != static_cast<int>(v) || v < 0) throw UsageError("--set " + key + ": expected a nonnegative integer");
  return static_cast<int>(v);
}

struct Tuning {
  SolveOptions solve;
  RankOptions rank;
  MountainPassOptions mpass;
  AlgebraicOptions algebraic;
  ComparisonOptions compare;
  int coercivity_samples = 0;
  std::map<std::string, double> params;
};

struct Invocation {
  RunConfig cfg;
  std::optional<double> a;
  std::string mode = "outer-global";
  std::string y, from, to, target, xi;
  int samples = 41;
  bool list = false, verify = false, write = false;
  std::vector<std::string> args;
  std::string op = "setup";
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  std::ostream& o() const { return *out; }
};

Tuning make_tuning(const Invocation& inv) {
  Tuning t;
  const ExecutionContext exec =
      inv.cfg.threads > 0 ? ExecutionContext{inv.cfg.threads} : ExecutionContext::hardware();
  t.solve.seed = inv.cfg.seed;
  t.solve.exec = exec;
  t.rank.exec = exec;
  t.rank.mode = inv.mode == "pointwise" ? FamilyMode::kPointwise : FamilyMode::kOuterGlobal;
  for (const auto& [key, value] : inv.cfg.overrides) {
    if (key.rfind("param.", 0) == 0) {
      t.params[key.substr(6)] = to_double(key, value);
    } else if (key == "residual_tol") {
      t.solve.residual_tol = to_double(key, value);
    } else if (key == "stationarity_tol") {
      t.solve.stationarity_tol = to_double(key, value);
      t.mpass.stationarity_tol = t.solve.stationarity_tol;
    } else if (key == "cluster_radius") {
      t.solve.cluster_radius = to_double(key, value);
      t.mpass.cluster_radius = t.solve.cluster_radius;
    } else if (key == "multistart") {
      t.solve.multistart = to_int(key, value);
    } else if (key == "max_iterations") {
      t.solve.max_iterations = to_int(key, value);
      t.mpass.max_iterations = t.solve.max_iterations;
    } else if (key == "max_depth") {
      t.rank.max_depth = to_int(key, value);
    } else if (key == "max_leaves") {
      t.rank.max_leaves = static_cast<std::size_t>(to_int(key, value));
    } else if (key == "beads") {
      t.mpass.beads = to_int(key, value);
    } else if (key == "samples") {
      t.coercivity_samples = to_int(key, value);
    } else if (key == "y_samples") {
      t.compare.y_samples = to_int(key, value);
    } else if (key == "profile_samples") {
      t.compare.profile_samples = to_int(key, value);
    } else {
      throw UsageError("--set: unknown key '" + key + "'");
    }
  }
  if (inv.a) t.params["a"] = *inv.a;
  t.mpass.seed = inv.cfg.seed;
  t.mpass.exec = exec;
  t.algebraic.rank = t.rank;
  t.algebraic.coercivity_samples = t.coercivity_samples;
  t.algebraic.growth_samples = t.coercivity_samples;
  t.compare.rank = t.rank;
  t.compare.solve = t.solve;
  t.compare.coercivity_samples = t.coercivity_samples;
  t.compare.seed = inv.cfg.seed;
  t.compare.exec = exec;
  return t;
}

std::filesystem::path out_path(const Invocation& inv, const std::string& file) {
  return std::filesystem::path(inv.cfg.out_dir) / file;
}

void write_out(const Invocation& inv, const std::string& file, const std::string& text) {
  write_text_file(out_path(inv, file).string(), text);
}

void write_manifest(const Invocation& inv, const Tuning& t, const ProblemDef* p) {
  std::ostringstream m;
  m << "toolkit=nsift\n";
  m << "version=" << NSIFT_VERSION << "\n";
  m << "subcommand=" << inv.cfg.subcommand << "\n";
  m << "problem=" << inv.cfg.problem << "\n";
  if (p) {
    m << "problem_name=" << p->name << "\n";
    for (const auto& [k, v] : p->params) m << "param." << k << "=" << csv_number(v) << "\n";
  }
  m << "seed=" << inv.cfg.seed << "\n";
  m << "threads=" << t.solve.exec.threads << "\n";
  m << "mode=" << inv.mode << "\n";
  m << "out=" << inv.cfg.out_dir << "\n";
  m << "verbosity=" << inv.cfg.verbosity << "\n";
  for (const auto& [k, v] : inv.cfg.overrides) m << "set." << k << "=" << v << "\n";
  if (!inv.y.empty()) m << "y=" << inv.y << "\n";
  if (!inv.from.empty()) m << "from=" << inv.from << "\n";
  if (!inv.to.empty()) m << "to=" << inv.to << "\n";
  if (!inv.target.empty()) m << "target=" << inv.target << "\n";
  if (!inv.xi.empty()) m << "xi=" << inv.xi << "\n";
  if (inv.cfg.subcommand == "atlas") m << "samples=" << inv.samples << "\n";
  std::string cmd;
  for (const auto& a : inv.args) cmd += (cmd.empty() ? "" : " ") + a;
  m << "command=" << cmd << "\n";
  write_out(inv, "manifest.txt", m.str());
}

Vec vector_arg(const std::string& flag, const std::string& text, int dim) {
  Vec v;
  try {
    v = parse_vector(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(flag + ": " + e.what());
  }
  if (v.size() != dim) {
    throw UsageError(flag + ": expected " + std::to_string(dim) + " components, got " + std::to_string(v.size()));
  }
  return v;
}

Vec y_arg(const Invocation& inv, const ProblemDef& p) {
  if (p.m == 0) {
    if (!inv.y.empty()) throw UsageError("--y: the problem has no y variables");
    return Vec(0);
  }
  if (inv.y.empty()) throw UsageError("--y is required (the problem has " + std::to_string(p.m) + " y variables)");
  return vector_arg("--y", inv.y, p.m);
}

std::string rank_text(const RankCertificate& r) {
  std::ostringstream s;
  s << "rank: " << to_string(r.verdict) << " (" << to_string(r.mode) << " family)\n";
  s << "  det range [" << num(r.det_range.lo()) << ", " << num(r.det_range.hi()) << "], " << r.leaves.size()
    << " leaves, depth " << r.depth << "\n";
  if (r.verdict == RankVerdict::kMaximalRank) s << "  |det| >= " << num(r.det_lower_bound) << " on every leaf\n";
  if (r.witness_x) {
    s << "  singular member at x = " << vec_text(*r.witness_x);
    if (r.witness_y && r.witness_y->size()) s << ", y = " << vec_text(*r.witness_y);
    if (r.witness_t && r.witness_t->size()) s << ", t = " << vec_text(*r.witness_t);
    s << ", det = " << num(r.witness_det) << "\n";
  }
  return s.str();
}

std::string coercivity_text(const CoercivityReport& c) {
  std::ostringstream s;
  s << "coercivity: " << to_string(c.verdict) << " (sampled; evidence, not proof)\n";
  for (std::size_t i = 0; i < c.radii.size(); ++i) {
    s << "  r = " << num(c.radii[i]) << "  inf = " << num(c.infima[i]) << "\n";
  }
  s << "  fitted exponent " << num(c.fit.exponent) << "\n";
  if (c.witness_direction) s << "  bounded along " << vec_text(*c.witness_direction) << "\n";
  return s.str();
}

std::string checklist_text(const AlgebraicChecklist& c) {
  std::ostringstream s;
  const auto& sp = c.spectral;
  s << "A1: " << (sp.a1_holds ? "holds" : "fails") << "\n";
  s << "  eigenvalues of A^T A:";
  for (Eigen::Index i = 0; i < sp.eigenvalues.size(); ++i) s << " " << num(sp.eigenvalues(i));
  s << "\n  det A = " << num(sp.det_A) << ", det A^T A = " << num(sp.det_AtA) << "\n";
  const auto& g = c.growth;
  s << "growth: a_est = " << num(g.a_est) << ", b_est = " << num(g.b_est) << ", gamma = " << num(g.gamma_fit)
    << ", theta = " << num(g.theta_fit) << "\n";
  s << "  linear upper " << (g.linear_upper_ok ? "ok" : "no") << ", sublinear " << (g.sublinear_ok ? "ok" : "no")
    << ", linear lower " << (g.linear_lower_ok ? "ok" : "no") << ", superlinear "
    << (g.superlinear_ok ? "ok" : "no") << "\n";
  s << rank_text(c.rank);
  s << coercivity_text(c.coercivity);
  s << "route: " << c.route << "\n";
  return s.str();
}

std::string roots_text(const RootSet& s) {
  std::ostringstream o;
  o << "audit: " << to_string(s.audit) << " (" << s.converged_starts << "/" << s.starts << " starts converged)\n";
  for (const Root& r : s.roots) {
    o << "  root " << vec_text(r.x) << "  residual " << num(r.residual) << "  basin " << r.basin_count << "\n";
  }
  for (const StationaryNonroot& r : s.stationary_nonroots) {
    o << "  stationary nonroot " << vec_text(r.x) << "  residual " << num(r.residual) << "  sigma_min "
      << num(r.min_vertex_sigma) << "\n";
  }
  return o.str();
}

int cmd_check(Invocation& inv, const ProblemDef& p, const Tuning& t) {
  std::string text;
  int code = kExitOk;
  if (p.A) {
    inv.op = "algebraic_checklist";
    const Vec xi = inv.xi.empty() ? p.xi.value_or(Vec::Zero(p.n)) : vector_arg("--xi", inv.xi, p.n);
    const AlgebraicChecklist c = algebraic_checklist(p, xi, t.solve, t.algebraic);
    text = checklist_text(c);
    if (c.route == "none") code = kExitHypothesisFailure;
  } else {
    Vec y = Vec::Zero(p.m);
    if (p.m) {
      const Box xy = p.xy_box();
      if (inv.y.empty()) {
        for (int j = 0; j < p.m; ++j) y(j) = xy[p.n + j].mid();
      } else {
        y = y_arg(inv, p);
      }
    }
    inv.op = "rank_certificate";
    const RankCertificate r = rank_certificate(p, p.xy_box(), t.rank);
    inv.op = "coercivity_probe";
    const ScalarFn phi = [&p, y](const Vec& x) { return 0.5 * eval(p, x, y).squaredNorm(); };
    const CoercivityReport c = coercivity_probe(phi, p.n, {}, t.coercivity_samples, mix_seed(inv.cfg.seed, 2),
                                                t.solve.exec);
    text = rank_text(r) + (p.m ? "coercivity of 1/2 |F(x, y)|^2 at y = " + vec_text(y) + "\n" : "") +
           coercivity_text(c);
    if (r.verdict == RankVerdict::kRankDeficientWitness || c.verdict == CoercivityVerdict::kNonCoerciveWitness) {
      code = kExitHypothesisFailure;
    }
  }
  write_out(inv, "certificates.txt", text);
  inv.o() << text;
  return code;
}

int cmd_solve(Invocation& inv, const ProblemDef& p, const Tuning& t) {
  const Vec y = y_arg(inv, p);
  inv.op = "find_roots";
  const RootSet s = find_roots(p, y, t.solve);
  emit_plot_data(s, out_path(inv, "roots.csv").string());
  const std::string text = roots_text(s);
  write_out(inv, "report.txt", text);
  inv.o() << text;
  return s.audit == AuditVerdict::kUnique ? kExitOk : kExitHypothesisFailure;
}

int cmd_atlas(Invocation& inv, const ProblemDef& p, const Tuning& t) {
  if (p.m == 0) throw UsageError("atlas: the problem has no y variables");
  if (inv.from.empty() || inv.to.empty()) throw UsageError("atlas: --from and --to are required");
  if (inv.samples < 2) throw UsageError("atlas: --samples must be at least 2");
  const Vec from = vector_arg("--from", inv.from, p.m);
  const Vec to = vector_arg("--to", inv.to, p.m);
  inv.op = "implicit_atlas";
  const Atlas a = implicit_atlas(p, y_segment(from, to, inv.samples), t.solve);
  emit_plot_data(a, out_path(inv, "atlas.csv").string());
  double worst = 0.0;
  for (const auto& e : a.entries) worst = std::max(worst, e.root.residual);
  std::ostringstream o;
  o << "atlas: " << a.entries.size() << " samples, " << a.breaks << " continuity breaks, max residual "
    << num(worst) << "\n";
  write_out(inv, "report.txt", o.str());
  inv.o() << o.str();
  return a.breaks == 0 ? kExitOk : kExitHypothesisFailure;
}

int cmd_invert(Invocation& inv, const ProblemDef& p, const Tuning& t) {
  if (p.m != 0) throw UsageError("invert: expects a pure map (m = 0)");
  if (inv.target.empty()) throw UsageError("invert: --target is required");
  const Vec target = vector_arg("--target", inv.target, p.n);
  inv.op = "invert";
  const ProblemDef g = with_target(p);
  const RootSet s = find_roots(g, target, t.solve);
  emit_plot_data(s, out_path(inv, "roots.csv").string());
  const std::string text = roots_text(s);
  write_out(inv, "report.txt", text);
  inv.o() << text;
  return s.audit == AuditVerdict::kUnique ? kExitOk : kExitHypothesisFailure;
}

int cmd_algebraic(Invocation& inv, const ProblemDef& p, const Tuning& t) {
  if (!p.A) throw UsageError("algebraic: the problem declares no matrix A");
  const Vec xi = inv.xi.empty() ? p.xi.value_or(Vec::Zero(p.n)) : vector_arg("--xi", inv.xi, p.n);
  inv.op = "solve_algebraic";
  const AlgebraicResult r = solve_algebraic(p, xi, t.solve, t.algebraic);
  emit_plot_data(r.roots, out_path(inv, "roots.csv").string());
  const std::string text = checklist_text(r.checklist) + roots_text(r.roots) + "claim: " + r.claim + "\n";
  write_out(inv, "checklist.txt", text);
  inv.o() << text;
  return r.root ? kExitOk : kExitHypothesisFailure;
}

int cmd_mpass(Invocation& inv, const ProblemDef& p, const Tuning& t) {
  const Vec y = y_arg(inv, p);
  MountainPassOptions mp = t.mpass;
  mp.record_history = true;
  inv.op = "mountain_pass";
  const UniquenessProbe probe = probe_uniqueness(p, y, t.solve, mp, t.rank);
  emit_plot_data(probe.roots, out_path(inv, "roots.csv").string());
  if (!probe.saddle) {
    throw UsageError("mountain_pass: precondition violated: " + std::to_string(probe.roots.roots.size()) +
                     " root(s) found, two are needed");
  }
  const SaddleEstimate& s = *probe.saddle;
  emit_plot_data(s.history, out_path(inv, "path.csv").string());
  std::ostringstream o;
  o << "roots: x1 = " << vec_text(*probe.x1) << ", x2 = " << vec_text(*probe.x2) << "\n";
  if (probe.ring) {
    o << "ring: rho = " << num(probe.ring->rho) << ", inf = " << num(probe.ring->value) << " (around x2)\n";
  } else {
    o << "ring: none above the endpoint values at the sampled radii\n";
  }
  o << "saddle: " << to_string(s.verdict) << " at " << vec_text(s.v) << ", c = " << num(s.c) << ", stationarity "
    << num(s.stationarity) << ", " << s.iterations << " iterations\n";
  o << rank_text(*probe.rank);
  if (probe.contradiction) {
    o << "CONTRADICTION: a saddle above zero between two roots inside a maximal-rank box\n";
  }
  write_out(inv, "saddle.txt", o.str());
  inv.o() << o.str();
  return probe.contradiction ? kExitHypothesisFailure : kExitOk;
}

int cmd_compare(Invocation& inv, const ProblemDef& p, const Tuning& t) {
  if (p.m != 0) throw UsageError("compare: expects a pure map (m = 0)");
  inv.op = "compare_conditions";
  const ComparisonReport r = compare_conditions(p, t.compare);
  emit_plot_data(r.pourciau, out_path(inv, "pourciau.csv").string());
  emit_plot_data(r.hadamard_levy, out_path(inv, "hadamard_levy.csv").string());
  const std::string text = format_table(r);
  write_out(inv, "comparison.txt", text);
  inv.o() << text;
  return kExitOk;
}

int cmd_fixtures(Invocation& inv, const Tuning& t) {
  if (inv.write) {
    for (const auto& name : fixture_names()) write_out(inv, name + ".prob", *fixture_text(name));
  }
  if (inv.verify) {
    inv.op = "verify_fixtures";
    const auto checks = verify_fixtures(inv.cfg.seed, t.solve.exec);
    std::ostringstream o;
    bool all = true;
    for (const auto& c : checks) {
      all = all && c.passed;
      o << (c.passed ? "PASS " : "FAIL ") << c.fixture << " " << c.check << ": " << c.detail << "\n";
    }
    write_out(inv, "verify.txt", o.str());
    inv.o() << o.str();
    return all ? kExitOk : kExitHypothesisFailure;
  }
  if (inv.list || !inv.write) {
    for (const auto& name : fixture_names()) inv.o() << name << "\n";
  }
  return kExitOk;
}

int dispatch(Invocation& inv) {
  const Tuning t = make_tuning(inv);
  const bool fixtures = inv.cfg.subcommand == "fixtures";
  // A bare listing only prints; nothing to record.
  if (fixtures && !inv.write && !inv.verify) return cmd_fixtures(inv, t);
  std::filesystem::create_directories(inv.cfg.out_dir);
  if (fixtures) {
    write_manifest(inv, t, nullptr);
    return cmd_fixtures(inv, t);
  }
  inv.op = "parse";
  const ProblemDef p = load_problem(inv.cfg.problem, t.params);
  write_manifest(inv, t, &p);
  inv.op = "arguments";
  const std::string& sub = inv.cfg.subcommand;
  if (sub == "check") return cmd_check(inv, p, t);
  if (sub == "solve") return cmd_solve(inv, p, t);
  if (sub == "atlas") return cmd_atlas(inv, p, t);
  if (sub == "invert") return cmd_invert(inv, p, t);
  if (sub == "algebraic") return cmd_algebraic(inv, p, t);
  if (sub == "mpass") return cmd_mpass(inv, p, t);
  if (sub == "compare") return cmd_compare(inv, p, t);
  throw UsageError("unknown subcommand " + sub);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Invocation inv;
  inv.args = args;
  inv.out = &out;
  inv.err = &err;
  std::vector<std::string> sets;

  CLI::App app{"Global implicit functions and inversion for piecewise-smooth maps", "nsift"};
  app.set_version_flag("--version", NSIFT_VERSION);
  app.require_subcommand(1);
  app.add_option("--out", inv.cfg.out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed", inv.cfg.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--threads", inv.cfg.threads, "Worker threads (0: hardware)")->check(CLI::NonNegativeNumber);
  app.add_option("--set", sets, "Override key=value (tolerances, budgets, param.NAME)");
  app.add_option("--a", inv.a, "Value of the parameter a");
  app.add_option("--mode", inv.mode, "Jacobian family over boxes")
      ->check(CLI::IsMember({"pointwise", "outer-global"}))
      ->capture_default_str();
  app.add_flag("-v,--verbose", inv.cfg.verbosity, "More output");

  auto with_problem = [&](CLI::App* sub) {
    sub->add_option("problem", inv.cfg.problem, "Problem file or bundled fixture name")->required();
    sub->fallthrough();
    return sub;
  };
  auto* check = with_problem(app.add_subcommand("check", "Certificates for the theorem hypotheses"));
  check->add_option("--y", inv.y, "Parameter y for the coercivity probe");
  check->add_option("--xi", inv.xi, "Right-hand side xi (algebraic problems)");
  auto* solve = with_problem(app.add_subcommand("solve", "Roots of F(., y) with a uniqueness audit"));
  solve->add_option("--y", inv.y, "Parameter y, comma separated");
  auto* atlas = with_problem(app.add_subcommand("atlas", "Implicit function along a y segment"));
  atlas->add_option("--from", inv.from, "Segment start")->required();
  atlas->add_option("--to", inv.to, "Segment end")->required();
  atlas->add_option("--samples", inv.samples, "Number of samples")->capture_default_str();
  auto* invert = with_problem(app.add_subcommand("invert", "Solve f(x) = target"));
  invert->add_option("--target", inv.target, "Target value")->required();
  auto* algebraic = with_problem(app.add_subcommand("algebraic", "Solve A x = F(x) + xi"));
  algebraic->add_option("--xi", inv.xi, "Right-hand side (default: from the file)");
  auto* mpass = with_problem(app.add_subcommand("mpass", "Mountain-pass probe between two roots"));
  mpass->add_option("--y", inv.y, "Parameter y, comma separated");
  with_problem(app.add_subcommand("compare", "Compare global inversion conditions"));
  auto* fixtures = app.add_subcommand("fixtures", "Bundled example problems");
  fixtures->fallthrough();
  fixtures->add_flag("--list", inv.list, "List bundled fixtures");
  fixtures->add_flag("--verify", inv.verify, "Run every fixture against its expected verdicts");
  fixtures->add_flag("--write", inv.write, "Write the fixture files into the output directory");

  std::vector<const char*> argv{"nsift"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  inv.cfg.subcommand = app.get_subcommands().front()->get_name();
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      err << "nsift: --set expects key=value, got '" << s << "'\n";
      return kExitUsage;
    }
    inv.cfg.overrides[s.substr(0, eq)] = s.substr(eq + 1);
  }

  const std::string where = "nsift " + inv.cfg.subcommand + ": error in ";
  try {
    return dispatch(inv);
  } catch (const UsageError& e) {
    err << where << inv.op << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << where << inv.op << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << where << inv.op << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const RootAuditError& e) {
    err << where << inv.op << ": " << e.what() << "\n";
    return kExitHypothesisFailure;
  } catch (const std::exception& e) {
    err << where << inv.op << ": " << e.what() << "\n";
    return kExitNumeric;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace nsift
