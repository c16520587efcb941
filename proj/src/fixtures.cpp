#include "nsift/fixtures.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nsift/mpass.hpp"
#include "nsift/solve.hpp"
#include "nsift/theorems.hpp"

namespace nsift {

namespace detail {
const std::map<std::string, std::string>& bundled_fixture_texts();
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt_vec(const Vec& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v(i));
  return s + ")";
}

class Checks {
 public:
  explicit Checks(std::vector<FixtureCheck>& out) : out_(out) {}
  void add(const std::string& fixture, const std::string& check, bool ok, const std::string& detail) {
    out_.push_back({fixture, check, ok, detail});
  }

 private:
  std::vector<FixtureCheck>& out_;
};

void verify_algebraic(const std::string& name, bool expect_a1, const std::string& route, Checks& c,
                      const SolveOptions& so) {
  const ProblemDef p = load_problem(name);
  const AlgebraicResult r = solve_algebraic(p, p.xi.value_or(Vec::Zero(p.n)), so);
  const auto& ck = r.checklist;
  c.add(name, "A1", ck.spectral.a1_holds == expect_a1,
        "eigenvalues of A^T A " + fmt(ck.spectral.eigenvalues(0)) + ", " + fmt(ck.spectral.eigenvalues(1)) +
            ", det A = " + fmt(ck.spectral.det_A));
  c.add(name, "rank", ck.rank.verdict == RankVerdict::kMaximalRank,
        std::string(to_string(ck.rank.verdict)) + ", |det| >= " + fmt(ck.rank.det_lower_bound));
  c.add(name, "coercivity", ck.coercivity.verdict == CoercivityVerdict::kCoerciveEvidence,
        to_string(ck.coercivity.verdict));
  c.add(name, "route", ck.route == route, ck.route);
  const bool root_ok = r.root && r.root->x.norm() <= 1e-8 && r.root->residual <= 1e-9;
  c.add(name, "unique-root", root_ok,
        std::string(to_string(r.roots.audit)) + (r.root ? " at " + fmt_vec(r.root->x) : std::string()));
}

}  // namespace

std::vector<std::string> fixture_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : detail::bundled_fixture_texts()) out.push_back(name);
  return out;
}

std::optional<std::string> fixture_text(const std::string& name) {
  const auto& all = detail::bundled_fixture_texts();
  const auto it = all.find(name);
  if (it == all.end()) return std::nullopt;
  return it->second;
}

ProblemDef load_problem(const std::string& path, const std::map<std::string, double>& overrides) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(path)) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_problem(ss.str(), overrides);
  }
  const fs::path fp(path);
  std::string stem = fp.stem().string();
  if (fp.has_extension() && fp.extension() != ".prob") stem.clear();
  if (auto text = fixture_text(stem)) return parse_problem(*text, overrides);
  throw std::invalid_argument("no such problem file: " + path);
}

std::vector<FixtureCheck> verify_fixtures(std::uint64_t seed, const ExecutionContext& exec) {
  std::vector<FixtureCheck> out;
  Checks c(out);
  SolveOptions so;
  so.seed = seed;
  so.exec = exec;

  verify_algebraic("example1", true, "large-growth", c, so);
  verify_algebraic("example2", false, "corollary", c, so);

  for (double a : {-0.5, 0.0, 0.5}) {
    const std::string name = "fa(a=" + fmt(a) + ")";
    const ProblemDef p = load_problem("fa", {{"a", a}});
    ComparisonOptions co;
    co.seed = seed;
    co.exec = exec;
    co.solve = so;
    const ComparisonReport r = compare_conditions(p, co);
    const bool det_ok = r.rank.det_range.lo() >= 1.0 - std::abs(a) - 1e-12 &&
                        r.rank.det_range.hi() <= 1.0 + std::abs(a) + 1e-12;
    c.add(name, "rank", r.rank.verdict == RankVerdict::kMaximalRank && det_ok,
          std::string(to_string(r.rank.verdict)) + ", det in [" + fmt(r.rank.det_range.lo()) + ", " +
              fmt(r.rank.det_range.hi()) + "]");
    for (const auto& row : r.rows) {
      if (row.name == "hadamard-palais" || row.name == "inversion-audit") c.add(name, row.name, row.holds, row.verdict);
    }
    const double pexp = r.pourciau.fit.exponent;
    c.add(name, "pourciau", r.pourciau.verdict == ProfileVerdict::kConvergesLikely && pexp >= -2.3 && pexp <= -1.7,
          std::string(to_string(r.pourciau.verdict)) + ", exponent " + fmt(pexp));
  }

  {
    const ProblemDef p = load_problem("cubic");
    const Root r = implicit_eval(p, Vec::Constant(1, 2.0), so);
    c.add("cubic", "implicit-eval", std::abs(r.x(0) - 1.0) <= 1e-8, "x(2) = " + fmt(r.x(0)));
    const Atlas at = implicit_atlas(p, y_segment(Vec::Constant(1, -2.0), Vec::Constant(1, 2.0), 41), so);
    c.add("cubic", "atlas", at.breaks == 0 && at.entries.size() == 41, std::to_string(at.breaks) + " breaks");
  }

  {
    const ProblemDef p = load_problem("twowell");
    const UniquenessProbe probe = probe_uniqueness(p, Vec(0), so);
    const RootSet& s = probe.roots;
    bool roots_ok = s.roots.size() == 2;
    for (const Root& r : s.roots) roots_ok = roots_ok && std::abs(std::abs(r.x(0)) - 1.0) <= 1e-8;
    c.add("twowell", "roots", roots_ok, std::string(to_string(s.audit)) + ", " + std::to_string(s.roots.size()) + " roots");
    const bool nonroot_ok = s.stationary_nonroots.size() == 1 && std::abs(s.stationary_nonroots[0].x(0)) <= 1e-6 &&
                            s.stationary_nonroots[0].min_vertex_sigma <= 1e-6;
    c.add("twowell", "stationary-nonroot", nonroot_ok, std::to_string(s.stationary_nonroots.size()) + " found");
    const bool saddle_ok = probe.saddle && probe.saddle->verdict == SaddleVerdict::kSaddleFound &&
                           std::abs(probe.saddle->c - 0.5) <= 1e-4 && !probe.contradiction;
    c.add("twowell", "mountain-pass", saddle_ok,
          probe.saddle ? std::string(to_string(probe.saddle->verdict)) + ", c = " + fmt(probe.saddle->c) : "not run");
  }
  return out;
}

}  // namespace nsift
