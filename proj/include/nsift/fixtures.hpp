#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nsift/expr.hpp"
#include "nsift/parallel.hpp"

namespace nsift {

std::vector<std::string> fixture_names();
std::optional<std::string> fixture_text(const std::string& name);

/// Reads a problem file. When the path does not exist and names a bundled
/// fixture (`example1`, `fixtures/example1.prob`, ...) the bundled copy is used.
ProblemDef load_problem(const std::string& path, const std::map<std::string, double>& overrides = {});

struct FixtureCheck {
  std::string fixture;
  std::string check;
  bool passed = false;
  std::string detail;
};

/// Runs every bundled example and compares against its expected verdicts.
std::vector<FixtureCheck> verify_fixtures(std::uint64_t seed = 0, const ExecutionContext& exec = {});

}  // namespace nsift
