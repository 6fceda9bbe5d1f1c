#pragma once

#include <string>
#include <vector>

namespace cornerforge {

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Runs the generation-protocol conformance checks against a live server.
/// Never throws for server misbehaviour; every failure becomes a failed check.
std::vector<ConformanceCheck> run_conformance(const std::string& base_url);

}  // namespace cornerforge
