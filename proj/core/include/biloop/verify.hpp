#pragma once

#include <string>
#include <vector>

namespace biloop::verify {

struct CriterionResult {
  std::string name;
  bool passed = false;
  std::string details;  // deterministic measured-vs-expected summary
};

// Runs the built-in verification suite. A non-empty filter keeps only the
// criteria whose name contains it as a substring. Results are deterministic:
// the same build produces byte-identical reports on every invocation.
std::vector<CriterionResult> run_verification(const std::string& filter = "");

// One line per criterion: "[PASS] name: details".
std::string render_report(const std::vector<CriterionResult>& results);

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace biloop::verify
