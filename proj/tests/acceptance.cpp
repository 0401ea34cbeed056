#include <cstdio>
#include <iostream>

#include "biloop/verify.hpp"

int main(int argc, char** argv) {
  const std::string filter = argc > 1 ? argv[1] : "";
  const auto results = biloop::verify::run_verification(filter);
  std::cout << biloop::verify::render_report(results);
  const bool ok = biloop::verify::all_passed(results);
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.passed ? 1 : 0;
  std::printf("%zu/%zu criteria passed\n", passed, results.size());
  return ok ? 0 : 1;
}
