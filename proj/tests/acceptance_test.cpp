// Runs the eight acceptance criteria at their stated tolerances; one line per
// criterion, nonzero exit if any fails.

#include <cstdlib>
#include <iostream>

#include "ncindex/acceptance.hpp"

int main() {
  std::uint64_t seed = ncindex::kDefaultSeed;
  if (const char* s = std::getenv("NCINDEX_SEED")) seed = std::strtoull(s, nullptr, 10);
  std::cout << "acceptance criteria, seed " << seed << std::endl;
  int failed = 0;
  for (int id = 1; id <= 8; ++id) {
    const ncindex::CriterionResult r = ncindex::run_criterion(id, seed);
    ncindex::print_result(r, std::cout);
    failed += !r.pass;
  }
  std::cout << (8 - failed) << "/8 criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
