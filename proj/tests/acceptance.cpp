// Acceptance suite at the stated path counts: one PASS/FAIL line per
// criterion, details indented below it. Arguments restrict the run to the
// named (or numbered) criteria.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "roughfut/selftest/criteria.hpp"

int main(int argc, char** argv) {
  namespace st = roughfut::selftest;
  st::Options opt;
  opt.full = true;
  opt.work_dir = std::filesystem::current_path() / "acceptance_work";
  const std::vector<std::string> only(argv + 1, argv + argc);

  std::size_t passed = 0, total = 0;
  for (const auto& c : st::criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end() &&
        std::find(only.begin(), only.end(), std::to_string(c.id)) == only.end())
      continue;
    const auto r = st::run_one(c, opt);
    st::print(std::cout, r);
    passed += r.pass;
    ++total;
  }
  std::cout << passed << " of " << total << " criteria passed\n";
  return passed == total ? 0 : 1;
}
