#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "colloq/cli.hpp"

namespace testing {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliRun run(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "colloq");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = colloq::run_cli(static_cast<int>(argv.size()), argv.data(), in, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace testing
