// SPDX-License-Identifier: Apache-2.0

#include <vector>

#include "dkps/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dkps::cli_main(args);
}
