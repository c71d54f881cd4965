// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace dkps {

// Full command-line entry point. Exit codes: 0 success, 1 dataset or
// validation failure, 2 configuration/usage error.
int cli_main(const std::vector<std::string>& args);

}  // namespace dkps
