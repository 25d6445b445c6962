// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace spdet::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kUsage = 2,
  kNumeric = 3,
  kVersion = 4,
  kInput = 5,
};

inline constexpr const char* kConfigEcho = "spdet_config.txt";

/// Runs one subcommand (gen-data, extract-prompts, train, eval, gradcheck).
/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spdet::cli
