// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <iostream>

#include "spdet/cli.hpp"

int main(int argc, char** argv) {
  return spdet::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
