// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "pairforge/cli.hpp"

int main(int argc, char** argv) { return pairforge::run_cli(argc, argv, std::cout, std::cerr); }
