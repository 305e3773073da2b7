// Copyright (C) 2026 The pairforge Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace pairforge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the `pairforge` tool. Returns kExitOk, kExitUsage for bad
/// command lines (help text goes to `err`), or kExitRuntime when a command
/// fails (the message goes to `err`).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pairforge
