// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <iosfwd>

namespace twin::cli {

// Exit codes of every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDataError = 2;
inline constexpr int kRuntimeError = 3;

// Runs one `twin` invocation. Data goes to `out`, logs and the one-line
// error cause to `err`. Long-running subcommands (serve, replay) return once
// `stop` becomes true.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
        const std::atomic<bool>* stop = nullptr);

}  // namespace twin::cli
