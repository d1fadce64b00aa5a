// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <csignal>
#include <iostream>

#include "twin/cli.hpp"

namespace {
std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }
}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  return twin::cli::run(argc, argv, std::cout, std::cerr, &g_stop);
}
