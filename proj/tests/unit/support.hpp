// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "twin/sim.hpp"
#include "twin/store.hpp"
#include "twin/time.hpp"

namespace testing {

inline twin::Instant t0() { return twin::parse_iso8601("2022-02-01T00:00:00Z"); }
inline twin::Instant at_s(long long s) { return t0() + twin::seconds(s); }

inline twin::TelemetryRecord rec(long long s, const std::string& p, double v,
                                 twin::Source src = twin::Source::live) {
  return {at_s(s), p, v, src};
}

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path = std::filesystem::temp_directory_path() / ("twin-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testing
