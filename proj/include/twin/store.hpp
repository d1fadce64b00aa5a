// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "twin/catalog.hpp"
#include "twin/matrix.hpp"
#include "twin/time.hpp"

namespace twin {

enum class Source : std::uint8_t { simulator, file, live };

const char* to_string(Source s);
Source parse_source(std::string_view s);

struct TelemetryRecord {
  Instant timestamp;
  std::string parameter;
  double value = 0.0;
  Source source = Source::live;

  bool operator==(const TelemetryRecord&) const = default;
};

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t rejected_unphysical = 0;
  std::size_t deduplicated = 0;
  std::size_t unknown_parameter = 0;

  IngestReport& operator+=(const IngestReport& o) {
    accepted += o.accepted;
    rejected_unphysical += o.rejected_unphysical;
    deduplicated += o.deduplicated;
    unknown_parameter += o.unknown_parameter;
    return *this;
  }
};

// Per-parameter min/max over a reference range. A parameter whose range is
// degenerate gets delta 1 and constant = true so the loss stays defined.
struct NormalizationStats {
  std::vector<std::string> parameters;
  std::vector<double> min;
  std::vector<double> max;
  std::vector<double> delta;
  std::vector<bool> constant;

  std::size_t size() const { return parameters.size(); }
  bool any_constant() const;
  double normalize(std::size_t p, double raw) const { return (raw - min[p]) / delta[p]; }
  double denormalize(std::size_t p, double unit) const { return unit * delta[p] + min[p]; }

  // Min 0, max 1 for every parameter; the domain of the synthetic pre-training data.
  static NormalizationStats unit(const std::vector<std::string>& parameters);
  bool operator==(const NormalizationStats&) const = default;
};

// Resampled multivariate series on a uniform grid, forward padded.
//   padded(t, p)  no raw record of p in (t - step, t]
//   missing(t, p) no record of p at or before t at all; value is NaN
struct FrameSeries {
  Instant start{};
  Duration step{1000};
  std::vector<std::string> parameters;
  Matrix values;
  std::vector<std::uint8_t> padded;   // rows x cols
  std::vector<std::uint8_t> missing;  // rows x cols

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return values.cols(); }
  Instant time_at(std::size_t r) const { return start + step * static_cast<std::int64_t>(r); }
  bool is_padded(std::size_t r, std::size_t c) const { return padded[r * cols() + c] != 0; }
  bool is_missing(std::size_t r, std::size_t c) const { return missing[r * cols() + c] != 0; }
  bool any_missing() const;
};

// Append-oriented telemetry store. One writer, many readers: every public
// method is safe to call concurrently, and a reader sees the state as of the
// last completed ingest batch.
class TimeseriesStore {
 public:
  explicit TimeseriesStore(const Catalog& catalog = Catalog::builtin());

  const Catalog& catalog() const { return *catalog_; }

  // Input may be unsorted and contain duplicates, unknown ids and unphysical
  // values. Offending records are skipped and counted, never stored.
  IngestReport ingest_batch(std::span<const TelemetryRecord> records);

  // Inclusive on both ends, time ordered. Throws InvalidRange, UnknownParameter.
  std::vector<TelemetryRecord> query(Instant from, Instant to,
                                     const std::vector<std::string>& parameters) const;

  // Grid instants in [from, to] aligned to multiples of step from the epoch.
  // A cell never depends on a record later than its own grid instant.
  FrameSeries resample(Instant from, Instant to, const std::vector<std::string>& parameters,
                       Duration step = seconds(1)) const;

  // Exact min/max of raw records in [from, to]. Throws EmptyRange.
  NormalizationStats normalization_stats(Instant from, Instant to,
                                         const std::vector<std::string>& parameters) const;

  // The m resampled rows ending at floor(at), oldest first. Throws
  // InsufficientHistory when any cell in that span has no source value.
  Matrix window(Instant at, std::size_t m, const std::vector<std::string>& parameters,
                Duration step = seconds(1)) const;

  std::size_t size() const;
  std::optional<Instant> first_time() const;
  std::optional<Instant> last_time() const;

  // Newline-delimited record file in global time order.
  void save(const std::string& path) const;

 private:
  struct Series {
    std::vector<Instant> ts;
    std::vector<double> value;
    std::vector<Source> source;
  };

  std::vector<ParamIndex> resolve(const std::vector<std::string>& parameters) const;
  void merge_into(Series& series, std::vector<const TelemetryRecord*>& incoming, IngestReport& report);

  const Catalog* catalog_;
  mutable std::shared_mutex mutex_;
  std::vector<Series> series_;
};

}  // namespace twin
