// SPDX-License-Identifier: Apache-2.0

#include "twin/store.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include "twin/errors.hpp"
#include "twin/record_io.hpp"

namespace twin {

const char* to_string(Source s) {
  switch (s) {
    case Source::simulator:
      return "simulator";
    case Source::file:
      return "file";
    case Source::live:
      return "live";
  }
  return "live";
}

Source parse_source(std::string_view s) {
  if (s == "simulator") return Source::simulator;
  if (s == "file") return Source::file;
  if (s == "live") return Source::live;
  throw ParseError("unknown record source '" + std::string(s) + "'");
}

bool NormalizationStats::any_constant() const {
  return std::find(constant.begin(), constant.end(), true) != constant.end();
}

NormalizationStats NormalizationStats::unit(const std::vector<std::string>& parameters) {
  NormalizationStats s;
  s.parameters = parameters;
  s.min.assign(parameters.size(), 0.0);
  s.max.assign(parameters.size(), 1.0);
  s.delta.assign(parameters.size(), 1.0);
  s.constant.assign(parameters.size(), false);
  return s;
}

bool FrameSeries::any_missing() const {
  return std::find(missing.begin(), missing.end(), std::uint8_t{1}) != missing.end();
}

TimeseriesStore::TimeseriesStore(const Catalog& catalog)
    : catalog_(&catalog), series_(catalog.size()) {}

std::vector<ParamIndex> TimeseriesStore::resolve(const std::vector<std::string>& parameters) const {
  std::vector<ParamIndex> out;
  out.reserve(parameters.size());
  for (const auto& id : parameters) out.push_back(catalog_->index_of(id));
  return out;
}

IngestReport TimeseriesStore::ingest_batch(std::span<const TelemetryRecord> records) {
  IngestReport report;
  // Validation needs no lock: the catalog is immutable.
  std::vector<std::vector<const TelemetryRecord*>> by_param(catalog_->size());
  for (const auto& r : records) {
    auto idx = catalog_->find(r.parameter);
    if (!idx) {
      ++report.unknown_parameter;
      continue;
    }
    if (!std::isfinite(r.value) || !catalog_->is_physical(*idx, r.value)) {
      ++report.rejected_unphysical;
      continue;
    }
    by_param[*idx].push_back(&r);
  }
  for (auto& group : by_param) {
    // Stable, so equal timestamps keep arrival order and the last one wins.
    std::stable_sort(group.begin(), group.end(),
                     [](const TelemetryRecord* a, const TelemetryRecord* b) { return a->timestamp < b->timestamp; });
  }
  std::unique_lock lock(mutex_);
  for (std::size_t p = 0; p < by_param.size(); ++p) {
    if (!by_param[p].empty()) merge_into(series_[p], by_param[p], report);
  }
  return report;
}

void TimeseriesStore::merge_into(Series& s, std::vector<const TelemetryRecord*>& incoming,
                                 IngestReport& report) {
  auto put_last = [&](const TelemetryRecord& r) {
    // r is not earlier than s.ts.back()
    if (!s.ts.empty() && s.ts.back() == r.timestamp) {
      ++report.deduplicated;
      s.value.back() = r.value;
      s.source.back() = r.source;
      return;
    }
    s.ts.push_back(r.timestamp);
    s.value.push_back(r.value);
    s.source.push_back(r.source);
    ++report.accepted;
  };

  if (s.ts.empty() || incoming.front()->timestamp >= s.ts.back()) {
    for (const auto* r : incoming) put_last(*r);
    return;
  }

  // Out-of-order batch: merge into fresh columns. Existing entries precede
  // incoming ones at equal timestamps, so the incoming value wins.
  Series merged;
  std::size_t n = s.ts.size() + incoming.size();
  merged.ts.reserve(n);
  merged.value.reserve(n);
  merged.source.reserve(n);
  std::size_t i = 0;
  std::size_t j = 0;
  auto put_merged = [&](Instant t, double v, Source src, bool fresh) {
    if (!merged.ts.empty() && merged.ts.back() == t) {
      merged.value.back() = v;
      merged.source.back() = src;
      ++report.deduplicated;
      return;
    }
    merged.ts.push_back(t);
    merged.value.push_back(v);
    merged.source.push_back(src);
    if (fresh) ++report.accepted;
  };
  while (i < s.ts.size() || j < incoming.size()) {
    bool take_old = j == incoming.size() || (i < s.ts.size() && s.ts[i] <= incoming[j]->timestamp);
    if (take_old) {
      put_merged(s.ts[i], s.value[i], s.source[i], false);
      ++i;
    } else {
      const auto& r = *incoming[j];
      put_merged(r.timestamp, r.value, r.source, true);
      ++j;
    }
  }
  s = std::move(merged);
}

std::vector<TelemetryRecord> TimeseriesStore::query(Instant from, Instant to,
                                                    const std::vector<std::string>& parameters) const {
  if (from > to) throw InvalidRange("from " + format_iso8601(from) + " is after to " + format_iso8601(to));
  auto idx = resolve(parameters);
  std::vector<TelemetryRecord> out;
  std::shared_lock lock(mutex_);
  for (auto p : idx) {
    const auto& s = series_[p];
    auto lo = std::lower_bound(s.ts.begin(), s.ts.end(), from);
    auto hi = std::upper_bound(s.ts.begin(), s.ts.end(), to);
    for (auto it = lo; it != hi; ++it) {
      auto k = static_cast<std::size_t>(it - s.ts.begin());
      out.push_back({s.ts[k], catalog_->at(p).id, s.value[k], s.source[k]});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TelemetryRecord& a, const TelemetryRecord& b) { return a.timestamp < b.timestamp; });
  return out;
}

FrameSeries TimeseriesStore::resample(Instant from, Instant to, const std::vector<std::string>& parameters,
                                      Duration step) const {
  if (from > to) throw InvalidRange("from " + format_iso8601(from) + " is after to " + format_iso8601(to));
  if (step <= Duration::zero()) throw InvalidRange("resample step must be positive");
  auto idx = resolve(parameters);

  FrameSeries fs;
  fs.step = step;
  fs.parameters = parameters;
  fs.start = ceil_to_grid(from, step);
  Instant last = floor_to_grid(to, step);
  std::size_t rows = fs.start > last ? 0 : static_cast<std::size_t>((last - fs.start) / step) + 1;
  std::size_t cols = idx.size();
  fs.values = Matrix(rows, cols, std::numeric_limits<double>::quiet_NaN());
  fs.padded.assign(rows * cols, 1);
  fs.missing.assign(rows * cols, 1);
  if (rows == 0) return fs;

  std::shared_lock lock(mutex_);
  for (std::size_t c = 0; c < cols; ++c) {
    const auto& s = series_[idx[c]];
    // Start from the last record at or before the first grid instant.
    auto it = std::upper_bound(s.ts.begin(), s.ts.end(), fs.start);
    std::size_t k = static_cast<std::size_t>(it - s.ts.begin());
    bool have = k > 0;
    std::size_t cur = have ? k - 1 : 0;
    for (std::size_t r = 0; r < rows; ++r) {
      Instant t = fs.time_at(r);
      while (k < s.ts.size() && s.ts[k] <= t) {
        cur = k++;
        have = true;
      }
      if (!have) continue;
      fs.values(r, c) = s.value[cur];
      fs.missing[r * cols + c] = 0;
      fs.padded[r * cols + c] = s.ts[cur] > t - step ? 0 : 1;
    }
  }
  return fs;
}

NormalizationStats TimeseriesStore::normalization_stats(Instant from, Instant to,
                                                        const std::vector<std::string>& parameters) const {
  if (from > to) throw InvalidRange("from " + format_iso8601(from) + " is after to " + format_iso8601(to));
  auto idx = resolve(parameters);
  NormalizationStats st;
  st.parameters = parameters;
  std::shared_lock lock(mutex_);
  for (std::size_t c = 0; c < idx.size(); ++c) {
    const auto& s = series_[idx[c]];
    auto lo = static_cast<std::size_t>(std::lower_bound(s.ts.begin(), s.ts.end(), from) - s.ts.begin());
    auto hi = static_cast<std::size_t>(std::upper_bound(s.ts.begin(), s.ts.end(), to) - s.ts.begin());
    if (lo == hi) throw EmptyRange("no records of " + parameters[c] + " in range");
    auto [mn, mx] = std::minmax_element(s.value.begin() + static_cast<std::ptrdiff_t>(lo),
                                        s.value.begin() + static_cast<std::ptrdiff_t>(hi));
    st.min.push_back(*mn);
    st.max.push_back(*mx);
    double delta = *mx - *mn;
    st.constant.push_back(!(delta > 0.0));
    st.delta.push_back(delta > 0.0 ? delta : 1.0);
  }
  return st;
}

Matrix TimeseriesStore::window(Instant at, std::size_t m, const std::vector<std::string>& parameters,
                               Duration step) const {
  if (m == 0) throw InvalidRange("window length must be at least 1");
  Instant end = floor_to_grid(at, step);
  Instant begin = end - step * static_cast<std::int64_t>(m - 1);
  auto fs = resample(begin, end, parameters, step);
  if (fs.rows() != m || fs.any_missing()) {
    throw InsufficientHistory("need " + std::to_string(m) + " steps of history ending at " +
                              format_iso8601(end));
  }
  return fs.values;
}

std::size_t TimeseriesStore::size() const {
  std::shared_lock lock(mutex_);
  std::size_t n = 0;
  for (const auto& s : series_) n += s.ts.size();
  return n;
}

std::optional<Instant> TimeseriesStore::first_time() const {
  std::shared_lock lock(mutex_);
  std::optional<Instant> out;
  for (const auto& s : series_) {
    if (!s.ts.empty() && (!out || s.ts.front() < *out)) out = s.ts.front();
  }
  return out;
}

std::optional<Instant> TimeseriesStore::last_time() const {
  std::shared_lock lock(mutex_);
  std::optional<Instant> out;
  for (const auto& s : series_) {
    if (!s.ts.empty() && (!out || s.ts.back() > *out)) out = s.ts.back();
  }
  return out;
}

void TimeseriesStore::save(const std::string& path) const {
  auto first = first_time();
  std::vector<TelemetryRecord> all;
  if (first) {
    std::vector<std::string> ids;
    for (const auto& p : catalog_->parameters()) ids.push_back(p.id);
    all = query(*first, *last_time(), ids);
  }
  save_records(path, all);
}

}  // namespace twin
