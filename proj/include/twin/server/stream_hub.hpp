// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "twin/store.hpp"
#include "twin/time.hpp"

namespace twin::server {

struct StreamFrame {
  std::uint64_t sequence = 0;  // 1, 2, ... per subscription
  Instant timestamp{};
  std::vector<std::string> parameters;
  std::vector<double> values;  // NaN where nothing has been recorded yet
  std::vector<std::uint8_t> padded;

  bool operator==(const StreamFrame& o) const;
};

class StreamHub;

// One subscriber's bounded queue. A consumer that lets it fill up is
// disconnected: the frames already queued stay readable, then next() reports
// closed with a SubscriberOverflow reason.
class Subscription {
 public:
  enum class Status { frame, timeout, closed };

  Status next(StreamFrame& out, Duration timeout);
  std::optional<StreamFrame> try_next();

  std::uint64_t id() const { return id_; }
  const std::vector<std::string>& parameters() const { return parameters_; }
  bool closed() const;
  std::string close_reason() const;

  Subscription(std::uint64_t id, std::vector<std::string> parameters, std::size_t capacity)
      : id_(id), parameters_(std::move(parameters)), capacity_(capacity) {}

 private:
  friend class StreamHub;
  // Returns false when the push overflowed and closed the subscription.
  bool push(StreamFrame frame);
  void close(std::string reason);

  std::uint64_t id_;
  std::vector<std::string> parameters_;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<StreamFrame> queue_;
  std::uint64_t next_sequence_ = 1;
  bool closed_ = false;
  std::string reason_;
};

// Turns advancing time into frames: each grid instant is published exactly
// once, to every subscriber present at that moment, with the values the
// store resamples for that instant.
class StreamHub {
 public:
  explicit StreamHub(const TimeseriesStore& store, Duration step = seconds(1), std::size_t queue_capacity = 4096);

  // Throws UnknownParameter.
  std::shared_ptr<Subscription> subscribe(std::vector<std::string> parameters);
  void unsubscribe(const std::shared_ptr<Subscription>& sub);
  std::size_t subscriber_count() const;

  // Publishes every grid instant after the cursor up to floor(t). With no
  // cursor yet only floor(t) itself is published.
  void publish_through(Instant t);
  // Marks `last` as already published.
  void set_cursor(Instant last);
  std::optional<Instant> cursor() const;
  Duration step() const { return step_; }

  void close_all(const std::string& reason);

 private:
  void publish_one(Instant g);

  const TimeseriesStore& store_;
  Duration step_;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::vector<std::shared_ptr<Subscription>> subs_;
  std::optional<Instant> cursor_;
  std::uint64_t next_id_ = 1;
};

}  // namespace twin::server
