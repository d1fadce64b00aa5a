// SPDX-License-Identifier: Apache-2.0

#include "twin/server/stream_hub.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "twin/errors.hpp"

namespace twin::server {

bool StreamFrame::operator==(const StreamFrame& o) const {
  if (sequence != o.sequence || timestamp != o.timestamp || parameters != o.parameters || padded != o.padded ||
      values.size() != o.values.size()) {
    return false;
  }
  // Bitwise so that NaN cells compare equal to themselves.
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(values[i]) != std::bit_cast<std::uint64_t>(o.values[i])) return false;
  }
  return true;
}

Subscription::Status Subscription::next(StreamFrame& out, Duration timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
  if (!queue_.empty()) {
    out = std::move(queue_.front());
    queue_.pop_front();
    return Status::frame;
  }
  return closed_ ? Status::closed : Status::timeout;
}

std::optional<StreamFrame> Subscription::try_next() {
  std::lock_guard lock(mutex_);
  if (queue_.empty()) return std::nullopt;
  StreamFrame f = std::move(queue_.front());
  queue_.pop_front();
  return f;
}

bool Subscription::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::string Subscription::close_reason() const {
  std::lock_guard lock(mutex_);
  return reason_;
}

bool Subscription::push(StreamFrame frame) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return false;
    if (queue_.size() >= capacity_) {
      closed_ = true;
      reason_ = "SubscriberOverflow: consumer fell " + std::to_string(capacity_) +
                " frames behind; sequence " + std::to_string(next_sequence_) + " was never delivered";
    } else {
      frame.sequence = next_sequence_++;
      queue_.push_back(std::move(frame));
    }
  }
  cv_.notify_all();
  return !closed();
}

void Subscription::close(std::string reason) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    closed_ = true;
    reason_ = std::move(reason);
  }
  cv_.notify_all();
}

StreamHub::StreamHub(const TimeseriesStore& store, Duration step, std::size_t queue_capacity)
    : store_(store), step_(step), capacity_(queue_capacity) {
  if (step_ <= Duration::zero()) throw ConfigError("stream step must be positive");
  if (capacity_ == 0) throw ConfigError("stream queue capacity must be positive");
}

std::shared_ptr<Subscription> StreamHub::subscribe(std::vector<std::string> parameters) {
  for (const auto& p : parameters) store_.catalog().index_of(p);
  std::lock_guard lock(mutex_);
  auto sub = std::make_shared<Subscription>(next_id_++, std::move(parameters), capacity_);
  subs_.push_back(sub);
  return sub;
}

void StreamHub::unsubscribe(const std::shared_ptr<Subscription>& sub) {
  std::lock_guard lock(mutex_);
  std::erase(subs_, sub);
  sub->close("unsubscribed");
}

std::size_t StreamHub::subscriber_count() const {
  std::lock_guard lock(mutex_);
  return subs_.size();
}

void StreamHub::publish_one(Instant g) {
  for (auto& sub : subs_) {
    auto fs = store_.resample(g, g, sub->parameters(), step_);
    StreamFrame f;
    f.timestamp = g;
    f.parameters = sub->parameters();
    f.values.assign(fs.values.flat().begin(), fs.values.flat().end());
    f.padded = fs.padded;
    sub->push(std::move(f));
  }
  std::erase_if(subs_, [](const auto& s) { return s->closed(); });
}

void StreamHub::publish_through(Instant t) {
  std::lock_guard lock(mutex_);
  Instant last = floor_to_grid(t, step_);
  Instant g = cursor_ ? *cursor_ + step_ : last;
  for (; g <= last; g += step_) {
    if (!subs_.empty()) publish_one(g);
    cursor_ = g;
  }
}

void StreamHub::set_cursor(Instant last) {
  std::lock_guard lock(mutex_);
  cursor_ = floor_to_grid(last, step_);
}

std::optional<Instant> StreamHub::cursor() const {
  std::lock_guard lock(mutex_);
  return cursor_;
}

void StreamHub::close_all(const std::string& reason) {
  std::lock_guard lock(mutex_);
  for (auto& s : subs_) s->close(reason);
  subs_.clear();
}

}  // namespace twin::server
