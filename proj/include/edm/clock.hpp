#pragma once

#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <stop_token>

namespace edm {

// Time source shared by all services. Timestamps are milliseconds since the
// Unix epoch; scheduling waits go through the same interface so integration
// tests can drive everything on a virtual timeline.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual uint64_t now_ms() const = 0;
  // Blocks until now_ms() >= deadline_ms or stop is requested.
  virtual void wait_until(uint64_t deadline_ms, std::stop_token st) = 0;
  void wait_for(uint64_t delta_ms, std::stop_token st) { wait_until(now_ms() + delta_ms, st); }
};

class RealClock final : public Clock {
 public:
  uint64_t now_ms() const override;
  void wait_until(uint64_t deadline_ms, std::stop_token st) override;
};

// Manually advanced clock for tests. wait_until() wakes when advance()/set()
// moves the clock past the deadline or the waiter's stop token fires.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(uint64_t start_ms = 1'700'000'000'000ull) : now_(start_ms) {}

  uint64_t now_ms() const override;
  void wait_until(uint64_t deadline_ms, std::stop_token st) override;

  void advance(uint64_t delta_ms);
  void set(uint64_t now_ms);

 private:
  mutable std::mutex mu_;
  std::condition_variable_any cv_;
  uint64_t now_;
};

}  // namespace edm
