#include "edm/clock.hpp"

#include <chrono>

namespace edm {

using namespace std::chrono;

uint64_t RealClock::now_ms() const {
  return static_cast<uint64_t>(duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count());
}

void RealClock::wait_until(uint64_t deadline_ms, std::stop_token st) {
  std::mutex mu;
  std::condition_variable_any cv;
  std::unique_lock lock(mu);
  // system_clock can step; bound each wait by the remaining delta instead of
  // an absolute time point.
  while (!st.stop_requested()) {
    uint64_t now = now_ms();
    if (now >= deadline_ms) return;
    cv.wait_for(lock, st, milliseconds(deadline_ms - now), [] { return false; });
  }
}

uint64_t VirtualClock::now_ms() const {
  std::lock_guard lock(mu_);
  return now_;
}

void VirtualClock::wait_until(uint64_t deadline_ms, std::stop_token st) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, st, [&] { return now_ >= deadline_ms; });
}

void VirtualClock::advance(uint64_t delta_ms) {
  {
    std::lock_guard lock(mu_);
    now_ += delta_ms;
  }
  cv_.notify_all();
}

void VirtualClock::set(uint64_t now_ms) {
  {
    std::lock_guard lock(mu_);
    if (now_ms > now_) now_ = now_ms;
  }
  cv_.notify_all();
}

}  // namespace edm
