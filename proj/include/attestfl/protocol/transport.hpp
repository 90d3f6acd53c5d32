#pragma once

#include <algorithm>
#include <deque>
#include <random>
#include <vector>

#include "attestfl/bytes.hpp"

namespace attestfl {

struct TransportFaults {
  double drop = 0.0;       // probability a message is lost
  double duplicate = 0.0;  // probability a message is delivered twice
  bool shuffle = false;    // deliver in random order
  std::uint64_t seed = 0;
};

/// Client-to-server message queue with seeded fault injection. Every
/// message sent is also appended to the transcript, faults or not.
class InMemoryTransport {
 public:
  InMemoryTransport() = default;
  explicit InMemoryTransport(TransportFaults faults)
      : faults_(faults), rng_(faults.seed) {}

  void send(Bytes msg) {
    transcript_.push_back(msg);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (faults_.drop > 0 && u(rng_) < faults_.drop) return;
    if (faults_.duplicate > 0 && u(rng_) < faults_.duplicate) queue_.push_back(msg);
    queue_.push_back(std::move(msg));
  }

  /// Everything delivered since the last drain.
  std::vector<Bytes> drain() {
    std::vector<Bytes> out(std::make_move_iterator(queue_.begin()),
                           std::make_move_iterator(queue_.end()));
    queue_.clear();
    if (faults_.shuffle) std::shuffle(out.begin(), out.end(), rng_);
    return out;
  }

  const std::vector<Bytes>& transcript() const noexcept { return transcript_; }

 private:
  TransportFaults faults_;
  std::mt19937_64 rng_{0};
  std::deque<Bytes> queue_;
  std::vector<Bytes> transcript_;
};

}  // namespace attestfl
