#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>

#include "attestfl/tee/digest.hpp"
#include "attestfl/tee/encoding.hpp"

namespace attestfl {

struct Challenge {
  std::uint32_t round = 0;
  Nonce nonce;

  friend bool operator==(const Challenge&, const Challenge&) = default;
};

/// Server-side nonce source: SHA-256("attestfl-nonce" || seed || counter).
class NonceGenerator {
 public:
  explicit NonceGenerator(std::uint64_t seed) : seed_(seed) {}

  Nonce next() {
    Hasher h;
    h.update(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>("attestfl-nonce"), 14));
    h.u64(seed_).u64(counter_++);
    Nonce n;
    n.bytes = h.finish().bytes;
    return n;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Issued challenges keyed by (round, client). Each entry is consumed at
/// most once.
class ChallengeBook {
 public:
  struct Entry {
    Nonce nonce;
    bool consumed = false;
  };

  void issue(std::uint32_t round, std::uint32_t client, const Nonce& n) {
    entries_[{round, client}] = Entry{n, false};
  }

  const Entry* find(std::uint32_t round, std::uint32_t client) const {
    auto it = entries_.find({round, client});
    return it == entries_.end() ? nullptr : &it->second;
  }

  void consume(std::uint32_t round, std::uint32_t client) {
    auto it = entries_.find({round, client});
    if (it != entries_.end()) it->second.consumed = true;
  }

  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::pair<std::uint32_t, std::uint32_t>, Entry> entries_;
};

/// Fresh nonce per client, recorded in `book`. Reissuing for a round
/// replaces the earlier nonce.
template <class ClientIds>
std::map<std::uint32_t, Challenge> issue_challenges(std::uint32_t round,
                                                    const ClientIds& client_ids,
                                                    NonceGenerator& rng,
                                                    ChallengeBook& book) {
  std::map<std::uint32_t, Challenge> out;
  for (std::uint32_t id : client_ids) {
    Challenge c{round, rng.next()};
    book.issue(round, id, c.nonce);
    out[id] = c;
  }
  return out;
}

}  // namespace attestfl
