#pragma once

#include <chrono>
#include <cstdint>
#include <memory>

#include "attestfl/model/train.hpp"
#include "attestfl/protocol/challenge.hpp"
#include "attestfl/tee/session.hpp"

namespace attestfl {

struct RoundBroadcast {
  std::uint32_t round = 0;
  ModelParams global;
  Challenge challenge;
};

struct ClientTimings {
  std::chrono::nanoseconds train{0};   // local_train wall time, hooks included
  std::chrono::nanoseconds record{0};  // inside the recorder
  std::chrono::nanoseconds sign{0};
};

/// A participant: its TEE identity, local shard and configured training
/// hyperparameters. The identity never leaves this object; code outside the
/// TEE can only open a recording session bound to it.
class Client {
 public:
  Client(std::uint32_t id, std::uint64_t key_seed, Dataset shard, Hyperparams hp,
         std::size_t layers)
      : identity_(tee_keygen(id, key_seed)),
        shard_(std::move(shard)),
        hp_(hp),
        sites_(make_site_table(layers)) {}

  std::uint32_t id() const noexcept { return identity_.client_id(); }
  const VerifyKey& verify_key() const noexcept { return identity_.verify_key(); }
  const Dataset& shard() const noexcept { return shard_; }
  const Hyperparams& hp() const noexcept { return hp_; }
  const SiteTable& sites() const noexcept { return sites_; }

  /// Starts a recorded run with the hyperparameters and data actually used.
  std::unique_ptr<TeeSession> open_session(const Hyperparams& hp,
                                           const Dataset& data,
                                           const ModelParams& initial) const {
    return std::make_unique<TeeSession>(identity_, sites_, hp, data, initial);
  }

 private:
  TeeIdentity identity_;
  Dataset shard_;
  Hyperparams hp_;
  SiteTable sites_;
};

/// Honest round: train under a live recorder, then report the trained delta
/// with this round's nonce.
inline ReportMsg client_round(const Client& client, const RoundBroadcast& b,
                              ClientTimings* timings = nullptr) {
  auto session = client.open_session(client.hp(), client.shard(), b.global);
  auto t0 = std::chrono::steady_clock::now();
  auto res = local_train(b.global, client.shard(), client.hp(), session->hooks());
  auto t1 = std::chrono::steady_clock::now();
  ReportMsg msg = session->attest(res.delta.values(), b.challenge.nonce, b.round);
  if (timings) {
    timings->train = t1 - t0;
    timings->record = session->record_time();
    timings->sign = session->sign_time();
  }
  return msg;
}

}  // namespace attestfl
