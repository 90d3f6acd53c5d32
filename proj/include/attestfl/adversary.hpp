#pragma once

#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "attestfl/aggregation.hpp"
#include "attestfl/protocol/client.hpp"

namespace attestfl {

enum class AttackKind {
  kNone,
  kTargetedCf,
  kUntargetedCf,
  kTargetedDo,
  kUntargetedDo,
  kForge,
  kReplay,
  kStatic,
};

inline const char* attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::kNone: return "none";
    case AttackKind::kTargetedCf: return "t_cf";
    case AttackKind::kUntargetedCf: return "unt_cf";
    case AttackKind::kTargetedDo: return "t_do";
    case AttackKind::kUntargetedDo: return "unt_do";
    case AttackKind::kForge: return "forge";
    case AttackKind::kReplay: return "replay";
    case AttackKind::kStatic: return "static";
  }
  return "?";
}

inline std::optional<AttackKind> parse_attack_kind(const std::string& s) {
  for (auto k : {AttackKind::kNone, AttackKind::kTargetedCf, AttackKind::kUntargetedCf,
                 AttackKind::kTargetedDo, AttackKind::kUntargetedDo, AttackKind::kForge,
                 AttackKind::kReplay, AttackKind::kStatic}) {
    if (s == attack_name(k)) return k;
  }
  return std::nullopt;
}

inline bool is_targeted(AttackKind k) {
  return k == AttackKind::kTargetedCf || k == AttackKind::kTargetedDo;
}
inline bool is_payload_attack(AttackKind k) {
  return k == AttackKind::kTargetedCf || k == AttackKind::kUntargetedCf ||
         k == AttackKind::kTargetedDo || k == AttackKind::kUntargetedDo;
}

enum class StaticTamper { kLearningRate, kDataset };

struct AttackSpec {
  AttackKind kind = AttackKind::kNone;
  double malicious_fraction = 0.25;
  TriggerSpec trigger;
  std::optional<double> boost;  // default: n / malicious count
  double lambda_max = 10.0;
  double poison_fraction = 0.5;
  StaticTamper static_mode = StaticTamper::kLearningRate;
  double lr_factor = 100.0;
};

/// Fixed malicious set: round(fraction * n) ids drawn with `seed`, sorted.
inline std::vector<std::uint32_t> choose_malicious(std::size_t n, double fraction,
                                                   std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw Error(Errc::kInvalidArgument, "malicious fraction must be in [0, 1)");
  }
  const auto m = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  std::vector<std::uint32_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0u);
  std::mt19937_64 rng(seed ^ 0xad5e5a1ULL);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// Copy of `shard` where a `fraction` of the rows carry the trigger and the
/// target label.
inline Dataset poison_shard(const Dataset& shard, const TriggerSpec& trig,
                            double fraction, std::uint64_t seed) {
  Dataset out = shard;
  std::vector<std::size_t> idx(shard.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto count = static_cast<std::size_t>(
      std::lround(fraction * static_cast<double>(shard.size())));
  for (std::size_t k = 0; k < count && k < idx.size(); ++k) {
    trig.stamp(out.inputs.row(idx[k]));
    out.labels[idx[k]] = trig.target_label;
  }
  return out;
}

/// Update the malicious clients agree to report this round. When
/// `own_benign` is set each client reports its own honestly trained delta.
struct Payload {
  bool own_benign = false;
  Update vec;
  double scale = 0.0;  // chosen boost or lambda
  bool krum_selected = false;
};

/// The colluding malicious clients. They pool their honest (and, for
/// targeted attacks, backdoor) updates to craft one shared payload sized so
/// that a Krum simulation over an estimate of the benign updates still picks
/// it.
class Coalition {
 public:
  Coalition(AttackSpec spec, std::vector<const Client*> members, std::size_t n_clients,
            std::size_t assumed_f, std::uint64_t seed)
      : spec_(std::move(spec)),
        members_(std::move(members)),
        n_(n_clients),
        f_(assumed_f),
        seed_(seed) {
    for (const auto* c : members_) {
      poisoned_.push_back(poison_shard(c->shard(), spec_.trigger, spec_.poison_fraction,
                                       seed_ + c->id()));
    }
  }

  const std::vector<const Client*>& members() const noexcept { return members_; }
  const AttackSpec& spec() const noexcept { return spec_; }
  const Dataset& poisoned_shard(std::size_t k) const { return poisoned_[k]; }

  double boost_max() const {
    if (spec_.boost) return *spec_.boost;
    return members_.empty() ? 1.0
                            : static_cast<double>(n_) / static_cast<double>(members_.size());
  }

  Payload craft(const ModelParams& global, std::uint32_t round) const {
    Payload p;
    if (members_.empty() || !is_payload_attack(spec_.kind)) {
      p.own_benign = true;
      return p;
    }
    const bool targeted = is_targeted(spec_.kind);
    if (targeted && boost_max() == 0.0) {
      p.own_benign = true;
      return p;
    }
    std::vector<Update> own, bd;
    for (std::size_t k = 0; k < members_.size(); ++k) {
      const auto* c = members_[k];
      own.push_back(local_train(global, c->shard(), c->hp()).delta.vector());
      if (targeted) {
        bd.push_back(local_train(global, poisoned_[k], c->hp()).delta.vector());
      }
    }
    const Update mu = fedavg(own);
    const std::size_t d = mu.size();
    Update sigma(d, 0.0);
    for (const auto& u : own) {
      for (std::size_t j = 0; j < d; ++j) sigma[j] += (u[j] - mu[j]) * (u[j] - mu[j]);
    }
    for (auto& s : sigma) s = std::sqrt(s / static_cast<double>(own.size()));

    // Stand-ins for the benign updates the coalition cannot see.
    std::mt19937_64 rng(seed_ * 1000003ULL + round);
    std::normal_distribution<double> z;
    const std::size_t m = members_.size();
    const std::size_t benign = n_ > m ? n_ - m : 0;
    std::vector<Update> pool(benign, Update(d));
    for (auto& u : pool) {
      for (std::size_t j = 0; j < d; ++j) u[j] = mu[j] + sigma[j] * z(rng);
    }

    Update direction(d);
    if (targeted) {
      const Update mu_bd = fedavg(bd);
      for (std::size_t j = 0; j < d; ++j) direction[j] = mu_bd[j] - mu[j];
    } else {
      double sq = 0.0;
      for (double v : mu) sq += v * v;
      const double rms = std::sqrt(sq / static_cast<double>(d));
      for (std::size_t j = 0; j < d; ++j) direction[j] = rms > 0 ? -mu[j] / rms : 0.0;
    }
    auto make = [&](double s) {
      Update v(d);
      for (std::size_t j = 0; j < d; ++j) {
        v[j] = mu[j] + s * direction[j];
      }
      return v;
    };
    auto selected = [&](double s) {
      auto all = pool;
      auto v = make(s);
      for (std::size_t k = 0; k < m; ++k) all.push_back(v);
      if (all.size() < f_ + 3) return true;
      return krum_select(all, f_) >= benign;
    };

    const double hi_limit = targeted ? boost_max() : spec_.lambda_max;
    double lo = 0.0, hi = hi_limit;
    if (selected(hi)) {
      lo = hi;
    } else {
      for (int it = 0; it < 20; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (selected(mid)) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
    }
    p.scale = lo;
    p.vec = make(lo);
    p.krum_selected = selected(lo);
    return p;
  }

 private:
  AttackSpec spec_;
  std::vector<const Client*> members_;
  std::vector<Dataset> poisoned_;
  std::size_t n_;
  std::size_t f_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Attack operations. None of them can reach a TeeIdentity: everything that
// gets a valid signature goes through Client::open_session.

/// Call target of the hijacked optimizer pointer; not in any site table.
inline constexpr SiteId kRogueOptimizerEntry = 0x7e00;

/// Control-flow hijack: every optimizer call lands in a rogue routine that
/// walks the weights to `global + payload`. The recorder logs the
/// retargeted call faithfully. With no payload the honest optimizer runs.
inline ReportMsg attack_cf(const Client& client, const RoundBroadcast& b,
                           const Update* payload) {
  auto session = client.open_session(client.hp(), client.shard(), b.global);
  OptimizerRoutine routine = honest_optimizer();
  if (payload != nullptr) {
    if (payload->size() != b.global.size()) {
      throw Error(Errc::kDimMismatch, "payload dimension");
    }
    routine.entry = kRogueOptimizerEntry;
    routine.run = [payload](OptimizerContext& ctx) {
      const double frac = static_cast<double>(ctx.step_index + 1) /
                          static_cast<double>(ctx.total_steps);
      for (std::size_t i = 0; i < ctx.weights.size(); ++i) {
        ctx.weights[i] = ctx.initial[i] + (*payload)[i] * frac;
      }
    };
  }
  auto res = local_train(b.global, client.shard(), client.hp(), session->hooks(), routine);
  return session->attest(res.delta.values(), b.challenge.nonce, b.round);
}

/// Data-only attack: honest recorded training, then a different update is
/// handed to the TEE for signing. `nullptr` reports the trained update.
inline ReportMsg attack_do(const Client& client, const RoundBroadcast& b,
                           const Update* payload) {
  auto session = client.open_session(client.hp(), client.shard(), b.global);
  auto res = local_train(b.global, client.shard(), client.hp(), session->hooks());
  if (payload == nullptr) {
    return session->attest(res.delta.values(), b.challenge.nonce, b.round);
  }
  return session->attest(*payload, b.challenge.nonce, b.round);
}

/// Signs `fake` for `client_id` with a key the adversary generated itself.
inline ReportMsg attack_forge(std::uint32_t client_id, ReportBody fake,
                              std::uint64_t seed) {
  detail::ensure_sodium();
  Hasher h;
  h.u64(seed).u32(client_id);
  const Digest key_seed = h.finish();
  std::array<std::uint8_t, crypto_sign_PUBLICKEYBYTES> pk{};
  std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES> sk{};
  crypto_sign_seed_keypair(pk.data(), sk.data(), key_seed.bytes.data());
  fake.client_id = client_id;
  const Digest d = body_digest(fake);
  ReportMsg msg;
  msg.body = std::move(fake);
  msg.signature.resize(kSignatureBytes);
  crypto_sign_detached(msg.signature.data(), nullptr, d.bytes.data(), d.bytes.size(),
                       sk.data());
  return msg;
}

/// Resubmits a message exactly as it was first sent.
inline ReportMsg attack_replay(const ReportMsg& old_msg) { return old_msg; }

/// Trains with tampered hyperparameters and/or data under honest recording.
inline ReportMsg attack_static(const Client& client, const RoundBroadcast& b,
                               const Hyperparams& hp_used,
                               const Dataset* data_used = nullptr) {
  const Dataset& data = data_used ? *data_used : client.shard();
  auto session = client.open_session(hp_used, data, b.global);
  auto res = local_train(b.global, data, hp_used, session->hooks());
  return session->attest(res.delta.values(), b.challenge.nonce, b.round);
}

}  // namespace attestfl
