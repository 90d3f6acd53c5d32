#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "attestfl/model/params.hpp"
#include "attestfl/protocol/challenge.hpp"
#include "attestfl/tee/identity.hpp"
#include "attestfl/trace/expected.hpp"

namespace attestfl {

/// Rejection reasons in check order.
enum class Reason : std::uint8_t {
  kNone = 0,
  kUnknownClient,
  kSignatureInvalid,
  kWrongRound,
  kStaleOrUnknownChallenge,
  kReplay,
  kCfgViolation,
  kStaticVarViolation,
  kDependencyViolation,
  kDeltaMismatch,
};

inline const char* reason_name(Reason r) {
  switch (r) {
    case Reason::kNone: return "None";
    case Reason::kUnknownClient: return "UnknownClient";
    case Reason::kSignatureInvalid: return "SignatureInvalid";
    case Reason::kWrongRound: return "WrongRound";
    case Reason::kStaleOrUnknownChallenge: return "StaleOrUnknownChallenge";
    case Reason::kReplay: return "Replay";
    case Reason::kCfgViolation: return "CfgViolation";
    case Reason::kStaticVarViolation: return "StaticVarViolation";
    case Reason::kDependencyViolation: return "DependencyViolation";
    case Reason::kDeltaMismatch: return "DeltaMismatch";
  }
  return "?";
}

struct Verdict {
  std::uint32_t round = 0;
  std::uint32_t client_id = 0;
  Reason reason = Reason::kNone;
  std::optional<std::size_t> first_bad_seq;  // CfgViolation
  TrainStep step;                            // DependencyViolation
  VarRef var;                                // DependencyViolation

  bool accepted() const noexcept { return reason == Reason::kNone; }

  static Verdict reject(const ReportBody& b, Reason r) {
    Verdict v;
    v.round = b.round;
    v.client_id = b.client_id;
    v.reason = r;
    return v;
  }
};

/// Reason field of the verdict log: empty on accept, and
/// `DependencyViolation(epoch:batch:Var)` for dependency violations.
inline std::string verdict_reason(const Verdict& v) {
  std::string reason = v.accepted() ? "" : reason_name(v.reason);
  if (v.reason == Reason::kDependencyViolation) {
    reason += "(" + std::to_string(v.step.epoch) + ":" +
              std::to_string(v.step.batch) + ":" + var_name(v.var) + ")";
  }
  return reason;
}

/// `round,client_id,outcome,reason,first_bad_seq`.
inline std::string verdict_line(const Verdict& v) {
  return std::to_string(v.round) + "," + std::to_string(v.client_id) + "," +
         (v.accepted() ? "accept" : "reject") + "," + verdict_reason(v) + "," +
         (v.first_bad_seq ? std::to_string(*v.first_bad_seq) : "");
}

inline void write_verdict_log(std::ostream& out, const std::vector<Verdict>& vs) {
  for (const auto& v : vs) out << verdict_line(v) << '\n';
}

/// What the server knows about a registered client.
struct ClientRecord {
  VerifyKey key{};
  Digest shard_digest;
  std::size_t shard_size = 0;
};

/// Server-side verification state: key registry, issued challenges, replay
/// cache and the expected training program.
class VerifierState {
 public:
  VerifierState(Architecture arch, Hyperparams hp, bool check_dataset = true,
                std::uint64_t nonce_seed = 0)
      : arch_(std::move(arch)),
        hp_(hp),
        check_dataset_(check_dataset),
        nonces_(nonce_seed) {
    hp_.validate();
  }

  void register_client(std::uint32_t id, const VerifyKey& key,
                       const Digest& shard_digest, std::size_t shard_size) {
    registry_[id] = ClientRecord{key, shard_digest, shard_size};
  }

  /// Opens `round` and issues one challenge per listed client.
  template <class ClientIds>
  std::map<std::uint32_t, Challenge> begin_round(std::uint32_t round,
                                                 const ClientIds& ids) {
    round_ = round;
    return issue_challenges(round, ids, nonces_, issued_);
  }

  std::uint32_t round() const noexcept { return round_; }
  const Hyperparams& hp() const noexcept { return hp_; }
  const Architecture& arch() const noexcept { return arch_; }
  const ChallengeBook& issued() const noexcept { return issued_; }
  std::size_t seen_count() const noexcept { return seen_.size(); }
  bool contains(std::uint32_t id) const { return registry_.count(id) != 0; }

  const ExpectedProgram& expected_for(std::size_t shard_size) {
    auto it = expected_.find(shard_size);
    if (it == expected_.end()) {
      it = expected_.emplace(shard_size, build_expected(arch_, hp_, shard_size)).first;
    }
    return it->second;
  }

  Verdict verify(const ReportMsg& msg) {
    const auto& b = msg.body;
    auto reg = registry_.find(b.client_id);
    if (reg == registry_.end()) return Verdict::reject(b, Reason::kUnknownClient);

    const Digest digest = body_digest(b);
    bool sig_ok = false;
    try {
      sig_ok = tee_verify_digest(reg->second.key, digest, msg.signature);
    } catch (const Error&) {
      sig_ok = false;
    }
    if (!sig_ok) return Verdict::reject(b, Reason::kSignatureInvalid);

    if (b.round > round_) return Verdict::reject(b, Reason::kWrongRound);
    const auto* entry = issued_.find(b.round, b.client_id);
    if (b.round != round_ || entry == nullptr || entry->nonce != b.challenge) {
      return Verdict::reject(b, Reason::kStaleOrUnknownChallenge);
    }
    if (seen_.count(digest)) return Verdict::reject(b, Reason::kReplay);
    if (entry->consumed) {
      return Verdict::reject(b, Reason::kStaleOrUnknownChallenge);
    }

    const auto& expected = expected_for(reg->second.shard_size);
    auto cf = conform_cf(b.cf, expected);
    if (!cf.ok) {
      auto v = Verdict::reject(b, Reason::kCfgViolation);
      v.first_bad_seq = cf.first_bad;
      return v;
    }
    std::optional<Digest> ds;
    if (check_dataset_) ds = reg->second.shard_digest;
    auto cv = conform_cv(b.cv, expected, hp_, ds, b.delta);
    switch (cv.kind) {
      case CvConformance::Kind::kOk: break;
      case CvConformance::Kind::kStaticViolation:
        return Verdict::reject(b, Reason::kStaticVarViolation);
      case CvConformance::Kind::kDepViolation: {
        auto v = Verdict::reject(b, Reason::kDependencyViolation);
        v.step = cv.step;
        v.var = cv.var;
        return v;
      }
      case CvConformance::Kind::kDeltaMismatch:
        return Verdict::reject(b, Reason::kDeltaMismatch);
    }

    issued_.consume(b.round, b.client_id);
    seen_.insert(digest);
    Verdict v;
    v.round = b.round;
    v.client_id = b.client_id;
    return v;
  }

 private:
  Architecture arch_;
  Hyperparams hp_;
  bool check_dataset_;
  NonceGenerator nonces_;
  std::map<std::uint32_t, ClientRecord> registry_;
  ChallengeBook issued_;
  std::set<Digest> seen_;
  std::map<std::size_t, ExpectedProgram> expected_;
  std::uint32_t round_ = 0;
};

inline Verdict verify_report(VerifierState& state, const ReportMsg& msg) {
  return state.verify(msg);
}

struct AcceptedUpdate {
  std::uint32_t client_id = 0;
  std::vector<double> delta;
};

struct RoundFilter {
  std::vector<AcceptedUpdate> accepted;  // ascending client id
  std::vector<Verdict> verdicts;         // in processing order
};

/// Verifies a round's reports in a canonical order (client id, then body
/// digest) so the outcome does not depend on arrival order.
inline RoundFilter filter_round(VerifierState& state, std::vector<ReportMsg> msgs) {
  std::vector<std::pair<Digest, std::size_t>> keyed;
  keyed.reserve(msgs.size());
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    keyed.emplace_back(body_digest(msgs[i].body), i);
  }
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    const auto& ma = msgs[a.second];
    const auto& mb = msgs[b.second];
    return std::tie(ma.body.client_id, a.first, ma.signature) <
           std::tie(mb.body.client_id, b.first, mb.signature);
  });
  RoundFilter out;
  for (const auto& [d, i] : keyed) {
    auto v = state.verify(msgs[i]);
    if (v.accepted()) out.accepted.push_back({v.client_id, msgs[i].body.delta});
    out.verdicts.push_back(v);
  }
  return out;
}

}  // namespace attestfl
