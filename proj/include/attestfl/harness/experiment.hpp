#pragma once

#include <chrono>
#include <map>
#include <string>
#include <vector>

#include "attestfl/adversary.hpp"
#include "attestfl/aggregation.hpp"
#include "attestfl/harness/config.hpp"
#include "attestfl/protocol/transport.hpp"
#include "attestfl/protocol/wire.hpp"
#include "attestfl/verifier.hpp"

namespace attestfl {

struct RejectedClient {
  std::uint32_t client_id = 0;
  std::string reason;  // verdict reason field

  friend bool operator==(const RejectedClient&, const RejectedClient&) = default;
};

struct RoundRecord {
  std::uint32_t round = 0;
  double acc = 0.0;
  double asr = 0.0;
  std::vector<std::uint32_t> accepted;
  std::vector<RejectedClient> rejected;
  std::string rule;                     // rule actually applied, "-" if none
  std::optional<std::uint32_t> selected;  // Krum's pick
  std::size_t malicious_accepted = 0;
  std::size_t report_bytes = 0;  // all reports of the round
  // Wall clock, summed over clients.
  double train_ms = 0.0;
  double record_ms = 0.0;
  double sign_ms = 0.0;
  double verify_ms = 0.0;
};

struct ExperimentResult {
  std::vector<RoundRecord> rounds;
  std::vector<Verdict> verdicts;
  std::vector<std::uint32_t> malicious;
  ModelParams final_model;
};

/// Data, model geometry and clients of one configuration.
struct Environment {
  Dataset train;
  Dataset test;
  Dataset root;
  Architecture arch;
  TriggerSpec trigger;
  std::vector<Client> clients;
};

inline Environment build_environment(const ExperimentConfig& cfg) {
  Environment env;
  if (!cfg.train_csv.empty()) {
    env.train = load_csv_file(cfg.train_csv);
    env.test = load_csv_file(cfg.test_csv);
    if (env.train.features() != env.test.features()) {
      throw ConfigInvalid("test_csv", "feature count differs from train_csv");
    }
    env.test.num_classes = env.train.num_classes =
        std::max(env.train.num_classes, env.test.num_classes);
    std::vector<std::size_t> idx(env.train.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(cfg.seed ^ 0x5eedULL);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(cfg.root_samples, idx.size()));
    env.root = env.train.subset(idx);
  } else {
    SyntheticTask task(cfg.task);
    env.train = task.sample(cfg.n_clients * cfg.samples_per_client, cfg.seed * 3 + 1);
    env.test = task.sample(cfg.test_samples, cfg.seed * 3 + 2);
    env.root = task.sample(std::max<std::size_t>(cfg.root_samples, 1), cfg.seed * 3 + 3);
  }
  env.arch = mlp_architecture(static_cast<std::uint32_t>(env.train.features()), cfg.hidden,
                              env.train.num_classes);
  env.trigger = default_trigger(env.train);
  auto parts = partition_indices(env.train, cfg.n_clients, cfg.partition, cfg.seed);
  env.clients.reserve(cfg.n_clients);
  for (std::size_t i = 0; i < cfg.n_clients; ++i) {
    env.clients.emplace_back(static_cast<std::uint32_t>(i), cfg.seed,
                             env.train.subset(parts[i]), cfg.hp, env.arch.size());
  }
  return env;
}

namespace detail {
inline double ms(std::chrono::nanoseconds d) {
  return std::chrono::duration<double, std::milli>(d).count();
}

inline std::string rule_text(const AggRule& r) {
  std::string s = agg_name(r.kind);
  if (r.kind == AggKind::kKrum || r.kind == AggKind::kBulyan) {
    s += "(f=" + std::to_string(r.f) + ")";
  } else if (r.kind == AggKind::kTrimmedMean) {
    s += "(beta=" + std::to_string(r.beta) + ")";
  }
  return s;
}
}  // namespace detail

/// The full round loop: challenge, local training or attack, verification
/// (skipped when `cfg.verification` is off), aggregation and evaluation.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Environment env = build_environment(cfg);
  const auto& spec = cfg.attack;
  const auto n = env.clients.size();

  VerifierState verifier(env.arch, cfg.hp, cfg.check_dataset, cfg.seed);
  std::vector<std::uint32_t> ids;
  for (const auto& c : env.clients) {
    ids.push_back(c.id());
    verifier.register_client(c.id(), c.verify_key(), dataset_digest(c.shard()),
                             c.shard().size());
  }

  ExperimentResult result;
  if (cfg.has_attack()) {
    result.malicious = choose_malicious(n, spec.malicious_fraction, cfg.seed);
  }
  std::map<std::uint32_t, std::size_t> member_index;
  std::vector<const Client*> members;
  for (auto id : result.malicious) {
    member_index[id] = members.size();
    members.push_back(&env.clients[id]);
  }
  AttackSpec attack = spec;
  attack.trigger = env.trigger;
  const AggRule base_rule = cfg.rule();
  const std::size_t assumed_f =
      base_rule.kind == AggKind::kKrum ? base_rule.f : result.malicious.size();
  Coalition coalition(attack, members, n, assumed_f, cfg.seed);

  ModelParams theta = ModelParams::xavier(env.arch, cfg.seed);
  std::map<std::uint32_t, ReportMsg> previous;
  InMemoryTransport net;

  for (std::uint32_t t = 1; t <= cfg.rounds; ++t) {
    RoundRecord rec;
    rec.round = t;
    const auto challenges = verifier.begin_round(t, ids);

    Payload payload;
    if (is_payload_attack(spec.kind)) payload = coalition.craft(theta, t);

    for (const auto& client : env.clients) {
      const RoundBroadcast b{t, theta, challenges.at(client.id())};
      auto mi = member_index.find(client.id());
      ReportMsg msg;
      if (mi == member_index.end()) {
        ClientTimings tm;
        msg = client_round(client, b, &tm);
        rec.train_ms += detail::ms(tm.train);
        rec.record_ms += detail::ms(tm.record);
        rec.sign_ms += detail::ms(tm.sign);
      } else {
        const Update* p = payload.own_benign ? nullptr : &payload.vec;
        switch (spec.kind) {
          case AttackKind::kTargetedCf:
          case AttackKind::kUntargetedCf:
            msg = attack_cf(client, b, p);
            break;
          case AttackKind::kTargetedDo:
          case AttackKind::kUntargetedDo:
            msg = attack_do(client, b, p);
            break;
          case AttackKind::kForge: {
            auto body = client_round(client, b).body;
            for (auto& v : body.delta) v = -v;
            msg = attack_forge(client.id(), body, cfg.seed * 7919 + t);
            break;
          }
          case AttackKind::kReplay: {
            auto it = previous.find(client.id());
            msg = it == previous.end() ? client_round(client, b) : attack_replay(it->second);
            break;
          }
          case AttackKind::kStatic:
            if (spec.static_mode == StaticTamper::kLearningRate) {
              Hyperparams hp = client.hp();
              hp.learning_rate *= spec.lr_factor;
              msg = attack_static(client, b, hp);
            } else {
              msg = attack_static(client, b, client.hp(),
                                  &coalition.poisoned_shard(mi->second));
            }
            break;
          case AttackKind::kNone:
            msg = client_round(client, b);
            break;
        }
      }
      Bytes wire = encode_msg(msg);
      rec.report_bytes += wire.size();
      net.send(std::move(wire));
    }

    std::vector<ReportMsg> inbox;
    for (const auto& bytes : net.drain()) inbox.push_back(decode_msg(bytes));

    std::vector<AcceptedUpdate> accepted;
    if (cfg.verification) {
      const auto t0 = std::chrono::steady_clock::now();
      auto filtered = filter_round(verifier, inbox);
      rec.verify_ms = detail::ms(std::chrono::steady_clock::now() - t0);
      accepted = std::move(filtered.accepted);
      for (const auto& v : filtered.verdicts) {
        if (!v.accepted()) {
          rec.rejected.push_back({v.client_id, verdict_reason(v)});
        }
        result.verdicts.push_back(v);
      }
    } else {
      for (const auto& m : inbox) {
        accepted.push_back({m.body.client_id, m.body.delta});
        Verdict v;
        v.round = t;
        v.client_id = m.body.client_id;
        result.verdicts.push_back(v);
      }
    }
    std::sort(accepted.begin(), accepted.end(),
              [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
    std::sort(rec.rejected.begin(), rec.rejected.end(),
              [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
    for (const auto& a : accepted) {
      rec.accepted.push_back(a.client_id);
      rec.malicious_accepted += member_index.count(a.client_id);
    }

    rec.rule = "-";
    if (!accepted.empty()) {
      std::vector<std::span<const double>> deltas;
      for (const auto& a : accepted) deltas.emplace_back(a.delta);
      AggRule rule = clamp_rule(base_rule, deltas.size()).value_or(AggRule{});
      Update root;
      if (rule.kind == AggKind::kFlTrust) {
        root = local_train(theta, env.root, cfg.hp).delta.vector();
      }
      if (rule.kind == AggKind::kKrum) {
        rec.selected = accepted[krum_select(deltas, rule.f)].client_id;
      }
      Update agg;
      try {
        agg = aggregate(rule, deltas, root.empty() ? nullptr : &root);
      } catch (const Error& e) {
        if (e.code() != Errc::kZeroRootUpdate) throw;
        agg.assign(theta.size(), 0.0);
      }
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += agg[i];
      rec.rule = detail::rule_text(rule);
    }

    rec.acc = evaluate_acc(theta, env.test);
    rec.asr = evaluate_asr(theta, env.test, env.trigger);
    result.rounds.push_back(std::move(rec));

    for (const auto& m : inbox) {
      if (m.body.round == t) previous[m.body.client_id] = m;
    }
  }
  result.final_model = std::move(theta);
  return result;
}

}  // namespace attestfl
