#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fixture.hpp"

using namespace attestfl;

TEST(Verifier, HonestRoundAccepted) {
  MiniFederation fed;
  auto ch = fed.begin(1);
  for (const auto& c : fed.clients) {
    auto msg = client_round(c, fed.broadcast(1, ch.at(c.id())));
    auto v = verify_report(*fed.verifier, msg);
    EXPECT_TRUE(v.accepted()) << verdict_line(v);
  }
  EXPECT_EQ(fed.verifier->seen_count(), 4u);
}

TEST(Verifier, FreshnessChecks) {
  MiniFederation fed;
  auto ch1 = fed.begin(1);
  const auto& c = fed.clients[0];
  auto msg = client_round(c, fed.broadcast(1, ch1.at(0)));
  EXPECT_TRUE(verify_report(*fed.verifier, msg).accepted());
  EXPECT_EQ(verify_report(*fed.verifier, msg).reason, Reason::kReplay);

  // A second, different report against the consumed nonce.
  auto hp2 = c.hp();
  hp2.seed = 99;
  auto other = attack_static(c, fed.broadcast(1, ch1.at(0)), hp2);
  EXPECT_NE(body_digest(other.body), body_digest(msg.body));
  EXPECT_EQ(verify_report(*fed.verifier, other).reason, Reason::kStaleOrUnknownChallenge);

  auto ch2 = fed.begin(2);
  EXPECT_EQ(verify_report(*fed.verifier, msg).reason, Reason::kStaleOrUnknownChallenge);

  // Report claiming a round the server has not opened.
  auto future = client_round(c, fed.broadcast(3, ch2.at(0)));
  EXPECT_EQ(verify_report(*fed.verifier, future).reason, Reason::kWrongRound);

  // Right round, wrong nonce.
  auto wrong = client_round(c, fed.broadcast(2, ch2.at(1)));
  EXPECT_EQ(verify_report(*fed.verifier, wrong).reason, Reason::kStaleOrUnknownChallenge);

  auto ok = client_round(c, fed.broadcast(2, ch2.at(0)));
  EXPECT_TRUE(verify_report(*fed.verifier, ok).accepted());
}

TEST(Verifier, IdentityChecks) {
  MiniFederation fed;
  auto ch = fed.begin(1);
  auto msg = client_round(fed.clients[1], fed.broadcast(1, ch.at(1)));

  auto unknown = msg;
  unknown.body.client_id = 77;
  EXPECT_EQ(verify_report(*fed.verifier, unknown).reason, Reason::kUnknownClient);

  auto forged = attack_forge(1, msg.body, 12345);
  EXPECT_EQ(verify_report(*fed.verifier, forged).reason, Reason::kSignatureInvalid);

  // Body signed by client 1's TEE but relabelled as client 2.
  auto swapped = msg;
  swapped.body.client_id = 2;
  EXPECT_EQ(verify_report(*fed.verifier, swapped).reason, Reason::kSignatureInvalid);

  auto shortsig = msg;
  shortsig.signature.resize(10);
  EXPECT_EQ(verify_report(*fed.verifier, shortsig).reason, Reason::kSignatureInvalid);

  auto tampered = msg;
  tampered.body.delta[3] += 1e-9;
  EXPECT_EQ(verify_report(*fed.verifier, tampered).reason, Reason::kSignatureInvalid);

  EXPECT_TRUE(verify_report(*fed.verifier, msg).accepted());
}

TEST(Verifier, ExecutionChecks) {
  MiniFederation fed;
  auto ch = fed.begin(1);
  const auto& c = fed.clients[2];
  auto b = fed.broadcast(1, ch.at(2));
  const auto honest = client_round(c, b);

  std::vector<double> payload(honest.body.delta.size(), 0.05);
  auto cf = attack_cf(c, b, &payload);
  auto v = verify_report(*fed.verifier, cf);
  EXPECT_EQ(v.reason, Reason::kCfgViolation);
  ASSERT_TRUE(v.first_bad_seq);
  EXPECT_EQ(cf.body.cf.events[*v.first_bad_seq].target, kRogueOptimizerEntry);

  auto dop = attack_do(c, b, &payload);
  EXPECT_EQ(verify_report(*fed.verifier, dop).reason, Reason::kDeltaMismatch);

  auto hp = c.hp();
  hp.learning_rate *= 100;
  EXPECT_EQ(verify_report(*fed.verifier, attack_static(c, b, hp)).reason,
            Reason::kStaticVarViolation);

  auto other = poison_shard(c.shard(), default_trigger(c.shard()), 0.5, 1);
  EXPECT_EQ(verify_report(*fed.verifier, attack_static(c, b, c.hp(), &other)).reason,
            Reason::kStaticVarViolation);

  // Degenerate attacks are honest runs.
  EXPECT_EQ(attack_cf(c, b, nullptr).body, honest.body);
  EXPECT_EQ(attack_do(c, b, nullptr).body, honest.body);
  EXPECT_EQ(attack_static(c, b, c.hp()).body, honest.body);
  auto own = honest.body.delta;
  EXPECT_EQ(attack_do(c, b, &own).body, honest.body);
  EXPECT_TRUE(verify_report(*fed.verifier, honest).accepted());
}

TEST(Verifier, DatasetCheckCanBeDisabled) {
  MiniFederation fed;
  VerifierState loose(fed.arch, fed.hp, false, 9);
  for (const auto& c : fed.clients) {
    loose.register_client(c.id(), c.verify_key(), dataset_digest(c.shard()),
                          c.shard().size());
  }
  auto ch = loose.begin_round(1, fed.ids());
  const auto& c = fed.clients[0];
  auto other = poison_shard(c.shard(), default_trigger(c.shard()), 0.5, 1);
  auto msg = attack_static(c, fed.broadcast(1, ch.at(0)), c.hp(), &other);
  EXPECT_TRUE(verify_report(loose, msg).accepted());
}

TEST(Verifier, DependencyViolationReported) {
  MiniFederation fed;
  auto ch = fed.begin(1);
  const auto& c = fed.clients[3];
  auto msg = client_round(c, fed.broadcast(1, ch.at(3)));
  // Re-sign a trace whose dependency list was edited, standing in for a
  // compromised measurement path.
  auto& ev = msg.body.cv.dynamic.at(5);
  ASSERT_FALSE(ev.deps.empty());
  ev.deps.pop_back();
  msg.signature = tee_sign(tee_keygen(c.id(), 3), msg.body);
  auto v = verify_report(*fed.verifier, msg);
  EXPECT_EQ(v.reason, Reason::kDependencyViolation);
  EXPECT_EQ(v.step, ev.step);
  EXPECT_EQ(v.var, ev.var);
  EXPECT_NE(verdict_line(v).find("DependencyViolation("), std::string::npos);
}

TEST(Verifier, FilterRoundIsOrderIndependent) {
  std::vector<std::string> reference;
  for (int trial = 0; trial < 6; ++trial) {
    MiniFederation fed;
    auto ch = fed.begin(1);
    std::vector<ReportMsg> msgs;
    for (const auto& c : fed.clients) msgs.push_back(client_round(c, fed.broadcast(1, ch.at(c.id()))));
    msgs.push_back(msgs[1]);  // duplicate delivery
    auto hp = fed.clients[2].hp();
    hp.seed = 5;
    msgs.push_back(attack_static(fed.clients[2], fed.broadcast(1, ch.at(2)), hp));
    std::mt19937_64 rng(trial);
    if (trial > 0) std::shuffle(msgs.begin(), msgs.end(), rng);
    auto out = filter_round(*fed.verifier, msgs);
    std::ostringstream log;
    write_verdict_log(log, out.verdicts);
    std::vector<std::string> lines;
    std::string line;
    std::istringstream in(log.str());
    while (std::getline(in, line)) lines.push_back(line);
    std::sort(lines.begin(), lines.end());
    if (trial == 0) {
      reference = lines;
      ASSERT_EQ(lines.size(), 6u);
      std::size_t replay = 0, accepted = 0;
      for (const auto& v : out.verdicts) {
        replay += v.reason == Reason::kReplay;
        accepted += v.accepted();
      }
      EXPECT_EQ(replay, 1u);
      EXPECT_EQ(out.accepted.size(), accepted);
    } else {
      EXPECT_EQ(lines, reference);
    }
  }
}

TEST(Verifier, VerdictLineFormat) {
  Verdict v;
  v.round = 4;
  v.client_id = 7;
  EXPECT_EQ(verdict_line(v), "4,7,accept,,");
  v.reason = Reason::kCfgViolation;
  v.first_bad_seq = 12;
  EXPECT_EQ(verdict_line(v), "4,7,reject,CfgViolation,12");
}
