#include <gtest/gtest.h>

#include <sstream>

#include "attestfl.hpp"

using namespace attestfl;

namespace {

// Small enough to run in well under a second.
const char* kTiny = R"(
clients = 8
rounds = 3
samples_per_client = 30
test_samples = 200
features = 16
informative = 13
hidden = 8
epochs = 5
seed = 4
)";

ExperimentConfig tiny(const std::string& extra = "") {
  return parse_config_string(std::string(kTiny) + extra);
}

std::string field_of(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const ConfigInvalid& e) {
    return e.field();
  }
  return "<none>";
}

std::string csv(const std::vector<RoundRecord>& rs, bool timing) {
  std::ostringstream os;
  write_results_csv(os, rs, timing);
  return os.str();
}

}  // namespace

TEST(Config, ParsesKeysCommentsAndQuotedLists) {
  auto cfg = parse_config_string(R"(
# comment line
clients = 12   # trailing comment
rounds = 4
partition = noniid
aggregator = "bulyan", f = 2
hidden = "16,8"
learning_rate = 0.005
optimizer = sgd
attack = t_do
malicious_fraction = 0.25
boost = 0
verification = off
output = 'out.csv'
format = json
)");
  EXPECT_EQ(cfg.n_clients, 12u);
  EXPECT_EQ(cfg.rounds, 4u);
  EXPECT_EQ(cfg.partition, PartitionMode::kNonIid);
  EXPECT_EQ(cfg.aggregator, AggKind::kBulyan);
  EXPECT_EQ(cfg.f, 2u);
  EXPECT_EQ(cfg.hidden, (std::vector<std::uint32_t>{16, 8}));
  EXPECT_DOUBLE_EQ(cfg.hp.learning_rate, 0.005);
  EXPECT_EQ(cfg.hp.optimizer, OptimizerKind::kSgd);
  EXPECT_EQ(cfg.attack.kind, AttackKind::kTargetedDo);
  EXPECT_EQ(cfg.attack.boost, 0.0);
  EXPECT_FALSE(cfg.verification);
  EXPECT_EQ(cfg.output, "out.csv");
  EXPECT_EQ(cfg.format, ResultFormat::kJson);
  EXPECT_EQ(cfg.malicious_count(), 3u);
}

TEST(Config, DefaultFollowsMaliciousCountWithinBounds) {
  auto cfg = parse_config_string("aggregator = bulyan\nattack = t_cf\n");
  EXPECT_EQ(cfg.malicious_count(), 5u);
  EXPECT_EQ(cfg.rule().f, 4u);
  cfg = parse_config_string("aggregator = krum\nattack = t_cf\n");
  EXPECT_EQ(cfg.rule().f, 5u);
  cfg = parse_config_string("aggregator = krum\n");
  EXPECT_EQ(cfg.rule().f, 0u);
}

TEST(Config, Errors) {
  EXPECT_EQ(field_of("colour = red"), "colour");
  EXPECT_EQ(field_of("rounds = 0"), "rounds");
  EXPECT_EQ(field_of("rounds = three"), "rounds");
  EXPECT_EQ(field_of("clients = -4"), "clients");
  EXPECT_EQ(field_of("seed = 1\nseed = 2"), "seed");
  EXPECT_EQ(field_of("aggregator = krum, f = 18"), "f");
  EXPECT_EQ(field_of("clients = 10\naggregator = bulyan, f = 2"), "f");
  EXPECT_EQ(field_of("aggregator = trimmed_mean, beta = 10"), "beta");
  EXPECT_EQ(field_of("aggregator = median"), "aggregator");
  EXPECT_EQ(field_of("attack = t_do\nmalicious_fraction = 0"), "malicious_fraction");
  EXPECT_EQ(field_of("verification = maybe"), "verification");
  EXPECT_EQ(field_of("clients = 1\npartition = noniid"), "partition");
  EXPECT_EQ(field_of("informative = 99"), "informative");
  EXPECT_EQ(field_of("learning_rate = 0"), "hyperparameters");
  EXPECT_EQ(field_of("train_csv = a.csv"), "test_csv");
  EXPECT_EQ(field_of("just words"), "line 1");
  EXPECT_EQ(field_of("output = \"x"), "line 1");
  EXPECT_THROW(load_config("/nonexistent/file.conf"), ConfigInvalid);
}

TEST(Experiment, HonestRunIsDeterministicAndComplete) {
  auto cfg = tiny();
  auto a = run_experiment(cfg);
  auto b = run_experiment(cfg);
  ASSERT_EQ(a.rounds.size(), 3u);
  EXPECT_EQ(csv(a.rounds, false), csv(b.rounds, false));
  EXPECT_EQ(a.final_model.vector(), b.final_model.vector());
  for (const auto& r : a.rounds) {
    EXPECT_EQ(r.accepted.size(), cfg.n_clients);
    EXPECT_TRUE(r.rejected.empty());
    EXPECT_GT(r.report_bytes, 0u);
  }
  EXPECT_GT(a.rounds.back().acc, 0.5);
}

TEST(Experiment, MaliciousReportsRejectedWithExpectedReason) {
  struct Case {
    const char* attack;
    const char* reason;
    std::uint32_t from_round;
  };
  for (const Case& c : {Case{"t_cf", "CfgViolation", 1}, Case{"unt_cf", "CfgViolation", 1},
                        Case{"t_do", "DeltaMismatch", 1}, Case{"unt_do", "DeltaMismatch", 1},
                        Case{"forge", "SignatureInvalid", 1},
                        Case{"replay", "StaleOrUnknownChallenge", 2},
                        Case{"static", "StaticVarViolation", 1}}) {
    auto cfg = tiny(std::string("attack = ") + c.attack + "\naggregator = krum\n");
    auto res = run_experiment(cfg);
    ASSERT_EQ(res.malicious.size(), 2u);
    for (const auto& r : res.rounds) {
      EXPECT_EQ(r.accepted.size() + r.rejected.size(), cfg.n_clients) << c.attack;
      if (r.round < c.from_round) continue;
      EXPECT_EQ(r.malicious_accepted, 0u) << c.attack;
      ASSERT_EQ(r.rejected.size(), res.malicious.size()) << c.attack;
      for (std::size_t k = 0; k < r.rejected.size(); ++k) {
        EXPECT_EQ(r.rejected[k].client_id, res.malicious[k]);
        EXPECT_EQ(r.rejected[k].reason, c.reason) << c.attack;
      }
    }
  }
}

TEST(Experiment, VerificationOffAcceptsEverything) {
  auto res = run_experiment(tiny("attack = t_do\nverification = false\naggregator = krum\n"));
  for (const auto& r : res.rounds) {
    EXPECT_EQ(r.accepted.size(), 8u);
    EXPECT_TRUE(r.rejected.empty());
    EXPECT_EQ(r.malicious_accepted, 2u);
    EXPECT_TRUE(r.selected.has_value());
  }
}

TEST(Experiment, StaticDatasetSwapDetected) {
  auto res = run_experiment(tiny("attack = static\nstatic_mode = dataset\n"));
  for (const auto& r : res.rounds) {
    ASSERT_EQ(r.rejected.size(), 2u);
    EXPECT_EQ(r.rejected[0].reason, "StaticVarViolation");
  }
  res = run_experiment(tiny("attack = static\nstatic_mode = dataset\ncheck_dataset = false\n"));
  for (const auto& r : res.rounds) EXPECT_TRUE(r.rejected.empty());
}

TEST(Experiment, EveryAggregatorRuns) {
  for (const char* agg : {"fedavg", "krum", "coomed", "trimmed_mean", "bulyan", "fltrust"}) {
    auto res = run_experiment(tiny(std::string("aggregator = ") + agg + "\nattack = t_do\n"));
    EXPECT_NE(res.rounds.back().rule, "-") << agg;
    for (const auto& r : res.rounds) EXPECT_EQ(r.malicious_accepted, 0u) << agg;
  }
}

TEST(Results, CsvAndJsonRoundTrip) {
  auto res = run_experiment(tiny("attack = t_cf\n"));
  for (bool timing : {true, false}) {
    std::stringstream ss;
    write_results_csv(ss, res.rounds, timing);
    auto back = read_results_csv(ss);
    EXPECT_EQ(csv(back, timing), csv(res.rounds, timing));
    std::stringstream js;
    emit_results(js, res.rounds, ResultFormat::kJson, timing);
    auto jback = read_results(js, ResultFormat::kJson);
    EXPECT_EQ(csv(jback, timing), csv(res.rounds, timing));
  }
  RoundRecord dep;
  dep.round = 2;
  dep.rejected.push_back({3, "DependencyViolation(0:1:Weights1)"});
  std::stringstream ss;
  write_results_csv(ss, {dep});
  EXPECT_EQ(read_results_csv(ss)[0].rejected, dep.rejected);
}

TEST(Results, EmptyRunAndRangeChecks) {
  EXPECT_EQ(csv({}, true), "round,acc,asr,accepted,rejected,rule,selected,malicious_accepted,"
                           "report_bytes,train_ms,record_ms,sign_ms,verify_ms\n");
  std::stringstream js;
  emit_results(js, {}, ResultFormat::kJson);
  EXPECT_EQ(read_results(js, ResultFormat::kJson).size(), 0u);
  RoundRecord bad;
  bad.acc = 1.5;
  std::stringstream ss;
  EXPECT_THROW(write_results_csv(ss, {bad}), Error);
  std::stringstream garbage("not,a,header\n");
  EXPECT_THROW(read_results_csv(garbage), Error);
}

TEST(Overhead, LinearFit) {
  auto f = linear_fit({1, 2, 3, 4}, {3, 5, 7, 9});
  EXPECT_DOUBLE_EQ(f.slope, 2.0);
  EXPECT_DOUBLE_EQ(f.intercept, 1.0);
  EXPECT_DOUBLE_EQ(f.r2, 1.0);
  EXPECT_LT(linear_fit({1, 2, 3, 4}, {1, -1, 1, -1}).r2, 0.5);
  EXPECT_THROW(linear_fit({1}, {1}), Error);
  EXPECT_THROW(linear_fit({2, 2}, {1, 3}), Error);
}

TEST(Overhead, TableAndScalingShape) {
  auto cfg = tiny();
  OverheadOptions opt;
  opt.batch_sizes = {8, 16};
  opt.repetitions = 3;
  auto rows = measure_overhead(cfg, opt);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].batch_size, 8u);
  EXPECT_EQ(rows[0].steps, cfg.hp.local_epochs * opt.batches_per_epoch);
  EXPECT_EQ(rows[0].trace_events, rows[1].trace_events);
  EXPECT_GT(rows[0].train_ms_plain, 0.0);
  EXPECT_GT(rows[0].report_bytes, kBodyFixedBytes);

  auto scan = scaling_scan(cfg, {2, 4, 8}, 3);
  ASSERT_EQ(scan.points.size(), 3u);
  EXPECT_NEAR(scan.bytes_vs_events.r2, 1.0, 1e-12);
  for (const auto& p : scan.points) {
    // One epoch of B batches: 3 + 2 + B * (7 + 4l) events with l = 2.
    EXPECT_EQ(p.trace_events, 5 + p.steps * 15);
  }
}
