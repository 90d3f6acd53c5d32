#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "attestfl.hpp"

using namespace attestfl;

namespace {

constexpr int kExitMismatch = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void print_summary(const ExperimentConfig& cfg, const ExperimentResult& r) {
  std::size_t rejected = 0;
  for (const auto& rec : r.rounds) rejected += rec.rejected.size();
  std::cerr << agg_name(cfg.aggregator) << " attack=" << attack_name(cfg.attack.kind)
            << " verification=" << (cfg.verification ? "on" : "off")
            << " rounds=" << r.rounds.size() << " final_acc=" << r.rounds.back().acc
            << " final_asr=" << r.rounds.back().asr << " rejected_reports=" << rejected
            << '\n';
}

int cmd_run(const std::string& config_path, std::string output, std::string format,
            std::string verdict_log) {
  ExperimentConfig cfg = load_config(config_path);
  if (!output.empty()) cfg.output = output;
  if (!verdict_log.empty()) cfg.verdict_log = verdict_log;
  if (format == "json") {
    cfg.format = ResultFormat::kJson;
  } else if (format == "csv") {
    cfg.format = ResultFormat::kCsv;
  }
  auto result = run_experiment(cfg);
  if (cfg.output.empty()) {
    emit_results(std::cout, result.rounds, cfg.format);
  } else {
    emit_results(cfg.output, result.rounds, cfg.format);
  }
  if (!cfg.verdict_log.empty()) {
    std::ofstream log(cfg.verdict_log);
    if (!log) throw Error(Errc::kIo, "cannot write '" + cfg.verdict_log + "'");
    write_verdict_log(log, result.verdicts);
  }
  print_summary(cfg, result);
  return 0;
}

int cmd_overhead(const std::string& config_path, std::size_t reps, bool scaling) {
  ExperimentConfig cfg = load_config(config_path);
  OverheadOptions opt;
  opt.repetitions = reps;
  write_overhead_csv(std::cout, measure_overhead(cfg, opt));
  if (scaling) {
    auto scan = scaling_scan(cfg);
    std::cout << "\nsteps,trace_events,report_bytes,verify_ms\n";
    for (const auto& p : scan.points) {
      std::cout << p.steps << ',' << p.trace_events << ',' << p.report_bytes << ','
                << p.verify_ms << '\n';
    }
    std::cout << "# report_bytes ~ trace_events: slope=" << scan.bytes_vs_events.slope
              << " r2=" << scan.bytes_vs_events.r2 << '\n'
              << "# verify_ms ~ trace_events: slope=" << scan.verify_vs_events.slope
              << " r2=" << scan.verify_vs_events.r2 << '\n';
  }
  return 0;
}

int cmd_dump_trace(const std::string& config_path, std::uint32_t client_index,
                   const std::string& output) {
  ExperimentConfig cfg = load_config(config_path);
  Environment env = build_environment(cfg);
  if (client_index >= env.clients.size()) {
    throw ConfigInvalid("client", "no such client");
  }
  const Client& c = env.clients[client_index];
  NonceGenerator nonces(cfg.seed);
  RoundBroadcast b{1, ModelParams::xavier(env.arch, cfg.seed), {1, nonces.next()}};
  auto msg = client_round(c, b);
  TraceDumpHeader h{c.hp().local_epochs, c.hp().batches_for(c.shard().size()),
                    static_cast<std::uint32_t>(env.arch.size())};
  if (output.empty() || output == "-") {
    write_trace_dump(std::cout, msg.body.cf, h);
  } else {
    std::ofstream out(output);
    if (!out) throw Error(Errc::kIo, "cannot write '" + output + "'");
    write_trace_dump(out, msg.body.cf, h);
  }
  return 0;
}

int cmd_verify_trace(const std::string& path, std::optional<std::uint32_t> epochs,
                     std::optional<std::uint32_t> batches,
                     std::optional<std::uint32_t> layers) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot open '" + path + "'");
  TraceDump dump = read_trace_dump(in);
  TraceDumpHeader h = dump.header.value_or(TraceDumpHeader{});
  if (epochs) h.epochs = *epochs;
  if (batches) h.batches = *batches;
  if (layers) h.layers = *layers;
  if (h.epochs == 0 || h.batches == 0 || h.layers == 0) {
    throw ConfigInvalid("trace header", "epochs, batches and layers must be known");
  }
  ExpectedProgram expected(make_site_table(h.layers), h.epochs, h.batches, h.layers);
  auto res = conform_cf(dump.trace, expected);
  if (res.ok) {
    std::cout << "conforms: " << dump.trace.events.size() << " events\n";
    return 0;
  }
  std::cout << "mismatch at seq " << res.first_bad;
  const auto want = expected.expected_trace();
  if (res.first_bad < dump.trace.events.size()) {
    const auto& e = dump.trace.events[res.first_bad];
    std::cout << ": got " << cf_kind_name(e.kind) << ' ' << e.site << ' ' << e.target;
  } else {
    std::cout << ": trace ended early";
  }
  if (res.first_bad < want.size()) {
    const auto& e = want[res.first_bad];
    std::cout << ", expected " << cf_kind_name(e.kind) << ' ' << e.site << ' ' << e.target;
  } else {
    std::cout << ", expected end of trace";
  }
  std::cout << '\n';
  return kExitMismatch;
}

int cmd_attack_matrix(const std::string& config_path, std::optional<std::uint32_t> rounds,
                      const std::string& output) {
  ExperimentConfig base = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
  if (rounds) base.rounds = *rounds;
  base.validate();
  auto cells = attack_matrix(base, [](const MatrixCell& c) {
    std::cerr << attack_name(c.attack) << ' ' << agg_name(c.aggregator) << ' '
              << (c.verification ? "on" : "off") << " acc=" << c.final_acc
              << " asr=" << c.last5_asr << '\n';
  });
  if (output.empty()) {
    write_matrix_csv(std::cout, cells);
  } else {
    std::ofstream out(output);
    if (!out) throw Error(Errc::kIo, "cannot write '" + output + "'");
    write_matrix_csv(out, cells);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with execution-trace attestation"};
  app.require_subcommand(1);

  std::string config, output, format, verdict_log, trace_path;
  std::size_t reps = 64;
  bool scaling = false;
  std::uint32_t client_index = 0;
  std::optional<std::uint32_t> epochs, batches, layers, rounds;

  auto* run = app.add_subcommand("run", "Run one experiment and write per-round results");
  run->add_option("--config", config, "Config file")->required();
  run->add_option("--output", output, "Results file (overrides config; default stdout)");
  run->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--verdict-log", verdict_log, "Write the verifier's verdict log here");

  auto* ovh = app.add_subcommand("overhead", "Measure recording, signing and verification cost");
  ovh->add_option("--config", config, "Config file")->required();
  ovh->add_option("--reps", reps, "Repetitions per batch size")->check(CLI::PositiveNumber);
  ovh->add_flag("--scaling", scaling, "Also fit report size and verify time vs trace length");

  auto* dump = app.add_subcommand("dump-trace", "Write an honest client's round-1 trace dump");
  dump->add_option("--config", config, "Config file")->required();
  dump->add_option("--client", client_index, "Client index");
  dump->add_option("--output", output, "Dump file (default stdout)");

  auto* vt = app.add_subcommand("verify-trace", "Check a trace dump against the expected program");
  vt->add_option("dump", trace_path, "Trace dump file")->required();
  vt->add_option("--epochs", epochs, "Override the header's epoch count");
  vt->add_option("--batches", batches, "Override the header's batch count");
  vt->add_option("--layers", layers, "Override the header's layer count");

  auto* am = app.add_subcommand("attack-matrix", "Run the attack x aggregator x verification grid");
  am->add_option("--config", config, "Base config file");
  am->add_option("--rounds", rounds, "Override the number of rounds");
  am->add_option("--output", output, "CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config, output, format, verdict_log);
    if (*ovh) return cmd_overhead(config, reps, scaling);
    if (*dump) return cmd_dump_trace(config, client_index, output);
    if (*vt) return cmd_verify_trace(trace_path, epochs, batches, layers);
    if (*am) return cmd_attack_matrix(config, rounds, output);
  } catch (const ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
