#pragma once

#include <algorithm>
#include <chrono>
#include <ostream>
#include <vector>

#include "attestfl/harness/config.hpp"
#include "attestfl/harness/results.hpp"
#include "attestfl/protocol/client.hpp"
#include "attestfl/protocol/wire.hpp"
#include "attestfl/verifier.hpp"

namespace attestfl {

struct OverheadRow {
  std::uint32_t batch_size = 0;
  std::size_t steps = 0;  // epochs * batches
  std::size_t trace_events = 0;
  double train_ms_plain = 0.0;
  double train_ms_recorded = 0.0;
  double overhead_ratio = 0.0;  // (recorded - plain) / plain
  std::size_t report_bytes = 0;
  double sign_ms = 0.0;
  double verify_ms = 0.0;
};

struct OverheadOptions {
  std::vector<std::uint32_t> batch_sizes = {64, 128, 256};
  std::size_t repetitions = 64;
  std::size_t batches_per_epoch = 4;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(Errc::kInvalidArgument, "linear fit needs at least two paired points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw Error(Errc::kInvalidArgument, "linear fit needs distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

struct Sample {
  double plain_ms, recorded_ms, sign_ms, verify_ms;
  std::size_t bytes, events;
};

/// One timed client round plus its verification. Callers run one extra
/// warm-up repetition and drop it.
inline Sample time_round(const Client& client, const Architecture& arch,
                         const ModelParams& w0, std::uint32_t round) {
  Sample s{};
  auto t0 = std::chrono::steady_clock::now();
  local_train(w0, client.shard(), client.hp());
  s.plain_ms = elapsed_ms(t0);

  VerifierState verifier(arch, client.hp(), true, round);
  verifier.register_client(client.id(), client.verify_key(), dataset_digest(client.shard()),
                           client.shard().size());
  verifier.expected_for(client.shard().size());
  const auto ch = verifier.begin_round(round, std::vector<std::uint32_t>{client.id()});

  ClientTimings tm;
  t0 = std::chrono::steady_clock::now();
  const ReportMsg msg = client_round(client, {round, w0, ch.at(client.id())}, &tm);
  s.recorded_ms = std::chrono::duration<double, std::milli>(tm.train).count();
  s.sign_ms = std::chrono::duration<double, std::milli>(tm.sign).count();
  s.bytes = encode_msg(msg).size();
  s.events = msg.body.cf.events.size();

  t0 = std::chrono::steady_clock::now();
  const Verdict v = verifier.verify(msg);
  s.verify_ms = elapsed_ms(t0);
  if (!v.accepted()) {
    throw Error(Errc::kInvalidArgument, "honest overhead run rejected: " + verdict_line(v));
  }
  return s;
}

}  // namespace detail

/// Recording overhead, report size, signing and verification time per batch
/// size, averaged over `repetitions` runs after one warm-up run.
inline std::vector<OverheadRow> measure_overhead(const ExperimentConfig& cfg,
                                                 const OverheadOptions& opt = {}) {
  std::vector<OverheadRow> rows;
  SyntheticTask task(cfg.task);
  for (auto bs : opt.batch_sizes) {
    Hyperparams hp = cfg.hp;
    hp.batch_size = bs;
    const Dataset shard = task.sample(bs * opt.batches_per_epoch, cfg.seed + bs);
    const auto arch = mlp_architecture(cfg.task.features, cfg.hidden, cfg.task.classes);
    const Client client(0, cfg.seed, shard, hp, arch.size());
    const ModelParams w0 = ModelParams::xavier(arch, cfg.seed);

    std::vector<detail::Sample> samples;
    for (std::size_t r = 0; r <= opt.repetitions; ++r) {
      auto s = detail::time_round(client, arch, w0, static_cast<std::uint32_t>(r + 1));
      if (r > 0) samples.push_back(s);
    }
    OverheadRow row;
    row.batch_size = bs;
    row.steps = static_cast<std::size_t>(hp.local_epochs) * opt.batches_per_epoch;
    row.trace_events = samples.front().events;
    row.report_bytes = samples.front().bytes;
    std::vector<double> plain, rec, sign, ver;
    for (const auto& s : samples) {
      plain.push_back(s.plain_ms);
      rec.push_back(s.recorded_ms);
      sign.push_back(s.sign_ms);
      ver.push_back(s.verify_ms);
    }
    row.train_ms_plain = detail::mean(plain);
    row.train_ms_recorded = detail::mean(rec);
    row.overhead_ratio = (row.train_ms_recorded - row.train_ms_plain) / row.train_ms_plain;
    row.sign_ms = detail::mean(sign);
    row.verify_ms = detail::mean(ver);
    rows.push_back(row);
  }
  return rows;
}

inline void write_overhead_csv(std::ostream& out, const std::vector<OverheadRow>& rows) {
  out << "batch_size,steps,trace_events,train_ms_plain,train_ms_recorded,overhead_ratio,"
         "report_bytes,sign_ms,verify_ms\n";
  for (const auto& r : rows) {
    out << r.batch_size << ',' << r.steps << ',' << r.trace_events << ','
        << detail::fmt(r.train_ms_plain) << ',' << detail::fmt(r.train_ms_recorded) << ','
        << detail::fmt(r.overhead_ratio) << ',' << r.report_bytes << ','
        << detail::fmt(r.sign_ms) << ',' << detail::fmt(r.verify_ms) << '\n';
  }
}

struct ScalingPoint {
  std::size_t steps = 0;  // E * B
  std::size_t trace_events = 0;
  std::size_t report_bytes = 0;
  double verify_ms = 0.0;  // fastest per-verification batch mean
};

struct ScalingScan {
  std::vector<ScalingPoint> points;
  LinearFit bytes_vs_events;
  LinearFit verify_vs_events;
};

/// Report size and verification latency as the trace grows: one epoch of
/// B batches for each B in `steps`. Each point's report is built once; every
/// repetition then times `batch` verifications of it per point, visiting the
/// points in turn so drift hits all of them alike. Timing noise only ever adds,
/// so each point keeps its fastest repetition.
inline ScalingScan scaling_scan(const ExperimentConfig& cfg,
                                const std::vector<std::size_t>& steps = {4, 8, 16, 32, 64},
                                std::size_t repetitions = 31, std::uint32_t batch_size = 8,
                                std::size_t batch = 32) {
  struct Point {
    Client client;
    Hyperparams hp;
    ReportMsg msg;
    std::vector<double> times;
  };
  SyntheticTask task(cfg.task);
  const auto arch = mlp_architecture(cfg.task.features, cfg.hidden, cfg.task.classes);
  const ModelParams w0 = ModelParams::xavier(arch, cfg.seed);
  constexpr std::uint32_t kRound = 1;
  const std::uint64_t nonce_seed = cfg.seed;

  auto fresh_verifier = [&](const Point& p) {
    VerifierState v(arch, p.hp, true, nonce_seed);
    v.register_client(p.client.id(), p.client.verify_key(),
                      dataset_digest(p.client.shard()), p.client.shard().size());
    v.expected_for(p.client.shard().size());
    return v;
  };

  std::vector<Point> points;
  for (auto eb : steps) {
    Hyperparams hp = cfg.hp;
    hp.batch_size = batch_size;
    hp.local_epochs = 1;
    const Dataset shard = task.sample(eb * batch_size, cfg.seed + eb);
    Client client(0, cfg.seed, shard, hp, arch.size());
    VerifierState v(arch, hp, true, nonce_seed);
    const auto ch = v.begin_round(kRound, std::vector<std::uint32_t>{client.id()});
    ReportMsg msg = client_round(client, {kRound, w0, ch.at(client.id())});
    points.push_back({std::move(client), hp, std::move(msg), {}});
  }

  for (std::size_t r = 0; r <= repetitions; ++r) {
    for (auto& p : points) {
      std::vector<VerifierState> verifiers;
      verifiers.reserve(batch);
      for (std::size_t k = 0; k < batch; ++k) {
        verifiers.push_back(fresh_verifier(p));
        verifiers.back().begin_round(kRound, std::vector<std::uint32_t>{p.client.id()});
      }
      const auto t0 = std::chrono::steady_clock::now();
      for (auto& v : verifiers) {
        if (!v.verify(p.msg).accepted()) {
          throw Error(Errc::kInvalidArgument, "honest scaling run rejected");
        }
      }
      const double per = detail::elapsed_ms(t0) / static_cast<double>(batch);
      if (r > 0) p.times.push_back(per);
    }
  }

  ScalingScan scan;
  std::vector<double> ev, bytes, ver;
  for (std::size_t i = 0; i < points.size(); ++i) {
    ScalingPoint sp;
    sp.steps = steps[i];
    sp.trace_events = points[i].msg.body.cf.events.size();
    sp.report_bytes = encode_msg(points[i].msg).size();
    sp.verify_ms = *std::min_element(points[i].times.begin(), points[i].times.end());
    scan.points.push_back(sp);
    ev.push_back(static_cast<double>(sp.trace_events));
    bytes.push_back(static_cast<double>(sp.report_bytes));
    ver.push_back(sp.verify_ms);
  }
  scan.bytes_vs_events = linear_fit(ev, bytes);
  scan.verify_vs_events = linear_fit(ev, ver);
  return scan;
}

}  // namespace attestfl
