#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include "attestfl/harness/experiment.hpp"
#include "attestfl/harness/results.hpp"

namespace attestfl {

struct MatrixCell {
  AttackKind attack = AttackKind::kNone;
  AggKind aggregator = AggKind::kFedAvg;
  bool verification = false;
  double final_acc = 0.0;
  double max_asr = 0.0;
  double last5_asr = 0.0;  // mean over the last min(5, rounds) rounds
  std::size_t malicious_accepted = 0;
};

inline double tail_mean_asr(const std::vector<RoundRecord>& rs, std::size_t k = 5) {
  if (rs.empty()) return 0.0;
  k = std::min(k, rs.size());
  double s = 0;
  for (std::size_t i = rs.size() - k; i < rs.size(); ++i) s += rs[i].asr;
  return s / static_cast<double>(k);
}

inline MatrixCell summarize(const ExperimentConfig& cfg, const ExperimentResult& r) {
  MatrixCell c;
  c.attack = cfg.attack.kind;
  c.aggregator = cfg.aggregator;
  c.verification = cfg.verification;
  c.final_acc = r.rounds.back().acc;
  c.last5_asr = tail_mean_asr(r.rounds);
  for (const auto& rec : r.rounds) {
    c.max_asr = std::max(c.max_asr, rec.asr);
    c.malicious_accepted += rec.malicious_accepted;
  }
  return c;
}

/// The attack grid: every training-time attack (plus a clean row) against
/// every aggregator, with verification off and on. `base` supplies
/// everything else.
inline std::vector<MatrixCell> attack_matrix(
    const ExperimentConfig& base,
    const std::function<void(const MatrixCell&)>& progress = nullptr) {
  std::vector<MatrixCell> cells;
  for (auto atk : {AttackKind::kNone, AttackKind::kTargetedCf, AttackKind::kUntargetedCf,
                   AttackKind::kTargetedDo, AttackKind::kUntargetedDo}) {
    for (auto agg : {AggKind::kFedAvg, AggKind::kKrum, AggKind::kCoomed,
                     AggKind::kTrimmedMean, AggKind::kBulyan, AggKind::kFlTrust}) {
      for (bool verify : {false, true}) {
        if (atk == AttackKind::kNone && !verify) continue;
        ExperimentConfig cfg = base;
        cfg.attack.kind = atk;
        cfg.aggregator = agg;
        cfg.verification = verify;
        cfg.f.reset();
        cfg.beta.reset();
        cells.push_back(summarize(cfg, run_experiment(cfg)));
        if (progress) progress(cells.back());
      }
    }
  }
  return cells;
}

inline void write_matrix_csv(std::ostream& out, const std::vector<MatrixCell>& cells) {
  out << "attack,aggregator,verification,final_acc,max_asr,last5_asr,malicious_accepted\n";
  for (const auto& c : cells) {
    out << attack_name(c.attack) << ',' << agg_name(c.aggregator) << ','
        << (c.verification ? "on" : "off") << ',' << detail::fmt(c.final_acc) << ','
        << detail::fmt(c.max_asr) << ',' << detail::fmt(c.last5_asr) << ','
        << c.malicious_accepted << '\n';
  }
}

}  // namespace attestfl
