#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "attestfl/model/dataset.hpp"
#include "attestfl/model/params.hpp"
#include "attestfl/tee/digest.hpp"
#include "attestfl/trace/events.hpp"
#include "attestfl/trace/sites.hpp"

namespace attestfl {

/// Control-flow alphabet symbol: an event without its sequence number.
struct CfSymbol {
  CfKind kind;
  SiteId site;
  SiteId target;

  friend bool operator==(const CfSymbol&, const CfSymbol&) = default;
};

/// Program point of the expected-trace automaton plus loop counters.
struct CfState {
  enum class Phase : std::uint8_t {
    kStart,
    kEpochHead,
    kBatchHead,
    kLoadCall,
    kLoadReturn,
    kForwardCall,
    kForwardReturn,
    kLossCall,
    kLossReturn,
    kBackwardCall,
    kBackwardReturn,
    kOptimizerCall,
    kOptimizerReturn,
    kTrainReturn,
    kDone,
  };

  Phase phase = Phase::kStart;
  std::uint32_t epoch = 0;
  std::uint32_t batch = 0;
  std::uint32_t layer = 0;

  friend bool operator==(const CfState&, const CfState&) = default;
};

/// Expected dynamic write: `var` written by the routine at `writer` from
/// exactly `deps`.
struct CvExpectation {
  VarRef var;
  SiteId writer;
  std::vector<VarRef> deps;
};

/// The honest training program for one client: site table, a deterministic
/// counter automaton over (kind, site, target) for the given epoch, batch
/// and layer counts, and the per-step dependency template.
class ExpectedProgram {
 public:
  ExpectedProgram(SiteTable sites, std::uint32_t epochs, std::uint32_t batches,
                  std::uint32_t layers)
      : sites_(std::move(sites)),
        epochs_(epochs),
        batches_(batches),
        layers_(layers) {
    if (layers_ == 0 || layers_ > site::kMaxLayers) {
      throw Error(Errc::kInvalidArgument, "layer count out of range");
    }
    // Every site the automaton can emit must be published.
    std::vector<SiteId> required{
        site::kTrainCall,      site::kTrainEntry,     site::kTrainReturn,
        site::kEpochLoop,      site::kBatchLoop,      site::kLoadBatchCall,
        site::kLoadBatchEntry, site::kLoadBatchReturn, site::kLossCall,
        site::kLossEntry,      site::kLossReturn,     site::kOptimizerCall,
        site::kOptimizerEntry, site::kOptimizerReturn};
    for (std::size_t k = 1; k <= layers_; ++k) {
      for (SiteId family : {site::kForwardCall, site::kForwardEntry,
                            site::kForwardReturn, site::kBackwardCall,
                            site::kBackwardEntry, site::kBackwardReturn}) {
        required.push_back(site::per_layer(family, k));
      }
    }
    for (SiteId id : required) {
      if (!sites_.contains(id)) {
        throw Error(Errc::kUnknownSite, "automaton site " + std::to_string(id) +
                                            " missing from site table");
      }
    }
  }

  const SiteTable& site_table() const noexcept { return sites_; }
  std::uint32_t epochs() const noexcept { return epochs_; }
  std::uint32_t batches() const noexcept { return batches_; }
  std::uint32_t layers() const noexcept { return layers_; }

  CfState initial() const { return {}; }

  static bool accepting(const CfState& s) {
    return s.phase == CfState::Phase::kDone;
  }

  /// The single outgoing transition of `s`, or nothing in the final state.
  std::optional<std::pair<CfSymbol, CfState>> transition(CfState s) const {
    using P = CfState::Phase;
    CfState n = s;
    switch (s.phase) {
      case P::kStart:
        n.phase = P::kEpochHead;
        n.epoch = 0;
        return {{{CfKind::kCall, site::kTrainCall, site::kTrainEntry}, n}};
      case P::kEpochHead:
        if (s.epoch < epochs_) {
          n.phase = P::kBatchHead;
          n.batch = 0;
          return {{{CfKind::kBranch, site::kEpochLoop, site::kArmEnter}, n}};
        }
        n.phase = P::kTrainReturn;
        return {{{CfKind::kBranch, site::kEpochLoop, site::kArmExit}, n}};
      case P::kBatchHead:
        if (s.batch < batches_) {
          n.phase = P::kLoadCall;
          return {{{CfKind::kBranch, site::kBatchLoop, site::kArmEnter}, n}};
        }
        n.phase = P::kEpochHead;
        ++n.epoch;
        return {{{CfKind::kBranch, site::kBatchLoop, site::kArmExit}, n}};
      case P::kLoadCall:
        n.phase = P::kLoadReturn;
        return {{{CfKind::kCall, site::kLoadBatchCall, site::kLoadBatchEntry}, n}};
      case P::kLoadReturn:
        n.phase = P::kForwardCall;
        n.layer = 1;
        return {{{CfKind::kReturn, site::kLoadBatchReturn, 0}, n}};
      case P::kForwardCall:
        n.phase = P::kForwardReturn;
        return {{{CfKind::kCall, site::per_layer(site::kForwardCall, s.layer),
                  site::per_layer(site::kForwardEntry, s.layer)},
                 n}};
      case P::kForwardReturn:
        if (s.layer < layers_) {
          n.phase = P::kForwardCall;
          ++n.layer;
        } else {
          n.phase = P::kLossCall;
        }
        return {{{CfKind::kReturn, site::per_layer(site::kForwardReturn, s.layer), 0},
                 n}};
      case P::kLossCall:
        n.phase = P::kLossReturn;
        return {{{CfKind::kCall, site::kLossCall, site::kLossEntry}, n}};
      case P::kLossReturn:
        n.phase = P::kBackwardCall;
        n.layer = layers_;
        return {{{CfKind::kReturn, site::kLossReturn, 0}, n}};
      case P::kBackwardCall:
        n.phase = P::kBackwardReturn;
        return {{{CfKind::kCall, site::per_layer(site::kBackwardCall, s.layer),
                  site::per_layer(site::kBackwardEntry, s.layer)},
                 n}};
      case P::kBackwardReturn:
        if (s.layer > 1) {
          n.phase = P::kBackwardCall;
          --n.layer;
        } else {
          n.phase = P::kOptimizerCall;
        }
        return {{{CfKind::kReturn, site::per_layer(site::kBackwardReturn, s.layer), 0},
                 n}};
      case P::kOptimizerCall:
        n.phase = P::kOptimizerReturn;
        return {{{CfKind::kCall, site::kOptimizerCall, site::kOptimizerEntry}, n}};
      case P::kOptimizerReturn:
        n.phase = P::kBatchHead;
        ++n.batch;
        return {{{CfKind::kReturn, site::kOptimizerReturn, 0}, n}};
      case P::kTrainReturn:
        n.phase = P::kDone;
        return {{{CfKind::kReturn, site::kTrainReturn, 0}, n}};
      case P::kDone:
        return std::nullopt;
    }
    return std::nullopt;
  }

  /// Writes expected in one batch step, in emission order.
  std::vector<CvExpectation> cv_template() const {
    std::vector<CvExpectation> out;
    const std::size_t l = layers_;
    for (std::size_t k = 1; k <= l; ++k) {
      std::vector<VarRef> deps{VarRef::weights(k)};
      if (k > 1) deps.push_back(VarRef::activations(k - 1));
      out.push_back({VarRef::activations(k),
                     site::per_layer(site::kForwardEntry, k), deps});
    }
    out.push_back({VarRef::loss(), site::kLossEntry, {VarRef::activations(l)}});
    for (std::size_t k = l; k >= 1; --k) {
      VarRef upstream = k == l ? VarRef::loss() : VarRef::grads(k + 1);
      out.push_back({VarRef::grads(k), site::per_layer(site::kBackwardEntry, k),
                     {VarRef::activations(k), upstream, VarRef::weights(k)}});
    }
    for (std::size_t k = 1; k <= l; ++k) {
      out.push_back({VarRef::weights(k), site::kOptimizerEntry,
                     {VarRef::weights(k), VarRef::grads(k)}});
    }
    return out;
  }

  /// Materialises the single accepted word (debugging and dumps).
  std::vector<CfEvent> expected_trace() const {
    std::vector<CfEvent> out;
    CfState s = initial();
    while (auto t = transition(s)) {
      out.push_back({t->first.kind, t->first.site, t->first.target,
                     static_cast<std::uint32_t>(out.size())});
      s = t->second;
    }
    return out;
  }

 private:
  SiteTable sites_;
  std::uint32_t epochs_;
  std::uint32_t batches_;
  std::uint32_t layers_;
};

/// Expected program for a client whose shard has `shard_size` samples.
inline ExpectedProgram build_expected(const Architecture& arch,
                                      const Hyperparams& hp,
                                      std::size_t shard_size) {
  hp.validate();
  return ExpectedProgram(make_site_table(arch.size()), hp.local_epochs,
                         hp.batches_for(shard_size),
                         static_cast<std::uint32_t>(arch.size()));
}

// ---------------------------------------------------------------------------
// Conformance checks

struct CfConformance {
  bool ok = true;
  std::size_t first_bad = 0;    // valid when !ok
  std::size_t comparisons = 0;  // events examined

  static CfConformance accept(std::size_t n) { return {true, 0, n}; }
  static CfConformance mismatch(std::size_t at, std::size_t n) {
    return {false, at, n};
  }
};

/// Single left-to-right pass; stops at the first event the automaton cannot
/// take (including a sequence number that is not its index). A trace that
/// ends outside the accepting state mismatches at its length.
inline CfConformance conform_cf(const ControlFlowTrace& trace,
                                const ExpectedProgram& expected) {
  CfState state = expected.initial();
  std::size_t i = 0;
  for (const auto& ev : trace.events) {
    auto t = expected.transition(state);
    if (!t || ev.seq != i || t->first != CfSymbol{ev.kind, ev.site, ev.target}) {
      return CfConformance::mismatch(i, i + 1);
    }
    state = t->second;
    ++i;
  }
  if (!ExpectedProgram::accepting(state)) {
    return CfConformance::mismatch(trace.events.size(), i);
  }
  return CfConformance::accept(i);
}

struct CvConformance {
  enum class Kind { kOk, kStaticViolation, kDepViolation, kDeltaMismatch };
  Kind kind = Kind::kOk;
  TrainStep step;  // kDepViolation only
  VarRef var;      // kDepViolation only

  bool ok() const noexcept { return kind == Kind::kOk; }
};

namespace detail {
inline std::vector<VarRef> sorted(std::vector<VarRef> v) {
  std::sort(v.begin(), v.end());
  return v;
}
}  // namespace detail

/// Checks, in order: the static snapshot against H(hp || ds_digest) (skipped
/// when `ds_digest` is empty), every dynamic event against the per-step
/// template (writer routine and dependency set), and the final delta digest.
inline CvConformance conform_cv(const CriticalVariableLog& log,
                                const ExpectedProgram& expected,
                                const Hyperparams& hp,
                                const std::optional<Digest>& ds_digest,
                                std::span<const double> delta) {
  using K = CvConformance::Kind;
  if (ds_digest && log.static_snapshot != static_digest(hp, *ds_digest)) {
    return {K::kStaticViolation, {}, {}};
  }
  const auto tmpl = expected.cv_template();
  std::vector<std::vector<VarRef>> tmpl_deps;
  for (const auto& t : tmpl) tmpl_deps.push_back(detail::sorted(t.deps));

  std::size_t i = 0;
  for (std::uint32_t e = 0; e < expected.epochs(); ++e) {
    for (std::uint32_t b = 0; b < expected.batches(); ++b) {
      const TrainStep step{e, b};
      for (std::size_t t = 0; t < tmpl.size(); ++t, ++i) {
        if (i >= log.dynamic.size()) return {K::kDepViolation, step, tmpl[t].var};
        const auto& ev = log.dynamic[i];
        if (ev.var != tmpl[t].var || ev.op != CvOp::kWrittenBy ||
            ev.site != tmpl[t].writer || !(ev.step == step) ||
            detail::sorted(ev.deps) != tmpl_deps[t]) {
          return {K::kDepViolation, ev.step, ev.var};
        }
      }
    }
  }
  if (i < log.dynamic.size()) {
    return {K::kDepViolation, log.dynamic[i].step, log.dynamic[i].var};
  }
  if (log.final_delta_digest != delta_digest(delta)) {
    return {K::kDeltaMismatch, {}, {}};
  }
  return {};
}

}  // namespace attestfl
