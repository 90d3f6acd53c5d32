#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <utility>

#include "attestfl/model/train.hpp"
#include "attestfl/tee/digest.hpp"
#include "attestfl/trace/events.hpp"
#include "attestfl/trace/expected.hpp"

namespace attestfl {

struct Measurements {
  ControlFlowTrace cf;
  CriticalVariableLog cv;
};

/// Trusted training recorder. Accumulates the control-flow trace and the
/// critical-variable log of one local training run; `finalize` seals them.
class Recorder {
 public:
  explicit Recorder(SiteTable sites) : sites_(std::move(sites)) {
    trace_.site_table_version = sites_.version;
  }
  explicit Recorder(const ExpectedProgram& expected)
      : Recorder(expected.site_table()) {}

  void snapshot_static(const Hyperparams& hp, const Digest& ds_digest) {
    require_open();
    if (log_.has_value()) {
      throw Error(Errc::kAlreadySnapshotted, "static snapshot already taken");
    }
    log_.emplace();
    log_->static_snapshot = static_digest(hp, ds_digest);
  }

  void record_cf(CfKind kind, SiteId site, SiteId target) {
    require_ready();
    if (!sites_.contains(site)) {
      throw Error(Errc::kUnknownSite, "site " + std::to_string(site));
    }
    trace_.events.push_back(
        {kind, site, target, static_cast<std::uint32_t>(trace_.events.size())});
  }

  /// Records the event as given; writer-site policy is checked at
  /// verification time.
  void record_cv(CvEvent ev) {
    require_ready();
    if (ev.deps.size() > kMaxCvDeps) {
      throw Error(Errc::kInvalidArgument, "too many dependencies");
    }
    log_->dynamic.push_back(std::move(ev));
  }

  Measurements finalize(std::span<const double> delta) {
    require_open();
    if (trace_.events.empty()) {
      throw Error(Errc::kEmptyTrace, "nothing recorded");
    }
    finalized_ = true;
    log_->final_delta_digest = delta_digest(delta);
    return {std::move(trace_), std::move(*log_)};
  }

  bool snapshotted() const noexcept { return log_.has_value(); }
  bool finalized() const noexcept { return finalized_; }
  std::size_t cf_count() const noexcept { return trace_.events.size(); }
  std::size_t cv_count() const noexcept {
    return log_ ? log_->dynamic.size() : 0;
  }
  const ControlFlowTrace& trace() const noexcept { return trace_; }

  friend bool operator==(const Recorder&, const Recorder&) = default;

 private:
  void require_open() const {
    if (finalized_) throw Error(Errc::kRecorderFinalized, "recorder sealed");
  }
  void require_ready() const {
    require_open();
    if (!log_) throw Error(Errc::kNotSnapshotted, "snapshot_static first");
  }

  SiteTable sites_;
  ControlFlowTrace trace_;
  std::optional<CriticalVariableLog> log_;
  bool finalized_ = false;
};

/// Adapts a Recorder to the training hooks, digesting variable values as
/// they are written. Time spent inside the hooks is accumulated.
class RecordingHooks final : public TrainingHooks {
 public:
  explicit RecordingHooks(Recorder& rec) : rec_(rec) {}

  void on_control(CfKind kind, SiteId site, SiteId target) override {
    auto t0 = std::chrono::steady_clock::now();
    rec_.record_cf(kind, site, target);
    spent_ += std::chrono::steady_clock::now() - t0;
  }

  void on_write(VarRef var, SiteId writer, std::span<const VarRef> deps,
                TrainStep step, std::span<const double> value) override {
    auto t0 = std::chrono::steady_clock::now();
    CvEvent ev;
    ev.var = var;
    ev.op = CvOp::kWrittenBy;
    ev.site = writer;
    ev.deps.assign(deps.begin(), deps.end());
    ev.step = step;
    ev.value_digest = digest_values(value);
    rec_.record_cv(std::move(ev));
    spent_ += std::chrono::steady_clock::now() - t0;
  }

  std::chrono::nanoseconds spent() const noexcept { return spent_; }

 private:
  Recorder& rec_;
  std::chrono::nanoseconds spent_{0};
};

}  // namespace attestfl
