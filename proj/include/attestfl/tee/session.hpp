#pragma once

#include <chrono>
#include <span>

#include "attestfl/model/dataset.hpp"
#include "attestfl/model/params.hpp"
#include "attestfl/tee/identity.hpp"
#include "attestfl/trace/recorder.hpp"

namespace attestfl {

/// One attested training run inside the simulated enclave.
///
/// The session owns the recorder and watches every Weights write, so it
/// knows the update training actually produced. `attest` seals the
/// measurements over that update and signs them together with whatever
/// delta the normal world asks to report.
class TeeSession {
 public:
  TeeSession(const TeeIdentity& identity, SiteTable sites,
             const Hyperparams& hp, const Dataset& shard,
             const ModelParams& initial)
      : identity_(identity),
        recorder_(std::move(sites)),
        initial_(initial),
        observed_(initial),
        hooks_(*this) {
    recorder_.snapshot_static(hp, dataset_digest(shard));
  }

  TeeSession(const TeeSession&) = delete;
  TeeSession& operator=(const TeeSession&) = delete;

  TrainingHooks& hooks() noexcept { return hooks_; }

  /// Update implied by the weight writes seen so far.
  std::vector<double> observed_delta() const {
    std::vector<double> d(initial_.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = observed_[i] - initial_[i];
    return d;
  }

  ReportMsg attest(std::span<const double> reported_delta, const Nonce& challenge,
                   std::uint32_t round) {
    const auto sealed_delta = observed_delta();
    Measurements m = recorder_.finalize(sealed_delta);
    ReportMsg msg;
    msg.body.cf = std::move(m.cf);
    msg.body.cv = std::move(m.cv);
    msg.body.delta.assign(reported_delta.begin(), reported_delta.end());
    msg.body.challenge = challenge;
    msg.body.client_id = identity_.client_id();
    msg.body.round = round;
    auto t0 = std::chrono::steady_clock::now();
    msg.signature = tee_sign(identity_, msg.body);
    sign_time_ = std::chrono::steady_clock::now() - t0;
    return msg;
  }

  std::chrono::nanoseconds record_time() const noexcept { return hooks_.spent(); }
  std::chrono::nanoseconds sign_time() const noexcept { return sign_time_; }

 private:
  class Hooks final : public TrainingHooks {
   public:
    explicit Hooks(TeeSession& s) : s_(s), rec_(s.recorder_) {}

    void on_control(CfKind kind, SiteId site, SiteId target) override {
      rec_.on_control(kind, site, target);
    }
    void on_write(VarRef var, SiteId writer, std::span<const VarRef> deps,
                  TrainStep step, std::span<const double> value) override {
      rec_.on_write(var, writer, deps, step, value);
      if (var.kind == VarKind::kWeights && var.layer >= 1 &&
          var.layer <= s_.observed_.layer_count()) {
        auto dst = s_.observed_.layer(var.layer - 1u);
        if (dst.size() == value.size()) {
          std::copy(value.begin(), value.end(), dst.begin());
        }
      }
    }
    std::chrono::nanoseconds spent() const noexcept { return rec_.spent(); }

   private:
    TeeSession& s_;
    RecordingHooks rec_;
  };

  const TeeIdentity& identity_;
  Recorder recorder_;
  ModelParams initial_;
  ModelParams observed_;
  Hooks hooks_;
  std::chrono::nanoseconds sign_time_{0};
};

}  // namespace attestfl
