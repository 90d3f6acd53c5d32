#pragma once

#include <functional>
#include <span>
#include <vector>

#include "attestfl/model/dataset.hpp"
#include "attestfl/model/network.hpp"
#include "attestfl/model/params.hpp"
#include "attestfl/trace/sites.hpp"

namespace attestfl {

/// Instrumentation callbacks invoked at every instrumented site of
/// `local_train`. The trusted recorder implements this; `NoopHooks` is the
/// uninstrumented baseline.
class TrainingHooks {
 public:
  virtual ~TrainingHooks() = default;

  virtual void on_control(CfKind kind, SiteId site, SiteId target) = 0;

  /// `var` was written by the routine entered at `writer`, reading `deps`.
  virtual void on_write(VarRef var, SiteId writer, std::span<const VarRef> deps,
                        TrainStep step, std::span<const double> value) = 0;
};

class NoopHooks final : public TrainingHooks {
 public:
  void on_control(CfKind, SiteId, SiteId) override {}
  void on_write(VarRef, SiteId, std::span<const VarRef>, TrainStep,
                std::span<const double>) override {}
};

/// State handed to the routine behind the optimizer's indirect call.
struct OptimizerContext {
  ModelParams& weights;
  const ModelParams& grads;
  const ModelParams& initial;
  const Hyperparams& hp;
  OptimizerState& state;
  TrainingHooks& hooks;
  TrainStep step;
  std::size_t step_index;   // 0-based across all epochs
  std::size_t total_steps;  // epochs * batches
};

/// The optimizer is reached through an indirect call; `entry` is the call
/// target the instrumentation observes.
struct OptimizerRoutine {
  SiteId entry = site::kOptimizerEntry;
  std::function<void(OptimizerContext&)> run;
};

inline void honest_optimizer_body(OptimizerContext& ctx) {
  ++ctx.state.step;
  for (std::size_t k = 0; k < ctx.weights.layer_count(); ++k) {
    optimizer_step_layer(ctx.weights, ctx.grads, k, ctx.hp, ctx.state);
    const VarRef deps[] = {VarRef::weights(k + 1), VarRef::grads(k + 1)};
    ctx.hooks.on_write(VarRef::weights(k + 1), site::kOptimizerEntry, deps,
                       ctx.step, ctx.weights.layer(k));
  }
  ctx.hooks.on_control(CfKind::kReturn, site::kOptimizerReturn, 0);
}

inline OptimizerRoutine honest_optimizer() {
  return {site::kOptimizerEntry, honest_optimizer_body};
}

struct LocalTrainResult {
  ModelParams delta;
  ModelParams final_weights;  // == w0 + delta, element for element
  double last_loss = 0.0;
};

/// Runs `local_epochs` passes over `shard` in fixed sequential batches
/// (no shuffling), emitting hooks at every instrumented site.
///
/// Per batch step the site sequence is: batch-loop branch, load_batch,
/// forward[1..l], loss, backward[l..1], optimizer. The whole run is wrapped
/// in train call/return and per-epoch loop branches.
inline LocalTrainResult local_train(const ModelParams& w0, const Dataset& shard,
                                    const Hyperparams& hp, TrainingHooks& hooks,
                                    const OptimizerRoutine& optimizer =
                                        honest_optimizer()) {
  hp.validate();
  if (shard.empty()) throw Error(Errc::kEmptyDataset, "empty shard");
  const std::size_t l = w0.layer_count();
  const std::size_t batches = hp.batches_for(shard.size());
  const std::size_t total_steps = batches * hp.local_epochs;

  ModelParams w = w0;
  OptimizerState opt_state;
  double last_loss = 0.0;
  std::size_t step_index = 0;

  hooks.on_control(CfKind::kCall, site::kTrainCall, site::kTrainEntry);
  for (std::uint32_t e = 0; e < hp.local_epochs; ++e) {
    hooks.on_control(CfKind::kBranch, site::kEpochLoop, site::kArmEnter);
    for (std::uint32_t b = 0; b < batches; ++b) {
      const TrainStep step{e, b};
      hooks.on_control(CfKind::kBranch, site::kBatchLoop, site::kArmEnter);

      hooks.on_control(CfKind::kCall, site::kLoadBatchCall,
                       site::kLoadBatchEntry);
      const std::size_t begin = static_cast<std::size_t>(b) * hp.batch_size;
      const std::size_t end = std::min(shard.size(), begin + hp.batch_size);
      Dataset batch = shard.slice(begin, end);
      hooks.on_control(CfKind::kReturn, site::kLoadBatchReturn, 0);

      ForwardPass pass;
      pass.input = batch.inputs;
      for (std::size_t k = 0; k < l; ++k) {
        hooks.on_control(CfKind::kCall, site::per_layer(site::kForwardCall, k + 1),
                         site::per_layer(site::kForwardEntry, k + 1));
        const Matrix& in = k == 0 ? pass.input : pass.layers[k - 1];
        pass.layers.push_back(dense_layer(w, k, in, k + 1 < l));
        std::vector<VarRef> deps{VarRef::weights(k + 1)};
        if (k > 0) deps.push_back(VarRef::activations(k));
        hooks.on_write(VarRef::activations(k + 1),
                       site::per_layer(site::kForwardEntry, k + 1), deps, step,
                       pass.layers.back().data());
        hooks.on_control(CfKind::kReturn,
                         site::per_layer(site::kForwardReturn, k + 1), 0);
      }

      hooks.on_control(CfKind::kCall, site::kLossCall, site::kLossEntry);
      last_loss = cross_entropy(pass.predictions(), batch.labels);
      {
        const VarRef deps[] = {VarRef::activations(l)};
        hooks.on_write(VarRef::loss(), site::kLossEntry, deps, step,
                       std::span<const double>(&last_loss, 1));
      }
      hooks.on_control(CfKind::kReturn, site::kLossReturn, 0);

      ModelParams grads = ModelParams::zeros(w.shapes());
      Matrix delta = loss_gradient(pass.predictions(), batch.labels);
      for (std::size_t k = l; k-- > 0;) {
        hooks.on_control(CfKind::kCall,
                         site::per_layer(site::kBackwardCall, k + 1),
                         site::per_layer(site::kBackwardEntry, k + 1));
        const Matrix& in = k == 0 ? pass.input : pass.layers[k - 1];
        Matrix up = backward_layer(w, k, in, delta, grads, k > 0);
        if (k > 0) {
          tanh_backward(up, pass.layers[k - 1]);
          delta = std::move(up);
        }
        const VarRef upstream =
            k + 1 == l ? VarRef::loss() : VarRef::grads(k + 2);
        const VarRef deps[] = {VarRef::activations(k + 1), upstream,
                               VarRef::weights(k + 1)};
        hooks.on_write(VarRef::grads(k + 1),
                       site::per_layer(site::kBackwardEntry, k + 1), deps, step,
                       grads.layer(k));
        hooks.on_control(CfKind::kReturn,
                         site::per_layer(site::kBackwardReturn, k + 1), 0);
      }

      hooks.on_control(CfKind::kCall, site::kOptimizerCall, optimizer.entry);
      OptimizerContext ctx{w,         grads, w0,         hp,         opt_state,
                           hooks,     step,  step_index, total_steps};
      optimizer.run(ctx);
      ++step_index;
    }
    hooks.on_control(CfKind::kBranch, site::kBatchLoop, site::kArmExit);
  }
  hooks.on_control(CfKind::kBranch, site::kEpochLoop, site::kArmExit);
  hooks.on_control(CfKind::kReturn, site::kTrainReturn, 0);

  LocalTrainResult out;
  std::vector<double> delta(w.size());
  std::vector<double> final_w(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    delta[i] = w[i] - w0[i];
    final_w[i] = w0[i] + delta[i];
  }
  out.delta = ModelParams(w.shapes(), std::move(delta));
  out.final_weights = ModelParams(w.shapes(), std::move(final_w));
  out.last_loss = last_loss;
  return out;
}

inline LocalTrainResult local_train(const ModelParams& w0, const Dataset& shard,
                                    const Hyperparams& hp) {
  NoopHooks noop;
  return local_train(w0, shard, hp, noop);
}

}  // namespace attestfl
