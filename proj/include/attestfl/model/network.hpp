#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "attestfl/error.hpp"
#include "attestfl/model/dataset.hpp"
#include "attestfl/model/matrix.hpp"
#include "attestfl/model/params.hpp"

namespace attestfl {

/// Layer outputs of one forward pass. Hidden layers apply tanh; the last
/// layer's output is the raw per-class score matrix (logits).
struct ForwardPass {
  Matrix input;
  std::vector<Matrix> layers;

  const Matrix& predictions() const { return layers.back(); }
};

/// Output of layer `k` (0-based) for a batch whose rows are inputs to it.
inline Matrix dense_layer(const ModelParams& params, std::size_t k,
                          const Matrix& in, bool apply_tanh) {
  const auto& shape = params.shapes()[k];
  if (in.cols() != shape.inputs) {
    throw Error(Errc::kShapeMismatch,
                "layer " + std::to_string(k + 1) + " expects " +
                    std::to_string(shape.inputs) + " inputs, got " +
                    std::to_string(in.cols()));
  }
  auto w = params.weights(k);
  auto b = params.biases(k);
  Matrix out(in.rows(), shape.outputs);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    auto x = in.row(r);
    auto y = out.row(r);
    for (std::size_t o = 0; o < shape.outputs; ++o) {
      const double* wrow = w.data() + o * shape.inputs;
      double acc = shape.has_bias ? b[o] : 0.0;
      for (std::size_t i = 0; i < shape.inputs; ++i) acc += wrow[i] * x[i];
      y[o] = apply_tanh ? std::tanh(acc) : acc;
    }
  }
  return out;
}

inline ForwardPass forward(const ModelParams& params, const Matrix& inputs) {
  ForwardPass pass;
  pass.input = inputs;
  const std::size_t l = params.layer_count();
  const Matrix* cur = &pass.input;
  for (std::size_t k = 0; k < l; ++k) {
    pass.layers.push_back(dense_layer(params, k, *cur, k + 1 < l));
    cur = &pass.layers.back();
  }
  return pass;
}

inline ForwardPass forward(const ModelParams& params, const Dataset& batch) {
  return forward(params, batch.inputs);
}

/// Mean softmax cross-entropy of `logits` against `labels`.
inline double cross_entropy(const Matrix& logits,
                            std::span<const ClassId> labels) {
  if (logits.rows() != labels.size()) {
    throw Error(Errc::kShapeMismatch, "logit rows != label count");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    if (labels[r] >= z.size()) {
      throw Error(Errc::kShapeMismatch, "label exceeds class count");
    }
    double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    total += std::log(sum) + mx - z[labels[r]];
  }
  return total / static_cast<double>(logits.rows());
}

struct BackwardResult {
  double loss = 0.0;
  ModelParams grads;
};

/// One backward stage: gradient of layer `k`'s parameters given the
/// gradient flowing into its pre-activation (`delta`, rows = batch).
/// Returns the gradient with respect to the layer's input activations when
/// `need_input_grad` is set.
inline Matrix backward_layer(const ModelParams& params, std::size_t k,
                             const Matrix& layer_input, const Matrix& delta,
                             ModelParams& grads, bool need_input_grad) {
  const auto& shape = params.shapes()[k];
  auto gw = grads.weights(k);
  auto gb = grads.biases(k);
  for (std::size_t r = 0; r < delta.rows(); ++r) {
    auto d = delta.row(r);
    auto x = layer_input.row(r);
    for (std::size_t o = 0; o < shape.outputs; ++o) {
      double* grow = gw.data() + o * shape.inputs;
      for (std::size_t i = 0; i < shape.inputs; ++i) grow[i] += d[o] * x[i];
      if (shape.has_bias) gb[o] += d[o];
    }
  }
  if (!need_input_grad) return {};
  auto w = params.weights(k);
  Matrix out(delta.rows(), shape.inputs);
  for (std::size_t r = 0; r < delta.rows(); ++r) {
    auto d = delta.row(r);
    auto g = out.row(r);
    for (std::size_t o = 0; o < shape.outputs; ++o) {
      const double* wrow = w.data() + o * shape.inputs;
      for (std::size_t i = 0; i < shape.inputs; ++i) g[i] += d[o] * wrow[i];
    }
  }
  return out;
}

/// Gradient of the loss with respect to the logits: (softmax - onehot) / m.
inline Matrix loss_gradient(const Matrix& logits,
                            std::span<const ClassId> labels) {
  Matrix d(logits.rows(), logits.cols());
  const double inv_m = 1.0 / static_cast<double>(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    auto g = d.row(r);
    double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      g[c] = std::exp(z[c] - mx);
      sum += g[c];
    }
    for (std::size_t c = 0; c < z.size(); ++c) {
      g[c] = (g[c] / sum - (labels[r] == c ? 1.0 : 0.0)) * inv_m;
    }
  }
  return d;
}

/// Turns the gradient w.r.t. a tanh output into the gradient w.r.t. its
/// pre-activation.
inline void tanh_backward(Matrix& grad, const Matrix& tanh_out) {
  auto g = grad.data();
  auto a = tanh_out.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - a[i] * a[i];
}

inline BackwardResult backward(const ModelParams& params,
                               const ForwardPass& pass,
                               std::span<const ClassId> labels) {
  const std::size_t l = params.layer_count();
  if (pass.layers.size() != l || pass.input.rows() != labels.size()) {
    throw Error(Errc::kShapeMismatch, "activations do not match params/batch");
  }
  BackwardResult res;
  res.loss = cross_entropy(pass.predictions(), labels);
  res.grads = ModelParams::zeros(params.shapes());
  Matrix delta = loss_gradient(pass.predictions(), labels);
  for (std::size_t k = l; k-- > 0;) {
    const Matrix& in = k == 0 ? pass.input : pass.layers[k - 1];
    Matrix up = backward_layer(params, k, in, delta, res.grads, k > 0);
    if (k > 0) {
      tanh_backward(up, pass.layers[k - 1]);
      delta = std::move(up);
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Optimizers

struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

/// Updates the parameters of layer `k` only.
inline void optimizer_step_layer(ModelParams& params, const ModelParams& grads,
                                 std::size_t k, const Hyperparams& hp,
                                 OptimizerState& state) {
  const std::size_t off = params.layer_offset(k);
  const std::size_t n = params.shapes()[k].element_count();
  auto w = params.values();
  auto g = grads.values();
  if (hp.optimizer == OptimizerKind::kSgd) {
    for (std::size_t i = off; i < off + n; ++i) {
      w[i] = w[i] - hp.learning_rate * g[i];
    }
    return;
  }
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hp.beta1, t);
  const double c2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t i = off; i < off + n; ++i) {
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g[i];
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g[i] * g[i];
    double m_hat = state.m[i] / c1;
    double v_hat = state.v[i] / c2;
    w[i] -= hp.learning_rate * m_hat / (std::sqrt(v_hat) + hp.epsilon);
  }
}

/// SGD: w - lr * g. Adam: bias-corrected first/second moment recurrence.
inline void optimizer_step(ModelParams& params, const ModelParams& grads,
                           const Hyperparams& hp, OptimizerState& state) {
  params.require_same_shape(grads, "optimizer: params/grads shape differ");
  ++state.step;
  for (std::size_t k = 0; k < params.layer_count(); ++k) {
    optimizer_step_layer(params, grads, k, hp, state);
  }
}

// ---------------------------------------------------------------------------
// Metrics

/// Argmax with ties resolved to the lowest class id.
inline ClassId argmax(std::span<const double> scores) {
  ClassId best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = static_cast<ClassId>(c);
  }
  return best;
}

inline std::vector<ClassId> predict(const ModelParams& params,
                                    const Matrix& inputs) {
  auto pass = forward(params, inputs);
  const auto& s = pass.predictions();
  std::vector<ClassId> out(s.rows());
  for (std::size_t r = 0; r < s.rows(); ++r) out[r] = argmax(s.row(r));
  return out;
}

inline double evaluate_acc(const ModelParams& params, const Dataset& test) {
  if (test.empty()) throw Error(Errc::kEmptyDataset, "empty test set");
  auto pred = predict(params, test.inputs);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == test.labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

/// Fraction of trigger-stamped test inputs (excluding those already labelled
/// with the target) that the model assigns to the target label.
inline double evaluate_asr(const ModelParams& params, const Dataset& test,
                           const TriggerSpec& trig) {
  trig.validate(test);
  Matrix stamped(0, test.features());
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.labels[i] == trig.target_label) continue;
    std::vector<double> row(test.inputs.row(i).begin(),
                            test.inputs.row(i).end());
    trig.stamp(row);
    stamped.append_row(row);
  }
  if (stamped.rows() == 0) {
    throw Error(Errc::kEmptyAfterExclusion,
                "no test samples outside the target class");
  }
  auto pred = predict(params, stamped);
  std::size_t hit = 0;
  for (auto p : pred) hit += p == trig.target_label;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace attestfl
