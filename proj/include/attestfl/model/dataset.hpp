#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "attestfl/error.hpp"
#include "attestfl/model/matrix.hpp"

namespace attestfl {

using ClassId = std::uint32_t;

struct Dataset {
  Matrix inputs;
  std::vector<ClassId> labels;
  std::uint32_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t features() const noexcept { return inputs.cols(); }
  bool empty() const noexcept { return labels.empty(); }

  void validate() const {
    if (inputs.rows() != labels.size()) {
      throw Error(Errc::kShapeMismatch, "inputs rows != label count");
    }
    if (num_classes < 2) {
      throw Error(Errc::kInvalidArgument, "dataset needs at least 2 classes");
    }
    for (auto y : labels) {
      if (y >= num_classes) {
        throw Error(Errc::kInvalidArgument, "label out of range");
      }
    }
    for (double v : inputs.data()) {
      if (!std::isfinite(v)) {
        throw Error(Errc::kInvalidArgument, "non-finite feature");
      }
    }
  }

  /// Rows `indices` in the given order.
  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.num_classes = num_classes;
    out.inputs = Matrix(0, features());
    out.labels.reserve(indices.size());
    for (auto i : indices) {
      out.inputs.append_row(inputs.row(i));
      out.labels.push_back(labels[i]);
    }
    return out;
  }

  /// Contiguous rows [begin, end).
  Dataset slice(std::size_t begin, std::size_t end) const {
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    return subset(idx);
  }

  std::vector<std::size_t> class_histogram() const {
    std::vector<std::size_t> h(num_classes, 0);
    for (auto y : labels) ++h[y];
    return h;
  }

  double max_value() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : inputs.data()) m = std::max(m, v);
    return m;
  }
};

enum class OptimizerKind : std::uint8_t { kSgd = 0, kAdam = 1 };

struct Hyperparams {
  double learning_rate = 0.01;
  std::uint32_t local_epochs = 2;
  std::uint32_t batch_size = 10;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw Error(Errc::kInvalidArgument, "learning_rate must be > 0");
    }
    if (local_epochs < 1) {
      throw Error(Errc::kInvalidArgument, "local_epochs must be >= 1");
    }
    if (batch_size < 1) {
      throw Error(Errc::kInvalidArgument, "batch_size must be >= 1");
    }
  }

  std::uint32_t batches_for(std::size_t shard_size) const {
    return static_cast<std::uint32_t>((shard_size + batch_size - 1) /
                                      batch_size);
  }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// Backdoor trigger: stamp `feature_indices` to `trigger_value`; the
/// attacker wants the result classified as `target_label`.
struct TriggerSpec {
  std::vector<std::size_t> feature_indices;
  double trigger_value = 1.0;
  ClassId target_label = 0;

  void validate(const Dataset& ds) const {
    for (auto i : feature_indices) {
      if (i >= ds.features()) {
        throw Error(Errc::kInvalidArgument, "trigger index out of range");
      }
    }
    if (target_label >= ds.num_classes) {
      throw Error(Errc::kInvalidArgument, "trigger target out of range");
    }
  }

  void stamp(std::span<double> row) const {
    for (auto i : feature_indices) row[i] = trigger_value;
  }
};

/// Three trailing (non-informative) features set to the dataset maximum,
/// target class 0.
inline TriggerSpec default_trigger(const Dataset& ds) {
  TriggerSpec t;
  const std::size_t f = ds.features();
  for (std::size_t k = 0; k < 3 && k < f; ++k) {
    t.feature_indices.push_back(f - 1 - k);
  }
  std::sort(t.feature_indices.begin(), t.feature_indices.end());
  t.trigger_value = ds.max_value();
  t.target_label = 0;
  return t;
}

// ---------------------------------------------------------------------------
// Synthetic Gaussian-cluster task

struct SyntheticSpec {
  std::uint32_t features = 16;
  std::uint32_t informative = 12;
  std::uint32_t classes = 10;
  double mean_range = 2.0;  // class means ~ U(-mean_range, mean_range)
  double noise = 0.7;       // per-feature N(0, noise^2)
  std::uint64_t seed = 1;
};

/// A fixed set of class means from which any number of train/test samples
/// can be drawn. Features past `informative` carry pure noise.
class SyntheticTask {
 public:
  explicit SyntheticTask(const SyntheticSpec& spec) : spec_(spec) {
    if (spec.classes < 2 || spec.features == 0 ||
        spec.informative > spec.features) {
      throw Error(Errc::kInvalidArgument, "bad synthetic task spec");
    }
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> dist(-spec.mean_range,
                                                spec.mean_range);
    means_ = Matrix(spec.classes, spec.features);
    for (std::uint32_t c = 0; c < spec.classes; ++c) {
      for (std::uint32_t j = 0; j < spec.informative; ++j) {
        means_(c, j) = dist(rng);
      }
    }
  }

  const SyntheticSpec& spec() const noexcept { return spec_; }

  /// Balanced labels (i mod K) in shuffled order.
  Dataset sample(std::size_t n, std::uint64_t seed) const {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> noise(0.0, spec_.noise);
    Dataset ds;
    ds.num_classes = spec_.classes;
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      ds.labels[i] = static_cast<ClassId>(i % spec_.classes);
    }
    std::shuffle(ds.labels.begin(), ds.labels.end(), rng);
    ds.inputs = Matrix(n, spec_.features);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::uint32_t j = 0; j < spec_.features; ++j) {
        ds.inputs(i, j) = means_(ds.labels[i], j) + noise(rng);
      }
    }
    return ds;
  }

 private:
  SyntheticSpec spec_;
  Matrix means_;
};

/// Loads a CSV file, one sample per row with the class id in the last column.
/// A first line that does not parse as numbers is treated as a header.
inline Dataset load_csv(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::uint32_t max_label = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    row.clear();
    std::stringstream ss(line);
    std::string cell;
    bool ok = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      if (line_no == 1) continue;
      throw Error(Errc::kInvalidArgument,
                  "csv line " + std::to_string(line_no) + " not numeric");
    }
    if (row.size() < 2) {
      throw Error(Errc::kInvalidArgument,
                  "csv line " + std::to_string(line_no) + " too short");
    }
    double label = row.back();
    if (label < 0 || label != std::floor(label)) {
      throw Error(Errc::kInvalidArgument,
                  "csv line " + std::to_string(line_no) + " bad label");
    }
    row.pop_back();
    if (!ds.inputs.empty() && row.size() != ds.features()) {
      throw Error(Errc::kShapeMismatch,
                  "csv line " + std::to_string(line_no) + " width differs");
    }
    ds.inputs.append_row(row);
    ds.labels.push_back(static_cast<ClassId>(label));
    max_label = std::max(max_label, static_cast<std::uint32_t>(label));
  }
  if (ds.labels.empty()) throw Error(Errc::kEmptyDataset, "csv has no rows");
  ds.num_classes = std::max<std::uint32_t>(2, max_label + 1);
  ds.validate();
  return ds;
}

inline Dataset load_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot open " + path);
  return load_csv(in);
}

// ---------------------------------------------------------------------------
// Partitioning

enum class PartitionMode { kIid, kNonIid };

namespace detail {

/// Tiny Edmonds-Karp max flow on an adjacency matrix; graphs here have
/// classes + clients + 2 nodes.
class FlowNetwork {
 public:
  explicit FlowNetwork(std::size_t nodes)
      : n_(nodes), cap_(nodes * nodes, 0), flow_(nodes * nodes, 0) {}

  void add_capacity(std::size_t u, std::size_t v, long long c) {
    cap_[u * n_ + v] += c;
  }
  long long flow(std::size_t u, std::size_t v) const {
    return flow_[u * n_ + v];
  }

  long long augment(std::size_t s, std::size_t t) {
    long long total = 0;
    std::vector<std::size_t> parent(n_);
    while (true) {
      std::fill(parent.begin(), parent.end(), n_);
      parent[s] = s;
      std::queue<std::size_t> q;
      q.push(s);
      while (!q.empty() && parent[t] == n_) {
        auto u = q.front();
        q.pop();
        for (std::size_t v = 0; v < n_; ++v) {
          if (parent[v] == n_ && residual(u, v) > 0) {
            parent[v] = u;
            q.push(v);
          }
        }
      }
      if (parent[t] == n_) return total;
      long long push = std::numeric_limits<long long>::max();
      for (auto v = t; v != s; v = parent[v]) {
        push = std::min(push, residual(parent[v], v));
      }
      for (auto v = t; v != s; v = parent[v]) {
        flow_[parent[v] * n_ + v] += push;
        flow_[v * n_ + parent[v]] -= push;
      }
      total += push;
    }
  }

 private:
  long long residual(std::size_t u, std::size_t v) const {
    return cap_[u * n_ + v] - flow_[u * n_ + v];
  }

  std::size_t n_;
  std::vector<long long> cap_;
  std::vector<long long> flow_;
};

}  // namespace detail

/// Splits `ds` into `n_clients` disjoint shards covering every sample, with
/// sizes differing by at most one.
///
/// IID deals class-sorted (shuffled within class) indices round-robin, so
/// each shard's per-class count is within one of the global share.
/// NonIID gives each shard exactly ceil(K/2) classes: shards take evenly
/// spaced windows of a random class permutation, then a max-flow
/// splits every class among its holders (each holder gets at least one
/// sample of each of its classes).
inline std::vector<std::vector<std::size_t>> partition_indices(
    const Dataset& ds, std::size_t n_clients, PartitionMode mode,
    std::uint64_t seed) {
  if (ds.empty()) throw Error(Errc::kEmptyDataset, "cannot partition");
  if (n_clients == 0) {
    throw Error(Errc::kInvalidArgument, "n_clients must be >= 1");
  }
  if (ds.size() < n_clients) {
    throw Error(Errc::kTooManyClients,
                std::to_string(ds.size()) + " samples for " +
                    std::to_string(n_clients) + " clients");
  }
  const std::size_t k = ds.num_classes;
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
  for (auto& c : by_class) std::shuffle(c.begin(), c.end(), rng);

  std::vector<std::vector<std::size_t>> shards(n_clients);
  if (mode == PartitionMode::kIid) {
    std::size_t next = 0;
    for (auto& c : by_class) {
      for (auto idx : c) {
        shards[next].push_back(idx);
        next = (next + 1) % n_clients;
      }
    }
    for (auto& s : shards) std::shuffle(s.begin(), s.end(), rng);
    return shards;
  }

  if (k < 2) throw Error(Errc::kInvalidArgument, "NonIID requires K >= 2");
  const std::size_t half = (k + 1) / 2;
  if (n_clients * half < k) {
    throw Error(Errc::kInvalidArgument,
                "NonIID with ceil(K/2) classes per shard cannot cover all "
                "classes with " + std::to_string(n_clients) + " client(s)");
  }
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  if (ds.size() / n_clients < half) {
    throw Error(Errc::kInvalidArgument,
                "NonIID shards are smaller than ceil(K/2) samples");
  }
  std::vector<std::vector<std::size_t>> holders(k);
  for (std::size_t s = 0; s < n_clients; ++s) {
    const std::size_t start = s * k / n_clients;
    for (std::size_t j = 0; j < half; ++j) {
      holders[perm[(start + j) % k]].push_back(s);
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (by_class[c].size() < holders[c].size()) {
      throw Error(Errc::kInvalidArgument,
                  "class " + std::to_string(c) +
                      " has fewer samples than shards that need it");
    }
  }

  // Nodes: 0 = source, 1..k = classes, k+1..k+n = shards, k+n+1 = sink.
  // One sample per (class, holder) edge is reserved up front.
  const std::size_t src = 0, sink = k + n_clients + 1;
  detail::FlowNetwork net(k + n_clients + 2);
  std::vector<long long> reserved(n_clients, 0);
  for (std::size_t c = 0; c < k; ++c) {
    long long spare = static_cast<long long>(by_class[c].size()) -
                      static_cast<long long>(holders[c].size());
    net.add_capacity(src, 1 + c, spare);
    for (auto s : holders[c]) {
      net.add_capacity(1 + c, k + 1 + s, spare);
      ++reserved[s];
    }
  }
  const long long base = static_cast<long long>(ds.size() / n_clients);
  long long want = static_cast<long long>(ds.size());
  for (std::size_t s = 0; s < n_clients; ++s) {
    want -= reserved[s];
    net.add_capacity(k + 1 + s, sink, base - reserved[s]);
  }
  long long got = net.augment(src, sink);
  for (std::size_t s = 0; s < n_clients; ++s) {
    net.add_capacity(k + 1 + s, sink, 1);
  }
  got += net.augment(src, sink);
  if (got != want) {
    throw Error(Errc::kInvalidArgument,
                "NonIID partition cannot balance shard sizes for this data");
  }

  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pos = 0;
    for (auto s : holders[c]) {
      auto take = static_cast<std::size_t>(net.flow(1 + c, k + 1 + s)) + 1;
      for (std::size_t t = 0; t < take; ++t) {
        shards[s].push_back(by_class[c][pos++]);
      }
    }
  }
  auto [lo, hi] = std::minmax_element(
      shards.begin(), shards.end(),
      [](const auto& a, const auto& b) { return a.size() < b.size(); });
  if (hi->size() - lo->size() > 1) {
    throw Error(Errc::kInvalidArgument,
                "NonIID partition cannot balance shard sizes for this data");
  }
  for (auto& s : shards) std::shuffle(s.begin(), s.end(), rng);
  return shards;
}

inline std::vector<Dataset> partition_dataset(const Dataset& ds,
                                              std::size_t n_clients,
                                              PartitionMode mode,
                                              std::uint64_t seed) {
  auto parts = partition_indices(ds, n_clients, mode, seed);
  std::vector<Dataset> out;
  out.reserve(parts.size());
  for (const auto& p : parts) out.push_back(ds.subset(p));
  return out;
}

}  // namespace attestfl
