#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "attestfl/error.hpp"

namespace attestfl {

/// Anything indexable with a size: std::vector<double>, ModelParams, ...
template <class T>
concept Coordinates = requires(const T& v, std::size_t i) {
  { v.size() } -> std::convertible_to<std::size_t>;
  { v[i] } -> std::convertible_to<double>;
};

template <class R>
concept UpdateSet = requires(const R& r) {
  { r.size() } -> std::convertible_to<std::size_t>;
  { r[0] } -> Coordinates;
};

using Update = std::vector<double>;

namespace detail {

template <UpdateSet R>
std::size_t check_updates(const R& deltas) {
  if (deltas.size() == 0) throw Error(Errc::kEmptyInput, "no updates");
  const std::size_t d = deltas[0].size();
  for (std::size_t i = 1; i < deltas.size(); ++i) {
    if (deltas[i].size() != d) {
      throw Error(Errc::kDimMismatch, "update " + std::to_string(i) + " has " +
                                          std::to_string(deltas[i].size()) +
                                          " coordinates, expected " +
                                          std::to_string(d));
    }
  }
  return d;
}

template <UpdateSet R>
std::vector<double> column(const R& deltas, std::size_t j) {
  std::vector<double> c(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) c[i] = deltas[i][j];
  return c;
}

template <Coordinates A, Coordinates B>
double squared_distance(const A& a, const B& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double t = a[j] - b[j];
    s += t * t;
  }
  return s;
}

inline double sorted_median(const std::vector<double>& c) {
  const std::size_t n = c.size();
  return n % 2 ? c[n / 2] : (c[n / 2 - 1] + c[n / 2]) / 2.0;
}

}  // namespace detail

template <UpdateSet R>
Update fedavg(const R& deltas) {
  const std::size_t d = detail::check_updates(deltas);
  Update out(d, 0.0);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) out[j] += deltas[i][j];
  }
  for (auto& v : out) v /= static_cast<double>(deltas.size());
  return out;
}

/// Krum scores: sum of squared distances to the n - f - 2 nearest others.
template <UpdateSet R>
std::vector<double> krum_scores(const R& deltas, std::size_t f) {
  const std::size_t n = deltas.size();
  const std::size_t m = n >= f + 2 ? n - f - 2 : 0;
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dist[i][j] = dist[j][i] = detail::squared_distance(deltas[i], deltas[j]);
    }
  }
  std::vector<double> scores(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> others;
    others.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(dist[i][j]);
    }
    std::partial_sort(others.begin(), others.begin() + static_cast<long>(m),
                      others.end());
    for (std::size_t k = 0; k < m; ++k) scores[i] += others[k];
  }
  return scores;
}

/// Index of the Krum choice; ties go to the lowest index.
template <UpdateSet R>
std::size_t krum_select(const R& deltas, std::size_t f) {
  detail::check_updates(deltas);
  if (deltas.size() < f + 3) {
    throw Error(Errc::kTooFewClients, "Krum needs n >= f + 3");
  }
  auto scores = krum_scores(deltas, f);
  return static_cast<std::size_t>(std::min_element(scores.begin(), scores.end()) -
                                  scores.begin());
}

template <UpdateSet R>
Update krum(const R& deltas, std::size_t f) {
  const auto& chosen = deltas[krum_select(deltas, f)];
  Update out(chosen.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = chosen[j];
  return out;
}

/// Coordinate-wise median; even counts average the middle pair.
template <UpdateSet R>
Update coomed(const R& deltas) {
  const std::size_t d = detail::check_updates(deltas);
  Update out(d);
  for (std::size_t j = 0; j < d; ++j) {
    auto c = detail::column(deltas, j);
    std::sort(c.begin(), c.end());
    out[j] = detail::sorted_median(c);
  }
  return out;
}

/// Coordinate-wise mean after dropping the `beta` largest and smallest.
template <UpdateSet R>
Update trimmed_mean(const R& deltas, std::size_t beta) {
  const std::size_t d = detail::check_updates(deltas);
  const std::size_t n = deltas.size();
  if (n <= 2 * beta) throw Error(Errc::kTooFewClients, "trimmed mean needs n > 2*beta");
  Update out(d);
  for (std::size_t j = 0; j < d; ++j) {
    auto c = detail::column(deltas, j);
    std::sort(c.begin(), c.end());
    double s = 0.0;
    for (std::size_t k = beta; k < n - beta; ++k) s += c[k];
    out[j] = s / static_cast<double>(n - 2 * beta);
  }
  return out;
}

/// Picks n - 2f updates by repeated Krum (each pick leaves the pool), then
/// averages, per coordinate, the n - 4f picked values nearest the median.
template <UpdateSet R>
Update bulyan(const R& deltas, std::size_t f) {
  const std::size_t d = detail::check_updates(deltas);
  const std::size_t n = deltas.size();
  if (n < 4 * f + 3) throw Error(Errc::kTooFewClients, "Bulyan needs n >= 4f + 3");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  std::vector<std::size_t> picked;
  const std::size_t s = n - 2 * f;
  while (picked.size() < s) {
    std::vector<Update> view(pool.size(), Update(d));
    for (std::size_t p = 0; p < pool.size(); ++p) {
      for (std::size_t j = 0; j < d; ++j) view[p][j] = deltas[pool[p]][j];
    }
    auto scores = krum_scores(view, f);
    auto best = static_cast<std::size_t>(
        std::min_element(scores.begin(), scores.end()) - scores.begin());
    picked.push_back(pool[best]);
    pool.erase(pool.begin() + static_cast<long>(best));
  }
  const std::size_t keep = s - 2 * f;
  Update out(d);
  std::vector<double> c(s);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < s; ++k) c[k] = deltas[picked[k]][j];
    std::sort(c.begin(), c.end());
    const double med = detail::sorted_median(c);
    std::stable_sort(c.begin(), c.end(), [med](double a, double b) {
      return std::abs(a - med) < std::abs(b - med);
    });
    double acc = 0.0;
    for (std::size_t k = 0; k < keep; ++k) acc += c[k];
    out[j] = acc / static_cast<double>(keep);
  }
  return out;
}

/// Trust-weighted average: ReLU(cos(delta_i, root)) weights, each update
/// rescaled to the root update's norm.
template <UpdateSet R, Coordinates Root>
Update fltrust(const R& deltas, const Root& root) {
  const std::size_t d = detail::check_updates(deltas);
  if (root.size() != d) throw Error(Errc::kDimMismatch, "root update dimension");
  double root_sq = 0.0;
  for (std::size_t j = 0; j < d; ++j) root_sq += root[j] * root[j];
  if (root_sq == 0.0) throw Error(Errc::kZeroRootUpdate, "root update is zero");
  const double root_norm = std::sqrt(root_sq);
  Update out(d, 0.0);
  double ts_sum = 0.0;
  std::vector<double> ts(deltas.size(), 0.0), scale(deltas.size(), 0.0);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    double dot = 0.0, sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dot += deltas[i][j] * root[j];
      sq += deltas[i][j] * deltas[i][j];
    }
    if (sq == 0.0) continue;
    const double norm = std::sqrt(sq);
    ts[i] = std::max(0.0, dot / (norm * root_norm));
    scale[i] = root_norm / norm;
    ts_sum += ts[i];
  }
  if (ts_sum == 0.0) return out;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (ts[i] == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) out[j] += ts[i] * deltas[i][j] * scale[i];
  }
  for (auto& v : out) v /= ts_sum;
  return out;
}

// ---------------------------------------------------------------------------
// Rule selection

enum class AggKind { kFedAvg, kKrum, kCoomed, kTrimmedMean, kBulyan, kFlTrust };

struct AggRule {
  AggKind kind = AggKind::kFedAvg;
  std::size_t f = 0;
  std::size_t beta = 0;
};

inline const char* agg_name(AggKind k) {
  switch (k) {
    case AggKind::kFedAvg: return "fedavg";
    case AggKind::kKrum: return "krum";
    case AggKind::kCoomed: return "coomed";
    case AggKind::kTrimmedMean: return "trimmed_mean";
    case AggKind::kBulyan: return "bulyan";
    case AggKind::kFlTrust: return "fltrust";
  }
  return "?";
}

inline std::optional<AggKind> parse_agg_kind(const std::string& s) {
  for (auto k : {AggKind::kFedAvg, AggKind::kKrum, AggKind::kCoomed,
                 AggKind::kTrimmedMean, AggKind::kBulyan, AggKind::kFlTrust}) {
    if (s == agg_name(k)) return k;
  }
  if (s == "trimmedmean" || s == "trimmed") return AggKind::kTrimmedMean;
  return std::nullopt;
}

/// Whether `rule` can run on `n` updates.
inline bool rule_admits(const AggRule& rule, std::size_t n) {
  switch (rule.kind) {
    case AggKind::kKrum: return n >= rule.f + 3;
    case AggKind::kBulyan: return n >= 4 * rule.f + 3;
    case AggKind::kTrimmedMean: return n > 2 * rule.beta;
    default: return n >= 1;
  }
}

/// `rule` with f / beta lowered until it admits `n` updates. Returns
/// nothing when no setting works (n too small for the rule at all).
inline std::optional<AggRule> clamp_rule(AggRule rule, std::size_t n) {
  while (!rule_admits(rule, n)) {
    if ((rule.kind == AggKind::kKrum || rule.kind == AggKind::kBulyan) && rule.f > 0) {
      --rule.f;
    } else if (rule.kind == AggKind::kTrimmedMean && rule.beta > 0) {
      --rule.beta;
    } else {
      return std::nullopt;
    }
  }
  return rule;
}

/// Applies `rule`. FLTrust needs the server's `root` update.
template <UpdateSet R>
Update aggregate(const AggRule& rule, const R& deltas,
                 const Update* root = nullptr) {
  switch (rule.kind) {
    case AggKind::kFedAvg: return fedavg(deltas);
    case AggKind::kKrum: return krum(deltas, rule.f);
    case AggKind::kCoomed: return coomed(deltas);
    case AggKind::kTrimmedMean: return trimmed_mean(deltas, rule.beta);
    case AggKind::kBulyan: return bulyan(deltas, rule.f);
    case AggKind::kFlTrust:
      if (root == nullptr) throw Error(Errc::kInvalidArgument, "FLTrust needs a root update");
      return fltrust(deltas, *root);
  }
  throw Error(Errc::kInvalidArgument, "unknown aggregation rule");
}

}  // namespace attestfl
