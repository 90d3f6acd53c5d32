#pragma once

// Straight-line reference implementations used as test oracles. Nothing in
// here calls into the library's numeric or aggregation code.

#include <sodium.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

struct Layer {
  std::size_t in, out;
};

// Layer k stores W (out x in, row-major) then b (out), packed back to back.
inline std::vector<Vec> forward(const Vec& theta, const std::vector<Layer>& arch,
                                const Vec& x) {
  std::vector<Vec> acts;
  Vec cur = x;
  std::size_t off = 0;
  for (std::size_t k = 0; k < arch.size(); ++k) {
    const auto [in, out] = arch[k];
    Vec next(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = theta[off + in * out + o];
      for (std::size_t i = 0; i < in; ++i) s += theta[off + o * in + i] * cur[i];
      next[o] = k + 1 < arch.size() ? std::tanh(s) : s;
    }
    off += in * out + out;
    acts.push_back(next);
    cur = next;
  }
  return acts;
}

inline double sample_loss(const Vec& logits, std::size_t label) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  double z = 0;
  for (double v : logits) z += std::exp(v - mx);
  return -(logits[label] - mx - std::log(z));
}

inline double batch_loss(const Vec& theta, const std::vector<Layer>& arch,
                         const std::vector<Vec>& xs,
                         const std::vector<std::size_t>& ys) {
  double total = 0;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    total += sample_loss(forward(theta, arch, xs[n]).back(), ys[n]);
  }
  return total / static_cast<double>(xs.size());
}

inline Vec central_difference(const Vec& theta, const std::vector<Layer>& arch,
                              const std::vector<Vec>& xs,
                              const std::vector<std::size_t>& ys,
                              double h = 1e-6) {
  Vec g(theta.size());
  Vec t = theta;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double keep = t[i];
    t[i] = keep + h;
    const double up = batch_loss(t, arch, xs, ys);
    t[i] = keep - h;
    const double down = batch_loss(t, arch, xs, ys);
    t[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double norm(const Vec& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Single Adam step on a scalar from zero moments.
inline double adam_first_step(double w, double g, double lr, double b1,
                              double b2, double eps) {
  const double m = (1 - b1) * g;
  const double v = (1 - b2) * g * g;
  const double mh = m / (1 - b1);
  const double vh = v / (1 - b2);
  return w - lr * mh / (std::sqrt(vh) + eps);
}

// --- hashing over hand-packed bytes ------------------------------------

inline void put(std::vector<std::uint8_t>& out, std::uint64_t v, int width) {
  for (int i = 0; i < width; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put(out, bits, 8);
}

inline std::array<std::uint8_t, 32> sha256(const std::vector<std::uint8_t>& b) {
  std::array<std::uint8_t, 32> out{};
  crypto_hash_sha256(out.data(), b.data(), b.size());
  return out;
}

// --- aggregation -------------------------------------------------------

using Set = std::vector<Vec>;

inline Vec mean(const Set& xs) {
  Vec out(xs[0].size(), 0.0);
  for (std::size_t j = 0; j < out.size(); ++j) {
    long double s = 0;
    for (const auto& x : xs) s += x[j];
    out[j] = static_cast<double>(s / xs.size());
  }
  return out;
}

inline double sqdist(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

inline std::size_t krum_index(const Set& xs, std::size_t f) {
  const std::size_t n = xs.size();
  const std::size_t m = n >= f + 2 ? n - f - 2 : 0;
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    Vec d;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d.push_back(sqdist(xs[i], xs[j]));
    }
    std::sort(d.begin(), d.end());
    double score = 0;
    for (std::size_t k = 0; k < m; ++k) score += d[k];
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

inline Vec coomed(const Set& xs) {
  Vec out(xs[0].size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    Vec col;
    for (const auto& x : xs) col.push_back(x[j]);
    std::sort(col.begin(), col.end());
    const std::size_t n = col.size();
    out[j] = n % 2 ? col[n / 2] : (col[n / 2 - 1] + col[n / 2]) / 2;
  }
  return out;
}

inline Vec trimmed_mean(const Set& xs, std::size_t beta) {
  Vec out(xs[0].size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    Vec col;
    for (const auto& x : xs) col.push_back(x[j]);
    std::sort(col.begin(), col.end());
    long double s = 0;
    for (std::size_t k = beta; k < col.size() - beta; ++k) s += col[k];
    out[j] = static_cast<double>(s / (col.size() - 2 * beta));
  }
  return out;
}

inline Vec bulyan(Set pool, std::size_t f) {
  const std::size_t s = pool.size() - 2 * f;
  Set chosen;
  while (chosen.size() < s) {
    // Krum over the remaining pool with neighbour count |pool| - f - 2.
    const std::size_t idx = krum_index(pool, f);
    chosen.push_back(pool[idx]);
    pool.erase(pool.begin() + static_cast<long>(idx));
  }
  const std::size_t keep = s - 2 * f;
  const Vec med = coomed(chosen);
  Vec out(chosen[0].size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    Vec col;
    for (const auto& x : chosen) col.push_back(x[j]);
    std::sort(col.begin(), col.end(), [&](double a, double b) {
      const double da = std::abs(a - med[j]), db = std::abs(b - med[j]);
      return da != db ? da < db : a < b;
    });
    long double acc = 0;
    for (std::size_t k = 0; k < keep; ++k) acc += col[k];
    out[j] = static_cast<double>(acc / keep);
  }
  return out;
}

inline Vec fltrust(const Set& xs, const Vec& root) {
  const double rn = norm(root);
  Vec out(root.size(), 0.0);
  double ts_sum = 0;
  std::vector<double> ts(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double dot = 0;
    for (std::size_t j = 0; j < root.size(); ++j) dot += xs[i][j] * root[j];
    const double n = norm(xs[i]);
    ts[i] = n == 0 ? 0.0 : std::max(0.0, dot / (n * rn));
    ts_sum += ts[i];
  }
  if (ts_sum == 0) return out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (ts[i] == 0) continue;
    const double scale = rn / norm(xs[i]);
    for (std::size_t j = 0; j < root.size(); ++j) out[j] += ts[i] * xs[i][j] * scale;
  }
  for (double& v : out) v /= ts_sum;
  return out;
}

}  // namespace oracle
