#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "attestfl/error.hpp"

namespace attestfl {

using SiteId = std::uint32_t;

enum class CfKind : std::uint8_t { kCall = 1, kReturn = 2, kBranch = 3 };

inline const char* cf_kind_name(CfKind k) {
  switch (k) {
    case CfKind::kCall: return "call";
    case CfKind::kReturn: return "return";
    case CfKind::kBranch: return "branch";
  }
  return "?";
}

/// Static instrumentation points of the client training program.
///
/// Call events carry the call site and the callee entry as target; Return
/// events carry the return site and target 0; Branch events carry the loop
/// header and the taken arm. Per-layer sites are `family | layer` with
/// 1-based layer numbers.
namespace site {

inline constexpr SiteId kTrainCall = 0x0001;
inline constexpr SiteId kTrainEntry = 0x0002;
inline constexpr SiteId kTrainReturn = 0x0003;
inline constexpr SiteId kEpochLoop = 0x0010;
inline constexpr SiteId kBatchLoop = 0x0011;
inline constexpr SiteId kLoadBatchCall = 0x0020;
inline constexpr SiteId kLoadBatchEntry = 0x0021;
inline constexpr SiteId kLoadBatchReturn = 0x0022;
inline constexpr SiteId kLossCall = 0x0030;
inline constexpr SiteId kLossEntry = 0x0031;
inline constexpr SiteId kLossReturn = 0x0032;
inline constexpr SiteId kOptimizerCall = 0x0040;
inline constexpr SiteId kOptimizerEntry = 0x0041;
inline constexpr SiteId kOptimizerReturn = 0x0042;

inline constexpr SiteId kForwardCall = 0x0100;
inline constexpr SiteId kForwardEntry = 0x0200;
inline constexpr SiteId kForwardReturn = 0x0300;
inline constexpr SiteId kBackwardCall = 0x0400;
inline constexpr SiteId kBackwardEntry = 0x0500;
inline constexpr SiteId kBackwardReturn = 0x0600;

inline constexpr std::uint32_t kMaxLayers = 0xff;

// Branch arms.
inline constexpr SiteId kArmEnter = 1;
inline constexpr SiteId kArmExit = 2;

constexpr SiteId per_layer(SiteId family, std::size_t layer) {
  return family | static_cast<SiteId>(layer);
}

}  // namespace site

inline constexpr std::uint32_t kSiteTableVersion = 1;

/// site id -> description, plus the version both client and server load.
struct SiteTable {
  std::uint32_t version = kSiteTableVersion;
  std::map<SiteId, std::string> sites;

  bool contains(SiteId id) const { return sites.count(id) != 0; }

  friend bool operator==(const SiteTable&, const SiteTable&) = default;
};

/// Every instrumented site of the training program for an `layers`-deep
/// network.
inline SiteTable make_site_table(std::size_t layers) {
  if (layers == 0 || layers > site::kMaxLayers) {
    throw Error(Errc::kInvalidArgument, "layer count out of range");
  }
  SiteTable t;
  auto& s = t.sites;
  s[site::kTrainCall] = "train: call";
  s[site::kTrainEntry] = "train: entry";
  s[site::kTrainReturn] = "train: return";
  s[site::kEpochLoop] = "epoch loop header";
  s[site::kBatchLoop] = "batch loop header";
  s[site::kLoadBatchCall] = "load_batch: call";
  s[site::kLoadBatchEntry] = "load_batch: entry";
  s[site::kLoadBatchReturn] = "load_batch: return";
  s[site::kLossCall] = "loss: call";
  s[site::kLossEntry] = "loss: entry";
  s[site::kLossReturn] = "loss: return";
  s[site::kOptimizerCall] = "optimizer_step: indirect call";
  s[site::kOptimizerEntry] = "optimizer_step: entry";
  s[site::kOptimizerReturn] = "optimizer_step: return";
  for (std::size_t k = 1; k <= layers; ++k) {
    auto n = std::to_string(k);
    s[site::per_layer(site::kForwardCall, k)] = "forward[" + n + "]: call";
    s[site::per_layer(site::kForwardEntry, k)] = "forward[" + n + "]: entry";
    s[site::per_layer(site::kForwardReturn, k)] = "forward[" + n + "]: return";
    s[site::per_layer(site::kBackwardCall, k)] = "backward[" + n + "]: call";
    s[site::per_layer(site::kBackwardEntry, k)] = "backward[" + n + "]: entry";
    s[site::per_layer(site::kBackwardReturn, k)] =
        "backward[" + n + "]: return";
  }
  return t;
}

// ---------------------------------------------------------------------------
// Critical-variable vocabulary

enum class VarKind : std::uint8_t {
  kWeights = 1,
  kGrads = 2,
  kLoss = 3,
  kActivations = 4,
};

/// A tracked variable; `layer` is 1-based and 0 for Loss.
struct VarRef {
  VarKind kind = VarKind::kLoss;
  std::uint8_t layer = 0;

  static constexpr VarRef weights(std::size_t k) {
    return {VarKind::kWeights, static_cast<std::uint8_t>(k)};
  }
  static constexpr VarRef grads(std::size_t k) {
    return {VarKind::kGrads, static_cast<std::uint8_t>(k)};
  }
  static constexpr VarRef activations(std::size_t k) {
    return {VarKind::kActivations, static_cast<std::uint8_t>(k)};
  }
  static constexpr VarRef loss() { return {VarKind::kLoss, 0}; }

  friend bool operator==(const VarRef&, const VarRef&) = default;
  friend auto operator<=>(const VarRef&, const VarRef&) = default;
};

inline std::string var_name(VarRef v) {
  switch (v.kind) {
    case VarKind::kWeights: return "Weights(" + std::to_string(v.layer) + ")";
    case VarKind::kGrads: return "Grads(" + std::to_string(v.layer) + ")";
    case VarKind::kLoss: return "Loss";
    case VarKind::kActivations:
      return "Activations(" + std::to_string(v.layer) + ")";
  }
  return "?";
}

enum class CvOp : std::uint8_t { kWrittenBy = 1, kReadBy = 2 };

/// (epoch, batch) position inside local training, both 0-based.
struct TrainStep {
  std::uint32_t epoch = 0;
  std::uint32_t batch = 0;

  friend bool operator==(const TrainStep&, const TrainStep&) = default;
};

}  // namespace attestfl
