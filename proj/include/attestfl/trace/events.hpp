#pragma once

#include <cstdint>
#include <vector>

#include "attestfl/tee/digest.hpp"
#include "attestfl/trace/sites.hpp"

namespace attestfl {

struct CfEvent {
  CfKind kind = CfKind::kCall;
  SiteId site = 0;
  SiteId target = 0;
  std::uint32_t seq = 0;

  friend bool operator==(const CfEvent&, const CfEvent&) = default;
};

struct ControlFlowTrace {
  std::vector<CfEvent> events;
  std::uint32_t site_table_version = kSiteTableVersion;

  std::size_t size() const noexcept { return events.size(); }

  friend bool operator==(const ControlFlowTrace&,
                         const ControlFlowTrace&) = default;
};

/// Encoded events hold at most this many dependencies.
inline constexpr std::size_t kMaxCvDeps = 15;

struct CvEvent {
  VarRef var;
  CvOp op = CvOp::kWrittenBy;
  SiteId site = 0;
  std::vector<VarRef> deps;
  TrainStep step;
  Digest value_digest;

  friend bool operator==(const CvEvent&, const CvEvent&) = default;
};

struct CriticalVariableLog {
  Digest static_snapshot;
  std::vector<CvEvent> dynamic;
  Digest final_delta_digest;

  friend bool operator==(const CriticalVariableLog&,
                         const CriticalVariableLog&) = default;
};

}  // namespace attestfl
