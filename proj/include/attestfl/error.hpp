#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace attestfl {

enum class Errc {
  kEmptyDataset,
  kTooManyClients,
  kShapeMismatch,
  kEmptyAfterExclusion,
  kAlreadySnapshotted,
  kNotSnapshotted,
  kUnknownSite,
  kEmptyTrace,
  kRecorderFinalized,
  kOversizeField,
  kMalformedSignature,
  kMalformedMessage,
  kEmptyInput,
  kDimMismatch,
  kTooFewClients,
  kZeroRootUpdate,
  kConfigInvalid,
  kInvalidArgument,
  kIo,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kEmptyDataset: return "EmptyDataset";
    case Errc::kTooManyClients: return "TooManyClients";
    case Errc::kShapeMismatch: return "ShapeMismatch";
    case Errc::kEmptyAfterExclusion: return "EmptyAfterExclusion";
    case Errc::kAlreadySnapshotted: return "AlreadySnapshotted";
    case Errc::kNotSnapshotted: return "NotSnapshotted";
    case Errc::kUnknownSite: return "UnknownSite";
    case Errc::kEmptyTrace: return "EmptyTrace";
    case Errc::kRecorderFinalized: return "RecorderFinalized";
    case Errc::kOversizeField: return "OversizeField";
    case Errc::kMalformedSignature: return "MalformedSignature";
    case Errc::kMalformedMessage: return "MalformedMessage";
    case Errc::kEmptyInput: return "EmptyInput";
    case Errc::kDimMismatch: return "DimMismatch";
    case Errc::kTooFewClients: return "TooFewClients";
    case Errc::kZeroRootUpdate: return "ZeroRootUpdate";
    case Errc::kConfigInvalid: return "ConfigInvalid";
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kIo: return "Io";
  }
  return "Unknown";
}

/// Base exception for every failure raised by the library. `code()` is the
/// machine-readable kind; `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Decoding failure. `offset` is the byte position inside the canonical
/// report body (framing errors in front of the body report offset 0).
class MalformedMessage : public Error {
 public:
  MalformedMessage(std::size_t offset, const std::string& reason)
      : Error(Errc::kMalformedMessage,
              "at offset " + std::to_string(offset) + ": " + reason),
        offset_(offset),
        reason_(reason) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t offset_;
  std::string reason_;
};

class ConfigInvalid : public Error {
 public:
  ConfigInvalid(std::string field, const std::string& reason)
      : Error(Errc::kConfigInvalid, field + ": " + reason),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace attestfl
