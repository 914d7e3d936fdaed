#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stereovol {

enum class ErrorCode {
  // input validation
  UnknownClass,
  NonPositiveVolume,
  DegenerateFramePair,
  EmptyClass,
  InvalidTemplate,
  InvalidConfig,
  // ingestion
  SequenceTooShort,
  OpenMesh,
  EmptyMesh,
  // encoders
  DecodeFailure,
  BackendUnavailable,
  // model and losses
  DimMismatch,
  LengthMismatch,
  EmptyBatch,
  IndexOutOfRange,
  ShapeMismatch,
  CheckpointMismatch,
  // training
  NonFiniteLoss,
  DataEmpty,
  // evaluation
  ZeroGroundTruth,
  TooFewItems,
  // vlm client
  MissingContext,
  UnparseableResponse,
  TransportFailure,
  // generic io
  Io,
  Parse,
};

/// Error family, used by the CLI to select an exit code.
enum class ErrorFamily { Config, Data, Model, Numerical, External, Io };

std::string_view to_string(ErrorCode code) noexcept;
ErrorFamily family_of(ErrorCode code) noexcept;
int exit_code_for(ErrorFamily family) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace stereovol
