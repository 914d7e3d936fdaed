#include "stereovol/error.hpp"

namespace stereovol {

std::string_view to_string(ErrorCode code) noexcept
{
  switch (code) {
  case ErrorCode::UnknownClass: return "UnknownClass";
  case ErrorCode::NonPositiveVolume: return "NonPositiveVolume";
  case ErrorCode::DegenerateFramePair: return "DegenerateFramePair";
  case ErrorCode::EmptyClass: return "EmptyClass";
  case ErrorCode::InvalidTemplate: return "InvalidTemplate";
  case ErrorCode::InvalidConfig: return "InvalidConfig";
  case ErrorCode::SequenceTooShort: return "SequenceTooShort";
  case ErrorCode::OpenMesh: return "OpenMesh";
  case ErrorCode::EmptyMesh: return "EmptyMesh";
  case ErrorCode::DecodeFailure: return "DecodeFailure";
  case ErrorCode::BackendUnavailable: return "BackendUnavailable";
  case ErrorCode::DimMismatch: return "DimMismatch";
  case ErrorCode::LengthMismatch: return "LengthMismatch";
  case ErrorCode::EmptyBatch: return "EmptyBatch";
  case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
  case ErrorCode::ShapeMismatch: return "ShapeMismatch";
  case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
  case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
  case ErrorCode::DataEmpty: return "DataEmpty";
  case ErrorCode::ZeroGroundTruth: return "ZeroGroundTruth";
  case ErrorCode::TooFewItems: return "TooFewItems";
  case ErrorCode::MissingContext: return "MissingContext";
  case ErrorCode::UnparseableResponse: return "UnparseableResponse";
  case ErrorCode::TransportFailure: return "TransportFailure";
  case ErrorCode::Io: return "Io";
  case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

ErrorFamily family_of(ErrorCode code) noexcept
{
  switch (code) {
  case ErrorCode::InvalidConfig:
  case ErrorCode::InvalidTemplate:
    return ErrorFamily::Config;
  case ErrorCode::UnknownClass:
  case ErrorCode::NonPositiveVolume:
  case ErrorCode::DegenerateFramePair:
  case ErrorCode::EmptyClass:
  case ErrorCode::SequenceTooShort:
  case ErrorCode::OpenMesh:
  case ErrorCode::EmptyMesh:
  case ErrorCode::DecodeFailure:
  case ErrorCode::DataEmpty:
  case ErrorCode::ZeroGroundTruth:
  case ErrorCode::TooFewItems:
  case ErrorCode::LengthMismatch:
  case ErrorCode::EmptyBatch:
  case ErrorCode::IndexOutOfRange:
  case ErrorCode::MissingContext:
    return ErrorFamily::Data;
  case ErrorCode::DimMismatch:
  case ErrorCode::ShapeMismatch:
  case ErrorCode::CheckpointMismatch:
  case ErrorCode::BackendUnavailable:
    return ErrorFamily::Model;
  case ErrorCode::NonFiniteLoss:
    return ErrorFamily::Numerical;
  case ErrorCode::UnparseableResponse:
  case ErrorCode::TransportFailure:
    return ErrorFamily::External;
  case ErrorCode::Io:
  case ErrorCode::Parse:
    return ErrorFamily::Io;
  }
  return ErrorFamily::Io;
}

int exit_code_for(ErrorFamily family) noexcept
{
  switch (family) {
  case ErrorFamily::Config: return 2;
  case ErrorFamily::Data: return 3;
  case ErrorFamily::Model: return 4;
  case ErrorFamily::Numerical: return 5;
  case ErrorFamily::External: return 6;
  case ErrorFamily::Io: return 7;
  }
  return 1;
}

} // namespace stereovol
