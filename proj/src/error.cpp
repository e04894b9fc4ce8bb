#include "mtrl/error.hpp"

namespace mtrl {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyTask: return "EmptyTask";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DuplicateTaskId: return "DuplicateTaskId";
    case ErrorCode::InvalidHyperparams: return "InvalidHyperparams";
    case ErrorCode::InvalidKernel: return "InvalidKernel";
    case ErrorCode::InvalidCovariance: return "InvalidCovariance";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::DegenerateTaskVariance: return "DegenerateTaskVariance";
    case ErrorCode::TaskIndexOutOfRange: return "TaskIndexOutOfRange";
    case ErrorCode::MaxIterationsExceeded: return "MaxIterationsExceeded";
    case ErrorCode::DegenerateGram: return "DegenerateGram";
    case ErrorCode::NonDecreaseDetected: return "NonDecreaseDetected";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::UnsupportedKernel: return "UnsupportedKernel";
    case ErrorCode::SigmaOutOfRange: return "SigmaOutOfRange";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::SolverStalled: return "SolverStalled";
    case ErrorCode::NegativeSimilarity: return "NegativeSimilarity";
    case ErrorCode::AsymmetricSimilarity: return "AsymmetricSimilarity";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::SelfEdge: return "SelfEdge";
    case ErrorCode::EmptyCluster: return "EmptyCluster";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ZeroVarianceTruth: return "ZeroVarianceTruth";
    case ErrorCode::GridEmpty: return "GridEmpty";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptModel: return "CorruptModel";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace mtrl
