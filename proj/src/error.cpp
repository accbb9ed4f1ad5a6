#include "driveval/error.hpp"

namespace driveval {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::SameNode: return "SameNode";
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::OffRoute: return "OffRoute";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::Io: return "Io";
    case ErrorKind::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorKind::CorruptRow: return "CorruptRow";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NegativeSpeed: return "NegativeSpeed";
    case ErrorKind::NoValidWindow: return "NoValidWindow";
    case ErrorKind::UnknownClass: return "UnknownClass";
    case ErrorKind::EmptyResults: return "EmptyResults";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::Empty: return "Empty";
    case ErrorKind::MissingMetric: return "MissingMetric";
    case ErrorKind::EmptyGroup: return "EmptyGroup";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace driveval
