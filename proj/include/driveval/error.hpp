#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace driveval {

enum class ErrorKind {
  InvalidArgument,
  SameNode,
  Unreachable,
  OffRoute,
  NonFiniteInput,
  EmptyDataset,
  SingularSystem,
  Io,
  FormatVersionMismatch,
  CorruptRow,
  EmptySet,
  LengthMismatch,
  NegativeSpeed,
  NoValidWindow,
  UnknownClass,
  EmptyResults,
  TooFewPoints,
  ZeroVariance,
  Empty,
  MissingMetric,
  EmptyGroup,
};

std::string_view to_string(ErrorKind kind);

/// Domain error. Every failure the library reports is one of these; `kind()`
/// lets callers branch without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace driveval
