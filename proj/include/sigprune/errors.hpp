#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sigprune {

enum class ErrorKind {
  Parse,
  EmptyInput,
  DegenerateDataset,
  Stratification,
  Shape,
  Config,
  DegenerateBatch,
  Label,
  Decision,
  EmptyEval,
  CorruptModel,
  Io,
  Divergence,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace sigprune
