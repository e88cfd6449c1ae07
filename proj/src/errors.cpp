#include "sigprune/errors.hpp"

namespace sigprune {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::EmptyInput: return "empty input";
    case ErrorKind::DegenerateDataset: return "degenerate dataset";
    case ErrorKind::Stratification: return "stratification error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::DegenerateBatch: return "degenerate batch";
    case ErrorKind::Label: return "label error";
    case ErrorKind::Decision: return "decision error";
    case ErrorKind::EmptyEval: return "empty evaluation";
    case ErrorKind::CorruptModel: return "corrupt model";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Divergence: return "divergence";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace sigprune
