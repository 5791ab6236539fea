#include "mcp/error.hpp"

namespace mcp {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidData: return "InvalidData";
        case ErrorKind::InsufficientData: return "InsufficientData";
        case ErrorKind::VariantMismatch: return "VariantMismatch";
        case ErrorKind::NumericalDivergence: return "NumericalDivergence";
        case ErrorKind::DegenerateSeries: return "DegenerateSeries";
        case ErrorKind::EmptyMask: return "EmptyMask";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::NoValidCandidate: return "NoValidCandidate";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message, std::optional<std::size_t> timestep)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      timestep_(timestep) {}

}  // namespace mcp
