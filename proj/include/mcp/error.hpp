#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mcp {

enum class ErrorKind {
    InvalidData,
    InsufficientData,
    VariantMismatch,
    NumericalDivergence,
    DegenerateSeries,
    EmptyMask,
    ConfigError,
    NoValidCandidate,
    IoError,
};

std::string_view to_string(ErrorKind kind);

/// Exception type used across the library. The kind lets callers (the CLI in
/// particular) map failures onto exit codes and status rows.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message,
          std::optional<std::size_t> timestep = std::nullopt);

    ErrorKind kind() const noexcept { return kind_; }

    /// First offending timestep, set for NumericalDivergence.
    std::optional<std::size_t> timestep() const noexcept { return timestep_; }

private:
    ErrorKind kind_;
    std::optional<std::size_t> timestep_;
};

}  // namespace mcp
