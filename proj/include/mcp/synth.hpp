/**
 * @file synth.hpp
 * @brief Seasonal synthetic forcing and targets simulated from a known model.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mcp/architectures.hpp"
#include "mcp/data_model.hpp"

namespace mcp {

struct ForcingGenerator {
    Date start = Date{std::chrono::year{1989} / std::chrono::October / 1};
    double wet_probability = 0.35;   // chance of a rain day
    double wet_persistence = 0.6;    // chance a wet day follows a wet day
    double mean_wet_depth = 7.0;     // mm/day, exponential
    double precip_seasonality = 0.4; // relative winter excess
    double temp_mean = 8.0;          // degC
    double temp_amplitude = 11.0;
    double temp_noise = 2.5;
    double diurnal_range = 10.0;
    double pet_mean = 2.2;           // mm/day
    double pet_amplitude = 1.8;
};

struct SynthSpec {
    std::string catchment_id = "synth";
    ModelSpec spec = ModelSpec::hmcp1(SoilVariant::Basic);
    std::optional<std::vector<double>> params;  // random when unset
    std::size_t length = 9862;
    ForcingGenerator forcing;
    double noise_sigma = 0.0;  // lognormal multiplicative noise
    std::uint64_t seed = 0;

    /// Throws ConfigError for N = 0, negative noise or a wrong parameter count.
    void validate() const;
};

struct SynthResult {
    CatchmentRecord record;
    ParameterVector params;
    InputScaling scaling;
    SimulationOutput truth;  // noiseless simulation
};

/// Seasonal forcing with every optional column populated.
ForcingSeries generate_forcing(const ForcingGenerator& gen, std::size_t length,
                               std::uint64_t seed);

/// Simulates the generating model on fresh forcing and perturbs the targets.
/// Streamflow is always written; SWE only when the spec has a snow unit.
SynthResult synthesize(const SynthSpec& spec);

}  // namespace mcp
