/**
 * @file architectures.hpp
 * @brief The candidate MCP catchment models: single-state soil and snow
 *        models and the two-state snow+soil coupling, full-series simulation
 *        and the matching reverse pass.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcp/data_model.hpp"
#include "mcp/gating.hpp"
#include "mcp/units.hpp"

namespace mcp {

enum class Family { HMCP1, SNOWMCP1, HYDROMCP2 };
enum class Coupling { Series, Parallel };

struct ModelSpec {
    Family family = Family::HMCP1;
    std::optional<SoilVariant> soil_variant;
    std::optional<SnowVariant> snow_variant;
    std::optional<Coupling> coupling;
    bool pet_constrained = false;

    static ModelSpec hmcp1(SoilVariant variant, bool pet_constrained = false);
    static ModelSpec snowmcp1(SnowVariant variant);
    static ModelSpec hydromcp2(SnowVariant variant, Coupling coupling, bool pet_constrained = false);

    /// Parses names such as "HMCP1-B", "HMCP1-MR-CON", "SNOWMCP1-G", "HYDROMCP2-C-P".
    static ModelSpec parse(std::string_view name);
    std::string name() const;

    bool has_soil() const noexcept { return soil_variant.has_value(); }
    bool has_snow() const noexcept { return snow_variant.has_value(); }

    /// Throws ConfigError for field combinations outside the candidate set.
    void validate() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// The nine candidates: HMCP1 {B, AL, MR}, SNOWMCP1 {B, G, C}, HYDROMCP2 {B, G, C}.
std::vector<ModelSpec> candidate_specs(Coupling coupling = Coupling::Parallel);

std::size_t param_count(const ModelSpec& spec);

/// Slot names in flat order; for HYDROMCP2 the soil slots come first.
std::vector<std::string> param_names(const ModelSpec& spec);

struct ParameterVector {
    std::vector<std::string> names;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    /// Throws ConfigError when `name` is not a slot.
    std::size_t index_of(std::string_view name) const;

    static ParameterVector for_spec(const ModelSpec& spec, std::vector<double> values);
    static ParameterVector zeros(const ModelSpec& spec);
};

/// Slot range occupied by the snow unit (empty when the spec has none).
struct SlotRange {
    std::size_t begin = 0;
    std::size_t end = 0;
};
SlotRange soil_slots(const ModelSpec& spec);
SlotRange snow_slots(const ModelSpec& spec);

/// i.i.d. uniform on [-1, 1], deterministic given the seed.
ParameterVector initialize_params(const ModelSpec& spec, std::uint64_t seed);

struct ColumnScale {
    double mean = 0.0;
    double scale = 1.0;

    double apply(double v) const noexcept { return (v - mean) / scale; }
};

/// Affine standardization of context variables plus the mass-relaxation flux
/// reference. Fitted on the training window and stored with checkpoints.
struct InputScaling {
    ColumnScale pet, tmean, tmin, tmax, vpd, srad;
    double flux_ref = 1.0;  // mean precipitation over the window [mm/day]
};

/// Statistics over timesteps where `window` is true (all timesteps when the
/// mask is empty). Absent columns keep the identity scale; zero spread maps
/// to scale 1.
InputScaling fit_scaling(const ForcingSeries& forcing, const Mask& window = {});

struct InitialState {
    double soil = 0.0;
    double snow = 0.0;
};

struct FluxTrace {
    std::vector<double> soil_input, soil_outflow, soil_loss, mass_relax;
    std::vector<double> snowfall, rainfall, melt, snow_loss;
    std::vector<double> g_O, g_L, g_R, g_RS, g_M, g_SL, g_SR;
};

struct SimulationOutput {
    std::vector<double> q_sim;
    std::vector<double> swe_sim;     // equals snow_state; empty without snow
    std::vector<double> soil_state;  // storage after each step, empty without soil
    std::vector<double> snow_state;
    FluxTrace fluxes;
};

/// Per-step traces retained for the reverse pass.
struct SimulationTape {
    std::vector<SoilStepTrace> soil;
    std::vector<SnowStepTrace> snow;
    std::vector<SoilInputs> soil_inputs;
    std::vector<SnowContext> snow_context;
};

/// Runs the recurrence from `initial` over every timestep. Throws
/// NumericalDivergence at the first non-finite state or flux.
SimulationOutput simulate(const ModelSpec& spec, const ParameterVector& params,
                          const ForcingSeries& forcing, const InputScaling& scaling,
                          const InitialState& initial = {}, SimulationTape* tape = nullptr);

/// Gradient of a scalar objective with respect to every parameter slot, given
/// the objective's adjoints with respect to q_sim and swe_sim (either may be
/// empty when unused). `tape` must come from simulate() with the same inputs.
std::vector<double> backpropagate(const ModelSpec& spec, const ParameterVector& params,
                                  const InputScaling& scaling, const SimulationTape& tape,
                                  std::span<const double> q_bar, std::span<const double> swe_bar);

}  // namespace mcp
