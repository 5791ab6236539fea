/**
 * @file units.hpp
 * @brief Single-timestep updates of the SOIL-MCP and SNOW-MCP units and their
 *        reverse-mode (adjoint) counterparts.
 *
 * Soil:  X' = G_R X + U + MR,  O = G_O X,  L = G_L X
 * Snow:  S' = G_SR S + U_S,    U_S = G_RS U,  U_R = U - U_S,
 *        melt = G_M S,  loss = G_SL S
 *
 * The backward functions take adjoints of the step outputs, accumulate
 * parameter adjoints into a gradient object of the same variant, and return
 * the adjoints of the step inputs. They rely on the trace recorded by the
 * forward call.
 */
#pragma once

#include "mcp/gating.hpp"

namespace mcp {

struct SoilInputs {
    double u = 0.0;       // water input [mm/day]
    double pet = 0.0;     // raw PET [mm/day], used by the PET constraint
    double pet_std = 0.0; // standardized PET, used by the loss gate
};

struct SoilOptions {
    bool pet_constrained = false;
    double flux_ref = 1.0;  // mm/day; scales the mass-relaxation gate into a flux
};

struct SoilStepResult {
    double x_next = 0.0;
    double outflow = 0.0;
    double loss = 0.0;
    double mr_flux = 0.0;  // gain-positive
};

struct SoilStepTrace {
    SoilGates gates;          // g_L here is the effective (possibly capped) loss gate
    double x = 0.0;
    bool loss_capped = false; // PET constraint active
    bool clamped = false;     // mass-relaxation outflow limited to keep X' >= 0
    double mr_kappa = 0.0;
    double mr_rate = 0.0;
    double mr_tanh = 0.0;
};

SoilStepResult soil_step(const SoilGateParams& params, double x, const SoilInputs& in,
                         const SoilOptions& options, SoilStepTrace* trace = nullptr);

struct SoilStepAdjoint {
    double x_next = 0.0;
    double outflow = 0.0;
    double loss = 0.0;
};

struct SoilInputAdjoint {
    double x = 0.0;
    double u = 0.0;
};

SoilInputAdjoint soil_step_backward(const SoilGateParams& params, const SoilStepTrace& trace,
                                    const SoilInputs& in, const SoilOptions& options,
                                    const SoilStepAdjoint& adjoint, SoilGateParams& grad);

struct SnowStepResult {
    double swe_next = 0.0;
    double snowfall = 0.0;
    double rainfall = 0.0;
    double melt = 0.0;
    double loss = 0.0;
};

struct SnowStepTrace {
    SnowGates gates;
    double swe = 0.0;
    double u = 0.0;
};

SnowStepResult snow_step(const SnowGateParams& params, double swe, double u,
                         const SnowContext& context, SnowStepTrace* trace = nullptr);

struct SnowStepAdjoint {
    double swe_next = 0.0;
    double melt = 0.0;
    double rainfall = 0.0;
    double loss = 0.0;
};

/// Returns the adjoint of the incoming SWE state.
double snow_step_backward(const SnowGateParams& params, const SnowStepTrace& trace, double u,
                          const SnowContext& context, const SnowStepAdjoint& adjoint,
                          SnowGateParams& grad);

}  // namespace mcp
