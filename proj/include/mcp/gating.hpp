/**
 * @file gating.hpp
 * @brief Conductivity gate mathematics for the soil and snow MCP units.
 *
 * Gate pre-activations are affine in the (scaled) cell state and in
 * standardized context variables. Output/loss style gates are capped by
 * softmax-normalized conductivities so that, together with the remember gate,
 * they always sum to one.
 *
 * Contract on inputs: states are passed in mm and scaled internally by
 * kStateReference; context variables (pet, temperatures, vpd, srad) are
 * expected to be standardized already (see InputScaling in architectures.hpp).
 */
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mcp {

/// Reference storage used to scale cell states before they enter gates [mm].
inline constexpr double kStateReference = 1000.0;

/// Below this storage the PET constraint is not applied [mm].
inline constexpr double kStateEpsilon = 1e-9;

inline double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

enum class SoilVariant { Basic, AugLoss, MassRelax };
enum class SnowVariant { Basic, Generic, Complex };

std::size_t soil_param_count(SoilVariant variant);
std::size_t snow_param_count(SnowVariant variant);

/// Slot names in flat-vector order.
std::vector<std::string> soil_param_names(SoilVariant variant);
std::vector<std::string> snow_param_names(SnowVariant variant);

struct MassRelaxParams {
    double kappa_raw = 0.0;  // kappa_MR = sigmoid(kappa_raw)
    double a_raw = 0.0;      // a_MR = exp(a_raw)
    double c_tilde = 0.0;    // threshold in scaled-state units
};

struct SoilGateParams {
    double a_O = 0.0, b_O = 0.0, c_O = 0.0;
    double a_L = 0.0, b_L = 0.0, c_L = 0.0;
    double c_R = 0.0;
    std::optional<double> b_L_star;        // AugLoss only
    std::optional<MassRelaxParams> mr;     // MassRelax only

    SoilVariant variant() const noexcept;

    static SoilGateParams zeros(SoilVariant variant);
    static SoilGateParams from_slots(SoilVariant variant, std::span<const double> slots);
    void to_slots(std::span<double> slots) const;
};

struct SnowGenericTerms {
    double b_RS_vpd = 0.0, b_SL_vpd = 0.0, b_M_srad = 0.0;
};

struct SnowComplexTerms {
    double b_RS_tmin = 0.0, b_RS_tmax = 0.0;
    double b_M_tmin = 0.0, b_M_tmax = 0.0;
    double b_SL_tmin = 0.0, b_SL_tmax = 0.0;
};

struct SnowGateParams {
    double a_RS = 0.0, b_RS = 0.0;
    double a_M = 0.0, b_M = 0.0, bstar_M = 0.0, c_M = 0.0;
    double a_SL = 0.0, b_SL = 0.0, bstar_SL = 0.0, c_SL = 0.0;
    double c_SR = 0.0;
    std::optional<SnowGenericTerms> generic;  // Generic and Complex
    std::optional<SnowComplexTerms> complex;  // Complex only

    SnowVariant variant() const noexcept;

    static SnowGateParams zeros(SnowVariant variant);
    static SnowGateParams from_slots(SnowVariant variant, std::span<const double> slots);
    void to_slots(std::span<double> slots) const;
};

/// Softmax over three logits with max-subtraction.
std::array<double, 3> softmax_caps(double c_out, double c_loss, double c_rem);

struct SoilGates {
    double g_O = 0.0, g_L = 0.0, g_R = 0.0;
    // Intermediates kept for the reverse pass.
    double kappa_O = 0.0, kappa_L = 0.0, kappa_R = 0.0;
    double sig_O = 0.0, sig_L = 0.0;
};

/// `x` in mm, `pe_std` is standardized PET.
SoilGates soil_gates(const SoilGateParams& params, double x, double pe_std);

/// kappa_MR * tanh(a_MR * (x_scaled - c_tilde)); positive values are outflow.
double mass_relax_flux(const MassRelaxParams& params, double x_scaled);

/// min(g_L, pet / x), i.e. g_L - ReLU(g_L - pet / x); identity when x is ~0.
double pet_constrained_loss_gate(double g_L, double pet, double x);

/// Standardized snow-gate context. Optional members must be present exactly
/// when the variant uses them.
struct SnowContext {
    double tmean = 0.0;
    std::optional<double> vpd, srad, tmin, tmax;
};

struct SnowGates {
    double g_RS = 0.0, g_M = 0.0, g_SL = 0.0, g_SR = 0.0;
    double kappa_M = 0.0, kappa_SL = 0.0, kappa_SR = 0.0;
    double sig_M = 0.0, sig_SL = 0.0;
};

/// Throws VariantMismatch when the context lacks a variable the variant needs.
SnowGates snow_gates(const SnowGateParams& params, double swe, const SnowContext& context);

}  // namespace mcp
