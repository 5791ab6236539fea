#include "mcp/gating.hpp"

#include <algorithm>

#include "mcp/error.hpp"

namespace mcp {

namespace {

void require_slots(std::span<const double> slots, std::size_t expected, const char* unit) {
    if (slots.size() != expected) {
        throw Error(ErrorKind::VariantMismatch, std::string(unit) + " parameters: expected " +
                                                    std::to_string(expected) + " slots, got " +
                                                    std::to_string(slots.size()));
    }
}

double require(const std::optional<double>& value, const char* name) {
    if (!value) {
        throw Error(ErrorKind::VariantMismatch,
                    std::string("snow gate variant requires context variable '") + name + "'");
    }
    return *value;
}

}  // namespace

std::size_t soil_param_count(SoilVariant variant) {
    switch (variant) {
        case SoilVariant::Basic: return 7;
        case SoilVariant::AugLoss: return 8;
        case SoilVariant::MassRelax: return 10;
    }
    return 7;
}

std::size_t snow_param_count(SnowVariant variant) {
    switch (variant) {
        case SnowVariant::Basic: return 11;
        case SnowVariant::Generic: return 14;
        case SnowVariant::Complex: return 20;
    }
    return 11;
}

std::vector<std::string> soil_param_names(SoilVariant variant) {
    std::vector<std::string> names = {"a_O", "b_O", "c_O", "a_L", "b_L", "c_L", "c_R"};
    if (variant == SoilVariant::AugLoss) names.push_back("b_L_star");
    if (variant == SoilVariant::MassRelax) {
        names.insert(names.end(), {"kappa_MR_raw", "a_MR_raw", "c_MR"});
    }
    return names;
}

std::vector<std::string> snow_param_names(SnowVariant variant) {
    std::vector<std::string> names = {"a_RS", "b_RS",  "a_M",      "b_M",  "bstar_M", "c_M",
                                      "a_SL", "b_SL", "bstar_SL", "c_SL", "c_SR"};
    if (variant != SnowVariant::Basic) names.insert(names.end(), {"b_RS_vpd", "b_SL_vpd", "b_M_srad"});
    if (variant == SnowVariant::Complex) {
        names.insert(names.end(),
                     {"b_RS_tmin", "b_RS_tmax", "b_M_tmin", "b_M_tmax", "b_SL_tmin", "b_SL_tmax"});
    }
    return names;
}

SoilVariant SoilGateParams::variant() const noexcept {
    if (mr) return SoilVariant::MassRelax;
    if (b_L_star) return SoilVariant::AugLoss;
    return SoilVariant::Basic;
}

SoilGateParams SoilGateParams::zeros(SoilVariant variant) {
    SoilGateParams p;
    if (variant == SoilVariant::AugLoss) p.b_L_star = 0.0;
    if (variant == SoilVariant::MassRelax) p.mr = MassRelaxParams{};
    return p;
}

SoilGateParams SoilGateParams::from_slots(SoilVariant variant, std::span<const double> s) {
    require_slots(s, soil_param_count(variant), "soil");
    SoilGateParams p;
    p.a_O = s[0];
    p.b_O = s[1];
    p.c_O = s[2];
    p.a_L = s[3];
    p.b_L = s[4];
    p.c_L = s[5];
    p.c_R = s[6];
    if (variant == SoilVariant::AugLoss) p.b_L_star = s[7];
    if (variant == SoilVariant::MassRelax) p.mr = MassRelaxParams{s[7], s[8], s[9]};
    return p;
}

void SoilGateParams::to_slots(std::span<double> s) const {
    require_slots(s, soil_param_count(variant()), "soil");
    s[0] = a_O;
    s[1] = b_O;
    s[2] = c_O;
    s[3] = a_L;
    s[4] = b_L;
    s[5] = c_L;
    s[6] = c_R;
    if (b_L_star) s[7] = *b_L_star;
    if (mr) {
        s[7] = mr->kappa_raw;
        s[8] = mr->a_raw;
        s[9] = mr->c_tilde;
    }
}

SnowVariant SnowGateParams::variant() const noexcept {
    if (complex) return SnowVariant::Complex;
    if (generic) return SnowVariant::Generic;
    return SnowVariant::Basic;
}

SnowGateParams SnowGateParams::zeros(SnowVariant variant) {
    SnowGateParams p;
    if (variant != SnowVariant::Basic) p.generic = SnowGenericTerms{};
    if (variant == SnowVariant::Complex) p.complex = SnowComplexTerms{};
    return p;
}

SnowGateParams SnowGateParams::from_slots(SnowVariant variant, std::span<const double> s) {
    require_slots(s, snow_param_count(variant), "snow");
    SnowGateParams p;
    p.a_RS = s[0];
    p.b_RS = s[1];
    p.a_M = s[2];
    p.b_M = s[3];
    p.bstar_M = s[4];
    p.c_M = s[5];
    p.a_SL = s[6];
    p.b_SL = s[7];
    p.bstar_SL = s[8];
    p.c_SL = s[9];
    p.c_SR = s[10];
    if (variant != SnowVariant::Basic) p.generic = SnowGenericTerms{s[11], s[12], s[13]};
    if (variant == SnowVariant::Complex) {
        p.complex = SnowComplexTerms{s[14], s[15], s[16], s[17], s[18], s[19]};
    }
    return p;
}

void SnowGateParams::to_slots(std::span<double> s) const {
    require_slots(s, snow_param_count(variant()), "snow");
    const double values[] = {a_RS, b_RS, a_M, b_M, bstar_M, c_M, a_SL, b_SL, bstar_SL, c_SL, c_SR};
    std::copy(std::begin(values), std::end(values), s.begin());
    if (generic) {
        s[11] = generic->b_RS_vpd;
        s[12] = generic->b_SL_vpd;
        s[13] = generic->b_M_srad;
    }
    if (complex) {
        s[14] = complex->b_RS_tmin;
        s[15] = complex->b_RS_tmax;
        s[16] = complex->b_M_tmin;
        s[17] = complex->b_M_tmax;
        s[18] = complex->b_SL_tmin;
        s[19] = complex->b_SL_tmax;
    }
}

std::array<double, 3> softmax_caps(double c_out, double c_loss, double c_rem) {
    const double m = std::max({c_out, c_loss, c_rem});
    const double e0 = std::exp(c_out - m);
    const double e1 = std::exp(c_loss - m);
    const double e2 = std::exp(c_rem - m);
    const double psi = e0 + e1 + e2;
    return {e0 / psi, e1 / psi, e2 / psi};
}

SoilGates soil_gates(const SoilGateParams& p, double x, double pe_std) {
    const auto kappa = softmax_caps(p.c_O, p.c_L, p.c_R);
    const double xs = x / kStateReference;
    double s_loss = p.a_L + p.b_L * pe_std;
    if (p.b_L_star) s_loss += *p.b_L_star * xs;

    SoilGates g;
    g.kappa_O = kappa[0];
    g.kappa_L = kappa[1];
    g.kappa_R = kappa[2];
    g.sig_O = sigmoid(p.a_O + p.b_O * xs);
    g.sig_L = sigmoid(s_loss);
    g.g_O = g.kappa_O * g.sig_O;
    g.g_L = g.kappa_L * g.sig_L;
    // Summed from non-negative parts; 1 - g_O - g_L can round below zero.
    g.g_R = std::min(1.0, g.kappa_R + g.kappa_O * sigmoid(-(p.a_O + p.b_O * xs)) +
                              g.kappa_L * sigmoid(-s_loss));
    return g;
}

double mass_relax_flux(const MassRelaxParams& p, double x_scaled) {
    return sigmoid(p.kappa_raw) * std::tanh(std::exp(p.a_raw) * (x_scaled - p.c_tilde));
}

double pet_constrained_loss_gate(double g_L, double pet, double x) {
    if (x <= kStateEpsilon) return g_L;
    return std::min(g_L, pet / x);
}

SnowGates snow_gates(const SnowGateParams& p, double swe, const SnowContext& c) {
    const double ss = swe / kStateReference;
    double s_rs = p.a_RS + p.b_RS * c.tmean;
    double s_m = p.a_M + p.b_M * c.tmean + p.bstar_M * ss;
    double s_sl = p.a_SL + p.b_SL * c.tmean + p.bstar_SL * ss;
    if (p.generic) {
        const double vpd = require(c.vpd, "vpd");
        const double srad = require(c.srad, "srad");
        s_rs += p.generic->b_RS_vpd * vpd;
        s_sl += p.generic->b_SL_vpd * vpd;
        s_m += p.generic->b_M_srad * srad;
    }
    if (p.complex) {
        const double tmin = require(c.tmin, "tmin");
        const double tmax = require(c.tmax, "tmax");
        s_rs += p.complex->b_RS_tmin * tmin + p.complex->b_RS_tmax * tmax;
        s_m += p.complex->b_M_tmin * tmin + p.complex->b_M_tmax * tmax;
        s_sl += p.complex->b_SL_tmin * tmin + p.complex->b_SL_tmax * tmax;
    }

    const auto kappa = softmax_caps(p.c_M, p.c_SL, p.c_SR);
    SnowGates g;
    g.kappa_M = kappa[0];
    g.kappa_SL = kappa[1];
    g.kappa_SR = kappa[2];
    g.g_RS = sigmoid(s_rs);
    g.sig_M = sigmoid(s_m);
    g.sig_SL = sigmoid(s_sl);
    g.g_M = g.kappa_M * g.sig_M;
    g.g_SL = g.kappa_SL * g.sig_SL;
    g.g_SR = std::min(1.0, g.kappa_SR + g.kappa_M * sigmoid(-s_m) + g.kappa_SL * sigmoid(-s_sl));
    return g;
}

}  // namespace mcp
