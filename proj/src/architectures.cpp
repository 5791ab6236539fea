#include "mcp/architectures.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mcp/error.hpp"

namespace mcp {

namespace {

std::string_view soil_tag(SoilVariant v) {
    switch (v) {
        case SoilVariant::Basic: return "B";
        case SoilVariant::AugLoss: return "AL";
        case SoilVariant::MassRelax: return "MR";
    }
    return "B";
}

std::string_view snow_tag(SnowVariant v) {
    switch (v) {
        case SnowVariant::Basic: return "B";
        case SnowVariant::Generic: return "G";
        case SnowVariant::Complex: return "C";
    }
    return "B";
}

std::vector<std::string_view> split_dash(std::string_view s) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find('-', start);
        parts.push_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

void require_column(const std::vector<double>& column, std::size_t n, const char* name,
                    const ModelSpec& spec) {
    if (column.size() != n) {
        throw Error(ErrorKind::VariantMismatch,
                    spec.name() + " requires forcing column '" + name + "'");
    }
}

ColumnScale fit_column(const std::vector<double>& column, const Mask& window) {
    ColumnScale out;
    if (column.empty()) return out;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < column.size(); ++t) {
        if (!window.empty() && !window[t]) continue;
        sum += column[t];
        ++n;
    }
    if (n == 0) return out;
    out.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t t = 0; t < column.size(); ++t) {
        if (!window.empty() && !window[t]) continue;
        ss += (column[t] - out.mean) * (column[t] - out.mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    out.scale = sd > 0.0 ? sd : 1.0;
    return out;
}

SnowContext snow_context_at(const ForcingSeries& f, const InputScaling& sc, SnowVariant variant,
                            std::size_t t) {
    SnowContext c;
    c.tmean = sc.tmean.apply(f.tmean[t]);
    if (variant != SnowVariant::Basic) {
        c.vpd = sc.vpd.apply(f.vpd[t]);
        c.srad = sc.srad.apply(f.srad[t]);
    }
    if (variant == SnowVariant::Complex) {
        c.tmin = sc.tmin.apply(f.tmin[t]);
        c.tmax = sc.tmax.apply(f.tmax[t]);
    }
    return c;
}

}  // namespace

ModelSpec ModelSpec::hmcp1(SoilVariant variant, bool pet_constrained) {
    ModelSpec s;
    s.family = Family::HMCP1;
    s.soil_variant = variant;
    s.pet_constrained = pet_constrained;
    return s;
}

ModelSpec ModelSpec::snowmcp1(SnowVariant variant) {
    ModelSpec s;
    s.family = Family::SNOWMCP1;
    s.snow_variant = variant;
    return s;
}

ModelSpec ModelSpec::hydromcp2(SnowVariant variant, Coupling coupling, bool pet_constrained) {
    ModelSpec s;
    s.family = Family::HYDROMCP2;
    s.soil_variant = SoilVariant::Basic;
    s.snow_variant = variant;
    s.coupling = coupling;
    s.pet_constrained = pet_constrained;
    return s;
}

std::string ModelSpec::name() const {
    std::string out;
    switch (family) {
        case Family::HMCP1:
            out = "HMCP1-" + std::string(soil_tag(soil_variant.value_or(SoilVariant::Basic)));
            break;
        case Family::SNOWMCP1:
            out = "SNOWMCP1-" + std::string(snow_tag(snow_variant.value_or(SnowVariant::Basic)));
            break;
        case Family::HYDROMCP2:
            out = "HYDROMCP2-" + std::string(snow_tag(snow_variant.value_or(SnowVariant::Basic))) +
                  (coupling.value_or(Coupling::Parallel) == Coupling::Series ? "-S" : "-P");
            break;
    }
    if (pet_constrained) out += "-CON";
    return out;
}

ModelSpec ModelSpec::parse(std::string_view name) {
    auto parts = split_dash(name);
    auto fail = [&]() -> ModelSpec {
        throw Error(ErrorKind::ConfigError, "unknown model spec '" + std::string(name) + "'");
    };
    bool con = false;
    if (parts.size() >= 2 && parts.back() == "CON") {
        con = true;
        parts.pop_back();
    }
    auto parse_snow = [&](std::string_view tag) -> SnowVariant {
        if (tag == "B") return SnowVariant::Basic;
        if (tag == "G") return SnowVariant::Generic;
        if (tag == "C") return SnowVariant::Complex;
        fail();
        return SnowVariant::Basic;
    };

    ModelSpec spec;
    if (parts.size() == 2 && parts[0] == "HMCP1") {
        if (parts[1] == "B") spec = hmcp1(SoilVariant::Basic, con);
        else if (parts[1] == "AL") spec = hmcp1(SoilVariant::AugLoss, con);
        else if (parts[1] == "MR") spec = hmcp1(SoilVariant::MassRelax, con);
        else return fail();
    } else if (parts.size() == 2 && parts[0] == "SNOWMCP1" && !con) {
        spec = snowmcp1(parse_snow(parts[1]));
    } else if (parts.size() == 3 && parts[0] == "HYDROMCP2") {
        Coupling coupling;
        if (parts[2] == "S") coupling = Coupling::Series;
        else if (parts[2] == "P") coupling = Coupling::Parallel;
        else return fail();
        spec = hydromcp2(parse_snow(parts[1]), coupling, con);
    } else {
        return fail();
    }
    return spec;
}

void ModelSpec::validate() const {
    auto bad = [&](const char* why) {
        throw Error(ErrorKind::ConfigError, std::string("invalid model spec: ") + why);
    };
    switch (family) {
        case Family::HMCP1:
            if (!soil_variant || snow_variant || coupling) bad("HMCP1 takes a soil variant only");
            break;
        case Family::SNOWMCP1:
            if (soil_variant || !snow_variant || coupling || pet_constrained) {
                bad("SNOWMCP1 takes a snow variant only");
            }
            break;
        case Family::HYDROMCP2:
            if (soil_variant != SoilVariant::Basic || !snow_variant || !coupling) {
                bad("HYDROMCP2 couples a basic soil unit with a snow variant");
            }
            break;
    }
}

std::vector<ModelSpec> candidate_specs(Coupling coupling) {
    return {ModelSpec::hmcp1(SoilVariant::Basic),
            ModelSpec::hmcp1(SoilVariant::AugLoss),
            ModelSpec::hmcp1(SoilVariant::MassRelax),
            ModelSpec::snowmcp1(SnowVariant::Basic),
            ModelSpec::snowmcp1(SnowVariant::Generic),
            ModelSpec::snowmcp1(SnowVariant::Complex),
            ModelSpec::hydromcp2(SnowVariant::Basic, coupling),
            ModelSpec::hydromcp2(SnowVariant::Generic, coupling),
            ModelSpec::hydromcp2(SnowVariant::Complex, coupling)};
}

std::size_t param_count(const ModelSpec& spec) {
    spec.validate();
    std::size_t n = 0;
    if (spec.soil_variant) n += soil_param_count(*spec.soil_variant);
    if (spec.snow_variant) n += snow_param_count(*spec.snow_variant);
    return n;
}

std::vector<std::string> param_names(const ModelSpec& spec) {
    spec.validate();
    std::vector<std::string> names;
    if (spec.soil_variant) names = soil_param_names(*spec.soil_variant);
    if (spec.snow_variant) {
        auto snow = snow_param_names(*spec.snow_variant);
        names.insert(names.end(), snow.begin(), snow.end());
    }
    return names;
}

SlotRange soil_slots(const ModelSpec& spec) {
    if (!spec.soil_variant) return {};
    return {0, soil_param_count(*spec.soil_variant)};
}

SlotRange snow_slots(const ModelSpec& spec) {
    if (!spec.snow_variant) return {};
    const std::size_t begin = spec.soil_variant ? soil_param_count(*spec.soil_variant) : 0;
    return {begin, begin + snow_param_count(*spec.snow_variant)};
}

std::size_t ParameterVector::index_of(std::string_view name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        throw Error(ErrorKind::ConfigError, "no parameter slot named '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - names.begin());
}

ParameterVector ParameterVector::for_spec(const ModelSpec& spec, std::vector<double> values) {
    ParameterVector p;
    p.names = param_names(spec);
    if (values.size() != p.names.size()) {
        throw Error(ErrorKind::ConfigError, spec.name() + " expects " +
                                                std::to_string(p.names.size()) +
                                                " parameters, got " + std::to_string(values.size()));
    }
    p.values = std::move(values);
    return p;
}

ParameterVector ParameterVector::zeros(const ModelSpec& spec) {
    return for_spec(spec, std::vector<double>(param_count(spec), 0.0));
}

ParameterVector initialize_params(const ModelSpec& spec, std::uint64_t seed) {
    std::mt19937_64 engine(seed);
    std::vector<double> values(param_count(spec));
    for (auto& v : values) {
        // 53-bit mantissa draw; avoids implementation-defined distributions.
        const double unit = static_cast<double>(engine() >> 11) * 0x1.0p-53;
        v = 2.0 * unit - 1.0;
    }
    return ParameterVector::for_spec(spec, std::move(values));
}

InputScaling fit_scaling(const ForcingSeries& forcing, const Mask& window) {
    InputScaling s;
    s.pet = fit_column(forcing.pet, window);
    s.tmean = fit_column(forcing.tmean, window);
    s.tmin = fit_column(forcing.tmin, window);
    s.tmax = fit_column(forcing.tmax, window);
    s.vpd = fit_column(forcing.vpd, window);
    s.srad = fit_column(forcing.srad, window);
    const ColumnScale precip = fit_column(forcing.precip, window);
    s.flux_ref = precip.mean > 0.0 ? precip.mean : 1.0;
    return s;
}

SimulationOutput simulate(const ModelSpec& spec, const ParameterVector& params,
                          const ForcingSeries& forcing, const InputScaling& scaling,
                          const InitialState& initial, SimulationTape* tape) {
    spec.validate();
    const std::size_t n = forcing.size();
    if (params.size() != param_count(spec)) {
        throw Error(ErrorKind::ConfigError, spec.name() + " expects " +
                                                std::to_string(param_count(spec)) +
                                                " parameters, got " + std::to_string(params.size()));
    }
    require_column(forcing.precip, n, "precip", spec);

    const std::span<const double> all(params.values);
    std::optional<SoilGateParams> soil;
    std::optional<SnowGateParams> snow;
    if (spec.soil_variant) {
        const auto r = soil_slots(spec);
        soil = SoilGateParams::from_slots(*spec.soil_variant, all.subspan(r.begin, r.end - r.begin));
        require_column(forcing.pet, n, "pet", spec);
    }
    if (spec.snow_variant) {
        const auto r = snow_slots(spec);
        snow = SnowGateParams::from_slots(*spec.snow_variant, all.subspan(r.begin, r.end - r.begin));
        require_column(forcing.tmean, n, "tmean", spec);
        if (*spec.snow_variant != SnowVariant::Basic) {
            require_column(forcing.vpd, n, "vpd", spec);
            require_column(forcing.srad, n, "srad", spec);
        }
        if (*spec.snow_variant == SnowVariant::Complex) {
            require_column(forcing.tmin, n, "tmin", spec);
            require_column(forcing.tmax, n, "tmax", spec);
        }
    }

    const SoilOptions soil_options{spec.pet_constrained, scaling.flux_ref};

    SimulationOutput out;
    out.q_sim.resize(n);
    auto& fx = out.fluxes;
    if (soil) {
        out.soil_state.resize(n);
        for (auto* v : {&fx.soil_input, &fx.soil_outflow, &fx.soil_loss, &fx.mass_relax, &fx.g_O,
                        &fx.g_L, &fx.g_R}) {
            v->resize(n);
        }
    }
    if (snow) {
        out.snow_state.resize(n);
        for (auto* v : {&fx.snowfall, &fx.rainfall, &fx.melt, &fx.snow_loss, &fx.g_RS, &fx.g_M,
                        &fx.g_SL, &fx.g_SR}) {
            v->resize(n);
        }
    }
    if (tape) {
        tape->soil.assign(soil ? n : 0, {});
        tape->soil_inputs.assign(soil ? n : 0, {});
        tape->snow.assign(snow ? n : 0, {});
        tape->snow_context.assign(snow ? n : 0, {});
    }

    double x = initial.soil;
    double swe = initial.snow;
    for (std::size_t t = 0; t < n; ++t) {
        const double precip = forcing.precip[t];
        SnowStepResult sr;
        if (snow) {
            const SnowContext ctx = snow_context_at(forcing, scaling, *spec.snow_variant, t);
            SnowStepTrace local;
            SnowStepTrace* tr = tape ? &tape->snow[t] : &local;
            sr = snow_step(*snow, swe, precip, ctx, tr);
            if (tape) tape->snow_context[t] = ctx;
            const SnowGates& g = tr->gates;
            fx.snowfall[t] = sr.snowfall;
            fx.rainfall[t] = sr.rainfall;
            fx.melt[t] = sr.melt;
            fx.snow_loss[t] = sr.loss;
            fx.g_RS[t] = g.g_RS;
            fx.g_M[t] = g.g_M;
            fx.g_SL[t] = g.g_SL;
            fx.g_SR[t] = g.g_SR;
            swe = sr.swe_next;
            out.snow_state[t] = swe;
            if (!std::isfinite(swe) || !std::isfinite(sr.melt)) {
                throw Error(ErrorKind::NumericalDivergence,
                            "non-finite snow state at timestep " + std::to_string(t), t);
            }
        }

        SoilStepResult xr;
        if (soil) {
            SoilInputs in;
            switch (spec.family) {
                case Family::HMCP1: in.u = precip; break;
                case Family::HYDROMCP2:
                    in.u = *spec.coupling == Coupling::Series ? sr.melt + sr.rainfall : sr.rainfall;
                    break;
                case Family::SNOWMCP1: break;
            }
            in.pet = forcing.pet[t];
            in.pet_std = scaling.pet.apply(in.pet);
            SoilStepTrace local;
            SoilStepTrace* tr = tape ? &tape->soil[t] : &local;
            xr = soil_step(*soil, x, in, soil_options, tr);
            if (tape) tape->soil_inputs[t] = in;
            fx.soil_input[t] = in.u;
            fx.soil_outflow[t] = xr.outflow;
            fx.soil_loss[t] = xr.loss;
            fx.mass_relax[t] = xr.mr_flux;
            fx.g_O[t] = tr->gates.g_O;
            fx.g_L[t] = tr->gates.g_L;
            fx.g_R[t] = tr->gates.g_R;
            x = xr.x_next;
            out.soil_state[t] = x;
            if (!std::isfinite(x) || !std::isfinite(xr.outflow)) {
                throw Error(ErrorKind::NumericalDivergence,
                            "non-finite soil state at timestep " + std::to_string(t), t);
            }
        }

        switch (spec.family) {
            case Family::HMCP1: out.q_sim[t] = xr.outflow; break;
            case Family::SNOWMCP1: out.q_sim[t] = sr.melt + sr.rainfall; break;
            case Family::HYDROMCP2:
                out.q_sim[t] =
                    *spec.coupling == Coupling::Series ? xr.outflow : xr.outflow + sr.melt;
                break;
        }
    }
    if (snow) out.swe_sim = out.snow_state;
    return out;
}

std::vector<double> backpropagate(const ModelSpec& spec, const ParameterVector& params,
                                  const InputScaling& scaling, const SimulationTape& tape,
                                  std::span<const double> q_bar, std::span<const double> swe_bar) {
    const std::size_t n = spec.has_soil() ? tape.soil.size() : tape.snow.size();
    const std::span<const double> all(params.values);

    std::optional<SoilGateParams> soil, soil_grad;
    std::optional<SnowGateParams> snow, snow_grad;
    if (spec.soil_variant) {
        const auto r = soil_slots(spec);
        soil = SoilGateParams::from_slots(*spec.soil_variant, all.subspan(r.begin, r.end - r.begin));
        soil_grad = SoilGateParams::zeros(*spec.soil_variant);
    }
    if (spec.snow_variant) {
        const auto r = snow_slots(spec);
        snow = SnowGateParams::from_slots(*spec.snow_variant, all.subspan(r.begin, r.end - r.begin));
        snow_grad = SnowGateParams::zeros(*spec.snow_variant);
    }
    const SoilOptions soil_options{spec.pet_constrained, scaling.flux_ref};
    const bool series = spec.coupling == Coupling::Series;

    double x_carry = 0.0;
    double swe_carry = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        const double qb = q_bar.empty() ? 0.0 : q_bar[k];

        double input_bar = 0.0;
        if (soil) {
            SoilStepAdjoint adj;
            adj.x_next = x_carry;
            adj.outflow = qb;
            const auto in_bar = soil_step_backward(*soil, tape.soil[k], tape.soil_inputs[k],
                                                   soil_options, adj, *soil_grad);
            x_carry = in_bar.x;
            input_bar = in_bar.u;
        }
        if (snow) {
            SnowStepAdjoint adj;
            adj.swe_next = swe_carry + (swe_bar.empty() ? 0.0 : swe_bar[k]);
            switch (spec.family) {
                case Family::SNOWMCP1:
                    adj.melt = qb;
                    adj.rainfall = qb;
                    break;
                case Family::HYDROMCP2:
                    adj.melt = series ? input_bar : qb;
                    adj.rainfall = input_bar;
                    break;
                case Family::HMCP1: break;
            }
            swe_carry = snow_step_backward(*snow, tape.snow[k], tape.snow[k].u,
                                           tape.snow_context[k], adj, *snow_grad);
        }
    }

    std::vector<double> grad(params.size(), 0.0);
    if (soil_grad) {
        const auto r = soil_slots(spec);
        soil_grad->to_slots(std::span<double>(grad).subspan(r.begin, r.end - r.begin));
    }
    if (snow_grad) {
        const auto r = snow_slots(spec);
        snow_grad->to_slots(std::span<double>(grad).subspan(r.begin, r.end - r.begin));
    }
    return grad;
}

}  // namespace mcp
