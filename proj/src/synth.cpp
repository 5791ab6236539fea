#include "mcp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mcp/error.hpp"
#include "mcp/training.hpp"

namespace mcp {

void SynthSpec::validate() const {
    spec.validate();
    if (length == 0) throw Error(ErrorKind::ConfigError, "synthetic length must be >= 1");
    if (!(noise_sigma >= 0.0)) throw Error(ErrorKind::ConfigError, "noise sigma must be >= 0");
    if (params && params->size() != param_count(spec)) {
        throw Error(ErrorKind::ConfigError,
                    spec.name() + " takes " + std::to_string(param_count(spec)) +
                        " parameters, got " + std::to_string(params->size()));
    }
}

ForcingSeries generate_forcing(const ForcingGenerator& gen, std::size_t length,
                               std::uint64_t seed) {
    using namespace std::chrono;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> depth(1.0 / gen.mean_wet_depth);
    std::normal_distribution<double> normal(0.0, 1.0);
    constexpr double two_pi = 2.0 * std::numbers::pi;

    ForcingSeries f;
    f.dates.reserve(length);
    for (auto c : {&f.precip, &f.pet, &f.tmean, &f.tmin, &f.tmax, &f.vpd, &f.srad}) {
        c->reserve(length);
    }
    bool wet = false;
    for (std::size_t t = 0; t < length; ++t) {
        const Date d = gen.start + days{static_cast<long>(t)};
        const auto ymd = year_month_day{d};
        const double doy = static_cast<double>((d - sys_days{ymd.year() / January / 1}).count());
        const double phase = two_pi * doy / 365.25;

        const double winter = 1.0 + gen.precip_seasonality * std::cos(phase);
        const double p_wet =
            std::clamp((wet ? gen.wet_persistence : gen.wet_probability) * winter, 0.0, 1.0);
        wet = unit(rng) < p_wet;
        const double p = wet ? depth(rng) : 0.0;

        const double tmean = gen.temp_mean - gen.temp_amplitude * std::cos(phase - 0.26) +
                             gen.temp_noise * normal(rng);
        const double half = 0.5 * gen.diurnal_range * (0.6 + 0.8 * unit(rng));
        const double pet =
            std::max(0.0, gen.pet_mean - gen.pet_amplitude * std::cos(phase - 0.26) +
                              0.3 * normal(rng));

        f.dates.push_back(d);
        f.precip.push_back(p);
        f.pet.push_back(pet);
        f.tmean.push_back(tmean);
        f.tmin.push_back(tmean - half);
        f.tmax.push_back(tmean + half);
        f.vpd.push_back(std::max(50.0, 600.0 + 45.0 * tmean + 80.0 * normal(rng)));
        f.srad.push_back(std::max(10.0, 190.0 - 110.0 * std::cos(phase - 0.2) +
                                            25.0 * normal(rng) - (wet ? 40.0 : 0.0)));
    }
    return f;
}

SynthResult synthesize(const SynthSpec& s) {
    s.validate();
    SynthResult out;
    out.record.attributes.id = s.catchment_id;
    out.record.forcing = generate_forcing(s.forcing, s.length, derive_seed(s.seed, "forcing"));
    out.params = s.params ? ParameterVector::for_spec(s.spec, *s.params)
                          : initialize_params(s.spec, derive_seed(s.seed, "params"));
    out.scaling = fit_scaling(out.record.forcing);
    out.truth = simulate(s.spec, out.params, out.record.forcing, out.scaling);

    std::mt19937_64 rng(derive_seed(s.seed, "noise"));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto perturb = [&](const std::vector<double>& clean) {
        Observed obs;
        obs.reserve(clean.size());
        for (double v : clean) {
            obs.emplace_back(s.noise_sigma > 0.0 ? v * std::exp(s.noise_sigma * normal(rng)) : v);
        }
        return obs;
    };
    out.record.targets.streamflow = perturb(out.truth.q_sim);
    if (s.spec.has_snow()) out.record.targets.swe = perturb(out.truth.swe_sim);
    return out;
}

}  // namespace mcp
