#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "mcp/units.hpp"

using namespace mcp;
using fixtures::logit;

namespace {

std::vector<double> draw(std::mt19937_64& rng, std::size_t n, double w) {
    std::uniform_real_distribution<double> u(-w, w);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST_CASE("hand-computed soil step") {
    auto p = SoilGateParams::zeros(SoilVariant::Basic);
    p.a_O = logit(0.6);  // kappa = 1/3 each, so g_O = 0.2
    p.a_L = logit(0.3);  // g_L = 0.1
    const auto r = soil_step(p, 10.0, {3.0, 0.0, 0.0}, {});
    CHECK(r.outflow == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(r.loss == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.x_next == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(r.mr_flux == 0.0);
}

TEST_CASE("without input the store contracts") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 1000; ++i) {
        const auto v = i % 2 ? SoilVariant::Basic : SoilVariant::AugLoss;
        const auto p = SoilGateParams::from_slots(v, draw(rng, soil_param_count(v), 5.0));
        const double x = 1000.0 * std::abs(draw(rng, 1, 1.0)[0]);
        const auto r = soil_step(p, x, {0.0, 1.0, 0.3}, {});
        CHECK(r.x_next <= x);
        CHECK(r.x_next == doctest::Approx(soil_gates(p, x, 0.3).g_R * x).epsilon(1e-14));
    }
}

TEST_CASE("soil step balances mass for random inputs") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> ux(0.0, 2000.0), uu(0.0, 80.0), up(0.0, 8.0);
    for (int i = 0; i < 20000; ++i) {
        const auto v = static_cast<SoilVariant>(i % 3);
        const auto p = SoilGateParams::from_slots(v, draw(rng, soil_param_count(v), 4.0));
        SoilInputs in{uu(rng), up(rng), (up(rng) - 4.0) / 2.0};
        SoilOptions opt;
        opt.pet_constrained = i % 4 == 0;
        opt.flux_ref = 2.5;
        const double x = ux(rng);
        const auto r = soil_step(p, x, in, opt);
        const double balance = x + in.u + r.mr_flux - r.outflow - r.loss - r.x_next;
        REQUIRE(std::abs(balance) <= 1e-12 * (x + in.u + std::abs(r.mr_flux) + 1.0));
        REQUIRE(r.x_next >= 0.0);
        REQUIRE(r.outflow >= 0.0);
        REQUIRE(r.loss >= 0.0);
    }
}

TEST_CASE("mass relaxation outflow is limited to what the store holds") {
    auto p = SoilGateParams::zeros(SoilVariant::MassRelax);
    p.mr = MassRelaxParams{20.0, 5.0, -1.0};  // strong outflow at any state
    SoilOptions opt;
    opt.flux_ref = 50.0;
    SoilStepTrace tr;
    const auto r = soil_step(p, 4.0, {1.0, 0.0, 0.0}, opt, &tr);
    CHECK(tr.clamped);
    CHECK(r.x_next == 0.0);
    CHECK(r.mr_flux == doctest::Approx(-(soil_gates(p, 4.0, 0.0).g_R * 4.0 + 1.0)).epsilon(1e-14));
}

TEST_CASE("mass relaxation gains water below its threshold") {
    auto p = SoilGateParams::zeros(SoilVariant::MassRelax);
    p.mr = MassRelaxParams{0.0, 0.0, 0.5};
    SoilOptions opt;
    opt.flux_ref = 2.0;
    const auto r = soil_step(p, 100.0, {0.0, 0.0, 0.0}, opt);
    const double expect = -0.5 * std::tanh(0.1 - 0.5) * 2.0;
    CHECK(r.mr_flux == doctest::Approx(expect).epsilon(1e-14));
    CHECK(r.mr_flux > 0.0);
}

TEST_CASE("PET cap limits evaporation to the demand") {
    auto p = SoilGateParams::zeros(SoilVariant::Basic);
    p.a_L = 10.0;  // g_L close to 1/3
    SoilOptions opt;
    opt.pet_constrained = true;
    SoilStepTrace tr;
    const auto r = soil_step(p, 30.0, {0.0, 2.0, 0.0}, opt, &tr);
    CHECK(tr.loss_capped);
    CHECK(r.loss == 2.0);
    CHECK(r.x_next == doctest::Approx(30.0 - r.outflow - 2.0).epsilon(1e-14));
    const auto free = soil_step(p, 30.0, {0.0, 2.0, 0.0}, {});
    CHECK(free.loss > 2.0);
}

TEST_CASE("empty snowpack") {
    const auto p = SnowGateParams::zeros(SnowVariant::Basic);
    SnowContext c;
    c.tmean = -1.0;
    const auto r = snow_step(p, 0.0, 8.0, c);
    CHECK(r.melt == 0.0);
    CHECK(r.loss == 0.0);
    CHECK(r.swe_next == r.snowfall);
    CHECK(r.snowfall == 4.0);
    CHECK(r.rainfall == 4.0);
}

TEST_CASE("warm limit passes precipitation through as rain") {
    auto p = SnowGateParams::zeros(SnowVariant::Basic);
    p.a_RS = -1e6;
    SnowContext c;
    c.tmean = 1.0;
    const double swe = 50.0;
    const auto r = snow_step(p, swe, 12.0, c);
    CHECK(r.rainfall == 12.0);
    CHECK(r.snowfall == 0.0);
    CHECK(r.swe_next == doctest::Approx(2.0 / 3.0 * swe).epsilon(1e-14));
}

TEST_CASE("snow step balances mass") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> us(0.0, 1500.0), uu(0.0, 60.0), uc(-3.0, 3.0);
    for (int i = 0; i < 20000; ++i) {
        const auto v = static_cast<SnowVariant>(i % 3);
        const auto p = SnowGateParams::from_slots(v, draw(rng, snow_param_count(v), 4.0));
        SnowContext c;
        c.tmean = uc(rng);
        c.vpd = uc(rng);
        c.srad = uc(rng);
        c.tmin = uc(rng);
        c.tmax = uc(rng);
        const double s = us(rng), u = uu(rng);
        const auto r = snow_step(p, s, u, c);
        const double balance = s + u - r.melt - r.loss - r.rainfall - r.swe_next;
        REQUIRE(std::abs(balance) <= 1e-12 * (s + u + 1.0));
        REQUIRE(r.swe_next >= 0.0);
    }
}
