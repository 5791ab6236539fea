#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "mcp/error.hpp"
#include "mcp/evaluation.hpp"

using namespace mcp;
using std::numbers::pi;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::InvalidData;
}

std::vector<double> ramp(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + std::sin(0.3 * double(i)) + 0.01 * double(i);
    return v;
}

Mask full(std::size_t n) { return Mask(n, true); }

// Reference log densities written out directly.
double ref_log_density(PdfFamily f, double z) {
    switch (f) {
        case PdfFamily::Gaussian: return -z * z / 2 - 0.5 * std::log(2 * pi);
        case PdfFamily::Laplace: return -std::abs(z) - std::log(2.0);
        case PdfFamily::Logistic: return -std::abs(z) - 2 * std::log(1 + std::exp(-std::abs(z)));
        case PdfFamily::Cauchy: return -std::log(pi * (1 + z * z));
        case PdfFamily::Gumbel: return -(z + std::exp(-z));
        case PdfFamily::StudentT4: return std::log(3.0 / 8.0) - 2.5 * std::log(1 + z * z / 4);
    }
    return 0;
}

double ref_ll(PdfFamily f, const std::vector<double>& r, double loc, double scale) {
    double ll = 0;
    for (double x : r) ll += ref_log_density(f, (x - loc) / scale) - std::log(scale);
    return ll;
}

Date ymd(int y, unsigned m, unsigned d) {
    return Date{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

std::vector<Date> days(Date start, std::size_t n) {
    std::vector<Date> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = start + std::chrono::days{i};
    return v;
}

}  // namespace

TEST_CASE("analytic KGE cases") {
    const auto obs = ramp(50);
    const auto idx = fixtures::all_indices(50);
    const auto same = kge_breakdown(obs, obs, idx);
    CHECK(std::abs(same.kge - 1.0) <= 1e-12);
    CHECK(std::abs(same.kge_ss - 1.0) <= 1e-12);
    CHECK(std::abs(same.r - 1.0) <= 1e-12);

    std::vector<double> twice(obs);
    for (auto& x : twice) x *= 2.0;
    const auto k2 = kge_breakdown(twice, obs, idx);
    CHECK(std::abs(k2.alpha - 2.0) <= 1e-12);
    CHECK(std::abs(k2.beta - 2.0) <= 1e-12);
    CHECK(std::abs(k2.kge - (1.0 - std::sqrt(2.0))) <= 1e-12);
    CHECK(std::abs(k2.kge_ss) <= 1e-12);
    CHECK(k2.alpha_star == 0.0);

    CHECK(std::abs(kge_skill_score(0.0) - (1.0 - 1.0 / std::sqrt(2.0))) <= 1e-12);
    CHECK(kge_from_components(1.0, 0.93, 1.0).alpha_star == doctest::Approx(0.93).epsilon(1e-15));
}

TEST_CASE("KGE agrees with a two-pass oracle") {
    std::mt19937_64 rng(4);
    std::lognormal_distribution<double> d(0.0, 0.8);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + rng() % 400;
        std::vector<double> s(n), o(n);
        for (auto& x : s) x = d(rng);
        for (auto& x : o) x = d(rng);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i)
            if (rng() % 3) idx.push_back(i);
        if (idx.size() < 2) continue;
        const auto k = kge_breakdown(s, o, idx);
        const auto ref = fixtures::kge_oracle(s, o, idx);
        REQUIRE(k.r == doctest::Approx(ref.r).epsilon(1e-11));
        REQUIRE(k.alpha == doctest::Approx(ref.alpha).epsilon(1e-11));
        REQUIRE(k.beta == doctest::Approx(ref.beta).epsilon(1e-11));
        REQUIRE(k.kge == doctest::Approx(ref.kge).epsilon(1e-11));
    }
}

TEST_CASE("KGE on masks and missing observations") {
    const auto sim = ramp(20);
    Observed obs(20);
    for (std::size_t i = 0; i < 20; ++i) obs[i] = sim[i] * 1.1 + 0.2 * double(i % 3);
    obs[4].reset();
    Mask m(20, true);
    m[7] = false;
    const auto idx = observed_indices(obs, m);
    CHECK(idx.size() == 18);
    std::vector<double> dense(20, 0.0);
    for (std::size_t i = 0; i < 20; ++i) dense[i] = obs[i].value_or(0.0);
    CHECK(kge_breakdown(sim, obs, m).kge == doctest::Approx(fixtures::kge_oracle(sim, dense, idx).kge).epsilon(1e-12));
    CHECK(kind_of([&] { kge_breakdown(sim, obs, Mask(20, false)); }) == ErrorKind::EmptyMask);
    const std::vector<double> flat(20, 1.0);
    CHECK(kind_of([&] { kge_breakdown(flat, obs, m); }) == ErrorKind::DegenerateSeries);
}

TEST_CASE("Gaussian likelihood of two residuals") {
    const std::vector<double> r{1.0, -1.0};
    const auto fit = fit_residual_likelihood(r, PdfFamily::Gaussian);
    CHECK(fit.location == 0.0);
    CHECK(fit.scale == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(fit.log_likelihood + (std::log(2 * pi) + 1.0)) <= 1e-9);
    CHECK(fit.log_likelihood == doctest::Approx(-2.8379).epsilon(1e-4));
}

TEST_CASE("hand-computed Gaussian log-likelihoods") {
    const std::vector<double> r{0.5, -0.25, 1.5, 0.0, -2.0};
    for (double s : {0.3, 1.0, 2.7}) {
        for (double mu : {-0.4, 0.0, 0.9}) {
            double ll = 0;
            for (double x : r) ll += -0.5 * std::log(2 * pi * s * s) - (x - mu) * (x - mu) / (2 * s * s);
            CHECK(std::abs(log_likelihood(PdfFamily::Gaussian, r, mu, s) - ll) <= 1e-9);
        }
    }
}

TEST_CASE("zero residuals hit the scale floor") {
    const std::vector<double> r(30, 0.0);
    for (auto f : default_pdf_families()) {
        const auto fit = fit_residual_likelihood(r, f);
        CHECK(fit.scale == doctest::Approx(kScaleFloor).epsilon(1e-6));
        CHECK(std::isfinite(fit.log_likelihood));
    }
}

TEST_CASE("likelihood fits reach the grid optimum") {
    std::mt19937_64 rng(22);
    std::student_t_distribution<double> t(3.0);
    std::vector<double> r(300);
    for (auto& x : r) x = 0.4 + 1.7 * t(rng);
    for (auto f : default_pdf_families()) {
        for (double loc : {-0.3, 0.4, 1.0}) {
            for (double sc : {0.5, 1.3, 2.9}) {
                REQUIRE(log_likelihood(f, r, loc, sc) == doctest::Approx(ref_ll(f, r, loc, sc)).epsilon(1e-10));
            }
        }
        double best = -1e300;
        for (int i = 0; i <= 120; ++i) {
            for (int j = 0; j <= 120; ++j) {
                const double loc = -2.0 + 5.0 * i / 120.0;
                const double sc = std::exp(-2.0 + 4.0 * j / 120.0);
                best = std::max(best, ref_ll(f, r, loc, sc));
            }
        }
        const auto fit = fit_residual_likelihood(r, f);
        INFO(to_string(f));
        CHECK(fit.log_likelihood >= best - 1e-6);
        CHECK(fit.log_likelihood == doctest::Approx(ref_ll(f, r, fit.location, fit.scale)).epsilon(1e-10));
    }
    const auto b = best_residual_likelihood(r, default_pdf_families());
    for (auto f : default_pdf_families()) CHECK(b.log_likelihood >= fit_residual_likelihood(r, f).log_likelihood);
}

TEST_CASE("AIC arithmetic") {
    CHECK(aic(-100.0, 10) - aic(-100.0, 7) == 6.0);
    CHECK(aic(-96.0, 10) - aic(-100.0, 7) == -2.0);
    CHECK(aic(0.0, 0) == 0.0);
}

TEST_CASE("equal residuals select the smaller model") {
    const auto obs_v = ramp(200);
    Observed obs(obs_v.begin(), obs_v.end());
    std::vector<double> sim(obs_v);
    for (std::size_t i = 0; i < sim.size(); ++i) sim[i] += 0.1 * std::cos(double(i));
    const std::vector<SelectionCandidate> c{{"big", 18, sim, "ok"}, {"small", 7, sim, "ok"}};
    const auto rep = select_architecture(c, obs, full(200));
    CHECK(rep.winner_by_aic == 1);
    CHECK(rep.winner_by_kge == 1);
    CHECK(rep.candidates[0].k == 20);
    CHECK(rep.candidates[1].k == 9);
    CHECK(rep.candidates[0].aic - rep.candidates[1].aic == 22.0);
    CHECK(rep.candidates[0].fit.log_likelihood == rep.candidates[1].fit.log_likelihood);

    const auto one = select_architecture({{"only", 7, sim, "ok"}}, obs, full(200));
    CHECK(one.winner_by_aic == 0);
    CHECK(one.winner_by_kge == 0);

    const std::vector<SelectionCandidate> bad{{"a", 7, {}, "diverged"}, {"b", 8, {}, "failed"}};
    CHECK(kind_of([&] { select_architecture(bad, obs, full(200)); }) == ErrorKind::NoValidCandidate);
    const auto mixed = select_architecture({bad[0], {"ok", 10, sim, "ok"}}, obs, full(200));
    CHECK(mixed.winner_by_aic == 1);
    CHECK_FALSE(mixed.candidates[0].valid);
}

TEST_CASE("snow, forest and climate classes") {
    CHECK(classify_snowy(10.0, 0.2) == SnowClass::Snowy);
    CHECK(classify_snowy(2.0, 0.5) == SnowClass::NonSnowy);
    CHECK(classify_snowy(3.0, 0.06) == SnowClass::NonSnowy);
    CHECK(classify_forest(0.7) == ForestClass::Forest);
    CHECK(classify_forest(0.5) == ForestClass::Open);
    CHECK(classify_forest(0.0) == ForestClass::Open);
    CHECK(weighted_climate("Dfb", "Dfb", 1, 9) == "Dfb");
    CHECK(weighted_climate("Dfb", "Cfa", 3000, 6862) == "Cfa");
    CHECK(weighted_climate("Dfb", "Cfa", 5000, 5000) == "Cfa");
    CHECK(weighted_climate("Dfb", "Cfa", 7000, 2862) == "Dfb");
    CHECK(climate_main_class("Dfb") == "Cold");
    CHECK(climate_main_class("BSk") == "Arid");
    CHECK(climate_main_class("Cfa") == "Temperate");
}

TEST_CASE("snow signatures") {
    const auto d = days(ymd(2000, 10, 1), 730);
    const std::vector<double> zero(730, 0.0);
    const auto z = snow_signatures(zero, d);
    CHECK(z.water_years == 2);
    CHECK(z.median_annual_max == 0.0);
    CHECK(z.median_snowy_days == 0.0);
    CHECK_FALSE(z.median_first_day.has_value());
    CHECK_FALSE(z.median_last_day.has_value());

    // Triangular pulse peaking at 100 mm on April 1 of the first year.
    std::vector<double> tri(730, 0.0);
    const auto peak = static_cast<std::size_t>((ymd(2001, 4, 1) - ymd(2000, 10, 1)).count());
    for (std::size_t k = 0; k < 50; ++k) {
        tri[peak - k] = 100.0 * (1.0 - double(k) / 50.0);
        tri[peak + k] = 100.0 * (1.0 - double(k) / 50.0);
    }
    const auto one = snow_signatures(std::vector<double>(tri.begin(), tri.begin() + 365),
                                     std::vector<Date>(d.begin(), d.begin() + 365));
    CHECK(one.median_annual_max == 100.0);
    CHECK(one.median_april1 == 100.0);
    CHECK(one.median_snowy_days == 99.0);
    CHECK(*one.median_first_day == double(peak - 49 + 1));
    CHECK(*one.median_season_length == 99.0);

    std::vector<double> two(730, 0.0);
    two[100] = 50.0;
    two[500] = 150.0;
    CHECK(snow_signatures(two, d).median_annual_max == 100.0);

    CHECK(kind_of([&] {
              snow_signatures(std::vector<double>(100, 1.0), days(ymd(2000, 10, 1), 100));
          }) == ErrorKind::InsufficientData);
}

TEST_CASE("percentiles and summary") {
    std::vector<double> v(100);
    for (std::size_t i = 0; i < 100; ++i) v[i] = double(i + 1);
    CHECK(percentile(v, 50) == 50.5);
    CHECK(percentile(v, 0) == 1.0);
    CHECK(percentile(v, 100) == 100.0);
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(kind_of([] { percentile({}, 50); }) == ErrorKind::InsufficientData);

    SummaryInput s{"c1", "HMCP1-B", 0.42, {"East", "AM"}, SnowClass::NonSnowy, ForestClass::Forest, "Cfa"};
    const auto rows = aggregate_summary({s});
    REQUIRE(rows.size() == 5 + summary_groups().size());
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(rows[i].group == "All");
        CHECK(*rows[i].value == 0.42);
    }
    for (std::size_t i = 5; i < rows.size(); ++i) {
        const auto& g = rows[i].group;
        const bool member = g == "East" || g == "AM" || g == "NonSnowy" || g == "Forest" || g == "Temperate";
        CHECK(rows[i].count == (member ? 1u : 0u));
        CHECK(rows[i].value.has_value() == member);
    }
}
