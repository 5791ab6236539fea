#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "fixtures.hpp"
#include "mcp/data_model.hpp"
#include "mcp/error.hpp"

using namespace mcp;
using L = SplitLabel;

namespace {

// Reference splitter written from the algorithm description, independent of
// the library implementation.
std::vector<L> split_oracle(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    const L cycle[4] = {L::Train, L::Test, L::Select, L::Train};
    std::vector<L> labels(n, L::Missing);
    std::size_t lo = 0, hi = n;
    for (std::size_t k = 0; lo < hi; ++k) {
        const L l = cycle[k % 4];
        labels[order[lo++]] = l;
        if (lo < hi) labels[order[--hi]] = l;
    }
    return labels;
}

Date ymd(int y, unsigned m, unsigned d) {
    return Date{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

CatchmentRecord daily_record(Date start, std::size_t n) {
    CatchmentRecord r;
    r.forcing = fixtures::forcing(n);
    for (std::size_t i = 0; i < n; ++i) r.forcing.dates[i] = start + std::chrono::days{i};
    for (std::size_t i = 0; i < n; ++i) r.targets.streamflow.emplace_back(1.0 + double(i % 17));
    return r;
}

}  // namespace

TEST_CASE("hand-traced four element split") {
    const std::vector<double> v{5, 1, 9, 3};
    const auto s = split_timesteps(std::span<const double>(v));
    CHECK(s.labels == std::vector<L>{L::Test, L::Train, L::Train, L::Test});
    CHECK(subset_mask(s, L::Train) == Mask{false, true, true, false});
}

TEST_CASE("single element goes to train") {
    const std::vector<double> v{4.2};
    CHECK(split_timesteps(std::span<const double>(v)).labels == std::vector<L>{L::Train});
}

TEST_CASE("record length 9862 splits 4930/2466/2466") {
    std::mt19937_64 rng(11);
    std::lognormal_distribution<double> d(0.0, 1.0);
    std::vector<double> v(9862);
    for (auto& x : v) x = d(rng);
    const auto s = split_timesteps(std::span<const double>(v));
    CHECK(s.count(L::Train) == 4930);
    CHECK(s.count(L::Select) == 2466);
    CHECK(s.count(L::Test) == 2466);
}

TEST_CASE("splitter agrees with the reference on random series with ties") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 301;
        std::vector<double> v(n);
        for (auto& x : v) x = static_cast<double>(rng() % 12);  // many ties
        const auto s = split_timesteps(std::span<const double>(v));
        REQUIRE(s.labels == split_oracle(v));
    }
}

TEST_CASE("counts are exact for lengths divisible by eight") {
    for (std::size_t n : {8u, 64u, 800u, 4096u}) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = std::sin(double(i)) + 2.0;
        const auto s = split_timesteps(std::span<const double>(v));
        CHECK(s.count(L::Train) == n / 2);
        CHECK(s.count(L::Select) == n / 4);
        CHECK(s.count(L::Test) == n / 4);
    }
}

TEST_CASE("subset means stay within 5 percent of a standard deviation") {
    std::mt19937_64 rng(17);
    std::lognormal_distribution<double> d(0.5, 1.2);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 100 + rng() % 4000;
        std::vector<double> v(n);
        for (auto& x : v) x = d(rng);
        const auto s = split_timesteps(std::span<const double>(v));
        double mean = 0, var = 0;
        for (double x : v) mean += x;
        mean /= double(n);
        for (double x : v) var += (x - mean) * (x - mean);
        const double sd = std::sqrt(var / double(n));
        for (auto l : {L::Train, L::Select, L::Test}) {
            double m = 0;
            std::size_t c = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (s.labels[i] == l) {
                    m += v[i];
                    ++c;
                }
            }
            CHECK(std::abs(m / double(c) - mean) <= 0.05 * sd);
        }
    }
}

TEST_CASE("missing values are labelled and excluded from pairing") {
    Observed obs{5.0, std::nullopt, 1.0, 9.0, std::nullopt, 3.0};
    const auto s = split_timesteps(obs);
    CHECK(s.labels == std::vector<L>{L::Test, L::Missing, L::Train, L::Train, L::Missing, L::Test});
}

TEST_CASE("non-finite values are rejected") {
    const std::vector<double> v{1.0, std::nan(""), 2.0};
    CHECK_THROWS_AS(split_timesteps(std::span<const double>(v)), Error);
    try {
        split_timesteps(std::span<const double>(v));
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidData);
    }
}

TEST_CASE("split is deterministic") {
    std::vector<double> v(500);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = double((i * 37) % 23);
    CHECK(split_timesteps(std::span<const double>(v)).labels ==
          split_timesteps(std::span<const double>(v)).labels);
}

TEST_CASE("spin-up of the paper-length record gives 10957 timesteps") {
    const auto rec = daily_record(ymd(1981, 10, 1), 9862);
    const auto spun = build_spinup(rec, 3);
    CHECK(spun.spinup_length == 1095);
    CHECK(spun.record.size() == 10957);
    const auto prepared = prepare_record(rec, 3);
    CHECK(prepared.split.size() == 10957);
    CHECK(prepared.split.count(L::SpinUp) == 1095);
    CHECK(prepared.split.count(L::Train) == 4930);
    CHECK(prepared.split.count(L::Select) == 2466);
    CHECK(prepared.split.count(L::Test) == 2466);
}

TEST_CASE("spin-up copies the first water year and keeps the calendar contiguous") {
    const auto rec = daily_record(ymd(2000, 9, 29), 40);
    const auto spun = build_spinup(rec, 3);
    CHECK(spun.spinup_length == 6);
    REQUIRE(spun.record.size() == 46);
    for (std::size_t i = 1; i < spun.record.size(); ++i) {
        CHECK(spun.record.forcing.dates[i] - spun.record.forcing.dates[i - 1] ==
              std::chrono::days{1});
    }
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t t = 0; t < 2; ++t) {
            CHECK(spun.record.forcing.precip[r * 2 + t] == rec.forcing.precip[t]);
            CHECK(spun.record.targets.streamflow[r * 2 + t] == rec.targets.streamflow[t]);
        }
    }
    CHECK(spun.record.forcing.dates[6] == rec.forcing.dates[0]);
}

TEST_CASE("zero repeats leave the record unchanged") {
    const auto rec = daily_record(ymd(2000, 10, 1), 400);
    const auto spun = build_spinup(rec, 0);
    CHECK(spun.spinup_length == 0);
    CHECK(spun.record.forcing.dates == rec.forcing.dates);
    CHECK(spun.record.forcing.precip == rec.forcing.precip);
}

TEST_CASE("a record shorter than its first water year is insufficient") {
    const auto rec = daily_record(ymd(2000, 10, 1), 200);
    CHECK_THROWS_AS(build_spinup(rec, 3), Error);
    try {
        build_spinup(rec, 3);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InsufficientData);
    }
}

TEST_CASE("water year boundaries") {
    CHECK(next_water_year_start(ymd(2000, 9, 30)) == ymd(2000, 10, 1));
    CHECK(next_water_year_start(ymd(2000, 10, 1)) == ymd(2001, 10, 1));
    CHECK(next_water_year_start(ymd(2001, 3, 15)) == ymd(2001, 10, 1));
}

TEST_CASE("masks partition every timestep") {
    const auto prepared = prepare_record(daily_record(ymd(1990, 10, 1), 800), 2);
    const auto n = prepared.split.size();
    std::vector<int> cover(n, 0);
    for (auto l : {L::SpinUp, L::Train, L::Select, L::Test, L::Missing}) {
        const auto m = subset_mask(prepared.split, l);
        for (std::size_t i = 0; i < n; ++i) cover[i] += m[i];
    }
    CHECK(std::all_of(cover.begin(), cover.end(), [](int c) { return c == 1; }));
    const auto unextended = split_timesteps(prepared.record.targets.streamflow);
    const auto spin = subset_mask(prepend_spinup(unextended, 0), L::SpinUp);
    CHECK(std::none_of(spin.begin(), spin.end(), [](bool b) { return b; }));
}

TEST_CASE("split labels round-trip through text") {
    for (auto l : {L::SpinUp, L::Train, L::Select, L::Test, L::Missing}) {
        CHECK(parse_split_label(to_string(l)) == l);
    }
    CHECK_THROWS_AS(parse_split_label("validation"), Error);
}

TEST_CASE("forcing validation") {
    auto f = fixtures::forcing(30);
    CHECK_NOTHROW(f.validate());
    auto bad = f;
    bad.pet.pop_back();
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = f;
    bad.precip[3] = -1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = f;
    bad.tmin[4] = bad.tmean[4] + 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = f;
    bad.precip[2] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("record validation checks target length and sign") {
    CatchmentRecord r;
    r.forcing = fixtures::forcing(20);
    r.targets.streamflow.assign(19, 1.0);
    CHECK_THROWS_AS(r.validate(), Error);
    r.targets.streamflow.assign(20, 1.0);
    CHECK_NOTHROW(r.validate());
    r.targets.streamflow[3] = -2.0;
    CHECK_THROWS_AS(r.validate(), Error);
}
