#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "mcp/error.hpp"
#include "mcp/training.hpp"

using namespace mcp;

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

SynthResult small_synth(const ModelSpec& spec, std::size_t n, std::uint64_t seed, double noise) {
    SynthSpec ss;
    ss.spec = spec;
    ss.length = n;
    ss.seed = seed;
    ss.noise_sigma = noise;
    ss.forcing.temp_mean = 1.0;
    return synthesize(ss);
}

double fd_worst(const ModelSpec& spec, const LossSpec& ls) {
    const auto syn = small_synth(spec, 64, 7, 0.1);
    const auto& t = ls.w_q == 0.0 ? syn.record.targets.swe : syn.record.targets.streamflow;
    const auto split = split_timesteps(t);
    const auto p = initialize_params(spec, 99);
    const auto g = gradient(spec, p, syn.record, split, ls);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        auto a = p, b = p;
        a[i] += 1e-6;
        b[i] -= 1e-6;
        const double fd = (loss(spec, a, syn.record, split, ls) - loss(spec, b, syn.record, split, ls)) / 2e-6;
        const double rel = std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-300});
        worst = std::max(worst, rel);
    }
    return worst;
}

TrainConfig quick(std::size_t epochs, std::size_t restarts, std::uint64_t seed) {
    TrainConfig c;
    c.epochs = epochs;
    c.restarts = restarts;
    c.rng_seed = seed;
    return c;
}

}  // namespace

TEST_CASE("reverse-mode gradients match central differences") {
    std::vector<ModelSpec> specs = candidate_specs(Coupling::Parallel);
    for (const auto& s : candidate_specs(Coupling::Series))
        if (s.family == Family::HYDROMCP2) specs.push_back(s);
    specs.push_back(ModelSpec::hmcp1(SoilVariant::Basic, true));
    specs.push_back(ModelSpec::hmcp1(SoilVariant::AugLoss, true));
    for (const auto& spec : specs) {
        std::vector<LossSpec> losses{LossSpec::streamflow()};
        if (spec.has_snow()) {
            losses.push_back(LossSpec::swe());
            losses.push_back(LossSpec::joint());
        }
        for (const auto& ls : losses) {
            INFO(spec.name() << " " << to_string(ls.kind));
            CHECK(fd_worst(spec, ls) <= 1e-5);
        }
    }
}

TEST_CASE("snow parameters without snow have exactly zero gradient") {
    const auto spec = ModelSpec::hydromcp2(SnowVariant::Basic, Coupling::Parallel);
    auto syn = small_synth(spec, 120, 3, 0.05);
    // One rain pulse with the rain/snow gate pinned shut: the snowpack stays
    // empty and only the soil sees water.
    std::fill(syn.record.forcing.precip.begin(), syn.record.forcing.precip.end(), 0.0);
    syn.record.forcing.precip[0] = 30.0;
    for (std::size_t i = 0; i < 120; ++i) syn.record.targets.streamflow[i] = 1.0 + double(i % 7);
    const auto split = split_timesteps(syn.record.targets.streamflow);
    auto p = initialize_params(spec, 4);
    p[p.index_of("a_RS")] = -1e6;
    const auto g = gradient(spec, p, syn.record, split, LossSpec::streamflow());
    const auto r = snow_slots(spec);
    for (std::size_t i = r.begin; i < r.end; ++i) {
        INFO(p.names[i]);
        CHECK(g[i] == 0.0);
    }
    CHECK(g[0] != 0.0);
}

TEST_CASE("gradient vanishes at the generating parameters") {
    const auto spec = ModelSpec::hmcp1(SoilVariant::Basic);
    const auto syn = small_synth(spec, 800, 12, 0.0);
    const auto split = split_timesteps(syn.record.targets.streamflow);
    Objective obj(spec, syn.record, split, LossSpec::streamflow(), syn.scaling);
    const auto ev = obj.evaluate(syn.params, true);
    CHECK(ev.loss <= 1e-12);
    for (double g : ev.gradient) CHECK(std::abs(g) <= 1e-6);
}

TEST_CASE("loss values on constructed targets") {
    const auto spec = ModelSpec::hmcp1(SoilVariant::Basic);
    auto syn = small_synth(spec, 300, 2, 0.0);
    const auto split = split_timesteps(syn.record.targets.streamflow);
    // Objective scaling fits on Train; simulate with the same scaling.
    const auto sc = training_scaling(syn.record, split);
    const auto q = simulate(spec, syn.params, syn.record.forcing, sc).q_sim;
    for (std::size_t i = 0; i < q.size(); ++i) syn.record.targets.streamflow[i] = q[i];
    CHECK(loss(spec, syn.params, syn.record, split, LossSpec::streamflow()) == doctest::Approx(0.0).epsilon(1e-12));
    for (std::size_t i = 0; i < q.size(); ++i) syn.record.targets.streamflow[i] = q[i] / 2.0;
    CHECK(loss(spec, syn.params, syn.record, split, LossSpec::streamflow()) ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    const std::vector<double> sim(10, 3.0), obs{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const auto idx = fixtures::all_indices(10);
    CHECK(kind_of([&] { kge_with_gradient(sim, obs, idx); }) == ErrorKind::DegenerateSeries);
    CHECK(kind_of([&] { kge_with_gradient(obs, obs, std::vector<std::size_t>{}); }) == ErrorKind::EmptyMask);
}

TEST_CASE("KGE gradient matches differences of the KGE oracle") {
    std::mt19937_64 rng(1);
    std::lognormal_distribution<double> d(0, 1);
    std::vector<double> sim(40), obs(40);
    for (auto& x : sim) x = d(rng);
    for (auto& x : obs) x = d(rng);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < 40; i += 2) idx.push_back(i);
    const auto g = kge_with_gradient(sim, obs, idx);
    CHECK(g.kge.kge == doctest::Approx(fixtures::kge_oracle(sim, obs, idx).kge).epsilon(1e-12));
    for (std::size_t i = 0; i < 40; ++i) {
        auto a = sim, b = sim;
        a[i] += 1e-6;
        b[i] -= 1e-6;
        const double fd = (fixtures::kge_oracle(b, obs, idx).kge - fixtures::kge_oracle(a, obs, idx).kge) / 2e-6;
        CHECK(g.d_loss_d_sim[i] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("ADAM update rules") {
    AdamState st(3);
    std::vector<double> p{1.0, -2.0, 0.5};
    const std::vector<double> g{3.0, -0.01, 1e3};
    adam_step(st, p, g, 0.01);
    CHECK(p[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
    CHECK(p[2] == doctest::Approx(0.5 - 0.01).epsilon(1e-9));

    AdamState z(2);
    std::vector<double> q{0.3, 0.4};
    adam_step(z, q, std::vector<double>{0.0, 0.0}, 0.01);
    CHECK(q == std::vector<double>{0.3, 0.4});

    std::vector<double> big{3.0, 4.0};
    clip_gradient(big, 1.0);
    CHECK(std::hypot(big[0], big[1]) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(big[0] == doctest::Approx(0.6).epsilon(1e-15));
    std::vector<double> small{0.3, 0.4};
    clip_gradient(small, 1.0);
    CHECK(small == std::vector<double>{0.3, 0.4});
}

TEST_CASE("constant observations fail every restart and retry with clipping") {
    const auto spec = ModelSpec::hmcp1(SoilVariant::Basic);
    auto syn = small_synth(spec, 500, 4, 0.0);
    for (auto& q : syn.record.targets.streamflow) q = 2.0;
    const auto split = split_timesteps(syn.record.targets.streamflow);
    const auto out = train(spec, syn.record, split, quick(3, 2, 1));
    CHECK(out.status == TrainStatus::FailedAllRestarts);
    CHECK(out.retried_with_clip);
    for (const auto& r : out.restarts) CHECK(r.status == RestartStatus::Failed);
}

TEST_CASE("training is deterministic and keeps the best selection score") {
    const auto spec = ModelSpec::hmcp1(SoilVariant::AugLoss);
    const auto syn = small_synth(spec, 600, 8, 0.05);
    const auto prep = prepare_record(syn.record, 1);
    const auto a = train(spec, prep.record, prep.split, quick(40, 3, 5));
    const auto b = train(spec, prep.record, prep.split, quick(40, 3, 5));
    REQUIRE(a.status == TrainStatus::Converged);
    CHECK(a.best_params.values == b.best_params.values);
    CHECK(a.best_select_kge == b.best_select_kge);

    double best = -1e300;
    for (const auto& r : a.restarts) best = std::max(best, r.select_kge);
    CHECK(a.best_select_kge == best);

    Objective obj(spec, prep.record, prep.split, LossSpec::streamflow(), a.scaling);
    const auto ev = obj.evaluate(a.best_params, false);
    CHECK(obj.score(ev.output, SplitLabel::Select) == doctest::Approx(a.best_select_kge).epsilon(1e-12));
    CHECK(1.0 - ev.loss == doctest::Approx(a.best_train_kge).epsilon(1e-12));

    std::set<std::uint64_t> seeds;
    for (const auto& r : a.restarts) seeds.insert(r.seed);
    CHECK(seeds.size() == a.restarts.size());
    for (std::size_t k = 1; k < a.log.size(); ++k) {
        if (a.log[k].restart == a.log[k - 1].restart) CHECK(a.log[k].select_kge > a.log[k - 1].select_kge);
    }
    const auto c = train(spec, prep.record, prep.split, quick(40, 3, 6));
    CHECK(c.best_params.values != a.best_params.values);
}

TEST_CASE("strategy I keeps warm snow parameters frozen") {
    const auto spec = ModelSpec::hydromcp2(SnowVariant::Basic, Coupling::Series);
    const auto syn = small_synth(spec, 600, 3, 0.05);
    const auto prep = prepare_record(syn.record, 1);
    WarmStart w;
    w.soil = initialize_params(ModelSpec::hmcp1(SoilVariant::Basic), 11).values;
    w.snow = initialize_params(ModelSpec::snowmcp1(SnowVariant::Basic), 12).values;
    const auto out = train(spec, prep.record, prep.split, quick(30, 2, 3), Strategy::I, w);
    REQUIRE(out.status == TrainStatus::Converged);
    const auto r = snow_slots(spec);
    const std::vector<double> snow(out.best_params.values.begin() + long(r.begin),
                                   out.best_params.values.begin() + long(r.end));
    CHECK(snow == *w.snow);
    CHECK(out.loss.kind == LossKind::KgeQ);

    const auto ii = train(spec, prep.record, prep.split, quick(30, 1, 3), Strategy::II, w);
    const std::vector<double> moved(ii.best_params.values.begin() + long(r.begin),
                                    ii.best_params.values.begin() + long(r.end));
    CHECK(moved != *w.snow);
}

TEST_CASE("invalid training combinations") {
    const auto h = ModelSpec::hydromcp2(SnowVariant::Basic, Coupling::Parallel);
    const auto s = ModelSpec::hmcp1(SoilVariant::Basic);
    CHECK(kind_of([&] { effective_loss(h, Strategy::None, LossSpec::streamflow()); }) == ErrorKind::ConfigError);
    CHECK(kind_of([&] { effective_loss(s, Strategy::II, LossSpec::streamflow()); }) == ErrorKind::ConfigError);
    CHECK(kind_of([&] { effective_loss(s, Strategy::None, LossSpec::swe()); }) == ErrorKind::ConfigError);
    CHECK(effective_loss(h, Strategy::III, LossSpec::streamflow()).kind == LossKind::KgeJoint);
    CHECK(effective_loss(h, Strategy::I, LossSpec::joint()).kind == LossKind::KgeQ);
    CHECK(effective_loss(ModelSpec::snowmcp1(SnowVariant::Basic), Strategy::None, LossSpec::swe()).kind ==
          LossKind::KgeSwe);

    const auto syn = small_synth(h, 400, 1, 0.0);
    const auto split = split_timesteps(syn.record.targets.streamflow);
    CHECK(kind_of([&] { train(h, syn.record, split, quick(2, 1, 0), Strategy::I); }) == ErrorKind::ConfigError);
    auto no_swe = syn.record;
    no_swe.targets.swe.clear();
    CHECK(kind_of([&] { train(h, no_swe, split, quick(2, 1, 0), Strategy::III); }) == ErrorKind::ConfigError);

    TrainConfig bad;
    bad.learning_rate = 0.0;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::ConfigError);
    bad = TrainConfig{};
    bad.restarts = 0;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::ConfigError);
    bad = TrainConfig{};
    bad.loss = {LossKind::KgeJoint, 0.7, 0.7};
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::ConfigError);
}

TEST_CASE("strategy names and seed derivation") {
    for (auto s : {Strategy::None, Strategy::I, Strategy::II, Strategy::III})
        CHECK(parse_strategy(to_string(s)) == s);
    CHECK(parse_strategy("2") == Strategy::II);
    CHECK_THROWS_AS(parse_strategy("IV"), Error);
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(7, i));
    CHECK(seen.size() == 1000);
    CHECK(derive_seed(7, 3) == derive_seed(7, 3));
    CHECK(derive_seed(7, 3) != derive_seed(8, 3));
    CHECK(derive_seed(1, "c1/HMCP1-B") != derive_seed(1, "c2/HMCP1-B"));
}
