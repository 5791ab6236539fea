#include "mcp/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcp/error.hpp"

namespace mcp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::KgeQ: return "kge_q";
        case LossKind::KgeSwe: return "kge_swe";
        case LossKind::KgeJoint: return "kge_joint";
    }
    return "kge_q";
}

std::string_view to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::None: return "none";
        case Strategy::I: return "I";
        case Strategy::II: return "II";
        case Strategy::III: return "III";
    }
    return "none";
}

Strategy parse_strategy(std::string_view text) {
    if (text.empty() || text == "none") return Strategy::None;
    if (text == "I" || text == "1") return Strategy::I;
    if (text == "II" || text == "2") return Strategy::II;
    if (text == "III" || text == "3") return Strategy::III;
    throw Error(ErrorKind::ConfigError, "unknown strategy '" + std::string(text) + "'");
}

std::string_view to_string(TrainStatus status) {
    return status == TrainStatus::Converged ? "Converged" : "FailedAllRestarts";
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::ConfigError, "learning_rate must be > 0");
    if (restarts < 1) throw Error(ErrorKind::ConfigError, "restarts must be >= 1");
    if (grad_clip && !(*grad_clip > 0.0)) throw Error(ErrorKind::ConfigError, "grad_clip must be > 0");
    if (!(retry_clip > 0.0)) throw Error(ErrorKind::ConfigError, "retry_clip must be > 0");
    if (loss.w_q < 0.0 || loss.w_s < 0.0 || std::abs(loss.w_q + loss.w_s - 1.0) > 1e-12) {
        throw Error(ErrorKind::ConfigError, "loss weights must be non-negative and sum to 1");
    }
}

InputScaling training_scaling(const CatchmentRecord& record, const SplitAssignment& split) {
    return fit_scaling(record.forcing, subset_mask(split, SplitLabel::Train));
}

Objective::Objective(ModelSpec spec, const CatchmentRecord& record, const SplitAssignment& split,
                     LossSpec loss, InputScaling scaling)
    : spec_(std::move(spec)), record_(&record), loss_(loss), scaling_(scaling) {
    spec_.validate();
    if (split.size() != record.size()) {
        throw Error(ErrorKind::InvalidData, "split length " + std::to_string(split.size()) +
                                                " does not match record length " +
                                                std::to_string(record.size()));
    }
    auto build = [&](const Observed& obs, const char* name) {
        if (obs.empty()) {
            throw Error(ErrorKind::ConfigError,
                        std::string("loss requires the '") + name + "' target");
        }
        Target t;
        t.values.assign(obs.size(), 0.0);
        for (std::size_t i = 0; i < obs.size(); ++i) {
            if (!obs[i]) continue;
            t.values[i] = *obs[i];
            switch (split.labels[i]) {
                case SplitLabel::Train: t.train.push_back(i); break;
                case SplitLabel::Select: t.select.push_back(i); break;
                case SplitLabel::Test: t.test.push_back(i); break;
                default: break;
            }
        }
        return t;
    };
    if (loss_.w_q > 0.0) q_ = build(record.targets.streamflow, "streamflow");
    if (loss_.w_s > 0.0) {
        if (!spec_.has_snow()) {
            throw Error(ErrorKind::ConfigError, spec_.name() + " has no snow state to match SWE");
        }
        swe_ = build(record.targets.swe, "swe");
    }
}

Objective::Evaluation Objective::evaluate(const ParameterVector& params, bool with_gradient) const {
    Evaluation ev;
    SimulationTape tape;
    ev.output = simulate(spec_, params, record_->forcing, scaling_, {},
                         with_gradient ? &tape : nullptr);

    std::vector<double> q_bar, swe_bar;
    if (loss_.w_q > 0.0) {
        auto g = kge_with_gradient(ev.output.q_sim, q_.values, q_.train);
        ev.loss += loss_.w_q * (1.0 - g.kge.kge);
        if (with_gradient) {
            q_bar = std::move(g.d_loss_d_sim);
            for (auto& v : q_bar) v *= loss_.w_q;
        }
    }
    if (loss_.w_s > 0.0) {
        auto g = kge_with_gradient(ev.output.swe_sim, swe_.values, swe_.train);
        ev.loss += loss_.w_s * (1.0 - g.kge.kge);
        if (with_gradient) {
            swe_bar = std::move(g.d_loss_d_sim);
            for (auto& v : swe_bar) v *= loss_.w_s;
        }
    }
    if (!std::isfinite(ev.loss)) throw Error(ErrorKind::NumericalDivergence, "loss is not finite");
    if (with_gradient) {
        ev.gradient = backpropagate(spec_, params, scaling_, tape, q_bar, swe_bar);
        if (!all_finite(ev.gradient)) {
            throw Error(ErrorKind::NumericalDivergence, "gradient is not finite");
        }
    }
    return ev;
}

double Objective::score(const SimulationOutput& output, SplitLabel subset) const {
    auto pick = [&](const Target& t) -> const std::vector<std::size_t>& {
        switch (subset) {
            case SplitLabel::Select: return t.select;
            case SplitLabel::Test: return t.test;
            default: return t.train;
        }
    };
    double s = 0.0;
    if (loss_.w_q > 0.0) s += loss_.w_q * kge_breakdown(output.q_sim, q_.values, pick(q_)).kge;
    if (loss_.w_s > 0.0) {
        s += loss_.w_s * kge_breakdown(output.swe_sim, swe_.values, pick(swe_)).kge;
    }
    return s;
}

double loss(const ModelSpec& spec, const ParameterVector& params, const CatchmentRecord& record,
            const SplitAssignment& split, const LossSpec& loss_spec) {
    const Objective obj(spec, record, split, loss_spec, training_scaling(record, split));
    return obj.evaluate(params, false).loss;
}

std::vector<double> gradient(const ModelSpec& spec, const ParameterVector& params,
                             const CatchmentRecord& record, const SplitAssignment& split,
                             const LossSpec& loss_spec) {
    const Objective obj(spec, record, split, loss_spec, training_scaling(record, split));
    return obj.evaluate(params, true).gradient;
}

void clip_gradient(std::span<double> grad, double max_norm) {
    double sq = 0.0;
    for (double g : grad) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double f = max_norm / norm;
        for (double& g : grad) g *= f;
    }
}

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grad,
               double learning_rate) {
    if (s.m.size() != params.size()) {
        s.m.assign(params.size(), 0.0);
        s.v.assign(params.size(), 0.0);
        s.step = 0;
    }
    ++s.step;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
        const double m_hat = s.m[i] / bc1;
        const double v_hat = s.v[i] / bc2;
        params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
}

LossSpec effective_loss(const ModelSpec& spec, Strategy strategy, const LossSpec& requested) {
    spec.validate();
    if (spec.family == Family::HYDROMCP2) {
        switch (strategy) {
            case Strategy::I:
            case Strategy::II: return LossSpec::streamflow();
            case Strategy::III: return LossSpec::joint();
            case Strategy::None:
                throw Error(ErrorKind::ConfigError, "HYDROMCP2 requires strategy I, II or III");
        }
    }
    if (strategy != Strategy::None) {
        throw Error(ErrorKind::ConfigError,
                    "training strategies apply to HYDROMCP2 only, not " + spec.name());
    }
    if (requested.w_s > 0.0 && !spec.has_snow()) {
        throw Error(ErrorKind::ConfigError, spec.name() + " cannot be trained against SWE");
    }
    return requested;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return derive_seed(master, h);
}

TrainOutcome train(const ModelSpec& spec, const CatchmentRecord& record,
                   const SplitAssignment& split, const TrainConfig& config, Strategy strategy,
                   const std::optional<WarmStart>& warm_start) {
    config.validate();
    const LossSpec loss_spec = effective_loss(spec, strategy, config.loss);

    const SlotRange soil_range = soil_slots(spec);
    const SlotRange snow_range = snow_slots(spec);
    const bool freeze_snow =
        strategy == Strategy::I || (warm_start && warm_start->freeze_snow && spec.has_snow());
    if (freeze_snow && !(warm_start && warm_start->snow)) {
        throw Error(ErrorKind::ConfigError,
                    "frozen snow parameters need a warm start for the snow unit");
    }
    if (warm_start) {
        auto check = [&](const std::optional<std::vector<double>>& v, SlotRange r, const char* unit) {
            if (v && v->size() != r.end - r.begin) {
                throw Error(ErrorKind::ConfigError,
                            std::string("warm start for the ") + unit + " unit has " +
                                std::to_string(v->size()) + " values, " + spec.name() +
                                " expects " + std::to_string(r.end - r.begin));
            }
        };
        check(warm_start->soil, soil_range, "soil");
        check(warm_start->snow, snow_range, "snow");
    }

    TrainOutcome outcome;
    outcome.spec = spec;
    outcome.strategy = strategy;
    outcome.loss = loss_spec;
    outcome.scaling = training_scaling(record, split);
    const Objective objective(spec, record, split, loss_spec, outcome.scaling);
    outcome.best_params = ParameterVector::zeros(spec);

    auto run_restart = [&](std::size_t r, std::optional<double> clip,
                           std::vector<LogEntry>& log) -> std::pair<RestartRecord, ParameterVector> {
        RestartRecord rec;
        rec.restart = r;
        rec.seed = derive_seed(config.rng_seed, r);
        rec.clipped = clip.has_value();
        ParameterVector params = initialize_params(spec, rec.seed);
        if (warm_start && warm_start->soil) {
            std::copy(warm_start->soil->begin(), warm_start->soil->end(),
                      params.values.begin() + static_cast<std::ptrdiff_t>(soil_range.begin));
        }
        if (warm_start && warm_start->snow) {
            std::copy(warm_start->snow->begin(), warm_start->snow->end(),
                      params.values.begin() + static_cast<std::ptrdiff_t>(snow_range.begin));
        }
        ParameterVector best = params;
        double best_select = kNegInf;
        double best_train = kNegInf;
        AdamState adam(params.size());
        try {
            for (std::size_t epoch = 0; epoch <= config.epochs; ++epoch) {
                const bool update = epoch < config.epochs;
                const auto ev = objective.evaluate(params, update);
                const double train_kge = 1.0 - ev.loss;
                double select_kge = kNegInf;
                try {
                    select_kge = objective.score(ev.output, SplitLabel::Select);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::DegenerateSeries) throw;
                }
                if (select_kge > best_select) {
                    best_select = select_kge;
                    best_train = train_kge;
                    best = params;
                    log.push_back({r, epoch, train_kge, select_kge});
                }
                if (!update) break;
                std::vector<double> grad = ev.gradient;
                if (freeze_snow) {
                    std::fill(grad.begin() + static_cast<std::ptrdiff_t>(snow_range.begin),
                              grad.begin() + static_cast<std::ptrdiff_t>(snow_range.end), 0.0);
                }
                if (clip) clip_gradient(grad, *clip);
                adam_step(adam, params.values, grad, config.learning_rate);
                if (!all_finite(params.values)) {
                    throw Error(ErrorKind::NumericalDivergence, "parameters diverged");
                }
            }
            if (!std::isfinite(best_select)) {
                throw Error(ErrorKind::DegenerateSeries, "selection score never defined");
            }
            rec.status = RestartStatus::Ok;
            rec.select_kge = best_select;
            rec.train_kge = best_train;
        } catch (const Error& e) {
            rec.status = RestartStatus::Failed;
            rec.message = e.what();
        }
        return {rec, best};
    };

    auto run_all = [&](std::optional<double> clip) {
        outcome.restarts.clear();
        outcome.log.clear();
        std::optional<std::size_t> winner;
        for (std::size_t r = 0; r < config.restarts; ++r) {
            auto [rec, params] = run_restart(r, clip, outcome.log);
            if (rec.status == RestartStatus::Ok &&
                (!winner || rec.select_kge > outcome.best_select_kge)) {
                winner = r;
                outcome.best_select_kge = rec.select_kge;
                outcome.best_train_kge = rec.train_kge;
                outcome.best_params = std::move(params);
            }
            outcome.restarts.push_back(std::move(rec));
        }
        outcome.status = winner ? TrainStatus::Converged : TrainStatus::FailedAllRestarts;
    };

    run_all(config.grad_clip);
    if (outcome.status == TrainStatus::FailedAllRestarts && !config.grad_clip) {
        outcome.retried_with_clip = true;
        run_all(config.retry_clip);
    }
    return outcome;
}

}  // namespace mcp
