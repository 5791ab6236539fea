#include "mcp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "mcp/error.hpp"

namespace mcp {

using json = nlohmann::json;

namespace {

const Date kSecondClimatePeriod = Date{std::chrono::year{1991} / std::chrono::January / 1};

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::string strip_rc(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

const char* kSubsets[] = {"train", "select", "test"};
const SplitLabel kSubsetLabels[] = {SplitLabel::Train, SplitLabel::Select, SplitLabel::Test};

}  // namespace

std::vector<ModelSpec> ExperimentConfig::default_specs() {
    std::vector<ModelSpec> out;
    for (auto v : {SoilVariant::Basic, SoilVariant::AugLoss, SoilVariant::MassRelax}) {
        out.push_back(ModelSpec::hmcp1(v));
    }
    for (auto v : {SnowVariant::Basic, SnowVariant::Generic, SnowVariant::Complex}) {
        out.push_back(ModelSpec::snowmcp1(v));
    }
    for (auto v : {SnowVariant::Basic, SnowVariant::Generic, SnowVariant::Complex}) {
        for (auto c : {Coupling::Series, Coupling::Parallel}) {
            out.push_back(ModelSpec::hydromcp2(v, c));
        }
    }
    return out;
}

void ExperimentConfig::validate() const {
    if (specs.empty()) throw Error(ErrorKind::ConfigError, "no candidate specs configured");
    if (catchments.empty()) throw Error(ErrorKind::ConfigError, "no catchments configured");
    for (const auto& s : specs) s.validate();
    if (families.empty()) throw Error(ErrorKind::ConfigError, "no residual pdf families configured");
    if (jobs == 0) throw Error(ErrorKind::ConfigError, "jobs must be >= 1");
    if (warm_restarts && *warm_restarts == 0) {
        throw Error(ErrorKind::ConfigError, "warm_restarts must be >= 1");
    }
    train.validate();
    std::set<std::string> ids;
    for (const auto& c : catchments) {
        if (c.id.empty()) throw Error(ErrorKind::ConfigError, "catchment without an id");
        if (!ids.insert(c.id).second) {
            throw Error(ErrorKind::ConfigError, "duplicate catchment id '" + c.id + "'");
        }
    }
}

std::vector<ModelSpec> expand_spec_name(std::string_view name, bool pet_constrained) {
    std::string n(name);
    if (pet_constrained && n.rfind("SNOWMCP1", 0) != 0 &&
        (n.size() < 4 || n.substr(n.size() - 4) != "-CON")) {
        n += "-CON";
    }
    const bool con = n.size() >= 4 && n.substr(n.size() - 4) == "-CON";
    const std::string core = con ? n.substr(0, n.size() - 4) : n;
    if (core.rfind("HYDROMCP2-", 0) == 0 && std::count(core.begin(), core.end(), '-') == 1) {
        const auto s = ModelSpec::parse(core + "-S" + (con ? "-CON" : ""));
        const auto p = ModelSpec::parse(core + "-P" + (con ? "-CON" : ""));
        return {s, p};
    }
    return {ModelSpec::parse(n)};
}

ExperimentConfig parse_config(std::string_view text, const fs::path& base_dir) {
    ExperimentConfig c;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
        static const std::set<std::string> known{
            "catchments", "attributes", "specs",   "strategies",   "pet_constrained",
            "train",      "warm_restarts", "selection", "pdf_families", "spinup_repeats",
            "seed",       "jobs",       "output"};
        for (const auto& [key, _] : j.items()) {
            if (!known.count(key)) {
                throw Error(ErrorKind::ConfigError, "unknown config key '" + key + "'");
            }
        }
        for (const auto& e : j.value("catchments", json::array())) {
            CatchmentSource s;
            s.id = e.at("id").get<std::string>();
            s.forcing = resolve(base_dir, e.at("forcing").get<std::string>());
            s.targets = resolve(base_dir, e.at("targets").get<std::string>());
            c.catchments.push_back(std::move(s));
        }
        if (j.contains("attributes") && !j["attributes"].is_null()) {
            c.attributes = resolve(base_dir, j["attributes"].get<std::string>());
        }
        const bool con = j.value("pet_constrained", false);
        if (j.contains("specs")) {
            for (const auto& s : j["specs"]) {
                for (auto& spec : expand_spec_name(s.get<std::string>(), con)) {
                    c.specs.push_back(spec);
                }
            }
        } else {
            c.specs = ExperimentConfig::default_specs();
            if (con) {
                for (auto& s : c.specs) {
                    if (s.has_soil()) s.pet_constrained = true;
                }
            }
        }
        if (j.contains("strategies")) {
            c.strategies.clear();
            for (const auto& s : j["strategies"]) {
                c.strategies.push_back(parse_strategy(s.get<std::string>()));
            }
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
            c.train.epochs = t.value("epochs", c.train.epochs);
            c.train.restarts = t.value("restarts", c.train.restarts);
            if (t.contains("grad_clip") && !t["grad_clip"].is_null()) {
                c.train.grad_clip = t["grad_clip"].get<double>();
            }
            c.train.retry_clip = t.value("retry_clip", c.train.retry_clip);
        }
        if (j.contains("warm_restarts") && !j["warm_restarts"].is_null()) {
            c.warm_restarts = j["warm_restarts"].get<std::size_t>();
        }
        const std::string sel = j.value("selection", "AIC");
        if (sel == "AIC") c.criterion = SelectionCriterion::AIC;
        else if (sel == "KGE") c.criterion = SelectionCriterion::KGE;
        else throw Error(ErrorKind::ConfigError, "selection must be AIC or KGE, got '" + sel + "'");
        if (j.contains("pdf_families")) {
            c.families.clear();
            for (const auto& f : j["pdf_families"]) {
                c.families.push_back(parse_pdf_family(f.get<std::string>()));
            }
        }
        c.spinup_repeats = j.value("spinup_repeats", c.spinup_repeats);
        c.train.rng_seed = j.value("seed", std::uint64_t{0});
        c.jobs = j.value("jobs", c.jobs);
        c.output = resolve(base_dir, j.value("output", std::string("results")));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("malformed config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    return parse_config(io::read_text(path), path.parent_path());
}

std::string model_label(const ModelSpec& spec, Strategy strategy, const LossSpec& loss) {
    std::string label = spec.name();
    if (strategy != Strategy::None) label += "@" + std::string(to_string(strategy));
    if (loss.kind == LossKind::KgeSwe) label += "@SWE";
    return label;
}

std::string label_stem(std::string_view label) {
    std::string s(label);
    std::replace(s.begin(), s.end(), '@', '_');
    return s;
}

LoadedCatchment load_catchment(const CatchmentSource& source,
                               const std::vector<CatchmentAttributes>& attributes,
                               std::size_t spinup_repeats) {
    LoadedCatchment out;
    out.raw.forcing = io::read_forcing(source.forcing);
    out.raw.targets = io::read_targets(source.targets, out.raw.forcing.dates);
    out.raw.attributes.id = source.id;
    for (const auto& a : attributes) {
        if (a.id == source.id) out.raw.attributes = a;
    }
    out.prepared = prepare_record(out.raw, spinup_repeats);
    return out;
}

std::vector<TrainTask> plan_tasks(const ExperimentConfig& config, const TargetSeries& targets) {
    std::vector<TrainTask> tasks;
    std::set<std::string> seen;
    auto add = [&](const ModelSpec& spec, Strategy strategy, const LossSpec& loss, std::size_t stage) {
        TrainTask t{spec, strategy, loss, model_label(spec, strategy, loss), stage};
        if (seen.insert(t.label).second) tasks.push_back(std::move(t));
    };
    const bool has_q = targets.has_streamflow();
    const bool has_swe = targets.has_swe();
    for (const auto& spec : config.specs) {
        switch (spec.family) {
            case Family::HMCP1:
                if (has_q) add(spec, Strategy::None, LossSpec::streamflow(), 1);
                break;
            case Family::SNOWMCP1:
                if (has_q) add(spec, Strategy::None, LossSpec::streamflow(), 1);
                if (has_swe) add(spec, Strategy::None, LossSpec::swe(), 1);
                break;
            case Family::HYDROMCP2: {
                if (!has_q) break;
                add(ModelSpec::hmcp1(SoilVariant::Basic, spec.pet_constrained), Strategy::None,
                    LossSpec::streamflow(), 1);
                const auto snow = ModelSpec::snowmcp1(*spec.snow_variant);
                add(snow, Strategy::None, has_swe ? LossSpec::swe() : LossSpec::streamflow(), 1);
                break;
            }
        }
    }
    for (const auto& spec : config.specs) {
        if (spec.family != Family::HYDROMCP2 || !has_q) continue;
        for (auto strategy : config.strategies) {
            if (strategy == Strategy::None) continue;
            add(spec, strategy, effective_loss(spec, strategy, LossSpec::streamflow()), 2);
        }
    }
    return tasks;
}

std::optional<WarmStart> warm_start_for(const TrainTask& task,
                                        const std::map<std::string, io::Checkpoint>& stage1,
                                        std::string& problem) {
    problem.clear();
    if (task.stage < 2) return std::nullopt;
    WarmStart w;
    const auto soil = ModelSpec::hmcp1(SoilVariant::Basic, task.spec.pet_constrained);
    if (auto it = stage1.find(soil.name()); it != stage1.end()) w.soil = it->second.params.values;
    const auto snow = ModelSpec::snowmcp1(*task.spec.snow_variant);
    auto it = stage1.find(model_label(snow, Strategy::None, LossSpec::swe()));
    if (it == stage1.end()) it = stage1.find(snow.name());
    if (it != stage1.end()) w.snow = it->second.params.values;
    w.freeze_snow = task.strategy == Strategy::I;
    if (w.freeze_snow && !w.snow) {
        problem = "strategy I needs a trained " + snow.name() + " to freeze";
        return std::nullopt;
    }
    return w;
}

TrainedModel run_task(const ExperimentConfig& config, const std::string& catchment_id,
                      const PreparedRecord& prepared, const TrainTask& task,
                      const std::optional<WarmStart>& warm, const fs::path& dir) {
    TrainedModel m;
    m.task = task;
    const std::uint64_t seed = derive_seed(config.train.rng_seed, catchment_id + "/" + task.label);
    try {
        TrainConfig cfg = config.train;
        cfg.loss = task.loss;
        cfg.rng_seed = seed;
        if (warm && config.warm_restarts) cfg.restarts = *config.warm_restarts;
        m.outcome = train(task.spec, prepared.record, prepared.split, cfg, task.strategy, warm);
        m.checkpoint = io::Checkpoint::from_outcome(catchment_id, m.outcome, seed);
        const std::string stem = label_stem(task.label);
        io::write_checkpoint(dir / (stem + ".checkpoint.json"), *m.checkpoint);
        io::write_training_log(dir / (stem + ".log.csv"), m.outcome.log);
        io::write_restart_summary(dir / (stem + ".restarts.csv"), m.outcome);
        if (m.outcome.status == TrainStatus::Converged) {
            const auto sim = simulate(task.spec, m.outcome.best_params, prepared.record.forcing,
                                      m.outcome.scaling);
            io::write_simulation(dir / (stem + ".sim.csv"), prepared.record.forcing.dates, sim);
        }
        m.status = m.outcome.status == TrainStatus::Converged ? "ok"
                                                              : std::string(to_string(m.outcome.status));
        if (m.outcome.status != TrainStatus::Converged && !m.outcome.restarts.empty()) {
            m.message = m.outcome.restarts.back().message;
        }
    } catch (const Error& e) {
        m.status = std::string(to_string(e.kind()));
        m.message = e.what();
        if (e.kind() == ErrorKind::IoError) throw;
    } catch (const std::exception& e) {
        m.status = "Error";
        m.message = e.what();
    }
    return m;
}

std::vector<io::Checkpoint> load_checkpoints(const fs::path& dir) {
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        const auto name = entry.path().filename().string();
        const std::string suffix = ".checkpoint.json";
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<io::Checkpoint> out;
    for (const auto& f : files) out.push_back(io::read_checkpoint(f));
    return out;
}

namespace {

struct ScoredModel {
    std::string label;
    const io::Checkpoint* checkpoint = nullptr;
    bool q_model = false;
    std::vector<double> q_sim;
    std::optional<KgeBreakdown> subset[3];
    std::string status = "ok";
};

}  // namespace

CatchmentEvaluation evaluate_catchment(const ExperimentConfig& config, const LoadedCatchment& data,
                                       const std::vector<io::Checkpoint>& checkpoints) {
    CatchmentEvaluation ev;
    const auto& id = data.raw.attributes.id;
    const auto& rec = data.prepared.record;
    const auto& split = data.prepared.split;

    std::vector<Mask> masks;
    for (auto l : kSubsetLabels) masks.push_back(subset_mask(split, l));

    std::vector<ScoredModel> models;
    for (const auto& c : checkpoints) {
        ScoredModel m;
        m.checkpoint = &c;
        m.label = model_label(c.spec, c.strategy, c.loss);
        m.q_model = c.loss.kind != LossKind::KgeSwe;
        const Observed& obs = m.q_model ? rec.targets.streamflow : rec.targets.swe;
        if (c.status != TrainStatus::Converged) {
            m.status = std::string(to_string(c.status));
        } else if (obs.empty()) {
            m.status = "missing target";
        } else {
            try {
                auto sim = simulate(c.spec, c.params, rec.forcing, c.scaling);
                const auto& series = m.q_model ? sim.q_sim : sim.swe_sim;
                for (std::size_t s = 0; s < 3; ++s) {
                    try {
                        m.subset[s] = kge_breakdown(series, obs, masks[s]);
                    } catch (const Error&) {
                    }
                }
                if (m.q_model) m.q_sim = std::move(sim.q_sim);
            } catch (const Error& e) {
                m.status = std::string(to_string(e.kind()));
            }
        }
        for (std::size_t s = 0; s < 3; ++s) {
            ev.metrics.push_back({id, m.label, kSubsets[s], m.subset[s]});
        }
        models.push_back(std::move(m));
    }

    // One candidate per configured spec; HYDROMCP2 variants are represented by
    // their best coupling/strategy on the selection set.
    std::vector<SelectionCandidate> candidates;
    std::set<std::string> groups;
    for (const auto& spec : config.specs) {
        if (spec.family != Family::HYDROMCP2) {
            SelectionCandidate cand{spec.name(), param_count(spec), {}, "not trained"};
            for (const auto& m : models) {
                if (m.q_model && m.label == spec.name()) {
                    cand.status = m.status;
                    if (m.status == "ok") cand.q_sim = m.q_sim;
                }
            }
            candidates.push_back(std::move(cand));
            continue;
        }
        std::string group = "HYDROMCP2-" + spec.name().substr(10, 1) +
                            (spec.pet_constrained ? "-CON" : "");
        if (!groups.insert(group).second) continue;
        const ScoredModel* best = nullptr;
        std::string status = "not trained";
        for (const auto& m : models) {
            const auto& s = m.checkpoint->spec;
            if (s.family != Family::HYDROMCP2 || s.snow_variant != spec.snow_variant ||
                s.pet_constrained != spec.pet_constrained ||
                std::find(config.specs.begin(), config.specs.end(), s) == config.specs.end()) {
                continue;
            }
            status = m.status;
            if (m.status != "ok" || !m.subset[1]) continue;
            if (!best || m.subset[1]->kge > best->subset[1]->kge) best = &m;
        }
        if (best) {
            candidates.push_back({best->label, param_count(spec), best->q_sim, "ok"});
        } else {
            candidates.push_back({group, param_count(spec), {}, status});
        }
    }

    ev.selection.catchment_id = id;
    ev.selection.candidates = candidates;
    std::optional<std::size_t> winner;
    if (!rec.targets.has_streamflow()) {
        ev.selection.status = "no streamflow";
    } else {
        try {
            ev.selection.report = select_architecture(candidates, rec.targets.streamflow,
                                                      masks[2], config.families);
            ev.selection.status = "ok";
            winner = config.criterion == SelectionCriterion::AIC
                         ? ev.selection.report->winner_by_aic
                         : ev.selection.report->winner_by_kge;
        } catch (const Error& e) {
            ev.selection.status = std::string(to_string(e.kind()));
        }
    }

    // Classification for the summary groups.
    const auto& attrs = data.raw.attributes;
    double max_swe = 0.0;
    if (data.raw.targets.has_swe()) {
        try {
            max_swe = snow_signatures(data.raw.targets.swe, data.raw.forcing.dates).median_annual_max;
        } catch (const Error&) {
        }
    }
    std::size_t p1 = 0, p2 = 0;
    for (const auto& d : data.raw.forcing.dates) (d < kSecondClimatePeriod ? p1 : p2) += 1;
    std::string climate;
    if (!attrs.climate_code_p1.empty() || !attrs.climate_code_p2.empty()) {
        climate = attrs.climate_code_p1.empty()   ? attrs.climate_code_p2
                  : attrs.climate_code_p2.empty() ? attrs.climate_code_p1
                                                  : weighted_climate(attrs.climate_code_p1,
                                                                     attrs.climate_code_p2, p1, p2);
    }
    auto summary_row = [&](const std::string& spec, double kge_ss) {
        SummaryInput in;
        in.catchment_id = id;
        in.spec = spec;
        in.kge_ss = kge_ss;
        in.region_tags = attrs.region_tags;
        in.snow = classify_snowy(max_swe, attrs.snow_fraction);
        in.forest = classify_forest(attrs.forest_fraction);
        in.climate_code = climate;
        ev.summary.push_back(std::move(in));
    };
    for (const auto& m : models) {
        if (m.subset[2]) summary_row(m.label, m.subset[2]->kge_ss);
    }
    if (winner) summary_row("selected", ev.selection.report->candidates[*winner].kge_ss);
    return ev;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::string status_csv(const std::vector<StatusRow>& rows) {
    std::string out = "catchment_id,model,status,message\n";
    for (const auto& r : rows) {
        out += r.catchment_id + ',' + r.label + ',' + r.status + ',' + strip_rc(r.message) + '\n';
    }
    return out;
}

namespace {

struct CatchmentState {
    const CatchmentSource* source = nullptr;
    std::optional<LoadedCatchment> data;
    std::string load_error;
    std::string load_status;
    std::vector<TrainTask> tasks;
    std::vector<TrainedModel> trained;  // parallel to tasks
};

std::vector<CatchmentAttributes> read_attributes_if_any(const ExperimentConfig& config) {
    return config.attributes ? io::read_attributes(*config.attributes)
                             : std::vector<CatchmentAttributes>{};
}

std::vector<CatchmentState> load_all(const ExperimentConfig& config,
                                     const std::optional<std::string>& only) {
    const auto attributes = read_attributes_if_any(config);
    std::vector<CatchmentState> states;
    for (const auto& c : config.catchments) {
        if (only && c.id != *only) continue;
        states.emplace_back().source = &c;
    }
    if (only && states.empty()) {
        throw Error(ErrorKind::ConfigError, "catchment '" + *only + "' is not in the config");
    }
    parallel_for(states.size(), config.jobs, [&](std::size_t i) {
        auto& s = states[i];
        try {
            s.data = load_catchment(*s.source, attributes, config.spinup_repeats);
            s.tasks = plan_tasks(config, s.data->raw.targets);
            s.trained.resize(s.tasks.size());
        } catch (const Error& e) {
            s.load_status = std::string(to_string(e.kind()));
            s.load_error = e.what();
        }
    });
    return states;
}

void train_stages(const ExperimentConfig& config, std::vector<CatchmentState>& states,
                  const std::function<bool(const TrainTask&)>& wanted) {
    for (std::size_t stage = 1; stage <= 2; ++stage) {
        std::vector<std::pair<std::size_t, std::size_t>> jobs;
        for (std::size_t c = 0; c < states.size(); ++c) {
            if (!states[c].data) continue;
            for (std::size_t t = 0; t < states[c].tasks.size(); ++t) {
                if (states[c].tasks[t].stage == stage && wanted(states[c].tasks[t])) {
                    jobs.emplace_back(c, t);
                }
            }
        }
        parallel_for(jobs.size(), config.jobs, [&](std::size_t j) {
            auto& s = states[jobs[j].first];
            const auto& task = s.tasks[jobs[j].second];
            const auto& id = s.source->id;
            const fs::path dir = config.output / id;
            std::optional<WarmStart> warm;
            if (stage == 2) {
                std::map<std::string, io::Checkpoint> stage1;
                for (std::size_t t = 0; t < s.tasks.size(); ++t) {
                    if (s.tasks[t].stage != 1) continue;
                    const auto& tm = s.trained[t];
                    if (tm.checkpoint) {
                        if (tm.checkpoint->status == TrainStatus::Converged) {
                            stage1.emplace(s.tasks[t].label, *tm.checkpoint);
                        }
                        continue;
                    }
                    const auto path = dir / (label_stem(s.tasks[t].label) + ".checkpoint.json");
                    if (fs::exists(path)) {
                        auto ck = io::read_checkpoint(path);
                        if (ck.status == TrainStatus::Converged) stage1.emplace(s.tasks[t].label, ck);
                    }
                }
                std::string problem;
                warm = warm_start_for(task, stage1, problem);
                if (!problem.empty()) {
                    auto& tm = s.trained[jobs[j].second];
                    tm.task = task;
                    tm.status = std::string(to_string(ErrorKind::ConfigError));
                    tm.message = problem;
                    return;
                }
            }
            s.trained[jobs[j].second] = run_task(config, id, s.data->prepared, task, warm, dir);
        });
    }
}

std::vector<StatusRow> collect_status(const std::vector<CatchmentState>& states,
                                      std::size_t& failed) {
    std::vector<StatusRow> rows;
    failed = 0;
    for (const auto& s : states) {
        if (!s.data) {
            rows.push_back({s.source->id, "-", s.load_status, s.load_error});
            ++failed;
            continue;
        }
        for (std::size_t t = 0; t < s.tasks.size(); ++t) {
            const auto& tm = s.trained[t];
            if (tm.status.empty()) continue;
            rows.push_back({s.source->id, s.tasks[t].label, tm.status, tm.message});
        }
    }
    return rows;
}

void write_split_file(const ExperimentConfig& config, const CatchmentState& s) {
    io::write_split(config.output / s.source->id / "split.csv",
                    s.data->prepared.record.forcing.dates, s.data->prepared.split);
}

void write_evaluations(const ExperimentConfig& config, const std::vector<CatchmentState>& states,
                       const std::vector<std::vector<io::Checkpoint>>& checkpoints, bool metrics,
                       bool selection, bool summary) {
    std::vector<std::optional<CatchmentEvaluation>> evals(states.size());
    parallel_for(states.size(), config.jobs, [&](std::size_t i) {
        if (states[i].data) evals[i] = evaluate_catchment(config, *states[i].data, checkpoints[i]);
    });
    std::vector<io::MetricsRow> metric_rows;
    std::vector<io::SelectionBlock> blocks;
    std::vector<SummaryInput> inputs;
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (!evals[i]) {
            blocks.push_back({states[i].source->id, std::nullopt, {}, states[i].load_status});
            continue;
        }
        auto& e = *evals[i];
        metric_rows.insert(metric_rows.end(), e.metrics.begin(), e.metrics.end());
        blocks.push_back(std::move(e.selection));
        inputs.insert(inputs.end(), e.summary.begin(), e.summary.end());
    }
    if (metrics) io::write_text(config.output / "metrics.csv", io::metrics_csv(metric_rows));
    if (selection) io::write_text(config.output / "selection.csv", io::selection_csv(blocks));
    if (summary) {
        io::write_text(config.output / "summary.csv", io::summary_csv(aggregate_summary(inputs)));
    }
}

std::vector<io::Checkpoint> sorted_checkpoints(const CatchmentState& s) {
    std::vector<std::pair<std::string, io::Checkpoint>> keyed;
    for (const auto& tm : s.trained) {
        if (tm.checkpoint) keyed.emplace_back(label_stem(tm.task.label), *tm.checkpoint);
    }
    std::sort(keyed.begin(), keyed.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<io::Checkpoint> out;
    for (auto& [_, c] : keyed) out.push_back(std::move(c));
    return out;
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& config) {
    config.validate();
    auto states = load_all(config, std::nullopt);
    for (const auto& s : states) {
        if (s.data) write_split_file(config, s);
    }
    train_stages(config, states, [](const TrainTask&) { return true; });

    std::vector<std::vector<io::Checkpoint>> checkpoints;
    for (const auto& s : states) checkpoints.push_back(sorted_checkpoints(s));
    write_evaluations(config, states, checkpoints, true, true, true);

    PipelineResult result;
    result.status = collect_status(states, result.catchments_failed);
    io::write_text(config.output / "status.csv", status_csv(result.status));
    return result;
}

PipelineResult run_training(const ExperimentConfig& config,
                            const std::optional<std::string>& catchment,
                            const std::optional<ModelSpec>& spec,
                            const std::optional<Strategy>& strategy) {
    config.validate();
    auto states = load_all(config, catchment);
    for (const auto& s : states) {
        if (s.data) write_split_file(config, s);
    }
    train_stages(config, states, [&](const TrainTask& t) {
        if (spec && !(t.spec == *spec)) return false;
        if (strategy && t.strategy != *strategy) return false;
        return true;
    });
    PipelineResult result;
    result.status = collect_status(states, result.catchments_failed);
    return result;
}

void run_evaluation(const ExperimentConfig& config, bool metrics, bool selection, bool summary) {
    config.validate();
    auto states = load_all(config, std::nullopt);
    std::vector<std::vector<io::Checkpoint>> checkpoints(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (states[i].data) checkpoints[i] = load_checkpoints(config.output / states[i].source->id);
    }
    write_evaluations(config, states, checkpoints, metrics, selection, summary);
}

void write_synthetic(const SynthSpec& spec, const SynthResult& result, const fs::path& dir) {
    const auto& id = spec.catchment_id;
    io::write_forcing(dir / (id + ".forcing.csv"), result.record.forcing);
    io::write_targets(dir / (id + ".targets.csv"), result.record.forcing.dates,
                      result.record.targets);
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < result.params.size(); ++i) {
        params[result.params.names[i]] = result.params[i];
    }
    nlohmann::ordered_json j{{"catchment_id", id},
                             {"spec", spec.spec.name()},
                             {"seed", spec.seed},
                             {"length", spec.length},
                             {"noise_sigma", spec.noise_sigma},
                             {"params", params},
                             {"flux_ref", result.scaling.flux_ref}};
    io::write_text(dir / (id + ".truth.json"), j.dump(2) + '\n');
}

}  // namespace mcp
