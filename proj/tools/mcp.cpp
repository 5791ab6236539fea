// Command-line front end for the MCP catchment-model experiments.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcp/error.hpp"
#include "mcp/experiment.hpp"
#include "mcp/io.hpp"
#include "mcp/synth.hpp"

namespace {

using namespace mcp;

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::IoError: return kExitIo;
        case ErrorKind::ConfigError:
        case ErrorKind::InvalidData:
        case ErrorKind::InsufficientData:
        case ErrorKind::VariantMismatch: return kExitConfig;
        default: return 1;
    }
}

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::string catchment;
    std::string spec;
    std::string strategy;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Experiment config JSON");
    cmd->add_option("--out", c.out, "Output directory (overrides the config)");
    cmd->add_option("--seed", c.seed, "Master seed (overrides the config)");
    cmd->add_option("--jobs", c.jobs, "Worker threads (overrides the config)");
}

ExperimentConfig config_from(const Common& c) {
    if (c.config.empty()) throw Error(ErrorKind::ConfigError, "--config is required");
    auto cfg = load_config(c.config);
    if (!c.out.empty()) cfg.output = c.out;
    if (c.seed) cfg.train.rng_seed = *c.seed;
    if (c.jobs) cfg.jobs = *c.jobs;
    return cfg;
}

int report_status(const PipelineResult& r) {
    std::size_t ok = 0;
    for (const auto& s : r.status) ok += s.status == "ok";
    std::printf("models ok: %zu of %zu\n", ok, r.status.size());
    for (const auto& s : r.status) {
        if (s.status != "ok") {
            std::printf("  %s %s: %s %s\n", s.catchment_id.c_str(), s.label.c_str(),
                        s.status.c_str(), s.message.c_str());
        }
    }
    return 0;
}

int cmd_split(const std::string& forcing, const std::string& targets, const std::string& out,
              std::size_t repeats) {
    CatchmentRecord rec;
    rec.forcing = io::read_forcing(forcing);
    rec.targets = io::read_targets(targets, rec.forcing.dates);
    const auto prepared = prepare_record(rec, repeats);
    if (!out.empty()) io::write_split(out, prepared.record.forcing.dates, prepared.split);
    const auto& s = prepared.split;
    std::printf("train %zu\nselect %zu\ntest %zu\nspinup %zu\nmissing %zu\ntotal %zu\n",
                s.count(SplitLabel::Train), s.count(SplitLabel::Select), s.count(SplitLabel::Test),
                s.count(SplitLabel::SpinUp), s.count(SplitLabel::Missing), s.size());
    return 0;
}

LossSpec parse_loss(const std::string& text) {
    if (text == "q") return LossSpec::streamflow();
    if (text == "swe") return LossSpec::swe();
    if (text == "joint") return LossSpec::joint();
    throw Error(ErrorKind::ConfigError, "--loss must be q, swe or joint");
}

int cmd_train(const Common& c, const std::string& loss, const std::string& warm_soil,
              const std::string& warm_snow) {
    const auto cfg = config_from(c);
    std::optional<ModelSpec> spec;
    if (!c.spec.empty()) spec = ModelSpec::parse(c.spec);
    std::optional<Strategy> strategy;
    if (!c.strategy.empty()) strategy = parse_strategy(c.strategy);

    const bool direct = !loss.empty() || !warm_soil.empty() || !warm_snow.empty();
    if (!direct) {
        const auto r = run_training(cfg, c.catchment.empty() ? std::nullopt
                                                             : std::optional(c.catchment),
                                    spec, strategy);
        report_status(r);
        // A requested model that cannot be trained as configured is a usage error.
        for (const auto& s : r.status) {
            if (s.status == to_string(ErrorKind::ConfigError)) return kExitConfig;
        }
        return 0;
    }
    if (c.catchment.empty() || !spec) {
        throw Error(ErrorKind::ConfigError, "--loss/--warm-* need --catchment and --spec");
    }
    cfg.validate();
    const CatchmentSource* source = nullptr;
    for (const auto& s : cfg.catchments) {
        if (s.id == c.catchment) source = &s;
    }
    if (!source) throw Error(ErrorKind::ConfigError, "catchment '" + c.catchment + "' not in config");
    const auto attrs = cfg.attributes ? io::read_attributes(*cfg.attributes)
                                      : std::vector<CatchmentAttributes>{};
    const auto data = load_catchment(*source, attrs, cfg.spinup_repeats);

    TrainTask task;
    task.spec = *spec;
    task.strategy = strategy.value_or(Strategy::None);
    task.loss = effective_loss(*spec, task.strategy,
                               loss.empty() ? LossSpec::streamflow() : parse_loss(loss));
    task.label = model_label(task.spec, task.strategy, task.loss);
    task.stage = (warm_soil.empty() && warm_snow.empty()) ? 1 : 2;
    std::optional<WarmStart> warm;
    if (task.stage == 2) {
        WarmStart w;
        if (!warm_soil.empty()) w.soil = io::read_checkpoint(warm_soil).params.values;
        if (!warm_snow.empty()) w.snow = io::read_checkpoint(warm_snow).params.values;
        w.freeze_snow = task.strategy == Strategy::I;
        warm = w;
    }
    const auto m = run_task(cfg, c.catchment, data.prepared, task, warm, cfg.output / c.catchment);
    if (m.status == std::string(to_string(ErrorKind::ConfigError))) {
        throw Error(ErrorKind::ConfigError, m.message);
    }
    PipelineResult r;
    r.status.push_back({c.catchment, task.label, m.status, m.message});
    return report_status(r);
}

SynthSpec synth_from_json(const std::string& path) {
    SynthSpec s;
    try {
        const auto j = nlohmann::json::parse(io::read_text(path));
        if (j.contains("spec")) s.spec = ModelSpec::parse(j["spec"].get<std::string>());
        s.catchment_id = j.value("id", s.catchment_id);
        s.length = j.value("length", s.length);
        s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
        s.seed = j.value("seed", s.seed);
        if (j.contains("params")) s.params = j["params"].get<std::vector<double>>();
        if (j.contains("forcing")) {
            const auto& f = j["forcing"];
            auto& g = s.forcing;
            if (f.contains("start")) g.start = io::parse_date(f["start"].get<std::string>());
            g.wet_probability = f.value("wet_probability", g.wet_probability);
            g.wet_persistence = f.value("wet_persistence", g.wet_persistence);
            g.mean_wet_depth = f.value("mean_wet_depth", g.mean_wet_depth);
            g.precip_seasonality = f.value("precip_seasonality", g.precip_seasonality);
            g.temp_mean = f.value("temp_mean", g.temp_mean);
            g.temp_amplitude = f.value("temp_amplitude", g.temp_amplitude);
            g.temp_noise = f.value("temp_noise", g.temp_noise);
            g.diurnal_range = f.value("diurnal_range", g.diurnal_range);
            g.pet_mean = f.value("pet_mean", g.pet_mean);
            g.pet_amplitude = f.value("pet_amplitude", g.pet_amplitude);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("malformed synth spec: ") + e.what());
    }
    return s;
}

int cmd_synth(SynthSpec base, const std::string& out, std::size_t count,
              const std::string& write_config) {
    if (out.empty()) throw Error(ErrorKind::ConfigError, "--out is required");
    if (count == 0) throw Error(ErrorKind::ConfigError, "--count must be >= 1");
    const fs::path dir(out);
    nlohmann::ordered_json catchments = nlohmann::ordered_json::array();
    std::vector<CatchmentAttributes> attrs;
    for (std::size_t i = 0; i < count; ++i) {
        SynthSpec s = base;
        if (count > 1) {
            char suffix[32];
            std::snprintf(suffix, sizeof suffix, "_%03zu", i + 1);
            s.catchment_id = base.catchment_id + suffix;
            s.seed = derive_seed(base.seed, static_cast<std::uint64_t>(i));
        }
        const auto result = synthesize(s);
        write_synthetic(s, result, dir);
        catchments.push_back({{"id", s.catchment_id},
                              {"forcing", s.catchment_id + ".forcing.csv"},
                              {"targets", s.catchment_id + ".targets.csv"}});
        CatchmentAttributes a;
        a.id = s.catchment_id;
        attrs.push_back(a);
        std::printf("%s: %zu days, %s\n", s.catchment_id.c_str(), s.length, s.spec.name().c_str());
    }
    if (!write_config.empty()) {
        io::write_attributes(dir / "attributes.csv", attrs);
        nlohmann::ordered_json cfg{{"catchments", catchments},
                                   {"attributes", "attributes.csv"},
                                   {"seed", base.seed},
                                   {"output", "results"}};
        io::write_text(dir / write_config, cfg.dump(2) + '\n');
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mass-conserving perceptron catchment models"};
    app.require_subcommand(1);

    Common common;

    std::string forcing, targets, split_out;
    std::size_t repeats = 3;
    auto* split = app.add_subcommand("split", "Split a record into train/select/test");
    split->add_option("--forcing", forcing, "Forcing CSV")->required();
    split->add_option("--targets", targets, "Target CSV")->required();
    split->add_option("--out", split_out, "Split CSV to write");
    split->add_option("--spinup-repeats", repeats, "Copies of the first water year");

    std::string loss, warm_soil, warm_snow;
    auto* train = app.add_subcommand("train", "Train models and write checkpoints");
    add_common(train, common);
    train->add_option("--catchment", common.catchment, "Only this catchment");
    train->add_option("--spec", common.spec, "Only this model spec");
    train->add_option("--strategy", common.strategy, "Only this HYDROMCP2 strategy (I, II, III)");
    train->add_option("--loss", loss, "Loss for a single run: q, swe or joint");
    train->add_option("--warm-soil", warm_soil, "Checkpoint with soil parameters");
    train->add_option("--warm-snow", warm_snow, "Checkpoint with snow parameters");

    auto* evaluate = app.add_subcommand("evaluate", "Metrics for trained checkpoints");
    add_common(evaluate, common);
    auto* select = app.add_subcommand("select", "Per-catchment architecture selection");
    add_common(select, common);
    auto* summarize = app.add_subcommand("summarize", "Percentile and group summary table");
    add_common(summarize, common);
    auto* run = app.add_subcommand("run", "Full pipeline: split, train, evaluate, select, summarize");
    add_common(run, common);

    SynthSpec synth_spec;
    std::string synth_config, synth_model = synth_spec.spec.name(), synth_out, synth_write_config;
    std::size_t synth_count = 1;
    std::vector<double> synth_params;
    auto* synth = app.add_subcommand("synth", "Generate synthetic catchment files");
    synth->add_option("--config", synth_config, "Synth spec JSON");
    synth->add_option("--spec", synth_model, "Generating model");
    synth->add_option("--length", synth_spec.length, "Number of days");
    synth->add_option("--noise", synth_spec.noise_sigma, "Lognormal noise sigma");
    synth->add_option("--seed", synth_spec.seed, "Seed");
    synth->add_option("--id", synth_spec.catchment_id, "Catchment id (prefix with --count)");
    synth->add_option("--params", synth_params, "Generating parameters")->delimiter(',');
    synth->add_option("--count", synth_count, "Number of catchments");
    synth->add_option("--out", synth_out, "Output directory");
    synth->add_option("--write-config", synth_write_config,
                      "Also write an experiment config with this file name");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*split) return cmd_split(forcing, targets, split_out, repeats);
        if (*train) return cmd_train(common, loss, warm_soil, warm_snow);
        if (*evaluate) {
            run_evaluation(config_from(common), true, false, false);
            return 0;
        }
        if (*select) {
            run_evaluation(config_from(common), false, true, false);
            return 0;
        }
        if (*summarize) {
            run_evaluation(config_from(common), false, false, true);
            return 0;
        }
        if (*run) return report_status(run_pipeline(config_from(common)));
        if (*synth) {
            SynthSpec s = synth_config.empty() ? synth_spec : synth_from_json(synth_config);
            if (synth_config.empty()) {
                s.spec = ModelSpec::parse(synth_model);
                if (!synth_params.empty()) s.params = synth_params;
            }
            return cmd_synth(s, synth_out, synth_count, synth_write_config);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
