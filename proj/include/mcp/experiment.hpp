/**
 * @file experiment.hpp
 * @brief Experiment configuration and the per-catchment pipeline: split,
 *        staged training with warm starts, evaluation, selection, summary.
 */
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcp/architectures.hpp"
#include "mcp/data_model.hpp"
#include "mcp/evaluation.hpp"
#include "mcp/io.hpp"
#include "mcp/synth.hpp"
#include "mcp/training.hpp"

namespace mcp {

namespace fs = std::filesystem;

struct CatchmentSource {
    std::string id;
    fs::path forcing;
    fs::path targets;
};

enum class SelectionCriterion { AIC, KGE };

struct ExperimentConfig {
    std::vector<CatchmentSource> catchments;
    std::optional<fs::path> attributes;
    std::vector<ModelSpec> specs;  // HYDROMCP2 already expanded over couplings
    std::vector<Strategy> strategies{Strategy::I, Strategy::II, Strategy::III};
    TrainConfig train;
    std::optional<std::size_t> warm_restarts;  // restarts for warm-started stages
    SelectionCriterion criterion = SelectionCriterion::AIC;
    std::vector<PdfFamily> families = default_pdf_families();
    std::size_t spinup_repeats = 3;
    fs::path output = "results";
    std::size_t jobs = 1;

    /// The nine candidates with HYDROMCP2 over both couplings.
    static std::vector<ModelSpec> default_specs();

    /// Throws ConfigError when no candidate or no catchment is configured.
    void validate() const;
};

/// Parses the JSON schema documented in the README. Relative paths resolve
/// against `base_dir`. Throws ConfigError.
ExperimentConfig parse_config(std::string_view json_text, const fs::path& base_dir = {});
ExperimentConfig load_config(const fs::path& path);

/// Expands "HYDROMCP2-B" to both couplings; other names parse directly.
std::vector<ModelSpec> expand_spec_name(std::string_view name, bool pet_constrained = false);

/// Output label of a trained model, e.g. "HMCP1-B", "SNOWMCP1-G@SWE",
/// "HYDROMCP2-C-P@II".
std::string model_label(const ModelSpec& spec, Strategy strategy, const LossSpec& loss);

/// File stem used for a label ('@' becomes '_').
std::string label_stem(std::string_view label);

struct LoadedCatchment {
    CatchmentRecord raw;
    PreparedRecord prepared;
};

LoadedCatchment load_catchment(const CatchmentSource& source,
                               const std::vector<CatchmentAttributes>& attributes,
                               std::size_t spinup_repeats);

/// Training job for one model on one catchment.
struct TrainTask {
    ModelSpec spec;
    Strategy strategy = Strategy::None;
    LossSpec loss;
    std::string label;
    std::size_t stage = 1;
};

/// Stage-1 and stage-2 tasks implied by the configured candidates and the
/// targets present in the catchment.
std::vector<TrainTask> plan_tasks(const ExperimentConfig& config, const TargetSeries& targets);

/// Warm start for a stage-2 task from converged stage-1 checkpoints.
/// Returns ConfigError text in `problem` when the strategy cannot run.
std::optional<WarmStart> warm_start_for(const TrainTask& task,
                                        const std::map<std::string, io::Checkpoint>& stage1,
                                        std::string& problem);

struct StatusRow {
    std::string catchment_id;
    std::string label;
    std::string status;
    std::string message;
};

struct TrainedModel {
    TrainTask task;
    std::optional<io::Checkpoint> checkpoint;
    TrainOutcome outcome;  // empty when loaded from disk
    std::string status;
    std::string message;
};

/// Trains one task and writes its checkpoint, log and restart summary under
/// `dir`. Failures become status rows rather than exceptions.
TrainedModel run_task(const ExperimentConfig& config, const std::string& catchment_id,
                      const PreparedRecord& prepared, const TrainTask& task,
                      const std::optional<WarmStart>& warm, const fs::path& dir);

struct CatchmentEvaluation {
    std::vector<io::MetricsRow> metrics;
    io::SelectionBlock selection;
    std::vector<SummaryInput> summary;
};

/// Metrics on train/select/test for every checkpoint, selection among the
/// candidate set (HYDROMCP2 represented by its best coupling/strategy on the
/// selection set) and the summary inputs for the test period.
CatchmentEvaluation evaluate_catchment(const ExperimentConfig& config, const LoadedCatchment& data,
                                       const std::vector<io::Checkpoint>& checkpoints);

/// Checkpoints found under `<output>/<catchment>/`, in file-name order.
std::vector<io::Checkpoint> load_checkpoints(const fs::path& dir);

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

struct PipelineResult {
    std::vector<StatusRow> status;
    std::size_t catchments_failed = 0;
};

/// Full run: split, stage-1 and stage-2 training, evaluation, selection,
/// summary. Writes metrics.csv, selection.csv, summary.csv and status.csv.
PipelineResult run_pipeline(const ExperimentConfig& config);

/// Training only, restricted by optional catchment/spec/strategy filters.
PipelineResult run_training(const ExperimentConfig& config,
                            const std::optional<std::string>& catchment,
                            const std::optional<ModelSpec>& spec,
                            const std::optional<Strategy>& strategy);

/// Evaluation of checkpoints already on disk; writes metrics.csv,
/// selection.csv and summary.csv.
void run_evaluation(const ExperimentConfig& config, bool metrics, bool selection, bool summary);

std::string status_csv(const std::vector<StatusRow>& rows);

/// Writes `<dir>/<id>.forcing.csv`, `.targets.csv` and `.truth.json`.
void write_synthetic(const SynthSpec& spec, const SynthResult& result, const fs::path& dir);

}  // namespace mcp
