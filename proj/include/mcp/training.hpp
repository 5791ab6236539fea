/**
 * @file training.hpp
 * @brief KGE losses with exact reverse-mode gradients through the model
 *        recurrence, ADAM, and the multi-restart training protocol.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcp/architectures.hpp"
#include "mcp/data_model.hpp"
#include "mcp/evaluation.hpp"

namespace mcp {

enum class LossKind { KgeQ, KgeSwe, KgeJoint };

std::string_view to_string(LossKind kind);

/// Objective is w_q (1 - KGE_Q) + w_s (1 - KGE_SWE); weights sum to one.
struct LossSpec {
    LossKind kind = LossKind::KgeQ;
    double w_q = 1.0;
    double w_s = 0.0;

    static LossSpec streamflow() { return {LossKind::KgeQ, 1.0, 0.0}; }
    static LossSpec swe() { return {LossKind::KgeSwe, 0.0, 1.0}; }
    static LossSpec joint() { return {LossKind::KgeJoint, 0.5, 0.5}; }
};

/// HYDROMCP2 training strategies; `None` for single-state models.
enum class Strategy { None, I, II, III };

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t epochs = 2000;
    std::size_t restarts = 10;
    std::optional<double> grad_clip;  // max gradient L2 norm
    double retry_clip = 1.0;          // used when every restart fails
    LossSpec loss = LossSpec::streamflow();
    std::uint64_t rng_seed = 0;

    /// Throws ConfigError for non-positive rates, zero restarts or bad weights.
    void validate() const;
};

/// Scaling fitted on the Train subset of the prepared record.
InputScaling training_scaling(const CatchmentRecord& record, const SplitAssignment& split);

/// Loss and gradient evaluation for one (spec, record, split, loss) tuple.
class Objective {
public:
    Objective(ModelSpec spec, const CatchmentRecord& record, const SplitAssignment& split,
              LossSpec loss, InputScaling scaling);

    const ModelSpec& spec() const noexcept { return spec_; }
    const InputScaling& scaling() const noexcept { return scaling_; }
    const LossSpec& loss_spec() const noexcept { return loss_; }

    struct Evaluation {
        double loss = 0.0;       // on the Train subset
        std::vector<double> gradient;  // empty unless requested
        SimulationOutput output;
    };

    /// Throws DegenerateSeries/EmptyMask from the KGE and NumericalDivergence
    /// for non-finite states or gradients.
    Evaluation evaluate(const ParameterVector& params, bool with_gradient) const;

    /// Weighted KGE (1 - loss) of a simulation on the given subset.
    double score(const SimulationOutput& output, SplitLabel subset) const;

private:
    struct Target {
        std::vector<double> values;             // dense, zero where missing
        std::vector<std::size_t> train, select, test;
    };

    const Target& target_for(bool swe) const { return swe ? swe_ : q_; }

    ModelSpec spec_;
    const CatchmentRecord* record_;
    LossSpec loss_;
    InputScaling scaling_;
    Target q_, swe_;
};

double loss(const ModelSpec& spec, const ParameterVector& params, const CatchmentRecord& record,
            const SplitAssignment& split, const LossSpec& loss_spec);

std::vector<double> gradient(const ModelSpec& spec, const ParameterVector& params,
                             const CatchmentRecord& record, const SplitAssignment& split,
                             const LossSpec& loss_spec);

/// Rescales `grad` so its L2 norm does not exceed `max_norm`.
void clip_gradient(std::span<double> grad, double max_norm);

struct AdamState {
    std::vector<double> m, v;
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected ADAM update of `params` in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
               double learning_rate);

struct WarmStart {
    std::optional<std::vector<double>> soil;
    std::optional<std::vector<double>> snow;
    bool freeze_snow = false;
};

enum class RestartStatus { Ok, Failed };

struct RestartRecord {
    std::size_t restart = 0;
    std::uint64_t seed = 0;
    RestartStatus status = RestartStatus::Ok;
    double train_kge = 0.0;   // weighted KGE at the best checkpoint
    double select_kge = 0.0;  // best selection-set weighted KGE
    bool clipped = false;
    std::string message;
};

struct LogEntry {
    std::size_t restart = 0;
    std::size_t epoch = 0;
    double train_kge = 0.0;
    double select_kge = 0.0;
};

enum class TrainStatus { Converged, FailedAllRestarts };

std::string_view to_string(TrainStatus status);

struct TrainOutcome {
    ModelSpec spec;
    Strategy strategy = Strategy::None;
    LossSpec loss;
    InputScaling scaling;
    TrainStatus status = TrainStatus::FailedAllRestarts;
    ParameterVector best_params;
    double best_select_kge = 0.0;
    double best_train_kge = 0.0;
    std::vector<RestartRecord> restarts;
    std::vector<LogEntry> log;
    bool retried_with_clip = false;
};

/// Loss implied by a strategy for HYDROMCP2, or `requested` otherwise.
/// Throws ConfigError for invalid spec/strategy/loss combinations.
LossSpec effective_loss(const ModelSpec& spec, Strategy strategy, const LossSpec& requested);

/// Deterministic per-restart seed from the master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

/// Runs `config.restarts` independent ADAM runs and keeps the restart with
/// the best selection-set score. A restart that diverges or degenerates is
/// excluded; if all fail the whole set is retried once with gradient clipping.
TrainOutcome train(const ModelSpec& spec, const CatchmentRecord& record,
                   const SplitAssignment& split, const TrainConfig& config,
                   Strategy strategy = Strategy::None,
                   const std::optional<WarmStart>& warm_start = std::nullopt);

}  // namespace mcp
