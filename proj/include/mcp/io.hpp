/**
 * @file io.hpp
 * @brief CSV and JSON persistence for catchment data, splits, simulations,
 *        training logs, checkpoints and evaluation tables.
 */
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mcp/architectures.hpp"
#include "mcp/data_model.hpp"
#include "mcp/evaluation.hpp"
#include "mcp/training.hpp"

namespace mcp::io {

namespace fs = std::filesystem;

/// Shortest round-trip text for a finite double; "nan"/"inf" otherwise.
std::string format_number(double value);

/// ISO-8601 "YYYY-MM-DD".
std::string format_date(Date date);
Date parse_date(std::string_view text);

/// Comma-separated fields of one line (no quoting).
std::vector<std::string> split_fields(std::string_view line);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column or -1.
    long column(std::string_view name) const;
};

/// Throws IoError when unreadable and InvalidData for an empty file or a
/// row whose field count differs from the header.
CsvTable read_csv(const fs::path& path);

/// Creates parent directories; throws IoError on failure.
void write_text(const fs::path& path, const std::string& content);
std::string read_text(const fs::path& path);

ForcingSeries read_forcing(const fs::path& path);
void write_forcing(const fs::path& path, const ForcingSeries& forcing);

/// Targets are aligned to `dates`; a date mismatch is InvalidData.
TargetSeries read_targets(const fs::path& path, const std::vector<Date>& dates);
void write_targets(const fs::path& path, const std::vector<Date>& dates,
                   const TargetSeries& targets);

/// Columns: catchment_id,elevation_m,aridity_index,snow_fraction,
/// forest_fraction,region_tags,climate_code_p1,climate_code_p2
/// (region tags separated by ';').
std::vector<CatchmentAttributes> read_attributes(const fs::path& path);
void write_attributes(const fs::path& path, const std::vector<CatchmentAttributes>& rows);

void write_split(const fs::path& path, const std::vector<Date>& dates,
                 const SplitAssignment& split);
SplitAssignment read_split(const fs::path& path, const std::vector<Date>& dates);

void write_simulation(const fs::path& path, const std::vector<Date>& dates,
                      const SimulationOutput& sim);

void write_training_log(const fs::path& path, const std::vector<LogEntry>& log);

/// Columns: restart,seed,status,clipped,train_kge,select_kge,message
void write_restart_summary(const fs::path& path, const TrainOutcome& outcome);

struct Checkpoint {
    std::string catchment_id;
    ModelSpec spec;
    Strategy strategy = Strategy::None;
    LossSpec loss;
    TrainStatus status = TrainStatus::FailedAllRestarts;
    ParameterVector params;
    InputScaling scaling;
    double best_select_kge = 0.0;
    double best_train_kge = 0.0;
    std::uint64_t seed = 0;

    static Checkpoint from_outcome(std::string catchment_id, const TrainOutcome& outcome,
                                   std::uint64_t seed);
};

std::string checkpoint_json(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text);
void write_checkpoint(const fs::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const fs::path& path);

struct MetricsRow {
    std::string catchment_id;
    std::string spec;
    std::string subset;
    std::optional<KgeBreakdown> kge;  // empty cells when not computable
};

inline constexpr std::string_view kMetricsHeader =
    "catchment_id,spec,subset,r,alpha,beta,kge,kge_ss,alpha_star,beta_star";
inline constexpr std::string_view kSelectionHeader =
    "catchment_id,spec,k,pdf_family,log_likelihood,aic,kge_ss,winner_aic,winner_kge";
inline constexpr std::string_view kSummaryHeader = "spec,group,statistic,count,kge_ss";

std::string metrics_csv(const std::vector<MetricsRow>& rows);

/// One block of rows per catchment; a catchment without any valid candidate
/// gets rows with empty scores and a status in the pdf_family column.
struct SelectionBlock {
    std::string catchment_id;
    std::optional<SelectionReport> report;
    std::vector<SelectionCandidate> candidates;  // for names/k when report is empty
    std::string status;
};
std::string selection_csv(const std::vector<SelectionBlock>& blocks);

std::string summary_csv(const std::vector<SummaryRow>& rows);

}  // namespace mcp::io
