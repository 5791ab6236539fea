/**
 * @file data_model.hpp
 * @brief Catchment time series, static attributes, spin-up construction and
 *        the distribution-preserving train/select/test splitter.
 */
#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mcp {

using Date = std::chrono::sys_days;

/// Observed series with explicit missing values.
using Observed = std::vector<std::optional<double>>;

/// Per-timestep boolean selector.
using Mask = std::vector<bool>;

/// Meteorological drivers. `precip` and `dates` are required; the other
/// columns are optional and represented by an empty vector when absent.
struct ForcingSeries {
    std::vector<Date> dates;
    std::vector<double> precip;  // mm/day
    std::vector<double> pet;     // mm/day
    std::vector<double> tmean;   // degC
    std::vector<double> tmin;    // degC
    std::vector<double> tmax;    // degC
    std::vector<double> vpd;     // Pa
    std::vector<double> srad;    // W/m2

    std::size_t size() const noexcept { return dates.size(); }

    /// Throws InvalidData when column lengths disagree, precip/pet are
    /// negative or non-finite, or tmin <= tmean <= tmax is violated.
    void validate() const;
};

struct TargetSeries {
    Observed streamflow;  // mm/day, empty when absent
    Observed swe;         // mm, empty when absent

    bool has_streamflow() const noexcept { return !streamflow.empty(); }
    bool has_swe() const noexcept { return !swe.empty(); }
};

struct CatchmentAttributes {
    std::string id;
    double elevation_m = 0.0;
    double aridity_index = 0.0;
    double snow_fraction = 0.0;
    double forest_fraction = 0.0;
    std::set<std::string> region_tags;
    std::string climate_code_p1;
    std::string climate_code_p2;
};

struct CatchmentRecord {
    CatchmentAttributes attributes;
    ForcingSeries forcing;
    TargetSeries targets;

    std::size_t size() const noexcept { return forcing.size(); }

    /// Forcing validation plus target length/sign checks.
    void validate() const;
};

enum class SplitLabel : unsigned char { SpinUp, Train, Select, Test, Missing };

std::string_view to_string(SplitLabel label);
SplitLabel parse_split_label(std::string_view text);

/// One label per timestep of the (possibly spin-up-extended) series.
/// `Missing` marks timesteps whose target was absent when splitting; they
/// carry no loss or metric label.
struct SplitAssignment {
    std::vector<SplitLabel> labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t count(SplitLabel label) const;
};

/// Pairs the largest value with the smallest, the second largest with the
/// second smallest and so on, then deals whole pairs to subsets following
/// the cycle Train, Test, Select, Train. Ties in magnitude break by ascending
/// time index. An odd middle element forms a singleton pair in the cycle.
/// Missing values are excluded from pairing and labelled Missing.
SplitAssignment split_timesteps(const Observed& series);
SplitAssignment split_timesteps(std::span<const double> series);

/// First day of the water year that follows `date` (water years start Oct 1).
Date next_water_year_start(Date date);

/// Number of leading timesteps belonging to the record's first water year.
/// Throws InsufficientData when the record does not cover it completely.
std::size_t first_water_year_length(const std::vector<Date>& dates);

struct SpunUpRecord {
    CatchmentRecord record;
    std::size_t spinup_length = 0;
};

/// Prepends `repeats` copies of the first water year (forcing and targets).
/// Prepended dates are shifted back by whole segment lengths so the calendar
/// stays contiguous.
SpunUpRecord build_spinup(const CatchmentRecord& record, std::size_t repeats = 3);

/// Labels the first `spinup_length` timesteps SpinUp and appends `split`.
SplitAssignment prepend_spinup(const SplitAssignment& split, std::size_t spinup_length);

Mask subset_mask(const SplitAssignment& assignment, SplitLabel subset);

/// Record with spin-up applied and the split derived from streamflow (or from
/// SWE when the record has no streamflow).
struct PreparedRecord {
    CatchmentRecord record;
    SplitAssignment split;
    std::size_t spinup_length = 0;
};

PreparedRecord prepare_record(const CatchmentRecord& record, std::size_t spinup_repeats = 3);

}  // namespace mcp
