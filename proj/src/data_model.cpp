#include "mcp/data_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "mcp/error.hpp"

namespace mcp {

namespace {

void check_length(const std::vector<double>& column, std::size_t n, std::string_view name) {
    if (!column.empty() && column.size() != n) {
        throw Error(ErrorKind::InvalidData,
                    "column '" + std::string(name) + "' has length " +
                        std::to_string(column.size()) + ", expected " + std::to_string(n));
    }
}

void check_non_negative(const std::vector<double>& column, std::string_view name) {
    for (std::size_t t = 0; t < column.size(); ++t) {
        if (!std::isfinite(column[t]) || column[t] < 0.0) {
            throw Error(ErrorKind::InvalidData,
                        "column '" + std::string(name) + "' must be finite and >= 0 (timestep " +
                            std::to_string(t) + ")");
        }
    }
}

void check_finite(const std::vector<double>& column, std::string_view name) {
    for (std::size_t t = 0; t < column.size(); ++t) {
        if (!std::isfinite(column[t])) {
            throw Error(ErrorKind::InvalidData, "column '" + std::string(name) +
                                                    "' is not finite at timestep " +
                                                    std::to_string(t));
        }
    }
}

void check_observed(const Observed& column, std::size_t n, std::string_view name) {
    if (column.empty()) return;
    if (column.size() != n) {
        throw Error(ErrorKind::InvalidData, "target '" + std::string(name) + "' has length " +
                                                std::to_string(column.size()) + ", expected " +
                                                std::to_string(n));
    }
    for (std::size_t t = 0; t < n; ++t) {
        if (column[t] && (!std::isfinite(*column[t]) || *column[t] < 0.0)) {
            throw Error(ErrorKind::InvalidData, "target '" + std::string(name) +
                                                    "' must be finite and >= 0 (timestep " +
                                                    std::to_string(t) + ")");
        }
    }
}

template <typename T>
std::vector<T> with_prefix(const std::vector<T>& column, std::size_t segment, std::size_t repeats) {
    if (column.empty()) return {};
    std::vector<T> out;
    out.reserve(column.size() + segment * repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        out.insert(out.end(), column.begin(), column.begin() + static_cast<std::ptrdiff_t>(segment));
    }
    out.insert(out.end(), column.begin(), column.end());
    return out;
}

}  // namespace

void ForcingSeries::validate() const {
    const std::size_t n = dates.size();
    if (n == 0) throw Error(ErrorKind::InvalidData, "forcing series is empty");
    if (precip.size() != n) {
        throw Error(ErrorKind::InvalidData, "column 'precip' is required and must match dates");
    }
    check_length(pet, n, "pet");
    check_length(tmean, n, "tmean");
    check_length(tmin, n, "tmin");
    check_length(tmax, n, "tmax");
    check_length(vpd, n, "vpd");
    check_length(srad, n, "srad");
    check_non_negative(precip, "precip");
    check_non_negative(pet, "pet");
    check_finite(tmean, "tmean");
    check_finite(tmin, "tmin");
    check_finite(tmax, "tmax");
    check_finite(vpd, "vpd");
    check_finite(srad, "srad");
    if (!tmin.empty() && !tmax.empty() && !tmean.empty()) {
        for (std::size_t t = 0; t < n; ++t) {
            if (tmin[t] > tmean[t] || tmean[t] > tmax[t]) {
                throw Error(ErrorKind::InvalidData,
                            "tmin <= tmean <= tmax violated at timestep " + std::to_string(t));
            }
        }
    }
    for (std::size_t t = 1; t < n; ++t) {
        if (dates[t] <= dates[t - 1]) {
            throw Error(ErrorKind::InvalidData,
                        "dates must be strictly increasing (timestep " + std::to_string(t) + ")");
        }
    }
}

void CatchmentRecord::validate() const {
    forcing.validate();
    check_observed(targets.streamflow, forcing.size(), "streamflow");
    check_observed(targets.swe, forcing.size(), "swe");
}

std::string_view to_string(SplitLabel label) {
    switch (label) {
        case SplitLabel::SpinUp: return "spinup";
        case SplitLabel::Train: return "train";
        case SplitLabel::Select: return "select";
        case SplitLabel::Test: return "test";
        case SplitLabel::Missing: return "missing";
    }
    return "missing";
}

SplitLabel parse_split_label(std::string_view text) {
    for (auto label : {SplitLabel::SpinUp, SplitLabel::Train, SplitLabel::Select, SplitLabel::Test,
                       SplitLabel::Missing}) {
        if (text == to_string(label)) return label;
    }
    throw Error(ErrorKind::InvalidData, "unknown split label '" + std::string(text) + "'");
}

std::size_t SplitAssignment::count(SplitLabel label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

SplitAssignment split_timesteps(const Observed& series) {
    if (series.empty()) throw Error(ErrorKind::InvalidData, "cannot split an empty series");

    std::vector<std::size_t> order;
    order.reserve(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
        if (!series[t]) continue;
        if (!std::isfinite(*series[t])) {
            throw Error(ErrorKind::InvalidData, "non-finite value at timestep " + std::to_string(t));
        }
        order.push_back(t);
    }

    SplitAssignment out;
    out.labels.assign(series.size(), SplitLabel::Missing);
    if (order.empty()) return out;

    // Descending magnitude; ties keep ascending time order.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return *series[a] > *series[b]; });

    static constexpr std::array<SplitLabel, 4> cycle = {SplitLabel::Train, SplitLabel::Test,
                                                        SplitLabel::Select, SplitLabel::Train};
    const std::size_t n = order.size();
    const std::size_t pairs = (n + 1) / 2;
    for (std::size_t k = 0; k < pairs; ++k) {
        const SplitLabel label = cycle[k % cycle.size()];
        out.labels[order[k]] = label;
        out.labels[order[n - 1 - k]] = label;  // same element when k is the odd middle
    }
    return out;
}

SplitAssignment split_timesteps(std::span<const double> series) {
    Observed observed(series.begin(), series.end());
    return split_timesteps(observed);
}

Date next_water_year_start(Date date) {
    using namespace std::chrono;
    const year_month_day ymd{date};
    const year start_year = ymd.month() >= October ? ymd.year() + years{1} : ymd.year();
    return sys_days{start_year / October / 1};
}

std::size_t first_water_year_length(const std::vector<Date>& dates) {
    if (dates.empty()) throw Error(ErrorKind::InsufficientData, "record is empty");
    const Date boundary = next_water_year_start(dates.front());
    const auto length = static_cast<std::size_t>(
        std::count_if(dates.begin(), dates.end(), [&](Date d) { return d < boundary; }));
    if (dates.back() < boundary - std::chrono::days{1}) {
        throw Error(ErrorKind::InsufficientData,
                    "record does not contain its complete first water year");
    }
    return length;
}

SpunUpRecord build_spinup(const CatchmentRecord& record, std::size_t repeats) {
    SpunUpRecord out{record, 0};
    if (repeats == 0) return out;

    const std::size_t segment = first_water_year_length(record.forcing.dates);
    const auto& f = record.forcing;
    auto& g = out.record.forcing;

    g.dates.clear();
    g.dates.reserve(f.size() + segment * repeats);
    const auto span_days = (f.dates[segment - 1] - f.dates[0]).count() + 1;
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto shift = std::chrono::days{span_days * static_cast<long>(repeats - r)};
        for (std::size_t t = 0; t < segment; ++t) g.dates.push_back(f.dates[t] - shift);
    }
    g.dates.insert(g.dates.end(), f.dates.begin(), f.dates.end());

    g.precip = with_prefix(f.precip, segment, repeats);
    g.pet = with_prefix(f.pet, segment, repeats);
    g.tmean = with_prefix(f.tmean, segment, repeats);
    g.tmin = with_prefix(f.tmin, segment, repeats);
    g.tmax = with_prefix(f.tmax, segment, repeats);
    g.vpd = with_prefix(f.vpd, segment, repeats);
    g.srad = with_prefix(f.srad, segment, repeats);
    out.record.targets.streamflow = with_prefix(record.targets.streamflow, segment, repeats);
    out.record.targets.swe = with_prefix(record.targets.swe, segment, repeats);
    out.spinup_length = segment * repeats;
    return out;
}

SplitAssignment prepend_spinup(const SplitAssignment& split, std::size_t spinup_length) {
    SplitAssignment out;
    out.labels.reserve(split.size() + spinup_length);
    out.labels.assign(spinup_length, SplitLabel::SpinUp);
    out.labels.insert(out.labels.end(), split.labels.begin(), split.labels.end());
    return out;
}

Mask subset_mask(const SplitAssignment& assignment, SplitLabel subset) {
    Mask mask(assignment.size());
    for (std::size_t t = 0; t < assignment.size(); ++t) mask[t] = assignment.labels[t] == subset;
    return mask;
}

PreparedRecord prepare_record(const CatchmentRecord& record, std::size_t spinup_repeats) {
    record.validate();
    const Observed& basis =
        record.targets.has_streamflow() ? record.targets.streamflow : record.targets.swe;
    if (basis.empty()) {
        throw Error(ErrorKind::InvalidData, "record has neither streamflow nor SWE to split on");
    }
    const SplitAssignment split = split_timesteps(basis);
    SpunUpRecord spun = build_spinup(record, spinup_repeats);
    PreparedRecord out;
    out.split = prepend_spinup(split, spun.spinup_length);
    out.record = std::move(spun.record);
    out.spinup_length = spun.spinup_length;
    return out;
}

}  // namespace mcp
