#include "mcp/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>

#include "mcp/error.hpp"

namespace mcp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Moments {
    double n = 0.0;
    double mean_s = 0.0, mean_o = 0.0;
    double sd_s = 0.0, sd_o = 0.0;
    double cov = 0.0;
};

Moments moments(std::span<const double> sim, std::span<const double> obs,
                std::span<const std::size_t> idx) {
    if (idx.size() < 2) {
        throw Error(ErrorKind::EmptyMask, "KGE needs at least two masked timesteps, got " +
                                              std::to_string(idx.size()));
    }
    Moments m;
    m.n = static_cast<double>(idx.size());
    for (auto t : idx) {
        m.mean_s += sim[t];
        m.mean_o += obs[t];
    }
    m.mean_s /= m.n;
    m.mean_o /= m.n;
    double vs = 0.0, vo = 0.0, c = 0.0;
    for (auto t : idx) {
        const double ds = sim[t] - m.mean_s;
        const double dobs = obs[t] - m.mean_o;
        vs += ds * ds;
        vo += dobs * dobs;
        c += ds * dobs;
    }
    m.sd_s = std::sqrt(vs / m.n);
    m.sd_o = std::sqrt(vo / m.n);
    m.cov = c / m.n;
    if (!(m.sd_o > 0.0)) throw Error(ErrorKind::DegenerateSeries, "observed series has zero variance");
    if (!(m.sd_s > 0.0)) throw Error(ErrorKind::DegenerateSeries, "simulated series has zero variance");
    if (m.mean_o == 0.0) throw Error(ErrorKind::DegenerateSeries, "observed series has zero mean");
    if (!std::isfinite(m.sd_s) || !std::isfinite(m.mean_s)) {
        throw Error(ErrorKind::NumericalDivergence, "simulated series is not finite");
    }
    return m;
}

double log_density(PdfFamily family, double z) {
    using std::numbers::pi;
    switch (family) {
        case PdfFamily::Gaussian: return -0.5 * std::log(2.0 * pi) - 0.5 * z * z;
        case PdfFamily::Laplace: return -std::log(2.0) - std::abs(z);
        case PdfFamily::Logistic: {
            const double a = std::abs(z);
            return -a - 2.0 * std::log1p(std::exp(-a));
        }
        case PdfFamily::Cauchy: return -std::log(pi) - std::log1p(z * z);
        case PdfFamily::Gumbel: return -(z + std::exp(-z));
        case PdfFamily::StudentT4: {
            constexpr double nu = 4.0;
            const double c = std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0) -
                             0.5 * std::log(nu * pi);
            return c - 0.5 * (nu + 1.0) * std::log1p(z * z / nu);
        }
    }
    return -kInf;
}

/// Minimal Nelder-Mead for two variables.
std::array<double, 2> nelder_mead(const std::function<double(const std::array<double, 2>&)>& f,
                                  std::array<double, 2> start, std::array<double, 2> step) {
    using Point = std::array<double, 2>;
    std::array<Point, 3> simplex = {start, Point{start[0] + step[0], start[1]},
                                    Point{start[0], start[1] + step[1]}};
    std::array<double, 3> value{};
    for (int i = 0; i < 3; ++i) value[i] = f(simplex[i]);

    auto combine = [](const Point& a, const Point& b, double w) {
        return Point{a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])};
    };

    for (int iter = 0; iter < 4000; ++iter) {
        std::array<int, 3> order = {0, 1, 2};
        std::sort(order.begin(), order.end(), [&](int a, int b) { return value[a] < value[b]; });
        const Point best = simplex[order[0]], mid = simplex[order[1]], worst = simplex[order[2]];
        const double fb = value[order[0]], fm = value[order[1]], fw = value[order[2]];

        const double spread = std::abs(fw - fb);
        const double size = std::max({std::abs(worst[0] - best[0]), std::abs(worst[1] - best[1]),
                                      std::abs(mid[0] - best[0]), std::abs(mid[1] - best[1])});
        if (std::isfinite(fb) && spread <= 1e-13 * (1.0 + std::abs(fb)) && size < 1e-10) break;

        const Point centroid = {(best[0] + mid[0]) / 2.0, (best[1] + mid[1]) / 2.0};
        const Point reflected = combine(centroid, worst, -1.0);
        const double fr = f(reflected);
        Point next = reflected;
        double fn = fr;
        if (fr < fb) {
            const Point expanded = combine(centroid, worst, -2.0);
            const double fe = f(expanded);
            if (fe < fr) {
                next = expanded;
                fn = fe;
            }
        } else if (!(fr < fm)) {
            const bool outside = fr < fw;
            const Point contracted = combine(centroid, outside ? reflected : worst, 0.5);
            const double fc = f(contracted);
            if (fc < (outside ? fr : fw)) {
                next = contracted;
                fn = fc;
            } else {
                // shrink towards the best vertex
                for (int i : {order[1], order[2]}) {
                    simplex[i] = combine(best, simplex[i], 0.5);
                    value[i] = f(simplex[i]);
                }
                continue;
            }
        }
        simplex[order[2]] = next;
        value[order[2]] = fn;
    }
    const auto best = std::min_element(value.begin(), value.end()) - value.begin();
    return simplex[static_cast<std::size_t>(best)];
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

int water_year_of(Date d) {
    using namespace std::chrono;
    const year_month_day ymd{d};
    return static_cast<int>(ymd.year()) + (ymd.month() >= October ? 1 : 0);
}

}  // namespace

double kge_skill_score(double kge) { return 1.0 - (1.0 - kge) / std::numbers::sqrt2; }

KgeBreakdown kge_from_components(double r, double alpha, double beta) {
    KgeBreakdown k;
    k.r = r;
    k.alpha = alpha;
    k.beta = beta;
    k.kge = 1.0 - std::sqrt((r - 1.0) * (r - 1.0) + (beta - 1.0) * (beta - 1.0) +
                            (alpha - 1.0) * (alpha - 1.0));
    k.kge_ss = kge_skill_score(k.kge);
    k.alpha_star = 1.0 - std::abs(1.0 - alpha);
    k.beta_star = 1.0 - std::abs(1.0 - beta);
    return k;
}

KgeBreakdown kge_breakdown(std::span<const double> sim, std::span<const double> obs,
                           std::span<const std::size_t> indices) {
    const Moments m = moments(sim, obs, indices);
    return kge_from_components(m.cov / (m.sd_s * m.sd_o), m.sd_s / m.sd_o, m.mean_s / m.mean_o);
}

std::vector<std::size_t> observed_indices(const Observed& obs, const Mask& mask) {
    std::vector<std::size_t> idx;
    const std::size_t n = std::min(obs.size(), mask.size());
    for (std::size_t t = 0; t < n; ++t) {
        if (mask[t] && obs[t]) idx.push_back(t);
    }
    return idx;
}

KgeBreakdown kge_breakdown(std::span<const double> sim, const Observed& obs, const Mask& mask) {
    const auto idx = observed_indices(obs, mask);
    std::vector<double> dense(obs.size(), 0.0);
    for (auto t : idx) dense[t] = *obs[t];
    return kge_breakdown(sim, dense, idx);
}

KgeBreakdown kge_breakdown(std::span<const double> sim, std::span<const double> obs,
                           const Mask& mask) {
    std::vector<std::size_t> idx;
    for (std::size_t t = 0; t < mask.size(); ++t) {
        if (mask[t]) idx.push_back(t);
    }
    return kge_breakdown(sim, obs, idx);
}

KgeGradient kge_with_gradient(std::span<const double> sim, std::span<const double> obs,
                              std::span<const std::size_t> indices) {
    const Moments m = moments(sim, obs, indices);
    KgeGradient out;
    const double r = m.cov / (m.sd_s * m.sd_o);
    const double alpha = m.sd_s / m.sd_o;
    const double beta = m.mean_s / m.mean_o;
    out.kge = kge_from_components(r, alpha, beta);
    out.d_loss_d_sim.assign(sim.size(), 0.0);

    const double distance = 1.0 - out.kge.kge;
    if (!(distance > 0.0)) return out;

    // loss = sqrt((r-1)^2 + (alpha-1)^2 + (beta-1)^2)
    const double wr = (r - 1.0) / distance;
    const double wa = (alpha - 1.0) / distance;
    const double wb = (beta - 1.0) / distance;
    const double n = m.n;
    for (auto t : indices) {
        const double ds = sim[t] - m.mean_s;
        const double dobs = obs[t] - m.mean_o;
        const double d_sd = ds / (n * m.sd_s);
        const double d_r = dobs / (n * m.sd_s * m.sd_o) - r * ds / (n * m.sd_s * m.sd_s);
        const double d_alpha = d_sd / m.sd_o;
        const double d_beta = 1.0 / (n * m.mean_o);
        out.d_loss_d_sim[t] = wr * d_r + wa * d_alpha + wb * d_beta;
    }
    return out;
}

std::string_view to_string(PdfFamily family) {
    switch (family) {
        case PdfFamily::Gaussian: return "gaussian";
        case PdfFamily::Laplace: return "laplace";
        case PdfFamily::Logistic: return "logistic";
        case PdfFamily::Cauchy: return "cauchy";
        case PdfFamily::Gumbel: return "gumbel";
        case PdfFamily::StudentT4: return "student_t4";
    }
    return "gaussian";
}

PdfFamily parse_pdf_family(std::string_view name) {
    for (auto f : default_pdf_families()) {
        if (to_string(f) == name) return f;
    }
    throw Error(ErrorKind::ConfigError, "unknown PDF family '" + std::string(name) + "'");
}

const std::vector<PdfFamily>& default_pdf_families() {
    static const std::vector<PdfFamily> families = {PdfFamily::Gaussian, PdfFamily::Laplace,
                                                    PdfFamily::Logistic, PdfFamily::Cauchy,
                                                    PdfFamily::Gumbel,   PdfFamily::StudentT4};
    return families;
}

double log_likelihood(PdfFamily family, std::span<const double> residuals, double location,
                      double scale) {
    scale = std::max(scale, kScaleFloor);
    double ll = -static_cast<double>(residuals.size()) * std::log(scale);
    for (double r : residuals) ll += log_density(family, (r - location) / scale);
    return std::isnan(ll) ? -kInf : ll;
}

LikelihoodFit fit_residual_likelihood(std::span<const double> residuals, PdfFamily family) {
    if (residuals.size() < 2) {
        throw Error(ErrorKind::InsufficientData, "likelihood fit needs at least two residuals");
    }
    const double n = static_cast<double>(residuals.size());
    std::vector<double> sorted(residuals.begin(), residuals.end());
    std::sort(sorted.begin(), sorted.end());
    const double med = quantile_sorted(sorted, 0.5);

    LikelihoodFit fit;
    fit.family = family;
    if (family == PdfFamily::Gaussian) {
        double mean = 0.0;
        for (double r : residuals) mean += r;
        mean /= n;
        double ss = 0.0;
        for (double r : residuals) ss += (r - mean) * (r - mean);
        fit.location = mean;
        fit.scale = std::max(std::sqrt(ss / n), kScaleFloor);
    } else if (family == PdfFamily::Laplace) {
        double abs_dev = 0.0;
        for (double r : residuals) abs_dev += std::abs(r - med);
        fit.location = med;
        fit.scale = std::max(abs_dev / n, kScaleFloor);
    } else {
        const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
        double mad = 0.0;
        for (double r : residuals) mad += std::abs(r - med);
        mad /= n;
        const double scale0 = std::max({iqr / 2.0, mad, kScaleFloor});
        auto objective = [&](const std::array<double, 2>& v) {
            return -log_likelihood(family, residuals, v[0], std::exp(v[1]));
        };
        std::array<double, 2> x = {med, std::log(scale0)};
        for (int pass = 0; pass < 3; ++pass) {
            const double spread = std::max(std::exp(x[1]), kScaleFloor);
            x = nelder_mead(objective, x, {spread, 0.5});
        }
        fit.location = x[0];
        fit.scale = std::max(std::exp(x[1]), kScaleFloor);
    }
    fit.log_likelihood = log_likelihood(family, residuals, fit.location, fit.scale);
    return fit;
}

LikelihoodFit best_residual_likelihood(std::span<const double> residuals,
                                       std::span<const PdfFamily> families) {
    if (families.empty()) throw Error(ErrorKind::ConfigError, "no PDF families configured");
    LikelihoodFit best;
    best.log_likelihood = -kInf;
    bool first = true;
    for (auto family : families) {
        const LikelihoodFit fit = fit_residual_likelihood(residuals, family);
        if (first || fit.log_likelihood > best.log_likelihood) best = fit;
        first = false;
    }
    return best;
}

double aic(double log_likelihood, std::size_t k) {
    return -2.0 * log_likelihood + 2.0 * static_cast<double>(k);
}

SelectionReport select_architecture(const std::vector<SelectionCandidate>& candidates,
                                    const Observed& obs, const Mask& test_mask,
                                    std::span<const PdfFamily> families) {
    SelectionReport report;
    report.families.assign(families.begin(), families.end());
    const auto idx = observed_indices(obs, test_mask);
    std::vector<double> dense(obs.size(), 0.0);
    for (auto t : idx) dense[t] = *obs[t];

    std::optional<std::size_t> best_aic, best_kge;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const auto& cand = candidates[c];
        CandidateScore score;
        score.name = cand.name;
        score.k = cand.model_params + kPdfParameterCount;
        score.status = cand.status;
        if (!cand.q_sim.empty() && cand.status == "ok") {
            try {
                if (cand.q_sim.size() != obs.size()) {
                    throw Error(ErrorKind::InvalidData, "simulation length mismatch");
                }
                std::vector<double> residuals;
                residuals.reserve(idx.size());
                for (auto t : idx) residuals.push_back(dense[t] - cand.q_sim[t]);
                score.fit = best_residual_likelihood(residuals, families);
                score.aic = aic(score.fit.log_likelihood, score.k);
                score.kge_ss = kge_breakdown(cand.q_sim, dense, idx).kge_ss;
                score.valid = std::isfinite(score.aic) && std::isfinite(score.kge_ss);
                if (!score.valid) score.status = "non-finite score";
            } catch (const Error& e) {
                score.valid = false;
                score.status = std::string(to_string(e.kind()));
            }
        }
        report.candidates.push_back(score);
        if (!score.valid) continue;
        auto better_aic = [&](const CandidateScore& a, const CandidateScore& b) {
            return a.aic < b.aic || (a.aic == b.aic && a.k < b.k);
        };
        auto better_kge = [&](const CandidateScore& a, const CandidateScore& b) {
            return a.kge_ss > b.kge_ss || (a.kge_ss == b.kge_ss && a.k < b.k);
        };
        if (!best_aic || better_aic(score, report.candidates[*best_aic])) best_aic = c;
        if (!best_kge || better_kge(score, report.candidates[*best_kge])) best_kge = c;
    }
    if (!best_aic) throw Error(ErrorKind::NoValidCandidate, "no candidate could be scored");
    report.winner_by_aic = *best_aic;
    report.winner_by_kge = *best_kge;
    return report;
}

SnowClass classify_snowy(double median_annual_max_swe, double snow_fraction) {
    return (median_annual_max_swe > 3.0 && snow_fraction > 0.05) ? SnowClass::Snowy
                                                                 : SnowClass::NonSnowy;
}

ForestClass classify_forest(double forest_fraction) {
    return forest_fraction > 0.5 ? ForestClass::Forest : ForestClass::Open;
}

std::string weighted_climate(std::string_view code_p1, std::string_view code_p2,
                             std::size_t days_in_p1, std::size_t days_in_p2) {
    if (days_in_p1 == 0 && days_in_p2 == 0) {
        throw Error(ErrorKind::InvalidData, "climate weighting needs a non-zero day count");
    }
    if (code_p1 == code_p2) return std::string(code_p1);
    return std::string(days_in_p1 > days_in_p2 ? code_p1 : code_p2);
}

std::string_view climate_main_class(std::string_view code) {
    if (code.empty()) return "";
    switch (code.front()) {
        case 'A': return "Tropical";
        case 'B': return "Arid";
        case 'C': return "Temperate";
        case 'D': return "Cold";
        case 'E': return "Polar";
        default: return "";
    }
}

SnowSignatures snow_signatures(const Observed& swe, const std::vector<Date>& dates) {
    using namespace std::chrono;
    if (swe.size() != dates.size()) {
        throw Error(ErrorKind::InvalidData, "SWE and dates differ in length");
    }
    struct YearData {
        std::size_t days = 0;
        bool complete = true;
        double max = 0.0;
        double april1 = 0.0;
        std::size_t snowy = 0;
        std::optional<std::size_t> first, last;
    };
    std::map<int, YearData> years;
    for (std::size_t t = 0; t < dates.size(); ++t) {
        const int wy = water_year_of(dates[t]);
        auto& y = years[wy];
        ++y.days;
        if (!swe[t]) {
            y.complete = false;
            continue;
        }
        const double v = *swe[t];
        const Date start = sys_days{year{wy - 1} / October / 1};
        const auto doy = static_cast<std::size_t>((dates[t] - start).count()) + 1;
        y.max = std::max(y.max, v);
        if (year_month_day{dates[t]}.month() == April && year_month_day{dates[t]}.day() == day{1}) {
            y.april1 = v;
        }
        if (v > 0.0) {
            ++y.snowy;
            if (!y.first) y.first = doy;
            y.last = doy;
        }
    }

    std::vector<double> maxima, april, snowy, first, last, length;
    for (const auto& [wy, y] : years) {
        const auto span_days =
            (sys_days{year{wy} / October / 1} - sys_days{year{wy - 1} / October / 1}).count();
        if (!y.complete || static_cast<long>(y.days) != span_days) continue;
        maxima.push_back(y.max);
        april.push_back(y.april1);
        snowy.push_back(static_cast<double>(y.snowy));
        if (y.first) {
            first.push_back(static_cast<double>(*y.first));
            last.push_back(static_cast<double>(*y.last));
            length.push_back(static_cast<double>(*y.last - *y.first + 1));
        }
    }
    if (maxima.empty()) {
        throw Error(ErrorKind::InsufficientData, "no complete water year in the SWE record");
    }
    SnowSignatures s;
    s.water_years = maxima.size();
    s.median_annual_max = median(maxima);
    s.median_april1 = median(april);
    s.median_snowy_days = median(snowy);
    if (!first.empty()) {
        s.median_first_day = median(first);
        s.median_last_day = median(last);
        s.median_season_length = median(length);
    }
    return s;
}

SnowSignatures snow_signatures(std::span<const double> swe, const std::vector<Date>& dates) {
    return snow_signatures(Observed(swe.begin(), swe.end()), dates);
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw Error(ErrorKind::InsufficientData, "percentile of an empty set");
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, std::clamp(p, 0.0, 100.0) / 100.0);
}

double median(std::vector<double> values) { return percentile(std::move(values), 50.0); }

const std::vector<std::string>& summary_groups() {
    static const std::vector<std::string> groups = {
        "AM",     "RM",   "CRB",      "SN",   "CC",       "East",      "West", "Snowy",
        "NonSnowy", "Forest", "Open", "Tropical", "Arid", "Temperate", "Cold", "Polar"};
    return groups;
}

std::vector<SummaryRow> aggregate_summary(const std::vector<SummaryInput>& results) {
    std::vector<std::string> specs;
    for (const auto& r : results) {
        if (std::find(specs.begin(), specs.end(), r.spec) == specs.end()) specs.push_back(r.spec);
    }

    auto in_group = [](const SummaryInput& r, const std::string& g) {
        if (g == "Snowy") return r.snow == SnowClass::Snowy;
        if (g == "NonSnowy") return r.snow == SnowClass::NonSnowy;
        if (g == "Forest") return r.forest == ForestClass::Forest;
        if (g == "Open") return r.forest == ForestClass::Open;
        if (g == "Tropical" || g == "Arid" || g == "Temperate" || g == "Cold" || g == "Polar") {
            return climate_main_class(r.climate_code) == g;
        }
        return r.region_tags.count(g) > 0;
    };

    std::vector<SummaryRow> rows;
    for (const auto& spec : specs) {
        std::vector<double> all;
        for (const auto& r : results) {
            if (r.spec == spec) all.push_back(r.kge_ss);
        }
        for (int p : {5, 25, 50, 75, 95}) {
            rows.push_back({spec, "All", "p" + std::to_string(p), all.size(), percentile(all, p)});
        }
        for (const auto& g : summary_groups()) {
            std::vector<double> members;
            for (const auto& r : results) {
                if (r.spec == spec && in_group(r, g)) members.push_back(r.kge_ss);
            }
            SummaryRow row{spec, g, "median", members.size(), std::nullopt};
            if (!members.empty()) row.value = median(members);
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace mcp
