/**
 * @file evaluation.hpp
 * @brief KGE-family metrics, residual likelihoods and AIC, per-catchment
 *        architecture selection, catchment classification and summary tables.
 */
#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcp/data_model.hpp"

namespace mcp {

struct KgeBreakdown {
    double r = 0.0;      // linear correlation
    double alpha = 0.0;  // sigma_sim / sigma_obs
    double beta = 0.0;   // mu_sim / mu_obs
    double kge = 0.0;
    double kge_ss = 0.0;
    double alpha_star = 0.0;
    double beta_star = 0.0;
};

/// 1 - (1 - kge) / sqrt(2)
double kge_skill_score(double kge);

/// KGE from its three components.
KgeBreakdown kge_from_components(double r, double alpha, double beta);

/// Population statistics over the timesteps in `indices`. Throws EmptyMask for
/// fewer than two timesteps and DegenerateSeries for zero spread (or a zero
/// observed mean).
KgeBreakdown kge_breakdown(std::span<const double> sim, std::span<const double> obs,
                           std::span<const std::size_t> indices);

/// Mask form; timesteps with a missing observation are skipped.
KgeBreakdown kge_breakdown(std::span<const double> sim, const Observed& obs, const Mask& mask);
KgeBreakdown kge_breakdown(std::span<const double> sim, std::span<const double> obs,
                           const Mask& mask);

/// Timesteps where the mask is set and the observation is present.
std::vector<std::size_t> observed_indices(const Observed& obs, const Mask& mask);

/// KGE together with d(1 - KGE)/d sim, scattered into a vector of length
/// `sim.size()` (zero outside `indices`). At the optimum the sub-gradient 0 is
/// returned.
struct KgeGradient {
    KgeBreakdown kge;
    std::vector<double> d_loss_d_sim;
};
KgeGradient kge_with_gradient(std::span<const double> sim, std::span<const double> obs,
                              std::span<const std::size_t> indices);

enum class PdfFamily { Gaussian, Laplace, Logistic, Cauchy, Gumbel, StudentT4 };

std::string_view to_string(PdfFamily family);
PdfFamily parse_pdf_family(std::string_view name);
const std::vector<PdfFamily>& default_pdf_families();

/// Smallest admissible scale of a fitted residual density.
inline constexpr double kScaleFloor = 1e-9;

struct LikelihoodFit {
    PdfFamily family = PdfFamily::Gaussian;
    double location = 0.0;
    double scale = 1.0;
    double log_likelihood = 0.0;
};

double log_likelihood(PdfFamily family, std::span<const double> residuals, double location,
                      double scale);

/// Maximum-likelihood location/scale fit. Closed form for Gaussian and
/// Laplace, Nelder-Mead on (location, log scale) otherwise.
LikelihoodFit fit_residual_likelihood(std::span<const double> residuals, PdfFamily family);

/// Fit of the family with the highest log-likelihood.
LikelihoodFit best_residual_likelihood(std::span<const double> residuals,
                                       std::span<const PdfFamily> families);

/// -2 ll + 2 k
double aic(double log_likelihood, std::size_t k);

/// Parameters of the residual density counted in k besides the model's own.
inline constexpr std::size_t kPdfParameterCount = 2;

struct SelectionCandidate {
    std::string name;
    std::size_t model_params = 0;
    std::vector<double> q_sim;  // empty when training failed
    std::string status = "ok";
};

struct CandidateScore {
    std::string name;
    std::size_t k = 0;  // model parameters + fitted density parameters
    bool valid = false;
    std::string status;
    LikelihoodFit fit;
    double aic = 0.0;
    double kge_ss = 0.0;
};

struct SelectionReport {
    std::vector<CandidateScore> candidates;
    std::vector<PdfFamily> families;
    std::size_t winner_by_aic = 0;
    std::size_t winner_by_kge = 0;
};

/// Scores every candidate on the test mask and picks the AIC and KGE winners
/// (ties broken by smaller k, then list order). Throws NoValidCandidate when
/// no candidate can be scored.
SelectionReport select_architecture(const std::vector<SelectionCandidate>& candidates,
                                    const Observed& obs, const Mask& test_mask,
                                    std::span<const PdfFamily> families = default_pdf_families());

enum class SnowClass { Snowy, NonSnowy };
enum class ForestClass { Forest, Open };

SnowClass classify_snowy(double median_annual_max_swe, double snow_fraction);
ForestClass classify_forest(double forest_fraction);

/// Day-weighted choice between two climate codes; ties go to the second period.
std::string weighted_climate(std::string_view code_p1, std::string_view code_p2,
                             std::size_t days_in_p1, std::size_t days_in_p2);

/// Main Koppen-Geiger class name from a code ("Dfb" -> "Cold").
std::string_view climate_main_class(std::string_view code);

struct SnowSignatures {
    std::size_t water_years = 0;
    double median_annual_max = 0.0;
    double median_april1 = 0.0;
    double median_snowy_days = 0.0;
    // Day of water year (1 = Oct 1); unset when no year had snow.
    std::optional<double> median_first_day;
    std::optional<double> median_last_day;
    std::optional<double> median_season_length;
};

/// Per complete water year statistics, medianed across years. Throws
/// InsufficientData when no complete water year is covered.
SnowSignatures snow_signatures(const Observed& swe, const std::vector<Date>& dates);
SnowSignatures snow_signatures(std::span<const double> swe, const std::vector<Date>& dates);

/// Linear interpolation between order statistics (`p` in [0, 100]).
double percentile(std::vector<double> values, double p);
double median(std::vector<double> values);

struct SummaryInput {
    std::string catchment_id;
    std::string spec;
    double kge_ss = 0.0;
    std::set<std::string> region_tags;
    SnowClass snow = SnowClass::NonSnowy;
    ForestClass forest = ForestClass::Open;
    std::string climate_code;
};

struct SummaryRow {
    std::string spec;
    std::string group;
    std::string statistic;  // "p5".."p95" for the full set, "median" for groups
    std::size_t count = 0;
    std::optional<double> value;  // unset for empty groups
};

/// Group labels emitted for every spec, in output order.
const std::vector<std::string>& summary_groups();

std::vector<SummaryRow> aggregate_summary(const std::vector<SummaryInput>& results);

}  // namespace mcp
