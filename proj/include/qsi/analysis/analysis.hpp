#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsi/collider/collider.hpp"
#include "qsi/core/fringe_data.hpp"

namespace qsi::analysis
{
//! offset + amp (1 - cos(2 pi nu T + phi)) / 2
double fringe_model(double detuning_hz, double T, double offset, double amp, double phi);

//! Reduce to (-pi, pi].
double wrap_phase(double phi);

enum class FitWindow
{
    Full,
    CentralFringe  //!< |nu| <= 1 / (2T)
};

struct FitOptions
{
    FitWindow window = FitWindow::Full;
    int max_iterations = 500;
    double gradient_tolerance = 1e-9;  //!< remaining Gauss-Newton step, in standard errors
    double step_tolerance = 1e-9;      //!< last accepted step, in standard errors
};

struct FitResult
{
    double phi = 0;  //!< (-pi, pi]
    double amp = 0;  //!< >= 0
    double offset = 0;
    double phi_err = 0;
    double amp_err = 0;
    double offset_err = 0;
    std::array<double, 9> covariance{};  //!< row-major over (offset, amp, phi)
    double chi2 = 0;
    int dof = 0;
    double chi2_per_dof = 0;
    bool converged = false;
    int iterations = 0;
    bool low_contrast = false;
    std::size_t points_used = 0;
    double interrogation_time = 0;
    std::string label;
    std::vector<std::string> warnings;
};

/*!
 * Weighted Levenberg-Marquardt fit of the Ramsey fringe with T held fixed.
 *
 * Starts from phi in {0, pi/2, -pi/2, pi}; the lowest chi^2 among converged
 * starts wins. Throws FitError if no start converges.
 */
FitResult fit_fringe(FringeData const& data, FitOptions const& options = {});

//! Weighted straight line y = intercept + slope x.
struct LineFit
{
    double intercept = 0;
    double slope = 0;
    double intercept_err = 0;
    double slope_err = 0;
    double chi2 = 0;
};

LineFit fit_line(std::vector<double> const& x, std::vector<double> const& y,
                 std::vector<double> const& sigma);

//! Weighted y = slope x.
struct ProportionalFit
{
    double slope = 0;
    double slope_err = 0;
    double chi2 = 0;
    double r_squared = 0;  //!< unweighted, about the mean of y
};

ProportionalFit fit_proportional(std::vector<double> const& x, std::vector<double> const& y,
                                 std::vector<double> const& sigma);

//! Inverse-variance weighted mean.
struct PooledValue
{
    double value = 0;
    double error = 0;
    double chi2 = 0;
};

PooledValue pool(std::vector<double> const& y, std::vector<double> const& sigma);

//! Flat (1 parameter) vs linear (2 parameters) via delta chi^2 with one dof.
struct ModelComparison
{
    double chi2_flat = 0;
    double chi2_linear = 0;
    double delta_chi2 = 0;
    double p_value = 1;  //!< P(delta chi^2 >= observed | flat)
    double chi2_proportional = 0;  //!< phi = c x through the origin
};

enum class CampaignParameter
{
    InterrogationTime,
    Density
};

std::string to_string(CampaignParameter p);

struct CampaignPoint
{
    double value = 0;
    bool rejected = false;
    std::string note;
    FitResult fit;
};

struct CampaignResult
{
    CampaignParameter parameter = CampaignParameter::InterrogationTime;
    std::vector<CampaignPoint> points;
    PooledValue pooled;
    LineFit phase_line;
    ModelComparison comparison;
    //! phi = c x; for T campaigns c / (2 pi) is the equivalent frequency shift
    ProportionalFit phase_proportional;
    double equivalent_shift_hz = 0;
    double equivalent_shift_err_hz = 0;
    //! amplitude vs density through the origin (density campaigns only)
    ProportionalFit amplitude;
    std::vector<double> amplitude_ratios;
    std::vector<std::string> warnings;
};

struct CampaignOptions
{
    bool noise = true;
    FitOptions fit;
};

//! Configure the channel tables so that delta3 - delta4 = phi (s-wave only).
void inject_phase(collider::ExperimentSetup& setup, double phi);
//! Equal channel tables plus a frequency shift acting on the scattered atoms.
void inject_frequency_shift(collider::ExperimentSetup& setup, double delta_nu_hz);

//! Seed of point `index` of a campaign.
std::uint64_t campaign_seed(std::uint64_t seed, std::size_t index);

/*!
 * End-to-end synthesis and fit at each T; both clouds are launched at the
 * velocity giving T with the launch spacing unchanged.
 */
CampaignResult campaign_phase_vs_T(collider::ExperimentSetup const& base,
                                   std::vector<double> const& T_values, std::uint64_t seed,
                                   CampaignOptions const& options = {});

//! Cloud 1 peak density and atom number scaled together; densities in 1/m^3.
CampaignResult campaign_phase_vs_density(collider::ExperimentSetup const& base,
                                         std::vector<double> const& densities,
                                         std::uint64_t seed,
                                         CampaignOptions const& options = {});

//! sigma_phi / k: scattering-length uncertainty for delta = -k a [m].
double sensitivity_to_scattering_length(double sigma_phi, double k);

nlohmann::ordered_json to_json(FitResult const& fit);
nlohmann::ordered_json to_json(CampaignResult const& result);

//! Per-point table: value,phi_rad,phi_err_rad,amp,amp_err,offset,chi2_per_dof,rejected
void write_campaign_points_csv(std::ostream& os, CampaignResult const& result);

/*!
 * Read a fringe CSV with a header naming detuning_hz and one of counts, y,
 * p3; optional sigma and class columns. Lines starting with '#' are skipped.
 * Rows are kept if `label` is empty or matches the class column.
 */
FringeData read_fringe_csv(std::istream& is, double T, std::string const& label = {});
}  // namespace qsi::analysis
