#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "qsi/analysis/analysis.hpp"
#include "qsi/core/constants.hpp"
#include "qsi/core/errors.hpp"
#include "qsi/core/rng.hpp"
#include "qsi/fountain/fountain.hpp"

namespace qsi::analysis
{
namespace
{
namespace c = qsi::constants;

constexpr double reference_delta4 = 0.741;

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void check_sizes(std::vector<double> const& x, std::vector<double> const& y,
                 std::vector<double> const& sigma, std::size_t min_points, char const* who)
{
    if (x.size() != y.size() || x.size() != sigma.size())
        throw ParameterError(std::string(who) + ": size mismatch");
    if (x.size() < min_points)
        throw ParameterError(std::string(who) + ": too few points");
    for (double s : sigma)
        if (!(s > 0) || !std::isfinite(s))
            throw ParameterError(std::string(who) + ": sigma must be positive");
}

void finish(CampaignResult& res)
{
    std::vector<double> x, phi, phi_err;
    for (auto const& pt : res.points)
    {
        if (pt.rejected)
            continue;
        x.push_back(pt.value);
        phi.push_back(pt.fit.phi);
        phi_err.push_back(pt.fit.phi_err);
        if (pt.fit.low_contrast)
            res.warnings.push_back("low contrast at " + fmt(pt.value));
    }
    if (x.size() < 3)
        throw ParameterError("campaign: fewer than 3 usable points");
    res.pooled = pool(phi, phi_err);
    res.phase_line = fit_line(x, phi, phi_err);
    res.phase_proportional = fit_proportional(x, phi, phi_err);
    auto& mc = res.comparison;
    mc.chi2_flat = res.pooled.chi2;
    mc.chi2_linear = res.phase_line.chi2;
    mc.delta_chi2 = std::max(0.0, mc.chi2_flat - mc.chi2_linear);
    mc.p_value = std::erfc(std::sqrt(mc.delta_chi2 / 2));
    mc.chi2_proportional = res.phase_proportional.chi2;
}

CampaignPoint run_point(collider::ExperimentSetup const& setup, double value,
                        std::uint64_t seed, std::size_t index, CampaignOptions const& opt)
{
    CampaignPoint pt;
    pt.value = value;
    auto const expected = collider::expected_fringes(setup, seed);
    auto const set = collider::realize_fringes(expected, campaign_seed(seed, index), opt.noise);
    pt.fit = fit_fringe(set.scattered, opt.fit);
    for (auto const& w : set.warnings)
        pt.fit.warnings.push_back(w);
    return pt;
}
}  // namespace

//---------------------------------------------------------------------------//
LineFit fit_line(std::vector<double> const& x, std::vector<double> const& y,
                 std::vector<double> const& sigma)
{
    check_sizes(x, y, sigma, 2, "fit_line");
    double sw = 0, swx = 0, swy = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        double const w = 1 / (sigma[i] * sigma[i]);
        sw += w;
        swx += w * x[i];
        swy += w * y[i];
    }
    double const xm = swx / sw;
    double const ym = swy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        double const w = 1 / (sigma[i] * sigma[i]);
        sxx += w * (x[i] - xm) * (x[i] - xm);
        sxy += w * (x[i] - xm) * (y[i] - ym);
    }
    if (!(sxx > 0))
        throw ParameterError("fit_line: abscissae must not all coincide");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = ym - f.slope * xm;
    f.slope_err = 1 / std::sqrt(sxx);
    f.intercept_err = std::sqrt(1 / sw + xm * xm / sxx);
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        double const r = (y[i] - f.intercept - f.slope * x[i]) / sigma[i];
        f.chi2 += r * r;
    }
    return f;
}

ProportionalFit fit_proportional(std::vector<double> const& x, std::vector<double> const& y,
                                 std::vector<double> const& sigma)
{
    check_sizes(x, y, sigma, 1, "fit_proportional");
    double sxx = 0, sxy = 0, ym = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        double const w = 1 / (sigma[i] * sigma[i]);
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
        ym += y[i];
    }
    if (!(sxx > 0))
        throw ParameterError("fit_proportional: all abscissae are zero");
    ym /= static_cast<double>(y.size());
    ProportionalFit f;
    f.slope = sxy / sxx;
    f.slope_err = 1 / std::sqrt(sxx);
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        double const r = y[i] - f.slope * x[i];
        f.chi2 += r * r / (sigma[i] * sigma[i]);
        ss_res += r * r;
        ss_tot += (y[i] - ym) * (y[i] - ym);
    }
    f.r_squared = ss_tot > 0 ? 1 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);
    return f;
}

PooledValue pool(std::vector<double> const& y, std::vector<double> const& sigma)
{
    check_sizes(y, y, sigma, 1, "pool");
    double sw = 0, swy = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
    {
        double const w = 1 / (sigma[i] * sigma[i]);
        sw += w;
        swy += w * y[i];
    }
    PooledValue p;
    p.value = swy / sw;
    p.error = 1 / std::sqrt(sw);
    for (std::size_t i = 0; i < y.size(); ++i)
        p.chi2 += (y[i] - p.value) * (y[i] - p.value) / (sigma[i] * sigma[i]);
    return p;
}

std::string to_string(CampaignParameter p)
{
    return p == CampaignParameter::InterrogationTime ? "T" : "density";
}

void inject_phase(collider::ExperimentSetup& setup, double phi)
{
    setup.table3 = scatter::PhaseShiftTable::constant({reference_delta4 + phi});
    setup.table4 = scatter::PhaseShiftTable::constant({reference_delta4});
    setup.ramsey.scattered_frequency_shift_hz = 0;
}

void inject_frequency_shift(collider::ExperimentSetup& setup, double delta_nu_hz)
{
    setup.table3 = scatter::PhaseShiftTable::constant({reference_delta4});
    setup.table4 = scatter::PhaseShiftTable::constant({reference_delta4});
    setup.ramsey.scattered_frequency_shift_hz = delta_nu_hz;
}

std::uint64_t campaign_seed(std::uint64_t seed, std::size_t index)
{
    return mix_seed(seed, 0x9e3779b97f4a7c15ull + index);
}

CampaignResult campaign_phase_vs_T(collider::ExperimentSetup const& base,
                                   std::vector<double> const& T_values, std::uint64_t seed,
                                   CampaignOptions const& options)
{
    if (T_values.size() < 3)
        throw ParameterError("campaign_phase_vs_T: need at least 3 values of T");
    CampaignResult res;
    res.parameter = CampaignParameter::InterrogationTime;
    auto const g0 = fountain::collision_geometry(base.plan);
    double const base_delay = g0.t_detect - g0.t_dn2;
    for (std::size_t i = 0; i < T_values.size(); ++i)
    {
        double const T = T_values[i];
        if (!(T > 0) || !std::isfinite(T))
            throw ParameterError("campaign_phase_vs_T: T must be positive");
        auto setup = base;
        double const v = fountain::launch_velocity_for_interrogation_time(T, setup.plan.z_cavity,
                                                                          setup.plan.g);
        setup.plan.v_launch1 = v;
        setup.plan.v_launch2 = v;
        // detection follows the second cavity passage by the same delay as in the base plan
        auto const& p = setup.plan;
        double const t_dn2 = p.dt_launch + (v + std::sqrt(v * v - 2 * p.g * p.z_cavity)) / p.g;
        double const t_det = t_dn2 + base_delay;
        setup.plan.z_detect = 0.5
                              * (fountain::ballistic_height(v, 0, p.g, t_det)
                                 + fountain::ballistic_height(v, p.dt_launch, p.g, t_det));
        res.points.push_back(run_point(setup, T, seed, i, options));
    }
    finish(res);
    res.equivalent_shift_hz = res.phase_proportional.slope / c::two_pi;
    res.equivalent_shift_err_hz = res.phase_proportional.slope_err / c::two_pi;
    return res;
}

CampaignResult campaign_phase_vs_density(collider::ExperimentSetup const& base,
                                         std::vector<double> const& densities,
                                         std::uint64_t seed, CampaignOptions const& options)
{
    if (densities.size() < 3)
        throw ParameterError("campaign_phase_vs_density: need at least 3 densities");
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (double n : densities)
    {
        if (!(n >= 0) || !std::isfinite(n))
            throw ParameterError("campaign_phase_vs_density: densities must be >= 0");
        if (n > 0)
        {
            lo = std::min(lo, n);
            hi = std::max(hi, n);
        }
    }
    if (!(hi >= 4 * lo))
        throw ParameterError("campaign_phase_vs_density: densities must span at least a factor 4");
    if (!(base.cloud1.peak_density > 0))
        throw ParameterError("campaign_phase_vs_density: base Cloud 1 density must be positive");

    CampaignResult res;
    res.parameter = CampaignParameter::Density;
    for (std::size_t i = 0; i < densities.size(); ++i)
    {
        double const n = densities[i];
        if (n == 0)
        {
            CampaignPoint pt;
            pt.value = n;
            pt.rejected = true;
            pt.note = "zero density: no scattered signal";
            res.points.push_back(pt);
            res.warnings.push_back("rejected point at zero density");
            continue;
        }
        auto setup = base;
        double const scale = n / base.cloud1.peak_density;
        setup.cloud1.peak_density = n;
        setup.cloud1.atom_number *= scale;
        res.points.push_back(run_point(setup, n, seed, i, options));
    }
    finish(res);

    std::vector<double> x, amp, amp_err;
    for (auto const& pt : res.points)
    {
        if (pt.rejected)
            continue;
        x.push_back(pt.value);
        amp.push_back(pt.fit.amp);
        amp_err.push_back(pt.fit.amp_err);
    }
    res.amplitude = fit_proportional(x, amp, amp_err);
    for (double a : amp)
        res.amplitude_ratios.push_back(a / amp.front());
    return res;
}

double sensitivity_to_scattering_length(double sigma_phi, double k)
{
    if (!(k > 0))
        throw ParameterError("sensitivity_to_scattering_length: k must be positive");
    if (!(sigma_phi >= 0))
        throw ParameterError("sensitivity_to_scattering_length: sigma_phi must be >= 0");
    return sigma_phi / k;
}

//---------------------------------------------------------------------------//
nlohmann::ordered_json to_json(FitResult const& f)
{
    nlohmann::ordered_json j;
    j["phi_rad"] = f.phi;
    j["phi_err_rad"] = f.phi_err;
    j["amp"] = f.amp;
    j["amp_err"] = f.amp_err;
    j["offset"] = f.offset;
    j["offset_err"] = f.offset_err;
    j["chi2"] = f.chi2;
    j["dof"] = f.dof;
    j["chi2_per_dof"] = f.chi2_per_dof;
    j["converged"] = f.converged;
    j["iterations"] = f.iterations;
    j["low_contrast"] = f.low_contrast;
    j["points"] = f.points_used;
    j["T_s"] = f.interrogation_time;
    j["label"] = f.label;
    auto cov = nlohmann::ordered_json::array();
    for (int i = 0; i < 3; ++i)
        cov.push_back({f.covariance[3 * i], f.covariance[3 * i + 1], f.covariance[3 * i + 2]});
    j["covariance_offset_amp_phi"] = cov;
    j["warnings"] = f.warnings;
    return j;
}

nlohmann::ordered_json to_json(CampaignResult const& r)
{
    nlohmann::ordered_json j;
    j["parameter"] = to_string(r.parameter);
    auto pts = nlohmann::ordered_json::array();
    for (auto const& p : r.points)
    {
        nlohmann::ordered_json e;
        e["value"] = p.value;
        e["rejected"] = p.rejected;
        if (!p.note.empty())
            e["note"] = p.note;
        if (!p.rejected)
            e["fit"] = to_json(p.fit);
        pts.push_back(e);
    }
    j["points"] = pts;
    j["pooled_phi_rad"] = r.pooled.value;
    j["pooled_phi_err_rad"] = r.pooled.error;
    j["pooled_chi2"] = r.pooled.chi2;
    j["slope"] = r.phase_line.slope;
    j["slope_err"] = r.phase_line.slope_err;
    j["intercept"] = r.phase_line.intercept;
    j["intercept_err"] = r.phase_line.intercept_err;
    j["model_comparison"] = {{"chi2_flat", r.comparison.chi2_flat},
                             {"chi2_linear", r.comparison.chi2_linear},
                             {"delta_chi2", r.comparison.delta_chi2},
                             {"p_value", r.comparison.p_value},
                             {"chi2_proportional", r.comparison.chi2_proportional}};
    j["proportional_slope"] = r.phase_proportional.slope;
    j["proportional_slope_err"] = r.phase_proportional.slope_err;
    if (r.parameter == CampaignParameter::InterrogationTime)
    {
        j["equivalent_shift_hz"] = r.equivalent_shift_hz;
        j["equivalent_shift_err_hz"] = r.equivalent_shift_err_hz;
    }
    else
    {
        j["amplitude"] = {{"slope", r.amplitude.slope},
                          {"slope_err", r.amplitude.slope_err},
                          {"chi2", r.amplitude.chi2},
                          {"r_squared", r.amplitude.r_squared},
                          {"ratios", r.amplitude_ratios}};
    }
    j["warnings"] = r.warnings;
    return j;
}

void write_campaign_points_csv(std::ostream& os, CampaignResult const& r)
{
    os << "value,phi_rad,phi_err_rad,amp,amp_err,offset,chi2_per_dof,rejected\n";
    for (auto const& p : r.points)
    {
        os << fmt(p.value) << ',';
        if (p.rejected)
            os << "nan,nan,nan,nan,nan,nan,1\n";
        else
            os << fmt(p.fit.phi) << ',' << fmt(p.fit.phi_err) << ',' << fmt(p.fit.amp) << ','
               << fmt(p.fit.amp_err) << ',' << fmt(p.fit.offset) << ','
               << fmt(p.fit.chi2_per_dof) << ",0\n";
    }
}

//---------------------------------------------------------------------------//
FringeData read_fringe_csv(std::istream& is, double T, std::string const& label)
{
    auto split = [](std::string const& line) {
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
        {
            auto const b = cell.find_first_not_of(" \t\r");
            auto const e = cell.find_last_not_of(" \t\r");
            out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
        }
        return out;
    };

    FringeData data;
    data.interrogation_time = T;
    data.label = label;
    std::string line;
    std::vector<std::string> header;
    int col_nu = -1, col_y = -1, col_sigma = -1, col_class = -1;
    std::size_t line_no = 0;
    while (std::getline(is, line))
    {
        ++line_no;
        if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        auto const cells = split(line);
        if (header.empty())
        {
            header = cells;
            for (int i = 0; i < static_cast<int>(cells.size()); ++i)
            {
                auto const& h = cells[i];
                if (h == "detuning_hz")
                    col_nu = i;
                else if ((h == "counts" || h == "y" || h == "p3") && col_y < 0)
                    col_y = i;
                else if (h == "sigma")
                    col_sigma = i;
                else if (h == "class")
                    col_class = i;
            }
            if (col_nu < 0 || col_y < 0)
                throw ParameterError("fringe csv: header needs detuning_hz and counts, y or p3");
            continue;
        }
        if (cells.size() != header.size())
            throw ParameterError("fringe csv line " + std::to_string(line_no)
                                 + ": expected " + std::to_string(header.size()) + " fields");
        if (!label.empty() && col_class >= 0 && cells[col_class] != label)
            continue;
        auto number = [&](int col) {
            try
            {
                std::size_t used = 0;
                double const v = std::stod(cells[col], &used);
                if (used != cells[col].size())
                    throw std::invalid_argument("trailing");
                return v;
            }
            catch (std::exception const&)
            {
                throw ParameterError("fringe csv line " + std::to_string(line_no) + ": bad number '"
                                     + cells[col] + "' in column " + header[col]);
            }
        };
        FringePoint p;
        p.detuning_hz = number(col_nu);
        p.y = number(col_y);
        p.sigma = col_sigma >= 0 ? number(col_sigma) : 0.0;
        data.points.push_back(p);
    }
    if (header.empty())
        throw ParameterError("fringe csv: no header line");
    if (data.points.empty())
        throw ParameterError("fringe csv: no rows" + (label.empty() ? "" : " with class " + label));
    return data;
}
}  // namespace qsi::analysis
