#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "qsi/collider/collider.hpp"
#include "qsi/core/constants.hpp"
#include "qsi/core/errors.hpp"

using namespace qsi::collider;
namespace c = qsi::constants;
using std::numbers::pi;

namespace
{
ExperimentSetup small_setup(std::size_t samples = 20000)
{
    ExperimentSetup s;
    s.sim.samples = samples;
    s.sim.impurity_samples = 5000;
    s.sim.workers = 1;
    return s;
}

Ensembles build(ExperimentSetup const& s, std::uint64_t seed, ScatterMode mode)
{
    auto ens = sample_clouds(s.cloud1, s.cloud2, s.plan, s.sim, seed);
    scatter_events(ens, s.table3, s.table4, mode, s.sim, seed);
    return ens;
}

// Linear least squares of y on {1, cos x, sin x}: returns the fringe phase.
double fringe_phase(std::vector<double> const& nu, std::vector<double> const& y, double T,
                    double* max_residual = nullptr)
{
    double m[3][4] = {};
    for (std::size_t i = 0; i < nu.size(); ++i)
    {
        double const x = 2 * pi * nu[i] * T;
        double const b[3] = {1.0, std::cos(x), std::sin(x)};
        for (int r = 0; r < 3; ++r)
        {
            for (int col = 0; col < 3; ++col)
                m[r][col] += b[r] * b[col];
            m[r][3] += b[r] * y[i];
        }
    }
    for (int p = 0; p < 3; ++p)
        for (int r = p + 1; r < 3; ++r)
        {
            double const f = m[r][p] / m[p][p];
            for (int col = p; col < 4; ++col)
                m[r][col] -= f * m[p][col];
        }
    double sol[3];
    for (int r = 2; r >= 0; --r)
    {
        double acc = m[r][3];
        for (int col = r + 1; col < 3; ++col)
            acc -= m[r][col] * sol[col];
        sol[r] = acc / m[r][r];
    }
    if (max_residual)
    {
        *max_residual = 0;
        for (std::size_t i = 0; i < nu.size(); ++i)
        {
            double const x = 2 * pi * nu[i] * T;
            double const model = sol[0] + sol[1] * std::cos(x) + sol[2] * std::sin(x);
            *max_residual = std::max(*max_residual, std::abs(model - y[i]));
        }
    }
    // (1 - cos(x + Phi)) / 2 = 1/2 - cos x cos Phi / 2 + sin x sin Phi / 2
    return std::atan2(sol[2], -sol[1]);
}

std::vector<double> scattered_difference(ExpectedFringes const& e)
{
    std::vector<double> y(e.late.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] = (e.late[i] - e.bg_late[i]) - (e.early[i] - e.bg_early[i]);
    return y;
}
}  // namespace

TEST_CASE("cloud velocity distribution matches Maxwell-Boltzmann")
{
    auto s = small_setup(50000);
    auto const ens = sample_clouds(s.cloud1, s.cloud2, s.plan, s.sim, 3);
    double const expected = std::sqrt(c::k_boltzmann * 250e-9 / c::cs_mass);
    CHECK(expected == doctest::Approx(3.95e-3).epsilon(2e-3));
    CHECK(s.cloud2.velocity_rms() == doctest::Approx(expected).epsilon(1e-14));

    double sx = 0, sz = 0, mz = 0;
    for (auto const& a : ens.cloud2_atoms)
        mz += a.unscattered.velocity.z;
    double const n = static_cast<double>(ens.cloud2_atoms.size());
    mz /= n;
    for (auto const& a : ens.cloud2_atoms)
    {
        sx += a.unscattered.velocity.x * a.unscattered.velocity.x;
        sz += (a.unscattered.velocity.z - mz) * (a.unscattered.velocity.z - mz);
    }
    double const rms_x = std::sqrt(sx / n);
    double const rms_z = std::sqrt(sz / (n - 1));
    double const tol = 3 * expected / std::sqrt(2 * n);
    CHECK(std::abs(rms_x - expected) < tol);
    CHECK(std::abs(rms_z - expected) < tol);
    // Cloud 2 moves at +v_r/2 in the CoM frame
    CHECK(std::abs(mz - ens.geometry.v_z2) < 3 * expected / std::sqrt(n));
}

TEST_CASE("cold limit: every atom moves with the cloud centre")
{
    auto s = small_setup(500);
    s.cloud2.temperature = 1e-30;
    auto const ens = sample_clouds(s.cloud1, s.cloud2, s.plan, s.sim, 5);
    for (auto const& a : ens.cloud2_atoms)
    {
        CHECK(std::abs(a.unscattered.velocity.x) < 1e-12);
        CHECK(std::abs(a.unscattered.velocity.z - ens.geometry.v_z2) < 1e-12);
    }
}

TEST_CASE("determinism across seeds and worker counts")
{
    auto s = small_setup(3000);
    auto const a = build(s, 11, ScatterMode::ClockSuperposition);
    s.sim.workers = 3;
    auto const b = build(s, 11, ScatterMode::ClockSuperposition);
    auto const c2 = build(s, 12, ScatterMode::ClockSuperposition);
    bool same = true, differs = false;
    for (std::size_t i = 0; i < a.cloud2_atoms.size(); ++i)
    {
        auto const& x = a.cloud2_atoms[i];
        auto const& y = b.cloud2_atoms[i];
        same = same && x.unscattered.position.z == y.unscattered.position.z
               && x.p_late == y.p_late && x.late_branch.velocity.x == y.late_branch.velocity.x
               && x.late_branch.factors.g3 == y.late_branch.factors.g3;
        differs = differs || x.unscattered.position.z != c2.cloud2_atoms[i].unscattered.position.z;
    }
    CHECK(same);
    CHECK(differs);
}

TEST_CASE("zero density means no scattering")
{
    auto s = small_setup(2000);
    s.cloud1.peak_density = 0;
    auto const ens = build(s, 1, ScatterMode::ClockSuperposition);
    CHECK(ens.scattered_weight(true) == 0.0);
    auto const scan = velocity_scan(s, default_velocity_grid(), 1, false);
    for (double d : scan.difference)
        CHECK(d == 0.0);
}

TEST_CASE("scattered weight is linear in the Cloud 1 density")
{
    auto s = small_setup(5000);
    auto const one = build(s, 2, ScatterMode::ClockSuperposition);
    s.cloud1.peak_density *= 2;
    auto const two = build(s, 2, ScatterMode::ClockSuperposition);
    CHECK(two.scattered_weight(true) == doctest::Approx(2 * one.scattered_weight(true)).epsilon(1e-12));
    CHECK(two.scattered_weight(false) == doctest::Approx(2 * one.scattered_weight(false)).epsilon(1e-12));
}

TEST_CASE("count conservation")
{
    auto s = small_setup(5000);
    auto const ens = build(s, 4, ScatterMode::ClockSuperposition);
    double unscattered = 0, branches = 0;
    for (auto const& a : ens.cloud2_atoms)
    {
        unscattered += a.unscattered.weight * (1 - a.p_early - a.p_late);
        branches += a.early_branch.weight + a.late_branch.weight;
        CHECK(a.p_early >= 0);
        CHECK(a.p_late >= 0);
    }
    CHECK(unscattered + branches == doctest::Approx(ens.cloud2_weight()).epsilon(1e-12));
    CHECK(ens.cloud2_weight() == doctest::Approx(s.cloud2.atom_number).epsilon(1e-12));
}

TEST_CASE("scattering probability matches the overlap estimate for a centred atom")
{
    // Atom on the axis with the cloud-centre velocity: column = n1 * sqrt(2 pi) sigma1(t_c)
    // times the peak-density dilution (sigma1 / sigma1(t_c))^3 in the slow-expansion limit.
    auto s = small_setup(1);
    s.cloud1.temperature = 1e-30;
    s.cloud2.temperature = 1e-30;
    s.cloud2.sigma_pos = 1e-12;
    auto const ens = build(s, 9, ScatterMode::ClockSuperposition);
    auto const& a = ens.cloud2_atoms[0];
    double const k = ens.geometry.wavenumber;
    double const sigma_bar = 0.5 * 4 * pi / (k * k) * (std::pow(std::sin(0.6), 2) + std::pow(std::sin(0.741), 2));
    double const expected = s.cloud1.peak_density * sigma_bar * std::sqrt(2 * pi) * s.cloud1.sigma_pos;
    CHECK(a.p_early + a.p_late == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("angular distribution of s-wave scattering is isotropic")
{
    auto s = small_setup(40000);
    auto const ens = build(s, 6, ScatterMode::Channel3);
    double m1 = 0, m2 = 0, w = 0;
    for (auto const& a : ens.cloud2_atoms)
    {
        double const ct = std::cos(a.late_branch.theta);
        w += 1;
        m1 += ct;
        m2 += ct * ct;
    }
    // uniform cos(theta): mean 0, second moment 1/3
    CHECK(std::abs(m1 / w) < 4 / std::sqrt(3 * w));
    CHECK(std::abs(m2 / w - 1.0 / 3) < 4 * std::sqrt(4.0 / 45 / w));
    // scattered speeds stay on the CoM shell
    for (std::size_t i = 0; i < 50; ++i)
    {
        auto const& a = ens.cloud2_atoms[i];
        CHECK(a.late_branch.scattered);
    }
}

TEST_CASE("detection examples")
{
    auto s = small_setup();
    auto const ens = build(s, 7, ScatterMode::Channel3);
    DetectionSpec det = s.detection;
    det.probe_vz = 1.5;
    CHECK(detect(ens, det, SignalClass::Collisions) == 0.0);
    det.probe_vz = -1.5;
    CHECK(detect(ens, det, SignalClass::NoCollisions) == 0.0);

    det.probe_vz = ens.geometry.v_z2;
    double const no_coll = detect(ens, det, SignalClass::NoCollisions);
    double const bg = detect(ens, det, SignalClass::BackgroundNoCollisions);
    CHECK(no_coll > 0);
    CHECK(bg < 0.01 * no_coll);

    // Scattered window vs unscattered peak: order of a thousand
    det.probe_vz = 0;
    double const scattered = detect(ens, det, SignalClass::Collisions)
                             - detect(ens, det, SignalClass::NoCollisions);
    double const ratio = no_coll / scattered;
    CHECK(ratio > 1e2);
    CHECK(ratio < 1e4);
}

TEST_CASE("ramsey on a pure-state Cloud 2 is rejected")
{
    auto s = small_setup(100);
    s.cloud2.state = CloudState::pure(3, 0);
    auto const ens = build(s, 1, ScatterMode::Channel3);
    auto const pair = make_ramsey_pair(ens, s.ramsey, 0.0);
    CHECK_THROWS_AS(detect(ens, s.detection, SignalClass::Collisions, pair), qsi::ConfigError);
    CHECK_THROWS_AS(expected_fringes(s, 1), qsi::ConfigError);
}

TEST_CASE("sample budget and multiple-scattering warning")
{
    auto s = small_setup(100);
    s.sim.samples = s.sim.max_samples + 1;
    CHECK_THROWS_AS(sample_clouds(s.cloud1, s.cloud2, s.plan, s.sim, 1), qsi::ConfigError);

    auto dense = small_setup(2000);
    auto const normal = build(dense, 1, ScatterMode::ClockSuperposition);
    CHECK(normal.max_probability < 0.1);
    dense.cloud1.peak_density *= 20;
    dense.cloud1.atom_number *= 20;
    auto const ens = build(dense, 1, ScatterMode::ClockSuperposition);
    CHECK(ens.max_probability > 0.1);
    bool warned = false;
    for (auto const& w : ens.warnings)
        warned = warned || w.find("multiple scattering") != std::string::npos;
    CHECK(warned);

    auto inconsistent = small_setup(100);
    inconsistent.cloud1.peak_density *= 1.5;
    auto const e2 = sample_clouds(inconsistent.cloud1, inconsistent.cloud2, inconsistent.plan,
                                  inconsistent.sim, 1);
    CHECK(e2.warnings.size() == 1);
}

TEST_CASE("lineshapes")
{
    DetectionSpec det;
    CHECK(det.lineshape_weight(0.0069) == 1.0);
    CHECK(det.lineshape_weight(-0.0071) == 0.0);
    det.lineshape = Lineshape::SincSquared;
    CHECK(det.lineshape_weight(0.0) == 1.0);
    CHECK(det.lineshape_weight(0.007) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(det.lineshape_weight(-0.007) == doctest::Approx(0.5).epsilon(1e-9));
    det.probe_bandwidth = 0;
    CHECK_THROWS_AS(det.validate(), qsi::ParameterError);
}

TEST_CASE("velocity scan: shapes, closure and clearing consistency")
{
    auto s = small_setup(40000);
    auto const grid = default_velocity_grid();
    REQUIRE(grid.size() == 161);
    auto const scan = velocity_scan(s, grid, 8, false);

    // With the slit opened the no-collisions curve is the bare Cloud 2
    // distribution: centred on +v_r/2 with the 250 nK rms widened by the top hat.
    {
        auto open = s;
        open.detection.aperture_height = 1.0;
        auto const fine = default_velocity_grid(0.1, 401);
        auto const bare = velocity_scan(open, fine, 8, false);
        double w = 0, m1 = 0, m2 = 0;
        for (std::size_t i = 0; i < fine.size(); ++i)
        {
            if (fine[i] < 0.02)
                continue;  // skip the Cloud 1 impurity peak
            w += bare.no_collisions[i];
            m1 += bare.no_collisions[i] * fine[i];
        }
        m1 /= w;
        for (std::size_t i = 0; i < fine.size(); ++i)
            if (fine[i] >= 0.02)
                m2 += bare.no_collisions[i] * (fine[i] - m1) * (fine[i] - m1);
        double const rms = std::sqrt(m2 / w - open.detection.probe_bandwidth * open.detection.probe_bandwidth / 12);
        CHECK(m1 == doctest::Approx(0.0496).epsilon(2e-3));
        CHECK(rms == doctest::Approx(s.cloud2.velocity_rms()).epsilon(0.03));
    }

    // Positive scattered signal concentrated in [-5.5, +2.5] cm/s
    double inside = 0, total = 0;
    for (std::size_t i = 0; i < grid.size(); ++i)
    {
        double const d = std::max(0.0, scan.difference[i]);
        total += d;
        if (grid[i] >= -0.055 && grid[i] <= 0.025)
            inside += d;
    }
    CHECK(total > 0);
    CHECK(inside / total > 0.85);

    // Integrated difference equals the detected scattered bookkeeping
    auto const ens = build(s, 8, ScatterMode::Channel3);
    DetectionSpec det = s.detection;
    double bookkeeping = 0;
    for (auto const& a : ens.cloud2_atoms)
    {
        bookkeeping += a.late_branch.weight * aperture_transmission(a.late_branch, det);
        bookkeeping -= a.unscattered.weight * a.p_late * aperture_transmission(a.unscattered, det);
    }
    bookkeeping *= det.efficiency * (1 - s.sim.cloud2_leak);
    double integral = 0;
    double const dv = grid[1] - grid[0];
    for (double d : scan.difference)
        integral += d * dv / det.probe_bandwidth;
    CHECK(integral == doctest::Approx(bookkeeping).epsilon(0.02));

    // Early clearing leaves essentially nothing in the scattered window
    det.probe_vz = 0;
    double const early = detect(ens, det, SignalClass::NoCollisions);
    double const late = detect(ens, det, SignalClass::Collisions);
    CHECK(early < 1e-3 * late);
}

TEST_CASE("velocity scan with noise is reproducible")
{
    auto s = small_setup(5000);
    auto const grid = default_velocity_grid(0.08, 41);
    auto const a = velocity_scan(s, grid, 21, true);
    s.sim.workers = 4;
    auto const b = velocity_scan(s, grid, 21, true);
    CHECK(a.collisions == b.collisions);
    CHECK(a.difference == b.difference);
    for (double x : a.collisions)
        CHECK(x == std::floor(x));

    std::ostringstream os;
    write_velocity_scan_csv(os, a);
    CHECK(os.str().rfind("vz_m_per_s,collisions,no_collisions,bg_collisions,bg_no_collisions,difference\n", 0) == 0);
}

TEST_CASE("scattered fringe carries the coherence phase")
{
    auto s = small_setup(20000);
    s.ramsey.points = 41;
    auto const e = expected_fringes(s, 3);
    double resid = 0;
    double const phi = fringe_phase(e.detuning_hz, scattered_difference(e), e.T, &resid);
    CHECK(phi == doctest::Approx(-0.141).epsilon(1e-9));
    CHECK(resid < 1e-9 * *std::max_element(e.late.begin(), e.late.end()));
    CHECK(std::abs(fringe_phase(e.detuning_hz, e.unscattered, e.T)) < 1e-9);

    // arg c = 0: scattered and unscattered fringes aligned
    s.table4 = s.table3;
    auto const aligned = expected_fringes(s, 3);
    CHECK(std::abs(fringe_phase(aligned.detuning_hz, scattered_difference(aligned), aligned.T)) < 1e-9);
}

TEST_CASE("thermal averaging leaves the s-wave phase unchanged")
{
    auto s = small_setup(5000);
    s.ramsey.points = 21;
    s.sim.thermal_average = true;
    auto const e = expected_fringes(s, 3);
    CHECK(fringe_phase(e.detuning_hz, scattered_difference(e), e.T) == doctest::Approx(-0.141).epsilon(1e-9));
}

TEST_CASE("frequency-shift control adds 2 pi dnu T")
{
    auto s = small_setup(5000);
    s.ramsey.points = 21;
    s.ramsey.scattered_frequency_shift_hz = 0.05;
    auto const e = expected_fringes(s, 3);
    CHECK(fringe_phase(e.detuning_hz, scattered_difference(e), e.T)
          == doctest::Approx(-0.141 + 2 * pi * 0.05 * e.T).epsilon(1e-9));
}

TEST_CASE("fringe realization")
{
    auto s = small_setup(5000);
    s.ramsey.points = 21;
    auto const e = expected_fringes(s, 3);
    auto const exact = realize_fringes(e, 3, false);
    for (std::size_t i = 0; i < e.late.size(); ++i)
    {
        double const y = (e.late[i] - e.bg_late[i]) - (e.early[i] - e.bg_early[i]);
        CHECK(exact.scattered.points[i].y == doctest::Approx(y).epsilon(1e-12));
        CHECK(exact.unscattered.points[i].y == doctest::Approx(e.unscattered[i]).epsilon(1e-12));
        CHECK(exact.scattered.points[i].sigma > 0);
    }
    auto const n1 = realize_fringes(e, 9, true);
    auto const n2 = realize_fringes(e, 9, true);
    auto const n3 = realize_fringes(e, 10, true);
    bool same = true, differs = false;
    for (std::size_t i = 0; i < e.late.size(); ++i)
    {
        same = same && n1.scattered.points[i].y == n2.scattered.points[i].y;
        differs = differs || n1.scattered.points[i].y != n3.scattered.points[i].y;
    }
    CHECK(same);
    CHECK(differs);

    std::ostringstream os;
    write_fringe_set_csv(os, exact);
    std::string const text = os.str();
    CHECK(text.rfind("detuning_hz,class,counts,sigma\n", 0) == 0);
    CHECK(text.find(",scattered,") != std::string::npos);
    CHECK(text.find(",bg_late,") != std::string::npos);
}
