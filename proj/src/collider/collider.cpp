#include "qsi/collider/collider.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qsi/core/constants.hpp"
#include "qsi/core/errors.hpp"
#include "qsi/core/parallel.hpp"
#include "qsi/core/rng.hpp"
#include "qsi/scatterlib/amplitude.hpp"

namespace qsi::collider
{
namespace
{
namespace c = constants;
using Complex = std::complex<double>;

enum Purpose : std::uint32_t
{
    cloud2_launch = 1,
    cloud1_launch = 2,
    scatter_early = 3,
    scatter_late = 4,
    scan_noise = 20,
    fringe_noise = 100
};

constexpr Vec3 zhat{0, 0, 1};

Vec3 gaussian3(PhiloxEngine& eng, double sigma)
{
    std::normal_distribution<double> n(0.0, 1.0);
    double const x = n(eng);
    double const y = n(eng);
    double const z = n(eng);
    return Vec3{x, y, z} * sigma;
}

double horizontal(Vec3 const& r)
{
    return std::hypot(r.x, r.y);
}

// Kinematics in the frame falling freely from rest at the launch of Cloud 1,
// where every unscattered atom moves on a straight line.
struct Frame
{
    double v1 = 0;
    double v2 = 0;
    double dt = 0;
    double g = 0;
    double mass = 0;

    double cm_velocity() const { return 0.5 * (v1 + v2 + g * dt); }
    double cm_height(double t) const
    {
        return 0.5 * ((v1 + v2 + g * dt) * t - v2 * dt - 0.5 * g * dt * dt);
    }
    Vec3 cm(double t) const { return zhat * cm_height(t); }
    //! Position of a Cloud 2 atom launched with offset x0 and free-frame velocity w.
    Vec3 cloud2_position(Vec3 const& x0, Vec3 const& w, double t) const
    {
        return x0 + zhat * (0.5 * g * dt * dt) + w * (t - dt);
    }
    Vec3 cloud1_center(double t) const { return zhat * (v1 * t); }
};

Frame make_frame(fountain::LaunchPlan const& plan)
{
    return {plan.v_launch1, plan.v_launch2, plan.dt_launch, plan.g, plan.mass};
}

// Amplitude model shared by the scattering pass.
struct Channels
{
    scatter::PhaseShiftTable const& t3;
    scatter::PhaseShiftTable const& t4;
    ScatterMode mode;

    double cross_section(double k) const
    {
        auto const d3 = t3.deltas_at(k);
        double const s3 = scatter::total_cross_section(d3, k);
        if (mode == ScatterMode::Channel3)
            return s3;
        auto const d4 = t4.deltas_at(k);
        return 0.5 * (s3 + scatter::total_cross_section(d4, k));
    }
};

double amplitude_bound(std::vector<double> const& deltas, double k)
{
    double s = 0;
    for (std::size_t l = 0; l < deltas.size(); ++l)
        s += (2.0 * l + 1.0) * std::abs(std::sin(deltas[l]));
    return s / k;
}

struct Segment
{
    double lo = 0;
    double hi = 0;
};

// Cloud-1 column seen by one Cloud-2 atom, per unit launch peak density.
struct Column
{
    Vec3 d0;       // D(t) = d0 + vrel t, D = r_atom - c1
    Vec3 vrel;
    double sigma1 = 0;
    double sigma_v1 = 0;

    double sigma_at(double t) const { return std::sqrt(sigma1 * sigma1 + sigma_v1 * sigma_v1 * t * t); }
    double integrand(double t) const
    {
        double const s = sigma_at(t);
        Vec3 const d = d0 + vrel * t;
        double const ratio = sigma1 / s;
        return ratio * ratio * ratio * std::exp(-0.5 * dot(d, d) / (s * s));
    }
    //! Clip the segment to +/- 12 crossing widths about closest approach.
    Segment window(Segment seg) const
    {
        double const v2 = dot(vrel, vrel);
        if (v2 > 0)
        {
            double const t_star = -dot(d0, vrel) / v2;
            double const width = sigma_at(std::clamp(t_star, seg.lo, seg.hi)) / std::sqrt(v2);
            seg.lo = std::max(seg.lo, t_star - 12 * width);
            seg.hi = std::min(seg.hi, t_star + 12 * width);
        }
        return seg;
    }
    double integrate(Segment seg) const
    {
        seg = window(seg);
        if (!(seg.hi > seg.lo))
            return 0.0;
        auto f = [this](double t) { return integrand(t); };
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, seg.lo, seg.hi,
                                                                               12, 1e-10);
    }
    //! Draw an event time with density proportional to the integrand.
    double sample_time(Segment seg, double u) const
    {
        seg = window(seg);
        constexpr int n = 129;
        double cdf[n];
        double const h = (seg.hi - seg.lo) / (n - 1);
        cdf[0] = 0;
        double prev = integrand(seg.lo);
        for (int i = 1; i < n; ++i)
        {
            double const cur = integrand(seg.lo + i * h);
            cdf[i] = cdf[i - 1] + 0.5 * h * (prev + cur);
            prev = cur;
        }
        double const target = u * cdf[n - 1];
        int i = static_cast<int>(std::upper_bound(cdf, cdf + n, target) - cdf);
        i = std::clamp(i, 1, n - 1);
        double const span = cdf[i] - cdf[i - 1];
        double const frac = span > 0 ? (target - cdf[i - 1]) / span : 0.5;
        return seg.lo + (i - 1 + frac) * h;
    }
};

// Orthonormal pair perpendicular to the unit vector a.
std::pair<Vec3, Vec3> perpendicular_basis(Vec3 const& a)
{
    Vec3 const helper = std::abs(a.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    Vec3 e1 = cross(a, helper);
    e1 *= 1.0 / norm(e1);
    return {e1, cross(a, e1)};
}

struct ScatterContext
{
    Frame frame;
    fountain::CollisionGeometry const& geo;
    CloudSpec const& cloud1;
    Channels channels;
    SimulationSpec const& sim;
    double t_detect;
    double t_cavity;
};

AtomRecord scatter_branch(ScatterContext const& ctx, Cloud2Atom const& atom, Vec3 const& x0,
                          Vec3 const& w, Column const& column, Segment seg, double weight,
                          double k, PhiloxEngine& eng)
{
    AtomRecord rec = atom.unscattered;
    rec.scattered = true;
    rec.weight = weight;
    if (!(weight > 0))
        return rec;

    double const t_s = column.sample_time(seg, eng.uniform());
    Vec3 const r_s = ctx.frame.cloud2_position(x0, w, t_s);

    // Partner drawn from the local velocity distribution of Cloud 1
    double const s1 = ctx.cloud1.sigma_pos;
    double const sv1 = ctx.cloud1.velocity_rms(ctx.frame.mass);
    double const s1t2 = s1 * s1 + sv1 * sv1 * t_s * t_s;
    Vec3 const flow = zhat * ctx.frame.v1
                      + (r_s - ctx.frame.cloud1_center(t_s)) * (sv1 * sv1 * t_s / s1t2);
    Vec3 const w1 = flow + gaussian3(eng, sv1 * s1 / std::sqrt(s1t2));

    Vec3 const g = w - w1;
    double const g_abs = norm(g);
    Vec3 const axis = g * (1.0 / g_abs);
    Vec3 const v_cm = (w + w1) * 0.5;

    auto const d3 = ctx.channels.t3.deltas_at(k);
    auto const d4 = ctx.channels.t4.deltas_at(k);
    bool const clock_mode = ctx.channels.mode == ScatterMode::ClockSuperposition;
    double const b3 = amplitude_bound(d3, k);
    double const b4 = clock_mode ? amplitude_bound(d4, k) : 0.0;
    double const bound = clock_mode ? 0.5 * (b3 * b3 + b4 * b4) : b3 * b3;

    double cos_t = 0;
    Complex f3, f4;
    double dens = 0;
    for (int attempt = 0;; ++attempt)
    {
        if (attempt > 100000)
            throw SolverError("angular sampling failed: differential cross section vanishes");
        cos_t = 2 * eng.uniform() - 1;
        double const theta = std::acos(cos_t);
        f3 = scatter::scattering_amplitude(d3, k, theta);
        f4 = clock_mode ? scatter::scattering_amplitude(d4, k, theta) : Complex{};
        dens = clock_mode ? 0.5 * (std::norm(f3) + std::norm(f4)) : std::norm(f3);
        if (eng.uniform() * bound <= dens)
            break;
    }
    rec.theta = std::acos(cos_t);
    rec.phi = c::two_pi * eng.uniform();
    rec.scatter_time = t_s;

    auto const [e1, e2] = perpendicular_basis(axis);
    double const sin_t = std::sqrt(std::max(0.0, 1 - cos_t * cos_t));
    Vec3 const n = axis * cos_t + e1 * (sin_t * std::cos(rec.phi)) + e2 * (sin_t * std::sin(rec.phi));
    Vec3 const w_out = v_cm + n * (0.5 * g_abs);

    rec.position = r_s + w_out * (ctx.t_detect - t_s) - ctx.frame.cm(ctx.t_detect);
    rec.velocity = w_out - zhat * ctx.frame.cm_velocity();
    if (t_s <= ctx.t_cavity)
        rec.cavity_radius = horizontal(r_s + w_out * (ctx.t_cavity - t_s));

    if (clock_mode)
    {
        double const scale = 1.0 / std::sqrt(dens);
        rec.factors = {f3 * scale, f4 * scale};
    }
    else
    {
        rec.factors = {f3 / std::abs(f3), Complex{}};
    }
    return rec;
}

bool is_late(SignalClass cls)
{
    return cls == SignalClass::Collisions || cls == SignalClass::BackgroundCollisions;
}

bool is_background(SignalClass cls)
{
    return cls == SignalClass::BackgroundCollisions || cls == SignalClass::BackgroundNoCollisions;
}

long poisson(double mean, PhiloxEngine& eng)
{
    if (!(mean > 0))
        return 0;
    std::poisson_distribution<long> dist(mean);
    return dist(eng);
}

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}
}  // namespace

//---------------------------------------------------------------------------//
void CloudSpec::validate() const
{
    auto fail = [this](char const* what) {
        throw ParameterError(std::string(role == CloudRole::Cloud1 ? "cloud1" : "cloud2") + ": "
                             + what);
    };
    if (!(atom_number > 0) || !std::isfinite(atom_number))
        fail("atom number must be positive");
    if (!(temperature > 0) || !std::isfinite(temperature))
        fail("temperature must be positive");
    if (!(sigma_pos > 0) || !std::isfinite(sigma_pos))
        fail("sigma_pos must be positive");
    if (!(peak_density >= 0) || !std::isfinite(peak_density))
        fail("peak density must be non-negative");
}

double CloudSpec::gaussian_peak_density() const
{
    return atom_number / (std::pow(c::two_pi, 1.5) * sigma_pos * sigma_pos * sigma_pos);
}

bool CloudSpec::density_consistent(double tolerance) const
{
    return std::abs(peak_density / gaussian_peak_density() - 1) <= tolerance;
}

double CloudSpec::velocity_rms(double mass) const
{
    return std::sqrt(c::k_boltzmann * temperature / mass);
}

CloudSpec default_cloud1()
{
    return {1.6e9, 500e-9, 2.57e-3, 6e15, CloudState::pure(4, 4), CloudRole::Cloud1};
}

CloudSpec default_cloud2()
{
    return {3e8, 250e-9, 2.51e-3, 1.2e15, CloudState::clock_superposition(), CloudRole::Cloud2};
}

void DetectionSpec::validate() const
{
    if (!(probe_bandwidth > 0))
        throw ParameterError("detection: probe bandwidth must be positive");
    if (!(aperture_height > 0) || !(beam_diameter > 0) || !(cavity_aperture > 0))
        throw ParameterError("detection: aperture dimensions must be positive");
    if (!std::isfinite(probe_vz) || !std::isfinite(aperture_center))
        throw ParameterError("detection: non-finite probe velocity or aperture centre");
    if (!(efficiency > 0) || !(efficiency <= 1))
        throw ParameterError("detection: efficiency must lie in (0, 1]");
}

double DetectionSpec::lineshape_weight(double dv) const
{
    if (lineshape == Lineshape::TopHat)
        return std::abs(dv) <= 0.5 * probe_bandwidth ? 1.0 : 0.0;
    // sinc^2 with the requested full width at half maximum
    double const x = c::pi * 0.885892941378904 * dv / probe_bandwidth;
    if (std::abs(x) < 1e-8)
        return 1.0;
    double const s = std::sin(x) / x;
    return s * s;
}

std::string to_string(SignalClass cls)
{
    switch (cls)
    {
    case SignalClass::Collisions:
        return "collisions";
    case SignalClass::NoCollisions:
        return "no_collisions";
    case SignalClass::BackgroundCollisions:
        return "bg_collisions";
    case SignalClass::BackgroundNoCollisions:
        return "bg_no_collisions";
    }
    return "unknown";
}

void SimulationSpec::validate() const
{
    if (samples == 0 || impurity_samples == 0)
        throw ConfigError("simulation: sample counts must be positive");
    if (samples > max_samples || impurity_samples > max_samples)
    {
        std::ostringstream msg;
        msg << "simulation: " << std::max(samples, impurity_samples)
            << " samples exceed the budget of " << max_samples;
        throw ConfigError(msg.str());
    }
    if (!(cloud1_impurity >= 0 && cloud1_impurity <= 1) || !(cloud2_leak >= 0 && cloud2_leak <= 1))
        throw ConfigError("simulation: impurity and leak fractions must lie in [0, 1]");
    if (repetitions < 1)
        throw ConfigError("simulation: repetitions must be at least 1");
}

void RamseySpec::validate() const
{
    if (points < 2)
        throw ConfigError("ramsey: need at least two detuning points");
    if (!(periods > 0))
        throw ConfigError("ramsey: periods must be positive");
    if (!std::isfinite(pulse_phase_offset) || !std::isfinite(scattered_frequency_shift_hz))
        throw ConfigError("ramsey: non-finite phase offset or frequency shift");
}

double Ensembles::cloud2_weight() const
{
    double s = 0;
    for (auto const& a : cloud2_atoms)
        s += a.unscattered.weight;
    return s;
}

double Ensembles::scattered_weight(bool late) const
{
    double s = 0;
    for (auto const& a : cloud2_atoms)
        s += a.early_branch.weight + (late ? a.late_branch.weight : 0.0);
    return s;
}

//---------------------------------------------------------------------------//
Ensembles sample_clouds(CloudSpec const& cloud1, CloudSpec const& cloud2,
                        fountain::LaunchPlan const& plan, SimulationSpec const& sim,
                        std::uint64_t seed)
{
    cloud1.validate();
    cloud2.validate();
    sim.validate();
    if (cloud1.role != CloudRole::Cloud1 || cloud2.role != CloudRole::Cloud2)
        throw ConfigError("sample_clouds: cloud roles must be Cloud1 and Cloud2");

    Ensembles ens;
    ens.plan = plan;
    ens.geometry = fountain::collision_geometry(plan);
    ens.cloud1 = cloud1;
    ens.cloud2 = cloud2;
    ens.cloud2_leak = sim.cloud2_leak;
    ens.warnings = ens.geometry.warnings;
    for (auto const* cloud : {&cloud1, &cloud2})
    {
        if (!cloud->density_consistent())
        {
            std::ostringstream msg;
            msg << (cloud == &cloud1 ? "cloud1" : "cloud2") << ": peak density "
                << cloud->peak_density << " m^-3 differs from the Gaussian value "
                << cloud->gaussian_peak_density() << " m^-3 by more than 20%";
            ens.warnings.push_back(msg.str());
        }
    }
    auto const& geo = ens.geometry;
    ens.t_early_clear = geo.t_up1;
    ens.t_late_clear = std::max(geo.t_dn1, geo.t_dn2) + 0.5 * plan.pulse_duration;

    Frame const frame = make_frame(plan);
    double const t_det = geo.t_detect;
    Vec3 const cm_det = frame.cm(t_det);
    Vec3 const cm_vel = zhat * frame.cm_velocity();

    ens.cloud2_atoms.resize(sim.samples);
    double const w2 = cloud2.atom_number / static_cast<double>(sim.samples);
    double const sv2 = cloud2.velocity_rms(plan.mass);
    parallel_for(sim.samples, sim.workers, [&](std::size_t i) {
        PhiloxEngine eng(seed, i, cloud2_launch);
        Vec3 const x0 = gaussian3(eng, cloud2.sigma_pos);
        Vec3 const w = zhat * (plan.v_launch2 + plan.g * plan.dt_launch) + gaussian3(eng, sv2);
        ens.cloud2_atoms[i].launch_offset = x0;
        ens.cloud2_atoms[i].launch_velocity = w;
        auto& rec = ens.cloud2_atoms[i].unscattered;
        rec.position = frame.cloud2_position(x0, w, t_det) - cm_det;
        rec.velocity = w - cm_vel;
        rec.cavity_radius = horizontal(frame.cloud2_position(x0, w, geo.t_dn2));
        rec.weight = w2;
    });

    ens.cloud1_impurity.resize(sim.impurity_samples);
    double const w1 = sim.cloud1_impurity * cloud1.atom_number
                      / static_cast<double>(sim.impurity_samples);
    double const sv1 = cloud1.velocity_rms(plan.mass);
    parallel_for(sim.impurity_samples, sim.workers, [&](std::size_t j) {
        PhiloxEngine eng(seed, j, cloud1_launch);
        Vec3 const x0 = gaussian3(eng, cloud1.sigma_pos);
        Vec3 const w = zhat * plan.v_launch1 + gaussian3(eng, sv1);
        auto& rec = ens.cloud1_impurity[j];
        rec.position = x0 + w * t_det - cm_det;
        rec.velocity = w - cm_vel;
        rec.cavity_radius = horizontal(x0 + w * geo.t_dn1);
        rec.weight = w1;
    });
    return ens;
}

void scatter_events(Ensembles& ens, scatter::PhaseShiftTable const& table3,
                    scatter::PhaseShiftTable const& table4, ScatterMode mode,
                    SimulationSpec const& sim, std::uint64_t seed)
{
    auto const& geo = ens.geometry;
    auto const& plan = ens.plan;
    Frame const frame = make_frame(plan);
    ScatterContext const ctx{frame, geo, ens.cloud1, Channels{table3, table4, mode}, sim,
                             geo.t_detect, geo.t_dn2};
    double const n1 = ens.cloud1.peak_density;
    double const sigma_nominal = ctx.channels.cross_section(geo.wavenumber);
    double const k_per_speed = 0.5 * plan.mass / c::hbar;
    Segment const early{plan.dt_launch, ens.t_early_clear};
    Segment const late{ens.t_early_clear, ens.t_late_clear};

    std::vector<double> probability(ens.cloud2_atoms.size());
    parallel_for(ens.cloud2_atoms.size(), sim.workers, [&](std::size_t i) {
        auto& atom = ens.cloud2_atoms[i];
        Vec3 const x0 = atom.launch_offset;
        Vec3 const w = atom.launch_velocity;

        Column col;
        col.d0 = x0 + zhat * (0.5 * plan.g * plan.dt_launch * plan.dt_launch) - w * plan.dt_launch;
        col.vrel = w - zhat * plan.v_launch1;
        col.sigma1 = ens.cloud1.sigma_pos;
        col.sigma_v1 = ens.cloud1.velocity_rms(plan.mass);

        double const speed = norm(col.vrel);
        double const k = sim.thermal_average ? k_per_speed * speed : geo.wavenumber;
        double const sigma = sim.thermal_average ? ctx.channels.cross_section(k) : sigma_nominal;
        double const rate = n1 * sigma * speed;
        atom.relative_speed = speed;
        atom.p_early = rate * col.integrate(early);
        atom.p_late = rate * col.integrate(late);
        probability[i] = atom.p_early + atom.p_late;

        double const w_full = atom.unscattered.weight;
        PhiloxEngine eng_a(seed, i, scatter_early);
        atom.early_branch
            = scatter_branch(ctx, atom, x0, w, col, early, w_full * atom.p_early, k, eng_a);
        PhiloxEngine eng_b(seed, i, scatter_late);
        atom.late_branch
            = scatter_branch(ctx, atom, x0, w, col, late, w_full * atom.p_late, k, eng_b);
    });

    ens.max_probability = 0;
    for (double p : probability)
        ens.max_probability = std::max(ens.max_probability, p);
    if (ens.max_probability > 0.1)
    {
        std::ostringstream msg;
        msg << "multiple scattering: an atom has scattering probability " << ens.max_probability
            << " > 0.1 (single-scattering model)";
        ens.warnings.push_back(msg.str());
    }
    ens.scattered = true;
    ens.mode = mode;
}

//---------------------------------------------------------------------------//
void ClockSums::add(double w, clock::ChannelFactors const& f)
{
    weight += w;
    s33 += w * std::norm(f.g3);
    s44 += w * std::norm(f.g4);
    s34 += w * f.g3 * std::conj(f.g4);
}

double ClockSums::probability_sum(Complex x, Complex y) const
{
    return std::norm(x) * s33 + std::norm(y) * s44 + 2 * std::real(x * std::conj(y) * s34);
}

double aperture_transmission(AtomRecord const& atom, DetectionSpec const& det)
{
    if (std::abs(atom.position.z - det.aperture_center) > 0.5 * det.aperture_height)
        return 0.0;
    if (atom.cavity_radius > 0.5 * det.cavity_aperture)
        return 0.0;
    if (horizontal(atom.position) > 0.5 * det.beam_diameter)
        return 0.0;
    return 1.0;
}

namespace
{
double acceptance(AtomRecord const& atom, DetectionSpec const& det)
{
    double const l = det.lineshape_weight(atom.velocity.z - det.probe_vz);
    return l > 0 ? l * aperture_transmission(atom, det) : 0.0;
}

struct FullSums
{
    ClockSums unscattered;
    ClockSums scattered;
    ClockSums cloud1;
};

FullSums accumulate_full(Ensembles const& ens, DetectionSpec const& det, SignalClass cls)
{
    det.validate();
    bool const late = is_late(cls);
    double const scale = is_background(cls) ? ens.cloud2_leak : 1.0;
    clock::ChannelFactors const plain{};
    FullSums sums;
    for (auto const& atom : ens.cloud2_atoms)
    {
        double const w = atom.unscattered.weight * scale;
        double const p = atom.p_early + (late ? atom.p_late : 0.0);
        double const a = acceptance(atom.unscattered, det);
        if (a > 0)
            sums.unscattered.add(w * (1 - p) * a, plain);
        if (!ens.scattered)
            continue;
        double const ae = acceptance(atom.early_branch, det);
        if (ae > 0)
            sums.scattered.add(scale * atom.early_branch.weight * ae, atom.early_branch.factors);
        if (late)
        {
            double const al = acceptance(atom.late_branch, det);
            if (al > 0)
                sums.scattered.add(scale * atom.late_branch.weight * al, atom.late_branch.factors);
        }
    }
    for (auto const& imp : ens.cloud1_impurity)
    {
        double const a = acceptance(imp, det);
        if (a > 0)
            sums.cloud1.add(imp.weight * a, plain);
    }
    return sums;
}

double full_counts(FullSums const& sums, DetectionSpec const& det, RamseyPair const* ramsey,
                   double scattered_phase)
{
    if (!ramsey)
        return det.efficiency
               * (sums.unscattered.weight + sums.scattered.weight + sums.cloud1.weight);
    auto amplitudes = [](clock::RamseySequence const& seq) {
        Complex const x = clock::evolve(seq, {}, {Complex(1, 0), Complex(0, 0)}).c3;
        Complex const y = clock::evolve(seq, {}, {Complex(0, 0), Complex(1, 0)}).c3;
        return std::pair{x, y};
    };
    auto const [x2, y2] = amplitudes(ramsey->cloud2);
    auto const [x1, y1] = amplitudes(ramsey->cloud1);
    ClockSums shifted = sums.scattered;
    shifted.s34 *= std::polar(1.0, scattered_phase);
    return det.efficiency
           * (sums.unscattered.probability_sum(x2, y2) + shifted.probability_sum(x2, y2)
              + sums.cloud1.probability_sum(x1, y1));
}
}  // namespace

DetectionSums accumulate(Ensembles const& ens, DetectionSpec const& det, SignalClass cls)
{
    auto const full = accumulate_full(ens, det, cls);
    DetectionSums out;
    out.cloud2 = full.unscattered;
    out.cloud2.weight += full.scattered.weight;
    out.cloud2.s33 += full.scattered.s33;
    out.cloud2.s44 += full.scattered.s44;
    out.cloud2.s34 += full.scattered.s34;
    out.cloud1 = full.cloud1;
    return out;
}

RamseyPair make_ramsey_pair(Ensembles const& ens, RamseySpec const& spec, double detuning_hz)
{
    RamseyPair pair;
    pair.cloud2.T = ens.geometry.T;
    pair.cloud2.detuning_hz = detuning_hz;
    pair.cloud2.pulse = spec.pulse;
    pair.cloud2.pulse_phase_offset = spec.pulse_phase_offset;
    pair.cloud1 = pair.cloud2;
    pair.cloud1.T = ens.geometry.t_dn1 - ens.geometry.t_up1;
    return pair;
}

double expected_counts(DetectionSums const& sums, DetectionSpec const& det,
                       RamseyPair const* ramsey)
{
    FullSums full;
    full.unscattered = sums.cloud2;
    full.cloud1 = sums.cloud1;
    return full_counts(full, det, ramsey, 0.0);
}

double detect(Ensembles const& ens, DetectionSpec const& det, SignalClass cls,
              std::optional<RamseyPair> const& ramsey)
{
    if (ramsey && ens.cloud2.state.kind == CloudStateKind::Pure)
        throw ConfigError("detect: Ramsey sequence requested for a pure-state Cloud 2");
    auto const full = accumulate_full(ens, det, cls);
    return full_counts(full, det, ramsey ? &*ramsey : nullptr, 0.0);
}

double scattered_fraction_in_window(Ensembles const& ens, DetectionSpec const& det)
{
    double scattered = 0;
    double total = 0;
    for (auto const& atom : ens.cloud2_atoms)
    {
        total += atom.unscattered.weight;
        for (auto const* b : {&atom.early_branch, &atom.late_branch})
            scattered += b->weight * det.lineshape_weight(b->velocity.z - det.probe_vz);
    }
    return total > 0 ? scattered / total : 0.0;
}

//---------------------------------------------------------------------------//
std::vector<double> default_velocity_grid(double half_width, int points)
{
    if (!(half_width > 0) || points < 2)
        throw ParameterError("default_velocity_grid: need half_width > 0 and points >= 2");
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i)
        grid[i] = -half_width + 2 * half_width * i / (points - 1);
    if (points % 2 == 1)
        grid[points / 2] = 0.0;
    return grid;
}

VelocityScan velocity_scan(ExperimentSetup const& setup, std::vector<double> const& v_grid,
                           std::uint64_t seed, bool noise)
{
    if (v_grid.empty())
        throw ParameterError("velocity_scan: empty velocity grid");
    auto ens = sample_clouds(setup.cloud1, setup.cloud2, setup.plan, setup.sim, seed);
    scatter_events(ens, setup.table3, setup.table4, ScatterMode::Channel3, setup.sim, seed);

    VelocityScan scan;
    scan.v_grid = v_grid;
    scan.warnings = ens.warnings;
    std::size_t const n = v_grid.size();
    std::vector<double>* columns[4] = {&scan.collisions, &scan.no_collisions,
                                       &scan.background_collisions,
                                       &scan.background_no_collisions};
    SignalClass const classes[4] = {SignalClass::Collisions, SignalClass::NoCollisions,
                                    SignalClass::BackgroundCollisions,
                                    SignalClass::BackgroundNoCollisions};
    for (auto* col : columns)
        col->assign(n, 0.0);
    parallel_for(n, setup.sim.workers, [&](std::size_t i) {
        DetectionSpec det = setup.detection;
        det.probe_vz = v_grid[i];
        for (int cls = 0; cls < 4; ++cls)
        {
            double counts = detect(ens, det, classes[cls]);
            if (noise)
            {
                PhiloxEngine eng(seed, i, scan_noise + cls);
                counts = static_cast<double>(poisson(counts, eng));
            }
            (*columns[cls])[i] = counts;
        }
    });
    scan.difference.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        scan.difference[i] = (scan.collisions[i] - scan.background_collisions[i])
                             - (scan.no_collisions[i] - scan.background_no_collisions[i]);
    return scan;
}

void write_velocity_scan_csv(std::ostream& os, VelocityScan const& scan)
{
    os << "vz_m_per_s,collisions,no_collisions,bg_collisions,bg_no_collisions,difference\n";
    for (std::size_t i = 0; i < scan.v_grid.size(); ++i)
    {
        os << fmt(scan.v_grid[i]) << ',' << fmt(scan.collisions[i]) << ','
           << fmt(scan.no_collisions[i]) << ',' << fmt(scan.background_collisions[i]) << ','
           << fmt(scan.background_no_collisions[i]) << ',' << fmt(scan.difference[i]) << '\n';
    }
}

//---------------------------------------------------------------------------//
ExpectedFringes expected_fringes(ExperimentSetup const& setup, std::uint64_t seed)
{
    setup.ramsey.validate();
    if (setup.cloud2.state.kind != CloudStateKind::ClockSuperposition)
        throw ConfigError("fringes: Cloud 2 must be prepared in the clock superposition");
    auto ens = sample_clouds(setup.cloud1, setup.cloud2, setup.plan, setup.sim, seed);
    scatter_events(ens, setup.table3, setup.table4, ScatterMode::ClockSuperposition, setup.sim,
                   seed);

    ExpectedFringes out;
    out.T = ens.geometry.T;
    out.repetitions = setup.sim.repetitions;
    out.warnings = ens.warnings;
    out.detuning_hz = clock::default_detuning_grid(out.T, setup.ramsey.points, setup.ramsey.periods);

    DetectionSpec const det = setup.detection;
    DetectionSpec det_unscattered = det;
    det_unscattered.probe_vz = ens.geometry.v_z2;
    FullSums const late = accumulate_full(ens, det, SignalClass::Collisions);
    FullSums const early = accumulate_full(ens, det, SignalClass::NoCollisions);
    FullSums const bg_late = accumulate_full(ens, det, SignalClass::BackgroundCollisions);
    FullSums const bg_early = accumulate_full(ens, det, SignalClass::BackgroundNoCollisions);
    FullSums const unscattered
        = accumulate_full(ens, det_unscattered, SignalClass::NoCollisions);

    double const shift_phase = c::two_pi * setup.ramsey.scattered_frequency_shift_hz * out.T;
    std::size_t const n = out.detuning_hz.size();
    for (auto* v : {&out.late, &out.early, &out.bg_late, &out.bg_early, &out.unscattered})
        v->assign(n, 0.0);
    parallel_for(n, setup.sim.workers, [&](std::size_t i) {
        RamseyPair const pair = make_ramsey_pair(ens, setup.ramsey, out.detuning_hz[i]);
        out.late[i] = full_counts(late, det, &pair, shift_phase);
        out.early[i] = full_counts(early, det, &pair, shift_phase);
        out.bg_late[i] = full_counts(bg_late, det, &pair, shift_phase);
        out.bg_early[i] = full_counts(bg_early, det, &pair, shift_phase);
        out.unscattered[i] = full_counts(unscattered, det_unscattered, &pair, shift_phase);
    });
    return out;
}

FringeSet realize_fringes(ExpectedFringes const& expected, std::uint64_t seed, bool noise)
{
    int const reps = expected.repetitions;
    std::size_t const n = expected.detuning_hz.size();
    FringeSet set;
    set.warnings = expected.warnings;
    for (auto* d : {&set.scattered, &set.unscattered, &set.bg_early, &set.bg_late})
    {
        d->interrogation_time = expected.T;
        d->points.resize(n);
    }
    set.scattered.label = "scattered";
    set.unscattered.label = "unscattered";
    set.bg_early.label = "bg_early";
    set.bg_late.label = "bg_late";

    double const floor_var = 1.0 / (static_cast<double>(reps) * reps);
    auto point = [&](double nu, double sum, double var) {
        return FringePoint{nu, sum / reps, std::sqrt(var > 0 ? var : floor_var)};
    };
    for (std::size_t i = 0; i < n; ++i)
    {
        double const lambda[5] = {expected.late[i], expected.bg_late[i], expected.early[i],
                                  expected.bg_early[i], expected.unscattered[i]};
        double sum[5] = {0, 0, 0, 0, 0};
        for (int r = 0; r < reps; ++r)
        {
            for (int cls = 0; cls < 5; ++cls)
            {
                if (noise)
                {
                    PhiloxEngine eng(seed, i, fringe_noise + 5 * r + cls);
                    sum[cls] += static_cast<double>(poisson(lambda[cls], eng));
                }
                else
                {
                    sum[cls] += lambda[cls];
                }
            }
        }
        double const nu = expected.detuning_hz[i];
        double const r2 = static_cast<double>(reps) * reps;
        double const diff = (sum[0] - sum[1]) - (sum[2] - sum[3]);
        set.scattered.points[i] = point(nu, diff, (sum[0] + sum[1] + sum[2] + sum[3]) / r2);
        set.unscattered.points[i] = point(nu, sum[4], sum[4] / r2);
        set.bg_early.points[i] = point(nu, sum[3], sum[3] / r2);
        set.bg_late.points[i] = point(nu, sum[1], sum[1] / r2);
    }
    return set;
}

FringeSet synthesize_fringes(ExperimentSetup const& setup, std::uint64_t seed, bool noise)
{
    return realize_fringes(expected_fringes(setup, seed), seed, noise);
}

void write_fringe_set_csv(std::ostream& os, FringeSet const& set)
{
    os << "detuning_hz,class,counts,sigma\n";
    for (auto const* d : {&set.scattered, &set.unscattered, &set.bg_early, &set.bg_late})
    {
        for (auto const& p : d->points)
            os << fmt(p.detuning_hz) << ',' << d->label << ',' << fmt(p.y) << ','
               << fmt(p.sigma) << '\n';
    }
}
}  // namespace qsi::collider
