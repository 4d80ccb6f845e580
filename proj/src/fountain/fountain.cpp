#include "qsi/fountain/fountain.hpp"

#include <cmath>
#include <sstream>
#include <tuple>
#include <utility>

#include "qsi/core/errors.hpp"

namespace qsi::fountain
{
namespace
{
void require(bool ok, char const* what)
{
    if (!ok)
        throw ParameterError(std::string("launch plan: ") + what);
}

// Upward and downward crossing times of height z for a cloud launched at t0.
std::pair<double, double> crossings(double v, double t0, double g, double z)
{
    double const disc = v * v - 2 * g * z;
    if (disc < 0)
    {
        std::ostringstream msg;
        msg << "cloud launched at " << v << " m/s never reaches z = " << z << " m";
        throw GeometryError(msg.str());
    }
    double const s = std::sqrt(disc);
    return {t0 + (v - s) / g, t0 + (v + s) / g};
}
}  // namespace

void LaunchPlan::validate() const
{
    require(std::isfinite(v_launch1) && std::isfinite(v_launch2), "launch velocities must be finite");
    require(v_min < v_max, "v_min must be below v_max");
    require(v_launch1 >= v_min && v_launch1 <= v_max, "v_launch1 outside the sanity band");
    require(v_launch2 >= v_min && v_launch2 <= v_max, "v_launch2 outside the sanity band");
    require(dt_launch > 0 && std::isfinite(dt_launch), "dt_launch must be positive");
    require(z_cavity > 0 && std::isfinite(z_cavity), "z_cavity must be positive");
    require(z_detect > 0 && std::isfinite(z_detect), "z_detect must be positive");
    require(g > 0 && std::isfinite(g), "g must be positive");
    require(mass > 0 && std::isfinite(mass), "mass must be positive");
    require(pulse_duration >= 0 && std::isfinite(pulse_duration),
            "pulse_duration must be non-negative");
}

double ballistic_height(double v, double t0, double g, double t)
{
    double const s = t - t0;
    return v * s - 0.5 * g * s * s;
}

double ballistic_velocity(double v, double t0, double g, double t)
{
    return v - g * (t - t0);
}

CollisionGeometry collision_geometry(LaunchPlan const& plan)
{
    plan.validate();
    double const g = plan.g;
    double const dt = plan.dt_launch;
    double const v1 = plan.v_launch1;
    double const v2 = plan.v_launch2;

    CollisionGeometry geo;
    geo.v_r = v2 + g * dt - v1;
    if (!(geo.v_r > 0))
        throw GeometryError("Cloud 2 never catches Cloud 1 (relative speed is not positive)");
    geo.t_collide = (v2 * dt + 0.5 * g * dt * dt) / geo.v_r;
    if (!(geo.t_collide > dt))
        throw GeometryError("clouds would meet before Cloud 2 is launched");
    geo.z_collide = ballistic_height(v1, 0, g, geo.t_collide);

    geo.energy = collision_energy(geo.v_r, plan.mass);
    geo.energy_over_kB = geo.energy / constants::k_boltzmann;
    geo.wavenumber = 0.5 * plan.mass * geo.v_r / constants::hbar;
    geo.v_z1 = -0.5 * geo.v_r;
    geo.v_z2 = 0.5 * geo.v_r;

    std::tie(geo.t_up1, geo.t_dn1) = crossings(v1, 0, g, plan.z_cavity);
    std::tie(geo.t_up2, geo.t_dn2) = crossings(v2, dt, g, plan.z_cavity);
    geo.T = geo.t_dn2 - geo.t_up2;

    if (!(geo.z_collide > plan.z_cavity))
    {
        std::ostringstream msg;
        msg << "clouds meet at z = " << geo.z_collide << " m, not above the cavity at "
            << plan.z_cavity << " m";
        throw GeometryError(msg.str());
    }
    double const half_pulse = 0.5 * plan.pulse_duration;
    if (geo.t_collide < geo.t_up2 + half_pulse || geo.t_collide > geo.t_dn2 - half_pulse)
        throw GeometryError("collision falls outside the Ramsey window of Cloud 2");

    // Pair centre: z = V tau + c0 - g tau^2 / 2 with tau = t - dt / 2
    double const V = 0.5 * (v1 + v2);
    double const c0 = 0.25 * (v1 - v2) * dt - 0.125 * g * dt * dt;
    double const disc = V * V + 2 * g * (c0 - plan.z_detect);
    if (disc < 0)
        throw GeometryError("pair centre never reaches the detection height");
    geo.t_detect = 0.5 * dt + (V + std::sqrt(disc)) / g;
    if (!(geo.t_detect > geo.t_dn2 + half_pulse))
        throw GeometryError("detection happens before the second Ramsey pulse");
    geo.t_detect_delay = geo.t_detect - geo.t_collide;
    geo.spread_diameter = geo.v_r * geo.t_detect_delay;

    double const apogee1 = v1 / g;
    double const apogee2 = dt + v2 / g;
    geo.before_apogee = geo.t_collide < std::max(apogee1, apogee2);
    if (geo.before_apogee && plan.after_apogee_requested)
        geo.warnings.emplace_back("collision occurs before both clouds reach apogee");
    return geo;
}

double interrogation_time_for_launch(double v_launch, double z_cavity, double g)
{
    if (!(g > 0) || !(z_cavity >= 0))
        throw ParameterError("interrogation_time_for_launch: need g > 0 and z_cavity >= 0");
    double const disc = v_launch * v_launch - 2 * g * z_cavity;
    if (disc < 0)
        throw GeometryError("cloud does not reach the cavity");
    return 2 * std::sqrt(disc) / g;
}

double launch_velocity_for_interrogation_time(double T, double z_cavity, double g)
{
    if (!(T >= 0) || !(g > 0) || !(z_cavity >= 0))
        throw ParameterError("launch_velocity_for_interrogation_time: invalid arguments");
    double const half = 0.5 * g * T;
    return std::sqrt(2 * g * z_cavity + half * half);
}

double launch_velocity_for_collision_time(double v_launch2, double dt_launch, double t_collide,
                                          double g)
{
    if (!(t_collide > dt_launch) || !(dt_launch > 0) || !(g > 0))
        throw ParameterError("launch_velocity_for_collision_time: need t_collide > dt_launch > 0");
    return v_launch2 + g * dt_launch
           - (v_launch2 * dt_launch + 0.5 * g * dt_launch * dt_launch) / t_collide;
}

double equivalent_frequency_shift(double phi, double T)
{
    if (!(T > 0))
        throw ParameterError("equivalent_frequency_shift: T must be positive");
    return phi / (constants::two_pi * T);
}

double collision_energy(double v_r, double mass)
{
    return 0.25 * mass * v_r * v_r;
}
}  // namespace qsi::fountain
