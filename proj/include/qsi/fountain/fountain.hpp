#pragma once

#include <string>
#include <vector>

#include "qsi/core/constants.hpp"

namespace qsi::fountain
{
//---------------------------------------------------------------------------//
/*!
 * Launch schedule of the two clouds. Heights are measured from the launch
 * point, times from the launch of Cloud 1, velocities upward positive.
 */
struct LaunchPlan
{
    double v_launch1 = 2.8227;          //!< [m/s]
    double v_launch2 = 2.8227;          //!< [m/s]
    double dt_launch = 0.0992 / 9.80;   //!< Cloud 2 launched this long after Cloud 1 [s]
    double z_cavity = 0.34;             //!< clock cavity height [m]
    double z_detect = 0.3237;           //!< detection height of the pair centre [m]
    double g = constants::g_default;    //!< [m/s^2]
    double mass = constants::cs_mass;   //!< atomic mass [kg]
    double pulse_duration = 5e-3;       //!< [s]
    double v_min = 2.0;                 //!< launch sanity band [m/s]
    double v_max = 4.0;
    bool after_apogee_requested = false;

    void validate() const;
};

struct CollisionGeometry
{
    double v_r = 0;              //!< relative speed [m/s]
    double energy = 0;           //!< m v_r^2 / 4 [J]
    double energy_over_kB = 0;   //!< [K]
    double wavenumber = 0;       //!< relative-motion k [1/m]
    double v_z1 = 0;             //!< CoM-frame velocities [m/s]
    double v_z2 = 0;
    double t_collide = 0;        //!< peak overlap [s]
    double z_collide = 0;        //!< [m]
    double T = 0;                //!< Ramsey free-precession time of Cloud 2 [s]
    double t_up1 = 0;            //!< cavity crossings [s]
    double t_dn1 = 0;
    double t_up2 = 0;
    double t_dn2 = 0;
    double t_detect = 0;
    double t_detect_delay = 0;   //!< t_detect - t_collide [s]
    double spread_diameter = 0;  //!< [m]
    bool before_apogee = false;  //!< collision precedes an apogee
    std::vector<std::string> warnings;
};

//! Height and velocity of a cloud launched at t0 with speed v.
double ballistic_height(double v, double t0, double g, double t);
double ballistic_velocity(double v, double t0, double g, double t);

CollisionGeometry collision_geometry(LaunchPlan const& plan);

//! Time spent above the cavity: 2 sqrt(v^2 - 2 g z) / g.
double interrogation_time_for_launch(double v_launch, double z_cavity, double g);

//! Inverse of interrogation_time_for_launch.
double launch_velocity_for_interrogation_time(double T, double z_cavity, double g);

//! Cloud 1 launch speed that makes the clouds meet at t_collide.
double launch_velocity_for_collision_time(double v_launch2, double dt_launch, double t_collide,
                                          double g);

//! Phi / (2 pi T) [Hz]
double equivalent_frequency_shift(double phi, double T);

//! m v_r^2 / 4 for two equal masses.
double collision_energy(double v_r, double mass = constants::cs_mass);
}  // namespace qsi::fountain
