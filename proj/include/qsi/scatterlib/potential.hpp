#pragma once

#include <optional>
#include <string>

namespace qsi::scatter
{
enum class PotentialKind
{
    SquareWell,
    LennardJones
};

//---------------------------------------------------------------------------//
/*!
 * Central model interaction potential plus the reduced mass of the pair.
 *
 * SquareWell: V(r) = -depth for r < radius, 0 outside (depth > 0 is attractive).
 * LennardJones: V(r) = c12 / r^12 - c6 / r^6.
 */
struct Potential
{
    PotentialKind kind = PotentialKind::SquareWell;
    double depth = 0;          //!< [J]
    double radius = 0;         //!< [m]
    double c12 = 0;            //!< [J m^12]
    double c6 = 0;             //!< [J m^6]
    double reduced_mass = 0;   //!< [kg]
    //! Inner integration start for LennardJones: V(r_min) = core_factor * well depth
    double core_factor = 100;

    static Potential square_well(double depth, double radius, double reduced_mass);
    static Potential lennard_jones(double c12, double c6, double reduced_mass);

    //! Throws ParameterError if an invariant is violated.
    void validate() const;

    double operator()(double r) const;

    //! Positions where V is discontinuous.
    std::optional<double> discontinuity() const;

    //! Characteristic length (well radius or LJ minimum position).
    double length_scale() const;

    //! LJ well depth epsilon = c6^2 / (4 c12); square-well depth otherwise.
    double well_depth() const;

    //! Start of the radial integration.
    double inner_radius() const;

    //! 2 mu / hbar^2 [1 / (J m^2)]
    double coupling() const;
};

//! Reduced mass of an equal-mass pair.
constexpr double equal_mass_reduced(double mass) { return 0.5 * mass; }

//! Kinetic energy of relative motion for wavenumber k.
double collision_energy(double k, double reduced_mass);

//! Wavenumber of relative motion for collision energy E.
double wavenumber(double energy, double reduced_mass);

std::string to_string(PotentialKind kind);
}  // namespace qsi::scatter
