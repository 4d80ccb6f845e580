#pragma once

#include "potential.hpp"

namespace qsi::scatter
{
//! Closed-form square-well phase shift for any l, reduced to (-pi/2, pi/2].
double square_well_phase_shift(Potential const& well, double k, int l);

//! Closed-form square-well scattering length R (1 - tan(K0 R) / (K0 R)).
double square_well_scattering_length(Potential const& well);

//! Interior wavenumber K0 = sqrt(2 mu V0) / hbar.
double square_well_interior_wavenumber(Potential const& well);

//! Depth giving K0 R = x for the given radius and reduced mass.
double square_well_depth_for(double k0_radius, double radius, double reduced_mass);
}  // namespace qsi::scatter
