#pragma once

#include "potential.hpp"

namespace qsi::scatter
{
struct SolverOptions
{
    //! Halve the step until successive phase shifts differ by less than this [rad].
    double tolerance = 1e-8;
    //! Steps across the interaction region on the coarsest grid.
    int initial_steps = 64;
    int max_halvings = 14;
    //! LJ matching radius: |V(r_match)| = tail_fraction * well depth.
    double tail_fraction = 1e-8;
    //! Distance between the two matching points, as a fraction of the
    //! interaction region length.
    double match_extension = 0.5;
};

/*!
 * Partial-wave phase shift delta_l(k) by Numerov integration of the radial
 * equation u'' = [l(l+1)/r^2 + 2 mu V / hbar^2 - k^2] u, matched to
 * Riccati-Bessel functions outside the interaction region.
 *
 * The result is reduced to (-pi/2, pi/2]: the S-matrix fixes delta only
 * modulo pi.
 */
double solve_phase_shift(Potential const& potential,
                         double k,
                         int l,
                         SolverOptions const& options = {});

struct ScatteringLength
{
    double value = 0;                 //!< [m]
    double relative_uncertainty = 0;  //!< from the Richardson tableau
};

//! a = lim_{k->0} -delta_0(k) / k by Richardson extrapolation in k^2.
ScatteringLength scattering_length(Potential const& potential,
                                   SolverOptions const& options = {});

//! Reduce an angle into (-pi/2, pi/2].
double reduce_mod_pi(double delta);

//! Reduce an angle into (-pi, pi].
double reduce_mod_2pi(double angle);
}  // namespace qsi::scatter
