#include "qsi/scatterlib/square_well.hpp"

#include <cmath>

#include "qsi/core/errors.hpp"
#include "qsi/scatterlib/phase_shift.hpp"
#include "qsi/scatterlib/riccati.hpp"

namespace qsi::scatter
{
double square_well_interior_wavenumber(Potential const& well)
{
    return std::sqrt(well.coupling() * well.depth);
}

double square_well_phase_shift(Potential const& well, double k, int l)
{
    if (well.kind != PotentialKind::SquareWell)
        throw ParameterError("square_well_phase_shift: potential is not a square well");
    well.validate();
    if (!(k > 0))
        throw ParameterError("square_well_phase_shift: wavenumber must be positive");
    double const R = well.radius;
    double const K = std::sqrt(k * k + well.coupling() * well.depth);
    if (l == 0)
        return reduce_mod_pi(-k * R + std::atan(k / K * std::tan(K * R)));

    // Match the interior log-derivative K j^'(KR) / j(KR) to the exterior.
    double const jin = riccati_j(l, K * R);
    double const djin = riccati_j_prime(l, K * R);
    double const num = k * riccati_j_prime(l, k * R) * jin - K * djin * riccati_j(l, k * R);
    double const den = k * riccati_y_prime(l, k * R) * jin - K * djin * riccati_y(l, k * R);
    return reduce_mod_pi(std::atan2(num, den));
}

double square_well_scattering_length(Potential const& well)
{
    if (well.depth == 0)
        return 0.0;
    double const x = square_well_interior_wavenumber(well) * well.radius;
    return well.radius * (1 - std::tan(x) / x);
}

double square_well_depth_for(double k0_radius, double radius, double reduced_mass)
{
    Potential probe;
    probe.reduced_mass = reduced_mass;
    double const k0 = k0_radius / radius;
    return k0 * k0 / probe.coupling();
}
}  // namespace qsi::scatter
