#include "qsi/scatterlib/potential.hpp"

#include <cmath>

#include "qsi/core/constants.hpp"
#include "qsi/core/errors.hpp"

namespace qsi::scatter
{
Potential Potential::square_well(double depth, double radius, double reduced_mass)
{
    Potential p;
    p.kind = PotentialKind::SquareWell;
    p.depth = depth;
    p.radius = radius;
    p.reduced_mass = reduced_mass;
    p.validate();
    return p;
}

Potential Potential::lennard_jones(double c12, double c6, double reduced_mass)
{
    Potential p;
    p.kind = PotentialKind::LennardJones;
    p.c12 = c12;
    p.c6 = c6;
    p.reduced_mass = reduced_mass;
    p.validate();
    return p;
}

void Potential::validate() const
{
    if (!(reduced_mass > 0) || !std::isfinite(reduced_mass))
        throw ParameterError("potential: reduced mass must be positive");
    switch (kind)
    {
        case PotentialKind::SquareWell:
            if (!(radius > 0) || !std::isfinite(radius))
                throw ParameterError("square well: radius must be positive");
            if (!(depth >= 0) || !std::isfinite(depth))
                throw ParameterError("square well: depth must be non-negative");
            break;
        case PotentialKind::LennardJones:
            if (!(c12 > 0) || !(c6 > 0) || !std::isfinite(c12) || !std::isfinite(c6))
                throw ParameterError("Lennard-Jones: c12 and c6 must be positive");
            if (!(core_factor > 1))
                throw ParameterError("Lennard-Jones: core factor must exceed 1");
            break;
    }
}

double Potential::operator()(double r) const
{
    if (kind == PotentialKind::SquareWell)
        return r < radius ? -depth : 0.0;
    double const inv6 = 1.0 / (r * r * r * r * r * r);
    return c12 * inv6 * inv6 - c6 * inv6;
}

std::optional<double> Potential::discontinuity() const
{
    if (kind == PotentialKind::SquareWell && depth > 0)
        return radius;
    return std::nullopt;
}

double Potential::length_scale() const
{
    if (kind == PotentialKind::SquareWell)
        return radius;
    return std::pow(2 * c12 / c6, 1.0 / 6.0);
}

double Potential::well_depth() const
{
    if (kind == PotentialKind::SquareWell)
        return depth;
    return c6 * c6 / (4 * c12);
}

double Potential::inner_radius() const
{
    if (kind == PotentialKind::SquareWell)
        return 0.0;
    // Repulsive wall where V = core_factor * epsilon:
    // c12 y^2 - c6 y - core_factor * epsilon = 0 with y = r^-6
    double const eps = well_depth();
    double const y
        = (c6 + std::sqrt(c6 * c6 + 4 * c12 * core_factor * eps)) / (2 * c12);
    return std::pow(y, -1.0 / 6.0);
}

double Potential::coupling() const
{
    return 2 * reduced_mass / (constants::hbar * constants::hbar);
}

double collision_energy(double k, double reduced_mass)
{
    return constants::hbar * constants::hbar * k * k / (2 * reduced_mass);
}

double wavenumber(double energy, double reduced_mass)
{
    return std::sqrt(2 * reduced_mass * energy) / constants::hbar;
}

std::string to_string(PotentialKind kind)
{
    return kind == PotentialKind::SquareWell ? "square_well" : "lennard_jones";
}
}  // namespace qsi::scatter
