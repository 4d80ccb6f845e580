#include "qsi/scatterlib/phase_shift.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "qsi/core/constants.hpp"
#include "qsi/core/errors.hpp"
#include "qsi/scatterlib/riccati.hpp"

namespace qsi::scatter
{
namespace
{
//! Uniform radial grid with the two matching nodes and an optional
//! node sitting exactly on a potential discontinuity.
struct RadialGrid
{
    double r0 = 0;
    double h = 0;
    long breakpoint = -1;
    long match1 = 0;
    long match2 = 0;
    bool from_origin = false;
};

RadialGrid make_grid(Potential const& pot, double k, long steps, SolverOptions const& opts)
{
    RadialGrid grid;
    auto extension = [&](long n) {
        return std::max<long>(4, static_cast<long>(std::ceil(n * opts.match_extension)));
    };
    if (pot.kind == PotentialKind::SquareWell)
    {
        grid.r0 = 0;
        grid.from_origin = true;
        grid.h = pot.radius / static_cast<double>(steps);
        grid.breakpoint = pot.discontinuity() ? steps : -1;
        grid.match1 = steps;
        grid.match2 = steps + extension(steps);
    }
    else
    {
        double const eps = pot.well_depth();
        double const r_tail = std::pow(pot.c6 / (opts.tail_fraction * eps), 1.0 / 6.0);
        grid.r0 = pot.inner_radius();
        grid.h = (r_tail - grid.r0) / static_cast<double>(steps);
        grid.match1 = steps;
        grid.match2 = steps + extension(steps);
    }
    (void)k;
    return grid;
}

// Regular solution near the origin for a potential that is constant there:
// u = r^{l+1} sum_j c_j r^{2j}, c_j = -q^2 c_{j-1} / (2j (2j + 2l + 1)).
double origin_series(int l, double q2, double r)
{
    double term = 1.0;
    double sum = 1.0;
    for (int j = 1; j < 60; ++j)
    {
        term *= -q2 * r * r / (2.0 * j * (2.0 * j + 2.0 * l + 1.0));
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum))
            break;
    }
    return std::pow(r, l + 1) * sum;
}

double integrate_once(Potential const& pot, double k, int l, RadialGrid const& grid)
{
    double const coupling = pot.coupling();
    double const centrifugal = l * (l + 1.0);
    double const k2 = k * k;
    double const h = grid.h;
    double const h2 = h * h;

    auto f_at = [&](double r, double v) { return centrifugal / (r * r) + coupling * v - k2; };
    auto f_node = [&](long n) {
        double const r = grid.r0 + n * h;
        return f_at(r, pot(r));
    };
    // Left/right limits at the discontinuity node
    double f_left = 0;
    double f_right = 0;
    if (grid.breakpoint >= 0)
    {
        double const rb = grid.r0 + grid.breakpoint * h;
        f_left = f_at(rb, -pot.depth);
        f_right = f_at(rb, 0.0);
    }

    long n;
    double u_prev, u_cur, f_prev, f_cur;
    if (grid.from_origin)
    {
        double const q2 = k2 - coupling * pot(0.5 * h);
        u_prev = origin_series(l, q2, h);
        u_cur = origin_series(l, q2, 2 * h);
        n = 2;
        f_prev = f_node(1);
    }
    else
    {
        u_prev = 0.0;
        u_cur = 1e-30;
        n = 1;
        f_prev = f_node(0);
    }
    if (n == grid.breakpoint)
        throw SolverError("radial grid too coarse to resolve the potential step");
    f_cur = f_node(n);

    double u_match1 = 0;
    double u_match2 = 0;
    if (n == grid.match1)
        u_match1 = u_cur;

    // Summed form: carry the first difference of y = (1 - h^2 f / 12) u to
    // keep round-off from growing quadratically with the step count.
    auto y_of = [&](double f, double u) { return (1 - h2 * f / 12.0) * u; };
    double y_cur = y_of(f_cur, u_cur);
    double diff = y_cur - y_of(f_prev, u_prev);

    for (; n < grid.match2; ++n)
    {
        bool const at_break = (n == grid.breakpoint);
        bool const next_break = (n + 1 == grid.breakpoint);
        double const f_next = next_break ? f_left : f_node(n + 1);

        double u_next;
        if (at_break)
        {
            // Numerov across a jump in u'': add the h^3 term from the jump of
            // u''' = f u' + f' u, with u' from a third-order one-sided formula.
            double const f_mean = 0.5 * (f_left + f_right);
            double const du = (u_cur - u_prev) / h + h / 3.0 * f_left * u_cur
                              + h / 6.0 * f_prev * u_prev;
            double const rhs = 2 * u_cur - u_prev
                               + h2 / 12.0 * (10 * f_mean * u_cur + f_prev * u_prev)
                               + h2 * h / 12.0 * (f_right - f_left) * du;
            u_next = rhs / (1 - h2 * f_next / 12.0);
            y_cur = y_of(f_next, u_next);
            diff = y_cur - y_of(f_right, u_cur);
        }
        else
        {
            diff += h2 * f_cur * u_cur;
            y_cur += diff;
            u_next = y_cur / (1 - h2 * f_next / 12.0);
        }

        u_prev = u_cur;
        u_cur = u_next;
        f_prev = at_break ? f_right : f_cur;
        f_cur = next_break ? f_left : f_next;

        if (std::abs(u_cur) > 1e200)
        {
            u_prev *= 1e-200;
            u_cur *= 1e-200;
            y_cur *= 1e-200;
            diff *= 1e-200;
            u_match1 *= 1e-200;
        }
        if (n + 1 == grid.match1)
            u_match1 = u_cur;
    }
    u_match2 = u_cur;

    double const r1 = grid.r0 + grid.match1 * h;
    double const r2 = grid.r0 + grid.match2 * h;
    double const x1 = k * r1;
    double const x2 = k * r2;
    double const num = u_match2 * riccati_j(l, x1) - u_match1 * riccati_j(l, x2);
    double const den = u_match2 * riccati_y(l, x1) - u_match1 * riccati_y(l, x2);
    if (!std::isfinite(num) || !std::isfinite(den) || (num == 0 && den == 0))
        throw SolverError("degenerate matching of the radial solution");
    return reduce_mod_pi(std::atan2(num, den));
}

long initial_steps(Potential const& pot, double k, SolverOptions const& opts)
{
    double q_max;
    double span;
    if (pot.kind == PotentialKind::SquareWell)
    {
        q_max = std::sqrt(k * k + pot.coupling() * pot.depth);
        span = pot.radius;
    }
    else
    {
        q_max = std::sqrt(k * k + pot.coupling() * pot.well_depth() * pot.core_factor);
        double const r_tail = std::pow(
            pot.c6 / (opts.tail_fraction * pot.well_depth()), 1.0 / 6.0);
        span = r_tail - pot.inner_radius();
    }
    long const resolved = static_cast<long>(std::ceil(2.0 * q_max * span));
    return std::max<long>(opts.initial_steps, resolved);
}
}  // namespace

double reduce_mod_pi(double delta)
{
    double r = std::remainder(delta, constants::pi);
    if (r <= -0.5 * constants::pi)
        r += constants::pi;
    return r;
}

double reduce_mod_2pi(double angle)
{
    double r = std::remainder(angle, constants::two_pi);
    if (r <= -constants::pi)
        r += constants::two_pi;
    return r;
}

double solve_phase_shift(Potential const& potential, double k, int l, SolverOptions const& opts)
{
    potential.validate();
    if (!(k > 0) || !std::isfinite(k))
        throw ParameterError("solve_phase_shift: wavenumber must be positive");
    if (l < 0)
        throw ParameterError("solve_phase_shift: partial wave must be non-negative");
    if (potential.kind == PotentialKind::SquareWell && potential.depth == 0)
        return 0.0;

    long steps = initial_steps(potential, k, opts);
    double previous = integrate_once(potential, k, l, make_grid(potential, k, steps, opts));
    for (int level = 0; level < opts.max_halvings; ++level)
    {
        steps *= 2;
        double const current
            = integrate_once(potential, k, l, make_grid(potential, k, steps, opts));
        if (std::abs(reduce_mod_pi(current - previous)) < opts.tolerance)
            return current;
        previous = current;
    }
    std::ostringstream msg;
    msg << "phase shift did not converge for k=" << k << " m^-1, l=" << l;
    throw SolverError(msg.str());
}

ScatteringLength scattering_length(Potential const& potential, SolverOptions const& options)
{
    potential.validate();
    if (potential.kind == PotentialKind::SquareWell && potential.depth == 0)
        return {0.0, 0.0};

    SolverOptions opts = options;
    opts.tolerance = std::min(opts.tolerance, 1e-10);

    constexpr int levels = 5;
    constexpr double target_ka = 0.02;
    double const scale = potential.length_scale();
    double k0 = target_ka / scale;

    for (int attempt = 0; attempt < 12; ++attempt)
    {
        // Richardson tableau in k^2 for A(k) = -delta_0(k) / k
        double tab[levels][levels];
        for (int j = 0; j < levels; ++j)
        {
            double const k = k0 / std::ldexp(1.0, j);
            double delta;
            try
            {
                delta = solve_phase_shift(potential, k, 0, opts);
            }
            catch (SolverError const& e)
            {
                throw ResonanceError(std::string("scattering length unresolved as k -> 0: ")
                                     + e.what());
            }
            tab[j][0] = -delta / k;
            for (int m = 1; m <= j; ++m)
            {
                double const f = std::ldexp(1.0, 2 * m);
                tab[j][m] = (f * tab[j][m - 1] - tab[j - 1][m - 1]) / (f - 1);
            }
        }
        double const a = tab[levels - 1][levels - 1];
        double const ka = k0 * std::abs(a);
        if (ka > 2 * target_ka)
        {
            k0 = target_ka / std::abs(a);
            if (k0 * scale < 1e-12)
                break;
            continue;
        }
        double const denom = std::max(std::abs(a), 1e-12 * scale);
        double const unc = std::abs(a - tab[levels - 2][levels - 2]) / denom;
        if (unc > 1e-3)
            break;
        return {a, unc};
    }
    throw ResonanceError(
        "scattering length does not converge as k -> 0 (potential near a zero-energy "
        "resonance)");
}
}  // namespace qsi::scatter
