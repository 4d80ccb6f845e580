#include "qsi/scatterlib/riccati.hpp"

#include <cmath>

namespace qsi::scatter
{
namespace
{
// Power series of x j_l(x), used where upward recurrence loses digits.
double riccati_j_series(int l, double x)
{
    double prefactor = x;
    for (int i = 1; i <= l; ++i)
        prefactor *= x / (2 * i + 1);
    double const half_x2 = 0.5 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int j = 1; j < 40; ++j)
    {
        term *= -half_x2 / (j * (2 * l + 2 * j + 1));
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum))
            break;
    }
    return prefactor * sum;
}
}  // namespace

double riccati_j(int l, double x)
{
    if (x < 0.5 + l)
        return riccati_j_series(l, x);
    return x * std::sph_bessel(static_cast<unsigned>(l), x);
}

double riccati_y(int l, double x)
{
    return x * std::sph_neumann(static_cast<unsigned>(l), x);
}

double riccati_j_prime(int l, double x)
{
    // (x j_l)' = x j_{l-1} - l j_l
    if (l == 0)
        return std::cos(x);
    return riccati_j(l - 1, x) - l * riccati_j(l, x) / x;
}

double riccati_y_prime(int l, double x)
{
    if (l == 0)
        return std::sin(x);
    return riccati_y(l - 1, x) - l * riccati_y(l, x) / x;
}
}  // namespace qsi::scatter
