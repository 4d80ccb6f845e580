#include "qsi/scatterlib/amplitude.hpp"

#include <cmath>
#include <memory>

#include "qsi/core/constants.hpp"
#include "qsi/core/errors.hpp"

namespace qsi::scatter
{
namespace
{
void check_theta(double theta)
{
    if (!(theta >= 0) || !(theta <= constants::pi))
        throw ParameterError("scattering angle must lie in [0, pi]");
}
}  // namespace

complex scattering_amplitude(std::span<double const> deltas, double k, double theta)
{
    check_theta(theta);
    if (!(k > 0))
        throw ParameterError("scattering amplitude: wavenumber must be positive");
    double const x = std::sin(0.5 * constants::pi - theta);
    complex sum{0, 0};
    for (std::size_t l = 0; l < deltas.size(); ++l)
    {
        double const d = deltas[l];
        double const pl = std::legendre(static_cast<unsigned>(l), x);
        sum += (2.0 * l + 1.0) * std::polar(std::sin(d), d) * pl;
    }
    return sum / k;
}

complex scattering_amplitude(PhaseShiftTable const& table, double k, double theta)
{
    auto const deltas = table.deltas_at(k);
    return scattering_amplitude(deltas, k, theta);
}

double total_cross_section(std::span<double const> deltas, double k)
{
    double sum = 0;
    for (std::size_t l = 0; l < deltas.size(); ++l)
    {
        double const s = std::sin(deltas[l]);
        sum += (2.0 * l + 1.0) * s * s;
    }
    return 4 * constants::pi / (k * k) * sum;
}

CrossSections cross_sections(PhaseShiftTable const& table, double k)
{
    auto deltas = table.deltas_at(k);
    CrossSections out;
    out.partial.resize(deltas.size());
    for (std::size_t l = 0; l < deltas.size(); ++l)
    {
        double const s = std::sin(deltas[l]);
        out.partial[l] = 4 * constants::pi / (k * k) * (2.0 * l + 1.0) * s * s;
        out.total += out.partial[l];
    }
    auto shared = std::make_shared<std::vector<double> const>(std::move(deltas));
    out.differential = [shared, k](double theta) {
        return std::norm(scattering_amplitude(*shared, k, theta));
    };
    return out;
}

complex coherence_factor(PhaseShiftTable const& table3,
                         PhaseShiftTable const& table4,
                         double k,
                         double theta)
{
    return scattering_amplitude(table3, k, theta)
           * std::conj(scattering_amplitude(table4, k, theta));
}
}  // namespace qsi::scatter
