#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "table.hpp"

namespace qsi::scatter
{
using complex = std::complex<double>;

//! f(theta) = (1/k) sum_l (2l+1) e^{i delta_l} sin(delta_l) P_l(cos theta) [m]
complex scattering_amplitude(std::span<double const> deltas, double k, double theta);
complex scattering_amplitude(PhaseShiftTable const& table, double k, double theta);

struct CrossSections
{
    double total = 0;              //!< [m^2]
    std::vector<double> partial;   //!< sigma_l [m^2]
    std::function<double(double)> differential;  //!< dsigma/dOmega(theta) [m^2/sr]
};

CrossSections cross_sections(PhaseShiftTable const& table, double k);

//! sigma_l = (4 pi / k^2)(2l+1) sin^2 delta_l summed over l.
double total_cross_section(std::span<double const> deltas, double k);

//! c = f3(theta) conj(f4(theta)); arg c is the coherence phase shift.
complex coherence_factor(PhaseShiftTable const& table3,
                         PhaseShiftTable const& table4,
                         double k,
                         double theta);
}  // namespace qsi::scatter
