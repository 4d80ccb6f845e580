#include "qsi/clock/ramsey.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "qsi/core/constants.hpp"
#include "qsi/core/errors.hpp"

namespace qsi::clock
{
PulseModel PulseModel::finite_pi_over_two(double duration)
{
    if (!(duration > 0))
        throw ParameterError("pulse duration must be positive");
    return finite_rabi(0.5 * constants::pi / duration, duration);
}

void RamseySequence::validate() const
{
    if (!(T > 0) || !std::isfinite(T))
        throw ParameterError("Ramsey sequence: T must be positive");
    if (!std::isfinite(detuning_hz) || !std::isfinite(inserted_phase)
        || !std::isfinite(pulse_phase_offset))
        throw ParameterError("Ramsey sequence: non-finite detuning or phase");
    if (!(insertion_fraction >= 0 && insertion_fraction <= 1))
        throw ParameterError("Ramsey sequence: insertion_fraction must lie in [0, 1]");
    if (pulse.kind == PulseKind::FiniteRabi)
    {
        if (!(pulse.duration > 0) || !(pulse.rabi_frequency > 0))
            throw ParameterError("finite Rabi pulse needs positive Omega and tau");
        if (std::abs(pulse.rabi_frequency * pulse.duration - 0.5 * constants::pi)
            > area_tolerance)
            throw ParameterError("finite Rabi pulse area differs from pi/2");
        if (!(pulse.duration < T))
            throw ParameterError("pulse duration must be shorter than T");
    }
}

Matrix2 pulse_propagator(double rabi_frequency, double detuning, double phase, double duration)
{
    double const omega_eff = std::hypot(rabi_frequency, detuning);
    if (omega_eff == 0)
        return {1.0, 0.0, 0.0, 1.0};
    double const a = 0.5 * omega_eff * duration;
    double const nx = rabi_frequency * std::cos(phase) / omega_eff;
    double const ny = rabi_frequency * std::sin(phase) / omega_eff;
    double const nz = -detuning / omega_eff;
    Complex const i{0.0, 1.0};
    double const c = std::cos(a);
    double const s = std::sin(a);
    // cos a I - i sin a (n . sigma)
    return {c - i * s * nz, -i * s * Complex(nx, -ny), -i * s * Complex(nx, ny), c + i * s * nz};
}

Matrix2 free_propagator(double detuning, double duration)
{
    double const half = 0.5 * detuning * duration;
    return {std::polar(1.0, half), 0.0, 0.0, std::polar(1.0, -half)};
}

ClockAmplitudes evolve(RamseySequence const& seq, ClockAmplitudes const& initial,
                       ChannelFactors const& factors)
{
    seq.validate();
    double const delta = constants::two_pi * seq.detuning_hz;

    Matrix2 first, second;
    double free_time = seq.T;
    if (seq.pulse.kind == PulseKind::IdealPiOverTwo)
    {
        first = pulse_propagator(1.0, 0.0, 0.0, 0.5 * constants::pi);
        second = pulse_propagator(1.0, 0.0, seq.pulse_phase_offset, 0.5 * constants::pi);
    }
    else
    {
        first = pulse_propagator(seq.pulse.rabi_frequency, delta, 0.0, seq.pulse.duration);
        second = pulse_propagator(seq.pulse.rabi_frequency, delta, seq.pulse_phase_offset,
                                  seq.pulse.duration);
        free_time = seq.T - seq.pulse.duration;
    }
    double const t_a = seq.insertion_fraction * free_time;

    ClockAmplitudes amps = first * initial;
    amps = free_propagator(delta, t_a) * amps;
    amps.c3 *= factors.g3 * std::polar(1.0, seq.inserted_phase);
    amps.c4 *= factors.g4;
    amps = free_propagator(delta, free_time - t_a) * amps;
    return second * amps;
}

double ramsey_probability(RamseySequence const& seq, ChannelFactors const& factors,
                          Detect detect)
{
    auto const out = evolve(seq, {}, factors);
    return detect == Detect::P3 ? std::norm(out.c3) : std::norm(out.c4);
}

double ramsey_probability(RamseySequence const& seq, Detect detect)
{
    double const p = ramsey_probability(seq, ChannelFactors{}, detect);
    return std::clamp(p, 0.0, 1.0);
}

std::vector<FringeSample> fringe_scan(RamseySequence const& seq,
                                      std::span<double const> detuning_grid)
{
    if (detuning_grid.empty())
        throw ParameterError("fringe_scan: empty detuning grid");
    for (std::size_t i = 0; i < detuning_grid.size(); ++i)
    {
        if (!std::isfinite(detuning_grid[i]) || (i > 0 && !(detuning_grid[i] > detuning_grid[i - 1])))
            throw ParameterError("fringe_scan: grid must be finite and ascending");
    }
    std::vector<FringeSample> out;
    out.reserve(detuning_grid.size());
    RamseySequence point = seq;
    for (double nu : detuning_grid)
    {
        point.detuning_hz = nu;
        double const p3 = ramsey_probability(point, Detect::P3);
        out.push_back({nu, p3, 1.0 - p3});
    }
    return out;
}

std::vector<double> default_detuning_grid(double T, int points, double periods)
{
    if (!(T > 0) || points < 2 || !(periods > 0))
        throw ParameterError("default_detuning_grid: need T > 0, points >= 2, periods > 0");
    double const half = periods / T;
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i)
        grid[i] = -half + 2 * half * i / (points - 1);
    if (points % 2 == 1)
        grid[points / 2] = 0.0;
    return grid;
}

ScatteredBranch insert_scattering_phase(ClockAmplitudes const& amps, Complex c)
{
    ScatteredBranch out{amps, std::abs(c)};
    if (out.weight > 0)
        out.amps.c3 *= c / out.weight;
    return out;
}

ClockAmplitudes scatter_clock_state(ClockAmplitudes const& amps, Complex f3, Complex f4)
{
    return {amps.c3 * f3, amps.c4 * f4};
}

void write_fringe_csv(std::ostream& os, std::span<FringeSample const> scan)
{
    os << "detuning_hz,p3,p4\n";
    char buf[96];
    for (auto const& s : scan)
    {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s.detuning_hz, s.p3, s.p4);
        os << buf;
    }
}
}  // namespace qsi::clock
