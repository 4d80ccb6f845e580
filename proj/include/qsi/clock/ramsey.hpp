#pragma once

#include <complex>
#include <iosfwd>
#include <span>
#include <vector>

namespace qsi::clock
{
using Complex = std::complex<double>;

//! Amplitudes on the clock pair (|3,0>, |4,0>).
struct ClockAmplitudes
{
    Complex c3{1.0, 0.0};
    Complex c4{0.0, 0.0};

    double norm2() const { return std::norm(c3) + std::norm(c4); }
};

enum class PulseKind
{
    IdealPiOverTwo,
    FiniteRabi
};

struct PulseModel
{
    PulseKind kind = PulseKind::IdealPiOverTwo;
    double rabi_frequency = 0;  //!< Omega [rad/s]
    double duration = 0;        //!< tau_p [s]

    static PulseModel ideal() { return {}; }
    static PulseModel finite_rabi(double rabi_frequency, double duration)
    {
        return {PulseKind::FiniteRabi, rabi_frequency, duration};
    }
    //! Square pulse of length tau with Omega tau = pi / 2.
    static PulseModel finite_pi_over_two(double duration);
};

//! Factors applied to (c3, c4) when the scattering event happens.
struct ChannelFactors
{
    Complex g3{1.0, 0.0};
    Complex g4{1.0, 0.0};
};

struct RamseySequence
{
    double T = 0;                   //!< free precession between pulse centres [s]
    double detuning_hz = 0;         //!< nu - nu_0
    PulseModel pulse;
    double inserted_phase = 0;      //!< applied to c3 relative to c4 [rad]
    double insertion_fraction = 0.5;  //!< where in the free precession the phase is applied
    double pulse_phase_offset = 0;  //!< microwave phase of the second pulse [rad]
    double area_tolerance = 1e-3;   //!< allowed |Omega tau - pi/2| [rad]

    void validate() const;
};

enum class Detect
{
    P3,
    P4
};

//! 2x2 propagators in the (c3, c4) basis.
struct Matrix2
{
    Complex a, b, c, d;  // [[a, b], [c, d]]

    ClockAmplitudes operator*(ClockAmplitudes const& v) const
    {
        return {a * v.c3 + b * v.c4, c * v.c3 + d * v.c4};
    }
    Matrix2 operator*(Matrix2 const& m) const
    {
        return {a * m.a + b * m.c, a * m.b + b * m.d, c * m.a + d * m.c, c * m.b + d * m.d};
    }
};

//! exp(-i H t / hbar) for H = (hbar/2) [[-Delta, Omega e^{-i phi}], [Omega e^{i phi}, Delta]].
Matrix2 pulse_propagator(double rabi_frequency, double detuning, double phase, double duration);
Matrix2 free_propagator(double detuning, double duration);

//! Full sequence starting from `initial`; the channel factors multiply the
//! amplitudes at the insertion instant together with exp(i Phi) on c3.
ClockAmplitudes evolve(RamseySequence const& seq, ClockAmplitudes const& initial = {},
                       ChannelFactors const& factors = {});

double ramsey_probability(RamseySequence const& seq, Detect detect = Detect::P3);

//! |c3|^2 or |c4|^2 after a sequence with channel factors (not renormalized).
double ramsey_probability(RamseySequence const& seq, ChannelFactors const& factors,
                          Detect detect = Detect::P3);

struct FringeSample
{
    double detuning_hz = 0;
    double p3 = 0;
    double p4 = 0;
};

std::vector<FringeSample> fringe_scan(RamseySequence const& seq,
                                      std::span<double const> detuning_grid);

//! `points` values spanning +/- periods / T, centred on zero.
std::vector<double> default_detuning_grid(double T, int points = 161, double periods = 2.0);

struct ScatteredBranch
{
    ClockAmplitudes amps;
    double weight = 0;
};

//! Rotate the coherence by arg(c); the branch weight is |c|.
ScatteredBranch insert_scattering_phase(ClockAmplitudes const& amps, Complex c);

//! General scattering map c3 -> f3 c3, c4 -> f4 c4.
ClockAmplitudes scatter_clock_state(ClockAmplitudes const& amps, Complex f3, Complex f4);

void write_fringe_csv(std::ostream& os, std::span<FringeSample const> scan);
}  // namespace qsi::clock
