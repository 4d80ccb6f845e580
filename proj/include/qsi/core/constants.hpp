#pragma once

#include <numbers>

namespace qsi::constants
{
//! Caesium-133 atomic mass [kg]
inline constexpr double cs_mass = 2.2069468e-25;
//! Reduced Planck constant [J s]
inline constexpr double hbar = 1.054571817e-34;
//! Boltzmann constant [J/K]
inline constexpr double k_boltzmann = 1.380649e-23;
//! Default gravitational acceleration [m/s^2]
inline constexpr double g_default = 9.80;
//! Caesium clock frequency [Hz]
inline constexpr double cs_clock_hz = 9.192631770e9;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
}  // namespace qsi::constants
