#pragma once

namespace qsi::scatter
{
//! Riccati-Bessel x j_l(x).
double riccati_j(int l, double x);
//! Riccati-Neumann x y_l(x) (x y_0 = -cos x).
double riccati_y(int l, double x);
//! Derivatives with respect to x.
double riccati_j_prime(int l, double x);
double riccati_y_prime(int l, double x);
}  // namespace qsi::scatter
