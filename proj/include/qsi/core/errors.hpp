#pragma once

#include <stdexcept>
#include <string>

namespace qsi
{
//! Base class for all errors raised by the toolkit.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

//! Invalid argument or domain object.
class ParameterError : public Error
{
  public:
    using Error::Error;
};

//! Numerical solver failed to converge.
class SolverError : public Error
{
  public:
    using Error::Error;
};

//! Scattering length diverges (potential at or near a zero-energy resonance).
class ResonanceError : public Error
{
  public:
    using Error::Error;
};

//! Query outside the tabulated domain.
class RangeError : public Error
{
  public:
    using Error::Error;
};

//! Launch plan does not produce a usable collision/detection geometry.
class GeometryError : public Error
{
  public:
    using Error::Error;
};

//! Malformed or inconsistent experiment configuration.
class ConfigError : public Error
{
  public:
    using Error::Error;
};

//! Least-squares fit failed from every starting point.
class FitError : public Error
{
  public:
    using Error::Error;
};
}  // namespace qsi
