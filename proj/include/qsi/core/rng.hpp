#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace qsi
{
//---------------------------------------------------------------------------//
/*!
 * Philox4x32-10 counter-based generator.
 *
 * Every (seed, stream, purpose) triple addresses an independent sequence, so a
 * Monte Carlo sample can draw from its own stream regardless of which worker
 * thread processes it. Satisfies UniformRandomBitGenerator.
 */
class PhiloxEngine
{
  public:
    using result_type = std::uint64_t;
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    PhiloxEngine(std::uint64_t seed, std::uint64_t stream, std::uint32_t purpose = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max()
    {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()();

    //! Uniform double in the open interval (0, 1).
    double uniform();

    //! Raw block function (exposed for known-answer tests).
    static Counter block(Counter ctr, Key key);

  private:
    Key key_;
    Counter ctr_;
    Counter buffer_{};
    int used_ = 4;
};

//! Mix a list of integers into a single 64-bit seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
}  // namespace qsi
