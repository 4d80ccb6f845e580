#include "qsi/core/rng.hpp"

namespace qsi
{
namespace
{
constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo)
{
    std::uint64_t const p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}
}  // namespace

PhiloxEngine::Counter PhiloxEngine::block(Counter ctr, Key key)
{
    for (int round = 0; round < 10; ++round)
    {
        if (round > 0)
        {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

PhiloxEngine::PhiloxEngine(std::uint64_t seed, std::uint64_t stream, std::uint32_t purpose)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}
    , ctr_{0u, purpose, static_cast<std::uint32_t>(stream),
           static_cast<std::uint32_t>(stream >> 32)}
{
}

PhiloxEngine::result_type PhiloxEngine::operator()()
{
    if (used_ >= 4)
    {
        buffer_ = block(ctr_, key_);
        ++ctr_[0];
        used_ = 0;
    }
    std::uint64_t const hi = buffer_[used_];
    std::uint64_t const lo = buffer_[used_ + 1];
    used_ += 2;
    return (hi << 32) | lo;
}

double PhiloxEngine::uniform()
{
    // 53 random mantissa bits, offset by half an ulp to exclude 0 and 1
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace qsi
