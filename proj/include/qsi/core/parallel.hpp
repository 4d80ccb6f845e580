#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace qsi
{
//! Resolve a requested worker count (0 = hardware concurrency).
inline unsigned resolve_workers(unsigned requested)
{
    if (requested > 0)
        return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

/*!
 * Run f(i) for i in [0, n) over contiguous static chunks.
 *
 * Callers write results into per-index slots; any reduction happens afterwards
 * in index order so output never depends on the worker count.
 */
template<class F>
void parallel_for(std::size_t n, unsigned workers, F&& f)
{
    unsigned const nw
        = static_cast<unsigned>(std::min<std::size_t>(resolve_workers(workers), n));
    if (nw <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
            f(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(nw);
    std::size_t const chunk = (n + nw - 1) / nw;
    for (unsigned w = 0; w < nw; ++w)
    {
        std::size_t const begin = w * chunk;
        std::size_t const end = std::min(n, begin + chunk);
        if (begin >= end)
            break;
        pool.emplace_back([begin, end, &f] {
            for (std::size_t i = begin; i < end; ++i)
                f(i);
        });
    }
}
}  // namespace qsi
