#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace smbound {

// Worker count used by every parallel map in the library. 0 means hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Runs body(begin, end, worker) over contiguous chunks of [0, n). Chunk boundaries
// depend only on n and the chunk count, never on scheduling.
void parallel_chunks(std::size_t n, std::size_t chunks,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

// Deterministic parallel map: out[i] = f(i).
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, F&& f) {
    std::vector<T> out(n);
    parallel_chunks(n, static_cast<std::size_t>(thread_count()),
                    [&](std::size_t b, std::size_t e, std::size_t) {
                        for (std::size_t i = b; i < e; ++i) out[i] = f(i);
                    });
    return out;
}

}  // namespace smbound
