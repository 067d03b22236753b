#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace r2a {

// Worker cap from RELU2ATTN_THREADS, else hardware concurrency.
inline std::size_t worker_count()
{
    if (const char* env = std::getenv("RELU2ATTN_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1)
                return static_cast<std::size_t>(v);
        } catch (...) {
        }
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries do not
// affect results as long as fn writes only its own slots.
template <class Fn>
void parallel_chunks(std::size_t n, Fn&& fn)
{
    const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(1, n));
    if (workers <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex mu;
    const std::size_t step = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = w * step, e = std::min(n, b + step);
        if (b >= e)
            break;
        pool.emplace_back([&, b, e] {
            try {
                fn(b, e);
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!err)
                    err = std::current_exception();
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (err)
        std::rethrow_exception(err);
}

} // namespace r2a
