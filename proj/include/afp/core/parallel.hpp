#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace afp {

// Splits [0, n) into n_chunks contiguous ranges and runs fn(chunk, begin, end)
// on a thread per chunk. Chunk boundaries depend only on (n, n_chunks), so
// any per-chunk results a caller reduces in chunk order are reproducible.
inline void parallel_chunks(std::size_t n, std::size_t n_chunks,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (n_chunks < 1) n_chunks = 1;
    if (n_chunks > n) n_chunks = n;
    if (n_chunks == 1) {
        fn(0, 0, n);
        return;
    }
    const std::size_t base = n / n_chunks;
    const std::size_t rem = n % n_chunks;
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(n_chunks);
    threads.reserve(n_chunks);
    std::size_t begin = 0;
    for (std::size_t c = 0; c < n_chunks; ++c) {
        const std::size_t len = base + (c < rem ? 1 : 0);
        const std::size_t end = begin + len;
        threads.emplace_back([&fn, &errors, c, begin, end] {
            try {
                fn(c, begin, end);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        });
        begin = end;
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace afp
