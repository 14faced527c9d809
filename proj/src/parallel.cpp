#include "lanp/parallel.hpp"

#include <cstdlib>
#include <thread>
#include <vector>

namespace lanp {

int thread_count() {
    static int cached = [] {
        if (const char* env = std::getenv("LANP_THREADS")) {
            int n = std::atoi(env);
            if (n >= 1) return n;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : (int)hw;
    }();
    return cached;
}

void parallel_chunks(std::size_t n, int threads,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    std::size_t workers = (std::size_t)std::max(1, threads);
    if (workers > n) workers = n;
    if (workers == 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::size_t base = n / workers, rem = n % workers;
    std::size_t begin = 0;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t len = base + (w < rem ? 1 : 0);
        std::size_t end = begin + len;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
        begin = end;
    }
    for (auto& t : pool) t.join();
}

} // namespace lanp
