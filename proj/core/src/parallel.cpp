#include "udfvol/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace udfvol {

int thread_count() {
    static const int n = [] {
        if (const char* env = std::getenv("UDFVOL_THREADS")) {
            int v = std::atoi(env);
            if (v > 0) return v;
        }
        unsigned hc = std::thread::hardware_concurrency();
        return hc > 0 ? int(hc) : 1;
    }();
    return n;
}

void parallel_chunks(int64_t n, int64_t chunk,
                     const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    if (chunk <= 0) throw std::invalid_argument("chunk size must be positive");
    const int64_t num_chunks = (n + chunk - 1) / chunk;
    const int workers = thread_count();
    if (workers == 1 || num_chunks == 1) {
        for (int64_t c = 0; c < num_chunks; ++c) {
            int64_t b = c * chunk;
            fn(b, std::min(b + chunk, n));
        }
        return;
    }
    std::atomic<int64_t> next{0};
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            int64_t c = next.fetch_add(1, std::memory_order_relaxed);
            if (c >= num_chunks || failed.load(std::memory_order_relaxed)) return;
            int64_t b = c * chunk;
            try {
                fn(b, std::min(b + chunk, n));
            } catch (...) {
                if (!failed.exchange(true)) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    int spawn = int(std::min<int64_t>(workers, num_chunks));
    pool.reserve(spawn);
    for (int i = 0; i < spawn; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

uint64_t derive_seed(uint64_t base, uint64_t salt) {
    uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace udfvol
