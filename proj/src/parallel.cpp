#include "qkdv/parallel.hpp"

namespace qkdv {

namespace {
std::atomic<int> g_default_threads{0};
}

int default_threads() {
    const int n = g_default_threads.load();
    if (n > 0) return n;
    return std::max(1u, std::thread::hardware_concurrency());
}

void set_default_threads(int n) { g_default_threads.store(std::max(0, n)); }

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    if (n <= 0) return;
    const int workers = std::min(n, threads > 0 ? threads : default_threads());
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace qkdv
