#include "ccs/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ccs {
namespace {

int g_max_threads = 0;

int hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace

void set_max_threads(int n) { g_max_threads = n < 0 ? 0 : n; }

int max_threads() {
    if (g_max_threads > 0) return g_max_threads;
    return hardware_threads();
}

void parallel_for(std::int64_t n, std::int64_t grain,
                  const std::function<void(std::int64_t, std::int64_t)>& body) {
    if (n <= 0) return;
    if (grain < 1) grain = 1;
    const std::int64_t blocks = (n + grain - 1) / grain;
    const int workers = static_cast<int>(std::min<std::int64_t>(max_threads(), blocks));

    if (workers <= 1 || blocks == 1) {
        for (std::int64_t b = 0; b < blocks; ++b) {
            const std::int64_t lo = b * grain;
            body(lo, std::min(lo + grain, n));
        }
        return;
    }

    std::atomic<std::int64_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;

    auto run = [&]() {
        for (;;) {
            const std::int64_t b = next.fetch_add(1, std::memory_order_relaxed);
            if (b >= blocks) return;
            const std::int64_t lo = b * grain;
            try {
                body(lo, std::min(lo + grain, n));
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int i = 0; i < workers - 1; ++i) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();

    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ccs
