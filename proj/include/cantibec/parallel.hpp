#ifndef CANTIBEC_PARALLEL_HPP
#define CANTIBEC_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cantibec {

// Nonzero forces the worker count regardless of hardware (tests use it to
// compare serial and threaded runs on small machines).
inline std::atomic<unsigned>& forced_workers() {
    static std::atomic<unsigned> n{0};
    return n;
}

struct ScopedWorkers {
    explicit ScopedWorkers(unsigned n) : previous(forced_workers().exchange(n)) {}
    ~ScopedWorkers() { forced_workers() = previous; }
    ScopedWorkers(const ScopedWorkers&) = delete;
    ScopedWorkers& operator=(const ScopedWorkers&) = delete;
    unsigned previous;
};

// Worker count: hardware concurrency, capped by CANTIBEC_THREADS.
inline unsigned worker_count() {
    if (const unsigned forced = forced_workers().load()) return forced;
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CANTIBEC_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) n = std::min(n, unsigned(cap));
    }
    return n;
}

// Runs body(i) for i in [0, count). Each index is handled exactly once and
// writes only its own output slot, so results do not depend on scheduling.
// The first exception thrown by any body is rethrown on the caller.
template <class Body>
void parallel_for(std::size_t count, Body&& body, unsigned workers = worker_count()) {
    workers = unsigned(std::min<std::size_t>(workers, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = count;
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace cantibec

#endif
