#include "iie/util/parallel.h"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace iie {

namespace {

int env_workers() {
    if (const char* s = std::getenv("IIE_THREADS")) {
        const int v = std::atoi(s);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int> g_forced{0};

// Minimal persistent pool. Lives for the process once more than one worker
// is requested; never resized down.
class Pool {
public:
    explicit Pool(int extra) {
        for (int w = 0; w < extra; ++w) {
            threads_.emplace_back([this, w] { run(w + 1); });
        }
    }

    void dispatch(int workers, int64_t n, const std::function<void(int64_t)>& fn) {
        std::unique_lock lk(m_);
        fn_ = &fn;
        n_ = n;
        workers_ = workers;
        done_ = 0;
        ++epoch_;
        cv_.notify_all();
        lk.unlock();

        exec(0);

        std::unique_lock lk2(m_);
        cv_done_.wait(lk2, [&] { return done_ == workers_ - 1; });
        fn_ = nullptr;
    }

    int size() const { return static_cast<int>(threads_.size()) + 1; }

private:
    void exec(int w) {
        const auto& f = *fn_;
        for (int64_t i = w; i < n_; i += workers_) f(i);
    }

    void run(int w) {
        uint64_t seen = 0;
        for (;;) {
            std::unique_lock lk(m_);
            cv_.wait(lk, [&] { return epoch_ != seen; });
            seen = epoch_;
            const bool active = w < workers_;
            lk.unlock();
            if (active) exec(w);
            lk.lock();
            if (active) {
                ++done_;
                cv_done_.notify_one();
            }
        }
    }

    std::vector<std::thread> threads_;
    std::mutex m_;
    std::condition_variable cv_, cv_done_;
    const std::function<void(int64_t)>* fn_ = nullptr;
    int64_t n_ = 0;
    int workers_ = 1;
    int done_ = 0;
    uint64_t epoch_ = 0;
};

Pool* pool(int workers) {
    static Pool* p = new Pool(workers - 1);
    return p;
}

}  // namespace

int max_workers() {
    const int forced = g_forced.load(std::memory_order_relaxed);
    if (forced > 0) return forced;
    static const int from_env = env_workers();
    return from_env;
}

void set_max_workers(int n) { g_forced.store(n, std::memory_order_relaxed); }

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
    const int workers = static_cast<int>(std::min<int64_t>(max_workers(), n));
    if (workers <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    Pool* p = pool(max_workers());
    pool(0);  // already constructed
    p->dispatch(std::min(workers, p->size()), n, fn);
}

}  // namespace iie
