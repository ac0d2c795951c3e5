#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ppmreg {

inline int resolve_workers(int workers) {
    if (workers > 0) return workers;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Persistent worker pool. Tasks are indexed 0..count-1 and grabbed off an
// atomic counter, so scheduling is work-stealing-free and cheap. Callers
// that need deterministic output write into per-task slots and reduce in
// task order afterwards; the pool itself never reorders anything visible.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    // Runs fn(task) for task in [0, count) on up to `workers` threads
    // (including the calling thread). workers <= 1 executes inline.
    void run(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
        if (count == 0) return;
        if (workers <= 1 || count == 1) {
            for (std::size_t t = 0; t < count; ++t) fn(t);
            return;
        }
        std::unique_lock<std::mutex> run_lock(run_mutex_);
        ensure_threads(static_cast<std::size_t>(workers) - 1);
        {
            std::lock_guard<std::mutex> lk(mutex_);
            fn_ = &fn;
            next_ = 0;
            count_ = count;
            active_ = std::min<std::size_t>(static_cast<std::size_t>(workers) - 1, threads_.size());
            pending_ = active_;
            ++epoch_;
        }
        cv_.notify_all();
        work();  // calling thread participates
        std::unique_lock<std::mutex> lk(mutex_);
        done_cv_.wait(lk, [&] { return pending_ == 0; });
        fn_ = nullptr;
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lk(mutex_);
            stop_ = true;
            ++epoch_;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

private:
    ThreadPool() = default;

    void ensure_threads(std::size_t n) {
        std::lock_guard<std::mutex> lk(mutex_);
        while (threads_.size() < n) {
            const std::size_t id = threads_.size();
            threads_.emplace_back([this, id] { worker_loop(id); });
        }
    }

    void worker_loop(std::size_t id) {
        std::uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lk(mutex_);
                cv_.wait(lk, [&] { return stop_ || epoch_ != seen; });
                seen = epoch_;
                if (stop_) return;
                if (id >= active_) continue;  // not part of this dispatch
            }
            work();
            std::lock_guard<std::mutex> lk(mutex_);
            if (--pending_ == 0) done_cv_.notify_all();
        }
    }

    void work() {
        const auto* fn = fn_;
        const std::size_t count = count_;
        for (;;) {
            const std::size_t t = next_.fetch_add(1, std::memory_order_relaxed);
            if (t >= count) break;
            (*fn)(t);
        }
    }

    std::mutex run_mutex_;  // serializes top-level run() calls
    std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::vector<std::thread> threads_;
    const std::function<void(std::size_t)>* fn_ = nullptr;
    std::atomic<std::size_t> next_{0};
    std::size_t count_ = 0;
    std::size_t active_ = 0;
    std::size_t pending_ = 0;
    std::uint64_t epoch_ = 0;
    bool stop_ = false;
};

// Splits [0, count) into fixed-size blocks and runs fn(block, lo, hi).
// The block structure depends only on count and block_size, never on the
// worker count, so per-block partial results can be reduced in block order
// to give bit-identical sums for any parallelism level.
template <typename F>
void parallel_blocks(std::size_t count, std::size_t block_size, int workers, F&& fn) {
    if (count == 0) return;
    const std::size_t nblocks = (count + block_size - 1) / block_size;
    auto task = [&](std::size_t b) {
        const std::size_t lo = b * block_size;
        const std::size_t hi = std::min(count, lo + block_size);
        fn(b, lo, hi);
    };
    if (workers <= 1 || nblocks == 1) {
        for (std::size_t b = 0; b < nblocks; ++b) task(b);
        return;
    }
    ThreadPool::instance().run(nblocks, workers, task);
}

} // namespace ppmreg
