#include "swarmchain/executor.hpp"

#include <cassert>
#include <chrono>
#include <condition_variable>
#include <limits>
#include <mutex>
#include <thread>

namespace swarmchain {

DeterministicExecutor::DeterministicExecutor(std::uint64_t seed) : rng_(seed) {}

void DeterministicExecutor::post(const std::string& lane, Task task) {
    lanes_[lane].push_back(std::move(task));
}

void DeterministicExecutor::post_after(std::int64_t delay_ms, const std::string& lane, Task task) {
    if (delay_ms < 0) delay_ms = 0;
    timers_.push(Timer{clock_ms_ + delay_ms, timer_seq_++, lane, std::move(task)});
}

std::int64_t DeterministicExecutor::now_ms() const {
    return clock_ms_;
}

void DeterministicExecutor::release_due_timers() {
    while (!timers_.empty() && timers_.top().due <= clock_ms_) {
        Timer t = timers_.top();
        timers_.pop();
        lanes_[t.lane].push_back(std::move(t.task));
    }
}

bool DeterministicExecutor::run_one_bounded(std::int64_t clock_limit) {
    release_due_timers();
    while (true) {
        std::vector<std::map<std::string, std::deque<Task>>::iterator> ready;
        for (auto it = lanes_.begin(); it != lanes_.end(); ++it) {
            if (!it->second.empty()) ready.push_back(it);
        }
        if (!ready.empty()) {
            auto it = ready[rng_() % ready.size()];
            Task task = std::move(it->second.front());
            it->second.pop_front();
            if (it->second.empty()) lanes_.erase(it);
            assert(!in_task_);
            in_task_ = true;
            task();
            in_task_ = false;
            ++clock_ms_;
            return true;
        }
        if (timers_.empty() || timers_.top().due > clock_limit) return false;
        clock_ms_ = timers_.top().due;
        release_due_timers();
    }
}

bool DeterministicExecutor::run_one() {
    return run_one_bounded(std::numeric_limits<std::int64_t>::max());
}

void DeterministicExecutor::run_until_quiescent() {
    while (run_one()) {
    }
}

void DeterministicExecutor::run_until_tick(std::int64_t tick) {
    while (clock_ms_ < tick && run_one_bounded(tick - 1)) {
    }
    if (clock_ms_ < tick) clock_ms_ = tick;
}

std::size_t DeterministicExecutor::pending_tasks() const {
    std::size_t n = timers_.size();
    for (const auto& [name, queue] : lanes_) {
        (void)name;
        n += queue.size();
    }
    return n;
}

bool DeterministicExecutor::wait_until(const std::function<bool()>& pred,
                                       std::int64_t timeout_ms) {
    assert(!in_task_);
    const std::int64_t deadline = clock_ms_ + timeout_ms;
    while (!pred()) {
        if (clock_ms_ >= deadline || !run_one_bounded(deadline - 1)) {
            if (clock_ms_ < deadline) clock_ms_ = deadline;
            return pred();
        }
    }
    return true;
}

struct ThreadedExecutor::Impl {
    struct Lane {
        std::deque<Task> queue;
        bool active = false;
    };

    std::mutex mutex;
    std::condition_variable cv;
    std::map<std::string, Lane> lanes;
    std::deque<std::string> ready;
    std::vector<std::thread> workers;
    std::thread timer_thread;

    struct Timer {
        std::chrono::steady_clock::time_point due;
        std::string lane;
        Task task;
    };
    std::multimap<std::chrono::steady_clock::time_point, Timer> timers;
    std::condition_variable timer_cv;

    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    bool stopping = false;

    void enqueue_locked(const std::string& lane_name, Task task) {
        Lane& lane = lanes[lane_name];
        lane.queue.push_back(std::move(task));
        if (!lane.active) {
            lane.active = true;
            ready.push_back(lane_name);
            cv.notify_one();
        }
    }

    void worker_loop() {
        std::unique_lock<std::mutex> lock(mutex);
        while (true) {
            cv.wait(lock, [&] { return stopping || !ready.empty(); });
            if (stopping && ready.empty()) return;
            std::string lane_name = std::move(ready.front());
            ready.pop_front();
            Lane& lane = lanes[lane_name];
            Task task = std::move(lane.queue.front());
            lane.queue.pop_front();
            lock.unlock();
            task();
            lock.lock();
            // Re-queue at the back so lanes share the pool fairly; the
            // active flag keeps the lane on at most one worker at a time.
            if (!lane.queue.empty()) {
                ready.push_back(lane_name);
                cv.notify_one();
            } else {
                lane.active = false;
            }
        }
    }

    void timer_loop() {
        std::unique_lock<std::mutex> lock(mutex);
        while (true) {
            if (stopping) return;
            if (timers.empty()) {
                timer_cv.wait(lock, [&] { return stopping || !timers.empty(); });
                continue;
            }
            auto next = timers.begin()->first;
            if (timer_cv.wait_until(lock, next,
                                    [&] { return stopping || timers.begin()->first < next; })) {
                continue;
            }
            auto now = std::chrono::steady_clock::now();
            while (!timers.empty() && timers.begin()->first <= now) {
                Timer t = std::move(timers.begin()->second);
                timers.erase(timers.begin());
                enqueue_locked(t.lane, std::move(t.task));
            }
        }
    }
};

ThreadedExecutor::ThreadedExecutor(unsigned threads) : impl_(std::make_unique<Impl>()) {
    if (threads == 0) threads = 1;
    for (unsigned i = 0; i < threads; ++i) {
        impl_->workers.emplace_back([this] { impl_->worker_loop(); });
    }
    impl_->timer_thread = std::thread([this] { impl_->timer_loop(); });
}

ThreadedExecutor::~ThreadedExecutor() {
    {
        std::lock_guard<std::mutex> lock(impl_->mutex);
        impl_->stopping = true;
    }
    impl_->cv.notify_all();
    impl_->timer_cv.notify_all();
    for (auto& w : impl_->workers) w.join();
    impl_->timer_thread.join();
}

void ThreadedExecutor::post(const std::string& lane, Task task) {
    std::lock_guard<std::mutex> lock(impl_->mutex);
    impl_->enqueue_locked(lane, std::move(task));
}

void ThreadedExecutor::post_after(std::int64_t delay_ms, const std::string& lane, Task task) {
    if (delay_ms < 0) delay_ms = 0;
    auto due = std::chrono::steady_clock::now() + std::chrono::milliseconds(delay_ms);
    {
        std::lock_guard<std::mutex> lock(impl_->mutex);
        impl_->timers.emplace(due, Impl::Timer{due, lane, std::move(task)});
    }
    impl_->timer_cv.notify_all();
}

std::int64_t ThreadedExecutor::now_ms() const {
    auto elapsed = std::chrono::steady_clock::now() - impl_->start;
    return std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
}

bool ThreadedExecutor::wait_until(const std::function<bool()>& pred, std::int64_t timeout_ms) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (!pred()) {
        if (std::chrono::steady_clock::now() >= deadline) return pred();
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    return true;
}

}  // namespace swarmchain
