#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <string>
#include <vector>

namespace swarmchain {

using Task = std::function<void()>;

/// Scheduling surface shared by the simulation and stress executors.
///
/// A lane is a named FIFO queue; tasks on one lane never run concurrently
/// and run in post order, which is the actor guarantee every adapter
/// relies on. Different lanes may interleave (deterministically or on
/// real threads, depending on the implementation).
class Executor {
public:
    virtual ~Executor() = default;

    virtual void post(const std::string& lane, Task task) = 0;
    virtual void post_after(std::int64_t delay_ms, const std::string& lane, Task task) = 0;
    virtual std::int64_t now_ms() const = 0;

    /// Pumps work from the calling context until pred holds or timeout_ms
    /// of executor time elapses. Returns the final pred() value. Must not
    /// be called from inside a task.
    virtual bool wait_until(const std::function<bool()>& pred, std::int64_t timeout_ms) = 0;
};

/// Single-threaded discrete-event executor.
///
/// Executing one task advances the logical clock by exactly 1 ms (one
/// tick). When every lane is empty the clock jumps to the next timer.
/// The next task is drawn from a seeded PRNG over the bytewise-sorted
/// names of nonempty lanes, so a run is a pure function of (seed, posted
/// work) and replays byte-identically.
class DeterministicExecutor final : public Executor {
public:
    explicit DeterministicExecutor(std::uint64_t seed = 0);

    void post(const std::string& lane, Task task) override;
    void post_after(std::int64_t delay_ms, const std::string& lane, Task task) override;
    std::int64_t now_ms() const override;
    bool wait_until(const std::function<bool()>& pred, std::int64_t timeout_ms) override;

    /// Runs one task if any is runnable (jumping the clock to the next
    /// timer when idle). Returns false once no task or timer remains.
    bool run_one();
    void run_until_quiescent();
    /// Runs everything scheduled before `tick`, then sets the clock to
    /// at least `tick`.
    void run_until_tick(std::int64_t tick);
    std::size_t pending_tasks() const;

private:
    struct Timer {
        std::int64_t due;
        std::uint64_t seq;
        std::string lane;
        Task task;
    };
    struct TimerLater {
        bool operator()(const Timer& a, const Timer& b) const {
            return a.due != b.due ? a.due > b.due : a.seq > b.seq;
        }
    };

    void release_due_timers();
    bool run_one_bounded(std::int64_t clock_limit);

    std::map<std::string, std::deque<Task>> lanes_;
    std::priority_queue<Timer, std::vector<Timer>, TimerLater> timers_;
    std::mt19937_64 rng_;
    std::int64_t clock_ms_ = 0;
    std::uint64_t timer_seq_ = 0;
    bool in_task_ = false;
};

/// Thread-pool executor preserving per-lane FIFO and exclusivity.
///
/// Exists to shake out actor-boundary violations under real
/// concurrency; timing is wall-clock based and nondeterministic, so it
/// is never used for golden tests.
class ThreadedExecutor final : public Executor {
public:
    explicit ThreadedExecutor(unsigned threads = 4);
    ~ThreadedExecutor() override;

    void post(const std::string& lane, Task task) override;
    void post_after(std::int64_t delay_ms, const std::string& lane, Task task) override;
    std::int64_t now_ms() const override;
    bool wait_until(const std::function<bool()>& pred, std::int64_t timeout_ms) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace swarmchain
