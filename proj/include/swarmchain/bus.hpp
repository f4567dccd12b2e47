#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "swarmchain/executor.hpp"
#include "swarmchain/value.hpp"

namespace swarmchain {

using AdapterId = std::string;
using GroupName = std::string;

struct Envelope {
    std::uint64_t message_id = 0;
    AdapterId sender;
    std::string topic;
    Value payload;
};

using EnvelopeHandler = std::function<void(const Envelope&)>;

class BusError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class DuplicateAdapter : public BusError {
    using BusError::BusError;
};
class StaleHandle : public BusError {
    using BusError::BusError;
};
class UnknownAdapter : public BusError {
    using BusError::BusError;
};

/// In-process pub/sub registry. Each adapter belongs to exactly one
/// group and owns one executor lane (named by its id), so its handler
/// runs envelopes strictly one at a time in delivery order.
///
/// Broadcast snapshots the membership before delivering, includes the
/// sender when it is a member, and returns the dispatch count.
/// Deliveries resolve the handler at delivery time, so an adapter that
/// deregistered (or re-registered) in between silently drops in-flight
/// envelopes: at-most-once, no retries.
class Bus {
public:
    explicit Bus(Executor& executor);

    /// Adapter ids are nonempty and may not start with '@' (reserved
    /// for harness control lanes).
    void register_adapter(const AdapterId& id, const GroupName& group, EnvelopeHandler handler);
    void deregister_adapter(const AdapterId& id);
    std::vector<AdapterId> list_group(const GroupName& group) const;
    bool is_registered(const AdapterId& id) const;

    std::size_t broadcast(const GroupName& group, const AdapterId& sender, std::string topic,
                          Value payload);
    void unicast(const AdapterId& to, const AdapterId& sender, std::string topic, Value payload);

    /// Two-step broadcast for callers that must account for the
    /// dispatch count before any delivery can run: snapshot_group
    /// captures membership and assigns the message id; deliver_snapshot
    /// posts the envelopes. Registrations between the two calls are
    /// excluded; deregistrations drop their deliveries.
    struct GroupSnapshot {
        std::vector<std::pair<AdapterId, std::uint64_t>> members;
        std::uint64_t message_id = 0;
    };
    GroupSnapshot snapshot_group(const GroupName& group);
    void deliver_snapshot(const GroupSnapshot& snapshot, const AdapterId& sender,
                          std::string topic, Value payload);

    /// Persistent delivery delay for envelopes sent from -> to, in
    /// executor milliseconds. Zero removes the delay.
    void set_edge_delay(const AdapterId& from, const AdapterId& to, std::int64_t delay_ms);

private:
    struct Registration {
        GroupName group;
        EnvelopeHandler handler;
        std::uint64_t epoch;
    };

    void deliver(const AdapterId& to, Envelope envelope, std::uint64_t epoch);
    std::int64_t edge_delay_locked(const AdapterId& from, const AdapterId& to) const;

    Executor& executor_;
    mutable std::mutex mutex_;
    std::map<AdapterId, Registration> adapters_;
    std::map<std::pair<AdapterId, AdapterId>, std::int64_t> edge_delays_;
    std::uint64_t next_message_id_ = 1;
    std::uint64_t next_epoch_ = 1;
};

}  // namespace swarmchain
