#include "swarmchain/bus.hpp"

#include <utility>

namespace swarmchain {

Bus::Bus(Executor& executor) : executor_(executor) {}

void Bus::register_adapter(const AdapterId& id, const GroupName& group, EnvelopeHandler handler) {
    if (id.empty() || id.front() == '@') {
        throw BusError("adapter id must be nonempty and not start with '@': '" + id + "'");
    }
    std::lock_guard<std::mutex> lock(mutex_);
    auto [it, inserted] = adapters_.try_emplace(id);
    if (!inserted) throw DuplicateAdapter("adapter already registered: " + id);
    it->second = Registration{group, std::move(handler), next_epoch_++};
}

void Bus::deregister_adapter(const AdapterId& id) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (adapters_.erase(id) == 0) throw StaleHandle("adapter not registered: " + id);
}

std::vector<AdapterId> Bus::list_group(const GroupName& group) const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<AdapterId> members;
    for (const auto& [id, reg] : adapters_) {
        if (reg.group == group) members.push_back(id);
    }
    return members;
}

bool Bus::is_registered(const AdapterId& id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return adapters_.count(id) != 0;
}

std::int64_t Bus::edge_delay_locked(const AdapterId& from, const AdapterId& to) const {
    auto it = edge_delays_.find({from, to});
    return it == edge_delays_.end() ? 0 : it->second;
}

void Bus::deliver(const AdapterId& to, Envelope envelope, std::uint64_t epoch) {
    std::int64_t delay;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        delay = edge_delay_locked(envelope.sender, to);
    }
    Task task = [this, to, envelope = std::move(envelope), epoch]() {
        EnvelopeHandler handler;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = adapters_.find(to);
            if (it == adapters_.end() || it->second.epoch != epoch) return;
            handler = it->second.handler;
        }
        handler(envelope);
    };
    if (delay > 0) {
        executor_.post_after(delay, to, std::move(task));
    } else {
        executor_.post(to, std::move(task));
    }
}

Bus::GroupSnapshot Bus::snapshot_group(const GroupName& group) {
    std::lock_guard<std::mutex> lock(mutex_);
    GroupSnapshot snapshot;
    snapshot.message_id = next_message_id_++;
    for (const auto& [id, reg] : adapters_) {
        if (reg.group == group) snapshot.members.emplace_back(id, reg.epoch);
    }
    return snapshot;
}

void Bus::deliver_snapshot(const GroupSnapshot& snapshot, const AdapterId& sender,
                           std::string topic, Value payload) {
    if (!is_canonical(payload)) throw NonCanonicalValue("broadcast payload is not canonical");
    for (const auto& [id, epoch] : snapshot.members) {
        deliver(id, Envelope{snapshot.message_id, sender, topic, payload}, epoch);
    }
}

std::size_t Bus::broadcast(const GroupName& group, const AdapterId& sender, std::string topic,
                           Value payload) {
    GroupSnapshot snapshot = snapshot_group(group);
    deliver_snapshot(snapshot, sender, std::move(topic), std::move(payload));
    return snapshot.members.size();
}

void Bus::unicast(const AdapterId& to, const AdapterId& sender, std::string topic, Value payload) {
    if (!is_canonical(payload)) throw NonCanonicalValue("unicast payload is not canonical");
    std::uint64_t message_id;
    std::uint64_t epoch;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = adapters_.find(to);
        if (it == adapters_.end()) throw UnknownAdapter("unicast to unknown adapter: " + to);
        message_id = next_message_id_++;
        epoch = it->second.epoch;
    }
    deliver(to, Envelope{message_id, sender, std::move(topic), std::move(payload)}, epoch);
}

void Bus::set_edge_delay(const AdapterId& from, const AdapterId& to, std::int64_t delay_ms) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (delay_ms <= 0) {
        edge_delays_.erase({from, to});
    } else {
        edge_delays_[{from, to}] = delay_ms;
    }
}

}  // namespace swarmchain
