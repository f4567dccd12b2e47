#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "swarmchain/bus.hpp"
#include "swarmchain/executor.hpp"
#include "swarmchain/value.hpp"

namespace swarmchain {

class ChoreographyError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class DuplicateChoreography : public ChoreographyError {
    using ChoreographyError::ChoreographyError;
};
class UnknownChoreography : public ChoreographyError {
    using ChoreographyError::ChoreographyError;
};
class UnknownCtor : public ChoreographyError {
    using ChoreographyError::ChoreographyError;
};
class UnknownPhase : public ChoreographyError {
    using ChoreographyError::ChoreographyError;
};
class InvalidDescriptor : public ChoreographyError {
    using ChoreographyError::ChoreographyError;
};

/// Group sentinel: a phase bound to "All" runs on exactly one adapter,
/// the swarm's origin, executed inline on the origin's context.
inline constexpr const char* kGroupAll = "All";

struct SwarmEvent {
    std::uint64_t seq = 0;
    std::uint64_t instance_id = 0;
    std::string event_name;
    std::string emitter;
    Value payload;
};

/// Transcript summary row: payload collapsed to its canonical digest so
/// transcripts stay small and byte-comparable.
Value event_summary(const SwarmEvent& event);

/// Handler-side view of one phase execution. `vars` is the instance's
/// vars as of dispatch; mutations stay local to this execution.
struct PhaseContext {
    std::uint64_t instance_id = 0;
    std::string choreography;
    std::string phase;
    AdapterId self;
    AdapterId origin;
    Value vars;

    /// Adds to this execution's virtual cost. Contract timeouts are
    /// enforced against this counter; the simulation clock is not
    /// advanced, so replays cannot perturb scheduling.
    void consume(std::int64_t ms) { consumed_ms += ms; }
    std::int64_t consumed_ms = 0;
};

class ChoreographyEngine;
struct SwarmInstance;

/// Capabilities available to constructor handlers and result hooks,
/// bound to one live instance.
class SwarmContext {
public:
    std::uint64_t instance_id() const;
    const AdapterId& origin() const;
    /// Mutable vars; changes affect later dispatch snapshots only.
    Value& vars();
    /// Dispatches to every member of the phase's group (bus snapshot,
    /// self-delivery included); returns the dispatch count. A phase
    /// bound to "All" runs inline on the origin and returns 1.
    std::size_t dispatch_broadcast(const std::string& phase);
    void dispatch_direct(const std::string& phase, const AdapterId& to);
    void emit(const std::string& event_name, Value payload);
    const std::map<AdapterId, Value>& results() const;
    std::int64_t now_ms() const;

private:
    friend class ChoreographyEngine;
    SwarmContext(ChoreographyEngine& engine, std::shared_ptr<SwarmInstance> instance);
    ChoreographyEngine& engine_;
    std::shared_ptr<SwarmInstance> instance_;
};

using CtorHandler = std::function<void(SwarmContext&, const Value& args)>;
using PhaseHandler = std::function<Value(PhaseContext&)>;
/// Runs on the origin's lane when a result for the phase arrives.
using ResultHook = std::function<void(SwarmContext&, const AdapterId& from, const Value& result)>;

struct PhaseDecl {
    GroupName group;
    PhaseHandler handler;
    ResultHook on_result;
};

struct Descriptor {
    Value meta;  // object; requires non-empty string "name"
    std::map<std::string, Value> vars;
    std::map<std::string, CtorHandler> ctors;
    std::map<std::string, PhaseDecl> phases;

    std::string name() const { return meta.value("name", std::string()); }
};

/// Structural manifest form of a descriptor: {name, vars, ctors,
/// phases: {phase: group}}. Handlers are bound programmatically.
Value manifest_entry(const Descriptor& descriptor);
/// Validates that a descriptor matches a manifest entry structurally.
bool matches_manifest(const Descriptor& descriptor, const Value& entry);

/// Broadcast ping-pong over a group: ctor "startBroadcast" dispatches
/// the "pingBroadcast" phase to every member (the origin included when
/// it is one) and emits "ping_success" with the dispatch count; each
/// member answers {"pong": self}.
Descriptor make_pingpong_descriptor(const GroupName& group);

struct SwarmInstance {
    std::uint64_t id = 0;
    std::string descriptor_name;
    AdapterId origin;
    Value vars;
    std::map<AdapterId, Value> results;
    std::vector<SwarmEvent> events;
    std::size_t dispatched = 0;
    std::size_t outstanding = 0;
    /// Sum of PhaseContext::consumed_ms over this instance's phase
    /// executions; the contract layer's timeout currency.
    std::int64_t consumed_ms = 0;
    bool ctor_done = false;
};

/// Client-side handle to one swarm execution. Snapshot accessors are
/// safe from any context; wait_* pump the executor and so may only be
/// called from outside any task.
class SwarmHandle {
public:
    std::uint64_t id() const;
    std::size_t dispatched_count() const;
    std::size_t result_count() const;
    std::map<AdapterId, Value> results() const;
    std::vector<SwarmEvent> events() const;
    std::optional<SwarmEvent> find_event(const std::string& name) const;
    std::int64_t consumed_ms() const;
    /// No outstanding dispatches and the ctor has returned.
    bool quiescent() const;

    bool wait_quiescent(std::int64_t timeout_ms);
    bool wait_result_count(std::size_t n, std::int64_t timeout_ms);
    std::optional<SwarmEvent> wait_event(const std::string& name, std::int64_t timeout_ms);
    /// Waits for quiescence, then returns the result map.
    std::map<AdapterId, Value> final_result(std::int64_t timeout_ms);

private:
    friend class ChoreographyEngine;
    SwarmHandle(ChoreographyEngine& engine, std::shared_ptr<SwarmInstance> instance);
    ChoreographyEngine* engine_;
    std::shared_ptr<SwarmInstance> instance_;
};

/// The swarm engine: registry of descriptors, adapter attachment, swarm
/// execution, and the global event transcript.
class ChoreographyEngine {
public:
    ChoreographyEngine(Executor& executor, Bus& bus);

    void register_choreography(Descriptor descriptor);
    bool has_choreography(const std::string& name) const;

    /// Registers the adapter with the bus and binds envelope delivery
    /// to phase execution on the adapter's lane.
    void attach_adapter(const AdapterId& id, const GroupName& group);
    void detach_adapter(const AdapterId& id);
    /// A muted adapter drops every envelope and hook at delivery time;
    /// used by the harness to model crashes.
    void set_muted(const AdapterId& id, bool muted);
    bool is_muted(const AdapterId& id) const;

    SwarmHandle execute_swarm(const std::string& name, const std::string& ctor, Value args,
                              const AdapterId& origin);

    std::vector<SwarmEvent> transcript() const;
    /// Canonical array of event_summary rows, in emission order.
    Value transcript_summary() const;
    /// Manifest array for every registered choreography, sorted by name.
    Value manifest() const;

    Executor& executor() { return executor_; }
    Bus& bus() { return bus_; }

private:
    friend class SwarmContext;
    friend class SwarmHandle;

    std::size_t dispatch_phase(const std::shared_ptr<SwarmInstance>& instance,
                               const std::string& phase,
                               const std::optional<AdapterId>& direct_to);
    void execute_phase_on(const std::shared_ptr<SwarmInstance>& instance,
                          const Descriptor& descriptor, const std::string& phase,
                          const AdapterId& self, Value vars_snapshot);
    void collect_result(const std::shared_ptr<SwarmInstance>& instance, const std::string& phase,
                        const AdapterId& adapter, Value value);
    void emit_event(const std::shared_ptr<SwarmInstance>& instance, const std::string& emitter,
                    const std::string& event_name, Value payload);
    void handle_envelope(const AdapterId& self, const Envelope& envelope);
    std::shared_ptr<SwarmInstance> find_instance(std::uint64_t id) const;
    const Descriptor& descriptor_for(const std::string& name) const;

    Executor& executor_;
    Bus& bus_;
    mutable std::recursive_mutex mutex_;
    std::map<std::string, Descriptor> descriptors_;
    std::map<std::uint64_t, std::shared_ptr<SwarmInstance>> instances_;
    std::set<AdapterId> muted_;
    std::vector<SwarmEvent> transcript_;
    std::uint64_t next_instance_id_ = 1;
    std::uint64_t next_event_seq_ = 1;
};

}  // namespace swarmchain
