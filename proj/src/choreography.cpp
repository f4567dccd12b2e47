#include "swarmchain/choreography.hpp"

#include <utility>

namespace swarmchain {

namespace {
constexpr const char* kPhaseTopic = "phase";
}

Value event_summary(const SwarmEvent& event) {
    return Value{
        {"seq", event.seq},
        {"instanceId", event.instance_id},
        {"eventName", event.event_name},
        {"emitter", event.emitter},
        {"payloadHash", canonical_digest(event.payload)},
    };
}

Value manifest_entry(const Descriptor& descriptor) {
    Value vars = Value::object();
    for (const auto& [name, def] : descriptor.vars) vars[name] = def;
    Value ctors = Value::array();
    for (const auto& [name, handler] : descriptor.ctors) {
        (void)handler;
        ctors.push_back(name);
    }
    Value phases = Value::object();
    for (const auto& [name, decl] : descriptor.phases) phases[name] = decl.group;
    return Value{
        {"name", descriptor.name()},
        {"vars", std::move(vars)},
        {"ctors", std::move(ctors)},
        {"phases", std::move(phases)},
    };
}

bool matches_manifest(const Descriptor& descriptor, const Value& entry) {
    return canonical_encode(manifest_entry(descriptor)) == canonical_encode(entry);
}

Descriptor make_pingpong_descriptor(const GroupName& group) {
    Descriptor d;
    d.meta = Value{{"name", "pingpong"}};
    d.ctors["startBroadcast"] = [](SwarmContext& ctx, const Value&) {
        std::size_t count = ctx.dispatch_broadcast("pingBroadcast");
        ctx.emit("ping_success", Value{{"count", count}});
    };
    d.phases["pingBroadcast"] = PhaseDecl{
        group,
        [](PhaseContext& ctx) { return Value{{"pong", ctx.self}}; },
        nullptr,
    };
    return d;
}

SwarmContext::SwarmContext(ChoreographyEngine& engine, std::shared_ptr<SwarmInstance> instance)
    : engine_(engine), instance_(std::move(instance)) {}

std::uint64_t SwarmContext::instance_id() const {
    return instance_->id;
}

const AdapterId& SwarmContext::origin() const {
    return instance_->origin;
}

Value& SwarmContext::vars() {
    return instance_->vars;
}

std::size_t SwarmContext::dispatch_broadcast(const std::string& phase) {
    return engine_.dispatch_phase(instance_, phase, std::nullopt);
}

void SwarmContext::dispatch_direct(const std::string& phase, const AdapterId& to) {
    engine_.dispatch_phase(instance_, phase, to);
}

void SwarmContext::emit(const std::string& event_name, Value payload) {
    engine_.emit_event(instance_, instance_->origin, event_name, std::move(payload));
}

const std::map<AdapterId, Value>& SwarmContext::results() const {
    return instance_->results;
}

std::int64_t SwarmContext::now_ms() const {
    return engine_.executor().now_ms();
}

SwarmHandle::SwarmHandle(ChoreographyEngine& engine, std::shared_ptr<SwarmInstance> instance)
    : engine_(&engine), instance_(std::move(instance)) {}

std::uint64_t SwarmHandle::id() const {
    return instance_->id;
}

std::size_t SwarmHandle::dispatched_count() const {
    std::lock_guard<std::recursive_mutex> lock(engine_->mutex_);
    return instance_->dispatched;
}

std::size_t SwarmHandle::result_count() const {
    std::lock_guard<std::recursive_mutex> lock(engine_->mutex_);
    return instance_->results.size();
}

std::map<AdapterId, Value> SwarmHandle::results() const {
    std::lock_guard<std::recursive_mutex> lock(engine_->mutex_);
    return instance_->results;
}

std::vector<SwarmEvent> SwarmHandle::events() const {
    std::lock_guard<std::recursive_mutex> lock(engine_->mutex_);
    return instance_->events;
}

std::optional<SwarmEvent> SwarmHandle::find_event(const std::string& name) const {
    std::lock_guard<std::recursive_mutex> lock(engine_->mutex_);
    for (const auto& event : instance_->events) {
        if (event.event_name == name) return event;
    }
    return std::nullopt;
}

std::int64_t SwarmHandle::consumed_ms() const {
    std::lock_guard<std::recursive_mutex> lock(engine_->mutex_);
    return instance_->consumed_ms;
}

bool SwarmHandle::quiescent() const {
    std::lock_guard<std::recursive_mutex> lock(engine_->mutex_);
    return instance_->ctor_done && instance_->outstanding == 0;
}

bool SwarmHandle::wait_quiescent(std::int64_t timeout_ms) {
    return engine_->executor().wait_until([this] { return quiescent(); }, timeout_ms);
}

bool SwarmHandle::wait_result_count(std::size_t n, std::int64_t timeout_ms) {
    return engine_->executor().wait_until([this, n] { return result_count() >= n; }, timeout_ms);
}

std::optional<SwarmEvent> SwarmHandle::wait_event(const std::string& name,
                                                  std::int64_t timeout_ms) {
    engine_->executor().wait_until([this, &name] { return find_event(name).has_value(); },
                                   timeout_ms);
    return find_event(name);
}

std::map<AdapterId, Value> SwarmHandle::final_result(std::int64_t timeout_ms) {
    wait_quiescent(timeout_ms);
    return results();
}

ChoreographyEngine::ChoreographyEngine(Executor& executor, Bus& bus)
    : executor_(executor), bus_(bus) {}

void ChoreographyEngine::register_choreography(Descriptor descriptor) {
    const std::string name = descriptor.name();
    if (!descriptor.meta.is_object() || name.empty()) {
        throw InvalidDescriptor("descriptor meta requires a non-empty string 'name'");
    }
    for (const auto& [phase_name, decl] : descriptor.phases) {
        if (descriptor.ctors.count(phase_name)) {
            throw InvalidDescriptor("ctor and phase share a name: " + phase_name);
        }
        if (decl.group.empty()) {
            throw InvalidDescriptor("phase without a group: " + phase_name);
        }
        if (!decl.handler) {
            throw InvalidDescriptor("phase without a handler: " + phase_name);
        }
    }
    for (const auto& [var_name, def] : descriptor.vars) {
        if (!is_canonical(def)) {
            throw InvalidDescriptor("var default is not canonical: " + var_name);
        }
    }
    std::lock_guard<std::recursive_mutex> lock(mutex_);
    if (!descriptors_.emplace(name, std::move(descriptor)).second) {
        throw DuplicateChoreography("choreography already registered: " + name);
    }
}

bool ChoreographyEngine::has_choreography(const std::string& name) const {
    std::lock_guard<std::recursive_mutex> lock(mutex_);
    return descriptors_.count(name) != 0;
}

void ChoreographyEngine::attach_adapter(const AdapterId& id, const GroupName& group) {
    bus_.register_adapter(id, group,
                          [this, id](const Envelope& envelope) { handle_envelope(id, envelope); });
    std::lock_guard<std::recursive_mutex> lock(mutex_);
    muted_.erase(id);
}

void ChoreographyEngine::detach_adapter(const AdapterId& id) {
    bus_.deregister_adapter(id);
}

void ChoreographyEngine::set_muted(const AdapterId& id, bool muted) {
    std::lock_guard<std::recursive_mutex> lock(mutex_);
    if (muted) {
        muted_.insert(id);
    } else {
        muted_.erase(id);
    }
}

bool ChoreographyEngine::is_muted(const AdapterId& id) const {
    std::lock_guard<std::recursive_mutex> lock(mutex_);
    return muted_.count(id) != 0;
}

const Descriptor& ChoreographyEngine::descriptor_for(const std::string& name) const {
    std::lock_guard<std::recursive_mutex> lock(mutex_);
    auto it = descriptors_.find(name);
    if (it == descriptors_.end()) throw UnknownChoreography("unknown choreography: " + name);
    return it->second;
}

std::shared_ptr<SwarmInstance> ChoreographyEngine::find_instance(std::uint64_t id) const {
    std::lock_guard<std::recursive_mutex> lock(mutex_);
    auto it = instances_.find(id);
    return it == instances_.end() ? nullptr : it->second;
}

SwarmHandle ChoreographyEngine::execute_swarm(const std::string& name, const std::string& ctor,
                                              Value args, const AdapterId& origin) {
    const Descriptor& descriptor = descriptor_for(name);
    auto ctor_it = descriptor.ctors.find(ctor);
    if (ctor_it == descriptor.ctors.end()) {
        throw UnknownCtor("unknown ctor '" + ctor + "' in choreography " + name);
    }

    auto instance = std::make_shared<SwarmInstance>();
    instance->descriptor_name = name;
    instance->origin = origin;
    instance->vars = Value::object();
    for (const auto& [var_name, def] : descriptor.vars) instance->vars[var_name] = def;
    {
        std::lock_guard<std::recursive_mutex> lock(mutex_);
        instance->id = next_instance_id_++;
        instances_.emplace(instance->id, instance);
    }

    SwarmContext ctx(*this, instance);
    try {
        ctor_it->second(ctx, args);
    } catch (...) {
        std::lock_guard<std::recursive_mutex> lock(mutex_);
        instance->ctor_done = true;
        throw;
    }
    {
        std::lock_guard<std::recursive_mutex> lock(mutex_);
        instance->ctor_done = true;
    }
    return SwarmHandle(*this, instance);
}

std::size_t ChoreographyEngine::dispatch_phase(const std::shared_ptr<SwarmInstance>& instance,
                                               const std::string& phase,
                                               const std::optional<AdapterId>& direct_to) {
    const Descriptor& descriptor = descriptor_for(instance->descriptor_name);
    auto phase_it = descriptor.phases.find(phase);
    if (phase_it == descriptor.phases.end()) {
        throw UnknownPhase("unknown phase '" + phase + "' in choreography " +
                           instance->descriptor_name);
    }

    Value payload;
    {
        std::lock_guard<std::recursive_mutex> lock(mutex_);
        payload = Value{
            {"choreography", instance->descriptor_name},
            {"instanceId", instance->id},
            {"phase", phase},
            {"vars", instance->vars},
            {"origin", instance->origin},
        };
    }

    if (direct_to) {
        {
            std::lock_guard<std::recursive_mutex> lock(mutex_);
            instance->dispatched += 1;
            instance->outstanding += 1;
        }
        try {
            bus_.unicast(*direct_to, instance->origin, kPhaseTopic, std::move(payload));
        } catch (...) {
            std::lock_guard<std::recursive_mutex> lock(mutex_);
            instance->dispatched -= 1;
            instance->outstanding -= 1;
            throw;
        }
        return 1;
    }

    if (phase_it->second.group == kGroupAll) {
        // "All" runs on exactly one adapter: the swarm's origin, inline
        // on the caller's context so contract evaluation stays
        // single-sited and free of executor round-trips.
        Value vars_snapshot = payload.at("vars");
        {
            std::lock_guard<std::recursive_mutex> lock(mutex_);
            instance->dispatched += 1;
            instance->outstanding += 1;
        }
        execute_phase_on(instance, descriptor, phase, instance->origin,
                         std::move(vars_snapshot));
        return 1;
    }

    Bus::GroupSnapshot snapshot = bus_.snapshot_group(phase_it->second.group);
    {
        std::lock_guard<std::recursive_mutex> lock(mutex_);
        instance->dispatched += snapshot.members.size();
        instance->outstanding += snapshot.members.size();
    }
    bus_.deliver_snapshot(snapshot, instance->origin, kPhaseTopic, std::move(payload));
    return snapshot.members.size();
}

void ChoreographyEngine::handle_envelope(const AdapterId& self, const Envelope& envelope) {
    if (is_muted(self)) return;
    if (envelope.topic != kPhaseTopic) return;
    if (!envelope.payload.is_object()) return;
    auto instance = find_instance(envelope.payload.value("instanceId", std::uint64_t{0}));
    if (!instance) return;
    const Descriptor& descriptor = descriptor_for(instance->descriptor_name);
    const std::string phase = envelope.payload.value("phase", std::string());
    if (!descriptor.phases.count(phase)) return;
    execute_phase_on(instance, descriptor, phase, self, envelope.payload.value("vars", Value()));
}

void ChoreographyEngine::execute_phase_on(const std::shared_ptr<SwarmInstance>& instance,
                                          const Descriptor& descriptor, const std::string& phase,
                                          const AdapterId& self, Value vars_snapshot) {
    const PhaseDecl& decl = descriptor.phases.at(phase);
    PhaseContext ctx;
    ctx.instance_id = instance->id;
    ctx.choreography = instance->descriptor_name;
    ctx.phase = phase;
    ctx.self = self;
    ctx.origin = instance->origin;
    ctx.vars = std::move(vars_snapshot);

    Value result;
    try {
        result = decl.handler(ctx);
    } catch (const std::exception& e) {
        result = Value{{"error", e.what()}};
    }
    {
        std::lock_guard<std::recursive_mutex> lock(mutex_);
        instance->consumed_ms += ctx.consumed_ms;
    }
    collect_result(instance, phase, self, std::move(result));
}

void ChoreographyEngine::collect_result(const std::shared_ptr<SwarmInstance>& instance,
                                        const std::string& phase, const AdapterId& adapter,
                                        Value value) {
    ResultHook hook;
    {
        std::lock_guard<std::recursive_mutex> lock(mutex_);
        const bool duplicate = instance->results.count(adapter) != 0;
        instance->results[adapter] = value;
        if (instance->outstanding > 0) instance->outstanding -= 1;
        if (duplicate) {
            emit_event(instance, adapter, "duplicate_result",
                       Value{{"adapter", adapter}, {"phase", phase}});
        }
        auto phase_it = descriptors_.at(instance->descriptor_name).phases.find(phase);
        if (phase_it != descriptors_.at(instance->descriptor_name).phases.end()) {
            hook = phase_it->second.on_result;
        }
    }
    if (hook) {
        executor_.post(instance->origin,
                       [this, instance, hook, adapter, value = std::move(value)] {
                           if (is_muted(instance->origin)) return;
                           SwarmContext ctx(*this, instance);
                           hook(ctx, adapter, value);
                       });
    }
}

void ChoreographyEngine::emit_event(const std::shared_ptr<SwarmInstance>& instance,
                                    const std::string& emitter, const std::string& event_name,
                                    Value payload) {
    if (event_name.empty()) throw ChoreographyError("event name must be non-empty");
    if (!is_canonical(payload)) throw NonCanonicalValue("event payload is not canonical");
    std::lock_guard<std::recursive_mutex> lock(mutex_);
    SwarmEvent event{next_event_seq_++, instance->id, event_name, emitter, std::move(payload)};
    instance->events.push_back(event);
    transcript_.push_back(std::move(event));
}

std::vector<SwarmEvent> ChoreographyEngine::transcript() const {
    std::lock_guard<std::recursive_mutex> lock(mutex_);
    return transcript_;
}

Value ChoreographyEngine::transcript_summary() const {
    std::lock_guard<std::recursive_mutex> lock(mutex_);
    Value rows = Value::array();
    for (const auto& event : transcript_) rows.push_back(event_summary(event));
    return rows;
}

Value ChoreographyEngine::manifest() const {
    std::lock_guard<std::recursive_mutex> lock(mutex_);
    Value entries = Value::array();
    for (const auto& [name, descriptor] : descriptors_) {
        (void)name;
        entries.push_back(manifest_entry(descriptor));
    }
    return entries;
}

}  // namespace swarmchain
