#include "swarmchain/miner.hpp"

#include <algorithm>
#include <atomic>
#include <memory>
#include <stdexcept>
#include <utility>

namespace swarmchain {

namespace {

// Generous pump budget for sync wrappers that wait on chunked work.
constexpr std::int64_t kSyncPumpBudgetMs = 4'000'000;

Value field(const Value& obj, const char* key) {
    if (!obj.is_object()) return Value();
    auto it = obj.find(key);
    return it == obj.end() ? Value() : *it;
}

std::string field_string(const Value& obj, const char* key) {
    Value v = field(obj, key);
    return v.is_string() ? v.get<std::string>() : std::string();
}

bool pool_contains(const std::vector<Transaction>& pool, const std::string& id) {
    return std::any_of(pool.begin(), pool.end(),
                       [&](const Transaction& tx) { return tx.tx_id == id; });
}

/// Runs every contract transaction of `block` against `states`, in block
/// order. `chain_view` must be the serialized chain prefix that excludes
/// the block itself: that is what mining, acceptance, and replay all see,
/// which is why they agree on the resulting states. Success commits the
/// new state; error and timeout leave it untouched. Outcome summaries and
/// spawned internal transactions are collected when requested.
void apply_contract_txs(const Block& block, const Value& chain_view, ContractRegistry& contracts,
                        std::int64_t timeout_ms, const AdapterId& executing,
                        std::map<std::string, Value>& states,
                        std::map<std::string, Value>* outcomes,
                        std::vector<Transaction>* spawned) {
    for (const Transaction& tx : block.transactions) {
        if (tx.contract.empty()) continue;
        Value state;
        if (auto it = states.find(tx.contract); it != states.end()) state = it->second;

        ContractResult res;
        try {
            res = contracts.invoke(tx.contract, ContractInvocation{tx, state, chain_view},
                                   timeout_ms, executing);
        } catch (const UnknownContract& e) {
            res.outcome = ContractResult::Outcome::Error;
            res.message = e.what();
        }

        Value summary = Value::object();
        switch (res.outcome) {
            case ContractResult::Outcome::Success:
                summary["outcome"] = "success";
                states[tx.contract] = res.new_state;
                if (spawned) {
                    spawned->insert(spawned->end(), res.internal_txs.begin(),
                                    res.internal_txs.end());
                }
                break;
            case ContractResult::Outcome::Error:
                summary["outcome"] = "error";
                summary["message"] = res.message;
                break;
            case ContractResult::Outcome::Timeout:
                summary["outcome"] = "timeout";
                break;
        }
        if (outcomes) (*outcomes)[tx.tx_id] = summary;
    }
}

}  // namespace

std::string to_string(TxStatus s) {
    switch (s) {
        case TxStatus::Pooled: return "pooled";
        case TxStatus::Duplicate: return "duplicate";
        case TxStatus::Invalid: return "invalid";
    }
    return "invalid";
}

std::string to_string(BlockStatus s) {
    switch (s) {
        case BlockStatus::Accepted: return "accepted";
        case BlockStatus::Stale: return "stale";
        case BlockStatus::Unsynced: return "unsynced";
        case BlockStatus::Invalid: return "invalid";
    }
    return "invalid";
}

std::string to_string(UpdateStatus s) {
    switch (s) {
        case UpdateStatus::Applied: return "applied";
        case UpdateStatus::Rejected: return "rejected";
        case UpdateStatus::Timeout: return "timeout";
    }
    return "timeout";
}

Value to_value(const UpdatePayload& payload) {
    Value pending = Value::array();
    for (const Transaction& tx : payload.pending_pool) pending.push_back(to_value(tx));
    Value awaiting = Value::array();
    for (const Transaction& tx : payload.awaiting_pool) awaiting.push_back(to_value(tx));
    Value v = Value::object();
    v["chain"] = to_value(payload.chain);
    v["pendingPool"] = std::move(pending);
    v["awaitingPool"] = std::move(awaiting);
    return v;
}

UpdatePayload update_payload_from_value(const Value& v) {
    if (!v.is_object() || !v.contains("chain") || !v.contains("pendingPool") ||
        !v.contains("awaitingPool")) {
        throw DecodeError("update payload requires chain, pendingPool, awaitingPool");
    }
    const Value& pending = v.at("pendingPool");
    const Value& awaiting = v.at("awaitingPool");
    if (!pending.is_array() || !awaiting.is_array()) {
        throw DecodeError("update payload pools must be arrays");
    }
    UpdatePayload up;
    up.chain = chain_from_value(v.at("chain"));
    for (const Value& tx : pending) up.pending_pool.push_back(transaction_from_value(tx));
    for (const Value& tx : awaiting) up.awaiting_pool.push_back(transaction_from_value(tx));
    return up;
}

std::map<std::string, Value> replay_contract_states(
    const Chain& chain, ContractRegistry& contracts, std::int64_t timeout_ms,
    const AdapterId& executing_miner, std::uint32_t difficulty, std::size_t block_cap,
    std::map<std::string, Value>* outcomes) {
    if (auto fault = validate_chain(chain, difficulty, block_cap)) {
        throw InvalidChain(*fault, "chain invalid at block " + std::to_string(fault->index) +
                                       ": " + to_string(fault->error));
    }
    std::map<std::string, Value> states;
    Chain prefix;
    prefix.reserve(chain.size());
    for (const Block& block : chain) {
        apply_contract_txs(block, to_value(prefix), contracts, timeout_ms, executing_miner,
                           states, outcomes, nullptr);
        prefix.push_back(block);
    }
    return states;
}

Miner::Miner(AdapterId id, ChoreographyEngine& engine, ContractRegistry& contracts,
             MinerConfig config)
    : id_(std::move(id)),
      engine_(engine),
      contracts_(contracts),
      config_(config),
      chain_{genesis_block()},
      rng_(config.rng_seed) {
    engine_.attach_adapter(id_, kMinersGroup);
}

void Miner::lane(Task task) { engine_.executor().post(id_, std::move(task)); }

// ---------------------------------------------------------------------------
// Join (Fig 7 flow).

void Miner::begin_join(std::function<void(JoinResult)> on_done) {
    if (crashed_ || join_pending_) {
        if (on_done) on_done(JoinResult{0, true});
        return;
    }
    join_pending_ = true;
    ++join_generation_;
    join_responded_ = 0;
    join_callback_ = std::move(on_done);

    Value data = Value::object();
    data["chain"] = to_value(chain_);
    SwarmHandle handle = engine_.execute_swarm(
        kInternalChoreography, kInternalCtor,
        Value::array({Value(kModeBroadcast), Value(id_), Value(kPhaseAnnounce), data}), id_);
    join_expected_ = handle.dispatched_count();

    std::uint64_t gen = join_generation_;
    engine_.executor().post_after(config_.announce_wait_ms, id_, [this, gen] {
        if (join_pending_ && join_generation_ == gen) finish_join(true);
    });
}

void Miner::on_announce_result(const AdapterId& from, const Value& result) {
    if (result.is_string()) {
        const std::string name = result.get<std::string>();
        if (!name.empty() && name != id_) peers_.insert(name);
    }
    (void)from;
    if (!join_pending_) return;
    ++join_responded_;
    if (join_responded_ >= join_expected_) finish_join(false);
}

void Miner::finish_join(bool timed_out) {
    join_pending_ = false;
    JoinResult result{join_expected_, timed_out};
    auto callback = std::move(join_callback_);
    join_callback_ = nullptr;
    if (callback) callback(result);
}

JoinResult Miner::join_network() {
    auto done = std::make_shared<std::atomic<bool>>(false);
    auto out = std::make_shared<JoinResult>();
    lane([this, done, out] {
        begin_join([done, out](JoinResult r) {
            *out = r;
            done->store(true);
        });
    });
    engine_.executor().wait_until([done] { return done->load(); },
                                  config_.announce_wait_ms + 1000);
    return *out;
}

void Miner::begin_join_and_sync() {
    begin_join([this](JoinResult) {
        if (crashed_ || peers_.empty()) return;
        begin_update(random_peer(), nullptr);
    });
}

// ---------------------------------------------------------------------------
// Update (Fig 6 flow).

void Miner::begin_update(const AdapterId& peer, std::function<void(UpdateStatus)> on_done) {
    if (crashed_ || update_pending_) {
        if (on_done) on_done(UpdateStatus::Rejected);
        return;
    }
    // Prefer the suggested source (the sender of an out-of-range block),
    // falling back to a random known peer.
    std::vector<AdapterId> candidates;
    if (!peer.empty() && peer != id_) candidates.push_back(peer);
    if (!peers_.empty()) {
        AdapterId fallback = random_peer();
        if (candidates.empty() || fallback != candidates.front()) candidates.push_back(fallback);
    }

    update_pending_ = true;
    ++update_generation_;
    update_callback_ = std::move(on_done);

    bool dispatched = false;
    for (const AdapterId& target : candidates) {
        try {
            engine_.execute_swarm(
                kInternalChoreography, kInternalCtor,
                Value::array({Value(kModeDirect), Value(target), Value(id_), Value(kPhaseUpdate)}),
                id_);
            dispatched = true;
            break;
        } catch (const UnknownAdapter&) {
            continue;
        }
    }
    if (!dispatched) {
        finish_update(UpdateStatus::Timeout);
        return;
    }

    std::uint64_t gen = update_generation_;
    engine_.executor().post_after(config_.update_wait_ms, id_, [this, gen] {
        if (update_pending_ && update_generation_ == gen) finish_update(UpdateStatus::Timeout);
    });
}

void Miner::on_update_result(const AdapterId& from, const Value& payload) {
    if (crashed_) return;
    if (!from.empty() && from != id_) peers_.insert(from);
    if (!update_pending_) return;

    UpdatePayload up;
    try {
        up = update_payload_from_value(payload);
    } catch (const std::exception&) {
        finish_update(UpdateStatus::Rejected);
        return;
    }
    if (resolve_fork(chain_, up.chain, config_.difficulty_bits, config_.block_cap) ==
        ForkChoice::AdoptRemote) {
        adopt_chain(std::move(up.chain), up.pending_pool, up.awaiting_pool);
        finish_update(UpdateStatus::Applied);
    } else {
        finish_update(UpdateStatus::Rejected);
    }
}

void Miner::finish_update(UpdateStatus status) {
    update_pending_ = false;
    auto callback = std::move(update_callback_);
    update_callback_ = nullptr;
    if (callback) callback(status);
    // Branches reported while this update was in flight still need a
    // look, or a three-way fork can settle on different tips.
    if (!crashed_ && !update_pending_ && !resync_hints_.empty()) {
        AdapterId next = *resync_hints_.begin();
        resync_hints_.erase(resync_hints_.begin());
        begin_update(next, nullptr);
    }
}

void Miner::request_resync(const AdapterId& source) {
    if (update_pending_) {
        if (!source.empty() && source != id_) resync_hints_.insert(source);
        return;
    }
    begin_update(source, nullptr);
}

UpdateStatus Miner::request_update_sync(const AdapterId& peer) {
    auto done = std::make_shared<std::atomic<bool>>(false);
    auto out = std::make_shared<UpdateStatus>(UpdateStatus::Timeout);
    lane([this, peer, done, out] {
        begin_update(peer, [done, out](UpdateStatus s) {
            *out = s;
            done->store(true);
        });
    });
    engine_.executor().wait_until([done] { return done->load(); }, config_.update_wait_ms + 1000);
    return *out;
}

AdapterId Miner::random_peer() {
    auto it = peers_.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(rng_() % peers_.size()));
    return *it;
}

// ---------------------------------------------------------------------------
// Protocol handlers.

std::string Miner::handle_announce(const AdapterId& sender, const Value& data) {
    if (!sender.empty() && sender != id_) peers_.insert(sender);
    Value chain_value = field(data, "chain");
    if (!chain_value.is_null()) {
        try {
            Chain remote = chain_from_value(chain_value);
            if (resolve_fork(chain_, remote, config_.difficulty_bits, config_.block_cap) ==
                ForkChoice::AdoptRemote) {
                adopt_chain(std::move(remote), {}, {});
            }
        } catch (const std::exception&) {
            // Malformed attachment; the name reply still flows.
        }
    }
    return id_;
}

TxStatus Miner::handle_send_transaction(const Transaction& tx) {
    if (tx.tx_id != tx_id(tx)) return TxStatus::Invalid;
    if (!tx.params.is_object()) return TxStatus::Invalid;
    if (!tx.contract.empty() && field_string(tx.params, "method").empty()) {
        return TxStatus::Invalid;
    }
    if (on_chain_ids_.count(tx.tx_id) || pool_contains(pending_, tx.tx_id) ||
        pool_contains(awaiting_, tx.tx_id)) {
        return TxStatus::Duplicate;
    }
    pending_.push_back(tx);
    maybe_start_mining();
    return TxStatus::Pooled;
}

BlockStatus Miner::handle_add_block(const Block& block) {
    const Block& tip = chain_.back();
    if (block.index == tip.index && block.block_hash == tip.block_hash) return BlockStatus::Stale;
    if (block.index < tip.index) return BlockStatus::Stale;
    if (block.index == tip.index) {
        // A competing tip at the same height: neither branch is longer, so
        // fetch the other side's chain and let fork resolution pick the
        // winner. Treating this as stale would wedge both branches.
        request_resync(block.miner_id);
        return BlockStatus::Unsynced;
    }
    if (block.index > tip.index + 1 || block.prev_hash != tip.block_hash) {
        request_resync(block.miner_id);
        return BlockStatus::Unsynced;
    }
    if (validate_block(block, tip, config_.difficulty_bits, config_.block_cap)) {
        return BlockStatus::Invalid;
    }
    accept_block(block);
    return BlockStatus::Accepted;
}

UpdatePayload Miner::handle_update(const AdapterId& requester) {
    if (!requester.empty() && requester != id_) peers_.insert(requester);
    return UpdatePayload{chain_, pending_, awaiting_};
}

// ---------------------------------------------------------------------------
// Mining.

void Miner::maybe_start_mining() {
    if (crashed_ || mining_ || pending_.empty()) return;
    start_round();
}

std::vector<Transaction> Miner::select_for_mining() {
    std::size_t take = std::min(config_.block_cap, pending_.size());
    std::vector<Transaction> selected(pending_.begin(),
                                      pending_.begin() + static_cast<std::ptrdiff_t>(take));
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(take));
    return selected;
}

void Miner::start_round() {
    mining_ = true;
    ++mining_generation_;
    last_round_cancelled_ = false;
    awaiting_ = select_for_mining();

    Block draft;
    draft.index = chain_.back().index + 1;
    draft.prev_hash = chain_.back().block_hash;
    draft.timestamp = engine_.executor().now_ms();
    draft.miner_id = id_;
    draft.difficulty = config_.difficulty_bits;
    draft.transactions = awaiting_;

    // Contract execution happens once, at selection time; the committed
    // states are reused verbatim when the mined block lands.
    mining_scratch_states_ = contract_states_;
    mining_outcomes_.clear();
    mining_spawned_.clear();
    apply_block_contracts(draft, mining_scratch_states_, mining_outcomes_, mining_spawned_);

    mining_draft_ = std::move(draft);
    mining_next_nonce_ = 0;
    std::uint64_t gen = mining_generation_;
    lane([this, gen] { mining_step(gen); });
}

void Miner::mining_step(std::uint64_t generation) {
    if (!mining_ || generation != mining_generation_ || crashed_) return;
    std::optional<std::uint64_t> found =
        scan_nonces(mining_draft_, mining_next_nonce_, config_.mining_chunk);
    if (found) {
        Block block = mining_draft_;
        block.nonce = *found;
        block.block_hash = hash_block(block);
        finish_round(std::move(block));
        return;
    }
    mining_next_nonce_ += config_.mining_chunk;
    std::uint64_t gen = generation;
    lane([this, gen] { mining_step(gen); });
}

void Miner::finish_round(Block block) {
    chain_.push_back(block);
    for (const Transaction& tx : block.transactions) on_chain_ids_.insert(tx.tx_id);
    contract_states_ = std::move(mining_scratch_states_);
    for (auto& [id, summary] : mining_outcomes_) tx_outcomes_[id] = summary;
    awaiting_.clear();
    mining_ = false;
    last_round_cancelled_ = false;
    last_mined_block_ = block;
    ++rounds_completed_;
    append_pending(mining_spawned_);
    mining_spawned_.clear();
    if (config_.verify_replay) verify_replay_or_abort();

    // Fig 5: fire-and-forget broadcast; the emitter never waits on results.
    Value data = Value::object();
    data["block"] = to_value(block);
    engine_.execute_swarm(
        kInternalChoreography, kInternalCtor,
        Value::array({Value(kModeBroadcast), Value(id_), Value(kPhaseAddBlock), data}), id_);

    maybe_start_mining();
}

void Miner::cancel_mining() {
    if (!mining_) return;
    ++mining_generation_;
    mining_ = false;
    last_round_cancelled_ = true;
    ++rounds_completed_;
    restore_awaiting_to_pending();
    mining_scratch_states_.clear();
    mining_outcomes_.clear();
    mining_spawned_.clear();
}

void Miner::restore_awaiting_to_pending() {
    if (awaiting_.empty()) return;
    // Awaiting txs are the oldest; they rejoin at the front, in their
    // original order, minus anything that made it onto the chain.
    std::vector<Transaction> merged;
    merged.reserve(awaiting_.size() + pending_.size());
    for (Transaction& tx : awaiting_) {
        if (!on_chain_ids_.count(tx.tx_id)) merged.push_back(std::move(tx));
    }
    for (Transaction& tx : pending_) {
        if (!on_chain_ids_.count(tx.tx_id)) merged.push_back(std::move(tx));
    }
    pending_ = std::move(merged);
    awaiting_.clear();
}

MiningOutcome Miner::mining_round_sync() {
    auto stage = std::make_shared<std::atomic<int>>(0);  // 0 pending, 1 no-work, 2 started
    auto target = std::make_shared<std::uint64_t>(0);
    lane([this, stage, target] {
        if (crashed_ || mining_ || pending_.empty()) {
            stage->store(1);
            return;
        }
        *target = rounds_completed_ + 1;
        start_round();
        stage->store(2);
    });
    Executor& executor = engine_.executor();
    executor.wait_until([stage] { return stage->load() != 0; }, kSyncPumpBudgetMs);

    MiningOutcome out;
    if (stage->load() != 2) {
        out.status = MiningOutcome::Status::NoWork;
        return out;
    }
    executor.wait_until([this, target] { return rounds_completed_ >= *target; },
                        kSyncPumpBudgetMs);
    if (last_round_cancelled_) {
        out.status = MiningOutcome::Status::Cancelled;
    } else {
        out.status = MiningOutcome::Status::Mined;
        out.block = last_mined_block_;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Chain application.

void Miner::purge_on_chain(std::vector<Transaction>& pool) const {
    pool.erase(std::remove_if(pool.begin(), pool.end(),
                              [&](const Transaction& tx) {
                                  return on_chain_ids_.count(tx.tx_id) != 0;
                              }),
               pool.end());
}

void Miner::append_pending(const std::vector<Transaction>& txs) {
    for (const Transaction& tx : txs) {
        if (on_chain_ids_.count(tx.tx_id)) continue;
        if (pool_contains(pending_, tx.tx_id) || pool_contains(awaiting_, tx.tx_id)) continue;
        pending_.push_back(tx);
    }
}

void Miner::apply_block_contracts(const Block& block, std::map<std::string, Value>& states,
                                  std::map<std::string, Value>& outcomes,
                                  std::vector<Transaction>& spawned) const {
    apply_contract_txs(block, to_value(chain_), contracts_, config_.contract_timeout_ms, id_,
                       states, &outcomes, &spawned);
}

void Miner::accept_block(const Block& block) {
    // Any round in flight was built on the old tip; abandon it so its
    // awaiting txs rejoin the pool before the purge below.
    cancel_mining();
    std::vector<Transaction> spawned;
    apply_block_contracts(block, contract_states_, tx_outcomes_, spawned);
    chain_.push_back(block);
    for (const Transaction& tx : block.transactions) on_chain_ids_.insert(tx.tx_id);
    purge_on_chain(pending_);
    purge_on_chain(awaiting_);
    append_pending(spawned);
    if (config_.verify_replay) verify_replay_or_abort();
    maybe_start_mining();
}

void Miner::adopt_chain(Chain chain, const std::vector<Transaction>& remote_pending,
                        const std::vector<Transaction>& remote_awaiting) {
    cancel_mining();
    std::map<std::string, Value> outcomes;
    std::map<std::string, Value> states = swarmchain::replay_contract_states(
        chain, contracts_, config_.contract_timeout_ms, id_, config_.difficulty_bits,
        config_.block_cap, &outcomes);
    chain_ = std::move(chain);
    contract_states_ = std::move(states);
    tx_outcomes_ = std::move(outcomes);
    on_chain_ids_.clear();
    for (const Block& block : chain_) {
        for (const Transaction& tx : block.transactions) on_chain_ids_.insert(tx.tx_id);
    }
    purge_on_chain(pending_);
    append_pending(remote_pending);
    append_pending(remote_awaiting);
    maybe_start_mining();
}

std::map<std::string, Value> Miner::replay_contract_states(const Chain& chain) const {
    return swarmchain::replay_contract_states(chain, contracts_, config_.contract_timeout_ms, id_,
                                              config_.difficulty_bits, config_.block_cap);
}

void Miner::verify_replay_or_abort() const {
    auto replayed = replay_contract_states(chain_);
    if (replayed != contract_states_) {
        throw std::logic_error("incremental contract states diverge from replay on " + id_);
    }
}

// ---------------------------------------------------------------------------
// Lifecycle and inspection.

void Miner::crash() {
    if (crashed_) return;
    crashed_ = true;
    cancel_mining();
    resync_hints_.clear();
    if (join_pending_) finish_join(true);
    if (update_pending_) finish_update(UpdateStatus::Timeout);
    engine_.set_muted(id_, true);
    engine_.detach_adapter(id_);
}

MinerSnapshot Miner::snapshot() {
    auto done = std::make_shared<std::atomic<bool>>(false);
    auto snap = std::make_shared<MinerSnapshot>();
    lane([this, done, snap] {
        snap->id = id_;
        snap->chain = chain_;
        snap->pending_pool = pending_;
        snap->awaiting_pool = awaiting_;
        snap->peers = peers_;
        snap->contract_states = contract_states_;
        snap->tx_outcomes = tx_outcomes_;
        snap->mining = mining_;
        snap->crashed = crashed_;
        done->store(true);
    });
    engine_.executor().wait_until([done] { return done->load(); }, kSyncPumpBudgetMs);
    return *snap;
}

// ---------------------------------------------------------------------------
// Protocol choreographies.

void register_protocol_choreographies(ChoreographyEngine& engine, MinerLookup lookup) {
    {
        Descriptor d;
        d.meta = Value{{"name", kInternalChoreography}};
        d.vars["from"] = Value();
        d.vars["data"] = Value();

        d.ctors[kInternalCtor] = [](SwarmContext& ctx, const Value& args) {
            if (!args.is_array() || args.size() != 4 || !args[0].is_string() ||
                !args[1].is_string()) {
                throw std::invalid_argument("internal ctor expects [mode, a, b, c]");
            }
            const std::string mode = args[0].get<std::string>();
            if (mode == kModeBroadcast) {
                // [mode, from, phase, data]
                if (!args[2].is_string()) {
                    throw std::invalid_argument("broadcast mode expects a phase name");
                }
                const std::string phase = args[2].get<std::string>();
                ctx.vars()["from"] = args[1];
                ctx.vars()["data"] = args[3];
                std::size_t count = ctx.dispatch_broadcast(phase);
                ctx.emit(phase + "_success",
                         Value{{"count", count}, {"from", args[1]}});
            } else if (mode == kModeDirect) {
                // [mode, to, from, phase]
                if (!args[2].is_string() || !args[3].is_string()) {
                    throw std::invalid_argument("direct mode expects [mode, to, from, phase]");
                }
                const std::string phase = args[3].get<std::string>();
                ctx.vars()["from"] = args[2];
                ctx.vars()["data"] = Value();
                ctx.dispatch_direct(phase, args[1].get<std::string>());
                ctx.emit(phase, Value{{"to", args[1]}, {"from", args[2]}});
            } else {
                throw std::invalid_argument("unknown internal mode: " + mode);
            }
        };

        d.phases[kPhaseAnnounce] = PhaseDecl{
            kMinersGroup,
            [lookup](PhaseContext& ctx) -> Value {
                Miner* miner = lookup(ctx.self);
                if (!miner) return Value();
                return Value(miner->handle_announce(field_string(ctx.vars, "from"),
                                                    field(ctx.vars, "data")));
            },
            [lookup](SwarmContext& ctx, const AdapterId& from, const Value& result) {
                ctx.emit(std::string(kPhaseAnnounce), Value{{"from", from}, {"name", result}});
                if (Miner* miner = lookup(ctx.origin())) miner->on_announce_result(from, result);
            }};

        d.phases[kPhaseAddBlock] = PhaseDecl{
            kMinersGroup,
            [lookup](PhaseContext& ctx) -> Value {
                Miner* miner = lookup(ctx.self);
                if (!miner) return Value();
                Block block;
                try {
                    block = block_from_value(field(field(ctx.vars, "data"), "block"));
                } catch (const std::exception&) {
                    return Value(to_string(BlockStatus::Invalid));
                }
                return Value(to_string(miner->handle_add_block(block)));
            },
            nullptr};

        d.phases[kPhaseUpdate] = PhaseDecl{
            kMinersGroup,
            [lookup](PhaseContext& ctx) -> Value {
                Miner* miner = lookup(ctx.self);
                if (!miner) return Value();
                return to_value(miner->handle_update(field_string(ctx.vars, "from")));
            },
            [lookup](SwarmContext& ctx, const AdapterId& from, const Value& result) {
                ctx.emit("update_success", Value{{"from", from}, {"payload", result}});
                if (Miner* miner = lookup(ctx.origin())) miner->on_update_result(from, result);
            }};

        engine.register_choreography(std::move(d));
    }

    {
        Descriptor d;
        d.meta = Value{{"name", kAddTransactionChoreography}};
        d.vars["transaction"] = Value();

        d.ctors[kAddTransactionCtor] = [](SwarmContext& ctx, const Value& args) {
            if (!args.is_array() || args.size() != 1) {
                throw std::invalid_argument("addTransaction ctor expects [transaction]");
            }
            ctx.vars()["transaction"] = args[0];
            std::size_t count = ctx.dispatch_broadcast(kPhaseSendTransaction);
            ctx.emit(std::string(kPhaseSendTransaction) + "_success", Value{{"count", count}});
        };

        d.phases[kPhaseSendTransaction] = PhaseDecl{
            kMinersGroup,
            [lookup](PhaseContext& ctx) -> Value {
                Miner* miner = lookup(ctx.self);
                if (!miner) return Value();
                Transaction tx;
                try {
                    tx = transaction_from_value(field(ctx.vars, "transaction"));
                } catch (const std::exception&) {
                    return Value(to_string(TxStatus::Invalid));
                }
                return Value(to_string(miner->handle_send_transaction(tx)));
            },
            nullptr};

        engine.register_choreography(std::move(d));
    }
}

}  // namespace swarmchain
