#include "swarmchain/harness.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

#include "swarmchain/sha256.hpp"

namespace swarmchain {

namespace {

constexpr const char* kScenarioLane = "@scenario";
constexpr std::size_t kMaxMiners = 64;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

const Value& expect_object(const Value& v, const std::string& path) {
    if (!v.is_object()) fail(path, "expected an object");
    return v;
}

void reject_unknown(const Value& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) fail(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
    }
}

std::int64_t expect_int(const Value& v, const std::string& path, std::int64_t min,
                        std::int64_t max) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) fail(path, "expected an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() >
                                      static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        fail(path, "integer out of range");
    }
    std::int64_t n = v.get<std::int64_t>();
    if (n < min || n > max) {
        fail(path, "must be between " + std::to_string(min) + " and " + std::to_string(max));
    }
    return n;
}

std::uint64_t expect_uint(const Value& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    fail(path, "expected a non-negative integer");
}

std::string expect_string(const Value& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
}

std::string expect_name(const Value& v, const std::string& path) {
    std::string name = expect_string(v, path);
    if (name.empty()) fail(path, "must be non-empty");
    if (name.front() == '@') fail(path, "'@' names are reserved for control lanes");
    return name;
}

ScenarioEvent parse_submit_tx(const Value& v, const std::string& path) {
    expect_object(v, path);
    reject_unknown(v, path, {"sender", "contract", "method", "params", "nonce", "timestamp"});
    ScenarioEvent e;
    e.kind = EventKind::SubmitTx;
    e.sender = v.contains("sender") ? expect_name(v["sender"], path + ".sender") : "client";
    e.contract = v.contains("contract") ? expect_string(v["contract"], path + ".contract") : "";
    e.params = Value::object();
    if (v.contains("params")) {
        e.params = expect_object(v["params"], path + ".params");
    }
    if (v.contains("method")) {
        std::string method = expect_string(v["method"], path + ".method");
        if (method.empty()) fail(path + ".method", "must be non-empty");
        if (e.params.contains("method")) {
            fail(path + ".method", "conflicts with params.method");
        }
        e.params["method"] = method;
    }
    if (v.contains("nonce")) e.nonce = expect_uint(v["nonce"], path + ".nonce");
    if (v.contains("timestamp")) {
        e.timestamp = expect_int(v["timestamp"], path + ".timestamp", 0,
                                 std::numeric_limits<std::int64_t>::max());
    }
    return e;
}

}  // namespace

ScenarioConfig scenario_from_value(const Value& root) {
    expect_object(root, "config");
    reject_unknown(root, "",
                   {"seed", "miners", "difficultyBits", "blockCap", "contractTimeoutMs",
                    "announceTimeoutMs", "updateTimeoutMs", "tickBudget", "verifyReplay",
                    "events"});

    ScenarioConfig config;
    if (root.contains("seed")) config.seed = expect_uint(root["seed"], "seed");
    if (!root.contains("miners")) fail("miners", "required field is missing");
    config.miners = static_cast<std::size_t>(
        expect_int(root["miners"], "miners", 1, static_cast<std::int64_t>(kMaxMiners)));
    if (root.contains("difficultyBits")) {
        config.difficulty_bits =
            static_cast<std::uint32_t>(expect_int(root["difficultyBits"], "difficultyBits", 0, 255));
    }
    if (root.contains("blockCap")) {
        config.block_cap =
            static_cast<std::size_t>(expect_int(root["blockCap"], "blockCap", 1, 1 << 20));
    }
    if (root.contains("contractTimeoutMs")) {
        config.contract_timeout_ms =
            expect_int(root["contractTimeoutMs"], "contractTimeoutMs", 1, 1 << 30);
    }
    if (root.contains("announceTimeoutMs")) {
        config.announce_timeout_ms =
            expect_int(root["announceTimeoutMs"], "announceTimeoutMs", 1, 1 << 30);
    }
    if (root.contains("updateTimeoutMs")) {
        config.update_timeout_ms = expect_int(root["updateTimeoutMs"], "updateTimeoutMs", 1, 1 << 30);
    }
    if (root.contains("tickBudget")) {
        config.tick_budget = expect_int(root["tickBudget"], "tickBudget", 1, 1LL << 40);
    }
    if (root.contains("verifyReplay")) {
        if (!root["verifyReplay"].is_boolean()) fail("verifyReplay", "expected a boolean");
        config.verify_replay = root["verifyReplay"].get<bool>();
    }

    std::set<AdapterId> known;
    std::set<AdapterId> crashed;
    for (std::size_t i = 1; i <= config.miners; ++i) known.insert("M" + std::to_string(i));

    if (root.contains("events")) {
        const Value& events = root["events"];
        if (!events.is_array()) fail("events", "expected an array");
        std::int64_t previous_tick = 0;
        for (std::size_t i = 0; i < events.size(); ++i) {
            const std::string path = "events[" + std::to_string(i) + "]";
            const Value& ev = expect_object(events[i], path);
            reject_unknown(ev, path, {"atTick", "action"});
            if (!ev.contains("atTick")) fail(path + ".atTick", "required field is missing");
            if (!ev.contains("action")) fail(path + ".action", "required field is missing");
            std::int64_t at_tick =
                expect_int(ev["atTick"], path + ".atTick", 0, std::numeric_limits<std::int64_t>::max());
            if (at_tick < previous_tick) fail(path + ".atTick", "events must be sorted by atTick");
            previous_tick = at_tick;

            const Value& action = expect_object(ev["action"], path + ".action");
            if (action.size() != 1) {
                fail(path + ".action", "expected exactly one action key");
            }
            const std::string kind = action.begin().key();
            const Value& body = action.begin().value();
            const std::string body_path = path + ".action." + kind;
            ScenarioEvent event;
            if (kind == "submitTx") {
                event = parse_submit_tx(body, body_path);
            } else if (kind == "joinMiner") {
                expect_object(body, body_path);
                reject_unknown(body, body_path, {"name"});
                if (!body.contains("name")) fail(body_path + ".name", "required field is missing");
                event.kind = EventKind::JoinMiner;
                event.name = expect_name(body["name"], body_path + ".name");
                if (known.count(event.name)) fail(body_path + ".name", "miner already exists");
                known.insert(event.name);
            } else if (kind == "crashMiner") {
                expect_object(body, body_path);
                reject_unknown(body, body_path, {"name"});
                if (!body.contains("name")) fail(body_path + ".name", "required field is missing");
                event.kind = EventKind::CrashMiner;
                event.name = expect_name(body["name"], body_path + ".name");
                if (!known.count(event.name)) fail(body_path + ".name", "unknown miner");
                if (!crashed.insert(event.name).second) fail(body_path + ".name", "already crashed");
            } else if (kind == "delayEdge") {
                expect_object(body, body_path);
                reject_unknown(body, body_path, {"from", "to", "ticks"});
                for (const char* key : {"from", "to", "ticks"}) {
                    if (!body.contains(key)) {
                        fail(body_path + "." + key, "required field is missing");
                    }
                }
                event.kind = EventKind::DelayEdge;
                event.from = expect_name(body["from"], body_path + ".from");
                event.to = expect_name(body["to"], body_path + ".to");
                if (!known.count(event.from)) fail(body_path + ".from", "unknown miner");
                if (!known.count(event.to)) fail(body_path + ".to", "unknown miner");
                if (event.from == event.to) fail(body_path + ".to", "must differ from 'from'");
                event.ticks = expect_int(body["ticks"], body_path + ".ticks", 0, 1 << 30);
            } else {
                fail(path + ".action." + kind, "unknown action");
            }
            event.at_tick = at_tick;
            config.events.push_back(std::move(event));
        }
    }
    return config;
}

ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("cannot read " + path);
    return scenario_from_value(canonical_decode(buffer.str()));
}

Value to_value(const RunReport& report) {
    Value per_miner = Value::object();
    for (const auto& [id, m] : report.per_miner) {
        per_miner[id] = Value{{"chainLength", m.chain_length},
                              {"pendingCount", m.pending_count},
                              {"peerCount", m.peer_count}};
    }
    return Value{{"converged", report.converged},
                 {"tipHash", report.tip_hash},
                 {"chainLength", report.chain_length},
                 {"perMiner", std::move(per_miner)},
                 {"eventTranscript", report.event_transcript}};
}

namespace {

/// Stable per-miner seed: same scenario seed and name, same stream.
std::uint64_t mix_seed(std::uint64_t seed, const AdapterId& name) {
    auto digest = sha256(std::to_string(seed) + ":" + name);
    std::uint64_t mixed = 0;
    for (int i = 0; i < 8; ++i) mixed = (mixed << 8) | digest[static_cast<std::size_t>(i)];
    return mixed;
}

}  // namespace

Network::Network(ScenarioConfig config)
    : config_(std::move(config)),
      executor_(config_.seed),
      bus_(executor_),
      engine_(executor_, bus_),
      contracts_(engine_) {
    contracts_.register_contract(sample_counter_contract());
    register_protocol_choreographies(engine_, [this](const AdapterId& id) -> Miner* {
        auto it = miners_.find(id);
        return it == miners_.end() ? nullptr : it->second.get();
    });
    for (std::size_t i = 1; i <= config_.miners; ++i) add_miner("M" + std::to_string(i));
}

Network::~Network() = default;

MinerConfig Network::miner_config(const AdapterId& name) const {
    MinerConfig mc;
    mc.difficulty_bits = config_.difficulty_bits;
    mc.block_cap = config_.block_cap;
    mc.contract_timeout_ms = config_.contract_timeout_ms;
    mc.announce_wait_ms = config_.announce_timeout_ms;
    mc.update_wait_ms = config_.update_timeout_ms;
    mc.verify_replay = config_.verify_replay;
    mc.rng_seed = mix_seed(config_.seed, name);
    return mc;
}

void Network::add_miner(const AdapterId& name) {
    miners_.emplace(name, std::make_unique<Miner>(name, engine_, contracts_, miner_config(name)));
}

void Network::apply_event(const ScenarioEvent& event) {
    switch (event.kind) {
        case EventKind::SubmitTx:
            try {
                submit_transaction(event.sender, event.contract, event.params, event.nonce,
                                   event.timestamp);
            } catch (const NoMiners&) {
                // Every miner crashed before this tick; the submission is lost,
                // matching a client broadcast into an empty group.
            }
            break;
        case EventKind::JoinMiner: {
            add_miner(event.name);
            Miner* m = miners_.at(event.name).get();
            executor_.post(event.name, [m] { m->begin_join_and_sync(); });
            break;
        }
        case EventKind::CrashMiner: {
            auto it = miners_.find(event.name);
            if (it != miners_.end()) {
                Miner* m = it->second.get();
                executor_.post(event.name, [m] { m->crash(); });
            }
            break;
        }
        case EventKind::DelayEdge:
            bus_.set_edge_delay(event.from, event.to, event.ticks);
            break;
    }
}

RunReport Network::run() {
    if (!ran_) {
        ran_ = true;
        for (const ScenarioEvent& event : config_.events) {
            executor_.post_after(event.at_tick, kScenarioLane,
                                 [this, event] { apply_event(event); });
        }
        for (auto& [id, miner] : miners_) {
            (void)id;
            miner->join_network();
        }
    }
    settle();
    return report();
}

void Network::settle() {
    while (executor_.now_ms() < config_.tick_budget && executor_.run_one()) {
    }
}

std::string Network::submit_transaction(const std::string& sender, const std::string& contract,
                                        Value params, std::optional<std::uint64_t> nonce,
                                        std::optional<std::int64_t> timestamp) {
    if (sender.empty()) throw std::invalid_argument("sender must be non-empty");
    if (!params.is_object()) throw std::invalid_argument("params must be an object");
    if (bus_.list_group(kMinersGroup).empty()) throw NoMiners();
    std::uint64_t tx_nonce;
    if (nonce) {
        tx_nonce = *nonce;
        std::uint64_t& next = next_nonce_[sender];
        next = std::max(next, tx_nonce + 1);
    } else {
        tx_nonce = next_nonce_[sender]++;
    }
    std::int64_t ts = timestamp ? *timestamp : executor_.now_ms();
    Transaction tx = make_transaction(sender, contract, std::move(params), tx_nonce, ts);
    engine_.execute_swarm(kAddTransactionChoreography, kAddTransactionCtor,
                          Value::array({to_value(tx)}), sender);
    return tx.tx_id;
}

Miner* Network::miner(const AdapterId& id) {
    auto it = miners_.find(id);
    return it == miners_.end() ? nullptr : it->second.get();
}

std::vector<AdapterId> Network::miner_ids() const {
    std::vector<AdapterId> ids;
    ids.reserve(miners_.size());
    for (const auto& [id, miner] : miners_) {
        (void)miner;
        ids.push_back(id);
    }
    return ids;
}

Chain Network::chain_of(const AdapterId& id) {
    auto it = miners_.find(id);
    if (it == miners_.end()) throw std::invalid_argument("unknown miner " + id);
    return it->second->snapshot().chain;
}

RunReport Network::report() {
    RunReport r;
    const Chain* best = nullptr;
    const Chain* best_live = nullptr;
    bool live_tips_equal = true;
    std::string live_tip;

    std::vector<std::pair<AdapterId, MinerSnapshot>> snapshots;
    snapshots.reserve(miners_.size());
    for (auto& [id, miner] : miners_) snapshots.emplace_back(id, miner->snapshot());

    auto better = [](const Chain& a, const Chain& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a.back().block_hash < b.back().block_hash;
    };

    for (const auto& [id, snap] : snapshots) {
        // pendingCount covers everything submitted but not yet mined, so a
        // round interrupted by the tick budget still shows its transactions.
        r.per_miner[id] = MinerReport{snap.chain.size(),
                                      snap.pending_pool.size() + snap.awaiting_pool.size(),
                                      snap.peers.size()};
        if (!best || better(snap.chain, *best)) best = &snap.chain;
        if (snap.crashed) continue;
        if (!best_live) {
            best_live = &snap.chain;
            live_tip = snap.chain.back().block_hash;
        } else {
            if (snap.chain.back().block_hash != live_tip) live_tips_equal = false;
            if (better(snap.chain, *best_live)) best_live = &snap.chain;
        }
    }

    const Chain* reported = best_live ? best_live : best;
    if (reported) {
        r.tip_hash = reported->back().block_hash;
        r.chain_length = reported->size();
    }
    r.converged = best_live != nullptr && live_tips_equal;
    r.event_transcript = engine_.transcript_summary();
    return r;
}

RunReport run_scenario(const ScenarioConfig& config) {
    Network network(config);
    return network.run();
}

void write_chain_file(const Chain& chain, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const Block& block : chain) {
        out << canonical_encode(to_value(block)) << '\n';
    }
    if (!out) throw IoError("cannot write " + path);
}

VerifyResult verify_chain_file(const std::string& path, std::uint32_t difficulty_bits,
                               std::size_t block_cap) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    Chain chain;
    std::string line;
    std::uint64_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) {
            return VerifyResult{false, "parse", "empty line", line_number};
        }
        try {
            chain.push_back(block_from_value(canonical_decode(line)));
        } catch (const std::exception& e) {
            return VerifyResult{false, "parse", e.what(), line_number};
        }
    }
    if (chain.empty()) {
        return VerifyResult{false, "parse", "empty file: a chain starts at its genesis block", 1};
    }
    if (auto fault = validate_chain(chain, difficulty_bits, block_cap)) {
        return VerifyResult{false, "validation", to_string(fault->error), fault->index + 1};
    }
    return VerifyResult{true, "", "", 0};
}

Chain read_chain_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    Chain chain;
    std::string line;
    std::uint64_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        try {
            chain.push_back(block_from_value(canonical_decode(line)));
        } catch (const std::exception& e) {
            throw DecodeError("line " + std::to_string(line_number) + ": " + e.what());
        }
    }
    return chain;
}

}  // namespace swarmchain
