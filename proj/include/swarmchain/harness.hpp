#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "swarmchain/blockchain.hpp"
#include "swarmchain/bus.hpp"
#include "swarmchain/choreography.hpp"
#include "swarmchain/contracts.hpp"
#include "swarmchain/executor.hpp"
#include "swarmchain/miner.hpp"
#include "swarmchain/value.hpp"

namespace swarmchain {

/// Scenario config rejected; message carries the offending field path.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& message) : std::runtime_error(message) {}
};

/// File could not be opened or read/written.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& message) : std::runtime_error(message) {}
};

/// Transaction submitted while no live miner is registered in the miners group.
class NoMiners : public std::runtime_error {
public:
    NoMiners() : std::runtime_error("no live miners registered") {}
};

enum class EventKind {
    SubmitTx,
    JoinMiner,
    CrashMiner,
    DelayEdge,
};

/// One timed action. Only the fields of its kind are meaningful.
struct ScenarioEvent {
    std::int64_t at_tick = 0;
    EventKind kind = EventKind::SubmitTx;

    // SubmitTx
    std::string sender;
    std::string contract;
    Value params;
    std::optional<std::uint64_t> nonce;
    std::optional<std::int64_t> timestamp;

    // JoinMiner / CrashMiner
    AdapterId name;

    // DelayEdge
    AdapterId from;
    AdapterId to;
    std::int64_t ticks = 0;
};

/// A fully validated scenario. Initial miners are named "M1".."M<miners>".
struct ScenarioConfig {
    std::uint64_t seed = 0;
    std::size_t miners = 1;
    std::uint32_t difficulty_bits = kDefaultDifficultyBits;
    std::size_t block_cap = kDefaultBlockCap;
    std::int64_t contract_timeout_ms = 500;
    std::int64_t announce_timeout_ms = 100;
    std::int64_t update_timeout_ms = 100;
    std::int64_t tick_budget = 60000;
    bool verify_replay = false;
    std::vector<ScenarioEvent> events;
};

/// Parses and validates a scenario object.
///
/// Required: miners (integer >= 1). Optional: seed, difficultyBits, blockCap,
/// contractTimeoutMs, announceTimeoutMs, updateTimeoutMs, tickBudget,
/// verifyReplay, events. Unknown fields are rejected. Events must be sorted by
/// atTick and every referenced miner name must resolve at that point of the
/// event list. Throws ConfigError naming the offending field path.
ScenarioConfig scenario_from_value(const Value& root);

/// Reads a scenario file (canonical JSON object). Throws IoError, DecodeError
/// via canonical_decode, or ConfigError.
ScenarioConfig load_scenario_file(const std::string& path);

/// Per-miner figures in a run report.
struct MinerReport {
    std::size_t chain_length = 0;
    std::size_t pending_count = 0;
    std::size_t peer_count = 0;
};

/// Outcome of a scenario run. converged implies every live miner's tip hash
/// equals tip_hash. event_transcript holds the engine's event summary rows.
struct RunReport {
    bool converged = false;
    std::string tip_hash;
    std::size_t chain_length = 0;
    std::map<AdapterId, MinerReport> per_miner;
    Value event_transcript;
};

Value to_value(const RunReport& report);

/// Desk-scale simulated network: one deterministic executor driving a bus,
/// a choreography engine, the protocol choreographies, and a set of miners.
///
/// Construction builds the initial miners without joining them; run()
/// schedules the scenario events, joins the initial miners sequentially,
/// drives the executor to the tick budget, and reports. The scenario control
/// lane is named "@scenario"; '@' ids cannot collide with adapters because
/// the bus rejects them.
class Network {
public:
    explicit Network(ScenarioConfig config);
    ~Network();

    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;

    /// Executes the scenario once and reports. Callable again to re-settle
    /// and re-report after interactive submissions.
    RunReport run();

    /// Builds a transaction and broadcasts it through the addTransaction
    /// choreography. Auto-assigns a per-sender nonce when none is given and
    /// stamps the current tick when no timestamp is given. Returns the txId.
    /// Throws NoMiners when the miners group is empty.
    std::string submit_transaction(const std::string& sender,
                                   const std::string& contract,
                                   Value params,
                                   std::optional<std::uint64_t> nonce = std::nullopt,
                                   std::optional<std::int64_t> timestamp = std::nullopt);

    /// Drains all due work up to the tick budget.
    void settle();

    /// Report over current state without scheduling anything.
    RunReport report();

    Miner* miner(const AdapterId& id);
    std::vector<AdapterId> miner_ids() const;
    Chain chain_of(const AdapterId& id);

    DeterministicExecutor& executor() { return executor_; }
    ChoreographyEngine& engine() { return engine_; }
    ContractRegistry& contracts() { return contracts_; }
    Bus& bus() { return bus_; }
    const ScenarioConfig& config() const { return config_; }

private:
    void apply_event(const ScenarioEvent& event);
    void add_miner(const AdapterId& name);
    MinerConfig miner_config(const AdapterId& name) const;

    ScenarioConfig config_;
    DeterministicExecutor executor_;
    Bus bus_;
    ChoreographyEngine engine_;
    ContractRegistry contracts_;
    std::map<AdapterId, std::unique_ptr<Miner>> miners_;
    std::map<std::string, std::uint64_t> next_nonce_;
    bool ran_ = false;
};

/// Runs a scenario in a fresh network. Identical configs produce
/// byte-identical reports, transcript included.
RunReport run_scenario(const ScenarioConfig& config);

/// Writes a chain as json-lines: one canonical block object per line.
/// Throws IoError when the file cannot be written.
void write_chain_file(const Chain& chain, const std::string& path);

/// verify_chain_file outcome. line is 1-based; block i sits on line i+1.
struct VerifyResult {
    bool ok = false;
    std::string kind;     // "parse" | "validation", empty when ok
    std::string message;  // human-readable detail, empty when ok
    std::uint64_t line = 0;
};

/// Reads a json-lines chain file and validates it as a full chain.
/// An empty file is a parse error at line 1. Throws IoError when the file
/// cannot be opened.
VerifyResult verify_chain_file(const std::string& path,
                               std::uint32_t difficulty_bits = kDefaultDifficultyBits,
                               std::size_t block_cap = kDefaultBlockCap);

/// Reads a json-lines chain file and returns it. Throws IoError on open
/// failure and DecodeError with a "line N:" prefix on malformed lines.
Chain read_chain_file(const std::string& path);

}  // namespace swarmchain
