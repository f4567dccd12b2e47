#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "swarmchain/blockchain.hpp"
#include "swarmchain/choreography.hpp"
#include "swarmchain/contracts.hpp"

namespace swarmchain {

inline constexpr const char* kMinersGroup = "miners";

// Protocol vocabulary shared by miners, the harness, and tests.
inline constexpr const char* kInternalChoreography = "internal";
inline constexpr const char* kAddTransactionChoreography = "addTransaction";
inline constexpr const char* kInternalCtor = "ctor";
inline constexpr const char* kAddTransactionCtor = "start";
inline constexpr const char* kModeBroadcast = "broadcast";
inline constexpr const char* kModeDirect = "direct";
inline constexpr const char* kPhaseAnnounce = "announce";
inline constexpr const char* kPhaseAddBlock = "addBlock";
inline constexpr const char* kPhaseUpdate = "update";
inline constexpr const char* kPhaseSendTransaction = "sendTransaction";

class InvalidChain : public std::runtime_error {
public:
    InvalidChain(ChainFault fault_, const std::string& what)
        : std::runtime_error(what), fault(fault_) {}
    ChainFault fault;
};

struct MinerConfig {
    std::uint32_t difficulty_bits = kDefaultDifficultyBits;
    std::size_t block_cap = kDefaultBlockCap;
    std::int64_t contract_timeout_ms = 500;
    /// How long join waits for announce results before settling for
    /// whatever arrived.
    std::int64_t announce_wait_ms = 100;
    /// How long an update request waits for the peer's payload.
    std::int64_t update_wait_ms = 100;
    /// Nonces scanned per mining task; one task is one logical tick, so
    /// this is the cancellation granularity.
    std::uint64_t mining_chunk = kDefaultNonceChunk;
    /// After every applied block, check the incrementally maintained
    /// contract states against a full chain replay.
    bool verify_replay = false;
    std::uint64_t rng_seed = 0;
};

enum class TxStatus { Pooled, Duplicate, Invalid };
enum class BlockStatus { Accepted, Stale, Unsynced, Invalid };
enum class UpdateStatus { Applied, Rejected, Timeout };

std::string to_string(TxStatus s);
std::string to_string(BlockStatus s);
std::string to_string(UpdateStatus s);

struct JoinResult {
    std::size_t announced = 0;  // announce dispatch count, self included
    bool timed_out = false;
};

/// The Fig 6 update payload: the responder's chain plus both pools.
struct UpdatePayload {
    Chain chain;
    std::vector<Transaction> pending_pool;
    std::vector<Transaction> awaiting_pool;
};

Value to_value(const UpdatePayload& payload);
UpdatePayload update_payload_from_value(const Value& v);

struct MiningOutcome {
    enum class Status { Mined, NoWork, Cancelled } status = Status::NoWork;
    std::optional<Block> block;
};

struct MinerSnapshot {
    AdapterId id;
    Chain chain;
    std::vector<Transaction> pending_pool;
    std::vector<Transaction> awaiting_pool;
    std::set<AdapterId> peers;
    std::map<std::string, Value> contract_states;
    /// txId -> {"outcome": "success"|"error"|"timeout", ...} for every
    /// contract transaction this miner has applied.
    std::map<std::string, Value> tx_outcomes;
    bool mining = false;
    bool crashed = false;
};

/// Replays every contract transaction of a validated chain from null
/// states, in chain order; each invocation sees the chain prefix before
/// its own block. Error and timeout outcomes leave the state untouched.
/// Throws InvalidChain if the chain does not validate. When `outcomes`
/// is given it receives the per-txId outcome summaries.
std::map<std::string, Value> replay_contract_states(
    const Chain& chain, ContractRegistry& contracts, std::int64_t timeout_ms,
    const AdapterId& executing_miner, std::uint32_t difficulty, std::size_t block_cap,
    std::map<std::string, Value>* outcomes = nullptr);

/// A mining adapter. All state mutations happen on the miner's own
/// executor lane (named by its id): protocol phases arrive there via
/// the bus, mining runs as chunked tasks posted there, and the sync
/// wrappers pump the executor from the caller's context. Methods in the
/// "lane context" section below must only be called from that lane (or
/// in a single-threaded harness with no tasks in flight).
class Miner {
public:
    Miner(AdapterId id, ChoreographyEngine& engine, ContractRegistry& contracts,
          MinerConfig config);

    const AdapterId& id() const { return id_; }
    const MinerConfig& config() const { return config_; }

    // Sync wrappers: pump the executor; never call from inside a task.
    // join_network, request_update_sync, and snapshot are safe with
    // either executor; mining_round_sync reads round state while
    // pumping and is for the deterministic executor only.

    /// Fig 7: broadcast announce, wait for as many announce results as
    /// were dispatched (self included), record responder names as
    /// peers.
    JoinResult join_network();
    /// Fig 6: direct update call to one peer, fork-resolved on reply.
    UpdateStatus request_update_sync(const AdapterId& peer);
    /// Drives one mining round to completion: NoWork on an empty pool,
    /// Cancelled if a competing block interrupted it, Mined otherwise.
    MiningOutcome mining_round_sync();
    /// Copies the state via a lane task, so it serializes with handlers.
    MinerSnapshot snapshot();

    // Async entry points: safe from the miner's own lane.

    void begin_join(std::function<void(JoinResult)> on_done = nullptr);
    /// Join, then request an update from one random known peer: the
    /// late-join recovery flow.
    void begin_join_and_sync();
    void begin_update(const AdapterId& peer, std::function<void(UpdateStatus)> on_done = nullptr);

    /// Mutes the adapter, deregisters it from the bus, and abandons any
    /// mining round. The object stays inspectable.
    void crash();
    bool crashed() const { return crashed_; }

    // Lane context: protocol handlers and state transitions.

    /// Returns this miner's name; records the announcer as a peer and
    /// adopts an attached chain when resolve_fork prefers it.
    std::string handle_announce(const AdapterId& sender, const Value& data);
    TxStatus handle_send_transaction(const Transaction& tx);
    BlockStatus handle_add_block(const Block& block);
    /// Snapshot payload for a requesting peer; the requester is learned.
    UpdatePayload handle_update(const AdapterId& requester);
    /// Starts a mining round unless one is running or the pool is empty.
    void maybe_start_mining();

    std::map<std::string, Value> replay_contract_states(const Chain& chain) const;

    // Hook targets invoked on this miner's lane by the protocol
    // descriptors (see register_protocol_choreographies).
    void on_announce_result(const AdapterId& from, const Value& result);
    void on_update_result(const AdapterId& from, const Value& payload);

private:
    void lane(Task task);
    std::vector<Transaction> select_for_mining();
    void start_round();
    void mining_step(std::uint64_t generation);
    void finish_round(Block block);
    void cancel_mining();
    void restore_awaiting_to_pending();
    void purge_on_chain(std::vector<Transaction>& pool) const;
    void append_pending(const std::vector<Transaction>& txs);
    void apply_block_contracts(const Block& block, std::map<std::string, Value>& states,
                               std::map<std::string, Value>& outcomes,
                               std::vector<Transaction>& spawned) const;
    void adopt_chain(Chain chain, const std::vector<Transaction>& remote_pending,
                     const std::vector<Transaction>& remote_awaiting);
    void accept_block(const Block& block);
    void verify_replay_or_abort() const;
    void finish_join(bool timed_out);
    void finish_update(UpdateStatus status);
    void request_resync(const AdapterId& source);
    AdapterId random_peer();

    AdapterId id_;
    ChoreographyEngine& engine_;
    ContractRegistry& contracts_;
    MinerConfig config_;

    Chain chain_;
    std::vector<Transaction> pending_;
    std::vector<Transaction> awaiting_;
    std::set<AdapterId> peers_;
    std::map<std::string, Value> contract_states_;
    std::map<std::string, Value> tx_outcomes_;
    std::set<std::string> on_chain_ids_;
    std::mt19937_64 rng_;
    bool crashed_ = false;

    bool mining_ = false;
    std::uint64_t mining_generation_ = 0;
    Block mining_draft_;
    std::uint64_t mining_next_nonce_ = 0;
    std::map<std::string, Value> mining_scratch_states_;
    std::map<std::string, Value> mining_outcomes_;
    std::vector<Transaction> mining_spawned_;
    std::uint64_t rounds_completed_ = 0;
    bool last_round_cancelled_ = false;
    std::optional<Block> last_mined_block_;

    bool join_pending_ = false;
    std::uint64_t join_generation_ = 0;
    std::size_t join_expected_ = 0;
    std::size_t join_responded_ = 0;
    bool join_timer_expired_ = false;
    std::function<void(JoinResult)> join_callback_;

    bool update_pending_ = false;
    std::uint64_t update_generation_ = 0;
    std::function<void(UpdateStatus)> update_callback_;
    /// Sources of unsynced blocks seen while an update was already in
    /// flight; drained one per finished update so no branch is missed.
    std::set<AdapterId> resync_hints_;
};

using MinerLookup = std::function<Miner*(const AdapterId&)>;

/// Registers the two protocol choreographies.
///
/// "internal" (vars {from, data}) carries the miner protocol. Its ctor
/// takes [mode, a, b, c]: mode "broadcast" dispatches phase b from
/// miner a with data c and emits "<b>_success" {count, from}; mode
/// "direct" dispatches phase c from miner b to adapter a and emits
/// "<c>" {to, from}. Phases: "announce" (responds with the handler's
/// name; results re-emitted as "announce" events), "addBlock" (no
/// result hook: the emitter never waits on it), "update" (result
/// re-emitted as "update_success" carrying the UpdatePayload).
///
/// "addTransaction" (vars {transaction}) is the Fig 4 client flow: its
/// ctor broadcasts the "sendTransaction" phase to the miners group and
/// emits "sendTransaction_success" {count}.
void register_protocol_choreographies(ChoreographyEngine& engine, MinerLookup lookup);

}  // namespace swarmchain
