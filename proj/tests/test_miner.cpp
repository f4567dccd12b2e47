#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "swarmchain/miner.hpp"

using namespace swarmchain;

namespace {

/// A small mining network on the deterministic executor, with the
/// counter contract and both protocol choreographies registered.
struct Rig {
    DeterministicExecutor exec;
    Bus bus;
    ChoreographyEngine engine;
    ContractRegistry contracts;
    std::map<AdapterId, std::unique_ptr<Miner>> miners;

    explicit Rig(std::uint64_t seed = 0)
        : exec(seed), bus(exec), engine(exec, bus), contracts(engine) {
        contracts.register_contract(sample_counter_contract());
        register_protocol_choreographies(engine, [this](const AdapterId& id) -> Miner* {
            auto it = miners.find(id);
            return it == miners.end() ? nullptr : it->second.get();
        });
    }

    Miner& add_miner(const AdapterId& id, MinerConfig config = {}) {
        auto miner = std::make_unique<Miner>(id, engine, contracts, config);
        Miner& ref = *miner;
        miners.emplace(id, std::move(miner));
        return ref;
    }

    std::size_t transcript_count(const std::string& event_name) const {
        std::size_t n = 0;
        for (const SwarmEvent& e : engine.transcript()) {
            if (e.event_name == event_name) ++n;
        }
        return n;
    }
};

Transaction counter_tx(std::uint64_t nonce, std::int64_t ts = 0,
                       const std::string& sender = "client") {
    return make_transaction(sender, "counter", Value{{"method", "increment"}}, nonce, ts);
}

Transaction data_tx(std::uint64_t nonce, const std::string& sender = "client") {
    return make_transaction(sender, "", Value::object(), nonce, 0);
}

/// Submits through the client choreography, like the harness does.
void submit_tx(Rig& rig, const Transaction& tx) {
    rig.engine.execute_swarm(kAddTransactionChoreography, kAddTransactionCtor,
                             Value::array({to_value(tx)}), "client");
}

MinerConfig quick_config(std::uint32_t difficulty = 8) {
    MinerConfig c;
    c.difficulty_bits = difficulty;
    return c;
}

}  // namespace

TEST_CASE("join_network records every responder and counts self") {
    Rig rig(3);
    rig.add_miner("M1");
    rig.add_miner("M2");
    Miner& m3 = rig.add_miner("M3");

    JoinResult r = m3.join_network();
    CHECK(r.announced == 3);
    CHECK_FALSE(r.timed_out);

    rig.exec.run_until_quiescent();
    CHECK(m3.snapshot().peers == std::set<AdapterId>{"M1", "M2"});
    // The responders learned the announcer too.
    CHECK(rig.miners.at("M1")->snapshot().peers.count("M3") == 1);
    CHECK(rig.miners.at("M2")->snapshot().peers.count("M3") == 1);
    // One broadcast dispatch event, one announce result per member.
    CHECK(rig.transcript_count("announce_success") == 1);
    CHECK(rig.transcript_count("announce") == 3);
}

TEST_CASE("join_network times out when a member is crashed mid-announce") {
    Rig rig(5);
    rig.add_miner("M1");
    rig.add_miner("M2");
    Miner& m3 = rig.add_miner("M3");
    rig.exec.run_until_quiescent();
    m3.crash();

    Miner& m4 = rig.add_miner("M4");
    JoinResult r = m4.join_network();
    // The crashed member was deregistered before the broadcast, so only
    // three adapters are dispatched to and all of them respond.
    CHECK(r.announced == 3);
    CHECK_FALSE(r.timed_out);

    // Crash one AFTER the snapshot exists: mute only, keep registration.
    Miner& m5 = rig.add_miner("M5");
    rig.engine.set_muted("M2", true);
    JoinResult r5 = m5.join_network();
    CHECK(r5.announced == 4);
    CHECK(r5.timed_out);
    auto peers = m5.snapshot().peers;
    CHECK(peers.count("M1") == 1);
    CHECK(peers.count("M4") == 1);
    CHECK(peers.count("M2") == 0);
}

TEST_CASE("handle_send_transaction classifies pooled, duplicate, invalid") {
    Rig rig;
    MinerConfig cfg = quick_config();
    Miner& m = rig.add_miner("M1", cfg);

    Transaction tx = counter_tx(0);
    CHECK(m.handle_send_transaction(tx) == TxStatus::Pooled);
    CHECK(m.handle_send_transaction(tx) == TxStatus::Duplicate);

    Transaction tampered = tx;
    tampered.nonce = 9;  // txId no longer matches
    CHECK(m.handle_send_transaction(tampered) == TxStatus::Invalid);

    Transaction no_method = make_transaction("client", "counter", Value::object(), 1, 0);
    CHECK(m.handle_send_transaction(no_method) == TxStatus::Invalid);

    Transaction blank_method =
        make_transaction("client", "counter", Value{{"method", ""}}, 2, 0);
    CHECK(m.handle_send_transaction(blank_method) == TxStatus::Invalid);

    CHECK(m.handle_send_transaction(data_tx(3)) == TxStatus::Pooled);
}

TEST_CASE("mining_round mines pooled transactions and applies contracts") {
    Rig rig(11);
    Miner& m = rig.add_miner("M1", quick_config());

    CHECK(m.mining_round_sync().status == MiningOutcome::Status::NoWork);

    CHECK(m.handle_send_transaction(counter_tx(0)) == TxStatus::Pooled);
    // Pooling auto-starts a round; drive it to completion.
    rig.exec.run_until_quiescent();

    MinerSnapshot snap = m.snapshot();
    REQUIRE(snap.chain.size() == 2);
    CHECK(snap.chain[1].miner_id == "M1");
    CHECK(snap.chain[1].transactions.size() == 1);
    CHECK(snap.pending_pool.empty());
    CHECK(snap.awaiting_pool.empty());
    CHECK(snap.contract_states.at("counter") == Value{{"count", 1}});
    CHECK(snap.tx_outcomes.at(snap.chain[1].transactions[0].tx_id) ==
          Value{{"outcome", "success"}});
    CHECK_FALSE(validate_chain(snap.chain, 8).has_value());
    // The fire-and-forget broadcast happened exactly once.
    CHECK(rig.transcript_count("addBlock_success") == 1);
}

TEST_CASE("block cap bounds a round and leftovers mine next round") {
    Rig rig(2);
    MinerConfig cfg = quick_config();
    cfg.block_cap = 2;
    Miner& m = rig.add_miner("M1", cfg);

    for (std::uint64_t n = 0; n < 5; ++n) {
        CHECK(m.handle_send_transaction(counter_tx(n)) == TxStatus::Pooled);
    }
    rig.exec.run_until_quiescent();

    MinerSnapshot snap = m.snapshot();
    // Mining is eager: the first round grabs the lone pooled tx, the
    // later arrivals batch up to the cap.
    REQUIRE(snap.chain.size() == 4);
    CHECK(snap.chain[1].transactions.size() == 1);
    CHECK(snap.chain[2].transactions.size() == 2);
    CHECK(snap.chain[3].transactions.size() == 2);
    for (std::size_t i = 1; i < snap.chain.size(); ++i) {
        CHECK(snap.chain[i].transactions.size() <= cfg.block_cap);
    }
    CHECK(snap.pending_pool.empty());
    CHECK(snap.contract_states.at("counter") == Value{{"count", 5}});
    // FIFO selection: nonces appear in submission order along the chain.
    std::vector<std::uint64_t> order;
    for (std::size_t i = 1; i < snap.chain.size(); ++i) {
        for (const Transaction& tx : snap.chain[i].transactions) order.push_back(tx.nonce);
    }
    CHECK(order == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
}

TEST_CASE("a broadcast block is accepted by peers and re-delivery is stale") {
    Rig rig(7);
    Miner& a = rig.add_miner("A", quick_config());
    Miner& b = rig.add_miner("B", quick_config());
    rig.exec.run_until_quiescent();

    submit_tx(rig, counter_tx(0));
    rig.exec.run_until_quiescent();

    MinerSnapshot sa = a.snapshot();
    MinerSnapshot sb = b.snapshot();
    REQUIRE(sa.chain.size() == 2);
    REQUIRE(sb.chain.size() == 2);
    CHECK(sa.chain == sb.chain);
    CHECK(sa.contract_states == sb.contract_states);
    CHECK(sa.pending_pool.empty());
    CHECK(sb.pending_pool.empty());

    // Re-delivering the tip block is stale on both sides and mutates nothing.
    Block tip = sa.chain.back();
    CHECK(a.handle_add_block(tip) == BlockStatus::Stale);
    CHECK(b.handle_add_block(tip) == BlockStatus::Stale);
    CHECK(a.snapshot().chain == sa.chain);
}

TEST_CASE("an invalid block at the right height is rejected without side effects") {
    Rig rig;
    Miner& m = rig.add_miner("M1", quick_config());
    Block bad = genesis_block();
    bad.index = 1;
    bad.prev_hash = genesis_block().block_hash;
    bad.miner_id = "ghost";
    bad.difficulty = 8;
    bad.transactions = {counter_tx(0)};
    bad.timestamp = 1;
    bad.nonce = 0;
    bad.block_hash = hash_block(bad);  // almost surely misses difficulty 8

    if (meets_difficulty(bad.block_hash, 8)) return;  // astronomically unlikely
    CHECK(m.handle_add_block(bad) == BlockStatus::Invalid);
    CHECK(m.snapshot().chain.size() == 1);
}

TEST_CASE("mid-mining arrival of a competing block cancels and re-mines") {
    Rig rig(13);
    MinerConfig cfg = quick_config();
    cfg.mining_chunk = 1;  // one nonce per task: plenty of room to interrupt
    Miner& m = rig.add_miner("M1", cfg);

    Transaction mine_me = counter_tx(0);
    CHECK(m.handle_send_transaction(mine_me) == TxStatus::Pooled);
    // Let a few mining chunks run, then land a foreign block mid-round.
    for (int i = 0; i < 5; ++i) rig.exec.run_one();

    Transaction other = counter_tx(7, 0, "elsewhere");
    Block foreign = *mine_block(genesis_block(), {other}, 8, "ghost", 0);
    BlockStatus status = BlockStatus::Invalid;
    rig.exec.post("M1", [&] { status = m.handle_add_block(foreign); });
    rig.exec.run_until_quiescent();

    CHECK(status == BlockStatus::Accepted);
    MinerSnapshot snap = m.snapshot();
    // The foreign block landed AND the interrupted tx was re-mined on top.
    REQUIRE(snap.chain.size() == 3);
    CHECK(snap.chain[1] == foreign);
    REQUIRE(snap.chain[2].transactions.size() == 1);
    CHECK(snap.chain[2].transactions[0] == mine_me);
    CHECK(snap.pending_pool.empty());
    CHECK(snap.awaiting_pool.empty());
    CHECK(snap.contract_states.at("counter") == Value{{"count", 2}});
    CHECK_FALSE(validate_chain(snap.chain, 8).has_value());
}

TEST_CASE("equal-height competing tips resolve via update to the lower hash") {
    Rig rig(17);
    Miner& a = rig.add_miner("A", quick_config());
    Miner& b = rig.add_miner("B", quick_config());
    rig.exec.run_until_quiescent();
    a.join_network();
    rig.exec.run_until_quiescent();

    // Carve out a fork: each miner mines its own block without the other
    // hearing about it.
    rig.engine.set_muted("B", true);
    CHECK(a.handle_send_transaction(counter_tx(0, 0, "ca")) == TxStatus::Pooled);
    rig.exec.run_until_quiescent();
    rig.engine.set_muted("B", false);
    rig.engine.set_muted("A", true);
    CHECK(b.handle_send_transaction(counter_tx(0, 0, "cb")) == TxStatus::Pooled);
    rig.exec.run_until_quiescent();
    rig.engine.set_muted("A", false);

    Block tip_a = a.snapshot().chain.back();
    Block tip_b = b.snapshot().chain.back();
    REQUIRE(tip_a.index == 1);
    REQUIRE(tip_b.index == 1);
    REQUIRE(tip_a.block_hash != tip_b.block_hash);

    // Cross-deliver the competing tips: both sides report unsynced and
    // pull the other's chain; fork resolution leaves one winner.
    BlockStatus at_a = BlockStatus::Invalid;
    BlockStatus at_b = BlockStatus::Invalid;
    rig.exec.post("A", [&] { at_a = a.handle_add_block(tip_b); });
    rig.exec.post("B", [&] { at_b = b.handle_add_block(tip_a); });
    rig.exec.run_until_quiescent();

    CHECK(at_a == BlockStatus::Unsynced);
    CHECK(at_b == BlockStatus::Unsynced);
    const std::string winner = std::min(tip_a.block_hash, tip_b.block_hash);
    CHECK(a.snapshot().chain.back().block_hash == winner);
    CHECK(b.snapshot().chain.back().block_hash == winner);
    CHECK(a.snapshot().chain == b.snapshot().chain);
}

TEST_CASE("a gap block triggers an update that adopts the longer chain") {
    Rig rig(19);
    Miner& a = rig.add_miner("A", quick_config());
    Miner& b = rig.add_miner("B", quick_config());
    rig.exec.run_until_quiescent();
    a.join_network();
    rig.exec.run_until_quiescent();

    // A mines two blocks while B is deaf.
    rig.engine.set_muted("B", true);
    CHECK(a.handle_send_transaction(counter_tx(0)) == TxStatus::Pooled);
    rig.exec.run_until_quiescent();
    CHECK(a.handle_send_transaction(counter_tx(1)) == TxStatus::Pooled);
    rig.exec.run_until_quiescent();
    rig.engine.set_muted("B", false);
    REQUIRE(a.snapshot().chain.size() == 3);
    REQUIRE(b.snapshot().chain.size() == 1);

    // B hears only the SECOND block: index 2 against tip 0 is a gap.
    Block second = a.snapshot().chain[2];
    BlockStatus at_b = BlockStatus::Invalid;
    rig.exec.post("B", [&] { at_b = b.handle_add_block(second); });
    rig.exec.run_until_quiescent();

    CHECK(at_b == BlockStatus::Unsynced);
    CHECK(b.snapshot().chain == a.snapshot().chain);
    CHECK(b.snapshot().contract_states == a.snapshot().contract_states);
}

TEST_CASE("update timeout leaves the requester unchanged") {
    Rig rig(23);
    Miner& a = rig.add_miner("A", quick_config());
    rig.add_miner("B", quick_config());
    rig.exec.run_until_quiescent();
    a.join_network();
    rig.exec.run_until_quiescent();

    Chain before = a.snapshot().chain;
    rig.engine.set_muted("B", true);  // still registered: dispatch succeeds, reply never comes
    std::int64_t t0 = rig.exec.now_ms();
    UpdateStatus status = a.request_update_sync("B");
    CHECK(status == UpdateStatus::Timeout);
    CHECK(rig.exec.now_ms() - t0 >= a.config().update_wait_ms);
    CHECK(a.snapshot().chain == before);

    // No candidates at all resolves immediately.
    Rig lone(1);
    Miner& solo = lone.add_miner("S", quick_config());
    CHECK(solo.request_update_sync("") == UpdateStatus::Timeout);
}

TEST_CASE("update against an equal chain is rejected and mutates nothing") {
    Rig rig(29);
    Miner& a = rig.add_miner("A", quick_config());
    rig.add_miner("B", quick_config());
    rig.exec.run_until_quiescent();
    a.join_network();
    rig.exec.run_until_quiescent();

    CHECK(a.request_update_sync("B") == UpdateStatus::Rejected);
    CHECK(a.snapshot().chain.size() == 1);
    CHECK(rig.transcript_count("update_success") == 1);
}

TEST_CASE("update transfers pool contents alongside a longer chain") {
    Rig rig(31);
    Miner& a = rig.add_miner("A", quick_config());
    // B crawls through nonces one per task, so its second round is still
    // in flight (tx1 sitting in awaitingPool) when the update is served.
    MinerConfig slow = quick_config();
    slow.mining_chunk = 1;
    Miner& b = rig.add_miner("B", slow);
    rig.exec.run_until_quiescent();
    a.join_network();
    rig.exec.run_until_quiescent();

    // B mines one block and then starts on one more tx, all unheard by A.
    rig.engine.set_muted("A", true);
    CHECK(b.handle_send_transaction(counter_tx(0)) == TxStatus::Pooled);
    rig.exec.run_until_quiescent();

    // Pick a second tx whose nonce search takes at least 16 steps, so the
    // round is guaranteed to still be in flight (tx in awaitingPool) when
    // B's lane reaches the FIFO-queued update request.
    Chain bc = b.handle_update("A").chain;
    Transaction tx1;
    for (int k = 0;; ++k) {
        tx1 = counter_tx(1, 0, "cb" + std::to_string(k));
        Block draft;
        draft.index = bc.back().index + 1;
        draft.prev_hash = bc.back().block_hash;
        draft.timestamp = rig.exec.now_ms();
        draft.miner_id = "B";
        draft.difficulty = 8;
        draft.transactions = {tx1};
        if (!scan_nonces(draft, 0, 16).has_value()) break;
    }
    CHECK(b.handle_send_transaction(tx1) == TxStatus::Pooled);
    rig.engine.set_muted("A", false);

    CHECK(a.request_update_sync("B") == UpdateStatus::Applied);
    // Silence B before it can ever finish or broadcast its round: from
    // here on, the update payload was the only possible carrier of tx1.
    b.crash();
    rig.exec.run_until_quiescent();

    MinerSnapshot sa = a.snapshot();
    REQUIRE(sa.chain.size() == 3);
    CHECK(sa.chain[1].miner_id == "B");
    REQUIRE(sa.chain[2].transactions.size() == 1);
    CHECK(sa.chain[2].transactions[0] == tx1);  // crossed over via awaitingPool
    CHECK(sa.contract_states.at("counter") == Value{{"count", 2}});
    CHECK(sa.pending_pool.empty());
    CHECK(sa.awaiting_pool.empty());

    MinerSnapshot sb = b.snapshot();
    CHECK(sb.crashed);
    CHECK(sb.chain.size() == 2);
    // The cancelled round put tx1 back into B's pending pool.
    REQUIRE(sb.pending_pool.size() == 1);
    CHECK(sb.pending_pool[0] == tx1);
}

TEST_CASE("handle_update snapshots state and learns the requester") {
    Rig rig;
    Miner& m = rig.add_miner("M1", quick_config());
    CHECK(m.handle_send_transaction(data_tx(0)) == TxStatus::Pooled);

    UpdatePayload up = m.handle_update("newcomer");
    CHECK(up.chain.size() == 1);
    CHECK(up.pending_pool.size() + up.awaiting_pool.size() == 1);
    CHECK(m.snapshot().peers.count("newcomer") == 1);

    // Round-trips through the wire form.
    Value wire = to_value(up);
    UpdatePayload back = update_payload_from_value(wire);
    CHECK(back.chain == up.chain);
    CHECK(back.pending_pool == up.pending_pool);
    CHECK(back.awaiting_pool == up.awaiting_pool);
}

TEST_CASE("a longer announce chain is adopted by responders") {
    Rig rig(37);
    Miner& a = rig.add_miner("A", quick_config());
    Miner& b = rig.add_miner("B", quick_config());
    rig.exec.run_until_quiescent();

    rig.engine.set_muted("B", true);
    CHECK(a.handle_send_transaction(counter_tx(0)) == TxStatus::Pooled);
    rig.exec.run_until_quiescent();
    rig.engine.set_muted("B", false);
    REQUIRE(a.snapshot().chain.size() == 2);
    REQUIRE(b.snapshot().chain.size() == 1);

    // A re-announces; its attached chain is longer, so B adopts it.
    a.join_network();
    rig.exec.run_until_quiescent();
    CHECK(b.snapshot().chain == a.snapshot().chain);
    CHECK(b.snapshot().contract_states.at("counter") == Value{{"count", 1}});
}

TEST_CASE("replay_contract_states equals incremental states and rejects bad chains") {
    Rig rig(41);
    MinerConfig cfg = quick_config();
    cfg.block_cap = 2;
    Miner& m = rig.add_miner("M1", cfg);
    for (std::uint64_t n = 0; n < 5; ++n) {
        CHECK(m.handle_send_transaction(counter_tx(n)) == TxStatus::Pooled);
    }
    rig.exec.run_until_quiescent();

    MinerSnapshot snap = m.snapshot();
    CHECK(m.replay_contract_states(snap.chain) == snap.contract_states);

    Chain corrupt = snap.chain;
    corrupt[2].nonce += 1;
    CHECK_THROWS_AS(m.replay_contract_states(corrupt), InvalidChain);
}

TEST_CASE("verify_replay mode checks every applied block") {
    Rig rig(43);
    MinerConfig cfg = quick_config();
    cfg.verify_replay = true;
    Miner& m = rig.add_miner("M1", cfg);
    for (std::uint64_t n = 0; n < 3; ++n) {
        CHECK(m.handle_send_transaction(counter_tx(n)) == TxStatus::Pooled);
    }
    rig.exec.run_until_quiescent();
    CHECK(m.snapshot().chain.size() >= 2);
    CHECK(m.snapshot().contract_states.at("counter") == Value{{"count", 3}});
}

TEST_CASE("successful contract runs can spawn internal transactions") {
    Rig rig(47);
    // A contract whose "spawn" method requests one counter increment.
    std::map<std::string, ContractMethod> methods;
    methods["spawn"] = [](const Value& state, const Value&, const Value&, CostMeter&) {
        ContractMethodReply reply;
        reply.new_state = Value{{"spawned", true}};
        reply.internal_txs = Value::array(
            {Value{{"contract", "counter"}, {"params", Value{{"method", "increment"}}}}});
        (void)state;
        return reply;
    };
    rig.contracts.register_contract(make_contract("spawner", std::move(methods)));

    Miner& m = rig.add_miner("M1", quick_config());
    Transaction parent =
        make_transaction("client", "spawner", Value{{"method", "spawn"}}, 0, 99);
    CHECK(m.handle_send_transaction(parent) == TxStatus::Pooled);
    rig.exec.run_until_quiescent();

    MinerSnapshot snap = m.snapshot();
    // Parent mined first, the spawned child injected and mined next.
    REQUIRE(snap.chain.size() == 3);
    REQUIRE(snap.chain[2].transactions.size() == 1);
    const Transaction& child = snap.chain[2].transactions[0];
    CHECK(child.sender == "spawner#" + parent.tx_id);
    CHECK(child.contract == "counter");
    CHECK(child.nonce == 0);
    CHECK(child.timestamp == parent.timestamp);
    CHECK(snap.contract_states.at("spawner") == Value{{"spawned", true}});
    CHECK(snap.contract_states.at("counter") == Value{{"count", 1}});
    CHECK(snap.tx_outcomes.at(child.tx_id) == Value{{"outcome", "success"}});
    // Replay reproduces both states from the chain alone.
    CHECK(m.replay_contract_states(snap.chain) == snap.contract_states);
}

TEST_CASE("failed contract outcomes are recorded and do not change state") {
    Rig rig(53);
    Miner& m = rig.add_miner("M1", quick_config());

    Transaction unknown =
        make_transaction("client", "nowhere", Value{{"method", "x"}}, 0, 0);
    CHECK(m.handle_send_transaction(unknown) == TxStatus::Pooled);
    rig.exec.run_until_quiescent();

    MinerSnapshot snap = m.snapshot();
    REQUIRE(snap.chain.size() == 2);
    CHECK(snap.contract_states.count("nowhere") == 0);
    CHECK(snap.tx_outcomes.at(unknown.tx_id)["outcome"] == Value("error"));
}

TEST_CASE("three joined miners converge on one chain for a tx stream") {
    Rig rig(61);
    rig.add_miner("A", quick_config());
    rig.add_miner("B", quick_config());
    rig.add_miner("C", quick_config());
    for (const char* id : {"A", "B", "C"}) {
        rig.miners.at(id)->join_network();
        rig.exec.run_until_quiescent();
    }

    for (std::uint64_t n = 0; n < 5; ++n) submit_tx(rig, counter_tx(n));
    rig.exec.run_until_quiescent();

    MinerSnapshot sa = rig.miners.at("A")->snapshot();
    for (const char* id : {"B", "C"}) {
        MinerSnapshot s = rig.miners.at(id)->snapshot();
        CHECK(s.chain == sa.chain);
        CHECK(s.contract_states == sa.contract_states);
        CHECK(s.pending_pool.empty());
        CHECK(s.awaiting_pool.empty());
    }
    CHECK(sa.contract_states.at("counter") == Value{{"count", 5}});
    CHECK_FALSE(validate_chain(sa.chain, 8).has_value());
    // Every submitted tx landed exactly once.
    std::map<std::string, int> seen;
    for (const Block& b : sa.chain) {
        for (const Transaction& tx : b.transactions) seen[tx.tx_id] += 1;
    }
    CHECK(seen.size() == 5);
    for (const auto& [id, count] : seen) CHECK(count == 1);
    // Peers never include self.
    for (const char* id : {"A", "B", "C"}) {
        CHECK(rig.miners.at(id)->snapshot().peers.count(id) == 0);
    }
}

TEST_CASE("crashed miners go silent but stay inspectable") {
    Rig rig(67);
    Miner& a = rig.add_miner("A", quick_config());
    Miner& b = rig.add_miner("B", quick_config());
    rig.exec.run_until_quiescent();
    a.join_network();
    rig.exec.run_until_quiescent();

    b.crash();
    CHECK(b.crashed());
    submit_tx(rig, counter_tx(0));
    rig.exec.run_until_quiescent();

    CHECK(a.snapshot().chain.size() == 2);
    MinerSnapshot sb = b.snapshot();
    CHECK(sb.crashed);
    CHECK(sb.chain.size() == 1);  // heard nothing after the crash

    // Joining from the grave fails fast.
    JoinResult r = b.join_network();
    CHECK(r.timed_out);
    CHECK(r.announced == 0);
}

TEST_CASE("late joiner catches up via join plus one update round") {
    Rig rig(71);
    Miner& a = rig.add_miner("A", quick_config());
    Miner& b = rig.add_miner("B", quick_config());
    rig.exec.run_until_quiescent();
    a.join_network();
    rig.exec.run_until_quiescent();

    for (std::uint64_t n = 0; n < 3; ++n) submit_tx(rig, counter_tx(n));
    rig.exec.run_until_quiescent();
    REQUIRE(a.snapshot().chain == b.snapshot().chain);
    std::size_t established = a.snapshot().chain.size();
    REQUIRE(established >= 2);

    Miner& late = rig.add_miner("L", quick_config());
    rig.exec.post("L", [&] { late.begin_join_and_sync(); });
    rig.exec.run_until_quiescent();

    MinerSnapshot sl = late.snapshot();
    CHECK(sl.chain == a.snapshot().chain);
    CHECK(sl.contract_states == a.snapshot().contract_states);
    CHECK(sl.peers == std::set<AdapterId>{"A", "B"});
}
