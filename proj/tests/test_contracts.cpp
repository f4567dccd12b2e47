#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "swarmchain/contracts.hpp"

using namespace swarmchain;

namespace {

struct Rig {
    DeterministicExecutor exec;
    Bus bus;
    ChoreographyEngine engine;
    ContractRegistry contracts;

    explicit Rig(std::uint64_t seed = 0)
        : exec(seed), bus(exec), engine(exec, bus), contracts(engine) {}
};

ContractInvocation counter_call(const std::string& method, Value state,
                                Value chain = to_value(Chain{genesis_block()})) {
    ContractInvocation inv;
    inv.transaction =
        make_transaction("client1", "counter", Value{{"method", method}}, 0, 0);
    inv.state = std::move(state);
    inv.chain_view = std::move(chain);
    return inv;
}

Descriptor busy_contract(std::int64_t cost_ms) {
    std::map<std::string, ContractMethod> methods;
    methods["spin"] = [cost_ms](const Value& state, const Value&, const Value&, CostMeter& cost) {
        cost.consume(cost_ms);
        ContractMethodReply reply;
        reply.new_state = state.is_null() ? Value{{"spun", 1}} : state;
        return reply;
    };
    return make_contract("busy", std::move(methods));
}

}  // namespace

TEST_CASE("registration validates the contract shape") {
    Rig rig;
    rig.contracts.register_contract(sample_counter_contract());
    CHECK(rig.contracts.has_contract("counter"));
    CHECK(rig.contracts.addresses() == std::vector<std::string>{"counter"});

    CHECK_THROWS_AS(rig.contracts.register_contract(sample_counter_contract()),
                    DuplicateContract);

    Descriptor missing_chain = sample_counter_contract();
    missing_chain.meta["name"] = "broken";
    missing_chain.vars.erase("chain");
    CHECK_THROWS_AS(rig.contracts.register_contract(std::move(missing_chain)),
                    MalformedDescriptor);

    Descriptor wrong_group = sample_counter_contract();
    wrong_group.meta["name"] = "broken2";
    wrong_group.phases.at("get").group = "miners";
    CHECK_THROWS_AS(rig.contracts.register_contract(std::move(wrong_group)),
                    MalformedDescriptor);

    Descriptor extra_ctor = sample_counter_contract();
    extra_ctor.meta["name"] = "broken3";
    extra_ctor.ctors["second"] = [](SwarmContext&, const Value&) {};
    CHECK_THROWS_AS(rig.contracts.register_contract(std::move(extra_ctor)),
                    MalformedDescriptor);
}

TEST_CASE("the contract address is the declared meta name") {
    Descriptor d = sample_counter_contract();
    CHECK(d.name() == "counter");
    CHECK(d.vars.size() == 5);
    for (const auto* var : {"state", "method", "params", "chain", "transaction"}) {
        CHECK(d.vars.count(var) == 1);
    }
}

TEST_CASE("counter semantics") {
    Rig rig;
    rig.contracts.register_contract(sample_counter_contract());

    ContractResult r = rig.contracts.invoke("counter", counter_call("increment", Value()),
                                            500, "MinerA");
    REQUIRE(r.outcome == ContractResult::Outcome::Success);
    CHECK(r.new_state == Value{{"count", 1}});

    r = rig.contracts.invoke("counter", counter_call("increment", r.new_state), 500, "MinerA");
    REQUIRE(r.outcome == ContractResult::Outcome::Success);
    CHECK(r.new_state == Value{{"count", 2}});

    r = rig.contracts.invoke("counter", counter_call("get", Value{{"count", 41}}), 500, "MinerA");
    REQUIRE(r.outcome == ContractResult::Outcome::Success);
    CHECK(r.new_state == Value{{"count", 41}});

    r = rig.contracts.invoke("counter", counter_call("get", Value()), 500, "MinerA");
    REQUIRE(r.outcome == ContractResult::Outcome::Success);
    CHECK(r.new_state == Value{{"count", 0}});
}

TEST_CASE("unknown method and unknown address") {
    Rig rig;
    rig.contracts.register_contract(sample_counter_contract());

    ContractResult r = rig.contracts.invoke("counter", counter_call("selfDestruct", Value()),
                                            500, "MinerA");
    CHECK(r.outcome == ContractResult::Outcome::Error);
    CHECK(r.message == "unknown method");

    CHECK_THROWS_AS(rig.contracts.invoke("escrow", counter_call("get", Value()), 500, "MinerA"),
                    UnknownContract);
}

TEST_CASE("a throwing method yields an error outcome") {
    Rig rig;
    std::map<std::string, ContractMethod> methods;
    methods["boom"] = [](const Value&, const Value&, const Value&, CostMeter&)
        -> ContractMethodReply { throw std::runtime_error("kaput"); };
    rig.contracts.register_contract(make_contract("bomb", std::move(methods)));

    ContractInvocation inv;
    inv.transaction = make_transaction("c", "bomb", Value{{"method", "boom"}}, 0, 0);
    inv.chain_view = to_value(Chain{genesis_block()});
    ContractResult r = rig.contracts.invoke("bomb", inv, 500, "MinerA");
    CHECK(r.outcome == ContractResult::Outcome::Error);
    CHECK(r.message == "kaput");
}

TEST_CASE("exceeding the timeout yields timeout and discards state") {
    Rig rig;
    rig.contracts.register_contract(busy_contract(600));
    ContractInvocation inv;
    inv.transaction = make_transaction("c", "busy", Value{{"method", "spin"}}, 0, 0);
    inv.chain_view = to_value(Chain{genesis_block()});

    std::int64_t clock_before = rig.exec.now_ms();
    ContractResult r = rig.contracts.invoke("busy", inv, 500, "MinerA");
    CHECK(r.outcome == ContractResult::Outcome::Timeout);
    CHECK(r.new_state.is_null());
    // Virtual cost never advances the simulation clock.
    CHECK(rig.exec.now_ms() == clock_before);

    r = rig.contracts.invoke("busy", inv, 600, "MinerA");
    CHECK(r.outcome == ContractResult::Outcome::Success);
}

TEST_CASE("invocations are deterministic across executing miners") {
    Rig rig;
    rig.contracts.register_contract(sample_counter_contract());
    auto inv = counter_call("increment", Value{{"count", 7}});
    ContractResult a = rig.contracts.invoke("counter", inv, 500, "MinerA");
    ContractResult b = rig.contracts.invoke("counter", inv, 500, "MinerB");
    CHECK(a.outcome == b.outcome);
    CHECK(a.new_state == b.new_state);
}

TEST_CASE("increment ignores the chain argument") {
    Rig rig;
    rig.contracts.register_contract(sample_counter_contract());
    auto short_chain = rig.contracts.invoke(
        "counter", counter_call("increment", Value{{"count", 1}}), 500, "MinerA");
    Chain longer{genesis_block()};
    longer.push_back(*mine_block(longer.front(), {make_transaction("x", "", Value::object(), 0, 0)},
                                 0, "M", 1, 4, nullptr));
    auto long_chain = rig.contracts.invoke(
        "counter", counter_call("increment", Value{{"count", 1}}, to_value(longer)), 500,
        "MinerA");
    CHECK(short_chain.new_state == long_chain.new_state);
}

TEST_CASE("two contract addresses never share state") {
    Rig rig;
    rig.contracts.register_contract(sample_counter_contract());
    Descriptor other = sample_counter_contract();
    other.meta["name"] = "counter2";
    rig.contracts.register_contract(std::move(other));

    Value s1, s2;
    for (int i = 0; i < 3; ++i) {
        s1 = rig.contracts.invoke("counter", counter_call("increment", s1), 500, "M").new_state;
    }
    ContractInvocation inv2 = counter_call("increment", s2);
    inv2.transaction = make_transaction("client1", "counter2", Value{{"method", "increment"}},
                                        0, 0);
    s2 = rig.contracts.invoke("counter2", inv2, 500, "M").new_state;
    CHECK(s1 == Value{{"count", 3}});
    CHECK(s2 == Value{{"count", 1}});
}

TEST_CASE("internal transactions materialize deterministically") {
    Rig rig;
    std::map<std::string, ContractMethod> methods;
    methods["fanout"] = [](const Value&, const Value&, const Value&, CostMeter&) {
        ContractMethodReply reply;
        reply.new_state = Value{{"done", true}};
        reply.internal_txs = Value::array({
            Value{{"contract", "counter"}, {"params", Value{{"method", "increment"}}}},
            Value{{"contract", "counter"}, {"params", Value{{"method", "increment"}}}},
        });
        return reply;
    };
    rig.contracts.register_contract(make_contract("spawner", std::move(methods)));

    ContractInvocation inv;
    inv.transaction = make_transaction("client1", "spawner", Value{{"method", "fanout"}}, 3, 77);
    inv.chain_view = to_value(Chain{genesis_block()});

    ContractResult r1 = rig.contracts.invoke("spawner", inv, 500, "MinerA");
    ContractResult r2 = rig.contracts.invoke("spawner", inv, 500, "MinerB");
    REQUIRE(r1.outcome == ContractResult::Outcome::Success);
    REQUIRE(r1.internal_txs.size() == 2);
    CHECK(r1.internal_txs[0].sender == "spawner#" + inv.transaction.tx_id);
    CHECK(r1.internal_txs[0].contract == "counter");
    CHECK(r1.internal_txs[0].nonce == 0);
    CHECK(r1.internal_txs[1].nonce == 1);
    CHECK(r1.internal_txs[0].timestamp == 77);
    CHECK(r1.internal_txs[0].tx_id != r1.internal_txs[1].tx_id);
    // Identical on every miner.
    CHECK(r1.internal_txs[0].tx_id == r2.internal_txs[0].tx_id);
    CHECK(r1.internal_txs[1].tx_id == r2.internal_txs[1].tx_id);
}

TEST_CASE("no contract executes without an invoking transaction") {
    Rig rig;
    rig.contracts.register_contract(sample_counter_contract());
    CHECK(rig.contracts.invocation_count() == 0);
    rig.exec.run_until_tick(1000);
    rig.exec.run_until_quiescent();
    CHECK(rig.contracts.invocation_count() == 0);

    rig.contracts.invoke("counter", counter_call("get", Value()), 500, "M");
    CHECK(rig.contracts.invocation_count() == 1);
}
