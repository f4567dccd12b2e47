#include "swarmchain/contracts.hpp"

#include <utility>

namespace swarmchain {

namespace {

constexpr const char* kCtorName = "ctor";
const std::set<std::string> kContractVars = {"state", "method", "params", "chain", "transaction"};

/// Wire envelope a wrapped method hands to the engine; "ok" separates
/// it from the engine's {"error": ...} result for throwing handlers.
Value pack_reply(ContractMethodReply reply) {
    return Value{
        {"ok", true},
        {"state", std::move(reply.new_state)},
        {"internalTxs", std::move(reply.internal_txs)},
    };
}

void validate_contract_shape(const Descriptor& descriptor) {
    if (descriptor.name().empty()) {
        throw MalformedDescriptor("contract descriptor requires meta.name (the address)");
    }
    std::set<std::string> vars;
    for (const auto& [name, def] : descriptor.vars) {
        (void)def;
        vars.insert(name);
    }
    if (vars != kContractVars) {
        throw MalformedDescriptor("contract vars must be exactly "
                                  "{state, method, params, chain, transaction}: " +
                                  descriptor.name());
    }
    if (descriptor.ctors.size() != 1 || descriptor.ctors.begin()->first != kCtorName) {
        throw MalformedDescriptor("contract requires exactly one ctor named '" +
                                  std::string(kCtorName) + "': " + descriptor.name());
    }
    for (const auto& [phase, decl] : descriptor.phases) {
        if (decl.group != kGroupAll) {
            throw MalformedDescriptor("contract phase '" + phase + "' must be bound to \"" +
                                      std::string(kGroupAll) + "\"");
        }
    }
}

}  // namespace

Descriptor make_contract(const std::string& address,
                         std::map<std::string, ContractMethod> methods) {
    Descriptor d;
    d.meta = Value{{"name", address}};
    for (const auto* var : {"state", "method", "params", "chain", "transaction"}) {
        d.vars[var] = Value(nullptr);
    }
    d.ctors[kCtorName] = [](SwarmContext& ctx, const Value& args) {
        const Value& transaction = args.at(0);
        Value params = transaction.is_object() ? transaction.value("params", Value::object())
                                               : Value::object();
        const std::string method =
            params.is_object() ? params.value("method", std::string()) : std::string();
        ctx.vars()["transaction"] = transaction;
        ctx.vars()["state"] = args.at(1);
        ctx.vars()["chain"] = args.at(2);
        ctx.vars()["params"] = std::move(params);
        ctx.vars()["method"] = method;
        ctx.dispatch_broadcast(method);
    };
    for (auto& [name, method] : methods) {
        d.phases[name] = PhaseDecl{
            kGroupAll,
            [method = std::move(method)](PhaseContext& ctx) {
                CostMeter cost(ctx);
                return pack_reply(method(ctx.vars.at("state"), ctx.vars.at("params"),
                                         ctx.vars.at("chain"), cost));
            },
            nullptr,
        };
    }
    return d;
}

Descriptor sample_counter_contract() {
    std::map<std::string, ContractMethod> methods;
    methods["increment"] = [](const Value& state, const Value&, const Value&, CostMeter&) {
        ContractMethodReply reply;
        if (state.is_null()) {
            reply.new_state = Value{{"count", 1}};
        } else {
            reply.new_state = state;
            reply.new_state["count"] = state.at("count").get<std::int64_t>() + 1;
        }
        return reply;
    };
    methods["get"] = [](const Value& state, const Value&, const Value&, CostMeter&) {
        ContractMethodReply reply;
        reply.new_state = state.is_null() ? Value{{"count", 0}} : state;
        return reply;
    };
    return make_contract("counter", std::move(methods));
}

std::vector<Transaction> materialize_internal_txs(const std::string& address,
                                                  const Transaction& parent, const Value& specs) {
    std::vector<Transaction> children;
    if (!specs.is_array()) return children;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const Value& spec = specs[i];
        if (!spec.is_object()) continue;
        children.push_back(make_transaction(address + "#" + parent.tx_id,
                                            spec.value("contract", std::string()),
                                            spec.value("params", Value::object()), i,
                                            parent.timestamp));
    }
    return children;
}

ContractRegistry::ContractRegistry(ChoreographyEngine& engine) : engine_(engine) {}

void ContractRegistry::register_contract(Descriptor descriptor) {
    validate_contract_shape(descriptor);
    const std::string address = descriptor.name();
    if (addresses_.count(address)) {
        throw DuplicateContract("contract already registered: " + address);
    }
    engine_.register_choreography(std::move(descriptor));
    addresses_.insert(address);
}

bool ContractRegistry::has_contract(const std::string& address) const {
    return addresses_.count(address) != 0;
}

std::vector<std::string> ContractRegistry::addresses() const {
    return std::vector<std::string>(addresses_.begin(), addresses_.end());
}

ContractResult ContractRegistry::invoke(const std::string& address, const ContractInvocation& inv,
                                        std::int64_t timeout_ms,
                                        const AdapterId& executing_miner) {
    if (!addresses_.count(address)) {
        throw UnknownContract("unknown contract address: " + address);
    }
    ++invocations_;

    ContractResult result;
    Value reply;
    std::int64_t consumed = 0;
    try {
        Value args = Value::array({to_value(inv.transaction), inv.state, inv.chain_view});
        SwarmHandle handle = engine_.execute_swarm(address, kCtorName, std::move(args),
                                                   executing_miner);
        // "All" phases run inline, so the swarm is already quiescent.
        consumed = handle.consumed_ms();
        auto results = handle.results();
        auto it = results.find(executing_miner);
        if (it != results.end()) reply = it->second;
    } catch (const UnknownPhase&) {
        result.outcome = ContractResult::Outcome::Error;
        result.message = "unknown method";
        return result;
    }

    if (consumed > timeout_ms) {
        result.outcome = ContractResult::Outcome::Timeout;
        return result;
    }
    if (reply.is_object() && reply.value("ok", false)) {
        result.outcome = ContractResult::Outcome::Success;
        result.new_state = reply.value("state", Value());
        result.internal_txs =
            materialize_internal_txs(address, inv.transaction, reply.value("internalTxs", Value()));
        return result;
    }
    result.outcome = ContractResult::Outcome::Error;
    result.message = reply.is_object() ? reply.value("error", std::string("malformed reply"))
                                       : "malformed reply";
    return result;
}

}  // namespace swarmchain
