#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "swarmchain/blockchain.hpp"
#include "swarmchain/choreography.hpp"

namespace swarmchain {

class ContractError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class DuplicateContract : public ContractError {
    using ContractError::ContractError;
};
class MalformedDescriptor : public ContractError {
    using ContractError::ContractError;
};
class UnknownContract : public ContractError {
    using ContractError::ContractError;
};

/// Virtual execution cost of one contract method run. Consumed
/// milliseconds count against the invocation timeout without advancing
/// the simulation clock, so replaying old blocks cannot perturb
/// scheduling.
class CostMeter {
public:
    explicit CostMeter(PhaseContext& ctx) : ctx_(ctx) {}
    void consume(std::int64_t ms) { ctx_.consume(ms); }

private:
    PhaseContext& ctx_;
};

/// What a contract method hands back: the contract's next state plus
/// zero or more internal transaction requests, each an object
/// {"contract": address, "params": {...}}.
struct ContractMethodReply {
    Value new_state;
    Value internal_txs = Value::array();
};

/// A contract method sees exactly the declared contract inputs: its
/// current state, the call params, and a read-only chain view. No
/// miner-local data is reachable, which keeps invocations identical on
/// every executing miner.
using ContractMethod = std::function<ContractMethodReply(
    const Value& state, const Value& params, const Value& chain, CostMeter& cost)>;

struct ContractInvocation {
    Transaction transaction;
    Value state;       // current contract state, null if never invoked
    Value chain_view;  // serialized chain prefix, read-only
};

struct ContractResult {
    enum class Outcome { Success, Error, Timeout };
    Outcome outcome = Outcome::Error;
    Value new_state;                        // Success only
    std::vector<Transaction> internal_txs;  // Success only, materialized
    std::string message;                    // Error only
};

/// Builds a contract choreography: meta.name is the contract address,
/// vars are exactly {state, method, params, chain, transaction}, one
/// ctor dispatches the phase named transaction.params.method, and every
/// method is a phase bound to "All" (it runs on the invoking miner).
Descriptor make_contract(const std::string& address,
                         std::map<std::string, ContractMethod> methods);

/// The reference counter contract: `increment` maps null to {count:1}
/// and otherwise adds one; `get` returns the state unchanged, null
/// becoming {count:0}. Ignores the chain.
Descriptor sample_counter_contract();

/// Derives the child transactions a successful invocation requested.
/// Every field is a pure function of (address, parent, specs), so all
/// miners applying the same block materialize identical children:
/// sender = address + "#" + parent txId, nonce = child index,
/// timestamp = parent timestamp.
std::vector<Transaction> materialize_internal_txs(const std::string& address,
                                                  const Transaction& parent, const Value& specs);

/// Contract store over one choreography engine. Contracts execute only
/// through invoke, i.e. only in response to a transaction; the
/// invocation counter lets tests assert that nothing ran idle.
class ContractRegistry {
public:
    explicit ContractRegistry(ChoreographyEngine& engine);

    void register_contract(Descriptor descriptor);
    bool has_contract(const std::string& address) const;
    std::vector<std::string> addresses() const;

    ContractResult invoke(const std::string& address, const ContractInvocation& inv,
                          std::int64_t timeout_ms, const AdapterId& executing_miner);

    std::uint64_t invocation_count() const { return invocations_; }

private:
    ChoreographyEngine& engine_;
    std::set<std::string> addresses_;
    std::uint64_t invocations_ = 0;
};

}  // namespace swarmchain
