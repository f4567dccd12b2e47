#pragma once

/**
 * Ledger primitives: transactions, blocks, proof-of-work mining, block and
 * chain validation, and the fork-resolution rule.
 *
 * All hashing goes through the canonical encoding (value.hpp) and SHA-256.
 * Difficulty is counted in leading zero bits of the block hash. The genesis
 * block is a fixed constant shared by every node without coordination.
 */

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "swarmchain/value.hpp"

namespace swarmchain {

struct Transaction {
    std::string tx_id;       // hex digest, derived from the other fields
    std::string sender;      // client or miner id
    std::string contract;    // target contract address; empty = plain data tx
    Value params;            // must carry a "method" string when contract set
    std::uint64_t nonce = 0; // per-sender counter
    std::int64_t timestamp = 0;

    bool operator==(const Transaction&) const = default;
};

struct Block {
    std::uint64_t index = 0;
    std::string prev_hash;   // 64 hex chars
    std::int64_t timestamp = 0;
    std::string miner_id;
    std::uint32_t difficulty = 0; // required leading zero bits
    std::uint64_t nonce = 0;
    std::vector<Transaction> transactions;
    std::string block_hash;

    bool operator==(const Block&) const = default;
};

using Chain = std::vector<Block>;

enum class ValidationError {
    BadIndex,
    BadPrevHash,
    BadPow,       // hash mismatch or difficulty not met
    BadTxId,
    DuplicateTx,
    BadCount,     // tx count outside 1..=block_cap
    BadGenesis,
    BadDifficulty,
};

std::string to_string(ValidationError e);

struct ChainFault {
    ValidationError error;
    std::uint64_t index; // block index at which validation failed
};

/// Raised on malformed mining inputs (empty tx list, too many txs).
class MiningError : public std::runtime_error {
public:
    explicit MiningError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr std::uint32_t kDefaultDifficultyBits = 8;
inline constexpr std::size_t kDefaultBlockCap = 4;
inline constexpr std::uint64_t kDefaultNonceChunk = 1024;

/// The fixed genesis block: index 0, all-zero prev hash, timestamp 0,
/// miner "genesis", difficulty 0, nonce 0, no transactions.
const Block& genesis_block();

/// Digest of {sender, contract, params, nonce, timestamp}; ignores tx_id.
std::string tx_id(const Transaction& tx);

/// Convenience: fills tx_id from the other fields.
Transaction make_transaction(std::string sender, std::string contract, Value params,
                             std::uint64_t nonce, std::int64_t timestamp);

/// Digest of {index, prevHash, timestamp, minerId, difficulty, nonce,
/// txIds-in-order}; ignores block_hash.
std::string hash_block(const Block& b);

/// True iff the hash's leading `difficulty` bits are zero.
bool meets_difficulty(std::string_view hex_hash, std::uint32_t difficulty);

/// Scans nonces [from, from+count) against the draft `b` (nonce field
/// ignored); returns the first satisfying nonce, or nullopt.
std::optional<std::uint64_t> scan_nonces(const Block& b, std::uint64_t from, std::uint64_t count);

/// Mines a block on top of `prev` with the smallest satisfying nonce,
/// searching ascending from 0. `cancel` is consulted every `chunk` nonces;
/// returns nullopt if cancelled. Throws MiningError on a bad tx list.
std::optional<Block> mine_block(const Block& prev, std::vector<Transaction> txs,
                                std::uint32_t difficulty, const std::string& miner_id,
                                std::int64_t timestamp, std::size_t block_cap = kDefaultBlockCap,
                                const std::function<bool()>& cancel = {},
                                std::uint64_t chunk = kDefaultNonceChunk);

/// Structural check of `block` as the successor of `prev`.
std::optional<ValidationError> validate_block(const Block& block, const Block& prev,
                                              std::uint32_t expected_difficulty,
                                              std::size_t block_cap = kDefaultBlockCap);

/// Whole-chain check: genesis constant, pairwise block validity, and no
/// tx id repeated anywhere. Reports the first failing block index.
std::optional<ChainFault> validate_chain(const Chain& chain, std::uint32_t difficulty,
                                         std::size_t block_cap = kDefaultBlockCap);

enum class ForkChoice { KeepLocal, AdoptRemote };

/// Longest-chain rule with a lowest-tip-hash tie-break; an invalid remote is
/// always rejected. Pure decision, mutates nothing.
ForkChoice resolve_fork(const Chain& local, const Chain& remote, std::uint32_t difficulty,
                        std::size_t block_cap = kDefaultBlockCap);

// Value conversions (canonical field names are the wire/file format).
Value to_value(const Transaction& tx);
Value to_value(const Block& b);
Value to_value(const Chain& c);
Transaction transaction_from_value(const Value& v);
Block block_from_value(const Value& v);
Chain chain_from_value(const Value& v);

}  // namespace swarmchain
