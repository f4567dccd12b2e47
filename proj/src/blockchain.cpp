#include "swarmchain/blockchain.hpp"

#include <algorithm>
#include <unordered_set>

#include "swarmchain/sha256.hpp"

namespace swarmchain {

namespace {

constexpr std::string_view kZeroHash = "0000000000000000000000000000000000000000000000000000000000000000";

bool is_hex64(std::string_view s) {
    if (s.size() != 64) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    });
}

Value block_header_value(const Block& b) {
    Value tx_ids = Value::array();
    for (const auto& tx : b.transactions) {
        tx_ids.push_back(tx.tx_id);
    }
    return Value{
        {"index", b.index},
        {"prevHash", b.prev_hash},
        {"timestamp", b.timestamp},
        {"minerId", b.miner_id},
        {"difficulty", b.difficulty},
        {"nonce", b.nonce},
        {"txIds", std::move(tx_ids)},
    };
}

}  // namespace

std::string to_string(ValidationError e) {
    switch (e) {
        case ValidationError::BadIndex: return "BadIndex";
        case ValidationError::BadPrevHash: return "BadPrevHash";
        case ValidationError::BadPow: return "BadPow";
        case ValidationError::BadTxId: return "BadTxId";
        case ValidationError::DuplicateTx: return "DuplicateTx";
        case ValidationError::BadCount: return "BadCount";
        case ValidationError::BadGenesis: return "BadGenesis";
        case ValidationError::BadDifficulty: return "BadDifficulty";
    }
    return "Unknown";
}

const Block& genesis_block() {
    static const Block genesis = [] {
        Block b;
        b.index = 0;
        b.prev_hash = std::string(kZeroHash);
        b.timestamp = 0;
        b.miner_id = "genesis";
        b.difficulty = 0;
        b.nonce = 0;
        b.block_hash = hash_block(b);
        return b;
    }();
    return genesis;
}

std::string tx_id(const Transaction& tx) {
    return canonical_digest(Value{
        {"sender", tx.sender},
        {"contract", tx.contract},
        {"params", tx.params},
        {"nonce", tx.nonce},
        {"timestamp", tx.timestamp},
    });
}

Transaction make_transaction(std::string sender, std::string contract, Value params,
                             std::uint64_t nonce, std::int64_t timestamp) {
    Transaction tx;
    tx.sender = std::move(sender);
    tx.contract = std::move(contract);
    tx.params = std::move(params);
    tx.nonce = nonce;
    tx.timestamp = timestamp;
    tx.tx_id = tx_id(tx);
    return tx;
}

std::string hash_block(const Block& b) {
    return canonical_digest(block_header_value(b));
}

bool meets_difficulty(std::string_view hex_hash, std::uint32_t difficulty) {
    std::uint32_t zeros = 0;
    for (char c : hex_hash) {
        if (zeros >= difficulty) return true;
        int nibble;
        if (c >= '0' && c <= '9') nibble = c - '0';
        else if (c >= 'a' && c <= 'f') nibble = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') nibble = c - 'A' + 10;
        else return false;
        for (int bit = 3; bit >= 0; --bit) {
            if (nibble & (1 << bit)) return zeros >= difficulty;
            if (++zeros >= difficulty) return true;
        }
    }
    return zeros >= difficulty;
}

std::optional<std::uint64_t> scan_nonces(const Block& b, std::uint64_t from, std::uint64_t count) {
    Block draft = b;
    for (std::uint64_t n = from; n < from + count; ++n) {
        draft.nonce = n;
        if (meets_difficulty(hash_block(draft), b.difficulty)) {
            return n;
        }
    }
    return std::nullopt;
}

std::optional<Block> mine_block(const Block& prev, std::vector<Transaction> txs,
                                std::uint32_t difficulty, const std::string& miner_id,
                                std::int64_t timestamp, std::size_t block_cap,
                                const std::function<bool()>& cancel, std::uint64_t chunk) {
    if (txs.empty()) throw MiningError("EmptyTxList: a block carries at least one transaction");
    if (txs.size() > block_cap) throw MiningError("TooManyTxs: block cap exceeded");

    Block b;
    b.index = prev.index + 1;
    b.prev_hash = prev.block_hash;
    b.timestamp = timestamp;
    b.miner_id = miner_id;
    b.difficulty = difficulty;
    b.transactions = std::move(txs);

    for (std::uint64_t from = 0;; from += chunk) {
        if (cancel && cancel()) return std::nullopt;
        if (auto nonce = scan_nonces(b, from, chunk)) {
            b.nonce = *nonce;
            b.block_hash = hash_block(b);
            return b;
        }
    }
}

std::optional<ValidationError> validate_block(const Block& block, const Block& prev,
                                              std::uint32_t expected_difficulty,
                                              std::size_t block_cap) {
    if (block.index != prev.index + 1) return ValidationError::BadIndex;
    if (block.prev_hash != prev.block_hash) return ValidationError::BadPrevHash;
    if (block.difficulty != expected_difficulty) return ValidationError::BadDifficulty;
    if (block.transactions.empty() || block.transactions.size() > block_cap) {
        return ValidationError::BadCount;
    }
    std::unordered_set<std::string> seen;
    for (const auto& tx : block.transactions) {
        if (tx.tx_id != tx_id(tx)) return ValidationError::BadTxId;
        if (!seen.insert(tx.tx_id).second) return ValidationError::DuplicateTx;
    }
    const std::string recomputed = hash_block(block);
    if (block.block_hash != recomputed || !meets_difficulty(recomputed, expected_difficulty)) {
        return ValidationError::BadPow;
    }
    return std::nullopt;
}

std::optional<ChainFault> validate_chain(const Chain& chain, std::uint32_t difficulty,
                                         std::size_t block_cap) {
    if (chain.empty() || chain.front() != genesis_block()) {
        return ChainFault{ValidationError::BadGenesis, 0};
    }
    std::unordered_set<std::string> seen;
    for (std::size_t i = 1; i < chain.size(); ++i) {
        if (auto err = validate_block(chain[i], chain[i - 1], difficulty, block_cap)) {
            return ChainFault{*err, i};
        }
        for (const auto& tx : chain[i].transactions) {
            if (!seen.insert(tx.tx_id).second) {
                return ChainFault{ValidationError::DuplicateTx, i};
            }
        }
    }
    return std::nullopt;
}

ForkChoice resolve_fork(const Chain& local, const Chain& remote, std::uint32_t difficulty,
                        std::size_t block_cap) {
    if (validate_chain(remote, difficulty, block_cap)) return ForkChoice::KeepLocal;
    if (remote.size() > local.size()) return ForkChoice::AdoptRemote;
    if (remote.size() == local.size() &&
        remote.back().block_hash < local.back().block_hash) {
        return ForkChoice::AdoptRemote;
    }
    return ForkChoice::KeepLocal;
}

Value to_value(const Transaction& tx) {
    return Value{
        {"txId", tx.tx_id},
        {"sender", tx.sender},
        {"contract", tx.contract},
        {"params", tx.params},
        {"nonce", tx.nonce},
        {"timestamp", tx.timestamp},
    };
}

Value to_value(const Block& b) {
    Value txs = Value::array();
    for (const auto& tx : b.transactions) {
        txs.push_back(to_value(tx));
    }
    return Value{
        {"index", b.index},
        {"prevHash", b.prev_hash},
        {"timestamp", b.timestamp},
        {"minerId", b.miner_id},
        {"difficulty", b.difficulty},
        {"nonce", b.nonce},
        {"transactions", std::move(txs)},
        {"blockHash", b.block_hash},
    };
}

Value to_value(const Chain& c) {
    Value blocks = Value::array();
    for (const auto& b : c) {
        blocks.push_back(to_value(b));
    }
    return blocks;
}

namespace {

const Value& require(const Value& v, const char* key, Value::value_t type, const char* what) {
    if (!v.is_object() || !v.contains(key)) {
        throw DecodeError(std::string(what) + ": missing field '" + key + "'");
    }
    const Value& field = v.at(key);
    const bool numeric_ok =
        type == Value::value_t::number_unsigned &&
        (field.type() == Value::value_t::number_unsigned ||
         field.type() == Value::value_t::number_integer);
    if (field.type() != type && !numeric_ok) {
        throw DecodeError(std::string(what) + ": field '" + key + "' has wrong type");
    }
    return field;
}

std::uint64_t require_uint(const Value& v, const char* key, const char* what) {
    const Value& field = require(v, key, Value::value_t::number_unsigned, what);
    if (field.is_number_integer() && field.get<std::int64_t>() < 0) {
        throw DecodeError(std::string(what) + ": field '" + key + "' is negative");
    }
    return field.get<std::uint64_t>();
}

}  // namespace

Transaction transaction_from_value(const Value& v) {
    Transaction tx;
    tx.tx_id = require(v, "txId", Value::value_t::string, "transaction").get<std::string>();
    tx.sender = require(v, "sender", Value::value_t::string, "transaction").get<std::string>();
    tx.contract = require(v, "contract", Value::value_t::string, "transaction").get<std::string>();
    if (!v.contains("params")) throw DecodeError("transaction: missing field 'params'");
    tx.params = v.at("params");
    tx.nonce = require_uint(v, "nonce", "transaction");
    tx.timestamp = static_cast<std::int64_t>(require_uint(v, "timestamp", "transaction"));
    return tx;
}

Block block_from_value(const Value& v) {
    Block b;
    b.index = require_uint(v, "index", "block");
    b.prev_hash = require(v, "prevHash", Value::value_t::string, "block").get<std::string>();
    b.timestamp = static_cast<std::int64_t>(require_uint(v, "timestamp", "block"));
    b.miner_id = require(v, "minerId", Value::value_t::string, "block").get<std::string>();
    b.difficulty = static_cast<std::uint32_t>(require_uint(v, "difficulty", "block"));
    b.nonce = require_uint(v, "nonce", "block");
    b.block_hash = require(v, "blockHash", Value::value_t::string, "block").get<std::string>();
    if (!is_hex64(b.prev_hash) || !is_hex64(b.block_hash)) {
        throw DecodeError("block: hash fields must be 64 lowercase hex chars");
    }
    const Value& txs = require(v, "transactions", Value::value_t::array, "block");
    for (const auto& item : txs) {
        b.transactions.push_back(transaction_from_value(item));
    }
    return b;
}

Chain chain_from_value(const Value& v) {
    if (!v.is_array()) throw DecodeError("chain: expected an array of blocks");
    Chain c;
    for (const auto& item : v) {
        c.push_back(block_from_value(item));
    }
    return c;
}

}  // namespace swarmchain
