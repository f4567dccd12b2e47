#pragma once

/**
 * Structured values and the canonical byte encoding used for hashing and
 * every file format in the project.
 *
 * A Value is a tree of null / bool / integer / string / list / map with
 * string keys. The canonical encoding is JSON with object keys sorted
 * ascending bytewise, no whitespace, integers in minimal decimal form,
 * strings with minimal escaping, UTF-8 throughout. Floats are rejected:
 * ledger values are integer-only so hashes are reproducible across
 * languages and platforms.
 */

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace swarmchain {

using Value = nlohmann::json;

/// Thrown when a value cannot be canonically encoded (floats, binary blobs).
class NonCanonicalValue : public std::runtime_error {
public:
    explicit NonCanonicalValue(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when canonical bytes fail to parse back into a Value.
class DecodeError : public std::runtime_error {
public:
    explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};

/// True iff the value is representable in the canonical encoding.
bool is_canonical(const Value& v);

/// Serializes a value to its canonical byte form. Throws NonCanonicalValue.
std::string canonical_encode(const Value& v);

/// Parses canonical (or any valid JSON) bytes back into a Value.
/// Throws DecodeError on malformed input or non-canonical number forms.
Value canonical_decode(std::string_view bytes);

/// Lowercase hex of the 32-byte digest of the canonical encoding.
std::string canonical_digest(const Value& v);

}  // namespace swarmchain
