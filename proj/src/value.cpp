#include "swarmchain/value.hpp"

#include "swarmchain/sha256.hpp"

namespace swarmchain {

namespace {

void append_escaped(std::string& out, const std::string& s) {
    out.push_back('"');
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\b': out += "\\b"; break;
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            case '\f': out += "\\f"; break;
            case '\r': out += "\\r"; break;
            default:
                if (c < 0x20) {
                    static constexpr char kHex[] = "0123456789abcdef";
                    out += "\\u00";
                    out.push_back(kHex[c >> 4]);
                    out.push_back(kHex[c & 0x0f]);
                } else {
                    out.push_back(static_cast<char>(c));
                }
        }
    }
    out.push_back('"');
}

void encode_into(std::string& out, const Value& v) {
    switch (v.type()) {
        case Value::value_t::null:
            out += "null";
            break;
        case Value::value_t::boolean:
            out += v.get<bool>() ? "true" : "false";
            break;
        case Value::value_t::number_integer:
            out += std::to_string(v.get<std::int64_t>());
            break;
        case Value::value_t::number_unsigned:
            out += std::to_string(v.get<std::uint64_t>());
            break;
        case Value::value_t::string:
            append_escaped(out, v.get_ref<const std::string&>());
            break;
        case Value::value_t::array: {
            out.push_back('[');
            bool first = true;
            for (const auto& item : v) {
                if (!first) out.push_back(',');
                first = false;
                encode_into(out, item);
            }
            out.push_back(']');
            break;
        }
        case Value::value_t::object: {
            // nlohmann objects are std::map-backed: iteration is already
            // sorted ascending bytewise.
            out.push_back('{');
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (!first) out.push_back(',');
                first = false;
                append_escaped(out, it.key());
                out.push_back(':');
                encode_into(out, it.value());
            }
            out.push_back('}');
            break;
        }
        case Value::value_t::number_float:
            throw NonCanonicalValue("floats are not canonical; ledger values are integer-only");
        default:
            throw NonCanonicalValue("value type has no canonical form");
    }
}

}  // namespace

bool is_canonical(const Value& v) {
    switch (v.type()) {
        case Value::value_t::null:
        case Value::value_t::boolean:
        case Value::value_t::number_integer:
        case Value::value_t::number_unsigned:
        case Value::value_t::string:
            return true;
        case Value::value_t::array:
        case Value::value_t::object:
            for (const auto& item : v) {
                if (!is_canonical(item)) return false;
            }
            return true;
        default:
            return false;
    }
}

std::string canonical_encode(const Value& v) {
    std::string out;
    encode_into(out, v);
    return out;
}

Value canonical_decode(std::string_view bytes) {
    Value v = Value::parse(bytes, nullptr, false);
    if (v.is_discarded()) {
        throw DecodeError("malformed canonical bytes");
    }
    if (!is_canonical(v)) {
        throw DecodeError("decoded value is not canonical (float or unsupported type)");
    }
    return v;
}

std::string canonical_digest(const Value& v) {
    return sha256_hex(canonical_encode(v));
}

}  // namespace swarmchain
