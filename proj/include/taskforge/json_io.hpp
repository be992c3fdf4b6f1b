#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace taskforge {

using Json = nlohmann::json;

// File-system level failure (missing path, unwritable target). Kept
// distinct from algorithmic errors so callers can exit differently.
struct IOFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Formats a finite double with 9 significant digits ("%.9g").
// Decimal strings written this way parse back to a double that
// re-formats to the same bytes, which is what keeps golden files
// and ledger replays stable.
std::string format_double(double v);

// Canonical serialization: object keys in sorted order (nlohmann's
// std::map storage), doubles via format_double, arrays in stored
// order. indent < 0 emits a single line.
std::string dump_canonical(const Json& j, int indent = 2);

// Strict parse wrapper; throws Json::parse_error on malformed input.
Json parse_json(const std::string& text);

Json load_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

} // namespace taskforge
