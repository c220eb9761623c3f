#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace vcr {

// "key = value" text records, one per line; '#' starts a comment.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);

// Numeric accessors throw IoError for missing or malformed entries.
double kv_double(const KeyValues& kv, const std::string& key);
double kv_double(const KeyValues& kv, const std::string& key, double fallback);
long long kv_int(const KeyValues& kv, const std::string& key, long long fallback);

std::string format_double(double v);

}  // namespace vcr
