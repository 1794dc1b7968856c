#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace spotlight {

/// Flat `key = value` settings. Blank lines and lines starting with '#' are
/// skipped; keys use dotted section prefixes (`train.iterations`).
using ConfigMap = std::map<std::string, std::string>;

/// Throws InvalidConfig on a line without '=', an empty key or a repeated key.
ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::filesystem::path& path);

// Typed value parsers; InvalidConfig names the key on failure.
double config_double(const std::string& key, const std::string& value);
long long config_int(const std::string& key, const std::string& value);
unsigned long long config_u64(const std::string& key, const std::string& value);
bool config_bool(const std::string& key, const std::string& value);
/// Comma-separated list of numbers; an empty value gives an empty list.
std::vector<double> config_double_list(const std::string& key, const std::string& value);

}  // namespace spotlight
