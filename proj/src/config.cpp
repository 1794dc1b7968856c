#include "spotlight/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "spotlight/error.hpp"

namespace spotlight {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw Error(ErrorCode::InvalidConfig, key + ": '" + value + "' is not " + what);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(lineno) + ": empty key");
    if (!out.emplace(key, trim(t.substr(eq + 1))).second) {
      throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(lineno) + ": duplicate key " + key);
    }
  }
  return out;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

double config_double(const std::string& key, const std::string& value) {
  if (value.empty()) bad_value(key, value, "a number");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(value.c_str(), &end);
  if (*end != '\0' || errno == ERANGE) bad_value(key, value, "a number");
  return v;
}

long long config_int(const std::string& key, const std::string& value) {
  if (value.empty()) bad_value(key, value, "an integer");
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (*end != '\0' || errno == ERANGE) bad_value(key, value, "an integer");
  return v;
}

unsigned long long config_u64(const std::string& key, const std::string& value) {
  if (value.empty() || value[0] == '-') bad_value(key, value, "an unsigned integer");
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (*end != '\0' || errno == ERANGE) bad_value(key, value, "an unsigned integer");
  return v;
}

bool config_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "a boolean");
}

std::vector<double> config_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  if (trim(value).empty()) return out;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(config_double(key, trim(item)));
  return out;
}

}  // namespace spotlight
