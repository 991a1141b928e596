#include "flakyci/kv_file.hpp"

#include "flakyci/errors.hpp"

#include <charconv>
#include <fstream>

namespace flakyci {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

kv_file kv_file::parse(std::istream& in, const std::string& origin) {
  kv_file file;
  file.origin_ = origin;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw input_error(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    auto key = trim(line.substr(0, eq));
    if (key.empty())
      throw input_error(origin + ":" + std::to_string(lineno) + ": empty key");
    file.entries_[std::move(key)] = trim(line.substr(eq + 1));
  }
  return file;
}

kv_file kv_file::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path);
  return parse(in, path);
}

std::optional<std::string> kv_file::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

double kv_file::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size())
    throw input_error(origin_ + ": '" + key + "' is not a number: " + *v);
  return out;
}

long long kv_file::get_int(const std::string& key, long long fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size())
    throw input_error(origin_ + ": '" + key + "' is not an integer: " + *v);
  return out;
}

bool kv_file::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw input_error(origin_ + ": '" + key + "' is not a boolean: " + *v);
}

std::vector<std::pair<std::string, std::string>> kv_file::with_prefix(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto it = entries_.lower_bound(prefix);
       it != entries_.end() && it->first.starts_with(prefix); ++it)
    out.emplace_back(it->first.substr(prefix.size()), it->second);
  return out;
}

}  // namespace flakyci
