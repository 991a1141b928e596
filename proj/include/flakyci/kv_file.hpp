#pragma once

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace flakyci {

/// `key = value` text: one pair per line, `#` starts a comment, blank lines
/// ignored. Later duplicates override earlier ones.
class kv_file {
 public:
  static kv_file parse(std::istream& in, const std::string& origin = "config");
  static kv_file load(const std::string& path);

  std::optional<std::string> get(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Keys starting with `prefix`, with the prefix removed, in key order.
  std::vector<std::pair<std::string, std::string>> with_prefix(
      const std::string& prefix) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::string origin_;
  std::map<std::string, std::string> entries_;
};

}  // namespace flakyci
