#include "flakyci/label_engine.hpp"

#include "flakyci/errors.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/regex.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

namespace flakyci {

struct compiled_pattern::impl {
  boost::regex regex;
};

std::optional<std::string> find_backreference(std::string_view pattern) {
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern.substr(i).starts_with("(?P=") ||
        pattern.substr(i).starts_with("(?("))
      return std::string(pattern.substr(i, 4));
    if (pattern[i] != '\\' || i + 1 >= pattern.size()) continue;
    const char next = pattern[i + 1];
    if ((next >= '1' && next <= '9') || next == 'g' || next == 'k')
      return std::string(pattern.substr(i, 2));
    ++i;
  }
  return std::nullopt;
}

compiled_pattern compiled_pattern::compile(std::string_view pattern) {
  if (pattern.empty()) throw std::invalid_argument("empty pattern");
  if (const auto ref = find_backreference(pattern))
    throw std::invalid_argument("backreferences are not permitted: " + *ref);
  compiled_pattern out;
  try {
    auto p = std::make_shared<impl>();
    p->regex.assign(pattern.begin(), pattern.end(),
                    boost::regex::perl | boost::regex::no_mod_s);
    out.impl_ = std::move(p);
  } catch (const boost::regex_error& e) {
    throw std::invalid_argument(e.what());
  }
  return out;
}

bool compiled_pattern::search(std::string_view text) const {
  if (!impl_) return false;
  return boost::regex_search(text.begin(), text.end(), impl_->regex);
}

// ---------------------------------------------------------------------------
// catalog

rule_catalog rule_catalog::from_rules(std::vector<label_rule> rules) {
  rule_catalog catalog;
  std::unordered_set<int> orders;
  std::unordered_set<std::string> ids;
  for (auto& rule : rules) {
    const std::string who = "rule '" + rule.rule_id + "'";
    if (rule.rule_id.empty()) throw catalog_error("rule with empty rule_id");
    if (rule.label.empty()) throw catalog_error(who + ": empty label");
    if (rule.group.empty())
      throw catalog_error(who + ": label '" + rule.label + "' has no group");
    if (!orders.insert(rule.order).second)
      throw catalog_error(who + ": duplicate order " +
                          std::to_string(rule.order));
    if (!ids.insert(rule.rule_id).second)
      throw catalog_error(who + ": duplicate rule_id");
    try {
      rule.regex = compiled_pattern::compile(rule.pattern);
    } catch (const std::invalid_argument& e) {
      throw catalog_error(who + ": bad pattern: " + e.what());
    }
    const auto [it, inserted] = catalog.groups_.emplace(rule.label, rule.group);
    if (!inserted && it->second != rule.group)
      throw catalog_error(who + ": label '" + rule.label +
                          "' assigned to groups '" + it->second + "' and '" +
                          rule.group + "'");
  }
  std::sort(rules.begin(), rules.end(),
            [](const label_rule& a, const label_rule& b) {
              return a.order < b.order;
            });
  catalog.rules_ = std::move(rules);
  return catalog;
}

std::set<std::string> rule_catalog::labels() const {
  std::set<std::string> out;
  for (const auto& [label, group] : groups_) out.insert(label);
  return out;
}

std::set<std::string> rule_catalog::group_names() const {
  std::set<std::string> out;
  for (const auto& [label, group] : groups_) out.insert(group);
  return out;
}

std::optional<std::string> rule_catalog::group_of(
    const std::string& label) const {
  const auto it = groups_.find(label);
  if (it == groups_.end()) return std::nullopt;
  return it->second;
}

const label_rule* rule_catalog::find_rule(const std::string& rule_id) const {
  for (const auto& rule : rules_)
    if (rule.rule_id == rule_id) return &rule;
  return nullptr;
}

rule_catalog load_rule_catalog(std::istream& source,
                               const std::string& origin) {
  std::vector<label_rule> rules;
  std::string line;
  for (int lineno = 1; std::getline(source, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line[line.find_first_not_of(" \t")] == '#') continue;
    if (sanitize_utf8(line) != line)
      throw catalog_error(origin + ":" + std::to_string(lineno) +
                          ": not valid UTF-8");

    std::vector<std::string> cols;
    std::size_t start = 0;
    // The pattern is the remainder of the line and may itself contain tabs.
    while (cols.size() < 4) {
      const auto tab = line.find('\t', start);
      if (tab == std::string::npos) break;
      cols.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    cols.push_back(line.substr(start));
    if (cols.size() != 5)
      throw catalog_error(origin + ":" + std::to_string(lineno) +
                          ": expected 5 tab-separated columns");

    label_rule rule;
    const auto& order = cols[0];
    const auto [ptr, ec] =
        std::from_chars(order.data(), order.data() + order.size(), rule.order);
    if (ec != std::errc{} || ptr != order.data() + order.size())
      throw catalog_error(origin + ":" + std::to_string(lineno) +
                          ": order is not an integer: " + order);
    rule.rule_id = cols[1];
    rule.label = cols[2];
    rule.group = cols[3];
    rule.pattern = cols[4];
    rules.push_back(std::move(rule));
  }
  try {
    return rule_catalog::from_rules(std::move(rules));
  } catch (const catalog_error& e) {
    throw catalog_error(origin + ": " + e.what());
  }
}

rule_catalog load_rule_catalog(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw catalog_error("cannot open catalog " + path.string());
  return load_rule_catalog(in, path.string());
}

void write_rule_catalog(std::ostream& out, const rule_catalog& catalog) {
  out << "# order\trule_id\tlabel\tgroup\tpattern\n";
  for (const auto& r : catalog.rules())
    out << r.order << '\t' << r.rule_id << '\t' << r.label << '\t' << r.group
        << '\t' << r.pattern << '\n';
}

// ---------------------------------------------------------------------------
// labeling

std::string sanitize_utf8(std::string_view bytes) {
  // Well-formed sequences per the Unicode byte table; each maximal invalid
  // subpart becomes one U+FFFD.
  static constexpr std::string_view replacement = "\xEF\xBF\xBD";
  std::string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
      ++i;
      continue;
    }
    std::size_t trail = 0;
    unsigned char lo = 0x80, hi = 0xBF;
    if (c >= 0xC2 && c <= 0xDF) {
      trail = 1;
    } else if (c >= 0xE0 && c <= 0xEF) {
      trail = 2;
      if (c == 0xE0) lo = 0xA0;
      if (c == 0xED) hi = 0x9F;
    } else if (c >= 0xF0 && c <= 0xF4) {
      trail = 3;
      if (c == 0xF0) lo = 0x90;
      if (c == 0xF4) hi = 0x8F;
    }
    std::size_t used = 1;
    while (used <= trail && i + used < bytes.size()) {
      const auto b = static_cast<unsigned char>(bytes[i + used]);
      const bool ok = used == 1 ? (b >= lo && b <= hi) : (b >= 0x80 && b <= 0xBF);
      if (!ok) break;
      ++used;
    }
    if (trail > 0 && used == trail + 1)
      out.append(bytes.substr(i, used));
    else
      out.append(replacement);
    i += used;
  }
  return out;
}

std::string prepare_log_text(std::string_view raw, std::size_t max_bytes) {
  if (raw.size() > max_bytes) raw.remove_prefix(raw.size() - max_bytes);
  return sanitize_utf8(raw);
}

label_diagnostics label_failure_with_diagnostics(std::string_view log_text,
                                                 const rule_catalog& catalog,
                                                 const label_options& options) {
  label_diagnostics diag;
  const std::string text = prepare_log_text(log_text, options.max_log_bytes);
  for (const auto& rule : catalog.rules()) {
    bool hit = false;
    try {
      hit = rule.regex.search(text);
    } catch (const std::runtime_error& e) {
      diag.engine_errors.push_back(rule.rule_id + ": " + e.what());
    }
    if (!hit) continue;
    if (!diag.winner)
      diag.winner = label_match{rule.label, rule.rule_id, rule.order};
    else
      diag.shadowed_rules.push_back(rule.rule_id);
  }
  return diag;
}

std::optional<label_match> label_failure(std::string_view log_text,
                                         const rule_catalog& catalog,
                                         const label_options& options) {
  const std::string text = prepare_log_text(log_text, options.max_log_bytes);
  for (const auto& rule : catalog.rules()) {
    try {
      if (rule.regex.search(text))
        return label_match{rule.label, rule.rule_id, rule.order};
    } catch (const std::runtime_error&) {
      // engine gave up on this rule; try the next one
    }
  }
  return std::nullopt;
}

std::size_t corpus_labeling::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(processed.begin(), processed.end(),
                    [](const labeled_failure& f) { return f.label.has_value(); }));
}

corpus_labeling label_corpus(std::span<const flaky_failure> failures,
                             const log_store& store,
                             const rule_catalog& catalog,
                             const label_options& options) {
  corpus_labeling result;
  std::vector<const flaky_failure*> with_logs;
  for (const auto& f : failures) {
    if (f.job.log_ref && store.contains(*f.job.log_ref))
      with_logs.push_back(&f);
    else
      ++result.missing_logs;
  }

  result.processed.resize(with_logs.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < with_logs.size(); i += stride) {
      const auto& f = *with_logs[i];
      auto& out = result.processed[i];
      out.failure = f;
      const auto text = store.read(*f.job.log_ref);
      if (!text) continue;
      auto diag = label_failure_with_diagnostics(*text, catalog, options);
      if (diag.winner) {
        out.label = diag.winner->label;
        out.matched_rule = diag.winner->rule_id;
      }
      out.shadowed_rules = std::move(diag.shadowed_rules);
    }
  };

  const unsigned threads = std::max(1u, options.threads);
  if (threads == 1 || with_logs.size() < 2) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  return result;
}

void write_labeled_jsonl(std::ostream& out,
                         std::span<const labeled_failure> labeled) {
  for (const auto& f : labeled) {
    nlohmann::ordered_json obj;
    obj["job_id"] = f.failure.job.id;
    obj["label"] = f.label ? nlohmann::ordered_json(*f.label)
                           : nlohmann::ordered_json(nullptr);
    obj["rule_id"] = f.matched_rule ? nlohmann::ordered_json(*f.matched_rule)
                                    : nlohmann::ordered_json(nullptr);
    if (!f.shadowed_rules.empty()) obj["shadowed_rules"] = f.shadowed_rules;
    out << obj.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// evaluation

eval_report make_eval_report(std::size_t total, std::size_t labeled,
                             std::size_t correct) {
  if (labeled > total || correct > labeled)
    throw input_error("evaluation counts must satisfy correct <= labeled <= total");
  eval_report report;
  report.total = total;
  report.labeled = labeled;
  report.correct = correct;
  report.recall = total == 0 ? 0.0
                             : static_cast<double>(labeled) /
                                   static_cast<double>(total);
  if (labeled > 0)
    report.precision =
        static_cast<double>(correct) / static_cast<double>(labeled);
  return report;
}

eval_report evaluate_labeling(
    std::span<const labeled_failure> predicted,
    const std::map<job_id, std::optional<std::string>>& truth) {
  std::size_t labeled = 0;
  std::size_t correct = 0;
  for (const auto& p : predicted) {
    const auto it = truth.find(p.failure.job.id);
    if (it == truth.end())
      throw input_error("job " + std::to_string(p.failure.job.id) +
                        " has no truth label");
    if (!p.label) continue;
    ++labeled;
    if (it->second && *it->second == *p.label) ++correct;
  }
  return make_eval_report(predicted.size(), labeled, correct);
}

std::int64_t required_sample_size(std::int64_t population, double confidence,
                                  double margin) {
  if (population < 1) throw input_error("population must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw input_error("confidence must lie in (0, 1)");
  if (!(margin > 0.0 && margin < 1.0))
    throw input_error("margin must lie in (0, 1)");
  const boost::math::normal standard;
  const double z = boost::math::quantile(standard, 0.5 + confidence / 2.0);
  const double n = static_cast<double>(population);
  const double spread = z * z * 0.25;
  const double size = n * spread / (margin * margin * n + spread);
  return static_cast<std::int64_t>(std::ceil(size - 1e-9));
}

}  // namespace flakyci
