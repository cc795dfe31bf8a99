#pragma once

// Location-suitability verdicts from predicted pollutant levels and a user's
// declared health conditions. Thresholds live in an external rules file; the
// shipped table is configurable policy, not medical guidance.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "healthcam/aqi.hpp"
#include "healthcam/pollutants.hpp"

namespace healthcam {

inline constexpr std::array<std::string_view, 9> kSymptomVocabulary = {
    "asthma", "copd", "heart-condition", "pregnancy", "child", "elderly", "eye-irritation", "allergy", "none"};

inline bool is_known_symptom(std::string_view s) {
  return std::find(kSymptomVocabulary.begin(), kSymptomVocabulary.end(), s) != kSymptomVocabulary.end();
}

class UnknownSymptomError : public std::invalid_argument {
 public:
  explicit UnknownSymptomError(std::string token)
      : std::invalid_argument("unknown symptom '" + token + "'"), token_(std::move(token)) {}
  const std::string& token() const noexcept { return token_; }

 private:
  std::string token_;
};

class RulesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A set of vocabulary symptoms. "none" is accepted and carries no rules.
class SymptomProfile {
 public:
  SymptomProfile() = default;

  /// Parses a comma-separated list; surrounding whitespace is ignored and an
  /// empty list means "none".
  static SymptomProfile parse(std::string_view text) {
    SymptomProfile p;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t comma = text.find(',', start);
      if (comma == std::string_view::npos) comma = text.size();
      std::string_view token = text.substr(start, comma - start);
      while (!token.empty() && std::isspace(static_cast<unsigned char>(token.front()))) token.remove_prefix(1);
      while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back()))) token.remove_suffix(1);
      if (!token.empty()) p.add(token);
      start = comma + 1;
    }
    return p;
  }

  void add(std::string_view symptom) {
    if (!is_known_symptom(symptom)) throw UnknownSymptomError(std::string(symptom));
    symptoms_.insert(std::string(symptom));
  }

  const std::set<std::string>& symptoms() const noexcept { return symptoms_; }

  /// Symptoms other than "none".
  std::vector<std::string> conditions() const {
    std::vector<std::string> out;
    for (const auto& s : symptoms_) {
      if (s != "none") out.push_back(s);
    }
    return out;
  }

  std::string to_string() const {
    const auto c = conditions();
    if (c.empty()) return "none";
    std::string out;
    for (const auto& s : c) out += (out.empty() ? "" : ",") + s;
    return out;
  }

 private:
  std::set<std::string> symptoms_;
};

enum class Verdict { Suitable = 0, Caution = 1, Unsuitable = 2 };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Suitable:
      return "Suitable";
    case Verdict::Caution:
      return "Caution";
    case Verdict::Unsuitable:
      return "Unsuitable";
  }
  return "Unknown";
}

/// A value strictly above `caution` triggers Caution, strictly above `unsuitable` triggers Unsuitable.
struct ThresholdRule {
  Pollutant pollutant;
  double caution;
  double unsuitable;
};

struct RuleTable {
  std::string policy_version;
  std::string disclaimer;
  AqiBreakpoints breakpoints;
  // General-population rule, applied to every profile, expressed as AQI classes.
  AqiClass general_caution_at = AqiClass::UnhealthySensitive;
  AqiClass general_unsuitable_at = AqiClass::VeryUnhealthy;
  std::map<std::string, std::vector<ThresholdRule>> by_symptom;
};

struct TriggeredRule {
  std::string source;  // "general" or a symptom name
  Pollutant pollutant;
  double value;
  double threshold;
  Verdict severity;
};

struct Recommendation {
  Verdict verdict = Verdict::Suitable;
  std::vector<TriggeredRule> triggered;
  AqiClass aqi_class = AqiClass::Good;
  std::string advisory_key;

  nlohmann::json to_json() const {
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& r : triggered) {
      rules.push_back({{"source", r.source},
                       {"pollutant", std::string(pollutant_name(r.pollutant))},
                       {"value", r.value},
                       {"threshold", r.threshold},
                       {"severity", to_string(r.severity)}});
    }
    return {{"verdict", to_string(verdict)},
            {"aqi_class", std::string(healthcam::to_string(aqi_class))},
            {"advisory_key", advisory_key},
            {"triggered_rules", rules}};
  }
};

namespace detail {

inline void check_rule(const RuleTable& table, const ThresholdRule& rule, const std::string& where) {
  (void)table;
  if (!(rule.caution >= 0.0)) throw RulesError(where + ": caution threshold must be non-negative");
  if (!(rule.caution < rule.unsuitable)) {
    throw RulesError(where + ": caution threshold must be below the unsuitable threshold");
  }
}

inline void apply_rule(const std::string& source, const ThresholdRule& rule, const PollutantVector& v,
                       Recommendation& out) {
  const double value = v[rule.pollutant];
  if (value > rule.unsuitable) {
    out.triggered.push_back({source, rule.pollutant, value, rule.unsuitable, Verdict::Unsuitable});
  } else if (value > rule.caution) {
    out.triggered.push_back({source, rule.pollutant, value, rule.caution, Verdict::Caution});
  }
}

}  // namespace detail

inline void validate_rules(const RuleTable& table) {
  table.breakpoints.validate();
  if (!(table.general_caution_at < table.general_unsuitable_at)) {
    throw RulesError("general: caution class must be below the unsuitable class");
  }
  if (table.general_caution_at == AqiClass::Good) throw RulesError("general: caution class cannot be Good");
  for (const auto& [symptom, rules] : table.by_symptom) {
    if (!is_known_symptom(symptom)) throw RulesError("symptoms." + symptom + ": not in the symptom vocabulary");
    for (std::size_t i = 0; i < rules.size(); ++i) {
      detail::check_rule(table, rules[i], "symptoms." + symptom + "[" + std::to_string(i) + "]");
    }
  }
}

/// Verdict = max severity over the general rule and every rule of every
/// declared condition, so raising a pollutant or adding a condition never
/// lowers it.
inline Recommendation recommend(const PollutantVector& prediction, const SymptomProfile& profile,
                                const RuleTable& rules) {
  Recommendation out;
  const double pm25 = std::max(0.0, prediction.pm25());
  out.aqi_class = rules.breakpoints.classify(pm25);
  const ThresholdRule general{Pollutant::Pm25, rules.breakpoints.lower_bound(rules.general_caution_at),
                              rules.breakpoints.lower_bound(rules.general_unsuitable_at)};
  detail::apply_rule("general", general, prediction, out);
  for (const auto& symptom : profile.conditions()) {
    auto it = rules.by_symptom.find(symptom);
    if (it == rules.by_symptom.end()) continue;
    for (const auto& rule : it->second) detail::apply_rule(symptom, rule, prediction, out);
  }
  for (const auto& t : out.triggered) out.verdict = std::max(out.verdict, t.severity);
  switch (out.verdict) {
    case Verdict::Suitable:
      out.advisory_key = "advisory.suitable";
      break;
    case Verdict::Caution:
      out.advisory_key = "advisory.caution";
      break;
    case Verdict::Unsuitable:
      out.advisory_key = "advisory.unsuitable";
      break;
  }
  return out;
}

/// Parses a rules document:
/// {
///   "policy_version": "...", "disclaimer": "...",
///   "general": {"caution_at": "UnhealthySensitive", "unsuitable_at": "VeryUnhealthy"},
///   "symptoms": {"asthma": [{"pollutant": "pm25", "caution": 12.0, "unsuitable": 35.4}, ...], ...}
/// }
inline RuleTable parse_rules(const nlohmann::json& doc, const AqiBreakpoints& breakpoints = AqiBreakpoints::us_epa()) {
  RuleTable table;
  table.breakpoints = breakpoints;
  try {
    table.policy_version = doc.at("policy_version").get<std::string>();
    table.disclaimer = doc.value("disclaimer", "");
    const auto& general = doc.at("general");
    auto cls = [](const nlohmann::json& j, const char* key) {
      const std::string name = j.at(key).get<std::string>();
      auto c = parse_aqi_class(name);
      if (!c) throw RulesError(std::string("general.") + key + ": unknown AQI class '" + name + "'");
      return *c;
    };
    table.general_caution_at = cls(general, "caution_at");
    table.general_unsuitable_at = cls(general, "unsuitable_at");
    for (const auto& [symptom, rules] : doc.at("symptoms").items()) {
      if (!is_known_symptom(symptom)) throw RulesError("symptoms." + symptom + ": not in the symptom vocabulary");
      if (!rules.is_array()) throw RulesError("symptoms." + symptom + ": expected a list of rules");
      auto& list = table.by_symptom[symptom];
      for (std::size_t i = 0; i < rules.size(); ++i) {
        const std::string where = "symptoms." + symptom + "[" + std::to_string(i) + "]";
        const auto& r = rules[i];
        const std::string name = r.at("pollutant").get<std::string>();
        auto p = parse_pollutant(name);
        if (!p) throw RulesError(where + ": unknown pollutant '" + name + "'");
        ThresholdRule rule{*p, r.at("caution").get<double>(), r.at("unsuitable").get<double>()};
        detail::check_rule(table, rule, where);
        list.push_back(rule);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw RulesError(std::string("malformed rules document: ") + e.what());
  }
  validate_rules(table);
  return table;
}

inline RuleTable load_rules(const std::filesystem::path& path,
                            const AqiBreakpoints& breakpoints = AqiBreakpoints::us_epa()) {
  std::ifstream in(path);
  if (!in) throw RulesError("cannot open rules file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw RulesError("rules file " + path.string() + ": " + e.what());
  }
  try {
    return parse_rules(doc, breakpoints);
  } catch (const RulesError& e) {
    throw RulesError(path.string() + ": " + e.what());
  }
}

}  // namespace healthcam
