// Copyright 2026 The nego Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NEGO_FUZZY_HPP
#define NEGO_FUZZY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "nego/tariff.hpp"

namespace nego {

class DegenerateTriangleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RuleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Triangular membership: 0 outside [a, c], 1 at b, linear in between.
struct Triangular {
  double a = 0.0, b = 0.0, c = 0.0;
};

struct Gaussian {
  double m = 0.0;
  double sigma = 1.0;
};

using MembershipFunction = std::variant<Triangular, Gaussian>;

inline double fuzzify(const Triangular& t, double x) {
  if (x < t.a || x > t.c) return 0.0;
  if (x == t.b) return 1.0;
  if (x < t.b) return (x - t.a) / (t.b - t.a);
  return (t.c - x) / (t.c - t.b);
}

inline double fuzzify(const Gaussian& g, double x) {
  const double d = (x - g.m) / g.sigma;
  return std::exp(-0.5 * d * d);
}

inline double fuzzify(const MembershipFunction& mf, double x) {
  return std::visit([x](const auto& f) { return fuzzify(f, x); }, mf);
}

// 3-sigma rule: the Gaussian twin of a triangle peaks at b and matches the
// triangle's support width with m = b, sigma = (c - a) / 6.
inline Gaussian to_gaussian(const Triangular& t) {
  if (t.a == t.c) {
    throw DegenerateTriangleError("triangle with a == c has no width");
  }
  return Gaussian{t.b, (t.c - t.a) / 6.0};
}

inline Triangular to_triangular(const Gaussian& g) {
  return Triangular{g.m - 3.0 * g.sigma, g.m, g.m + 3.0 * g.sigma};
}

// The four crisp ratios the client agent judges an offer by. The three unit
// price ratios are current/original (cheaper offer means smaller value); the
// total price ratio is original/current (pricier offer means smaller value).
struct CrispInputs {
  double vupr = 1.0;
  double rupr = 1.0;
  double supr = 1.0;
  double tpr = 1.0;
};

inline CrispInputs crisp_inputs(const Bundle& original, const Bundle& offer,
                                const Tariff& tariff) {
  CrispInputs in;
  in.vupr = tariff.unit_price(Resource::kVcpu, offer[Resource::kVcpu]) /
            tariff.unit_price(Resource::kVcpu, original[Resource::kVcpu]);
  in.rupr = tariff.unit_price(Resource::kRam, offer[Resource::kRam]) /
            tariff.unit_price(Resource::kRam, original[Resource::kRam]);
  in.supr = tariff.unit_price(Resource::kStorage, offer[Resource::kStorage]) /
            tariff.unit_price(Resource::kStorage, original[Resource::kStorage]);
  in.tpr = tariff.total_price(original) / tariff.total_price(offer);
  return in;
}

enum class InputVar : int { kVupr = 0, kRupr = 1, kSupr = 2, kTpr = 3 };

inline constexpr std::array<InputVar, 4> kInputVars = {
    InputVar::kVupr, InputVar::kRupr, InputVar::kSupr, InputVar::kTpr};

inline const char* input_var_name(InputVar v) {
  switch (v) {
    case InputVar::kVupr: return "VUPR";
    case InputVar::kRupr: return "RUPR";
    case InputVar::kSupr: return "SUPR";
    case InputVar::kTpr: return "TPR";
  }
  return "?";
}

// One rule: optional label per input (absent = wildcard), tendency label as
// consequent. At least one antecedent must be present.
struct FuzzyRule {
  std::array<std::optional<std::string>, 4> antecedent;
  std::string consequent;

  std::optional<std::string>& on(InputVar v) {
    return antecedent[static_cast<int>(v)];
  }
  const std::optional<std::string>& on(InputVar v) const {
    return antecedent[static_cast<int>(v)];
  }
};

struct Universe {
  double lo = 0.0;
  double hi = 1.0;

  double clamp(double x) const { return std::min(hi, std::max(lo, x)); }
};

struct ScoreResult {
  double score = 0.0;
  bool no_rule_fired = false;
};

enum class MfKind { kTriangular, kGaussian };

inline const char* mf_kind_name(MfKind k) {
  return k == MfKind::kTriangular ? "triangular" : "gaussian";
}

using LabelMap = std::map<std::string, MembershipFunction>;

// Mamdani-style decision system: min for AND, clip for implication, max for
// aggregation, centroid over a uniform grid for defuzzification.
//
// The three unit price ratios share one label family; TPR's labels read as
// the *price level* of the current offer, so "high" peaks where the offer is
// most expensive (tpr near 0) and "low" where the offer undercuts the
// original (tpr above 1).
struct FuzzySystem {
  Universe unit_universe;
  Universe tpr_universe;
  Universe tendency_universe;
  LabelMap unit_labels;
  LabelMap tpr_labels;
  LabelMap tendency_labels;
  std::vector<FuzzyRule> rules;
  double grid_resolution = 0.1;
  double threshold = 50.0;
  MfKind kind = MfKind::kTriangular;

  const LabelMap& labels_for(InputVar v) const {
    return v == InputVar::kTpr ? tpr_labels : unit_labels;
  }

  const Universe& universe_for(InputVar v) const {
    return v == InputVar::kTpr ? tpr_universe : unit_universe;
  }

  void validate() const {
    if (rules.empty()) throw RuleError("rule set is empty");
    for (std::size_t i = 0; i < rules.size(); ++i) {
      const FuzzyRule& r = rules[i];
      bool any = false;
      for (InputVar v : kInputVars) {
        if (!r.on(v)) continue;
        any = true;
        if (!labels_for(v).count(*r.on(v))) {
          throw RuleError("rule " + std::to_string(i + 1) +
                          ": unknown label '" + *r.on(v) + "' for " +
                          input_var_name(v));
        }
      }
      if (!any) {
        throw RuleError("rule " + std::to_string(i + 1) +
                        " has no antecedent");
      }
      if (!tendency_labels.count(r.consequent)) {
        throw RuleError("rule " + std::to_string(i + 1) +
                        ": unknown tendency label '" + r.consequent + "'");
      }
    }
    if (grid_resolution <= 0.0) throw RuleError("grid resolution must be > 0");
  }

  double firing_strength(const FuzzyRule& rule, const CrispInputs& in) const {
    const std::array<double, 4> x = {in.vupr, in.rupr, in.supr, in.tpr};
    double strength = 1.0;
    for (InputVar v : kInputVars) {
      const auto& label = rule.on(v);
      if (!label) continue;
      const Universe& u = universe_for(v);
      double deg = fuzzify(labels_for(v).at(*label),
                           u.clamp(x[static_cast<int>(v)]));
      strength = std::min(strength, deg);
    }
    return strength;
  }

  ScoreResult evaluate(const CrispInputs& in) const {
    std::vector<std::pair<double, const MembershipFunction*>> fired;
    fired.reserve(rules.size());
    for (const FuzzyRule& r : rules) {
      double s = firing_strength(r, in);
      if (s > 0.0) fired.emplace_back(s, &tendency_labels.at(r.consequent));
    }

    const int steps =
        static_cast<int>(std::llround((tendency_universe.hi -
                                       tendency_universe.lo) /
                                      grid_resolution));
    double mass = 0.0;
    double moment = 0.0;
    for (int i = 0; i <= steps; ++i) {
      const double x = tendency_universe.lo + i * grid_resolution;
      double mu = 0.0;
      for (const auto& [s, mf] : fired) {
        mu = std::max(mu, std::min(s, fuzzify(*mf, x)));
      }
      mass += mu;
      moment += mu * x;
    }
    if (mass <= 0.0) {
      // Unreachable with the shipped rules; a user rule set with holes gets
      // the universe midpoint plus a warning flag.
      return ScoreResult{(tendency_universe.lo + tendency_universe.hi) / 2.0,
                         true};
    }
    // Quantize far below the grid resolution. Summation noise around a
    // symmetric aggregate must not decide a threshold comparison.
    return ScoreResult{std::round(moment / mass * 1e6) / 1e6, false};
  }

  FuzzySystem as_gaussian() const {
    FuzzySystem g = *this;
    g.kind = MfKind::kGaussian;
    auto convert = [](LabelMap& m) {
      for (auto& [name, mf] : m) {
        if (const auto* tri = std::get_if<Triangular>(&mf)) {
          mf = to_gaussian(*tri);
        }
      }
    };
    convert(g.unit_labels);
    convert(g.tpr_labels);
    convert(g.tendency_labels);
    return g;
  }

  nlohmann::json to_json() const;
  static FuzzySystem from_json(const nlohmann::json& j);
};

inline double tendency_score(const FuzzySystem& system,
                             const CrispInputs& in) {
  return system.evaluate(in).score;
}

inline bool accept(double score, double threshold) {
  return score >= threshold;
}

namespace detail {

inline nlohmann::json mf_to_json(const MembershipFunction& mf) {
  if (const auto* t = std::get_if<Triangular>(&mf)) {
    return nlohmann::json{{"tri", {t->a, t->b, t->c}}};
  }
  const auto& g = std::get<Gaussian>(mf);
  return nlohmann::json{{"gauss", {g.m, g.sigma}}};
}

inline MembershipFunction mf_from_json(const nlohmann::json& j) {
  if (j.contains("tri")) {
    const auto& v = j["tri"];
    if (!v.is_array() || v.size() != 3) {
      throw SchemaError("membership: 'tri' needs [a, b, c]");
    }
    Triangular t{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    if (!(t.a <= t.b && t.b <= t.c)) {
      throw SchemaError("membership: triangle needs a <= b <= c");
    }
    return t;
  }
  if (j.contains("gauss")) {
    const auto& v = j["gauss"];
    if (!v.is_array() || v.size() != 2) {
      throw SchemaError("membership: 'gauss' needs [m, sigma]");
    }
    Gaussian g{v[0].get<double>(), v[1].get<double>()};
    if (g.sigma <= 0.0) throw SchemaError("membership: sigma must be > 0");
    return g;
  }
  throw SchemaError("membership: expected 'tri' or 'gauss'");
}

inline Universe universe_of(const LabelMap& labels) {
  Universe u{std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity()};
  for (const auto& [name, mf] : labels) {
    Triangular t = std::holds_alternative<Triangular>(mf)
                       ? std::get<Triangular>(mf)
                       : to_triangular(std::get<Gaussian>(mf));
    u.lo = std::min(u.lo, t.a);
    u.hi = std::max(u.hi, t.c);
  }
  if (!(u.lo < u.hi)) throw SchemaError("variable has an empty universe");
  return u;
}

}  // namespace detail

inline nlohmann::json FuzzySystem::to_json() const {
  nlohmann::json vars;
  auto dump = [](const LabelMap& m) {
    nlohmann::json j;
    for (const auto& [name, mf] : m) j[name] = detail::mf_to_json(mf);
    return j;
  };
  vars["unit_ratio"] = dump(unit_labels);
  vars["tpr"] = dump(tpr_labels);
  vars["tendency"] = dump(tendency_labels);

  nlohmann::json jrules = nlohmann::json::array();
  for (const FuzzyRule& r : rules) {
    nlohmann::json cond;
    for (InputVar v : kInputVars) {
      if (r.on(v)) cond[input_var_name(v)] = *r.on(v);
    }
    jrules.push_back({{"if", cond}, {"then", r.consequent}});
  }
  return nlohmann::json{{"variables", vars},
                        {"rules", jrules},
                        {"threshold", threshold},
                        {"mf_kind", mf_kind_name(kind)}};
}

inline FuzzySystem FuzzySystem::from_json(const nlohmann::json& j) {
  FuzzySystem s;
  if (!j.contains("variables")) throw SchemaError("fuzzy: missing variables");
  const auto& vars = j["variables"];
  auto load = [](const nlohmann::json& v) {
    LabelMap m;
    for (auto it = v.begin(); it != v.end(); ++it) {
      m[it.key()] = detail::mf_from_json(it.value());
    }
    return m;
  };
  for (const char* name : {"unit_ratio", "tpr", "tendency"}) {
    if (!vars.contains(name)) {
      throw SchemaError(std::string("fuzzy: missing variable '") + name + "'");
    }
  }
  s.unit_labels = load(vars["unit_ratio"]);
  s.tpr_labels = load(vars["tpr"]);
  s.tendency_labels = load(vars["tendency"]);
  s.unit_universe = detail::universe_of(s.unit_labels);
  s.tpr_universe = detail::universe_of(s.tpr_labels);
  s.tendency_universe = detail::universe_of(s.tendency_labels);

  if (!j.contains("rules") || !j["rules"].is_array()) {
    throw SchemaError("fuzzy: missing rules");
  }
  for (const auto& jr : j["rules"]) {
    FuzzyRule r;
    if (!jr.contains("if") || !jr.contains("then")) {
      throw SchemaError("fuzzy: rule needs 'if' and 'then'");
    }
    for (auto it = jr["if"].begin(); it != jr["if"].end(); ++it) {
      bool known = false;
      for (InputVar v : kInputVars) {
        if (it.key() == input_var_name(v)) {
          r.on(v) = it.value().get<std::string>();
          known = true;
        }
      }
      if (!known) throw SchemaError("fuzzy: unknown input '" + it.key() + "'");
    }
    r.consequent = jr["then"].get<std::string>();
    s.rules.push_back(std::move(r));
  }
  s.threshold = j.value("threshold", 50.0);
  std::string kind = j.value("mf_kind", "triangular");
  if (kind == "gaussian") {
    s = s.as_gaussian();
  } else if (kind != "triangular") {
    throw SchemaError("fuzzy: unknown mf_kind '" + kind + "'");
  }
  s.validate();
  return s;
}

// The seven-rule set the system ships with. Rules 1-3 react to the total
// price level, rule 4 rewards an across-the-board unit discount, rules 5-7
// dampen any resource whose unit price carries no discount at all.
inline std::vector<FuzzyRule> default_rules() {
  std::vector<FuzzyRule> rules(7);
  rules[0].on(InputVar::kTpr) = "high";
  rules[0].consequent = "low";
  rules[1].on(InputVar::kTpr) = "medium";
  rules[1].consequent = "medium";
  rules[2].on(InputVar::kTpr) = "low";
  rules[2].consequent = "high";
  rules[3].on(InputVar::kVupr) = "cheap";
  rules[3].on(InputVar::kRupr) = "cheap";
  rules[3].on(InputVar::kSupr) = "cheap";
  rules[3].consequent = "high";
  rules[4].on(InputVar::kVupr) = "expensive";
  rules[4].consequent = "medium";
  rules[5].on(InputVar::kRupr) = "expensive";
  rules[5].consequent = "medium";
  rules[6].on(InputVar::kSupr) = "expensive";
  rules[6].consequent = "medium";
  return rules;
}

// Calibrated default membership parameters. The shape is pinned so that the
// reference point (all ratios 1) lands exactly on the tendency midpoint:
// at tpr = 1 only the TPR "medium" label is active and the output set is the
// symmetric "medium" triangle. The remaining breakpoints come from a
// residual search against the three score anchors (50.00 / 14.79 / 61.63).
inline FuzzySystem default_fuzzy_system(MfKind kind = MfKind::kTriangular) {
  FuzzySystem s;
  s.unit_universe = {0.2, 1.05};
  s.tpr_universe = {0.0, 2.0};
  s.tendency_universe = {0.0, 100.0};
  s.unit_labels = {
      {"cheap", Triangular{0.2, 0.2, 0.55}},
      {"medium", Triangular{0.4, 0.625, 0.85}},
      {"expensive", Triangular{1.0, 1.025, 1.05}},
  };
  s.tpr_labels = {
      {"high", Triangular{0.0, 0.0, 0.75}},
      {"medium", Triangular{0.35, 0.75, 1.6}},
      {"low", Triangular{1.0, 2.0, 2.0}},
  };
  s.tendency_labels = {
      {"low", Triangular{0.0, 0.0, 44.0}},
      {"medium", Triangular{25.0, 50.0, 75.0}},
      {"high", Triangular{75.0, 100.0, 100.0}},
  };
  s.rules = default_rules();
  s.grid_resolution = 0.1;
  s.threshold = 50.0;
  s.validate();
  if (kind == MfKind::kGaussian) return s.as_gaussian();
  return s;
}

}  // namespace nego

#endif  // NEGO_FUZZY_HPP
