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

#ifndef NEGO_TARIFF_HPP
#define NEGO_TARIFF_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace nego {

// The three resources a rental bundle is made of. Every per-resource table in
// this codebase is a std::array<T, 3> indexed by this enum.
enum class Resource : int { kVcpu = 0, kRam = 1, kStorage = 2 };

inline constexpr std::array<Resource, 3> kResources = {
    Resource::kVcpu, Resource::kRam, Resource::kStorage};

inline const char* resource_name(Resource r) {
  switch (r) {
    case Resource::kVcpu: return "vcpu";
    case Resource::kRam: return "ram";
    case Resource::kStorage: return "storage";
  }
  return "?";
}

template <typename T>
using PerResource = std::array<T, 3>;

template <typename T>
T& at(PerResource<T>& a, Resource r) { return a[static_cast<int>(r)]; }
template <typename T>
const T& at(const PerResource<T>& a, Resource r) { return a[static_cast<int>(r)]; }

class OutOfRangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quantities of the three resources. Serves both as a client requirement and
// as a provider offer.
struct Bundle {
  PerResource<int> qty{0, 0, 0};

  int& operator[](Resource r) { return at(qty, r); }
  int operator[](Resource r) const { return at(qty, r); }
  bool operator==(const Bundle& o) const = default;
};

inline Bundle make_bundle(int vcpu, int ram_gb, int storage_gb) {
  return Bundle{{vcpu, ram_gb, storage_gb}};
}

// One price tier: quantities up to `upper_bound` (and above the previous
// bound) rent at `unit_price`.
struct Tier {
  int upper_bound = 0;
  double unit_price = 0.0;
};

enum class PricingMode { kFlat, kProgressive };

inline const char* pricing_mode_name(PricingMode m) {
  return m == PricingMode::kFlat ? "flat" : "progressive";
}

// Tiered daily rental price table.
//
// Flat mode charges the whole quantity at the tier it lands in, so the total
// can drop when a quantity steps over a tier bound. Progressive mode charges
// each tier for the units it covers and blends, which keeps totals monotone.
class Tariff {
 public:
  Tariff(PerResource<std::vector<Tier>> tiers, PricingMode mode)
      : tiers_(std::move(tiers)), mode_(mode) {
    validate();
  }

  PricingMode mode() const { return mode_; }
  const std::vector<Tier>& tiers(Resource r) const { return at(tiers_, r); }

  // Highest rentable quantity for a resource.
  int top_bound(Resource r) const { return tiers(r).back().upper_bound; }

  // First two tier bounds; these drive the first-offer enlargement.
  int bound_1_2(Resource r) const { return tiers(r)[0].upper_bound; }
  int bound_2_3(Resource r) const { return tiers(r)[1].upper_bound; }

  // 1-based index of the tier whose range contains qty.
  int tier_of(Resource r, int qty) const {
    check_range(r, qty);
    const auto& ts = tiers(r);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (qty <= ts[i].upper_bound) return static_cast<int>(i) + 1;
    }
    return static_cast<int>(ts.size());  // unreachable after check_range
  }

  double unit_price(Resource r, int qty) const {
    check_range(r, qty);
    const auto& ts = tiers(r);
    if (mode_ == PricingMode::kFlat) {
      return ts[tier_of(r, qty) - 1].unit_price;
    }
    // Progressive: blended price over the consumed slices.
    double cost = 0.0;
    int prev = 0;
    for (const Tier& t : ts) {
      if (qty <= prev) break;
      int used = std::min(qty, t.upper_bound) - prev;
      cost += used * t.unit_price;
      prev = t.upper_bound;
    }
    return cost / qty;
  }

  double resource_cost(Resource r, int qty) const {
    return unit_price(r, qty) * qty;
  }

  double total_price(const Bundle& b) const {
    double total = 0.0;
    for (Resource r : kResources) total += resource_cost(r, b[r]);
    return total;
  }

  bool valid_bundle(const Bundle& b) const {
    for (Resource r : kResources) {
      if (b[r] < 1 || b[r] > top_bound(r)) return false;
    }
    return true;
  }

  void check_bundle(const Bundle& b) const {
    for (Resource r : kResources) check_range(r, b[r]);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    for (Resource r : kResources) {
      nlohmann::json rows = nlohmann::json::array();
      for (const Tier& t : tiers(r)) {
        rows.push_back({t.upper_bound, t.unit_price});
      }
      j[resource_name(r)] = rows;
    }
    j["mode"] = pricing_mode_name(mode_);
    return j;
  }

  static Tariff from_json(const nlohmann::json& j) {
    PerResource<std::vector<Tier>> tiers;
    for (Resource r : kResources) {
      const char* name = resource_name(r);
      if (!j.contains(name) || !j[name].is_array()) {
        throw SchemaError(std::string("tariff: missing tier list for ") + name);
      }
      std::vector<Tier>& ts = at(tiers, r);
      for (const auto& row : j[name]) {
        if (!row.is_array() || row.size() != 2) {
          throw SchemaError(std::string("tariff: bad tier row for ") + name);
        }
        ts.push_back(Tier{row[0].get<int>(), row[1].get<double>()});
      }
    }
    PricingMode mode = PricingMode::kFlat;
    if (j.contains("mode")) {
      std::string m = j["mode"].get<std::string>();
      if (m == "flat") {
        mode = PricingMode::kFlat;
      } else if (m == "progressive") {
        mode = PricingMode::kProgressive;
      } else {
        throw SchemaError("tariff: unknown mode '" + m + "'");
      }
    }
    return Tariff(std::move(tiers), mode);
  }

  Tariff with_mode(PricingMode mode) const {
    Tariff t = *this;
    t.mode_ = mode;
    return t;
  }

 private:
  void check_range(Resource r, int qty) const {
    if (qty < 1 || qty > top_bound(r)) {
      throw OutOfRangeError(std::string(resource_name(r)) + " quantity " +
                            std::to_string(qty) + " outside [1, " +
                            std::to_string(top_bound(r)) + "]");
    }
  }

  void validate() const {
    for (Resource r : kResources) {
      const auto& ts = tiers(r);
      if (ts.size() != 3) {
        throw SchemaError(std::string("tariff: ") + resource_name(r) +
                          " needs exactly 3 tiers, got " +
                          std::to_string(ts.size()));
      }
      for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts[i].upper_bound < 1 || ts[i].unit_price <= 0.0) {
          throw SchemaError(std::string("tariff: ") + resource_name(r) +
                            " tier " + std::to_string(i + 1) + " invalid");
        }
        if (i > 0 && (ts[i].upper_bound <= ts[i - 1].upper_bound ||
                      ts[i].unit_price >= ts[i - 1].unit_price)) {
          throw SchemaError(std::string("tariff: ") + resource_name(r) +
                            " tiers must have increasing bounds and "
                            "decreasing prices");
        }
      }
    }
  }

  PerResource<std::vector<Tier>> tiers_;
  PricingMode mode_;
};

// Simplified daily rental prices the simulator ships with.
inline Tariff default_tariff(PricingMode mode = PricingMode::kFlat) {
  PerResource<std::vector<Tier>> tiers;
  at(tiers, Resource::kVcpu) = {{10, 0.2}, {30, 0.1}, {90, 0.05}};
  at(tiers, Resource::kRam) = {{20, 0.1}, {60, 0.05}, {180, 0.025}};
  at(tiers, Resource::kStorage) = {{100, 0.02}, {300, 0.01}, {900, 0.005}};
  return Tariff(std::move(tiers), mode);
}

}  // namespace nego

#endif  // NEGO_TARIFF_HPP
