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

#ifndef NEGO_NEGOTIATION_HPP
#define NEGO_NEGOTIATION_HPP

#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nego/fuzzy.hpp"
#include "nego/rng.hpp"
#include "nego/tariff.hpp"

namespace nego {

class ConfigMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Information exchanged per round, from least to most:
//   Case 1 - accept / reject only.
//   Case 2 - adds advice (which resource to shrink).
//   Case 3 - adds upfront per-resource priorities.
enum class Case : int { kCase1 = 1, kCase2 = 2, kCase3 = 3 };

// Client hint after a rejection: shrink a specific resource, or anything.
struct Advice {
  std::optional<Resource> reduce;  // nullopt means "random"

  bool is_random() const { return !reduce.has_value(); }
  static Advice random() { return Advice{std::nullopt}; }
  static Advice reduce_resource(Resource r) { return Advice{r}; }
  bool operator==(const Advice&) const = default;
};

struct NegotiationConfig {
  Case negotiation_case = Case::kCase1;
  double d_max = 1.5;
  PerResource<int> steps{1, 1, 10};
  std::optional<PerResource<double>> priorities;  // Case 3 only
  double threshold = 50.0;
  int max_rounds = 10000;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(d_max > 1.0)) {
      throw ConfigMismatchError("d_max must be > 1");
    }
    for (Resource r : kResources) {
      if (at(steps, r) < 1) {
        throw ConfigMismatchError("step sizes must be >= 1");
      }
    }
    if (priorities) {
      if (negotiation_case != Case::kCase3) {
        throw ConfigMismatchError("priorities are only valid in case 3");
      }
      for (Resource r : kResources) {
        if (!(at(*priorities, r) >= 1.0)) {
          throw ConfigMismatchError("priorities must be >= 1");
        }
      }
    }
    if (max_rounds < 1) {
      throw ConfigMismatchError("max_rounds must be >= 1");
    }
  }
};

struct TraceEntry {
  int round = 0;
  Bundle offer;
  double score = 0.0;
  std::optional<Advice> advice;  // set on rejected rounds in cases 2 and 3
};

struct Outcome {
  Bundle final;
  bool accepted = false;
  int rounds = 0;
  double fee_ratio = 1.0;  // final total / original total
  std::vector<TraceEntry> trace;

  // A deal only counts when the provider actually rents out more.
  bool success() const { return accepted && fee_ratio > 1.0; }
};

// First offer: enlarge every quantity far enough to land one price tier
// lower, pinned by the first two tier bounds. Quantities already in the top
// tier have no cheaper tier to reach and stay put.
inline Bundle first_offer(const Bundle& original, const Tariff& tariff) {
  tariff.check_bundle(original);
  Bundle offer = original;
  for (Resource r : kResources) {
    const int n0 = original[r];
    const int t12 = tariff.bound_1_2(r);
    const int t23 = tariff.bound_2_3(r);
    if (n0 <= t12) {
      offer[r] = n0 + t12;
    } else if (n0 <= t23) {
      offer[r] = n0 + t23;
    }
  }
  return offer;
}

// Client-side advice: when the offer's per-resource growth ratios deviate
// more than d_max, name the most over-grown resource; otherwise leave the
// choice to the provider. Ties go to VCPU, then RAM, then storage.
inline Advice advise(const Bundle& original, const Bundle& current,
                     double d_max) {
  PerResource<double> ratio{};
  for (Resource r : kResources) {
    at(ratio, r) = static_cast<double>(current[r]) / original[r];
  }
  double r_min = at(ratio, Resource::kVcpu);
  double r_max = at(ratio, Resource::kVcpu);
  Resource arg_max = Resource::kVcpu;
  for (Resource r : kResources) {
    double v = at(ratio, r);
    r_min = std::min(r_min, v);
    if (v > r_max) {
      r_max = v;
      arg_max = r;
    }
  }
  if (r_max / r_min < d_max) return Advice::random();
  return Advice::reduce_resource(arg_max);
}

// Per-round pick probabilities. Each resource weighs in with the number of
// rounds it would take to walk its whole original quantity back at its step
// size; priorities shrink that weight so prized resources get cut less.
inline PerResource<double> reduction_probabilities(
    const Bundle& original, const PerResource<int>& steps,
    const std::optional<PerResource<double>>& priorities = std::nullopt) {
  PerResource<double> rd{};
  double total = 0.0;
  for (Resource r : kResources) {
    double rounds = static_cast<double>(original[r]) / at(steps, r);
    if (priorities) rounds /= at(*priorities, r);
    at(rd, r) = rounds;
    total += rounds;
  }
  for (Resource r : kResources) at(rd, r) /= total;
  return rd;
}

// Provider-side pick: follow explicit advice, otherwise sample the
// categorical distribution with the caller's stream.
inline Resource select_reduction(const std::optional<Advice>& advice,
                                 const PerResource<double>& probabilities,
                                 Rng& rng) {
  if (advice && advice->reduce) return *advice->reduce;
  std::size_t i = rng.next_categorical(
      std::span<const double>(probabilities.data(), probabilities.size()));
  return kResources[i];
}

// Full negotiation loop. Pure in its arguments: the rng is seeded from the
// config, so identical inputs give identical outcomes, trace included.
inline Outcome negotiate(const Bundle& original, const Tariff& tariff,
                         const FuzzySystem& fuzzy,
                         const NegotiationConfig& config) {
  config.validate();
  tariff.check_bundle(original);

  const bool uses_advice = config.negotiation_case != Case::kCase1;
  const auto priorities = config.negotiation_case == Case::kCase3
                              ? config.priorities
                              : std::nullopt;
  const PerResource<double> base_probs =
      reduction_probabilities(original, config.steps, priorities);

  Rng rng(config.seed);
  Outcome out;
  Bundle offer = first_offer(original, tariff);
  const double original_total = tariff.total_price(original);
  int round = 0;

  for (;;) {
    if (offer == original) {
      // The provider has nothing left beyond the bare requirement; the
      // negotiation failed and the client keeps its original plan.
      out.accepted = false;
      break;
    }
    const double score =
        tendency_score(fuzzy, crisp_inputs(original, offer, tariff));
    if (accept(score, config.threshold)) {
      out.trace.push_back({round, offer, score, std::nullopt});
      out.accepted = true;
      break;
    }
    if (round >= config.max_rounds) {
      out.trace.push_back({round, offer, score, std::nullopt});
      out.accepted = false;
      break;
    }

    std::optional<Advice> advice;
    if (uses_advice) advice = advise(original, offer, config.d_max);
    out.trace.push_back({round, offer, score, advice});

    // Resources already walked back to the requirement are out of play;
    // renormalizing over the rest keeps every round an actual reduction.
    // Named advice always targets a growth ratio above 1, so its resource
    // is never at the floor.
    PerResource<double> weights = base_probs;
    double live = 0.0;
    for (Resource r : kResources) {
      if (offer[r] <= original[r]) at(weights, r) = 0.0;
      live += at(weights, r);
    }
    if (live <= 0.0) {
      out.accepted = false;
      break;
    }
    Resource pick = select_reduction(advice, weights, rng);
    offer[pick] = std::max(offer[pick] - at(config.steps, pick), original[pick]);
    ++round;
  }

  out.final = offer;
  out.rounds = round;
  out.fee_ratio = tariff.total_price(offer) / original_total;
  return out;
}

inline std::string advice_label(const std::optional<Advice>& a) {
  if (!a) return "";
  if (a->is_random()) return "random";
  return resource_name(*a->reduce);
}

inline std::string trace_to_csv(const Outcome& outcome) {
  std::string csv = "round,vcpu,ram,storage,score,advice\n";
  char line[160];
  for (const TraceEntry& e : outcome.trace) {
    std::snprintf(line, sizeof(line), "%d,%d,%d,%d,%.6f,%s\n", e.round,
                  e.offer[Resource::kVcpu], e.offer[Resource::kRam],
                  e.offer[Resource::kStorage], e.score,
                  advice_label(e.advice).c_str());
    csv += line;
  }
  return csv;
}

}  // namespace nego

#endif  // NEGO_NEGOTIATION_HPP
