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

#ifndef NEGO_EXPERIMENTS_HPP
#define NEGO_EXPERIMENTS_HPP

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "nego/negotiation.hpp"

namespace nego {

class ExhaustedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Provenance {
  enum class Kind { kGenerated, kLoaded } kind = Kind::kGenerated;
  std::uint64_t seed = 0;
  std::size_t size = 0;
  std::string path;
};

// An ordered batch of requirement bundles, cheapest flat total first.
struct Dataset {
  std::vector<Bundle> records;
  Provenance provenance;
};

namespace detail {

inline std::uint64_t bundle_key(const Bundle& b) {
  return (static_cast<std::uint64_t>(b[Resource::kVcpu]) << 40) |
         (static_cast<std::uint64_t>(b[Resource::kRam]) << 20) |
         static_cast<std::uint64_t>(b[Resource::kStorage]);
}

inline void sort_by_total(std::vector<Bundle>& records, const Tariff& tariff) {
  const Tariff flat = tariff.with_mode(PricingMode::kFlat);
  std::stable_sort(records.begin(), records.end(),
                   [&](const Bundle& a, const Bundle& b) {
                     double ta = flat.total_price(a);
                     double tb = flat.total_price(b);
                     if (ta != tb) return ta < tb;
                     return bundle_key(a) < bundle_key(b);
                   });
}

}  // namespace detail

// Draws n distinct bundles uniformly over the rentable ranges (storage on a
// 10 GB grid), sorted by flat total fee. An exclusion set carves out records
// already claimed by another dataset so train and test never overlap.
inline Dataset generate_dataset(std::size_t n, std::uint64_t seed,
                                const Tariff& tariff,
                                const std::vector<Bundle>& exclude = {}) {
  if (n < 1) throw ExhaustedError("dataset size must be >= 1");
  const int vcpu_max = tariff.top_bound(Resource::kVcpu);
  const int ram_max = tariff.top_bound(Resource::kRam);
  const int storage_steps = tariff.top_bound(Resource::kStorage) / 10;
  const std::uint64_t space = static_cast<std::uint64_t>(vcpu_max) * ram_max *
                              storage_steps;

  std::set<std::uint64_t> taken;
  for (const Bundle& b : exclude) taken.insert(detail::bundle_key(b));
  if (n > space - std::min<std::uint64_t>(taken.size(), space)) {
    throw ExhaustedError("sample space cannot provide " + std::to_string(n) +
                         " distinct records");
  }

  Rng rng(seed);
  Dataset ds;
  ds.records.reserve(n);
  std::uint64_t attempts = 0;
  const std::uint64_t max_attempts = 64 * (n + 16);
  while (ds.records.size() < n) {
    if (++attempts > max_attempts) {
      throw ExhaustedError("sampling stalled before reaching " +
                           std::to_string(n) + " records");
    }
    Bundle b = make_bundle(
        static_cast<int>(rng.next_int(1, vcpu_max)),
        static_cast<int>(rng.next_int(1, ram_max)),
        static_cast<int>(rng.next_int(1, storage_steps)) * 10);
    if (taken.insert(detail::bundle_key(b)).second) ds.records.push_back(b);
  }
  detail::sort_by_total(ds.records, tariff);
  ds.provenance = {Provenance::Kind::kGenerated, seed, n, ""};
  return ds;
}

// A requirement has bargaining room only if some resource sits below the top
// tier bound, where the first offer can still grow it.
inline bool negotiable(const Bundle& b, const Tariff& tariff) {
  for (Resource r : kResources) {
    if (b[r] <= tariff.bound_2_3(r)) return true;
  }
  return false;
}

struct RecordResult {
  std::size_t index = 0;
  Bundle original;
  Bundle final;
  int rounds = 0;
  bool accepted = false;
  bool negotiable = false;
  double fee_ratio = 1.0;
  bool success = false;
};

struct BatchReport {
  std::vector<RecordResult> records;
  double success_rate = 0.0;
  double avg_fee_ratio = 1.0;
  std::size_t negotiable_count = 0;
  double success_rate_negotiable = 0.0;
  double avg_fee_ratio_negotiable = 1.0;
};

// Runs one negotiation per record. Record i uses the stream derived from
// (config.seed, i), so results do not depend on worker count or order.
inline BatchReport run_batch(const Dataset& dataset, const Tariff& tariff,
                             const FuzzySystem& fuzzy,
                             const NegotiationConfig& config,
                             unsigned workers = 1) {
  config.validate();
  BatchReport report;
  report.records.resize(dataset.records.size());

  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Bundle& original = dataset.records[i];
      NegotiationConfig per_record = config;
      per_record.seed = derive_seed(config.seed, i);
      Outcome out = negotiate(original, tariff, fuzzy, per_record);
      RecordResult& rr = report.records[i];
      rr.index = i;
      rr.original = original;
      rr.final = out.final;
      rr.rounds = out.rounds;
      rr.accepted = out.accepted;
      rr.negotiable = negotiable(original, tariff);
      rr.fee_ratio = out.fee_ratio;
      rr.success = out.success();
    }
  };

  const std::size_t n = dataset.records.size();
  if (workers <= 1 || n < 2) {
    run_range(0, n);
  } else {
    workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      std::size_t begin = w * chunk;
      std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(run_range, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  double fee_sum = 0.0;
  double fee_sum_neg = 0.0;
  std::size_t successes = 0;
  std::size_t successes_neg = 0;
  for (const RecordResult& rr : report.records) {
    fee_sum += rr.fee_ratio;
    successes += rr.success ? 1 : 0;
    if (rr.negotiable) {
      ++report.negotiable_count;
      fee_sum_neg += rr.fee_ratio;
      successes_neg += rr.success ? 1 : 0;
    }
  }
  if (n > 0) {
    report.success_rate = static_cast<double>(successes) / n;
    report.avg_fee_ratio = fee_sum / n;
  }
  if (report.negotiable_count > 0) {
    report.success_rate_negotiable =
        static_cast<double>(successes_neg) / report.negotiable_count;
    report.avg_fee_ratio_negotiable = fee_sum_neg / report.negotiable_count;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Membership calibration
// ---------------------------------------------------------------------------

struct Anchor {
  CrispInputs inputs;
  double target = 50.0;
};

struct CalibrationResult {
  FuzzySystem system;
  std::vector<double> residuals;  // |score - target| per anchor
  double sse = 0.0;
  bool budget_exhausted = false;
};

namespace detail {

inline std::vector<Triangular*> triangle_slots(FuzzySystem& s) {
  std::vector<Triangular*> slots;
  for (LabelMap* m : {&s.unit_labels, &s.tpr_labels, &s.tendency_labels}) {
    for (auto& [name, mf] : *m) {
      if (auto* tri = std::get_if<Triangular>(&mf)) slots.push_back(tri);
    }
  }
  return slots;
}

inline bool peaks_ordered(const FuzzySystem& a, const FuzzySystem& b) {
  auto peaks = [](const FuzzySystem& s) {
    std::vector<std::pair<std::string, double>> ps;
    for (const LabelMap* m :
         {&s.unit_labels, &s.tpr_labels, &s.tendency_labels}) {
      for (const auto& [name, mf] : *m) {
        if (const auto* tri = std::get_if<Triangular>(&mf)) {
          ps.emplace_back(name, tri->b);
        }
      }
    }
    return ps;
  };
  auto pa = peaks(a);
  auto pb = peaks(b);
  // Label-by-label: relative peak order inside each variable must survive.
  // Both maps iterate in the same (sorted) order, so pairwise comparison of
  // same-variable entries is enough.
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = i + 1; j < pa.size(); ++j) {
      bool before_a = pa[i].second <= pa[j].second;
      bool before_b = pb[i].second <= pb[j].second;
      if (before_a != before_b) return false;
    }
  }
  return true;
}

inline double anchor_sse(const FuzzySystem& s, const std::vector<Anchor>& as) {
  double sse = 0.0;
  for (const Anchor& a : as) {
    double d = tendency_score(s, a.inputs) - a.target;
    sse += d * d;
  }
  return sse;
}

}  // namespace detail

// Randomized local search over triangular breakpoints. Keeps each triangle
// ordered and inside its universe and rejects moves that reorder label peaks.
// Budget counts candidate evaluations; with zero budget the starting system
// comes back untouched.
inline CalibrationResult calibrate_membership(
    const std::vector<Anchor>& anchors, std::size_t search_budget,
    std::uint64_t seed, const FuzzySystem& start = default_fuzzy_system(),
    double target_residual = 2.0) {
  if (anchors.empty()) throw std::invalid_argument("no anchors given");

  Rng rng(seed);
  CalibrationResult best{start, {}, detail::anchor_sse(start, anchors), false};

  for (std::size_t it = 0; it < search_budget; ++it) {
    FuzzySystem candidate = best.system;
    auto slots = detail::triangle_slots(candidate);
    if (slots.empty()) break;
    // Cooling schedule: wide early moves, fine late ones.
    const double scale =
        0.25 * (1.0 - static_cast<double>(it) / search_budget) + 0.01;
    const std::size_t moves = 1 + rng.next_below(3);
    for (std::size_t m = 0; m < moves; ++m) {
      Triangular* tri = slots[rng.next_below(slots.size())];
      const bool is_tendency = tri->c > 2.5;  // tendency spans [0, 100]
      const double width = is_tendency ? 100.0 : 1.0;
      double* coord = (&tri->a) + rng.next_below(3);
      *coord += (rng.next_double() * 2.0 - 1.0) * scale * width;
      // Re-impose a <= b <= c by sorting the triple.
      std::array<double, 3> t{tri->a, tri->b, tri->c};
      std::sort(t.begin(), t.end());
      tri->a = t[0];
      tri->b = t[1];
      tri->c = t[2];
    }
    if (!detail::peaks_ordered(best.system, candidate)) continue;
    double sse = detail::anchor_sse(candidate, anchors);
    if (sse < best.sse) {
      best.system = std::move(candidate);
      best.sse = sse;
    }
  }

  best.residuals.clear();
  bool all_within = true;
  for (const Anchor& a : anchors) {
    double r = std::abs(tendency_score(best.system, a.inputs) - a.target);
    best.residuals.push_back(r);
    if (r > target_residual) all_within = false;
  }
  best.budget_exhausted = !all_within;
  return best;
}

// ---------------------------------------------------------------------------
// CSV / JSON persistence
// ---------------------------------------------------------------------------

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string dataset_to_csv(const Dataset& ds) {
  std::string csv = "vcpu,ram_gb,storage_gb\n";
  char line[64];
  for (const Bundle& b : ds.records) {
    std::snprintf(line, sizeof(line), "%d,%d,%d\n", b[Resource::kVcpu],
                  b[Resource::kRam], b[Resource::kStorage]);
    csv += line;
  }
  return csv;
}

inline void export_dataset(const Dataset& ds, const std::string& path) {
  write_file(path, dataset_to_csv(ds));
}

inline Dataset import_dataset(const std::string& path, const Tariff& tariff) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Dataset ds;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    if (row == 1) {
      if (line != "vcpu,ram_gb,storage_gb") {
        throw SchemaError(path + ": unexpected header '" + line + "'");
      }
      continue;
    }
    int v = 0, r = 0, s = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%d", &v, &r, &s) != 3) {
      throw SchemaError(path + ": row " + std::to_string(row) +
                        " is not three integers");
    }
    Bundle b = make_bundle(v, r, s);
    if (!tariff.valid_bundle(b)) {
      throw SchemaError(path + ": row " + std::to_string(row) +
                        " is outside the rentable ranges");
    }
    ds.records.push_back(b);
  }
  ds.provenance = {Provenance::Kind::kLoaded, 0, ds.records.size(), path};
  return ds;
}

inline std::string report_to_csv(const BatchReport& report) {
  std::string csv =
      "index,vcpu,ram_gb,storage_gb,final_vcpu,final_ram_gb,final_storage_gb,"
      "rounds,accepted,fee_ratio\n";
  char line[160];
  for (const RecordResult& rr : report.records) {
    std::snprintf(line, sizeof(line), "%zu,%d,%d,%d,%d,%d,%d,%d,%d,%.6f\n",
                  rr.index, rr.original[Resource::kVcpu],
                  rr.original[Resource::kRam], rr.original[Resource::kStorage],
                  rr.final[Resource::kVcpu], rr.final[Resource::kRam],
                  rr.final[Resource::kStorage], rr.rounds,
                  rr.accepted ? 1 : 0, rr.fee_ratio);
    csv += line;
  }
  return csv;
}

inline nlohmann::json report_aggregates_json(const BatchReport& report) {
  return nlohmann::json{
      {"records", report.records.size()},
      {"success_rate", report.success_rate},
      {"avg_fee_ratio", report.avg_fee_ratio},
      {"negotiable_count", report.negotiable_count},
      {"success_rate_negotiable", report.success_rate_negotiable},
      {"avg_fee_ratio_negotiable", report.avg_fee_ratio_negotiable},
  };
}

inline void export_report(const BatchReport& report, const std::string& path,
                          const std::string& aggregate_path) {
  write_file(path, report_to_csv(report));
  write_file(aggregate_path, report_aggregates_json(report).dump(2) + "\n");
}

}  // namespace nego

#endif  // NEGO_EXPERIMENTS_HPP
