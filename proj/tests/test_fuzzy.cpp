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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "nego/fuzzy.hpp"
#include "nego/rng.hpp"

using namespace nego;

TEST_CASE("triangular membership evaluates piecewise linearly") {
  Triangular t{0.0, 0.5, 1.0};
  CHECK(fuzzify(t, 0.5) == doctest::Approx(1.0));
  CHECK(fuzzify(t, 0.25) == doctest::Approx(0.5));
  CHECK(fuzzify(t, 0.75) == doctest::Approx(0.5));
  CHECK(fuzzify(t, -0.1) == 0.0);
  CHECK(fuzzify(t, 1.1) == 0.0);
  // Shoulders: b == a and b == c evaluate to 1 at the peak.
  CHECK(fuzzify(Triangular{0.0, 0.0, 0.5}, 0.0) == doctest::Approx(1.0));
  CHECK(fuzzify(Triangular{0.5, 1.0, 1.0}, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("3-sigma conversion matches the stated formula") {
  Gaussian g = to_gaussian(Triangular{0.4, 0.7, 1.0});
  CHECK(g.m == doctest::Approx(0.7));
  CHECK(g.sigma == doctest::Approx(0.1));
  CHECK(fuzzify(g, 0.7) == doctest::Approx(1.0));

  Gaussian g2 = to_gaussian(Triangular{0.0, 50.0, 100.0});
  CHECK(g2.m == doctest::Approx(50.0));
  CHECK(g2.sigma == doctest::Approx(16.667).epsilon(1e-4));

  Gaussian g3 = to_gaussian(Triangular{0.25, 0.25, 0.6});
  CHECK(g3.m == doctest::Approx(0.25));
  CHECK(g3.sigma == doctest::Approx(0.35 / 6.0));

  CHECK_THROWS_AS(to_gaussian(Triangular{0.3, 0.3, 0.3}),
                  DegenerateTriangleError);
}

TEST_CASE("crisp inputs follow the ratio definitions") {
  Tariff t = default_tariff(PricingMode::kFlat);

  Bundle same = make_bundle(10, 20, 200);
  CrispInputs ref = crisp_inputs(same, same, t);
  CHECK(ref.vupr == doctest::Approx(1.0));
  CHECK(ref.rupr == doctest::Approx(1.0));
  CHECK(ref.supr == doctest::Approx(1.0));
  CHECK(ref.tpr == doctest::Approx(1.0));

  CrispInputs in = crisp_inputs(make_bundle(5, 10, 50),
                                make_bundle(15, 30, 150), t);
  CHECK(in.vupr == doctest::Approx(0.5));
  CHECK(in.rupr == doctest::Approx(0.5));
  CHECK(in.supr == doctest::Approx(0.5));
  CHECK(in.tpr == doctest::Approx(3.0 / 4.5));
}

TEST_CASE("the calibrated defaults hit the three score anchors") {
  FuzzySystem s = default_fuzzy_system();
  const double reference = tendency_score(s, {1.0, 1.0, 1.0, 1.0});
  const double worst = tendency_score(s, {1.0, 1.0, 1.0, 0.0238});
  const double best = tendency_score(s, {0.389, 0.389, 0.389, 1.0});
  CHECK(std::abs(reference - 50.0) <= 0.5);
  CHECK(std::abs(worst - 14.79) <= 2.0);
  CHECK(std::abs(best - 61.63) <= 2.0);
  CHECK(worst < reference);
  CHECK(best > reference);
}

TEST_CASE("acceptance is an inclusive threshold comparison") {
  CHECK(accept(50.0, 50.0));
  CHECK_FALSE(accept(49.9, 50.0));
  CHECK(accept(61.63, 50.0));
}

TEST_CASE("score is a pure function") {
  FuzzySystem s = default_fuzzy_system();
  CrispInputs in{0.5, 0.5, 0.5, 0.9};
  double a = tendency_score(s, in);
  double b = tendency_score(s, in);
  CHECK(a == b);  // bit-identical
}

TEST_CASE("centroid stays within the output universe") {
  FuzzySystem s = default_fuzzy_system();
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    CrispInputs in{0.25 + 0.75 * rng.next_double(),
                   0.25 + 0.75 * rng.next_double(),
                   0.25 + 0.75 * rng.next_double(), rng.next_double()};
    double score = tendency_score(s, in);
    CHECK(score >= s.tendency_universe.lo);
    CHECK(score <= s.tendency_universe.hi);
  }
}

TEST_CASE("cheaper inputs never lower the score") {
  FuzzySystem s = default_fuzzy_system();
  Rng rng(4242);
  const double kSlack = 1e-9;  // floating-point noise only
  for (int i = 0; i < 400; ++i) {
    CrispInputs in{0.25 + 0.75 * rng.next_double(),
                   0.25 + 0.75 * rng.next_double(),
                   0.25 + 0.75 * rng.next_double(),
                   0.02 + 0.98 * rng.next_double()};
    const double base = tendency_score(s, in);

    // Decreasing any single unit-price ratio keeps the score at least even.
    for (int dim = 0; dim < 3; ++dim) {
      CrispInputs cheaper = in;
      double* v = dim == 0 ? &cheaper.vupr : dim == 1 ? &cheaper.rupr
                                                      : &cheaper.supr;
      *v = 0.25 + (*v - 0.25) * rng.next_double();
      CHECK(tendency_score(s, cheaper) >= base - kSlack);
    }

    // Raising tpr toward 1 (cheaper total) keeps the score at least even.
    CrispInputs better = in;
    better.tpr = in.tpr + (1.0 - in.tpr) * rng.next_double();
    CHECK(tendency_score(s, better) >= base - kSlack);
  }
}

TEST_CASE("rules with TPR-only antecedents ignore the price ratios") {
  FuzzySystem s = default_fuzzy_system();
  s.rules.clear();
  FuzzyRule r;
  r.on(InputVar::kTpr) = "high";
  r.consequent = "low";
  s.rules.push_back(r);
  s.validate();

  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const double tpr = 0.05 + 0.7 * rng.next_double();
    const double a = tendency_score(s, {1.0, 1.0, 1.0, tpr});
    const double b = tendency_score(
        s, {0.25 + 0.75 * rng.next_double(), 0.25 + 0.75 * rng.next_double(),
            0.25 + 0.75 * rng.next_double(), tpr});
    CHECK(a == b);
  }
}

TEST_CASE("triangular and gaussian twins agree on strength ordering at peaks") {
  FuzzySystem tri = default_fuzzy_system(MfKind::kTriangular);
  FuzzySystem gauss = tri.as_gaussian();
  for (const auto* labels : {&tri.unit_labels, &tri.tpr_labels,
                             &tri.tendency_labels}) {
    for (const auto& [name, mf] : *labels) {
      const Triangular& t = std::get<Triangular>(mf);
      const Gaussian g = to_gaussian(t);
      CHECK(fuzzify(t, t.b) == doctest::Approx(1.0));
      CHECK(fuzzify(g, g.m) == doctest::Approx(1.0));
      CHECK(t.b == g.m);
    }
  }
  // At each label's peak, that label dominates the others in both systems.
  for (const auto& [name, mf] : tri.unit_labels) {
    const double peak = std::get<Triangular>(mf).b;
    for (const auto& [other, omf] : tri.unit_labels) {
      if (other == name) continue;
      const auto& gmf = gauss.unit_labels.at(name);
      const auto& gomf = gauss.unit_labels.at(other);
      const bool tri_order = fuzzify(mf, peak) >= fuzzify(omf, peak);
      const bool gauss_order = fuzzify(gmf, peak) >= fuzzify(gomf, peak);
      CHECK(tri_order == gauss_order);
    }
  }
}

TEST_CASE("empty aggregate falls back to the midpoint with a warning") {
  FuzzySystem s = default_fuzzy_system();
  s.rules.clear();
  FuzzyRule r;
  r.on(InputVar::kTpr) = "high";  // support ends well below tpr = 1
  r.consequent = "low";
  s.rules.push_back(r);
  ScoreResult res = s.evaluate({1.0, 1.0, 1.0, 1.0});
  CHECK(res.no_rule_fired);
  CHECK(res.score == doctest::Approx(50.0));

  // The shipped rule set covers the whole TPR universe.
  FuzzySystem full = default_fuzzy_system();
  for (double tpr : {0.001, 0.3, 0.8, 0.95, 1.0, 1.4, 2.0}) {
    CHECK_FALSE(full.evaluate({1.0, 1.0, 1.0, tpr}).no_rule_fired);
  }
}

TEST_CASE("fuzzy system JSON round-trips") {
  FuzzySystem s = default_fuzzy_system();
  FuzzySystem back = FuzzySystem::from_json(s.to_json());
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    CrispInputs in{0.25 + 0.75 * rng.next_double(),
                   0.25 + 0.75 * rng.next_double(),
                   0.25 + 0.75 * rng.next_double(), rng.next_double()};
    CHECK(tendency_score(back, in) == tendency_score(s, in));
  }
  CHECK(back.threshold == s.threshold);
}

TEST_CASE("gaussian systems load via the 3-sigma conversion") {
  FuzzySystem s = default_fuzzy_system();
  nlohmann::json j = s.to_json();
  j["mf_kind"] = "gaussian";
  FuzzySystem g = FuzzySystem::from_json(j);
  CHECK(g.kind == MfKind::kGaussian);
  for (const auto& [name, mf] : g.unit_labels) {
    CHECK(std::holds_alternative<Gaussian>(mf));
  }
  // Reference point stays at the midpoint under the gaussian twin too.
  CHECK(std::abs(tendency_score(g, {1, 1, 1, 1}) - 50.0) <= 0.5);
}

TEST_CASE("schema violations are rejected with clear errors") {
  FuzzySystem s = default_fuzzy_system();

  nlohmann::json j = s.to_json();
  j["rules"][0]["if"]["TPR"] = "nonexistent";
  CHECK_THROWS_AS(FuzzySystem::from_json(j), RuleError);

  j = s.to_json();
  j["variables"].erase("tpr");
  CHECK_THROWS_AS(FuzzySystem::from_json(j), SchemaError);

  j = s.to_json();
  j["rules"][0]["if"]["BOGUS"] = "high";
  CHECK_THROWS_AS(FuzzySystem::from_json(j), SchemaError);

  j = s.to_json();
  j["variables"]["tpr"]["high"] = {{"tri", {0.5, 0.4, 0.3}}};  // unsorted
  CHECK_THROWS_AS(FuzzySystem::from_json(j), SchemaError);

  // A rule with no antecedent at all is invalid.
  FuzzySystem bad = default_fuzzy_system();
  bad.rules.push_back(FuzzyRule{{}, "high"});
  CHECK_THROWS_AS(bad.validate(), RuleError);
}
