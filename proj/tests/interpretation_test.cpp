#include <doctest.h>

#include "potemkin/errors.hpp"
#include "potemkin/interpretation.hpp"
#include "support/test_support.hpp"

using namespace potemkin;
using testsupport::random_concept;

namespace {

ConceptSpec three_instance_concept(std::vector<Bit> f_star_bits,
                                   std::vector<std::vector<Bit>> others) {
  std::vector<Instance> instances = {{"x1", "x1"}, {"x2", "x2"}, {"x3", "x3"}};
  Interpretation f_star{"f_star", std::move(f_star_bits)};
  std::vector<Interpretation> human;
  human.push_back(f_star);
  std::size_t k = 0;
  for (auto& values : others) {
    human.push_back(Interpretation{"g" + std::to_string(k++), std::move(values)});
  }
  return ConceptSpec("c", InstanceSpace(std::move(instances)), std::move(f_star),
                     std::move(human));
}

}  // namespace

TEST_CASE("evaluate returns the stored bit") {
  auto spec = three_instance_concept({1, 1, 1}, {{0, 1, 1}});
  for (const auto& inst : spec.space().instances()) {
    CHECK(evaluate(spec.f_star(), spec.space(), inst.id) == 1);
  }
  const auto& f = spec.human_space()[1];
  CHECK(evaluate(f, spec.space(), "x1") == 0);
  CHECK(evaluate(f, spec.space(), "x2") == 1);
}

TEST_CASE("evaluate rejects unknown instances by name") {
  auto spec = three_instance_concept({1, 0, 1}, {});
  CHECK_THROWS_WITH_AS(evaluate(spec.f_star(), spec.space(), "nope"),
                       doctest::Contains("nope"), UnknownInstanceError);
}

TEST_CASE("evaluate agrees with the raw bit vector on random 8-instance spaces") {
  SplitMix64 rng(0xE11E);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Instance> instances;
    for (std::size_t i = 0; i < 8; ++i) {
      instances.push_back({"x" + std::to_string(i), ""});
    }
    InstanceSpace space(instances);
    auto f = testsupport::random_interpretation(rng, "f", 8);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(evaluate(f, space, instances[i].id) == f.values[i]);
    }
  }
}

TEST_CASE("disagreement_set is empty iff the interpretation equals f_star") {
  auto spec = three_instance_concept({1, 1, 1}, {{1, 0, 1}});
  CHECK(disagreement_set(spec.f_star(), spec).empty());

  auto d = disagreement_set(spec.human_space()[1], spec);
  CHECK(d.instance_ids(spec.space()) == std::vector<std::string>{"x2"});
}

TEST_CASE("disagreement_set rejects dimension mismatches") {
  auto spec = three_instance_concept({1, 1, 1}, {});
  Interpretation wrong{"w", {1, 0}};
  CHECK_THROWS_AS(disagreement_set(wrong, spec), DimensionMismatchError);
}

TEST_CASE("disagreement_set matches per-index comparison on random concepts") {
  SplitMix64 rng(0xD15A);
  for (int trial = 0; trial < 200; ++trial) {
    auto spec = random_concept(rng, /*max_n=*/10, /*max_extra=*/6);
    for (const auto& f : spec.human_space()) {
      auto d = disagreement_set(f, spec);
      std::vector<std::size_t> expected;
      for (std::size_t i = 0; i < spec.space().size(); ++i) {
        if (f.values[i] != spec.f_star().values[i]) expected.push_back(i);
      }
      CHECK(d.instance_indices == expected);
      CHECK(d.empty() == (f.values == spec.f_star().values));
    }
  }
}

TEST_CASE("is_distinguishing trivial cases") {
  auto lone = three_instance_concept({1, 1, 1}, {});
  CHECK(is_distinguishing({}, lone));

  auto spec = three_instance_concept({1, 1, 1}, {{1, 1, 0}});  // D_g = {x3}
  CHECK(is_distinguishing_ids({"x3"}, spec));
  CHECK_FALSE(is_distinguishing_ids({"x1"}, spec));
}

TEST_CASE("is_distinguishing matches brute force over all interpretations") {
  SplitMix64 rng(0x0D15);
  for (int trial = 0; trial < 300; ++trial) {
    auto spec = random_concept(rng);
    const std::size_t n = spec.space().size();
    const auto sets = testsupport::disagreement_masks(spec);
    const std::uint64_t subset_mask = rng.next_u64() & ((1ULL << n) - 1);
    const auto subset = testsupport::mask_to_indices(subset_mask);
    CHECK(is_distinguishing(subset, spec) ==
          testsupport::mask_hits_all(subset_mask, sets));
  }
}

TEST_CASE("is_distinguishing is monotone under supersets") {
  SplitMix64 rng(0x3050);
  for (int trial = 0; trial < 200; ++trial) {
    auto spec = random_concept(rng, 10, 10);
    const std::size_t n = spec.space().size();
    const std::uint64_t small = rng.next_u64() & ((1ULL << n) - 1);
    const std::uint64_t large = small | (rng.next_u64() & ((1ULL << n) - 1));
    if (is_distinguishing(testsupport::mask_to_indices(small), spec)) {
      CHECK(is_distinguishing(testsupport::mask_to_indices(large), spec));
    }
  }
}

TEST_CASE("the full instance space is always distinguishing after dedupe") {
  SplitMix64 rng(0xF011);
  for (int trial = 0; trial < 100; ++trial) {
    auto spec = random_concept(rng);
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < spec.space().size(); ++i) all.push_back(i);
    CHECK(is_distinguishing(all, spec));
  }
}

TEST_CASE("is_keystone trivial cases") {
  auto lone = three_instance_concept({1, 1, 1}, {});
  CHECK(is_keystone({}, lone));

  // Two misinterpretations with disjoint disagreement sets {x1} and {x2}.
  auto spec = three_instance_concept({1, 1, 1}, {{0, 1, 1}, {1, 0, 1}});
  CHECK(is_keystone_ids({"x1", "x2"}, spec));
  CHECK_FALSE(is_keystone_ids({"x1", "x2", "x3"}, spec));  // not minimal
  CHECK_FALSE(is_keystone_ids({"x1"}, spec));              // not distinguishing
}

TEST_CASE("single-removal minimality agrees with full subset enumeration for small sets") {
  SplitMix64 rng(0x5EED);
  int checked = 0;
  while (checked < 300) {
    auto spec = random_concept(rng, 10, 12);
    const std::size_t n = spec.space().size();
    const std::uint64_t subset_mask = rng.next_u64() & ((1ULL << n) - 1);
    if (__builtin_popcountll(subset_mask) > 6) continue;
    ++checked;
    const auto subset = testsupport::mask_to_indices(subset_mask);
    const auto sets = testsupport::disagreement_masks(spec);

    // Full proper-subset enumeration, no monotonicity shortcut.
    bool brute = testsupport::mask_hits_all(subset_mask, sets);
    if (brute && subset_mask != 0) {
      for (std::uint64_t proper = (subset_mask - 1) & subset_mask;;
           proper = (proper - 1) & subset_mask) {
        if (testsupport::mask_hits_all(proper, sets)) {
          brute = false;
          break;
        }
        if (proper == 0) break;
      }
    }
    CHECK(is_keystone(subset, spec) == brute);
  }
}

TEST_CASE("concept construction dedupes human space and requires f_star") {
  std::vector<Instance> instances = {{"x1", ""}, {"x2", ""}};
  Interpretation f_star{"f_star", {1, 1}};
  SUBCASE("duplicates are dropped silently") {
    std::vector<Interpretation> human = {f_star,
                                         {"g", {0, 1}},
                                         {"g_dup", {0, 1}},
                                         {"star_dup", {1, 1}}};
    ConceptSpec spec("c", InstanceSpace(instances), f_star, human);
    CHECK(spec.human_space().size() == 2);
    CHECK(spec.duplicates_dropped() == 2);
  }
  SUBCASE("f_star absent from human space is an error") {
    std::vector<Interpretation> human = {{"g", {0, 1}}};
    CHECK_THROWS_AS(ConceptSpec("c", InstanceSpace(instances), f_star, human),
                    SchemaError);
  }
  SUBCASE("non-bit values are rejected") {
    Interpretation bad{"b", {1, 2}};
    CHECK_THROWS_AS(ConceptSpec("c", InstanceSpace(instances), f_star, {f_star, bad}),
                    SchemaError);
  }
  SUBCASE("duplicate instance ids are rejected") {
    CHECK_THROWS_AS(InstanceSpace({{"x1", ""}, {"x1", ""}}), SchemaError);
  }
  SUBCASE("empty instance space is rejected") {
    CHECK_THROWS_AS(InstanceSpace({}), SchemaError);
  }
}

TEST_CASE("concept spec documents round-trip") {
  const std::string text = R"({
    "concept_id": "slant",
    "instances": [{"id": "x1", "text": "a"}, {"id": "x2", "text": "b"}],
    "f_star": [1, 0],
    "human_space": [
      {"id": "f_star", "values": [1, 0]},
      {"id": "g", "values": [1, 1]}
    ],
    "llm_space": [{"id": "l0", "values": [0, 0]}]
  })";
  auto spec = ConceptSpec::from_json_text(text);
  CHECK(spec.concept_id() == "slant");
  CHECK(spec.human_space().size() == 2);
  CHECK(spec.llm_space().size() == 1);

  auto again = ConceptSpec::from_json_text(spec.to_json_text());
  CHECK(again.to_json_text() == spec.to_json_text());
}

TEST_CASE("concept spec documents report field paths on schema errors") {
  CHECK_THROWS_WITH_AS(
      ConceptSpec::from_json_text(
          R"({"instances": [], "f_star": [], "human_space": []})"),
      doctest::Contains("instances"), SchemaError);
  CHECK_THROWS_WITH_AS(
      ConceptSpec::from_json_text(
          R"({"instances": [{"id": "x"}], "f_star": [2], "human_space": []})"),
      doctest::Contains("f_star"), SchemaError);
}
