#include <doctest.h>

#include "potemkin/dataset.hpp"
#include "potemkin/errors.hpp"
#include "potemkin/pipelines.hpp"
#include "support/test_support.hpp"

using namespace potemkin;
using nlohmann::json;

namespace {

Dataset sample_dataset() {
  return Dataset::load(testsupport::fixture_dir() / "datasets" /
                       "sample_dataset.json");
}

}  // namespace

TEST_CASE("the shipped sample dataset loads with zero errors") {
  auto dataset = sample_dataset();
  CHECK(dataset.concepts().size() == 3);
  CHECK(dataset.items().size() == 27);
  CHECK_FALSE(dataset.source_digest().empty());

  const auto& haiku = dataset.concept_by_id("haiku");
  CHECK(haiku.domain == Domain::literary);
  CHECK(dataset.items_for("haiku", TaskKind::classify).size() == 6);
  CHECK(dataset.items_for("haiku", TaskKind::define).size() == 1);

  SUBCASE("classify items carry chance accuracy 0.5 and the ANSWER tag") {
    for (const auto& item : dataset.items()) {
      if (item.kind == TaskKind::classify) {
        CHECK(item.chance_accuracy == 0.5);
        CHECK(*item.answer_tag == "ANSWER:");
      } else {
        CHECK(item.chance_accuracy == 0.0);
      }
    }
  }
  SUBCASE("grader resolution") {
    const auto& gate = *dataset.items_for("haiku", TaskKind::define).front();
    CHECK(dataset.grader_for(gate).kind == GraderKind::judge_model);
    const auto& gen = *dataset.items_for("haiku", TaskKind::generate).front();
    CHECK(dataset.grader_for(gen).name == "haiku_syllables");
  }
}

TEST_CASE("dataset load round-trips structurally") {
  auto dataset = sample_dataset();
  auto doc = dataset.to_json();
  auto again = Dataset::from_json(doc, "<roundtrip>");
  CHECK(again.to_json() == doc);
}

TEST_CASE("dataset schema violations carry field paths") {
  json doc = {{"concepts", json::array()},
              {"items", json::array()},
              {"graders", json::object()}};

  SUBCASE("dangling concept reference names the id") {
    doc["items"].push_back({{"item_id", "i1"},
                            {"concept_id", "ghost"},
                            {"kind", "classify"},
                            {"prompt", "p"}});
    CHECK_THROWS_WITH_AS(Dataset::from_json(doc, "<t>"), doctest::Contains("ghost"),
                         DanglingReferenceError);
  }
  SUBCASE("classify chance accuracy is pinned to 0.5") {
    doc["concepts"].push_back({{"concept_id", "c"},
                               {"domain", "other"},
                               {"name", "c"},
                               {"reference_definition", "d"}});
    doc["graders"]["default.classify"] = {{"kind", "exact_label"}};
    doc["items"].push_back({{"item_id", "i1"},
                            {"concept_id", "c"},
                            {"kind", "classify"},
                            {"prompt", "p"},
                            {"chance_accuracy", 0.25}});
    CHECK_THROWS_WITH_AS(Dataset::from_json(doc, "<t>"),
                         doctest::Contains("chance_accuracy"), SchemaError);
  }
  SUBCASE("items need a resolvable grader") {
    doc["concepts"].push_back({{"concept_id", "c"},
                               {"domain", "other"},
                               {"name", "c"},
                               {"reference_definition", "d"}});
    doc["items"].push_back({{"item_id", "i1"},
                            {"concept_id", "c"},
                            {"kind", "edit"},
                            {"prompt", "p"}});
    CHECK_THROWS_WITH_AS(Dataset::from_json(doc, "<t>"),
                         doctest::Contains("default.edit"), DanglingReferenceError);
  }
  SUBCASE("duplicate item ids are rejected") {
    doc["concepts"].push_back({{"concept_id", "c"},
                               {"domain", "other"},
                               {"name", "c"},
                               {"reference_definition", "d"}});
    doc["graders"]["default.classify"] = {{"kind", "exact_label"}};
    for (int i = 0; i < 2; ++i) {
      doc["items"].push_back({{"item_id", "dup"},
                              {"concept_id", "c"},
                              {"kind", "classify"},
                              {"prompt", "p"}});
    }
    CHECK_THROWS_WITH_AS(Dataset::from_json(doc, "<t>"), doctest::Contains("dup"),
                         SchemaError);
  }
}

TEST_CASE("exact-label grading normalizes case, whitespace, and punctuation") {
  auto dataset = sample_dataset();
  const auto& item = *dataset.items_for("haiku", TaskKind::classify).front();
  const auto& grader = dataset.grader_for(item);

  auto verdict = [&](const std::string& response) {
    return grade(dataset, item, response, grader, "m").verdict;
  };
  CHECK(verdict("thinking...\nANSWER: yes") == Verdict::correct);
  CHECK(verdict("ANSWER:  Yes.") == Verdict::correct);
  CHECK(verdict("ANSWER: no") == Verdict::incorrect);
  CHECK(verdict("I think it is a haiku") == Verdict::excluded);  // missing tag
  CHECK(verdict("ANSWER: yes ANSWER: no") == Verdict::incorrect);  // last tag wins
}

TEST_CASE("haiku syllable checking grades 5-7-5 against 5-8-5") {
  auto dataset = sample_dataset();
  const auto& item = *dataset.items_for("haiku", TaskKind::generate).front();
  const auto& grader = dataset.grader_for(item);

  const std::string good =
      "ANSWER: An old silent pond\nA frog jumps into the pond\nSplash! Silence again";
  const std::string bad =
      "ANSWER: An old silent pond\nA frog jumps into the cold pond\nSplash! Silence again";
  CHECK(grade(dataset, item, good, grader, "m").verdict == Verdict::correct);
  CHECK(grade(dataset, item, bad, grader, "m").verdict == Verdict::incorrect);

  SUBCASE("syllable counts verified by hand") {
    CHECK(count_syllables("An old silent pond") == 5);
    CHECK(count_syllables("A frog jumps into the pond") == 7);
    CHECK(count_syllables("A frog jumps into the cold pond") == 8);
    CHECK(count_syllables("Splash! Silence again") == 5);
  }
}

TEST_CASE("payoff-matrix checking validates game properties") {
  auto dataset = sample_dataset();
  const auto& gen = *dataset.items_for("strict_dominance", TaskKind::generate).front();
  const auto& edit = *dataset.items_for("strict_dominance", TaskKind::edit).front();
  const auto& grader = dataset.grader_for(gen);

  CHECK(grade(dataset, gen, "ANSWER: [[[5,1],[4,0]],[[2,3],[1,2]]]", grader, "m").verdict ==
        Verdict::correct);
  CHECK(grade(dataset, gen, "ANSWER: [[[5,1],[1,0]],[[2,3],[1,2]]]", grader, "m").verdict ==
        Verdict::incorrect);  // ties in column 2 break strictness
  CHECK(grade(dataset, gen, "ANSWER: not a matrix", grader, "m").verdict ==
        Verdict::incorrect);

  CHECK(grade(dataset, edit, "ANSWER: [[[1,-1],[0,0]],[[2,-2],[-3,3]]]", grader, "m").verdict ==
        Verdict::correct);
  CHECK(grade(dataset, edit, "ANSWER: [[[1,-1],[0,1]],[[2,-2],[-3,3]]]", grader, "m").verdict ==
        Verdict::incorrect);
}

TEST_CASE("pattern-match grading") {
  auto dataset = sample_dataset();
  auto doc = dataset.to_json();
  doc["graders"]["regex"] = {{"kind", "pattern_match"},
                             {"config", {{"pattern", "^yes"}}}};
  auto with_regex = Dataset::from_json(doc, "<t>");
  const auto& item = *with_regex.items_for("haiku", TaskKind::classify).front();
  const auto& grader = with_regex.graders().at("regex");
  CHECK(grade(with_regex, item, "ANSWER: yes indeed", grader, "m").verdict ==
        Verdict::correct);
  CHECK(grade(with_regex, item, "ANSWER: maybe yes", grader, "m").verdict ==
        Verdict::incorrect);
}

TEST_CASE("judge-model grading maps verdicts and excludes malformed judges") {
  auto dataset = sample_dataset();
  const auto& gate = *dataset.items_for("haiku", TaskKind::define).front();
  const auto& grader = dataset.grader_for(gate);

  auto judged_with = [&](const std::string& judge_reply) {
    auto backend = testsupport::fn_backend(
        [judge_reply](const CompletionRequest&) { return judge_reply; });
    ModelOracle oracle(backend, nullptr);
    GradeContext context;
    context.judge_oracle = &oracle;
    return grade(dataset, gate, "A three-line 5-7-5 poem.", grader, "m", context).verdict;
  };
  CHECK(judged_with("FINAL ANSWER: correct") == Verdict::correct);
  CHECK(judged_with("FINAL ANSWER: Incorrect.") == Verdict::incorrect);
  CHECK(judged_with("FINAL ANSWER: shrug") == Verdict::excluded);
  CHECK(judged_with("no final tag at all") == Verdict::excluded);

  SUBCASE("the judge prompt carries the reference definition and candidate") {
    std::string seen;
    auto backend = testsupport::fn_backend([&seen](const CompletionRequest& request) {
      seen = request.prompt;
      return "FINAL ANSWER: correct";
    });
    ModelOracle oracle(backend, nullptr);
    GradeContext context;
    context.judge_oracle = &oracle;
    grade(dataset, gate, "my definition", grader, "m", context);
    CHECK(seen.find("A 3-line poem with a 5-7-5 syllable structure.") !=
          std::string::npos);
    CHECK(seen.find("my definition") != std::string::npos);
    CHECK(seen.find("FINAL ANSWER:") != std::string::npos);
  }
  SUBCASE("a judge grader without an oracle is a grader mismatch") {
    CHECK_THROWS_AS(grade(dataset, gate, "x", grader, "m"), GraderMismatchError);
  }
}

TEST_CASE("annotation-file grading looks up human labels") {
  auto dataset = sample_dataset();
  const auto& gen = *dataset.items_for("sunk_cost", TaskKind::generate).front();
  const auto& edit = *dataset.items_for("sunk_cost", TaskKind::edit).front();
  const auto& grader = dataset.grader_for(gen);

  GradeContext context = make_grade_context(dataset, nullptr, FinalTag{});
  CHECK(grade(dataset, gen, "ANSWER: some response", grader, "alpha", context).verdict ==
        Verdict::correct);
  CHECK(grade(dataset, edit, "ANSWER: some response", grader, "alpha", context).verdict ==
        Verdict::incorrect);

  SUBCASE("a missing label is MissingAnnotation, not Excluded") {
    CHECK_THROWS_AS(
        grade(dataset, gen, "ANSWER: text", grader, "mystery-model", context),
        MissingAnnotationError);
  }
  SUBCASE("a malformed response is Excluded before any lookup") {
    CHECK(grade(dataset, gen, "no tag", grader, "mystery-model", context).verdict ==
          Verdict::excluded);
  }
}

TEST_CASE("grader mismatches are structural") {
  auto dataset = sample_dataset();
  auto doc = dataset.to_json();
  doc["graders"]["broken_prog"] = {{"kind", "programmatic"}, {"config", json::object()}};
  doc["graders"]["unknown_checker"] = {{"kind", "programmatic"},
                                       {"config", {{"checker", "nope"}}}};
  auto broken = Dataset::from_json(doc, "<t>");
  const auto& item = *broken.items_for("haiku", TaskKind::classify).front();

  CHECK_THROWS_AS(
      grade(broken, item, "ANSWER: yes", broken.graders().at("broken_prog"), "m"),
      GraderMismatchError);
  CHECK_THROWS_AS(
      grade(broken, item, "ANSWER: yes", broken.graders().at("unknown_checker"), "m"),
      GraderMismatchError);

  SUBCASE("exact_label without a gold label") {
    const auto& gate = *broken.items_for("haiku", TaskKind::define).front();
    CHECK_THROWS_AS(grade(broken, gate, "some definition",
                          broken.graders().at("default.classify"), "m"),
                    GraderMismatchError);
  }
}

TEST_CASE("grading is deterministic for non-judge graders") {
  auto dataset = sample_dataset();
  const auto& item = *dataset.items_for("haiku", TaskKind::classify).front();
  const auto& grader = dataset.grader_for(item);
  auto first = grade(dataset, item, "ANSWER: yes", grader, "m", {}, "digest-1");
  auto second = grade(dataset, item, "ANSWER: yes", grader, "m", {}, "digest-1");
  CHECK(first.verdict == second.verdict);
  CHECK(first.transcript_digest == "digest-1");
  CHECK(first.kind == TaskKind::classify);
  CHECK(first.concept_id == "haiku");
}
