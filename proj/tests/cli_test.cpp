#include <doctest.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>

#include "potemkin/oracle.hpp"
#include "support/test_support.hpp"

using nlohmann::json;
using testsupport::CliResult;
using testsupport::fixture_dir;
using testsupport::run_cli;

namespace {

std::string fx(const std::string& relative) {
  return (fixture_dir() / relative).string();
}

std::set<std::string> dir_entries(const std::filesystem::path& dir) {
  std::set<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    names.insert(entry.path().filename().string());
  }
  return names;
}

}  // namespace

TEST_CASE("keystone command solves concept spec files") {
  SUBCASE("a lone f_star has the empty keystone") {
    auto result = run_cli("keystone --concept-spec " + fx("concepts/simple_concept.json") +
                          " --mode exact");
    CHECK(result.exit_code == 0);
    auto doc = json::parse(result.output);
    CHECK(doc["keystone"].empty());
    CHECK(doc["objective"] == 0);
    CHECK(doc["certificate"] == "exact_minimum");
  }
  SUBCASE("exact mode matches the smallest enumerated cardinality") {
    const std::string spec = fx("concepts/twelve_instance.json");
    auto exact = run_cli("keystone --concept-spec " + spec + " --mode exact");
    auto enumerated =
        run_cli("keystone --concept-spec " + spec + " --mode enumerate --limit 500");
    REQUIRE(exact.exit_code == 0);
    REQUIRE(enumerated.exit_code == 0);
    auto exact_doc = json::parse(exact.output);
    auto enum_doc = json::parse(enumerated.output);
    REQUIRE_FALSE(enum_doc["truncated"].get<bool>());
    std::size_t smallest = SIZE_MAX;
    for (const auto& ks : enum_doc["keystones"]) {
      smallest = std::min(smallest, ks["objective"].get<std::size_t>());
    }
    CHECK(exact_doc["objective"].get<std::size_t>() == smallest);
  }
  SUBCASE("greedy mode emits a legal keystone report") {
    auto result = run_cli("keystone --concept-spec " +
                          fx("concepts/twelve_instance.json") + " --mode greedy");
    CHECK(result.exit_code == 0);
    auto doc = json::parse(result.output);
    CHECK(doc["certificate"] == "greedy_minimal");
    CHECK(doc["objective"].get<std::size_t>() == doc["keystone"].size());
  }
  SUBCASE("malformed spec files exit 1 with the field path") {
    auto result = run_cli("keystone --concept-spec " +
                          fx("concepts/malformed_concept.json") + " --mode exact");
    CHECK(result.exit_code == 1);
    CHECK(result.output.find("f_star") != std::string::npos);
  }
  SUBCASE("--out writes the keystone report file") {
    testsupport::TempDir out;
    auto result = run_cli("keystone --concept-spec " + fx("concepts/simple_concept.json") +
                          " --mode exact --out " + out.path.string());
    CHECK(result.exit_code == 0);
    CHECK(std::filesystem::exists(out.path / "keystone.json"));
  }
}

TEST_CASE("benchmark command reproduces the golden run") {
  testsupport::TempDir out;
  auto result = run_cli("benchmark --config " + fx("configs/benchmark_scripted.json") +
                        " --out " + out.path.string());
  REQUIRE(result.exit_code == 0);

  SUBCASE("the run directory contains exactly the run artifacts") {
    CHECK(dir_entries(out.path) ==
          std::set<std::string>{"report.json", "tables.txt", "transcripts.jsonl"});
  }
  SUBCASE("tables match the committed golden byte-for-byte") {
    CHECK(testsupport::read_file(out.path / "tables.txt") ==
          testsupport::read_file(fixture_dir() / "golden" / "benchmark_tables.txt"));
  }
  SUBCASE("the report matches the committed golden byte-for-byte") {
    CHECK(testsupport::read_file(out.path / "report.json") ==
          testsupport::read_file(fixture_dir() / "golden" / "benchmark_report.json"));
  }
  SUBCASE("a fully gated model renders em-dash rows, not zeros") {
    const std::string tables = testsupport::read_file(out.path / "tables.txt");
    CHECK(tables.find("gated    —") != std::string::npos);
    auto doc = json::parse(testsupport::read_file(out.path / "report.json"));
    CHECK(doc["gated"]["gated"].size() == 3);
    for (const auto& record : doc["records"]) {
      if (record["model_id"] == "gated") CHECK(record["kind"] == "define");
    }
  }
  SUBCASE("every outcome record's transcript digest resolves in the store") {
    auto doc = json::parse(testsupport::read_file(out.path / "report.json"));
    potemkin::TranscriptStore store(out.path / "transcripts.jsonl");
    for (const auto& record : doc["records"]) {
      const auto digest = record["transcript_digest"].get<std::string>();
      CHECK(store.find(digest).has_value());
    }
  }
}

TEST_CASE("cache-only reruns reproduce the golden report from committed transcripts") {
  testsupport::TempDir out;
  auto result = run_cli("benchmark --config " + fx("configs/benchmark_scripted.json") +
                        " --backend cache-only --store " +
                        fx("stores/benchmark_transcripts.jsonl") + " --out " +
                        out.path.string());
  REQUIRE(result.exit_code == 0);
  CHECK(testsupport::read_file(out.path / "report.json") ==
        testsupport::read_file(fixture_dir() / "golden" / "benchmark_report.json"));
  // The committed store is read-only: no transcript file in the out dir.
  CHECK(dir_entries(out.path) == std::set<std::string>{"report.json", "tables.txt"});
}

TEST_CASE("cache-only runs fail fast with exit 2 on a cache miss") {
  testsupport::TempDir out;
  testsupport::write_file(out.path / "empty.jsonl", "");
  auto result = run_cli("benchmark --config " + fx("configs/benchmark_scripted.json") +
                        " --backend cache-only --store " +
                        (out.path / "empty.jsonl").string() + " --out " +
                        (out.path / "run").string());
  CHECK(result.exit_code == 2);
}

TEST_CASE("autoeval command reproduces the golden run") {
  testsupport::TempDir out;
  auto result = run_cli("autoeval --config " + fx("configs/autoeval_scripted.json") +
                        " --seed-questions " + fx("seeds/seed_questions.json") +
                        " --out " + out.path.string());
  REQUIRE(result.exit_code == 0);
  CHECK(testsupport::read_file(out.path / "report.json") ==
        testsupport::read_file(fixture_dir() / "golden" / "autoeval_report.json"));
  CHECK(testsupport::read_file(out.path / "tables.txt") ==
        testsupport::read_file(fixture_dir() / "golden" / "autoeval_tables.txt"));
}

TEST_CASE("expansion command emits the curve artifacts") {
  testsupport::TempDir out;
  auto result = run_cli("expansion --config " + fx("configs/expansion_scripted.json") +
                        " --k-values 0,1,2 --out " + out.path.string());
  REQUIRE(result.exit_code == 0);
  CHECK(std::filesystem::exists(out.path / "curve.csv"));
  auto doc = json::parse(testsupport::read_file(out.path / "report.json"));
  CHECK(doc["k_values"] == json::array({0, 1, 2}));
  // alpha passes every definition; gated passes none.
  for (const auto& point : doc["per_model"]["gated"]["curve"]) {
    CHECK(point["contributing"] == 0);
    CHECK(point["understanding"].is_null());
  }
  for (const auto& point : doc["per_model"]["alpha"]["curve"]) {
    CHECK(point["contributing"].get<int>() >= 1);
  }
}

TEST_CASE("incoherence command scores the scripted models deterministically") {
  testsupport::TempDir out;
  auto result = run_cli("incoherence --config " + fx("configs/benchmark_scripted.json") +
                        " --out " + out.path.string());
  REQUIRE(result.exit_code == 0);
  auto doc = json::parse(testsupport::read_file(out.path / "report.json"));
  // alpha re-classifies everything as "yes": true instances match, false ones
  // do not, so the mismatch fraction is exactly one half.
  CHECK(doc["per_model"]["alpha"]["overall"]["rate"]["scaled_rate"] == 1.0);
  CHECK(doc["per_model"]["gated"]["overall"]["rate"]["scaled_rate"] == 1.0);
}

TEST_CASE("simulate command writes the sweep table") {
  testsupport::TempDir out;
  auto result = run_cli(
      "simulate --instances 12 --rules 3 --block 2 --llm-interps 50 "
      "--flip-probs 0.0,0.2 --seed 5 --out " +
      out.path.string());
  REQUIRE(result.exit_code == 0);
  CHECK(std::filesystem::exists(out.path / "sweep.csv"));
  auto doc = json::parse(testsupport::read_file(out.path / "sweep.json"));
  REQUIRE(doc["points"].size() == 2);
  CHECK(doc["points"][0]["flip_probability"] == 0.0);
  CHECK(doc["points"][0]["potemkin_fraction"] == 0.0);

  auto again = run_cli(
      "simulate --instances 12 --rules 3 --block 2 --llm-interps 50 "
      "--flip-probs 0.0,0.2 --seed 5 --out " +
      out.path.string());
  CHECK(json::parse(testsupport::read_file(out.path / "sweep.json")) == doc);
}

TEST_CASE("report command renders a run directory and validates it") {
  testsupport::TempDir out;
  auto run = run_cli("benchmark --config " + fx("configs/benchmark_scripted.json") +
                     " --out " + out.path.string());
  REQUIRE(run.exit_code == 0);
  auto rendered = run_cli("report --run " + out.path.string());
  CHECK(rendered.exit_code == 0);
  CHECK(rendered.output ==
        testsupport::read_file(fixture_dir() / "golden" / "benchmark_tables.txt"));

  testsupport::TempDir empty;
  auto missing = run_cli("report --run " + empty.path.string());
  CHECK(missing.exit_code == 1);
}

TEST_CASE("unknown flags and missing arguments exit 1") {
  CHECK(run_cli("keystone --concept-spec /nonexistent.json").exit_code == 1);
  CHECK(run_cli("keystone").exit_code == 1);
  CHECK(run_cli("benchmark --config /nonexistent.json --out /tmp/x").exit_code == 1);
}
