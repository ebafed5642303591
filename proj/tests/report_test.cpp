#include <doctest.h>

#include "potemkin/errors.hpp"
#include "potemkin/pipelines.hpp"
#include "potemkin/report.hpp"
#include "support/test_support.hpp"

using namespace potemkin;
using nlohmann::json;

TEST_CASE("rounding is half-away-from-zero at two decimals") {
  CHECK(round_half_away(0.125, 2) == doctest::Approx(0.13));
  CHECK(round_half_away(0.375, 2) == doctest::Approx(0.38));
  CHECK(round_half_away(-0.125, 2) == doctest::Approx(-0.13));
  CHECK(format_fixed(0.125) == "0.13");
  CHECK(format_fixed(-0.125) == "-0.13");
  CHECK(format_fixed(2.0) == "2.00");
  CHECK(format_fixed(0.0) == "0.00");
  CHECK(format_fixed(1.0449) == "1.04");
}

TEST_CASE("rates render in the two-decimal parenthesized-SE format") {
  CHECK(format_rate_se(1.04, 0.10) == "1.04 (0.10)");  // above 1, never clamped
  CHECK(format_rate_se(0.55, 0.02) == "0.55 (0.02)");
  CHECK(format_rate_se(0.0, 0.0) == "0.00 (0.00)");
  CHECK(format_rate_se(2.0, 0.095) == "2.00 (0.10)");
}

TEST_CASE("cells without data render as an em dash, not zero") {
  json cell = {{"chance", 0.5}, {"rate", nullptr}, {"tally", json::object()}};
  CHECK(format_cell(cell) == "—");
  cell["rate"] = {{"scaled_rate", 1.04}, {"se", 0.10}};
  CHECK(format_cell(cell) == "1.04 (0.10)");
}

TEST_CASE("tables are byte-stable") {
  std::vector<std::string> header = {"Model", "Classify"};
  std::vector<std::vector<std::string>> rows = {{"alpha", "0.55 (0.02)"},
                                                {"a-much-longer-name", "—"}};
  auto a = render_table(header, rows);
  auto b = render_table(header, rows);
  CHECK(a == b);
  // The em dash occupies one display column despite its three bytes.
  CHECK(a.find("—") != std::string::npos);
}

TEST_CASE("render_tables validates the document kind") {
  CHECK_THROWS_AS(render_tables(json::object()), SchemaError);
  json doc = {{"kind", "mystery"}};
  CHECK_THROWS_AS(render_tables(doc), SchemaError);
}

TEST_CASE("missing run reports are reported as such") {
  testsupport::TempDir dir;
  CHECK_THROWS_AS(RunReport::load_dir(dir.path), MissingReportError);
  testsupport::write_file(dir.path / "report.json", "{not json");
  CHECK_THROWS_AS(RunReport::load_dir(dir.path), SchemaError);
  testsupport::write_file(dir.path / "report.json", R"({"kind": "autoeval"})");
  CHECK(RunReport::load_dir(dir.path).doc["kind"] == "autoeval");
}
