#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace potemkin {

/// Half-away-from-zero rounding to the given number of decimals.
double round_half_away(double x, int decimals);

/// Fixed-point text with half-away-from-zero rounding.
std::string format_fixed(double x, int decimals = 2);

/// "1.04 (0.10)": rate to two decimals with the standard error in parentheses.
/// Rates above 1 are printed as-is, never clamped.
std::string format_rate_se(double rate, double se);

/// Renders one report cell {rate, tally, chance}: the scaled rate with SE, or
/// an em dash when there is no data (absence, not zero).
std::string format_cell(const nlohmann::json& cell);

/// Fixed-width text table; byte-stable for golden tests.
std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

/// Renders the tables for a run report document (dispatches on its kind).
std::string render_tables(const nlohmann::json& report_doc);

}  // namespace potemkin
