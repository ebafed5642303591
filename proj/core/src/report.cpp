#include "potemkin/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "potemkin/errors.hpp"

namespace potemkin {

using nlohmann::json;

namespace {

constexpr const char* kNoData = "—";  // em dash: absence, not zero

/// Display width in codepoints (the em dash is 3 bytes but 1 column).
std::size_t display_width(const std::string& s) {
  std::size_t width = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++width;
  }
  return width;
}

const std::vector<std::string>& domain_order() {
  static const std::vector<std::string> order = {"literary", "game_theory",
                                                 "psych_bias", "other"};
  return order;
}

std::vector<std::string> domains_present(const json& by_domain) {
  std::vector<std::string> out;
  for (const auto& d : domain_order()) {
    if (by_domain.contains(d)) out.push_back(d);
  }
  return out;
}

std::string domain_label(const std::string& domain) {
  if (domain == "literary") return "Literary";
  if (domain == "game_theory") return "Game theory";
  if (domain == "psych_bias") return "Psych biases";
  return "Other";
}

}  // namespace

double round_half_away(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::copysign(std::floor(std::abs(x) * scale + 0.5) / scale, x);
}

std::string format_fixed(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, round_half_away(x, decimals));
  return buf;
}

std::string format_rate_se(double rate, double se) {
  return format_fixed(rate, 2) + " (" + format_fixed(se, 2) + ")";
}

std::string format_cell(const json& cell) {
  if (!cell.is_object() || !cell.contains("rate") || cell["rate"].is_null()) {
    return kNoData;
  }
  const auto& rate = cell["rate"];
  return format_rate_se(rate["scaled_rate"].get<double>(), rate["se"].get<double>());
}

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = display_width(header[c]);
  }
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < widths.size(); ++c) {
      widths[c] = std::max(widths[c], display_width(row[c]));
    }
  }
  std::ostringstream out;
  auto emit_row = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < widths.size(); ++c) {
      const std::string& cell = c < row.size() ? row[c] : std::string{};
      out << cell;
      if (c + 1 < widths.size()) {
        out << std::string(widths[c] - display_width(cell) + 2, ' ');
      }
    }
    out << '\n';
  };
  emit_row(header);
  std::size_t total = 0;
  for (std::size_t c = 0; c < widths.size(); ++c) {
    total += widths[c] + (c + 1 < widths.size() ? 2 : 0);
  }
  out << std::string(total, '-') << '\n';
  for (const auto& row : rows) emit_row(row);
  return out.str();
}

namespace {

std::string definition_cell_text(const json& cell) {
  if (!cell.contains("rate") || cell["rate"].is_null()) return kNoData;
  const auto& rate = cell["rate"];
  // Definition rows report plain accuracy, not a scaled error rate.
  return format_rate_se(rate["raw_accuracy"].get<double>(), rate["se"].get<double>());
}

std::string render_benchmark(const json& doc) {
  std::ostringstream out;
  const auto& models = doc["models"];

  out << "Definition accuracy\n";
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& model : models) {
      const std::string m = model.get<std::string>();
      rows.push_back({m, definition_cell_text(doc["definition"]["per_model"][m])});
    }
    rows.push_back({"Overall", definition_cell_text(doc["definition"]["overall"])});
    out << render_table({"Model", "Accuracy"}, rows);
  }

  out << "\nPotemkin rates by task\n";
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& model : models) {
      const std::string m = model.get<std::string>();
      const auto& cells = doc["tasks"]["per_model"][m];
      rows.push_back({m, format_cell(cells["classify"]), format_cell(cells["generate"]),
                      format_cell(cells["edit"])});
    }
    const auto& overall = doc["tasks"]["overall"];
    rows.push_back({"Overall", format_cell(overall["classify"]),
                    format_cell(overall["generate"]), format_cell(overall["edit"])});
    out << render_table({"Model", "Classify", "Generate", "Edit"}, rows);
  }

  const auto& overall_by_domain = doc["tasks"]["overall_by_domain"];
  const auto present = domains_present(overall_by_domain);
  if (!present.empty()) {
    out << "\nPotemkin rates by domain\n";
    std::vector<std::vector<std::string>> rows;
    for (const auto& domain : present) {
      for (const auto& model : models) {
        const std::string m = model.get<std::string>();
        const auto& by_domain = doc["tasks"]["per_model_by_domain"][m];
        if (by_domain.contains(domain)) {
          const auto& cells = by_domain[domain];
          rows.push_back({domain_label(domain), m, format_cell(cells["classify"]),
                          format_cell(cells["generate"]), format_cell(cells["edit"])});
        } else {
          rows.push_back({domain_label(domain), m, kNoData, kNoData, kNoData});
        }
      }
      const auto& cells = overall_by_domain[domain];
      rows.push_back({domain_label(domain), "Overall", format_cell(cells["classify"]),
                      format_cell(cells["generate"]), format_cell(cells["edit"])});
    }
    out << render_table({"Domain", "Model", "Classify", "Generate", "Edit"}, rows);
  }
  return out.str();
}

std::string render_incoherence(const json& doc) {
  std::ostringstream out;
  out << "Incoherence scores\n";
  const auto& models = doc["models"];
  const auto present = domains_present(doc["overall"]["by_domain"]);

  std::vector<std::string> header = {"Model"};
  for (const auto& domain : present) header.push_back(domain_label(domain));
  header.push_back("Overall");

  std::vector<std::vector<std::string>> rows;
  auto row_for = [&](const std::string& label, const json& entry) {
    std::vector<std::string> row = {label};
    for (const auto& domain : present) {
      if (entry["by_domain"].contains(domain)) {
        row.push_back(format_cell(entry["by_domain"][domain]));
      } else {
        row.push_back(kNoData);
      }
    }
    row.push_back(format_cell(entry["overall"]));
    return row;
  };
  for (const auto& model : models) {
    const std::string m = model.get<std::string>();
    rows.push_back(row_for(m, doc["per_model"][m]));
  }
  rows.push_back(row_for("Overall", doc["overall"]));
  out << render_table(header, rows);
  return out.str();
}

std::string render_autoeval(const json& doc) {
  std::ostringstream out;
  out << "Automated potemkin rate (lower bound)\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& model : doc["models"]) {
    const std::string m = model.get<std::string>();
    const auto& entry = doc["per_model"][m];
    const auto& seeds = entry["seeds"];
    std::ostringstream seed_text;
    seed_text << seeds["answered_correctly"].get<int>() << "/"
              << seeds["attempted"].get<int>();
    rows.push_back({m, format_cell(entry), seed_text.str()});
  }
  rows.push_back({"Overall", format_cell(doc["overall"]), ""});
  out << render_table({"Model", "Potemkin rate", "Seeds correct"}, rows);
  return out.str();
}

std::string render_expansion(const json& doc) {
  std::ostringstream out;
  out << "Concept understanding by keystone size\n";
  std::vector<std::string> header = {"k"};
  std::vector<std::string> model_names;
  for (const auto& model : doc["models"]) {
    model_names.push_back(model.get<std::string>());
    header.push_back(model_names.back());
  }
  header.push_back("Pooled");

  auto point_text = [](const json& point) -> std::string {
    if (point["understanding"].is_null()) return kNoData;
    std::ostringstream text;
    text << format_fixed(point["understanding"].get<double>(), 2) << " (n="
         << point["contributing"].get<std::size_t>() << ")";
    return text.str();
  };

  std::vector<std::vector<std::string>> rows;
  const auto& k_values = doc["k_values"];
  for (std::size_t i = 0; i < k_values.size(); ++i) {
    std::vector<std::string> row = {std::to_string(k_values[i].get<std::size_t>())};
    for (const auto& m : model_names) {
      row.push_back(point_text(doc["per_model"][m]["curve"][i]));
    }
    row.push_back(point_text(doc["pooled"]["curve"][i]));
    rows.push_back(std::move(row));
  }
  out << render_table(header, rows);
  return out.str();
}

}  // namespace

std::string render_tables(const json& report_doc) {
  if (!report_doc.is_object() || !report_doc.contains("kind")) {
    throw SchemaError("report document has no kind");
  }
  const std::string kind = report_doc["kind"].get<std::string>();
  if (kind == "benchmark") return render_benchmark(report_doc);
  if (kind == "incoherence") return render_incoherence(report_doc);
  if (kind == "autoeval") return render_autoeval(report_doc);
  if (kind == "expansion") return render_expansion(report_doc);
  throw SchemaError("unknown report kind '" + kind + "'");
}

}  // namespace potemkin
