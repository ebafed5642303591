#include "potemkin/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "potemkin/digest.hpp"
#include "potemkin/errors.hpp"
#include "potemkin/prompts.hpp"

namespace potemkin {

using nlohmann::json;

std::string to_string(Domain domain) {
  switch (domain) {
    case Domain::literary: return "literary";
    case Domain::game_theory: return "game_theory";
    case Domain::psych_bias: return "psych_bias";
    case Domain::other: return "other";
  }
  return "other";
}

Domain domain_from_string(const std::string& s) {
  if (s == "literary") return Domain::literary;
  if (s == "game_theory") return Domain::game_theory;
  if (s == "psych_bias") return Domain::psych_bias;
  if (s == "other") return Domain::other;
  throw SchemaError("unknown domain '" + s + "'");
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::define: return "define";
    case TaskKind::classify: return "classify";
    case TaskKind::generate: return "generate";
    case TaskKind::edit: return "edit";
  }
  return "classify";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "define") return TaskKind::define;
  if (s == "classify") return TaskKind::classify;
  if (s == "generate") return TaskKind::generate;
  if (s == "edit") return TaskKind::edit;
  throw SchemaError("unknown task kind '" + s + "'");
}

std::string to_string(GraderKind kind) {
  switch (kind) {
    case GraderKind::exact_label: return "exact_label";
    case GraderKind::pattern_match: return "pattern_match";
    case GraderKind::programmatic: return "programmatic";
    case GraderKind::judge_model: return "judge_model";
    case GraderKind::annotation_file: return "annotation_file";
  }
  return "exact_label";
}

GraderKind grader_kind_from_string(const std::string& s) {
  if (s == "exact_label") return GraderKind::exact_label;
  if (s == "pattern_match") return GraderKind::pattern_match;
  if (s == "programmatic") return GraderKind::programmatic;
  if (s == "judge_model") return GraderKind::judge_model;
  if (s == "annotation_file") return GraderKind::annotation_file;
  throw SchemaError("unknown grader kind '" + s + "'");
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::correct: return "correct";
    case Verdict::incorrect: return "incorrect";
    case Verdict::excluded: return "excluded";
  }
  return "excluded";
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "correct") return Verdict::correct;
  if (s == "incorrect") return Verdict::incorrect;
  if (s == "excluded") return Verdict::excluded;
  throw SchemaError("unknown verdict '" + s + "'");
}

// --- Annotation files --------------------------------------------------------

AnnotationFile AnnotationFile::from_json(const json& doc, const std::string& origin) {
  if (!doc.is_object()) {
    throw SchemaError(origin + ": annotation file must be a JSON object");
  }
  AnnotationFile out;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto& entry = it.value();
    if (!entry.is_object() || !entry.contains("verdict")) {
      throw SchemaError(origin + ": entry '" + it.key() + "' must be {verdict}");
    }
    Verdict v = verdict_from_string(entry["verdict"].get<std::string>());
    if (v == Verdict::excluded) {
      throw SchemaError(origin + ": entry '" + it.key() +
                        "' may only be correct or incorrect");
    }
    out.labels_.emplace(it.key(), v);
  }
  return out;
}

AnnotationFile AnnotationFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open annotation file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": invalid JSON: " + e.what());
  }
  return from_json(doc, path.string());
}

std::optional<Verdict> AnnotationFile::lookup(const std::string& item_id,
                                              const std::string& model_id) const {
  auto it = labels_.find(item_id + "/" + model_id);
  if (it == labels_.end()) return std::nullopt;
  return it->second;
}

// --- Dataset ------------------------------------------------------------------

Dataset Dataset::from_json(const json& doc, const std::string& origin) {
  if (!doc.is_object()) throw SchemaError(origin + ": expected a JSON object");
  for (const char* field : {"concepts", "items", "graders"}) {
    if (!doc.contains(field)) {
      throw SchemaError(origin + ": missing required field '" + std::string(field) + "'");
    }
  }

  Dataset out;

  const auto& graders = doc["graders"];
  if (!graders.is_object()) throw SchemaError("graders: expected an object");
  for (auto it = graders.begin(); it != graders.end(); ++it) {
    const auto& entry = it.value();
    const std::string path = "graders." + it.key();
    if (!entry.is_object() || !entry.contains("kind")) {
      throw SchemaError(path + ": expected {kind, config?}");
    }
    GraderSpec spec;
    spec.name = it.key();
    spec.kind = grader_kind_from_string(entry["kind"].get<std::string>());
    spec.config = entry.value("config", json::object());
    out.graders_.emplace(spec.name, std::move(spec));
  }

  const auto& concepts = doc["concepts"];
  if (!concepts.is_array()) throw SchemaError("concepts: expected an array");
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    const auto& entry = concepts[i];
    const std::string path = "concepts[" + std::to_string(i) + "]";
    for (const char* field : {"concept_id", "domain", "name", "reference_definition"}) {
      if (!entry.contains(field)) {
        throw SchemaError(path + ": missing field '" + std::string(field) + "'");
      }
    }
    Concept c;
    c.concept_id = entry["concept_id"].get<std::string>();
    c.domain = domain_from_string(entry["domain"].get<std::string>());
    c.name = entry["name"].get<std::string>();
    c.reference_definition = entry["reference_definition"].get<std::string>();
    if (c.reference_definition.empty()) {
      throw SchemaError(path + ".reference_definition: must be non-empty");
    }
    if (!out.concept_index_.emplace(c.concept_id, out.concepts_.size()).second) {
      throw SchemaError(path + ": duplicate concept_id '" + c.concept_id + "'");
    }
    out.concepts_.push_back(std::move(c));
  }

  const auto& items = doc["items"];
  if (!items.is_array()) throw SchemaError("items: expected an array");
  std::set<std::string> item_ids;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& entry = items[i];
    const std::string path = "items[" + std::to_string(i) + "]";
    for (const char* field : {"item_id", "concept_id", "kind", "prompt"}) {
      if (!entry.contains(field)) {
        throw SchemaError(path + ": missing field '" + std::string(field) + "'");
      }
    }
    TaskItem item;
    item.item_id = entry["item_id"].get<std::string>();
    if (!item_ids.insert(item.item_id).second) {
      throw SchemaError(path + ": duplicate item_id '" + item.item_id + "'");
    }
    item.concept_id = entry["concept_id"].get<std::string>();
    if (!out.concept_index_.count(item.concept_id)) {
      throw DanglingReferenceError(path + ": item '" + item.item_id +
                                   "' references unknown concept '" +
                                   item.concept_id + "'");
    }
    item.kind = task_kind_from_string(entry["kind"].get<std::string>());
    item.prompt = entry["prompt"].get<std::string>();
    item.gold = entry.value("gold", json::object());

    if (item.kind == TaskKind::classify) {
      // Classify chance accuracy is an invariant, not a choice.
      if (entry.contains("chance_accuracy") &&
          entry["chance_accuracy"].get<double>() != 0.5) {
        throw SchemaError(path + ".chance_accuracy: classify items carry 0.5");
      }
      item.chance_accuracy = 0.5;
    } else {
      item.chance_accuracy = entry.value("chance_accuracy", 0.0);
      if (item.chance_accuracy < 0.0 || item.chance_accuracy >= 1.0) {
        throw SchemaError(path + ".chance_accuracy: must be in [0, 1)");
      }
    }

    if (entry.contains("answer_tag")) {
      if (entry["answer_tag"].is_null()) {
        item.answer_tag = std::nullopt;
      } else {
        item.answer_tag = entry["answer_tag"].get<std::string>();
        if (item.answer_tag->empty()) {
          throw SchemaError(path + ".answer_tag: must be non-empty or null");
        }
      }
    } else if (item.kind == TaskKind::classify) {
      item.answer_tag = "ANSWER:";
    }

    item.grader = entry.value("grader", std::string{});
    const std::string resolved =
        item.grader.empty() ? "default." + to_string(item.kind) : item.grader;
    if (!out.graders_.count(resolved)) {
      throw DanglingReferenceError(path + ": item '" + item.item_id +
                                   "' needs grader '" + resolved +
                                   "' which is not defined");
    }
    out.items_.push_back(std::move(item));
  }

  return out;
}

Dataset Dataset::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open dataset file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": invalid JSON: " + e.what());
  }
  Dataset out = from_json(doc, path.string());
  out.source_digest_ = sha256_hex(buffer.str());
  out.source_dir_ = path.parent_path();
  return out;
}

json Dataset::to_json() const {
  json doc;
  doc["concepts"] = json::array();
  for (const auto& c : concepts_) {
    doc["concepts"].push_back({{"concept_id", c.concept_id},
                               {"domain", to_string(c.domain)},
                               {"name", c.name},
                               {"reference_definition", c.reference_definition}});
  }
  doc["items"] = json::array();
  for (const auto& item : items_) {
    json entry = {{"item_id", item.item_id},
                  {"concept_id", item.concept_id},
                  {"kind", to_string(item.kind)},
                  {"prompt", item.prompt},
                  {"gold", item.gold},
                  {"chance_accuracy", item.chance_accuracy}};
    if (item.answer_tag) {
      entry["answer_tag"] = *item.answer_tag;
    } else {
      entry["answer_tag"] = nullptr;
    }
    if (!item.grader.empty()) entry["grader"] = item.grader;
    doc["items"].push_back(std::move(entry));
  }
  doc["graders"] = json::object();
  for (const auto& [name, spec] : graders_) {
    doc["graders"][name] = {{"kind", to_string(spec.kind)}, {"config", spec.config}};
  }
  return doc;
}

const Concept& Dataset::concept_by_id(const std::string& concept_id) const {
  auto it = concept_index_.find(concept_id);
  if (it == concept_index_.end()) {
    throw DanglingReferenceError("unknown concept '" + concept_id + "'");
  }
  return concepts_[it->second];
}

std::vector<const TaskItem*> Dataset::items_for(const std::string& concept_id,
                                                TaskKind kind) const {
  std::vector<const TaskItem*> out;
  for (const auto& item : items_) {
    if (item.concept_id == concept_id && item.kind == kind) out.push_back(&item);
  }
  return out;
}

const GraderSpec& Dataset::grader_for(const TaskItem& item) const {
  const std::string resolved =
      item.grader.empty() ? "default." + to_string(item.kind) : item.grader;
  auto it = graders_.find(resolved);
  if (it == graders_.end()) {
    throw DanglingReferenceError("item '" + item.item_id + "' needs grader '" +
                                 resolved + "' which is not defined");
  }
  return it->second;
}

// --- Programmatic checkers ----------------------------------------------------

namespace {

bool is_vowel(char c) { return std::string_view{"aeiouy"}.find(c) != std::string_view::npos; }

std::size_t count_word_syllables(const std::string& word) {
  std::string w;
  for (char c : word) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (w.empty()) return 0;
  std::size_t groups = 0;
  bool in_group = false;
  for (char c : w) {
    if (is_vowel(c)) {
      if (!in_group) ++groups;
      in_group = true;
    } else {
      in_group = false;
    }
  }
  if (groups == 0) return 1;
  // Silent final e ("silence" has two spoken syllables), except in consonant+le
  // words like "table".
  if (w.size() >= 2 && w.back() == 'e' && !is_vowel(w[w.size() - 2]) && groups > 1) {
    const bool cons_le =
        w.size() >= 3 && w[w.size() - 2] == 'l' && !is_vowel(w[w.size() - 3]);
    if (!cons_le) --groups;
  }
  return std::max<std::size_t>(groups, 1);
}

}  // namespace

std::size_t count_syllables(const std::string& line) {
  std::size_t total = 0;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      total += count_word_syllables(word);
      word.clear();
    }
  };
  for (char c : line) {
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '\'') {
      word.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  return total;
}

namespace {

Verdict check_syllable_lines(const TaskItem&, const std::string& answer,
                             const json& params) {
  if (!params.contains("syllables") || !params["syllables"].is_array()) {
    throw GraderMismatchError("syllable_lines checker needs gold {syllables: [..]}");
  }
  std::vector<std::size_t> expected;
  for (const auto& v : params["syllables"]) expected.push_back(v.get<std::size_t>());

  std::vector<std::string> lines;
  std::istringstream stream(answer);
  std::string line;
  while (std::getline(stream, line)) {
    bool blank = std::all_of(line.begin(), line.end(), [](unsigned char c) {
      return std::isspace(c);
    });
    if (!blank) lines.push_back(line);
  }
  if (lines.size() != expected.size()) return Verdict::incorrect;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (count_syllables(lines[i]) != expected[i]) return Verdict::incorrect;
  }
  return Verdict::correct;
}

// Bimatrix answers are JSON: rows of cells, each cell [payoff1, payoff2].
std::optional<std::vector<std::vector<std::pair<double, double>>>> parse_bimatrix(
    const std::string& answer) {
  json doc;
  try {
    doc = json::parse(answer);
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
  if (!doc.is_array() || doc.empty()) return std::nullopt;
  std::vector<std::vector<std::pair<double, double>>> matrix;
  std::size_t cols = 0;
  for (const auto& row : doc) {
    if (!row.is_array() || row.empty()) return std::nullopt;
    if (cols == 0) cols = row.size();
    if (row.size() != cols) return std::nullopt;
    std::vector<std::pair<double, double>> cells;
    for (const auto& cell : row) {
      if (!cell.is_array() || cell.size() != 2 || !cell[0].is_number() ||
          !cell[1].is_number()) {
        return std::nullopt;
      }
      cells.emplace_back(cell[0].get<double>(), cell[1].get<double>());
    }
    matrix.push_back(std::move(cells));
  }
  return matrix;
}

Verdict check_payoff_matrix(const TaskItem&, const std::string& answer,
                            const json& params) {
  if (!params.contains("property") || !params["property"].is_string()) {
    throw GraderMismatchError("payoff_matrix checker needs gold {property: ...}");
  }
  const std::string property = params["property"].get<std::string>();
  auto matrix = parse_bimatrix(answer);
  if (!matrix) return Verdict::incorrect;

  if (property == "zero_sum") {
    for (const auto& row : *matrix) {
      for (const auto& [a, b] : row) {
        if (a + b != 0.0) return Verdict::incorrect;
      }
    }
    return Verdict::correct;
  }
  if (property == "strict_dominance_row") {
    const std::size_t rows = matrix->size();
    const std::size_t cols = (*matrix)[0].size();
    for (std::size_t r = 0; r < rows; ++r) {
      bool dominates_all = true;
      for (std::size_t other = 0; other < rows && dominates_all; ++other) {
        if (other == r) continue;
        for (std::size_t c = 0; c < cols; ++c) {
          if ((*matrix)[r][c].first <= (*matrix)[other][c].first) {
            dominates_all = false;
            break;
          }
        }
      }
      if (dominates_all && rows > 1) return Verdict::correct;
    }
    return Verdict::incorrect;
  }
  if (property == "all_unique") {
    std::set<double> seen;
    for (const auto& row : *matrix) {
      for (const auto& [a, b] : row) {
        if (!seen.insert(a).second) return Verdict::incorrect;
        if (!seen.insert(b).second) return Verdict::incorrect;
      }
    }
    return Verdict::correct;
  }
  throw GraderMismatchError("payoff_matrix checker: unknown property '" + property + "'");
}

}  // namespace

CheckerRegistry::CheckerRegistry() = default;

const CheckerRegistry& CheckerRegistry::built_in() {
  static const CheckerRegistry* registry = [] {
    auto* r = new CheckerRegistry();
    r->register_checker("syllable_lines", check_syllable_lines);
    r->register_checker("payoff_matrix", check_payoff_matrix);
    return r;
  }();
  return *registry;
}

void CheckerRegistry::register_checker(const std::string& name,
                                       ProgrammaticChecker checker) {
  checkers_[name] = std::move(checker);
}

const ProgrammaticChecker* CheckerRegistry::find(const std::string& name) const {
  auto it = checkers_.find(name);
  return it == checkers_.end() ? nullptr : &it->second;
}

// --- Grading --------------------------------------------------------------------

namespace {

std::string normalize_label(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  while (!out.empty() &&
         std::string_view{".,;:!?'\"`"}.find(out.back()) != std::string_view::npos) {
    out.pop_back();
  }
  return out;
}

std::string gold_label_text(const json& gold) {
  if (!gold.contains("label")) {
    throw GraderMismatchError("exact_label grader needs gold {label: ...}");
  }
  const auto& label = gold["label"];
  if (label.is_string()) return label.get<std::string>();
  if (label.is_boolean()) return label.get<bool>() ? "yes" : "no";
  if (label.is_number_integer()) return std::to_string(label.get<long long>());
  throw GraderMismatchError("exact_label gold label must be string, bool, or integer");
}

std::string trim_copy(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

OutcomeRecord grade(const Dataset& dataset, const TaskItem& item,
                    const std::string& response, const GraderSpec& grader,
                    const std::string& model_id, const GradeContext& context,
                    const std::string& transcript_digest) {
  OutcomeRecord record;
  record.model_id = model_id;
  record.item_id = item.item_id;
  record.concept_id = item.concept_id;
  record.kind = item.kind;
  record.transcript_digest = transcript_digest;

  // Answer protocol first: a response missing the required tag is Excluded and
  // never reaches the grader.
  std::string answer;
  if (item.answer_tag) {
    auto parsed = parse_final(response, FinalTag{*item.answer_tag});
    if (!parsed) {
      record.verdict = Verdict::excluded;
      return record;
    }
    answer = *parsed;
  } else {
    answer = trim_copy(response);
    if (answer.empty()) {
      record.verdict = Verdict::excluded;
      return record;
    }
  }

  switch (grader.kind) {
    case GraderKind::exact_label: {
      record.verdict = normalize_label(answer) == normalize_label(gold_label_text(item.gold))
                           ? Verdict::correct
                           : Verdict::incorrect;
      return record;
    }
    case GraderKind::pattern_match: {
      std::string pattern;
      if (item.gold.contains("pattern")) {
        pattern = item.gold["pattern"].get<std::string>();
      } else if (grader.config.contains("pattern")) {
        pattern = grader.config["pattern"].get<std::string>();
      } else {
        throw GraderMismatchError("pattern_match grader '" + grader.name +
                                  "' has no pattern");
      }
      try {
        std::regex re(pattern, std::regex::ECMAScript);
        record.verdict = std::regex_search(answer, re) ? Verdict::correct
                                                       : Verdict::incorrect;
      } catch (const std::regex_error& e) {
        throw GraderMismatchError("pattern_match grader '" + grader.name +
                                  "': invalid pattern: " + e.what());
      }
      return record;
    }
    case GraderKind::programmatic: {
      if (!grader.config.contains("checker")) {
        throw GraderMismatchError("programmatic grader '" + grader.name +
                                  "' has no checker name");
      }
      const std::string checker_name = grader.config["checker"].get<std::string>();
      const CheckerRegistry* registry =
          context.checkers ? context.checkers : &CheckerRegistry::built_in();
      const ProgrammaticChecker* checker = registry->find(checker_name);
      if (!checker) {
        throw GraderMismatchError("unknown programmatic checker '" + checker_name + "'");
      }
      record.verdict = (*checker)(item, answer, item.gold);
      return record;
    }
    case GraderKind::judge_model: {
      if (!context.judge_oracle) {
        throw GraderMismatchError("judge_model grader '" + grader.name +
                                  "' requires a judge oracle");
      }
      if (!grader.config.contains("judge_model_id")) {
        throw GraderMismatchError("judge_model grader '" + grader.name +
                                  "' has no judge_model_id");
      }
      const auto& concept_info = dataset.concept_by_id(item.concept_id);
      std::string prompt;
      if (grader.config.contains("template")) {
        prompt = prompts::render(
            grader.config["template"].get<std::string>(),
            {{"concept", concept_info.name},
             {"reference_definition", concept_info.reference_definition},
             {"candidate", answer},
             {"question", item.prompt},
             {"FINAL_TAG", context.final_tag.tag_text}});
      } else {
        prompt = prompts::definition_judge(concept_info.name,
                                           concept_info.reference_definition, answer,
                                           context.final_tag.tag_text);
      }
      CompletionRequest request;
      request.model_id = grader.config["judge_model_id"].get<std::string>();
      request.prompt = prompt;
      request.tag_protocol = context.final_tag;
      Transcript judge_t = context.judge_oracle->complete(request);
      if (!judge_t.parsed_final) {
        record.verdict = Verdict::excluded;
        return record;
      }
      auto verdict = judge_verdict(*judge_t.parsed_final);
      if (!verdict) {
        record.verdict = Verdict::excluded;
        return record;
      }
      record.verdict =
          *verdict == JudgeCall::correct ? Verdict::correct : Verdict::incorrect;
      return record;
    }
    case GraderKind::annotation_file: {
      auto it = context.annotations.find(grader.name);
      if (it == context.annotations.end()) {
        throw GraderMismatchError("annotation file for grader '" + grader.name +
                                  "' is not loaded");
      }
      auto label = it->second.lookup(item.item_id, model_id);
      if (!label) {
        throw MissingAnnotationError("no annotation for item '" + item.item_id +
                                     "' and model '" + model_id + "'");
      }
      record.verdict = *label;
      return record;
    }
  }
  throw GraderMismatchError("unhandled grader kind");
}

}  // namespace potemkin
