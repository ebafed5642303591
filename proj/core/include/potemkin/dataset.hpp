#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "potemkin/oracle.hpp"

namespace potemkin {

enum class Domain { literary, game_theory, psych_bias, other };

std::string to_string(Domain domain);
Domain domain_from_string(const std::string& s);

struct Concept {
  std::string concept_id;
  Domain domain = Domain::other;
  std::string name;
  std::string reference_definition;
};

enum class TaskKind { define, classify, generate, edit };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

/// One benchmark question. Classify items always carry chance_accuracy 0.5;
/// the other kinds default to 0 unless the dataset overrides them.
struct TaskItem {
  std::string item_id;
  std::string concept_id;
  TaskKind kind = TaskKind::classify;
  std::string prompt;
  nlohmann::json gold;  // grader-specific payload
  double chance_accuracy = 0.0;
  std::string grader;  // name into the dataset's grader table
  /// Answer protocol: when set, the graded answer is the text after the last
  /// occurrence of this tag and a response without it is Excluded. When empty,
  /// the whole trimmed response is the answer.
  std::optional<std::string> answer_tag;
};

enum class GraderKind { exact_label, pattern_match, programmatic, judge_model, annotation_file };

std::string to_string(GraderKind kind);
GraderKind grader_kind_from_string(const std::string& s);

struct GraderSpec {
  std::string name;
  GraderKind kind = GraderKind::exact_label;
  nlohmann::json config;
};

enum class Verdict { correct, incorrect, excluded };

std::string to_string(Verdict verdict);
Verdict verdict_from_string(const std::string& s);

struct OutcomeRecord {
  std::string model_id;
  std::string item_id;
  std::string concept_id;
  TaskKind kind = TaskKind::classify;
  Verdict verdict = Verdict::excluded;
  std::string transcript_digest;
};

/// Human labels keyed by (item_id, model_id). A missing entry is a
/// MissingAnnotationError, distinct from an excluded response.
class AnnotationFile {
 public:
  AnnotationFile() = default;
  static AnnotationFile load(const std::filesystem::path& path);
  static AnnotationFile from_json(const nlohmann::json& doc, const std::string& origin);

  std::optional<Verdict> lookup(const std::string& item_id,
                                const std::string& model_id) const;

 private:
  std::map<std::string, Verdict> labels_;  // "item_id/model_id" -> verdict
};

/// Immutable benchmark dataset: concepts, task items, and the grader table.
/// Referential integrity is enforced at load.
class Dataset {
 public:
  static Dataset load(const std::filesystem::path& path);
  static Dataset from_json(const nlohmann::json& doc, const std::string& origin);
  nlohmann::json to_json() const;

  const std::vector<Concept>& concepts() const { return concepts_; }
  const std::vector<TaskItem>& items() const { return items_; }
  const std::map<std::string, GraderSpec>& graders() const { return graders_; }

  const Concept& concept_by_id(const std::string& concept_id) const;
  /// Items of one kind for a concept, in dataset order.
  std::vector<const TaskItem*> items_for(const std::string& concept_id,
                                         TaskKind kind) const;
  const GraderSpec& grader_for(const TaskItem& item) const;

  /// SHA-256 of the file the dataset was loaded from (empty for in-memory).
  const std::string& source_digest() const { return source_digest_; }
  /// Directory of the source file; used to resolve relative annotation paths.
  const std::filesystem::path& source_dir() const { return source_dir_; }

 private:
  std::vector<Concept> concepts_;
  std::vector<TaskItem> items_;
  std::map<std::string, GraderSpec> graders_;
  std::map<std::string, std::size_t> concept_index_;
  std::string source_digest_;
  std::filesystem::path source_dir_;
};

/// Programmatic checkers are a named registry so automatic validation is
/// data-driven from the dataset file.
using ProgrammaticChecker =
    std::function<Verdict(const TaskItem& item, const std::string& answer,
                          const nlohmann::json& params)>;

class CheckerRegistry {
 public:
  /// Registry preloaded with the built-in checkers:
  ///   "syllable_lines"  — per-line syllable counts, params {"syllables": [..]}
  ///   "payoff_matrix"   — bimatrix property check, params {"property": ...}
  static const CheckerRegistry& built_in();

  CheckerRegistry();
  void register_checker(const std::string& name, ProgrammaticChecker checker);
  const ProgrammaticChecker* find(const std::string& name) const;

 private:
  std::map<std::string, ProgrammaticChecker> checkers_;
};

/// Heuristic English syllable count for one line of text.
std::size_t count_syllables(const std::string& line);

/// Everything grade() may need beyond the item and response.
struct GradeContext {
  ModelOracle* judge_oracle = nullptr;  // judge_model graders
  FinalTag final_tag;                   // protocol for judge prompts
  const CheckerRegistry* checkers = &CheckerRegistry::built_in();
  std::map<std::string, AnnotationFile> annotations;  // keyed by grader name
};

/// Grades one response. Deterministic for every grader kind except
/// judge_model, which inherits the oracle's contract. A response that violates
/// the item's answer protocol is Excluded and never reaches the grader.
OutcomeRecord grade(const Dataset& dataset, const TaskItem& item,
                    const std::string& response, const GraderSpec& grader,
                    const std::string& model_id, const GradeContext& context = {},
                    const std::string& transcript_digest = "");

}  // namespace potemkin
