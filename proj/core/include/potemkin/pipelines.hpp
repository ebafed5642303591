#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "potemkin/dataset.hpp"
#include "potemkin/metrics.hpp"
#include "potemkin/oracle.hpp"

namespace potemkin {

struct BackendSettings {
  enum class Mode { scripted, cache_only, remote };
  Mode mode = Mode::scripted;
  std::string script_path;  // scripted rule table (JSON)
  RemoteConfig remote;
  /// Relative store paths resolve under the run's --out directory.
  std::string store_path = "transcripts.jsonl";
};

std::string to_string(BackendSettings::Mode mode);
BackendSettings::Mode backend_mode_from_string(const std::string& s);

/// One run's configuration. The JSON config file mirrors this struct.
struct RunConfig {
  std::vector<std::string> model_ids;
  std::string dataset_path;
  BackendSettings backend;
  unsigned parallelism = 4;
  std::size_t num_subquestions = 5;
  std::size_t incoherence_true = 5;
  std::size_t incoherence_false = 5;
  bool incoherence_batched = false;
  std::size_t followup_m = 10;
  std::uint64_t seed = 0;
  std::string final_tag = "FINAL ANSWER:";
  double temperature = 0.0;
  std::size_t max_tokens = 1024;
  std::optional<std::size_t> max_backend_calls;
  double understanding_threshold = 1.0;

  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_json(const nlohmann::json& doc, const std::string& origin);
  nlohmann::json to_json() const;

  /// The digest-relevant run parameters: what was measured, not where files
  /// lived or how many threads ran. Equal semantic configs yield equal
  /// report provenance.
  nlohmann::json semantic_json() const;
  std::string semantic_digest() const;
};

/// A pipeline's structured result document plus its serialized form on disk
/// (report.json inside a run directory).
struct RunReport {
  nlohmann::json doc;

  std::string to_text() const { return doc.dump(2) + "\n"; }
  void save(const std::filesystem::path& dir) const;
  static RunReport load_dir(const std::filesystem::path& dir);
};

struct SeedQuestion {
  std::string id;
  std::string concept_name;
  std::string question;
  std::string gold_choice;  // multiple-choice letter
};

struct SeedQuestionSet {
  std::vector<SeedQuestion> questions;
  std::string source_digest;
};

SeedQuestionSet load_seed_questions(const std::filesystem::path& path);

/// Runs fn(0..count-1) with at most `parallelism` worker threads. Exceptions
/// are collected and the one from the lowest index is rethrown after joining.
void parallel_for(std::size_t count, unsigned parallelism,
                  const std::function<void(std::size_t)>& fn);

/// Loads annotation files referenced by the dataset's graders and wires the
/// judge oracle, so grade() has everything it needs.
GradeContext make_grade_context(const Dataset& dataset, ModelOracle* judge_oracle,
                                const FinalTag& final_tag);

/// Definition-gated benchmark: per (model, concept) grade the definition
/// keystone; only on success run the classify/generate/edit items. Reports
/// per-task potemkin rates, the unconditional definition accuracy, per-domain
/// breakdowns, exclusion counts, and the full outcome trace.
RunReport run_benchmark(const Dataset& dataset, ModelOracle& oracle,
                        const RunConfig& config);

/// Keystone-expansion simulation: keystone = definition + first k classify
/// items under a seeded per-concept shuffle; understanding measured over the
/// next followup_m items. One curve point per k.
RunReport run_keystone_expansion(const Dataset& dataset, ModelOracle& oracle,
                                 const RunConfig& config,
                                 const std::vector<std::size_t>& k_values);

/// Incoherence measurement: generate instances and non-instances per concept,
/// then re-classify each generated text in a separate query and score the
/// mismatch rate.
RunReport run_incoherence(const Dataset& dataset, ModelOracle& oracle,
                          const RunConfig& config);

/// Automated lower bound: answer seed questions, generate subquestions for the
/// correctly answered ones, produce correct and corrupted answers, and have
/// the same model judge both.
RunReport run_autoeval(const SeedQuestionSet& seeds, ModelOracle& oracle,
                       const RunConfig& config);

/// Everything a CLI run needs, assembled from a config file.
struct RunSetup {
  RunConfig config;
  std::optional<Dataset> dataset;
  std::shared_ptr<TranscriptStore> store;
  std::shared_ptr<ModelOracle> oracle;
};

/// Resolves paths (dataset and script against the config file's directory,
/// relative store paths under out_dir), builds the backend for config.mode,
/// and picks the clock: scripted and cache-only runs use the fixed clock so
/// identical seeds produce byte-identical output trees.
RunSetup prepare_run(RunConfig config, const std::filesystem::path& config_dir,
                     const std::filesystem::path& out_dir,
                     const std::optional<std::filesystem::path>& store_override,
                     bool need_dataset);

}  // namespace potemkin
