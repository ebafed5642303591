#include "potemkin/pipelines.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "potemkin/digest.hpp"
#include "potemkin/errors.hpp"
#include "potemkin/prompts.hpp"
#include "potemkin/rng.hpp"

namespace potemkin {

using nlohmann::json;

std::string to_string(BackendSettings::Mode mode) {
  switch (mode) {
    case BackendSettings::Mode::scripted: return "scripted";
    case BackendSettings::Mode::cache_only: return "cache-only";
    case BackendSettings::Mode::remote: return "remote";
  }
  return "scripted";
}

BackendSettings::Mode backend_mode_from_string(const std::string& s) {
  if (s == "scripted") return BackendSettings::Mode::scripted;
  if (s == "cache-only" || s == "cache_only") return BackendSettings::Mode::cache_only;
  if (s == "remote") return BackendSettings::Mode::remote;
  throw SchemaError("unknown backend mode '" + s + "'");
}

// --- RunConfig -----------------------------------------------------------------

RunConfig RunConfig::from_json(const json& doc, const std::string& origin) {
  if (!doc.is_object()) throw SchemaError(origin + ": expected a JSON object");
  RunConfig config;
  if (!doc.contains("model_ids") || !doc["model_ids"].is_array() ||
      doc["model_ids"].empty()) {
    throw SchemaError(origin + ".model_ids: expected a non-empty array");
  }
  for (const auto& m : doc["model_ids"]) {
    config.model_ids.push_back(m.get<std::string>());
  }
  config.dataset_path = doc.value("dataset_path", std::string{});
  if (doc.contains("backend")) {
    const auto& b = doc["backend"];
    config.backend.mode = backend_mode_from_string(b.value("mode", std::string{"scripted"}));
    config.backend.script_path = b.value("script_path", std::string{});
    config.backend.store_path = b.value("store_path", std::string{"transcripts.jsonl"});
    if (b.contains("remote")) {
      const auto& r = b["remote"];
      config.backend.remote.base_url = r.value("base_url", std::string{});
      config.backend.remote.path = r.value("path", std::string{"/v1/chat/completions"});
      config.backend.remote.api_key_env =
          r.value("api_key_env", std::string{"POTEMKIN_API_KEY"});
    }
  }
  config.parallelism = doc.value("parallelism", 4u);
  config.num_subquestions = doc.value("num_subquestions", std::size_t{5});
  config.incoherence_true = doc.value("incoherence_true", std::size_t{5});
  config.incoherence_false = doc.value("incoherence_false", std::size_t{5});
  config.incoherence_batched = doc.value("incoherence_batched", false);
  config.followup_m = doc.value("followup_m", std::size_t{10});
  config.seed = doc.value("seed", std::uint64_t{0});
  config.final_tag = doc.value("final_tag", std::string{"FINAL ANSWER:"});
  config.temperature = doc.value("temperature", 0.0);
  config.max_tokens = doc.value("max_tokens", std::size_t{1024});
  if (doc.contains("max_backend_calls") && !doc["max_backend_calls"].is_null()) {
    config.max_backend_calls = doc["max_backend_calls"].get<std::size_t>();
  }
  config.understanding_threshold = doc.value("understanding_threshold", 1.0);

  if (config.parallelism < 1) throw SchemaError(origin + ".parallelism: must be >= 1");
  if (config.num_subquestions < 1 || config.incoherence_true < 1 ||
      config.incoherence_false < 1 || config.followup_m < 1) {
    throw SchemaError(origin + ": counts must be >= 1");
  }
  if (config.final_tag.empty()) throw SchemaError(origin + ".final_tag: must be non-empty");
  if (config.temperature < 0.0) throw SchemaError(origin + ".temperature: must be >= 0");
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open config file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": invalid JSON: " + e.what());
  }
  return from_json(doc, path.string());
}

json RunConfig::to_json() const {
  json doc;
  doc["model_ids"] = model_ids;
  doc["dataset_path"] = dataset_path;
  doc["backend"] = {{"mode", to_string(backend.mode)},
                    {"script_path", backend.script_path},
                    {"store_path", backend.store_path},
                    {"remote",
                     {{"base_url", backend.remote.base_url},
                      {"path", backend.remote.path},
                      {"api_key_env", backend.remote.api_key_env}}}};
  doc["parallelism"] = parallelism;
  doc["num_subquestions"] = num_subquestions;
  doc["incoherence_true"] = incoherence_true;
  doc["incoherence_false"] = incoherence_false;
  doc["incoherence_batched"] = incoherence_batched;
  doc["followup_m"] = followup_m;
  doc["seed"] = seed;
  doc["final_tag"] = final_tag;
  doc["temperature"] = temperature;
  doc["max_tokens"] = max_tokens;
  if (max_backend_calls) doc["max_backend_calls"] = *max_backend_calls;
  doc["understanding_threshold"] = understanding_threshold;
  return doc;
}

json RunConfig::semantic_json() const {
  json doc;
  doc["final_tag"] = final_tag;
  doc["followup_m"] = followup_m;
  doc["incoherence_batched"] = incoherence_batched;
  doc["incoherence_false"] = incoherence_false;
  doc["incoherence_true"] = incoherence_true;
  doc["max_tokens"] = max_tokens;
  doc["model_ids"] = model_ids;
  doc["num_subquestions"] = num_subquestions;
  doc["seed"] = seed;
  doc["temperature"] = temperature;
  doc["understanding_threshold"] = understanding_threshold;
  return doc;
}

std::string RunConfig::semantic_digest() const { return sha256_hex(semantic_json().dump()); }

// --- RunReport -------------------------------------------------------------------

void RunReport::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "report.json", std::ios::trunc);
  if (!out) throw Error("cannot write report to " + (dir / "report.json").string());
  out << to_text();
}

RunReport RunReport::load_dir(const std::filesystem::path& dir) {
  const auto file = dir / "report.json";
  std::ifstream in(file);
  if (!in) throw MissingReportError("no report.json in " + dir.string());
  RunReport report;
  try {
    in >> report.doc;
  } catch (const json::parse_error& e) {
    throw SchemaError(file.string() + ": invalid JSON: " + e.what());
  }
  return report;
}

// --- Seed questions ----------------------------------------------------------------

SeedQuestionSet load_seed_questions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open seed questions file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("questions") || !doc["questions"].is_array()) {
    throw SchemaError(path.string() + ": expected {questions: [...]}");
  }
  SeedQuestionSet out;
  out.source_digest = sha256_hex(buffer.str());
  std::size_t i = 0;
  for (const auto& entry : doc["questions"]) {
    const std::string where = path.string() + ": questions[" + std::to_string(i++) + "]";
    for (const char* field : {"id", "concept", "question", "gold"}) {
      if (!entry.contains(field)) {
        throw SchemaError(where + ": missing field '" + std::string(field) + "'");
      }
    }
    SeedQuestion q;
    q.id = entry["id"].get<std::string>();
    q.concept_name = entry["concept"].get<std::string>();
    q.question = entry["question"].get<std::string>();
    q.gold_choice = entry["gold"].get<std::string>();
    out.questions.push_back(std::move(q));
  }
  if (out.questions.empty()) {
    throw SchemaError(path.string() + ": questions must be non-empty");
  }
  return out;
}

// --- Shared helpers -----------------------------------------------------------------

void parallel_for(std::size_t count, unsigned parallelism,
                  const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  if (parallelism <= 1 || count == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::map<std::size_t, std::exception_ptr> errors;
  const unsigned workers = static_cast<unsigned>(
      std::min<std::size_t>(parallelism, count));
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          errors.emplace(i, std::current_exception());
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (!errors.empty()) std::rethrow_exception(errors.begin()->second);
}

GradeContext make_grade_context(const Dataset& dataset, ModelOracle* judge_oracle,
                                const FinalTag& final_tag) {
  GradeContext context;
  context.judge_oracle = judge_oracle;
  context.final_tag = final_tag;
  for (const auto& [name, spec] : dataset.graders()) {
    if (spec.kind != GraderKind::annotation_file) continue;
    if (!spec.config.contains("path")) {
      throw GraderMismatchError("annotation_file grader '" + name + "' has no path");
    }
    std::filesystem::path path = spec.config["path"].get<std::string>();
    if (path.is_relative()) path = dataset.source_dir() / path;
    context.annotations.emplace(name, AnnotationFile::load(path));
  }
  return context;
}

namespace {

json tally_json(const TallySheet& tally) {
  return json{{"successes", tally.successes},
              {"trials", tally.trials},
              {"exclusions", tally.exclusions}};
}

json rate_json(const ScoredRate& rate) {
  return json{{"raw_accuracy", rate.raw_accuracy},
              {"chance_accuracy", rate.chance_accuracy},
              {"scaled_rate", rate.scaled_rate},
              {"se", rate.se},
              {"n", rate.n}};
}

json cell_json(const TallySheet& tally, double chance) {
  json cell;
  cell["chance"] = chance;
  cell["tally"] = tally_json(tally);
  if (tally.trials == 0) {
    cell["rate"] = nullptr;
  } else {
    cell["rate"] = rate_json(potemkin_rate(tally, chance));
  }
  return cell;
}

json record_json(const OutcomeRecord& record) {
  return json{{"model_id", record.model_id},
              {"item_id", record.item_id},
              {"concept_id", record.concept_id},
              {"kind", to_string(record.kind)},
              {"verdict", to_string(record.verdict)},
              {"transcript_digest", record.transcript_digest}};
}

void bump(TallySheet& tally, Verdict verdict) {
  switch (verdict) {
    case Verdict::correct:
      ++tally.successes;
      ++tally.trials;
      break;
    case Verdict::incorrect:
      ++tally.trials;
      break;
    case Verdict::excluded:
      ++tally.exclusions;
      break;
  }
}

Transcript complete_item(ModelOracle& oracle, const std::string& model_id,
                         const TaskItem& item, const RunConfig& config) {
  CompletionRequest request;
  request.model_id = model_id;
  request.prompt = item.prompt;
  request.temperature = config.temperature;
  request.max_tokens = config.max_tokens;
  if (item.answer_tag) request.tag_protocol = FinalTag{*item.answer_tag};
  return oracle.complete(request);
}

Transcript complete_prompt(ModelOracle& oracle, const std::string& model_id,
                           std::string prompt, const RunConfig& config) {
  CompletionRequest request;
  request.model_id = model_id;
  request.prompt = std::move(prompt);
  request.temperature = config.temperature;
  request.max_tokens = config.max_tokens;
  request.tag_protocol = FinalTag{config.final_tag};
  return oracle.complete(request);
}

constexpr TaskKind kUseKinds[] = {TaskKind::classify, TaskKind::generate,
                                  TaskKind::edit};

/// Per-kind chance accuracy; pooling a cell across items requires them to
/// agree, which the dataset loader guarantees for classify and this validates
/// for the rest.
std::map<TaskKind, double> kind_chances(const Dataset& dataset) {
  std::map<TaskKind, double> chances = {{TaskKind::classify, 0.5},
                                        {TaskKind::generate, 0.0},
                                        {TaskKind::edit, 0.0}};
  std::map<TaskKind, double> seen;
  for (const auto& item : dataset.items()) {
    if (item.kind == TaskKind::define) continue;
    auto [it, inserted] = seen.emplace(item.kind, item.chance_accuracy);
    if (!inserted && it->second != item.chance_accuracy) {
      throw SchemaError("items of kind '" + to_string(item.kind) +
                        "' disagree on chance_accuracy; cells cannot be pooled");
    }
  }
  for (const auto& [kind, chance] : seen) chances[kind] = chance;
  return chances;
}

std::string trimmed(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

/// Normalizes a parsed multiple-choice answer to a bare lowercase token.
std::string normalize_choice(const std::string& parsed) {
  std::string text = trimmed(parsed);
  std::size_t end = 0;
  while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
  std::string token = text.substr(0, end);
  while (!token.empty() && std::string_view{".,;:!?'\"`)]}"}.find(token.back()) !=
                               std::string_view::npos) {
    token.pop_back();
  }
  std::transform(token.begin(), token.end(), token.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return token;
}

std::string lower_copy(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

/// Splits a question-generation completion into candidate questions: one per
/// non-empty line, enumeration markers stripped.
std::vector<std::string> split_generated_questions(const std::string& raw,
                                                   std::size_t limit) {
  std::vector<std::string> out;
  std::istringstream stream(raw);
  std::string line;
  while (std::getline(stream, line) && out.size() < limit) {
    std::string text = trimmed(line);
    if (text.empty()) continue;
    std::size_t pos = 0;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos > 0 && pos < text.size() && (text[pos] == '.' || text[pos] == ')')) {
      text = trimmed(text.substr(pos + 1));
    } else if (!text.empty() && (text[0] == '-' || text[0] == '*')) {
      text = trimmed(text.substr(1));
    }
    if (!text.empty()) out.push_back(text);
  }
  return out;
}

}  // namespace

// --- Benchmark -------------------------------------------------------------------

RunReport run_benchmark(const Dataset& dataset, ModelOracle& oracle,
                        const RunConfig& config) {
  for (const auto& c : dataset.concepts()) {
    if (dataset.items_for(c.concept_id, TaskKind::define).empty()) {
      throw InsufficientItemsError("concept '" + c.concept_id +
                                   "' has no define item to gate on");
    }
  }
  const auto chances = kind_chances(dataset);
  GradeContext context = make_grade_context(dataset, &oracle, FinalTag{config.final_tag});

  struct PairResult {
    OutcomeRecord define_outcome;
    std::vector<OutcomeRecord> task_outcomes;
  };

  const std::size_t n_models = config.model_ids.size();
  const std::size_t n_concepts = dataset.concepts().size();
  std::vector<PairResult> results(n_models * n_concepts);

  parallel_for(n_models * n_concepts, config.parallelism, [&](std::size_t p) {
    const std::string& model = config.model_ids[p / n_concepts];
    const Concept& c = dataset.concepts()[p % n_concepts];
    PairResult result;

    const TaskItem& gate = *dataset.items_for(c.concept_id, TaskKind::define).front();
    Transcript gate_t = complete_item(oracle, model, gate, config);
    result.define_outcome = grade(dataset, gate, gate_t.raw_completion,
                                  dataset.grader_for(gate), model, context,
                                  gate_t.request_digest);

    if (result.define_outcome.verdict == Verdict::correct) {
      for (TaskKind kind : kUseKinds) {
        for (const TaskItem* item : dataset.items_for(c.concept_id, kind)) {
          Transcript t = complete_item(oracle, model, *item, config);
          result.task_outcomes.push_back(grade(dataset, *item, t.raw_completion,
                                               dataset.grader_for(*item), model,
                                               context, t.request_digest));
        }
      }
    }
    results[p] = std::move(result);
  });

  // Aggregate. All maps are ordered so the emitted document is deterministic.
  std::map<std::string, TallySheet> def_tallies;
  TallySheet def_overall;
  std::map<std::string, std::map<TaskKind, TallySheet>> model_kind;
  std::map<std::string, std::map<Domain, std::map<TaskKind, TallySheet>>> model_domain_kind;
  std::map<std::string, std::map<std::string, std::map<TaskKind, TallySheet>>> model_concept_kind;
  std::map<TaskKind, TallySheet> overall_kind;
  std::map<Domain, std::map<TaskKind, TallySheet>> overall_domain_kind;
  std::map<std::string, std::vector<std::string>> gated;
  json records = json::array();

  for (std::size_t p = 0; p < results.size(); ++p) {
    const std::string& model = config.model_ids[p / n_concepts];
    const Concept& c = dataset.concepts()[p % n_concepts];
    const PairResult& result = results[p];

    bump(def_tallies[model], result.define_outcome.verdict);
    bump(def_overall, result.define_outcome.verdict);
    records.push_back(record_json(result.define_outcome));
    if (result.define_outcome.verdict != Verdict::correct) {
      gated[model].push_back(c.concept_id);
    }
    for (const auto& outcome : result.task_outcomes) {
      bump(model_kind[model][outcome.kind], outcome.verdict);
      bump(model_domain_kind[model][c.domain][outcome.kind], outcome.verdict);
      bump(model_concept_kind[model][c.concept_id][outcome.kind], outcome.verdict);
      bump(overall_kind[outcome.kind], outcome.verdict);
      bump(overall_domain_kind[c.domain][outcome.kind], outcome.verdict);
      records.push_back(record_json(outcome));
    }
  }

  auto kind_cells = [&](const std::map<TaskKind, TallySheet>* tallies) {
    json out;
    for (TaskKind kind : kUseKinds) {
      TallySheet tally;
      if (tallies) {
        auto it = tallies->find(kind);
        if (it != tallies->end()) tally = it->second;
      }
      out[to_string(kind)] = cell_json(tally, chances.at(kind));
    }
    return out;
  };

  json doc;
  doc["schema"] = "potemkin.run_report/1";
  doc["kind"] = "benchmark";
  doc["models"] = config.model_ids;
  doc["seed"] = config.seed;
  doc["final_tag"] = config.final_tag;
  doc["dataset_digest"] = dataset.source_digest();
  doc["config_digest"] = config.semantic_digest();

  json definition;
  definition["overall"] = cell_json(def_overall, 0.0);
  definition["per_model"] = json::object();
  for (const auto& model : config.model_ids) {
    definition["per_model"][model] = cell_json(def_tallies[model], 0.0);
  }
  doc["definition"] = std::move(definition);

  json tasks;
  tasks["overall"] = kind_cells(&overall_kind);
  tasks["overall_by_domain"] = json::object();
  for (const auto& [domain, tallies] : overall_domain_kind) {
    tasks["overall_by_domain"][to_string(domain)] = kind_cells(&tallies);
  }
  tasks["per_model"] = json::object();
  tasks["per_model_by_domain"] = json::object();
  tasks["per_model_by_concept"] = json::object();
  for (const auto& model : config.model_ids) {
    auto mk_it = model_kind.find(model);
    tasks["per_model"][model] =
        kind_cells(mk_it == model_kind.end() ? nullptr : &mk_it->second);
    json by_domain = json::object();
    auto md_it = model_domain_kind.find(model);
    if (md_it != model_domain_kind.end()) {
      for (const auto& [domain, tallies] : md_it->second) {
        by_domain[to_string(domain)] = kind_cells(&tallies);
      }
    }
    tasks["per_model_by_domain"][model] = std::move(by_domain);
    json by_concept = json::object();
    for (const auto& c : dataset.concepts()) {
      json entry;
      const auto& gated_list = gated[model];
      entry["gated"] = std::find(gated_list.begin(), gated_list.end(),
                                 c.concept_id) != gated_list.end();
      const std::map<TaskKind, TallySheet>* tallies = nullptr;
      auto mc_it = model_concept_kind.find(model);
      if (mc_it != model_concept_kind.end()) {
        auto cc_it = mc_it->second.find(c.concept_id);
        if (cc_it != mc_it->second.end()) tallies = &cc_it->second;
      }
      entry["tasks"] = kind_cells(tallies);
      by_concept[c.concept_id] = std::move(entry);
    }
    tasks["per_model_by_concept"][model] = std::move(by_concept);
  }
  doc["tasks"] = std::move(tasks);

  json gated_doc = json::object();
  for (const auto& model : config.model_ids) gated_doc[model] = gated[model];
  doc["gated"] = std::move(gated_doc);
  doc["records"] = std::move(records);

  return RunReport{std::move(doc)};
}

// --- Keystone expansion -------------------------------------------------------------

RunReport run_keystone_expansion(const Dataset& dataset, ModelOracle& oracle,
                                 const RunConfig& config,
                                 const std::vector<std::size_t>& k_values) {
  if (k_values.empty()) throw Error("run_keystone_expansion: k_values must be non-empty");
  const std::size_t max_k = *std::max_element(k_values.begin(), k_values.end());
  const std::size_t needed = max_k + config.followup_m;
  for (const auto& c : dataset.concepts()) {
    if (dataset.items_for(c.concept_id, TaskKind::define).empty()) {
      throw InsufficientItemsError("concept '" + c.concept_id +
                                   "' has no define item to gate on");
    }
    const auto classify = dataset.items_for(c.concept_id, TaskKind::classify);
    if (classify.size() < needed) {
      throw InsufficientItemsError(
          "concept '" + c.concept_id + "' has " + std::to_string(classify.size()) +
          " classify items but max(k) + followup_m = " + std::to_string(needed));
    }
  }
  GradeContext context = make_grade_context(dataset, &oracle, FinalTag{config.final_tag});

  struct PairResult {
    bool define_correct = false;
    std::vector<Verdict> classify_verdicts;  // shuffled order, first `needed`
    std::vector<OutcomeRecord> outcomes;
  };

  const std::size_t n_models = config.model_ids.size();
  const std::size_t n_concepts = dataset.concepts().size();
  std::vector<PairResult> results(n_models * n_concepts);

  parallel_for(n_models * n_concepts, config.parallelism, [&](std::size_t p) {
    const std::string& model = config.model_ids[p / n_concepts];
    const Concept& c = dataset.concepts()[p % n_concepts];
    PairResult result;

    const TaskItem& gate = *dataset.items_for(c.concept_id, TaskKind::define).front();
    Transcript gate_t = complete_item(oracle, model, gate, config);
    auto gate_outcome = grade(dataset, gate, gate_t.raw_completion,
                              dataset.grader_for(gate), model, context,
                              gate_t.request_digest);
    result.define_correct = gate_outcome.verdict == Verdict::correct;
    result.outcomes.push_back(std::move(gate_outcome));

    // A concept whose definition gate fails contributes at no k, so its
    // classify items are never queried.
    if (result.define_correct) {
      // Classify item order is a seeded shuffle fixed per run and per concept,
      // shared across models so curves are comparable.
      auto classify = dataset.items_for(c.concept_id, TaskKind::classify);
      SplitMix64 rng(SplitMix64::derive(config.seed, c.concept_id));
      rng.shuffle(classify);

      for (std::size_t i = 0; i < needed; ++i) {
        const TaskItem& item = *classify[i];
        Transcript t = complete_item(oracle, model, item, config);
        auto outcome = grade(dataset, item, t.raw_completion, dataset.grader_for(item),
                             model, context, t.request_digest);
        result.classify_verdicts.push_back(outcome.verdict);
        result.outcomes.push_back(std::move(outcome));
      }
    }
    results[p] = std::move(result);
  });

  auto curve_for = [&](const std::vector<const PairResult*>& pairs) {
    json curve = json::array();
    for (std::size_t k : k_values) {
      std::vector<ConceptFollowup> entries;
      entries.reserve(pairs.size());
      for (const PairResult* pair : pairs) {
        ConceptFollowup entry;
        entry.passed_keystone = pair->define_correct;
        for (std::size_t i = 0; i < k && entry.passed_keystone; ++i) {
          if (pair->classify_verdicts[i] != Verdict::correct) {
            entry.passed_keystone = false;
          }
        }
        entry.followup_correct = 0;
        if (pair->classify_verdicts.size() >= k + config.followup_m) {
          for (std::size_t i = k; i < k + config.followup_m; ++i) {
            if (pair->classify_verdicts[i] == Verdict::correct) ++entry.followup_correct;
          }
        }
        entries.push_back(entry);
      }
      json point;
      point["k"] = k;
      std::size_t contributing = 0;
      for (const auto& e : entries) {
        if (e.passed_keystone) ++contributing;
      }
      point["contributing"] = contributing;
      try {
        point["understanding"] = understanding_value(entries, config.followup_m,
                                                     config.understanding_threshold);
      } catch (const EmptyTallyError&) {
        point["understanding"] = nullptr;
      }
      curve.push_back(std::move(point));
    }
    return curve;
  };

  json doc;
  doc["schema"] = "potemkin.run_report/1";
  doc["kind"] = "expansion";
  doc["models"] = config.model_ids;
  doc["seed"] = config.seed;
  doc["k_values"] = k_values;
  doc["followup_m"] = config.followup_m;
  doc["dataset_digest"] = dataset.source_digest();
  doc["config_digest"] = config.semantic_digest();

  json per_model = json::object();
  std::vector<const PairResult*> all_pairs;
  for (std::size_t m = 0; m < n_models; ++m) {
    std::vector<const PairResult*> pairs;
    for (std::size_t c = 0; c < n_concepts; ++c) {
      pairs.push_back(&results[m * n_concepts + c]);
      all_pairs.push_back(&results[m * n_concepts + c]);
    }
    per_model[config.model_ids[m]] = json{{"curve", curve_for(pairs)}};
  }
  doc["per_model"] = std::move(per_model);
  doc["pooled"] = json{{"curve", curve_for(all_pairs)}};

  json records = json::array();
  for (const auto& result : results) {
    for (const auto& outcome : result.outcomes) records.push_back(record_json(outcome));
  }
  doc["records"] = std::move(records);

  return RunReport{std::move(doc)};
}

// --- Incoherence ---------------------------------------------------------------------

RunReport run_incoherence(const Dataset& dataset, ModelOracle& oracle,
                          const RunConfig& config) {
  struct Exchange {
    Bit intended = 0;
    std::string generation_digest;
    std::optional<std::string> example;
    std::string reclassification_digest;
    std::optional<Bit> reclassified;
  };
  struct PairResult {
    std::vector<Exchange> exchanges;
  };

  const std::size_t n_models = config.model_ids.size();
  const std::size_t n_concepts = dataset.concepts().size();
  std::vector<PairResult> results(n_models * n_concepts);

  parallel_for(n_models * n_concepts, config.parallelism, [&](std::size_t p) {
    const std::string& model = config.model_ids[p / n_concepts];
    const Concept& c = dataset.concepts()[p % n_concepts];
    PairResult result;

    auto reclassify = [&](Exchange& exchange) {
      if (!exchange.example) return;
      Transcript t = complete_prompt(
          oracle, model,
          prompts::reclassify_instance(c.name, *exchange.example, config.final_tag),
          config);
      exchange.reclassification_digest = t.request_digest;
      if (t.parsed_final) {
        if (auto verdict = yes_no_verdict(*t.parsed_final)) {
          exchange.reclassified = *verdict ? Bit{1} : Bit{0};
        }
      }
    };

    auto run_polarity = [&](bool positive, std::size_t count) {
      if (config.incoherence_batched) {
        Transcript t = complete_prompt(
            oracle, model,
            prompts::generate_instances_batched(c.name, positive, count,
                                                config.final_tag),
            config);
        std::vector<std::string> examples;
        if (t.parsed_final) {
          std::istringstream stream(*t.parsed_final);
          std::string line;
          while (std::getline(stream, line) && examples.size() < count) {
            std::string text = trimmed(line);
            if (!text.empty()) examples.push_back(text);
          }
        }
        for (std::size_t i = 0; i < count; ++i) {
          Exchange exchange;
          exchange.intended = positive ? 1 : 0;
          exchange.generation_digest = t.request_digest;
          if (i < examples.size()) exchange.example = examples[i];
          reclassify(exchange);
          result.exchanges.push_back(std::move(exchange));
        }
      } else {
        for (std::size_t i = 1; i <= count; ++i) {
          Exchange exchange;
          exchange.intended = positive ? 1 : 0;
          Transcript t = complete_prompt(
              oracle, model,
              prompts::generate_instance(c.name, positive, i, count, config.final_tag),
              config);
          exchange.generation_digest = t.request_digest;
          if (t.parsed_final) exchange.example = *t.parsed_final;
          reclassify(exchange);
          result.exchanges.push_back(std::move(exchange));
        }
      }
    };

    run_polarity(true, config.incoherence_true);
    run_polarity(false, config.incoherence_false);
    results[p] = std::move(result);
  });

  // Aggregate into reclassification pairs per model and per domain.
  std::map<std::string, std::vector<ReclassificationPair>> model_pairs;
  std::map<std::string, std::map<Domain, std::vector<ReclassificationPair>>> domain_pairs;
  std::vector<ReclassificationPair> overall_pairs;
  std::map<Domain, std::vector<ReclassificationPair>> overall_domain_pairs;
  std::map<std::string, TallySheet> model_tallies;
  std::map<std::string, std::map<Domain, TallySheet>> domain_tallies;
  TallySheet overall_tally;
  std::map<Domain, TallySheet> overall_domain_tallies;
  json records = json::array();

  for (std::size_t p = 0; p < results.size(); ++p) {
    const std::string& model = config.model_ids[p / n_concepts];
    const Concept& c = dataset.concepts()[p % n_concepts];
    for (const auto& exchange : results[p].exchanges) {
      json record;
      record["model_id"] = model;
      record["concept_id"] = c.concept_id;
      record["intended"] = exchange.intended;
      record["generation_digest"] = exchange.generation_digest;
      record["reclassification_digest"] = exchange.reclassification_digest;
      if (!exchange.example) {
        record["status"] = "generation_excluded";
        ++model_tallies[model].exclusions;
        ++domain_tallies[model][c.domain].exclusions;
        ++overall_tally.exclusions;
        ++overall_domain_tallies[c.domain].exclusions;
      } else {
        ReclassificationPair pair{exchange.intended, exchange.reclassified};
        model_pairs[model].push_back(pair);
        domain_pairs[model][c.domain].push_back(pair);
        overall_pairs.push_back(pair);
        overall_domain_pairs[c.domain].push_back(pair);
        if (!exchange.reclassified) {
          record["status"] = "reclassification_invalid";
          ++model_tallies[model].exclusions;
          ++domain_tallies[model][c.domain].exclusions;
          ++overall_tally.exclusions;
          ++overall_domain_tallies[c.domain].exclusions;
        } else {
          const bool match = *exchange.reclassified == exchange.intended;
          record["status"] = match ? "match" : "mismatch";
          auto bump_tally = [&](TallySheet& tally) {
            ++tally.trials;
            if (match) ++tally.successes;
          };
          bump_tally(model_tallies[model]);
          bump_tally(domain_tallies[model][c.domain]);
          bump_tally(overall_tally);
          bump_tally(overall_domain_tallies[c.domain]);
        }
      }
      records.push_back(std::move(record));
    }
  }

  auto icell = [](const std::vector<ReclassificationPair>& pairs, const TallySheet& tally) {
    json cell;
    cell["chance"] = 0.5;
    cell["tally"] = tally_json(tally);
    try {
      cell["rate"] = rate_json(incoherence_score(pairs));
    } catch (const EmptyTallyError&) {
      cell["rate"] = nullptr;
    }
    return cell;
  };

  json doc;
  doc["schema"] = "potemkin.run_report/1";
  doc["kind"] = "incoherence";
  doc["models"] = config.model_ids;
  doc["seed"] = config.seed;
  doc["dataset_digest"] = dataset.source_digest();
  doc["config_digest"] = config.semantic_digest();

  json per_model = json::object();
  for (const auto& model : config.model_ids) {
    json entry;
    entry["overall"] = icell(model_pairs[model], model_tallies[model]);
    json by_domain = json::object();
    for (const auto& [domain, pairs] : domain_pairs[model]) {
      by_domain[to_string(domain)] = icell(pairs, domain_tallies[model][domain]);
    }
    entry["by_domain"] = std::move(by_domain);
    per_model[model] = std::move(entry);
  }
  doc["per_model"] = std::move(per_model);

  json overall;
  overall["overall"] = icell(overall_pairs, overall_tally);
  json overall_by_domain = json::object();
  for (const auto& [domain, pairs] : overall_domain_pairs) {
    overall_by_domain[to_string(domain)] = icell(pairs, overall_domain_tallies[domain]);
  }
  overall["by_domain"] = std::move(overall_by_domain);
  doc["overall"] = std::move(overall);
  doc["records"] = std::move(records);

  return RunReport{std::move(doc)};
}

// --- Automated lower bound --------------------------------------------------------

RunReport run_autoeval(const SeedQuestionSet& seeds, ModelOracle& oracle,
                       const RunConfig& config) {
  if (seeds.questions.empty()) throw Error("run_autoeval: no seed questions");

  struct VerdictRecord {
    std::string seed_id;
    std::size_t subquestion_index = 0;
    bool corrupted_side = false;
    std::optional<JudgeCall> judged;  // nullopt when any stage was malformed
    std::string answer_digest;
    std::string judge_digest;
  };
  struct SeedResult {
    std::string seed_id;
    enum class Status { answered_correctly, answered_incorrectly, excluded } status =
        Status::excluded;
    std::vector<std::string> subquestions;
    std::vector<VerdictRecord> verdicts;
  };

  const std::size_t n_models = config.model_ids.size();
  const std::size_t n_seeds = seeds.questions.size();
  std::vector<SeedResult> results(n_models * n_seeds);

  parallel_for(n_models * n_seeds, config.parallelism, [&](std::size_t p) {
    const std::string& model = config.model_ids[p / n_seeds];
    const SeedQuestion& seed = seeds.questions[p % n_seeds];
    SeedResult result;
    result.seed_id = seed.id;

    // Stage 1: answer the seed question; exact-match the multiple-choice
    // letter after the final tag.
    Transcript seed_t = complete_prompt(
        oracle, model, prompts::correct_answer(seed.question, config.final_tag), config);
    if (!seed_t.parsed_final) {
      result.status = SeedResult::Status::excluded;
      results[p] = std::move(result);
      return;
    }
    if (normalize_choice(*seed_t.parsed_final) != lower_copy(seed.gold_choice)) {
      result.status = SeedResult::Status::answered_incorrectly;
      results[p] = std::move(result);
      return;  // incorrectly answered seeds trigger no subquestion calls
    }
    result.status = SeedResult::Status::answered_correctly;

    // Stage 2: generate related questions.
    Transcript gen_t = complete_prompt(
        oracle, model,
        prompts::question_generation(seed.concept_name, seed.question,
                                     config.num_subquestions),
        config);
    result.subquestions =
        split_generated_questions(gen_t.raw_completion, config.num_subquestions);

    // Stage 3: per subquestion, produce a correct answer and a corrupted one,
    // then have the same model judge both.
    for (std::size_t i = 0; i < result.subquestions.size(); ++i) {
      const std::string& subq = result.subquestions[i];

      VerdictRecord correct_side;
      correct_side.seed_id = seed.id;
      correct_side.subquestion_index = i;
      correct_side.corrupted_side = false;
      VerdictRecord corrupted_side = correct_side;
      corrupted_side.corrupted_side = true;

      Transcript answer_t = complete_prompt(
          oracle, model, prompts::correct_answer(subq, config.final_tag), config);
      correct_side.answer_digest = answer_t.request_digest;

      if (answer_t.parsed_final) {
        const std::string initial_answer = *answer_t.parsed_final;

        Transcript judge_correct_t = complete_prompt(
            oracle, model, prompts::judge(subq, initial_answer, config.final_tag),
            config);
        correct_side.judge_digest = judge_correct_t.request_digest;
        if (judge_correct_t.parsed_final) {
          correct_side.judged = judge_verdict(*judge_correct_t.parsed_final);
        }

        Transcript corrupt_t = complete_prompt(
            oracle, model,
            prompts::incorrect_answer(subq, initial_answer, config.final_tag), config);
        corrupted_side.answer_digest = corrupt_t.request_digest;
        if (corrupt_t.parsed_final) {
          Transcript judge_corrupt_t = complete_prompt(
              oracle, model,
              prompts::judge(subq, *corrupt_t.parsed_final, config.final_tag), config);
          corrupted_side.judge_digest = judge_corrupt_t.request_digest;
          if (judge_corrupt_t.parsed_final) {
            corrupted_side.judged = judge_verdict(*judge_corrupt_t.parsed_final);
          }
        }
      }
      result.verdicts.push_back(std::move(correct_side));
      result.verdicts.push_back(std::move(corrupted_side));
    }
    results[p] = std::move(result);
  });

  // Aggregate per model via the autoeval metric.
  std::map<std::string, std::vector<JudgedPair>> model_pairs;
  std::map<std::string, TallySheet> model_tallies;
  std::map<std::string, json> model_seed_stats;
  std::vector<JudgedPair> overall_pairs;
  TallySheet overall_tally;
  json records = json::array();
  json audit = json::object();

  for (const auto& model : config.model_ids) {
    model_seed_stats[model] = json{{"attempted", 0},
                                   {"answered_correctly", 0},
                                   {"answered_incorrectly", 0},
                                   {"excluded", 0}};
    audit[model] = json::array();
  }

  for (std::size_t p = 0; p < results.size(); ++p) {
    const std::string& model = config.model_ids[p / n_seeds];
    const SeedResult& result = results[p];
    auto& stats = model_seed_stats[model];
    stats["attempted"] = stats["attempted"].get<int>() + 1;
    switch (result.status) {
      case SeedResult::Status::answered_correctly:
        stats["answered_correctly"] = stats["answered_correctly"].get<int>() + 1;
        break;
      case SeedResult::Status::answered_incorrectly:
        stats["answered_incorrectly"] = stats["answered_incorrectly"].get<int>() + 1;
        break;
      case SeedResult::Status::excluded:
        stats["excluded"] = stats["excluded"].get<int>() + 1;
        break;
    }
    if (!result.subquestions.empty()) {
      audit[model].push_back(
          json{{"seed_id", result.seed_id}, {"subquestions", result.subquestions}});
    }
    for (const auto& verdict : result.verdicts) {
      JudgedPair pair;
      pair.expected = verdict.corrupted_side ? JudgeCall::incorrect : JudgeCall::correct;
      pair.judged = verdict.judged;
      model_pairs[model].push_back(pair);
      overall_pairs.push_back(pair);

      auto& tally = model_tallies[model];
      if (!pair.judged) {
        ++tally.exclusions;
        ++overall_tally.exclusions;
      } else {
        ++tally.trials;
        ++overall_tally.trials;
        if (*pair.judged == pair.expected) {
          ++tally.successes;
          ++overall_tally.successes;
        }
      }

      json record;
      record["model_id"] = model;
      record["seed_id"] = verdict.seed_id;
      record["subquestion_index"] = verdict.subquestion_index;
      record["side"] = verdict.corrupted_side ? "corrupted" : "correct";
      record["expected"] = verdict.corrupted_side ? "incorrect" : "correct";
      record["judged"] = !verdict.judged ? "invalid"
                         : (*verdict.judged == JudgeCall::correct ? "correct"
                                                                  : "incorrect");
      record["answer_digest"] = verdict.answer_digest;
      record["judge_digest"] = verdict.judge_digest;
      records.push_back(std::move(record));
    }
  }

  auto acell = [](const std::vector<JudgedPair>& pairs, const TallySheet& tally) {
    json cell;
    cell["chance"] = 0.5;
    cell["tally"] = tally_json(tally);
    try {
      cell["rate"] = rate_json(autoeval_rate(pairs));
    } catch (const EmptyTallyError&) {
      cell["rate"] = nullptr;
    }
    return cell;
  };

  json doc;
  doc["schema"] = "potemkin.run_report/1";
  doc["kind"] = "autoeval";
  doc["models"] = config.model_ids;
  doc["seed"] = config.seed;
  doc["num_subquestions"] = config.num_subquestions;
  doc["dataset_digest"] = seeds.source_digest;
  doc["config_digest"] = config.semantic_digest();

  json per_model = json::object();
  for (const auto& model : config.model_ids) {
    json entry = acell(model_pairs[model], model_tallies[model]);
    entry["seeds"] = model_seed_stats[model];
    per_model[model] = std::move(entry);
  }
  doc["per_model"] = std::move(per_model);
  doc["overall"] = acell(overall_pairs, overall_tally);
  doc["audit"] = std::move(audit);
  doc["records"] = std::move(records);

  return RunReport{std::move(doc)};
}

// --- Run setup ----------------------------------------------------------------------

RunSetup prepare_run(RunConfig config, const std::filesystem::path& config_dir,
                     const std::filesystem::path& out_dir,
                     const std::optional<std::filesystem::path>& store_override,
                     bool need_dataset) {
  RunSetup setup;

  std::filesystem::create_directories(out_dir);

  if (need_dataset) {
    if (config.dataset_path.empty()) {
      throw SchemaError("config has no dataset_path but this command needs one");
    }
    std::filesystem::path dataset_path = config.dataset_path;
    if (dataset_path.is_relative()) dataset_path = config_dir / dataset_path;
    setup.dataset = Dataset::load(dataset_path);
  }

  std::filesystem::path store_path;
  if (store_override) {
    store_path = *store_override;
  } else {
    store_path = config.backend.store_path;
    if (store_path.is_relative()) store_path = out_dir / store_path;
  }

  std::shared_ptr<Backend> backend;
  bool deterministic_clock = true;
  switch (config.backend.mode) {
    case BackendSettings::Mode::scripted: {
      if (config.backend.script_path.empty()) {
        throw SchemaError("scripted backend requires backend.script_path");
      }
      std::filesystem::path script = config.backend.script_path;
      if (script.is_relative()) script = config_dir / script;
      backend = ScriptedBackend::from_file(script);
      break;
    }
    case BackendSettings::Mode::cache_only:
      backend = nullptr;
      break;
    case BackendSettings::Mode::remote:
      backend = std::make_shared<RemoteBackend>(config.backend.remote);
      deterministic_clock = false;
      break;
  }

  const bool read_only = config.backend.mode == BackendSettings::Mode::cache_only;
  setup.store = std::make_shared<TranscriptStore>(store_path, read_only);

  OracleOptions options;
  options.max_backend_calls = config.max_backend_calls;
  options.clock = deterministic_clock ? fixed_clock() : system_utc_iso8601;
  setup.oracle = std::make_shared<ModelOracle>(backend, setup.store, options);
  setup.config = std::move(config);
  return setup;
}

}  // namespace potemkin
