#include <benchmark/benchmark.h>

#include <nlohmann/json.hpp>

#include "potemkin/dataset.hpp"
#include "potemkin/pipelines.hpp"
#include "potemkin/rng.hpp"

using namespace potemkin;
using nlohmann::json;

namespace {

Dataset classify_dataset(std::size_t n_concepts, std::size_t items_per_concept) {
  json doc;
  doc["concepts"] = json::array();
  doc["items"] = json::array();
  for (std::size_t c = 0; c < n_concepts; ++c) {
    const std::string id = "c" + std::to_string(c);
    doc["concepts"].push_back({{"concept_id", id},
                               {"domain", "other"},
                               {"name", id},
                               {"reference_definition", "ref"}});
    doc["items"].push_back({{"item_id", id + "-def"},
                            {"concept_id", id},
                            {"kind", "define"},
                            {"prompt", "Define CONCEPT " + id + "."}});
    for (std::size_t i = 0; i < items_per_concept; ++i) {
      doc["items"].push_back({{"item_id", id + "-cls-" + std::to_string(i)},
                              {"concept_id", id},
                              {"kind", "classify"},
                              {"prompt", "Classify " + id + " item " +
                                             std::to_string(i) + "."},
                              {"gold", {{"label", "yes"}}}});
    }
  }
  doc["graders"] = {
      {"default.define",
       {{"kind", "judge_model"}, {"config", {{"judge_model_id", "judge"}}}}},
      {"default.classify", {{"kind", "exact_label"}, {"config", json::object()}}}};
  return Dataset::from_json(doc, "<bench>");
}

std::shared_ptr<Backend> coin_backend() {
  return std::make_shared<ScriptedBackend>([](const CompletionRequest& r) -> std::string {
    if (r.model_id == "judge") return "FINAL ANSWER: correct";
    if (r.prompt.rfind("Define", 0) == 0) return "def";
    SplitMix64 rng(SplitMix64::derive(11, r.prompt));
    return rng.bernoulli(0.5) ? "ANSWER: yes" : "ANSWER: no";
  });
}

}  // namespace

static void BM_RunBenchmark(benchmark::State& state) {
  auto dataset = classify_dataset(state.range(0), state.range(1));
  RunConfig config;
  config.model_ids = {"m"};
  config.parallelism = static_cast<unsigned>(state.range(2));
  for (auto _ : state) {
    OracleOptions options;
    options.clock = fixed_clock();
    ModelOracle oracle(coin_backend(), nullptr, options);
    benchmark::DoNotOptimize(run_benchmark(dataset, oracle, config));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}
BENCHMARK(BM_RunBenchmark)->Args({4, 50, 1})->Args({4, 50, 4})->Args({16, 100, 4});

static void BM_Grade(benchmark::State& state) {
  auto dataset = classify_dataset(1, 1);
  const auto& item = *dataset.items_for("c0", TaskKind::classify).front();
  const auto& grader = dataset.grader_for(item);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        grade(dataset, item, "thinking...\nANSWER: yes", grader, "m"));
  }
}
BENCHMARK(BM_Grade);
