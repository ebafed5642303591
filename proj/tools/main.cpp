// Command-line front end: keystone solving, the synthetic validity sweep, the
// four measurement pipelines, and report rendering.
//
// Exit codes: 0 success, 1 validation error, 2 backend failure.

#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "potemkin/errors.hpp"
#include "potemkin/interpretation.hpp"
#include "potemkin/pipelines.hpp"
#include "potemkin/report.hpp"
#include "potemkin/rng.hpp"
#include "potemkin/solver.hpp"
#include "potemkin/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SharedFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string backend_mode;
  std::optional<unsigned> parallelism;
  std::string store_path;
};

void add_run_flags(CLI::App* cmd, SharedFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Run config file (JSON)")->required();
  cmd->add_option("--seed", flags.seed, "Override the config seed");
  cmd->add_option("--out", flags.out_dir, "Output directory for this run")->required();
  cmd->add_option("--backend", flags.backend_mode,
                  "Override the backend mode: scripted, cache-only, or remote")
      ->check(CLI::IsMember({"scripted", "cache-only", "remote"}));
  cmd->add_option("--parallelism", flags.parallelism, "Override request parallelism");
  cmd->add_option("--store", flags.store_path,
                  "Override the transcript store path (read-only for cache-only runs)");
}

potemkin::RunSetup setup_from_flags(const SharedFlags& flags, bool need_dataset) {
  auto config = potemkin::RunConfig::load(flags.config_path);
  if (flags.seed) config.seed = *flags.seed;
  if (!flags.backend_mode.empty()) {
    config.backend.mode = potemkin::backend_mode_from_string(flags.backend_mode);
  }
  if (flags.parallelism) config.parallelism = *flags.parallelism;
  std::optional<fs::path> store_override;
  if (!flags.store_path.empty()) store_override = fs::path(flags.store_path);
  return potemkin::prepare_run(std::move(config),
                               fs::path(flags.config_path).parent_path(),
                               fs::path(flags.out_dir), store_override, need_dataset);
}

void finish_run(const potemkin::RunSetup& setup, const potemkin::RunReport& report,
                const fs::path& out_dir) {
  report.save(out_dir);
  const std::string tables = potemkin::render_tables(report.doc);
  {
    std::ofstream out(out_dir / "tables.txt", std::ios::trunc);
    out << tables;
  }
  if (setup.store && !setup.store->read_only()) setup.store->compact();
  std::cout << tables;
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const potemkin::BackendError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const potemkin::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

std::string json_number(double value) { return json(value).dump(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keystone-set computation and potemkin-rate measurement"};
  app.require_subcommand(1);

  // --- keystone --------------------------------------------------------------
  auto* keystone_cmd = app.add_subcommand(
      "keystone", "Compute keystone sets for a concept spec file");
  std::string concept_spec_path;
  std::string keystone_mode = "exact";
  std::size_t keystone_limit = 100;
  std::string keystone_out;
  keystone_cmd->add_option("--concept-spec", concept_spec_path, "Concept spec (JSON)")
      ->required();
  keystone_cmd->add_option("--mode", keystone_mode, "greedy, exact, or enumerate")
      ->check(CLI::IsMember({"greedy", "exact", "enumerate"}));
  keystone_cmd->add_option("--limit", keystone_limit,
                           "Maximum keystones to enumerate");
  keystone_cmd->add_option("--out", keystone_out, "Directory for keystone.json");

  // --- simulate ---------------------------------------------------------------
  auto* simulate_cmd = app.add_subcommand(
      "simulate", "Synthetic interpretation spaces and the validity sweep");
  std::size_t sim_instances = 20;
  std::size_t sim_rules = 4;
  std::size_t sim_block = 3;
  std::size_t sim_llm_interps = 200;
  std::vector<double> sim_flip_probs = {0.0, 0.05, 0.1, 0.2, 0.4};
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  simulate_cmd->add_option("--instances", sim_instances, "Instance count");
  simulate_cmd->add_option("--rules", sim_rules, "Human misinterpretation rules");
  simulate_cmd->add_option("--block", sim_block, "Flip block size per rule");
  simulate_cmd->add_option("--llm-interps", sim_llm_interps,
                           "LLM interpretations per grid point");
  simulate_cmd->add_option("--flip-probs", sim_flip_probs, "Flip probabilities")
      ->delimiter(',');
  simulate_cmd->add_option("--seed", sim_seed, "Seed for the generators");
  simulate_cmd->add_option("--out", sim_out, "Output directory")->required();

  // --- pipeline commands --------------------------------------------------------
  SharedFlags bench_flags;
  auto* bench_cmd =
      app.add_subcommand("benchmark", "Definition-gated potemkin-rate benchmark");
  add_run_flags(bench_cmd, bench_flags);

  SharedFlags expansion_flags;
  std::vector<std::size_t> k_values = {0, 1, 2, 3};
  auto* expansion_cmd =
      app.add_subcommand("expansion", "Keystone-expansion simulation");
  add_run_flags(expansion_cmd, expansion_flags);
  expansion_cmd->add_option("--k-values", k_values, "Keystone sizes to sweep")
      ->delimiter(',');

  SharedFlags incoherence_flags;
  auto* incoherence_cmd =
      app.add_subcommand("incoherence", "Generate/re-classify incoherence scoring");
  add_run_flags(incoherence_cmd, incoherence_flags);

  SharedFlags autoeval_flags;
  std::string seed_questions_path;
  auto* autoeval_cmd =
      app.add_subcommand("autoeval", "Automated potemkin-rate lower bound");
  add_run_flags(autoeval_cmd, autoeval_flags);
  autoeval_cmd
      ->add_option("--seed-questions", seed_questions_path,
                   "Seed questions file (JSON)")
      ->required();

  // --- report --------------------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "Render tables for a run directory");
  std::string run_dir;
  report_cmd->add_option("--run", run_dir, "Run directory with report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (keystone_cmd->parsed()) {
    return guarded([&] {
      auto spec = potemkin::ConceptSpec::load(concept_spec_path);
      json doc;
      doc["concept_id"] = spec.concept_id();
      doc["mode"] = keystone_mode;
      if (keystone_mode == "enumerate") {
        auto enumeration = potemkin::enumerate_minimal_keystones(spec, keystone_limit);
        doc["truncated"] = enumeration.truncated;
        doc["keystones"] = json::array();
        for (const auto& ks : enumeration.keystones) {
          doc["keystones"].push_back(
              {{"keystone", ks.instance_ids(spec.space())},
               {"certificate", potemkin::to_string(ks.certificate)},
               {"objective", ks.objective}});
        }
      } else {
        auto ks = keystone_mode == "greedy" ? potemkin::greedy_keystone(spec)
                                            : potemkin::minimum_keystone(spec);
        doc["keystone"] = ks.instance_ids(spec.space());
        doc["certificate"] = potemkin::to_string(ks.certificate);
        doc["objective"] = ks.objective;
        doc["truncated"] = false;
        if (ks.search_budget_exhausted) doc["search_budget_exhausted"] = true;
      }
      const std::string text = doc.dump(2) + "\n";
      std::cout << text;
      if (!keystone_out.empty()) {
        fs::create_directories(keystone_out);
        std::ofstream out(fs::path(keystone_out) / "keystone.json", std::ios::trunc);
        out << text;
      }
    });
  }

  if (simulate_cmd->parsed()) {
    return guarded([&] {
      potemkin::HumanSpaceParams human;
      human.n_instances = sim_instances;
      human.n_rules = sim_rules;
      human.flip_block_size = sim_block;
      human.seed = sim_seed;
      std::vector<potemkin::LlmSpaceParams> grid;
      for (std::size_t i = 0; i < sim_flip_probs.size(); ++i) {
        potemkin::LlmSpaceParams params;
        params.n_instances = sim_instances;
        params.n_interps = sim_llm_interps;
        params.flip_probability = sim_flip_probs[i];
        params.seed = potemkin::SplitMix64::derive(sim_seed, "llm_grid_" + std::to_string(i));
        grid.push_back(params);
      }
      auto points = potemkin::validity_sweep(human, grid);

      json doc;
      doc["human"] = {{"n_instances", human.n_instances},
                      {"n_rules", human.n_rules},
                      {"flip_block_size", human.flip_block_size},
                      {"seed", human.seed}};
      doc["points"] = json::array();
      std::ostringstream csv;
      csv << "flip_probability,n_interps,n_potemkin,potemkin_fraction\n";
      for (const auto& point : points) {
        doc["points"].push_back({{"flip_probability", point.flip_probability},
                                 {"n_interps", point.n_interps},
                                 {"n_potemkin", point.n_potemkin},
                                 {"potemkin_fraction", point.potemkin_fraction}});
        csv << json_number(point.flip_probability) << ',' << point.n_interps << ','
            << point.n_potemkin << ',' << json_number(point.potemkin_fraction) << '\n';
      }
      fs::create_directories(sim_out);
      {
        std::ofstream out(fs::path(sim_out) / "sweep.json", std::ios::trunc);
        out << doc.dump(2) << '\n';
      }
      {
        std::ofstream out(fs::path(sim_out) / "sweep.csv", std::ios::trunc);
        out << csv.str();
      }
      std::cout << csv.str();
    });
  }

  if (bench_cmd->parsed()) {
    return guarded([&] {
      auto setup = setup_from_flags(bench_flags, /*need_dataset=*/true);
      auto report = potemkin::run_benchmark(*setup.dataset, *setup.oracle, setup.config);
      finish_run(setup, report, bench_flags.out_dir);
    });
  }

  if (expansion_cmd->parsed()) {
    return guarded([&] {
      auto setup = setup_from_flags(expansion_flags, /*need_dataset=*/true);
      auto report = potemkin::run_keystone_expansion(*setup.dataset, *setup.oracle,
                                                     setup.config, k_values);
      // Curve points as CSV for plotting.
      std::ostringstream csv;
      csv << "k,model,understanding,contributing\n";
      auto rows_for = [&](const std::string& label, const json& curve) {
        for (const auto& point : curve) {
          csv << point["k"].get<std::size_t>() << ',' << label << ',';
          if (!point["understanding"].is_null()) {
            csv << json_number(point["understanding"].get<double>());
          }
          csv << ',' << point["contributing"].get<std::size_t>() << '\n';
        }
      };
      for (const auto& model : report.doc["models"]) {
        const std::string m = model.get<std::string>();
        rows_for(m, report.doc["per_model"][m]["curve"]);
      }
      rows_for("pooled", report.doc["pooled"]["curve"]);
      fs::create_directories(expansion_flags.out_dir);
      {
        std::ofstream out(fs::path(expansion_flags.out_dir) / "curve.csv",
                          std::ios::trunc);
        out << csv.str();
      }
      finish_run(setup, report, expansion_flags.out_dir);
    });
  }

  if (incoherence_cmd->parsed()) {
    return guarded([&] {
      auto setup = setup_from_flags(incoherence_flags, /*need_dataset=*/true);
      auto report = potemkin::run_incoherence(*setup.dataset, *setup.oracle, setup.config);
      finish_run(setup, report, incoherence_flags.out_dir);
    });
  }

  if (autoeval_cmd->parsed()) {
    return guarded([&] {
      auto setup = setup_from_flags(autoeval_flags, /*need_dataset=*/false);
      auto seeds = potemkin::load_seed_questions(seed_questions_path);
      auto report = potemkin::run_autoeval(seeds, *setup.oracle, setup.config);
      finish_run(setup, report, autoeval_flags.out_dir);
    });
  }

  if (report_cmd->parsed()) {
    return guarded([&] {
      auto report = potemkin::RunReport::load_dir(run_dir);
      std::cout << potemkin::render_tables(report.doc);
    });
  }

  return 0;
}
