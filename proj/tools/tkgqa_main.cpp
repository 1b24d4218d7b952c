// Command-line entry point: ingest / index / run / mine / report.
//
// Option precedence: flags > --config file > built-in defaults. The config
// file is a flat JSON object whose keys match the long option names
// (without leading dashes, '-' or '_' interchangeable).

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tkgqa/cli.hpp"
#include "tkgqa/errors.hpp"

namespace {

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tkgqa::UsageError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw tkgqa::UsageError("bad config file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw tkgqa::UsageError("config file must be a JSON object");
  return j;
}

std::string canon_key(std::string key) {
  for (char& c : key) {
    if (c == '-') c = '_';
  }
  return key;
}

// Applies config values to options the user did not set on the command line.
void apply_config(CLI::App* cmd, const nlohmann::json& cfg) {
  for (const auto& [raw_key, value] : cfg.items()) {
    const std::string key = canon_key(raw_key);
    for (CLI::Option* opt : cmd->get_options()) {
      if (opt->count() > 0) continue;
      bool match = false;
      for (const auto& lname : opt->get_lnames()) {
        if (canon_key(lname) == key) {
          match = true;
          break;
        }
      }
      if (!match) continue;
      if (value.is_boolean()) {
        if (value.get<bool>()) opt->add_result("true");
      } else if (value.is_string()) {
        opt->add_result(value.get<std::string>());
      } else {
        opt->add_result(value.dump());
      }
      opt->run_callback();
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal knowledge graph question answering agent pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON config file (flags override its values)");

  tkgqa::IngestOptions ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Build store artifacts from a tsv-quad graph");
  c_ingest->add_option("--graph", ingest.graph_path, "tsv-quad input file")->required();
  c_ingest->add_option("--out", ingest.out_dir, "output directory")->required();

  tkgqa::IndexOptions index;
  auto* c_index = app.add_subcommand("index", "Embed all facts into a binary index");
  c_index->add_option("--store", index.store_dir, "store artifact directory")->required();
  c_index->add_option("--embedder", index.embedder, "embedder selector");
  c_index->add_option("--out", index.out_path, "output index file")->required();
  c_index->add_option("--batch-size", index.batch_size, "embedding batch size");

  tkgqa::RunOptions run;
  auto* c_run = app.add_subcommand("run", "Run agent episodes over a question file");
  c_run->add_option("--questions", run.questions_path, "question JSONL")->required();
  c_run->add_option("--store", run.store_dir, "store artifact directory")->required();
  c_run->add_option("--index", run.index_path, "fact index file")->required();
  c_run->add_option("--embedder", run.embedder, "embedder selector");
  c_run->add_flag("--force-fingerprint", run.force_fingerprint,
                  "load the index even if its fingerprint mismatches");
  c_run->add_option("--endpoint", run.gateway.endpoint, "chat endpoint base URL");
  c_run->add_option("--model", run.gateway.model, "model name");
  c_run->add_option("--key-env", run.gateway.api_key_env, "API key env var");
  c_run->add_option("--scripted", run.gateway.scripted_path,
                    "scripted responder JSON (offline mode)");
  c_run->add_option("--trace", run.gateway.trace_path, "gateway trace JSONL");
  c_run->add_option("--max-in-flight", run.gateway.max_in_flight,
                    "parallel request cap");
  c_run->add_option("--library", run.library_path, "experience library JSON");
  c_run->add_option("--t-max", run.t_max, "max interaction rounds");
  c_run->add_option("--limit", run.limit, "facts returned per search");
  c_run->add_option("--rerank-pool", run.rerank_pool, "time-mode rerank pool");
  c_run->add_option("--sort", run.sort, "default sort mode: relevance|time");
  c_run->add_flag("--sort-desc", run.sort_descending,
                  "time mode sorts newest first");
  c_run->add_option("--temperature", run.temperature, "decoding temperature");
  c_run->add_option("--retry-budget", run.malformed_retry_budget,
                    "malformed-output retries per episode");
  c_run->add_option("--obs-cap", run.observation_byte_cap,
                    "observation byte cap");
  c_run->add_flag("--obs-user-role", run.observation_as_user_role,
                  "send observations as user-role messages");
  c_run->add_flag("--resume", run.resume, "skip questions already completed");
  c_run->add_option("--workers", run.workers, "parallel episodes");
  c_run->add_option("--seed", run.seed, "run seed");
  c_run->add_option("--out", run.out_dir, "output directory")->required();

  tkgqa::MineOptions mineo;
  auto* c_mine = app.add_subcommand("mine", "Mine an experience library from self-generated traces");
  c_mine->add_option("--train", mineo.train_questions_path, "training questions JSONL")->required();
  c_mine->add_option("--val", mineo.val_questions_path, "validation questions JSONL")->required();
  c_mine->add_option("--store", mineo.store_dir, "store artifact directory")->required();
  c_mine->add_option("--index", mineo.index_path, "fact index file")->required();
  c_mine->add_option("--embedder", mineo.embedder, "embedder selector");
  c_mine->add_flag("--force-fingerprint", mineo.force_fingerprint,
                   "load the index even if its fingerprint mismatches");
  c_mine->add_option("--endpoint", mineo.gateway.endpoint, "chat endpoint base URL");
  c_mine->add_option("--model", mineo.gateway.model, "model name");
  c_mine->add_option("--key-env", mineo.gateway.api_key_env, "API key env var");
  c_mine->add_option("--scripted", mineo.gateway.scripted_path,
                     "scripted responder JSON (offline mode)");
  c_mine->add_option("--trace", mineo.gateway.trace_path, "gateway trace JSONL");
  c_mine->add_option("--k-shots", mineo.k_shots, "library budget K");
  c_mine->add_option("--group-size", mineo.group_size, "traces per question G");
  c_mine->add_option("--batch-size", mineo.batch_size, "questions per round N");
  c_mine->add_option("--rounds", mineo.rounds, "mining rounds");
  c_mine->add_option("--val-slice", mineo.val_slice, "validation slice size");
  c_mine->add_option("--t-max", mineo.t_max, "max interaction rounds");
  c_mine->add_option("--limit", mineo.limit, "facts returned per search");
  c_mine->add_option("--rerank-pool", mineo.rerank_pool, "time-mode rerank pool");
  c_mine->add_option("--temperature", mineo.temperature, "decoding temperature");
  c_mine->add_option("--seed", mineo.seed, "run seed");
  c_mine->add_option("--out", mineo.out_dir, "output directory")->required();

  tkgqa::ReportOptions report;
  auto* c_report = app.add_subcommand("report", "Aggregate metrics and plot series");
  c_report->add_option("--records", report.records_path, "EvalRecord JSONL")->required();
  c_report->add_option("--trajectories", report.trajectories_path, "trajectory JSONL");
  c_report->add_option("--gold-facts", report.sidecar_path, "gold-fact sidecar TSV");
  c_report->add_option("--pass-k", report.pass_k, "largest k for the Pass@k series");
  c_report->add_option("--out", report.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? tkgqa::exit_code::kOk : tkgqa::exit_code::kUsage;
  }

  try {
    if (!config_path.empty()) {
      const auto cfg = load_config(config_path);
      for (CLI::App* sub : app.get_subcommands()) apply_config(sub, cfg);
    }
    CLI::App* sub = app.get_subcommands().front();
    if (sub == c_ingest) return tkgqa::cmd_ingest(ingest, std::cout, std::cerr);
    if (sub == c_index) return tkgqa::cmd_index(index, std::cout, std::cerr);
    if (sub == c_run) return tkgqa::cmd_run(run, std::cout, std::cerr);
    if (sub == c_mine) return tkgqa::cmd_mine(mineo, std::cout, std::cerr);
    if (sub == c_report) return tkgqa::cmd_report(report, std::cout, std::cerr);
  } catch (const tkgqa::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return tkgqa::exit_code::kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return tkgqa::exit_code::kData;
  }
  return tkgqa::exit_code::kUsage;
}
