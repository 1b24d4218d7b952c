#include "tkgqa/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <thread>

#include "tkgqa/agent.hpp"
#include "tkgqa/errors.hpp"
#include "tkgqa/eval.hpp"
#include "tkgqa/index.hpp"
#include "tkgqa/miner.hpp"
#include "tkgqa/search.hpp"
#include "tkgqa/store.hpp"
#include "tkgqa/util.hpp"

namespace tkgqa {

namespace fs = std::filesystem;

namespace {

int guard(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const PreconditionViolation& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const EndpointUnavailable& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kUpstream;
  } catch (const RateLimited& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kUpstream;
  } catch (const EmbedderUnavailable& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kUpstream;
  } catch (const ContextTooLong& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kUpstream;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kData;
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write: " + path);
  out << body;
  if (!out) throw IoError("write failed: " + path);
}

std::unique_ptr<ChatGateway> make_gateway(const GatewayOptions& opt,
                                          std::uint64_t seed) {
  if (!opt.scripted_path.empty()) {
    return std::make_unique<ScriptedResponder>(
        ScriptedResponder::from_file(opt.scripted_path));
  }
  if (opt.endpoint.empty() || opt.model.empty()) {
    throw UsageError("remote gateway needs --endpoint and --model "
                     "(or use --scripted for an offline run)");
  }
  HttpChatGateway::Config cfg;
  cfg.endpoint = opt.endpoint;
  cfg.model = opt.model;
  cfg.api_key_env = opt.api_key_env;
  cfg.max_in_flight = opt.max_in_flight;
  cfg.trace_path = opt.trace_path;
  cfg.retry.seed = subsystem_seed(seed, "gateway.retry");
  return std::make_unique<HttpChatGateway>(std::move(cfg));
}

struct LoadedPipeline {
  TkgStore store;
  FactIndex index;
  std::unique_ptr<Embedder> embedder;
};

LoadedPipeline load_pipeline(const std::string& store_dir,
                             const std::string& index_path,
                             const std::string& embedder_selector,
                             bool force_fingerprint) {
  LoadedPipeline p;
  p.store = TkgStore::load_artifacts(store_dir);
  p.embedder = make_embedder(embedder_selector);
  p.index = FactIndex::load(index_path, p.embedder->fingerprint(),
                            force_fingerprint);
  if (p.index.rows() != p.store.fact_count()) {
    throw UsageError("index has " + std::to_string(p.index.rows()) +
                     " rows but store has " +
                     std::to_string(p.store.fact_count()) + " facts");
  }
  return p;
}

void validate_range(const char* name, int value, int lo, int hi) {
  if (value < lo || value > hi) {
    throw UsageError(std::string(name) + " must be in [" + std::to_string(lo) +
                     ", " + std::to_string(hi) + "], got " +
                     std::to_string(value));
  }
}

SearchConstraints search_defaults_from(int limit, int rerank_pool,
                                       const std::string& sort,
                                       bool descending) {
  SearchConstraints defaults;
  defaults.limit = limit;
  defaults.rerank_pool = rerank_pool;
  defaults.time_descending = descending;
  if (sort == "relevance") {
    defaults.sort_mode = SortMode::Relevance;
  } else if (sort == "time") {
    defaults.sort_mode = SortMode::Time;
  } else {
    throw UsageError("sort must be \"relevance\" or \"time\", got \"" + sort +
                     "\"");
  }
  defaults.normalize();
  return defaults;
}

}  // namespace

// --- ingest -----------------------------------------------------------------

int cmd_ingest(const IngestOptions& opt, std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    if (opt.graph_path.empty() || opt.out_dir.empty()) {
      throw UsageError("ingest needs a graph path and an output directory");
    }
    const TkgStore store = TkgStore::load_graph(opt.graph_path);
    store.save_artifacts(opt.out_dir);
    out << "facts=" << store.fact_count()
        << " entities=" << store.entity_count()
        << " relations=" << store.relation_count() << "\n";
    return exit_code::kOk;
  });
}

// --- index ------------------------------------------------------------------

int cmd_index(const IndexOptions& opt, std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    if (opt.store_dir.empty() || opt.out_path.empty()) {
      throw UsageError("index needs a store directory and an output path");
    }
    const TkgStore store = TkgStore::load_artifacts(opt.store_dir);
    auto embedder = make_embedder(opt.embedder);
    const FactIndex index = build_index(store, *embedder, opt.batch_size);
    index.save(opt.out_path);
    out << "indexed=" << index.rows() << " dim=" << index.dimension()
        << " fingerprint=" << index.fingerprint() << "\n";
    return exit_code::kOk;
  });
}

// --- run --------------------------------------------------------------------

namespace {

struct EpisodeOutput {
  Trajectory trajectory;
  EvalRecord record;
  bool failed = false;
  std::string failure;
};

EpisodeOutput run_one(const QuestionRecord& q, const EpisodeConfig& episode,
                      const SearchContext& ctx, ChatGateway& gateway) {
  EpisodeOutput out;
  try {
    out.trajectory = run_episode(q.id, q.text, episode, ctx, gateway);
  } catch (const EndpointUnavailable& e) {
    out.failed = true;
    out.failure = e.what();
    return out;
  } catch (const RateLimited& e) {
    out.failed = true;
    out.failure = e.what();
    return out;
  }
  out.record.question_id = q.id;
  if (out.trajectory.final_answer) {
    out.record.prediction = *out.trajectory.final_answer;
  }
  out.record.gold = q.gold_answers;
  out.record.hit = score_trace(out.trajectory, q.gold_answers);
  out.record.rounds_used = out.trajectory.rounds_used;
  out.record.trajectory_ref = q.id;
  out.record.labels = q.labels;
  return out;
}

}  // namespace

int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    validate_range("t-max", opt.t_max, 1, 100);
    validate_range("limit", opt.limit, 1, 100);
    if (opt.out_dir.empty()) throw UsageError("run needs --out");
    ensure_dir(opt.out_dir);

    auto pipeline = load_pipeline(opt.store_dir, opt.index_path, opt.embedder,
                                  opt.force_fingerprint);
    auto gateway = make_gateway(opt.gateway, opt.seed);
    const bool scripted = !opt.gateway.scripted_path.empty();

    auto questions = load_questions(opt.questions_path);

    EpisodeConfig episode;
    episode.t_max = opt.t_max;
    episode.decoding.temperature = opt.temperature;
    episode.malformed_retry_budget = opt.malformed_retry_budget;
    episode.observation_byte_cap = opt.observation_byte_cap;
    episode.observation_role = opt.observation_as_user_role
                                   ? ObservationRole::User
                                   : ObservationRole::Tool;
    episode.deterministic_timing = scripted;
    episode.search_defaults = search_defaults_from(
        opt.limit, opt.rerank_pool, opt.sort, opt.sort_descending);
    if (!opt.library_path.empty()) {
      episode.demonstrations =
          ExperienceLibrary::load(opt.library_path).demonstration_texts();
    }

    const std::string traj_path = opt.out_dir + "/trajectories.jsonl";
    const std::string rec_path = opt.out_dir + "/records.jsonl";

    std::set<std::string> done;
    if (opt.resume && fs::exists(traj_path)) {
      for (const auto& t : load_trajectories(traj_path)) {
        done.insert(t.question_id);
      }
    } else {
      std::error_code ec;
      fs::remove(traj_path, ec);
      fs::remove(rec_path, ec);
    }

    std::vector<const QuestionRecord*> todo;
    for (const auto& q : questions) {
      if (!done.count(q.id)) todo.push_back(&q);
    }

    SearchContext ctx{&pipeline.store, &pipeline.index, pipeline.embedder.get()};

    std::vector<std::optional<EpisodeOutput>> results(todo.size());
    std::mutex mu;
    std::size_t next_input = 0;
    std::size_t next_flush = 0;
    std::size_t completed = 0;
    std::size_t hits = 0;
    std::size_t failures = 0;
    std::string first_failure;

    const auto flush_ready = [&](std::unique_lock<std::mutex>&) {
      while (next_flush < results.size() && results[next_flush]) {
        auto& r = **(results.begin() + static_cast<std::ptrdiff_t>(next_flush));
        if (!r.failed) {
          append_trajectory(traj_path, r.trajectory);
          append_eval_record(rec_path, r.record);
        }
        results[next_flush].reset();
        ++next_flush;
      }
    };

    const int workers =
        std::max(1, std::min<int>(opt.workers,
                                  static_cast<int>(todo.size() ? todo.size() : 1)));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard lock(mu);
            if (next_input >= todo.size()) return;
            i = next_input++;
          }
          EpisodeOutput result = run_one(*todo[i], episode, ctx, *gateway);
          std::unique_lock lock(mu);
          ++completed;
          if (result.failed) {
            ++failures;
            if (first_failure.empty()) first_failure = result.failure;
            err << "episode failed (resumable): " << todo[i]->id << ": "
                << result.failure << "\n";
          } else {
            hits += static_cast<std::size_t>(result.record.hit);
            err << "[" << completed << "/" << todo.size() << "] "
                << todo[i]->id << " hit=" << result.record.hit
                << " rolling_hits_at_1="
                << format_fixed(static_cast<double>(hits) /
                                    static_cast<double>(completed),
                                3)
                << "\n";
          }
          results[i] = std::move(result);
          flush_ready(lock);
        }
      });
    }
    for (auto& t : pool) t.join();
    {
      std::unique_lock lock(mu);
      flush_ready(lock);
    }

    const std::size_t attempted = todo.size();
    const std::size_t ok = attempted - failures;
    out << "questions=" << questions.size() << " skipped=" << done.size()
        << " completed=" << ok << " failed=" << failures;
    if (ok > 0) {
      out << " hits_at_1="
          << format_fixed(static_cast<double>(hits) / static_cast<double>(ok), 3);
    }
    out << "\n";
    if (failures > 0) {
      err << "error: " << failures
          << " episode(s) failed and remain resumable; first: " << first_failure
          << "\n";
      return exit_code::kUpstream;
    }
    return exit_code::kOk;
  });
}

// --- mine ---------------------------------------------------------------------

int cmd_mine(const MineOptions& opt, std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    validate_range("t-max", opt.t_max, 1, 100);
    validate_range("limit", opt.limit, 1, 100);
    validate_range("k-shots", opt.k_shots, 1, 16);
    validate_range("group-size", opt.group_size, 1, 64);
    if (opt.out_dir.empty()) throw UsageError("mine needs --out");
    ensure_dir(opt.out_dir);

    auto pipeline = load_pipeline(opt.store_dir, opt.index_path, opt.embedder,
                                  opt.force_fingerprint);
    auto gateway = make_gateway(opt.gateway, opt.seed);
    const bool scripted = !opt.gateway.scripted_path.empty();

    const auto train = load_questions(opt.train_questions_path);
    const auto val = load_questions(opt.val_questions_path);

    MinerConfig cfg;
    cfg.group_size = opt.group_size;
    cfg.batch_size = opt.batch_size;
    cfg.budget = opt.k_shots;
    cfg.rounds = opt.rounds;
    cfg.val_slice = opt.val_slice;
    cfg.seed = opt.seed;
    cfg.episode.t_max = opt.t_max;
    cfg.episode.decoding.temperature = opt.temperature;
    cfg.episode.deterministic_timing = scripted;
    cfg.episode.search_defaults =
        search_defaults_from(opt.limit, opt.rerank_pool, "relevance", false);

    SearchContext ctx{&pipeline.store, &pipeline.index, pipeline.embedder.get()};
    const MiningOutcome outcome = mine(train, val, cfg, ctx, *gateway);

    outcome.library.save(opt.out_dir + "/library.json");
    write_text_file(opt.out_dir + "/mining_report.tsv",
                    mining_report_tsv(outcome.report));

    std::string summary;
    summary += "groups_sampled=" + std::to_string(outcome.groups_sampled) + "\n";
    summary += "successful_traces=" + std::to_string(outcome.successful_traces) + "\n";
    summary += "library_size=" + std::to_string(outcome.library.entries().size()) +
               " budget=" + std::to_string(outcome.library.budget()) + "\n";
    for (const auto& n : outcome.notices) summary += "notice: " + n + "\n";
    write_text_file(opt.out_dir + "/summary.txt", summary);

    out << summary;
    if (outcome.successful_traces == 0) {
      out << "no successful traces anywhere; library is empty\n";
    }
    return exit_code::kOk;
  });
}

// --- report ---------------------------------------------------------------------

int cmd_report(const ReportOptions& opt, std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    if (opt.records_path.empty()) throw UsageError("report needs records");
    if (opt.out_dir.empty()) throw UsageError("report needs --out");
    ensure_dir(opt.out_dir);

    const auto records = load_eval_records(opt.records_path);
    const Report report = aggregate_report(records);
    write_text_file(opt.out_dir + "/report.tsv", report.to_tsv());
    write_text_file(opt.out_dir + "/report.txt", report.to_text());
    out << report.to_text();

    // Pass@k series: records grouped by question id, file order = sample order.
    std::vector<std::string> order;
    std::map<std::string, std::vector<int>> by_question;
    for (const auto& r : records) {
      auto it = by_question.find(r.question_id);
      if (it == by_question.end()) {
        order.push_back(r.question_id);
        by_question[r.question_id] = {r.hit};
      } else {
        it->second.push_back(r.hit);
      }
    }
    std::vector<std::vector<int>> rewards;
    rewards.reserve(order.size());
    std::size_t k_max = 0;
    for (const auto& id : order) {
      rewards.push_back(by_question[id]);
      const std::size_t n = rewards.back().size();
      k_max = k_max == 0 ? n : std::min(k_max, n);
    }
    if (!rewards.empty()) {
      const std::size_t upto =
          opt.pass_k > 0 ? static_cast<std::size_t>(opt.pass_k) : k_max;
      std::string tsv = "k\tpass_at_k\n";
      for (std::size_t k = 1; k <= upto; ++k) {
        tsv += std::to_string(k) + "\t" +
               format_fixed(pass_at_k(rewards, static_cast<int>(k)), 6) + "\n";
      }
      write_text_file(opt.out_dir + "/pass_at_k.tsv", tsv);
    }

    // Interaction-budget series: a trajectory that answered within r rounds
    // would answer identically under any cap >= r.
    if (!records.empty()) {
      int max_rounds = 1;
      for (const auto& r : records) max_rounds = std::max(max_rounds, r.rounds_used);
      std::string tsv = "t_max\thits_at_1\n";
      for (int cap = 1; cap <= max_rounds; ++cap) {
        std::size_t hits = 0;
        for (const auto& r : records) {
          if (r.hit == 1 && r.rounds_used <= cap) ++hits;
        }
        tsv += std::to_string(cap) + "\t" +
               format_fixed(static_cast<double>(hits) /
                                static_cast<double>(records.size()),
                            6) +
               "\n";
      }
      write_text_file(opt.out_dir + "/budget_series.tsv", tsv);
    }

    // Gold-fact CDF needs both the sidecar and trajectories.
    if (!opt.sidecar_path.empty() && !opt.trajectories_path.empty()) {
      const auto sidecar = load_gold_fact_sidecar(opt.sidecar_path);
      const auto trajectories = load_trajectories(opt.trajectories_path);
      const auto cdf = gold_fact_cdf(trajectories, records, sidecar);
      std::string tsv = "position\tcumulative\n";
      for (const auto& p : cdf) {
        tsv += format_fixed(p.position, 6) + "\t" +
               format_fixed(p.cumulative, 6) + "\n";
      }
      write_text_file(opt.out_dir + "/gold_fact_cdf.tsv", tsv);
    } else {
      out << "gold-fact analysis skipped (no sidecar)\n";
    }
    return exit_code::kOk;
  });
}

}  // namespace tkgqa
