#include "tkgqa/miner.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "tkgqa/assets_gen.hpp"
#include "tkgqa/errors.hpp"
#include "tkgqa/util.hpp"

namespace tkgqa {

// --- ExperienceLibrary ----------------------------------------------------

std::vector<std::string> ExperienceLibrary::demonstration_texts() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.text);
  return out;
}

void ExperienceLibrary::set_entries(std::vector<AdvantageExperience> entries) {
  entries_ = std::move(entries);
}

void ExperienceLibrary::log_event(nlohmann::json event) {
  provenance_.push_back(std::move(event));
}

namespace {
constexpr int kLibrarySchemaVersion = 1;

nlohmann::json experience_to_json(const AdvantageExperience& e) {
  nlohmann::json j;
  j["text"] = e.text;
  j["source"] = {{"question_id", e.source_question_id},
                 {"trace_index", e.source_trace_index}};
  j["rank_score"] = e.rank_score;
  if (e.validation_gain) {
    j["validation_gain"] = *e.validation_gain;
  } else {
    j["validation_gain"] = nullptr;
  }
  j["ranking_fallback"] = e.ranking_fallback;
  return j;
}

AdvantageExperience experience_from_json(const nlohmann::json& j) {
  AdvantageExperience e;
  e.text = j.value("text", "");
  if (j.contains("source")) {
    e.source_question_id = j["source"].value("question_id", "");
    e.source_trace_index = j["source"].value("trace_index", -1);
  }
  e.rank_score = j.value("rank_score", 0);
  if (j.contains("validation_gain") && !j["validation_gain"].is_null()) {
    e.validation_gain = j["validation_gain"].get<double>();
  }
  e.ranking_fallback = j.value("ranking_fallback", false);
  return e;
}
}  // namespace

void ExperienceLibrary::save(const std::string& path) const {
  nlohmann::json j;
  j["schema_version"] = kLibrarySchemaVersion;
  j["budget"] = budget_;
  auto& entries = j["entries"] = nlohmann::json::array();
  for (const auto& e : entries_) entries.push_back(experience_to_json(e));
  j["provenance"] = provenance_;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write library file: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

ExperienceLibrary ExperienceLibrary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open library file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad library file " + path + ": " + e.what());
  }
  if (j.value("schema_version", 0) != kLibrarySchemaVersion) {
    throw IoError("unsupported library schema version in " + path);
  }
  ExperienceLibrary lib(j.value("budget", 3));
  std::vector<AdvantageExperience> entries;
  for (const auto& je : j.value("entries", nlohmann::json::array())) {
    entries.push_back(experience_from_json(je));
  }
  lib.set_entries(std::move(entries));
  if (j.contains("provenance")) lib.provenance_ = j["provenance"];
  return lib;
}

// --- digests and rewards ----------------------------------------------------

namespace {

std::string first_sentence(const std::string& text, std::size_t cap = 160) {
  std::string t = collapse_ws(text);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == '.' || t[i] == '?' || t[i] == '!') {
      t = t.substr(0, i + 1);
      break;
    }
  }
  if (t.size() > cap) t = t.substr(0, cap) + "...";
  return t;
}

std::string first_lines(const std::string& text, int n) {
  std::size_t pos = 0;
  int lines = 0;
  while (pos < text.size() && lines < n) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) return text;
    pos = nl + 1;
    ++lines;
  }
  std::string out = text.substr(0, pos > 0 ? pos - 1 : 0);
  if (pos < text.size()) out += " ...";
  return out;
}

}  // namespace

std::string trajectory_digest(const Trajectory& t, const QuestionRecord& q) {
  std::string out = "Question: " + q.text + "\n";
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& s = t.steps[i];
    out += "Step " + std::to_string(i + 1) + ": ";
    if (!s.think.empty()) out += "think: " + first_sentence(s.think) + " | ";
    switch (s.action.kind) {
      case ActionKind::Search:
        out += "search: " + collapse_ws(s.action.raw_search_json) + "\n";
        out += "  observed: " + first_lines(s.observation, 2) + "\n";
        break;
      case ActionKind::Answer:
        out += "answer: " + s.action.answer_text.value_or("") + "\n";
        break;
      case ActionKind::Malformed:
        out += "(malformed turn)\n";
        break;
    }
  }
  out += "Final answer: ";
  out += t.final_answer ? join(*t.final_answer, " | ") : "(none)";
  out += "\nRounds: " + std::to_string(t.rounds_used);
  return out;
}

int score_trace(const Trajectory& t, const std::vector<std::string>& gold) {
  if (t.termination != Termination::Answered || !t.final_answer) return 0;
  return hits_at_1(*t.final_answer, gold);
}

// --- sampling ---------------------------------------------------------------

std::vector<TraceGroup> sample_groups(const std::vector<QuestionRecord>& questions,
                                      int group_size, const MinerConfig& cfg,
                                      const SearchContext& ctx,
                                      ChatGateway& gateway) {
  if (group_size < 1) throw UsageError("group size must be >= 1");
  if (!gateway.deterministic() && cfg.episode.decoding.temperature <= 0.0) {
    throw UsageError(
        "group sampling needs stochastic decoding (temperature > 0) unless "
        "a scripted responder is in use");
  }
  std::vector<TraceGroup> groups;
  groups.reserve(questions.size());

  for (const auto& q : questions) {
    TraceGroup group;
    group.question_id = q.id;
    for (int g = 0; g < group_size; ++g) {
      EpisodeConfig episode = cfg.episode;
      episode.conversation_id = q.id + "#" + std::to_string(g);

      std::optional<Trajectory> traj;
      std::string last_error;
      for (int attempt = 0; attempt <= cfg.resample_budget; ++attempt) {
        try {
          traj = run_episode(q.id, q.text, episode, ctx, gateway);
          break;
        } catch (const EndpointUnavailable& e) {
          last_error = e.what();
        } catch (const RateLimited& e) {
          last_error = e.what();
        }
      }
      if (!traj) {
        // Resample budget spent: record a reward-0 placeholder.
        Trajectory failed;
        failed.question_id = q.id;
        failed.termination = Termination::ProtocolFailure;
        traj = std::move(failed);
        group.rewards.push_back(0);
        group.traces.push_back(std::move(*traj));
        continue;
      }
      group.rewards.push_back(score_trace(*traj, q.gold_answers));
      group.traces.push_back(std::move(*traj));
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

// --- distillation -----------------------------------------------------------

namespace {

struct RankedLessons {
  std::vector<int> order;                 // 1-based indices into successes
  std::map<int, std::string> lessons;     // index -> lesson text
};

// Expects "RANKING: 2,1,3" then "LESSON <n>: ..." blocks.
std::optional<RankedLessons> parse_ranking_reply(const std::string& reply,
                                                 int n_successes) {
  RankedLessons out;
  const auto lines = split(reply, '\n');
  std::size_t i = 0;
  for (; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.rfind("RANKING:", 0) == 0) {
      for (const auto& part : split(line.substr(8), ',')) {
        const auto t = trim(part);
        if (t.empty()) continue;
        try {
          out.order.push_back(std::stoi(t));
        } catch (const std::exception&) {
          return std::nullopt;
        }
      }
      ++i;
      break;
    }
  }
  // A strict ranking lists every transcript exactly once.
  if (out.order.size() != static_cast<std::size_t>(n_successes)) {
    return std::nullopt;
  }
  std::vector<bool> seen(static_cast<std::size_t>(n_successes) + 1, false);
  for (int idx : out.order) {
    if (idx < 1 || idx > n_successes || seen[static_cast<std::size_t>(idx)]) {
      return std::nullopt;
    }
    seen[static_cast<std::size_t>(idx)] = true;
  }

  int current = 0;
  std::string buffer;
  const auto flush = [&] {
    if (current != 0) out.lessons[current] = trim(buffer);
    buffer.clear();
  };
  for (; i < lines.size(); ++i) {
    const auto line = lines[i];
    const auto t = trim(line);
    if (t.rfind("LESSON", 0) == 0) {
      const auto colon = t.find(':');
      if (colon != std::string::npos) {
        const auto num = trim(t.substr(6, colon - 6));
        try {
          const int idx = std::stoi(num);
          flush();
          current = idx;
          buffer = trim(t.substr(colon + 1));
          continue;
        } catch (const std::exception&) {
          // fall through: treat as lesson body
        }
      }
    }
    if (current != 0) buffer += (buffer.empty() ? "" : "\n") + line;
  }
  flush();
  return out;
}

}  // namespace

std::vector<AdvantageExperience> distill_advantages(const TraceGroup& group,
                                                    const QuestionRecord& question,
                                                    ChatGateway& gateway,
                                                    int top_k) {
  std::vector<int> success_indices;
  for (std::size_t i = 0; i < group.traces.size(); ++i) {
    if (group.rewards[i] == 1) success_indices.push_back(static_cast<int>(i));
  }
  if (success_indices.empty()) return {};

  std::vector<std::string> digests;
  digests.reserve(success_indices.size());
  std::string transcripts;
  for (std::size_t i = 0; i < success_indices.size(); ++i) {
    digests.push_back(
        trajectory_digest(group.traces[static_cast<std::size_t>(success_indices[i])], question));
    transcripts += "Transcript " + std::to_string(i + 1) + ":\n" + digests[i] + "\n\n";
  }

  const std::string prompt =
      replace_all(assets::kRankingPromptV1, "{TRANSCRIPTS}", trim(transcripts));
  const int n = static_cast<int>(success_indices.size());

  std::optional<RankedLessons> ranked;
  DecodingConfig decoding;
  decoding.temperature = 0.0;
  std::vector<ChatMessage> messages{{Role::User, prompt}};
  for (int attempt = 0; attempt < 3 && !ranked; ++attempt) {
    const std::string conv_id =
        "rank:" + group.question_id + "#" + std::to_string(attempt);
    const std::string reply = gateway.chat(messages, decoding, conv_id);
    ranked = parse_ranking_reply(reply, n);
  }

  std::vector<AdvantageExperience> out;
  bool fallback = false;
  std::vector<int> order;  // 1-based into success_indices
  if (ranked) {
    order = ranked->order;
  } else {
    // Fallback: fewest rounds, then lowest episode cost, then sample order.
    fallback = true;
    for (int i = 1; i <= n; ++i) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const auto& ta = group.traces[static_cast<std::size_t>(success_indices[a - 1])];
      const auto& tb = group.traces[static_cast<std::size_t>(success_indices[b - 1])];
      if (ta.rounds_used != tb.rounds_used) return ta.rounds_used < tb.rounds_used;
      if (ta.cost_chars != tb.cost_chars) return ta.cost_chars < tb.cost_chars;
      return a < b;
    });
  }

  const int take = std::min(top_k, n);
  for (int pos = 0; pos < take; ++pos) {
    const int one_based = order[static_cast<std::size_t>(pos)];
    AdvantageExperience exp;
    exp.source_question_id = group.question_id;
    exp.source_trace_index = success_indices[static_cast<std::size_t>(one_based - 1)];
    exp.rank_score = pos + 1;
    exp.ranking_fallback = fallback;
    std::string lesson;
    if (ranked) {
      const auto it = ranked->lessons.find(one_based);
      if (it != ranked->lessons.end()) lesson = it->second;
    }
    const std::string& digest = digests[static_cast<std::size_t>(one_based - 1)];
    exp.text = lesson.empty() ? digest : lesson + "\n--- exemplar ---\n" + digest;
    out.push_back(std::move(exp));
  }
  return out;
}

// --- validation and library update -------------------------------------------

double validation_accuracy(const std::vector<QuestionRecord>& questions,
                           const std::vector<std::string>& demonstrations,
                           const MinerConfig& cfg, const SearchContext& ctx,
                           ChatGateway& gateway) {
  if (questions.empty()) {
    throw PreconditionViolation("validation slice is empty");
  }
  std::size_t hits = 0;
  for (const auto& q : questions) {
    EpisodeConfig episode = cfg.episode;
    episode.demonstrations = demonstrations;
    episode.conversation_id = "val:" + q.id;
    const Trajectory t = run_episode(q.id, q.text, episode, ctx, gateway);
    hits += static_cast<std::size_t>(score_trace(t, q.gold_answers));
  }
  return static_cast<double>(hits) / static_cast<double>(questions.size());
}

namespace {

struct RankedEntry {
  AdvantageExperience exp;
  bool incumbent = false;
  int seq = 0;  // admission order for incumbents, evaluation order otherwise
};

std::vector<std::string> texts_of(const std::vector<AdvantageExperience>& entries) {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.text);
  return out;
}

}  // namespace

ExperienceLibrary update_library(const ExperienceLibrary& lib,
                                 std::vector<AdvantageExperience> candidates,
                                 const std::vector<QuestionRecord>& val_questions,
                                 const MinerConfig& cfg,
                                 const SearchContext& ctx,
                                 ChatGateway& gateway) {
  ExperienceLibrary next(lib.budget());
  for (const auto& event : lib.provenance()) {
    next.log_event(event);
  }

  const double baseline = validation_accuracy(
      val_questions, lib.demonstration_texts(), cfg, ctx, gateway);

  std::vector<RankedEntry> pool;
  for (std::size_t i = 0; i < lib.entries().size(); ++i) {
    pool.push_back({lib.entries()[i], true, static_cast<int>(i)});
  }

  const bool at_budget =
      lib.entries().size() >= static_cast<std::size_t>(lib.budget());
  // Index (into lib.entries) of the lowest-gain incumbent; ties evict the
  // most recently admitted.
  int evict_index = -1;
  if (at_budget && !lib.entries().empty()) {
    evict_index = 0;
    for (std::size_t i = 1; i < lib.entries().size(); ++i) {
      const double gi = lib.entries()[i].validation_gain.value_or(0.0);
      const double ge = lib.entries()[static_cast<std::size_t>(evict_index)]
                            .validation_gain.value_or(0.0);
      if (gi <= ge) evict_index = static_cast<int>(i);
    }
  }

  int seq = static_cast<int>(lib.entries().size());
  for (auto& cand : candidates) {
    std::vector<AdvantageExperience> test_entries;
    for (std::size_t i = 0; i < lib.entries().size(); ++i) {
      if (at_budget && static_cast<int>(i) == evict_index) continue;
      test_entries.push_back(lib.entries()[i]);
    }
    test_entries.push_back(cand);

    double acc;
    try {
      acc = validation_accuracy(val_questions, texts_of(test_entries), cfg,
                                ctx, gateway);
    } catch (const Error& e) {
      next.log_event({{"event", "candidate_skipped"},
                      {"question_id", cand.source_question_id},
                      {"trace_index", cand.source_trace_index},
                      {"reason", e.what()}});
      cand.validation_gain.reset();
      continue;
    }
    cand.validation_gain = acc - baseline;
    next.log_event({{"event", "candidate_measured"},
                    {"question_id", cand.source_question_id},
                    {"trace_index", cand.source_trace_index},
                    {"rank_score", cand.rank_score},
                    {"gain", *cand.validation_gain}});
    pool.push_back({cand, false, seq++});
  }

  // Keep incumbents and improving candidates; top-K by recorded gain,
  // ties favor incumbents, then earlier admission/evaluation.
  std::erase_if(pool, [](const RankedEntry& r) {
    if (r.incumbent) return false;
    return !r.exp.validation_gain || *r.exp.validation_gain <= 0.0;
  });
  std::stable_sort(pool.begin(), pool.end(),
                   [](const RankedEntry& a, const RankedEntry& b) {
                     const double ga = a.exp.validation_gain.value_or(0.0);
                     const double gb = b.exp.validation_gain.value_or(0.0);
                     if (ga != gb) return ga > gb;
                     if (a.incumbent != b.incumbent) return a.incumbent;
                     return a.seq < b.seq;
                   });
  if (pool.size() > static_cast<std::size_t>(lib.budget())) {
    pool.resize(static_cast<std::size_t>(lib.budget()));
  }

  std::vector<AdvantageExperience> selected;
  selected.reserve(pool.size());
  for (auto& r : pool) selected.push_back(std::move(r.exp));

  // Log membership changes.
  const auto in_old = [&](const AdvantageExperience& e) {
    for (const auto& o : lib.entries()) {
      if (o.source_question_id == e.source_question_id &&
          o.source_trace_index == e.source_trace_index && o.text == e.text) {
        return true;
      }
    }
    return false;
  };
  const auto in_new = [&](const AdvantageExperience& e) {
    for (const auto& s : selected) {
      if (s.source_question_id == e.source_question_id &&
          s.source_trace_index == e.source_trace_index && s.text == e.text) {
        return true;
      }
    }
    return false;
  };
  for (const auto& e : selected) {
    if (!in_old(e)) {
      next.log_event({{"event", "admitted"},
                      {"question_id", e.source_question_id},
                      {"trace_index", e.source_trace_index},
                      {"gain", e.validation_gain.value_or(0.0)}});
    }
  }
  for (const auto& e : lib.entries()) {
    if (!in_new(e)) {
      next.log_event({{"event", "evicted"},
                      {"question_id", e.source_question_id},
                      {"trace_index", e.source_trace_index},
                      {"gain", e.validation_gain.value_or(0.0)}});
    }
  }

  next.set_entries(std::move(selected));
  return next;
}

// --- pipeline -----------------------------------------------------------------

MiningOutcome mine(const std::vector<QuestionRecord>& train_questions,
                   const std::vector<QuestionRecord>& val_questions,
                   const MinerConfig& cfg, const SearchContext& ctx,
                   ChatGateway& gateway) {
  MiningOutcome outcome;
  outcome.library = ExperienceLibrary(cfg.budget);

  // Seeded, order-preserving subsampling of train batch and val slice.
  const auto sample_of = [](const std::vector<QuestionRecord>& qs, int want,
                            std::uint64_t seed) {
    if (want <= 0 || qs.size() <= static_cast<std::size_t>(want)) return qs;
    std::vector<QuestionRecord> out;
    std::mt19937_64 rng(seed);
    std::sample(qs.begin(), qs.end(), std::back_inserter(out),
                static_cast<std::size_t>(want), rng);
    return out;
  };
  const auto batch =
      sample_of(train_questions, cfg.batch_size,
                subsystem_seed(cfg.seed, "miner.batch"));
  const auto val_slice = sample_of(val_questions, cfg.val_slice,
                                   subsystem_seed(cfg.seed, "miner.val"));

  for (int round = 1; round <= cfg.rounds; ++round) {
    const auto groups = sample_groups(batch, cfg.group_size, cfg, ctx, gateway);
    outcome.groups_sampled += static_cast<int>(groups.size());

    std::vector<AdvantageExperience> candidates;
    for (const auto& group : groups) {
      const auto* question = [&]() -> const QuestionRecord* {
        for (const auto& q : batch) {
          if (q.id == group.question_id) return &q;
        }
        return nullptr;
      }();
      if (question == nullptr) continue;
      int successes = 0;
      for (int r : group.rewards) successes += r;
      outcome.successful_traces += successes;
      if (successes == 0) {
        outcome.notices.push_back("question " + group.question_id +
                                  ": no successful trace in group");
        continue;
      }
      auto distilled = distill_advantages(group, *question, gateway, cfg.budget);
      candidates.insert(candidates.end(),
                        std::make_move_iterator(distilled.begin()),
                        std::make_move_iterator(distilled.end()));
    }

    if (candidates.empty()) {
      outcome.notices.push_back("round " + std::to_string(round) +
                                ": no candidates distilled");
      continue;
    }

    const std::size_t provenance_before = outcome.library.provenance().size();
    outcome.library = update_library(outcome.library, std::move(candidates),
                                     val_slice, cfg, ctx, gateway);

    // Report rows come from this round's provenance tail.
    for (std::size_t ev = provenance_before;
         ev < outcome.library.provenance().size(); ++ev) {
      const auto& event = outcome.library.provenance()[ev];
      if (event.value("event", "") != "candidate_measured") continue;
      const std::pair<std::string, int> key{event.value("question_id", ""),
                                            event.value("trace_index", -1)};
      MiningReportRow row;
      row.round = round;
      row.question_id = key.first;
      row.trace_index = key.second;
      row.rank_score = event.value("rank_score", 0);
      row.validation_gain = event.value("gain", 0.0);
      for (const auto& e : outcome.library.entries()) {
        if (e.source_question_id == key.first &&
            e.source_trace_index == key.second) {
          row.admitted = true;
          break;
        }
      }
      outcome.report.push_back(std::move(row));
    }
  }
  return outcome;
}

std::string mining_report_tsv(const std::vector<MiningReportRow>& rows) {
  std::string out =
      "round\tquestion_id\ttrace_index\trank_score\tvalidation_gain\tadmitted\n";
  for (const auto& r : rows) {
    out += std::to_string(r.round) + "\t" + r.question_id + "\t" +
           std::to_string(r.trace_index) + "\t" + std::to_string(r.rank_score) +
           "\t" + format_fixed(r.validation_gain, 6) + "\t" +
           (r.admitted ? "yes" : "no") + "\n";
  }
  return out;
}

}  // namespace tkgqa
