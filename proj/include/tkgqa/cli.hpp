#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace tkgqa {

// Exit codes shared by every subcommand.
namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;     // usage / config error
inline constexpr int kData = 2;      // malformed inputs
inline constexpr int kUpstream = 3;  // embedder / LLM endpoint failure
}  // namespace exit_code

struct GatewayOptions {
  std::string endpoint;
  std::string model;
  std::string api_key_env = "LLM_API_KEY";
  std::string scripted_path;  // non-empty: offline scripted responder
  std::string trace_path;
  int max_in_flight = 8;
};

struct IngestOptions {
  std::string graph_path;
  std::string out_dir;
};

struct IndexOptions {
  std::string store_dir;
  std::string embedder = "hash:dim=64,seed=42";
  std::string out_path;
  std::size_t batch_size = 256;
};

struct RunOptions {
  std::string questions_path;
  std::string store_dir;
  std::string index_path;
  std::string embedder = "hash:dim=64,seed=42";
  bool force_fingerprint = false;
  GatewayOptions gateway;
  std::string library_path;  // optional experience library for k-shot demos
  int t_max = 20;
  int limit = 10;
  int rerank_pool = 50;
  std::string sort = "relevance";
  bool sort_descending = false;
  double temperature = 1.0;
  int malformed_retry_budget = 2;
  std::size_t observation_byte_cap = 4096;
  bool observation_as_user_role = false;
  bool resume = false;
  int workers = 4;
  std::uint64_t seed = 0;
  std::string out_dir;
};

struct MineOptions {
  std::string train_questions_path;
  std::string val_questions_path;
  std::string store_dir;
  std::string index_path;
  std::string embedder = "hash:dim=64,seed=42";
  bool force_fingerprint = false;
  GatewayOptions gateway;
  int k_shots = 3;      // K
  int group_size = 4;   // G
  int batch_size = 50;  // N
  int rounds = 1;
  int val_slice = 200;
  int t_max = 20;
  int limit = 10;
  int rerank_pool = 50;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::string out_dir;
};

struct ReportOptions {
  std::string records_path;
  std::string trajectories_path;  // optional
  std::string sidecar_path;       // optional gold-fact sidecar
  int pass_k = 0;                 // 0 = series up to the common sample count
  std::string out_dir;
};

// Subcommand bodies. Each validates options, performs the work, writes
// artifacts under out_dir and a summary to `out`, diagnostics to `err`,
// and returns an exit code.
int cmd_ingest(const IngestOptions& opt, std::ostream& out, std::ostream& err);
int cmd_index(const IndexOptions& opt, std::ostream& out, std::ostream& err);
int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err);
int cmd_mine(const MineOptions& opt, std::ostream& out, std::ostream& err);
int cmd_report(const ReportOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace tkgqa
