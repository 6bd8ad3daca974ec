#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cgr/backend.hpp"
#include "cgr/decoder.hpp"
#include "cgr/eval.hpp"
#include "cgr/mock_backend.hpp"

namespace cgr {

inline constexpr const char* kEngineVersion = "0.3.0";

struct QuestionRecord {
  std::string id;
  std::string prompt_text;
  int truth = 0;
};

/// Line-delimited JSON {"id", "question", "answer"}. Blank lines are skipped.
/// Throws DatasetError with the offending line.
std::vector<QuestionRecord> load_dataset(const std::filesystem::path& path);

/// Experiment configuration. `run` uses a single budget and threshold;
/// `sweep` sets several.
struct RunConfig {
  DecodingMode mode = DecodingMode::CgrWithForcing;
  std::vector<std::int64_t> budgets{32000};
  std::vector<double> thresholds{0.97};
  std::int64_t probe_interval = 1000;
  std::vector<std::uint64_t> seeds{42};
  std::vector<double> penalties{0.0, 0.25, 0.5, 1.0};
  std::string backend = "mock";
  std::optional<std::string> probe_backend;
  std::string system_prompt = "You are a helpful assistant";
  /// "{system}" and "{question}" are substituted.
  std::string prompt_template = "{system}\n{question}";
  std::size_t top_k = 1;
  std::size_t max_answer_tokens = 4;
  std::size_t workers = 0;  // 0: hardware concurrency
  bool save_tokens = true;
  /// Abstention threshold for the CertaintyBelow policy; defaults to each run's threshold.
  std::optional<double> abstain_threshold;

  /// Throws ConfigError. Returns warnings (e.g. thresholds below 0.90).
  std::vector<std::string> validate() const;
};

/// Flat key=value settings, keys named like the long CLI flags without dashes.
using Settings = std::map<std::string, std::string>;

/// Reads a flat key=value config file ('#' comments, blank lines ignored).
Settings read_config_file(const std::filesystem::path& path);

/// Applies settings over `base`; unknown keys or bad values throw ConfigError.
RunConfig apply_settings(RunConfig base, const Settings& settings);

/// Defaults, then config file, then command-line flags. The backend falls
/// back to `env_backend_url` only when neither layer names one.
RunConfig resolve_config(const Settings& file_settings, const Settings& cli_settings,
                         std::optional<std::string> env_backend_url);

std::string to_json(const RunConfig& config);
RunConfig run_config_from_json(std::string_view json);

/// Parses "1,2,5" and inclusive ranges "0..63".
std::vector<std::uint64_t> parse_seed_list(std::string_view text);
std::vector<double> parse_real_list(std::string_view text);
std::vector<std::int64_t> parse_int_list(std::string_view text);

/// Pair of backends for one (seed, question) run.
struct BackendPair {
  std::shared_ptr<const Backend> gen;
  std::shared_ptr<const Backend> probe;
};

/// Resolves backend specs:
///   mock[:key=value,...]  synthetic per-question certainty profiles
///   trace:<dir>           <dir>/<question id>.jsonl replayed per question
///   http://host:port      remote model server
class BackendFactory {
 public:
  BackendFactory(std::string spec, std::optional<std::string> probe_spec);

  /// Verifies the backends can be built (and remote ones reached).
  void preflight(const std::vector<QuestionRecord>& dataset) const;
  BackendPair make(std::uint64_t seed, const QuestionRecord& question) const;
  bool deterministic() const;

 private:
  std::shared_ptr<const Backend> make_one(const std::string& spec, std::uint64_t seed,
                                          const QuestionRecord& question) const;

  std::string spec_;
  std::optional<std::string> probe_spec_;
  mutable std::map<std::string, std::shared_ptr<const Backend>> shared_;
  mutable std::mutex shared_mutex_;
};

/// Synthetic profile used by the "mock" backend kind: question difficulty is
/// a function of the question id, per-seed variation of the seed.
MockProfile synthetic_profile(std::uint64_t seed, const QuestionRecord& question,
                              double accuracy = 0.6, double noise = 0.005);

struct RunFailure {
  std::string question_id;
  std::uint64_t seed = 0;
  double threshold = 0.0;
  std::int64_t budget = 0;
  std::string error;
};

struct RunSummary {
  std::vector<EvalRecord> records;
  std::vector<RunFailure> failures;
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;
};

/// Runs every (budget x threshold x seed x question) combination, then
/// writes traces, records, grade reports, savings summary, seed aggregate,
/// question ranking and a manifest into `out_dir`. All writes are atomic.
RunSummary run_experiment(const RunConfig& config, const std::vector<QuestionRecord>& dataset,
                          const std::filesystem::path& out_dir);

/// Rebuilds records from the trace files in `run_dir` and rewrites every summary report.
RunSummary regenerate_reports(const std::filesystem::path& run_dir);

/// Writes the four plot-data CSV series into `run_dir`/plotdata.
/// Throws PlotDataError naming a missing upstream report.
std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& run_dir);

// Report I/O.
std::string records_to_csv(const std::vector<EvalRecord>& records);
std::vector<EvalRecord> records_from_csv(std::string_view csv);
/// Line 1: run summary; then one {"probe": ...} line per probe event; then,
/// when include_tokens is set, a {"tokens": [ids]} line.
std::string trace_to_jsonl(const ReasoningTrace& trace, std::uint64_t seed, int truth,
                           bool include_tokens, std::int64_t job_index = -1);

struct LoadedTrace {
  ReasoningTrace trace;
  std::uint64_t seed = 0;
  int truth = 0;
  std::int64_t job_index = -1;
};
LoadedTrace trace_from_jsonl(std::string_view text);

/// Writes via a temporary sibling then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string sha256_hex(std::string_view data);

/// Shortest decimal text that reads back to the same double.
std::string format_real(double value);

/// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_field(std::string_view value);

}  // namespace cgr
