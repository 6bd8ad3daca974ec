#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "cgr/detail/mix.hpp"
#include "cgr/error.hpp"
#include "cgr/harness.hpp"
#include "cgr/remote_backend.hpp"
#include "cgr/trace_backend.hpp"

namespace cgr {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Backend specs

namespace {

enum class SpecKind { Mock, Trace, Remote };

struct ParsedSpec {
  SpecKind kind = SpecKind::Mock;
  std::string location;
  double accuracy = 0.6;
  double noise = 0.005;
};

ParsedSpec parse_spec(const std::string& spec) {
  ParsedSpec p;
  if (spec == "mock" || spec.rfind("mock:", 0) == 0) {
    p.kind = SpecKind::Mock;
    std::istringstream opts(spec.size() > 5 ? spec.substr(5) : std::string{});
    std::string kv;
    while (std::getline(opts, kv, ',')) {
      if (kv.empty()) continue;
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("mock option '" + kv + "' needs key=value");
      const auto key = kv.substr(0, eq);
      double value = 0.0;
      try {
        value = std::stod(kv.substr(eq + 1));
      } catch (const std::exception&) {
        throw ConfigError("bad mock option value in '" + kv + "'");
      }
      if (key == "accuracy") {
        if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("mock accuracy must lie in [0, 1]");
        p.accuracy = value;
      } else if (key == "noise") {
        if (!(value >= 0.0 && value <= 0.5)) throw ConfigError("mock noise must lie in [0, 0.5]");
        p.noise = value;
      } else {
        throw ConfigError("unknown mock option '" + key + "'");
      }
    }
  } else if (spec.rfind("trace:", 0) == 0) {
    p.kind = SpecKind::Trace;
    p.location = spec.substr(6);
    if (p.location.empty()) throw ConfigError("trace backend needs a directory");
  } else if (spec.rfind("http://", 0) == 0) {
    p.kind = SpecKind::Remote;
    p.location = spec;
  } else {
    throw UnknownBackend("unknown backend '" + spec + "' (expected mock, trace:<dir> or http://...)");
  }
  return p;
}

std::string safe_name(std::string_view id) {
  std::string out;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

}  // namespace

MockProfile synthetic_profile(std::uint64_t seed, const QuestionRecord& question, double accuracy,
                              double noise) {
  const std::uint64_t qh = detail::hash_text(question.id);
  const double difficulty = detail::unit_interval(detail::mix64(qh, 1));
  const std::uint64_t stream = detail::mix64(seed, qh);
  auto u = [&](std::uint64_t i) { return detail::unit_interval(detail::mix64(stream, i)); };

  MockProfile p;
  const bool right = u(0) < std::clamp(accuracy * (1.3 - 0.6 * difficulty), 0.0, 1.0);
  const int answer =
      right ? question.truth : (question.truth + 1 + static_cast<int>(u(1) * 998.0)) % 1000;
  p.answer_digits.clear();
  for (char c : std::to_string(answer)) p.answer_digits.push_back(c - '0');

  if (u(2) < 0.95 - 0.6 * difficulty) {
    p.crossing_step = 500 + static_cast<std::int64_t>(difficulty * 24000.0 * (0.5 + u(3)));
  }
  p.pre_certainty = 0.5 + 0.35 * u(4);
  p.post_certainty = right ? 0.965 + 0.034 * u(5) : 0.9 + 0.095 * u(5);
  const int attempts = static_cast<int>(u(6) * 3.0);
  for (int i = 0; i < attempts; ++i) {
    p.stop_attempt_steps.push_back(
        300 + static_cast<std::int64_t>(u(7 + static_cast<std::uint64_t>(i)) * 12000.0 * (0.3 + difficulty)));
  }
  p.noise_amplitude = noise;
  return p;
}

BackendFactory::BackendFactory(std::string spec, std::optional<std::string> probe_spec)
    : spec_(std::move(spec)), probe_spec_(std::move(probe_spec)) {
  parse_spec(spec_);
  if (probe_spec_) parse_spec(*probe_spec_);
}

std::shared_ptr<const Backend> BackendFactory::make_one(const std::string& spec,
                                                        std::uint64_t seed,
                                                        const QuestionRecord& question) const {
  const auto parsed = parse_spec(spec);
  switch (parsed.kind) {
    case SpecKind::Mock:
      return build_mock(seed, synthetic_profile(seed, question, parsed.accuracy, parsed.noise));
    case SpecKind::Trace: {
      const auto key = spec + "\n" + question.id;
      {
        std::lock_guard lock(shared_mutex_);
        if (auto it = shared_.find(key); it != shared_.end()) return it->second;
      }
      auto backend = load_trace(fs::path(parsed.location) / (safe_name(question.id) + ".jsonl"));
      std::lock_guard lock(shared_mutex_);
      return shared_.emplace(key, std::move(backend)).first->second;
    }
    case SpecKind::Remote: {
      std::lock_guard lock(shared_mutex_);
      if (auto it = shared_.find(spec); it != shared_.end()) return it->second;
      RemoteConfig rc;
      rc.endpoint = parsed.location;
      auto backend = std::make_shared<RemoteBackend>(rc);
      return shared_.emplace(spec, std::move(backend)).first->second;
    }
  }
  throw UnknownBackend(spec);
}

void BackendFactory::preflight(const std::vector<QuestionRecord>& dataset) const {
  if (dataset.empty()) return;
  for (const auto* spec : {&spec_, probe_spec_ ? &*probe_spec_ : nullptr}) {
    if (spec == nullptr) continue;
    if (parse_spec(*spec).kind == SpecKind::Trace) {
      for (const auto& q : dataset) make_one(*spec, 0, q);
    } else {
      make_one(*spec, 0, dataset.front());
    }
  }
}

BackendPair BackendFactory::make(std::uint64_t seed, const QuestionRecord& question) const {
  BackendPair pair;
  pair.gen = make_one(spec_, seed, question);
  pair.probe = probe_spec_ ? make_one(*probe_spec_, seed, question) : pair.gen;
  return pair;
}

bool BackendFactory::deterministic() const {
  auto det = [](const std::string& s) { return parse_spec(s).kind != SpecKind::Remote; };
  return det(spec_) && (!probe_spec_ || det(*probe_spec_));
}

// ---------------------------------------------------------------------------
// Reports

namespace {

using GroupKey = std::tuple<std::string, std::int64_t, double>;

GroupKey group_of(const EvalRecord& r) { return {to_string(r.mode), r.budget, r.threshold}; }

struct FileEntry {
  std::string path;  // relative to the run directory
  std::string sha256;
  std::size_t bytes = 0;
};

std::vector<AbstentionPolicy> policies_for(const RunConfig& config, double threshold) {
  return {AbstentionPolicy::as_recorded(),
          AbstentionPolicy::certainty_below(config.abstain_threshold.value_or(threshold)),
          AbstentionPolicy::never()};
}

/// Records grouped by run setting, then by seed in first-seen order.
struct Grouped {
  std::map<GroupKey, std::vector<std::uint64_t>> seed_order;
  std::map<GroupKey, std::map<std::uint64_t, std::vector<EvalRecord>>> by_seed;
  std::map<GroupKey, std::vector<EvalRecord>> all;
};

Grouped group_records(const std::vector<EvalRecord>& records) {
  Grouped g;
  for (const auto& r : records) {
    const auto key = group_of(r);
    auto& seeds = g.by_seed[key];
    if (!seeds.contains(r.seed)) g.seed_order[key].push_back(r.seed);
    seeds[r.seed].push_back(r);
    g.all[key].push_back(r);
  }
  return g;
}

std::string key_csv(const GroupKey& k) {
  return std::get<0>(k) + ',' + std::to_string(std::get<1>(k)) + ',' + format_real(std::get<2>(k));
}

json key_json(const GroupKey& k) {
  return {{"mode", std::get<0>(k)}, {"budget", std::get<1>(k)}, {"threshold", std::get<2>(k)}};
}

json record_json(const EvalRecord& r) {
  return {{"question_id", r.question_id},
          {"seed", r.seed},
          {"threshold", r.threshold},
          {"predicted", r.predicted ? json(*r.predicted) : json("abstain")},
          {"truth", r.truth},
          {"correct", r.correct},
          {"abstained", r.abstained},
          {"thinking_tokens_used", r.thinking_tokens_used},
          {"tokens_saved", r.tokens_saved},
          {"final_certainty", r.final_certainty},
          {"stop_reason", std::string(to_string(r.stop_reason.kind)) + "(" +
                              std::to_string(r.stop_reason.step) + ")"},
          {"mode", to_string(r.mode)},
          {"budget", r.budget}};
}

std::vector<FileEntry> write_reports(const fs::path& dir, const RunConfig& config,
                                     const std::vector<EvalRecord>& records,
                                     const std::vector<RunFailure>& failures,
                                     std::vector<FileEntry> files) {
  auto emit = [&](const std::string& name, const std::string& content) {
    write_file_atomic(dir / name, content);
    files.push_back({name, sha256_hex(content), content.size()});
  };

  emit("records.csv", records_to_csv(records));
  {
    json arr = json::array();
    for (const auto& r : records) arr.push_back(record_json(r));
    emit("records.json", arr.dump(1) + "\n");
  }

  const auto g = group_records(records);

  // Grades per (setting, seed, policy, penalty).
  std::string grades_csv =
      "mode,budget,threshold,seed,policy,penalty,total_correct,total_wrong,total_abstained,grade\n";
  json grades_json = json::array();
  std::string seeds_csv = "mode,budget,threshold,policy,seeds,mean_correct,std_correct,penalty,mean_grade\n";
  json seeds_json = json::array();
  for (const auto& [key, order] : g.seed_order) {
    const auto& per_seed = g.by_seed.at(key);
    for (const auto& policy : policies_for(config, std::get<2>(key))) {
      std::vector<double> correct_counts;
      std::map<double, std::vector<double>> grades;
      for (auto seed : order) {
        const auto& recs = per_seed.at(seed);
        std::int64_t correct = 0;
        for (double c : config.penalties) {
          const auto rep = grade_dataset(recs, c, policy);
          correct = rep.total_correct;
          grades[c].push_back(rep.grade);
          grades_csv += key_csv(key) + ',' + std::to_string(seed) + ',' + csv_field(policy.name()) +
                        ',' + format_real(c) + ',' + std::to_string(rep.total_correct) + ',' +
                        std::to_string(rep.total_wrong) + ',' + std::to_string(rep.total_abstained) +
                        ',' + format_real(rep.grade) + '\n';
          json row = key_json(key);
          row["seed"] = seed;
          row["policy"] = policy.name();
          row["penalty"] = c;
          row["total_correct"] = rep.total_correct;
          row["total_wrong"] = rep.total_wrong;
          row["total_abstained"] = rep.total_abstained;
          row["grade"] = rep.grade;
          grades_json.push_back(row);
        }
        if (config.penalties.empty()) {
          correct = grade_dataset(recs, 0.0, policy).total_correct;
        }
        correct_counts.push_back(static_cast<double>(correct));
      }
      const auto agg = aggregate_seeds(correct_counts, grades);
      json row = key_json(key);
      row["policy"] = policy.name();
      row["seeds"] = agg.seeds;
      row["seed_order"] = order;
      row["mean_correct"] = agg.mean_correct;
      row["std_correct"] = agg.std_correct;
      row["cumulative_means"] = agg.cumulative_means;
      json mg = json::object();
      for (const auto& [c, v] : agg.mean_grade) {
        mg[format_real(c)] = v;
        seeds_csv += key_csv(key) + ',' + csv_field(policy.name()) + ',' + std::to_string(agg.seeds) +
                     ',' + format_real(agg.mean_correct) + ',' + format_real(agg.std_correct) + ',' +
                     format_real(c) + ',' + format_real(v) + '\n';
      }
      row["mean_grade"] = mg;
      seeds_json.push_back(row);
    }
  }
  emit("grades.csv", grades_csv);
  emit("grades.json", grades_json.dump(1) + "\n");
  emit("seed_aggregate.csv", seeds_csv);
  emit("seed_aggregate.json", seeds_json.dump(1) + "\n");

  // Savings per (mode, budget), one row per threshold.
  std::map<std::pair<std::string, std::int64_t>, std::vector<EvalRecord>> by_budget;
  for (const auto& r : records) by_budget[{to_string(r.mode), r.budget}].push_back(r);
  std::string savings_csv =
      "mode,budget,threshold,total_tokens_saved,seed_count,question_count,avg_per_seed,avg_per_question\n";
  std::string table;
  for (const auto& [mb, recs] : by_budget) {
    const auto rows = tokens_saved_summary(recs);
    for (const auto& row : rows) {
      savings_csv += mb.first + ',' + std::to_string(mb.second) + ',' + format_real(row.threshold) +
                     ',' + std::to_string(row.total_saved) + ',' + std::to_string(row.seed_count) +
                     ',' + std::to_string(row.question_count) + ',' + format_real(row.avg_per_seed()) +
                     ',' + format_real(row.avg_per_question()) + '\n';
    }
    table += "# mode=" + mb.first + " budget=" + std::to_string(mb.second) + "\n";
    table += format_savings_table(rows);
  }
  emit("savings.csv", savings_csv);
  emit("savings_table.txt", table);

  std::string ranking = "mode,budget,threshold,rank,question_id,mean_tokens_saved,label\n";
  for (const auto& [key, recs] : g.all) {
    const auto ranked = rank_questions(recs);
    for (const auto& q : ranked) {
      const char* label = q.difficulty_rank == 1                ? "easiest"
                          : q.difficulty_rank == ranked.size() ? "hardest"
                                                               : "";
      ranking += key_csv(key) + ',' + std::to_string(q.difficulty_rank) + ',' +
                 csv_field(q.question_id) + ',' + format_real(q.mean_tokens_saved) + ',' + label + '\n';
    }
  }
  emit("ranking.csv", ranking);

  // Manifest last: it lists every other file.
  json manifest;
  manifest["engine_version"] = kEngineVersion;
  const auto config_text = to_json(config);
  manifest["config"] = json::parse(config_text);
  manifest["config_hash"] = sha256_hex(config_text);
  {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    manifest["created_at"] = buf;
  }
  manifest["record_count"] = records.size();
  json jf = json::array();
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  for (const auto& f : files) jf.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  manifest["files"] = jf;
  json jfail = json::array();
  for (const auto& f : failures) {
    jfail.push_back({{"question_id", f.question_id},
                     {"seed", f.seed},
                     {"threshold", f.threshold},
                     {"budget", f.budget},
                     {"error", f.error}});
  }
  manifest["failures"] = jfail;
  write_file_atomic(dir / "manifest.json", manifest.dump(1) + "\n");
  return files;
}

std::string render_prompt(const RunConfig& config, const QuestionRecord& q) {
  std::string out;
  const std::string& tpl = config.prompt_template;
  for (std::size_t i = 0; i < tpl.size();) {
    if (tpl.compare(i, 8, "{system}") == 0) {
      out += config.system_prompt;
      i += 8;
    } else if (tpl.compare(i, 10, "{question}") == 0) {
      out += q.prompt_text;
      i += 10;
    } else {
      out += tpl[i++];
    }
  }
  return out;
}

std::string trace_rel_path(const EvalRecord& r) {
  return "traces/" + std::string(to_string(r.mode)) + "/th" + format_real(r.threshold) + "/b" +
         std::to_string(r.budget) + "/s" + std::to_string(r.seed) + "/" + safe_name(r.question_id) +
         ".jsonl";
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

RunSummary run_experiment(const RunConfig& config, const std::vector<QuestionRecord>& dataset,
                          const fs::path& out_dir) {
  RunSummary summary;
  summary.warnings = config.validate();
  if (dataset.empty()) throw DatasetError("dataset is empty", 0);

  BackendFactory factory(config.backend, config.probe_backend);
  factory.preflight(dataset);

  struct Job {
    std::int64_t budget;
    double threshold;
    std::uint64_t seed;
    const QuestionRecord* question;
  };
  std::vector<Job> jobs;
  for (auto b : config.budgets) {
    for (double th : config.thresholds) {
      for (auto seed : config.seeds) {
        for (const auto& q : dataset) jobs.push_back({b, th, seed, &q});
      }
    }
  }

  struct Outcome {
    std::optional<EvalRecord> record;
    std::optional<RunFailure> failure;
    std::optional<FileEntry> file;
  };
  std::vector<Outcome> outcomes(jobs.size());
  std::mutex writer;
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      try {
        const auto pair = factory.make(job.seed, *job.question);
        const auto prompt = ids_of(pair.gen->tokenize(render_prompt(config, *job.question)));
        DecodeConfig dc;
        dc.budget = job.budget;
        dc.threshold = job.threshold;
        dc.probe_interval = config.probe_interval;
        dc.top_k = config.top_k;
        dc.max_answer_tokens = config.max_answer_tokens;
        const auto trace = decode(prompt, *pair.gen, *pair.probe, config.mode, dc, job.question->id);
        auto record = make_record(trace, job.seed, job.question->truth);
        const auto text = trace_to_jsonl(trace, job.seed, job.question->truth, config.save_tokens,
                                         static_cast<std::int64_t>(i));
        const auto rel = trace_rel_path(record);
        {
          std::lock_guard lock(writer);
          write_file_atomic(out_dir / rel, text);
        }
        outcomes[i].file = FileEntry{rel, sha256_hex(text), text.size()};
        outcomes[i].record = std::move(record);
      } catch (const std::exception& e) {
        outcomes[i].failure = RunFailure{job.question->id, job.seed, job.threshold, job.budget, e.what()};
      }
    }
  };

  std::size_t workers = config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, jobs.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  std::vector<FileEntry> files;
  for (auto& o : outcomes) {
    if (o.record) summary.records.push_back(std::move(*o.record));
    if (o.failure) summary.failures.push_back(std::move(*o.failure));
    if (o.file) files.push_back(std::move(*o.file));
  }
  const auto written = write_reports(out_dir, config, summary.records, summary.failures, std::move(files));
  for (const auto& f : written) summary.files.push_back(out_dir / f.path);
  summary.files.push_back(out_dir / "manifest.json");
  return summary;
}

RunSummary regenerate_reports(const fs::path& run_dir) {
  const auto manifest_path = run_dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw InputError("no manifest.json in " + run_dir.string());
  const auto manifest = json::parse(read_file(manifest_path));
  const RunConfig config = run_config_from_json(manifest.at("config").dump());

  std::vector<std::pair<LoadedTrace, FileEntry>> loaded;
  const auto traces_dir = run_dir / "traces";
  if (fs::exists(traces_dir)) {
    for (const auto& entry : fs::recursive_directory_iterator(traces_dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".jsonl") continue;
      const auto text = read_file(entry.path());
      const auto rel = fs::relative(entry.path(), run_dir).generic_string();
      loaded.emplace_back(trace_from_jsonl(text), FileEntry{rel, sha256_hex(text), text.size()});
    }
  }
  std::sort(loaded.begin(), loaded.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first.job_index, a.second.path) < std::tie(b.first.job_index, b.second.path);
  });

  RunSummary summary;
  std::vector<FileEntry> files;
  for (auto& [lt, fe] : loaded) {
    summary.records.push_back(make_record(lt.trace, lt.seed, lt.truth));
    files.push_back(std::move(fe));
  }
  for (const auto& f : manifest.value("failures", json::array())) {
    summary.failures.push_back({f.at("question_id").get<std::string>(), f.at("seed").get<std::uint64_t>(),
                                f.at("threshold").get<double>(), f.at("budget").get<std::int64_t>(),
                                f.at("error").get<std::string>()});
  }
  const auto written = write_reports(run_dir, config, summary.records, summary.failures, std::move(files));
  for (const auto& f : written) summary.files.push_back(run_dir / f.path);
  summary.files.push_back(run_dir / "manifest.json");
  return summary;
}

std::vector<fs::path> emit_plot_data(const fs::path& run_dir) {
  for (const char* name : {"records.csv", "grades.csv"}) {
    if (!fs::exists(run_dir / name)) {
      throw PlotDataError("missing upstream report " + (run_dir / name).string());
    }
  }
  const auto records = records_from_csv(read_file(run_dir / "records.csv"));
  const auto g = group_records(records);
  const auto out = run_dir / "plotdata";
  std::vector<fs::path> written;
  auto emit = [&](const std::string& name, const std::string& content) {
    write_file_atomic(out / name, content);
    written.push_back(out / name);
  };

  std::string accuracy = "mode,budget,threshold,seeds,mean_correct,std_correct\n";
  std::string cumulative = "mode,budget,threshold,seed_index,seed,correct,cumulative_mean\n";
  std::map<GroupKey, double> mean_tokens;
  for (const auto& [key, order] : g.seed_order) {
    std::vector<double> counts;
    for (auto seed : order) {
      double c = 0;
      for (const auto& r : g.by_seed.at(key).at(seed)) c += (r.predicted && *r.predicted == r.truth) ? 1 : 0;
      counts.push_back(c);
    }
    const auto agg = aggregate_seeds(counts);
    accuracy += key_csv(key) + ',' + std::to_string(agg.seeds) + ',' + format_real(agg.mean_correct) +
                ',' + format_real(agg.std_correct) + '\n';
    for (std::size_t i = 0; i < order.size(); ++i) {
      cumulative += key_csv(key) + ',' + std::to_string(i) + ',' + std::to_string(order[i]) + ',' +
                    format_real(counts[i]) + ',' + format_real(agg.cumulative_means[i]) + '\n';
    }
    double tokens = 0;
    for (const auto& r : g.all.at(key)) tokens += static_cast<double>(r.thinking_tokens_used);
    mean_tokens[key] = tokens / static_cast<double>(g.all.at(key).size());
  }
  emit("accuracy_vs_budget.csv", accuracy);
  emit("cumulative_mean_vs_seed.csv", cumulative);

  // grades.csv rows: mode,budget,threshold,seed,policy,penalty,...,grade
  std::map<std::tuple<GroupKey, std::string, double>, std::pair<double, std::size_t>> grade_sums;
  {
    std::istringstream in(read_file(run_dir / "grades.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      if (f.size() != 10) throw PlotDataError("malformed grades.csv row: " + line);
      const GroupKey key{f[0], std::stoll(f[1]), std::stod(f[2])};
      auto& [sum, n] = grade_sums[{key, f[4], std::stod(f[5])}];
      sum += std::stod(f[9]);
      ++n;
    }
  }
  std::string grade_tokens = "mode,budget,threshold,policy,penalty,mean_grade,mean_thinking_tokens\n";
  for (const auto& [k, sn] : grade_sums) {
    const auto& [key, policy, c] = k;
    const auto it = mean_tokens.find(key);
    const double tokens = it == mean_tokens.end() ? 0.0 : it->second;
    grade_tokens += key_csv(key) + ',' + csv_field(policy) + ',' + format_real(c) + ',' +
                    format_real(sn.first / static_cast<double>(sn.second)) + ',' + format_real(tokens) + '\n';
  }
  emit("grade_vs_tokens.csv", grade_tokens);

  std::string savings = "mode,budget,threshold,question_id,mean_tokens_saved,difficulty_rank\n";
  for (const auto& [key, recs] : g.all) {
    for (const auto& q : rank_questions(recs)) {
      savings += key_csv(key) + ',' + csv_field(q.question_id) + ',' + format_real(q.mean_tokens_saved) +
                 ',' + std::to_string(q.difficulty_rank) + '\n';
    }
  }
  emit("savings_per_question.csv", savings);
  return written;
}

}  // namespace cgr
