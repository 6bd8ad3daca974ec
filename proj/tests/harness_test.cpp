#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

#include "cgr/error.hpp"
#include "cgr/harness.hpp"
#include "cgr/remote_backend.hpp"
#include "cgr/trace_backend.hpp"

namespace fs = std::filesystem;
using namespace cgr;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("cgr_harness_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::vector<QuestionRecord> questions(int n) {
  std::vector<QuestionRecord> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({"q" + std::to_string(i), "What is " + std::to_string(i) + " squared?", (i * i) % 1000});
  }
  return out;
}

RunConfig small_config() {
  RunConfig c;
  c.budgets = {3000};
  c.thresholds = {0.97};
  c.probe_interval = 250;
  c.seeds = {1, 2, 3};
  c.workers = 1;
  return c;
}

}  // namespace

TEST_CASE("config precedence: flag over file over default, per field") {
  struct Field {
    const char* key;
    const char* file_value;
    const char* flag_value;
    std::function<std::string(const RunConfig&)> read;
  };
  auto join = [](const auto& v) {
    std::ostringstream s;
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    return s.str();
  };
  const std::vector<Field> fields{
      {"mode", "CGR", "Baseline", [](const RunConfig& c) { return std::string(to_string(c.mode)); }},
      {"budget", "4000", "5000", [&](const RunConfig& c) { return join(c.budgets); }},
      {"budgets", "1000,2000", "3000,4000", [&](const RunConfig& c) { return join(c.budgets); }},
      {"threshold", "0.96", "0.99", [&](const RunConfig& c) { return join(c.thresholds); }},
      {"thresholds", "0.96,0.97", "0.98,0.99", [&](const RunConfig& c) { return join(c.thresholds); }},
      {"interval", "200", "300", [](const RunConfig& c) { return std::to_string(c.probe_interval); }},
      {"seeds", "1,2", "0..2", [&](const RunConfig& c) { return join(c.seeds); }},
      {"penalties", "0,1", "0.5", [&](const RunConfig& c) { return join(c.penalties); }},
      {"backend", "mock:noise=0", "mock:accuracy=0.9", [](const RunConfig& c) { return c.backend; }},
      {"probe-backend", "mock", "mock:noise=0.01", [](const RunConfig& c) { return c.probe_backend.value_or(""); }},
      {"system-prompt", "Be brief", "Be exact", [](const RunConfig& c) { return c.system_prompt; }},
      {"prompt-template", "{question}", "{system} {question}", [](const RunConfig& c) { return c.prompt_template; }},
      {"top-k", "2", "3", [](const RunConfig& c) { return std::to_string(c.top_k); }},
      {"max-answer-tokens", "5", "6", [](const RunConfig& c) { return std::to_string(c.max_answer_tokens); }},
      {"workers", "2", "3", [](const RunConfig& c) { return std::to_string(c.workers); }},
      {"save-tokens", "false", "true", [](const RunConfig& c) { return std::string(c.save_tokens ? "1" : "0"); }},
      {"abstain-threshold", "0.9", "0.95",
       [](const RunConfig& c) { return c.abstain_threshold ? std::to_string(*c.abstain_threshold) : ""; }},
  };
  const RunConfig defaults;
  for (const auto& f : fields) {
    CAPTURE(f.key);
    const auto base = f.read(defaults);
    const auto from_file = f.read(resolve_config({{f.key, f.file_value}}, {}, std::nullopt));
    const auto from_flag = f.read(resolve_config({{f.key, f.file_value}}, {{f.key, f.flag_value}}, std::nullopt));
    const auto flag_only = f.read(resolve_config({}, {{f.key, f.flag_value}}, std::nullopt));
    CHECK(from_file != base);
    CHECK(from_flag != from_file);
    CHECK(from_flag == flag_only);
    CHECK(f.read(resolve_config({}, {}, std::nullopt)) == base);
  }
}

TEST_CASE("backend address from the environment is only a fallback") {
  CHECK(resolve_config({}, {}, "http://h:1").backend == "http://h:1");
  CHECK(resolve_config({{"backend", "mock"}}, {}, "http://h:1").backend == "mock");
  CHECK(resolve_config({}, {{"backend", "trace:/x"}}, "http://h:1").backend == "trace:/x");
  CHECK(resolve_config({}, {}, std::nullopt).backend == "mock");
}

TEST_CASE("config files") {
  const auto dir = fresh_dir("config");
  spit(dir / "run.cfg", "# comment\nmode = cgr+bf\nbudget=8000\nprompt_template = \"{system}\\n\\n{question}\"\nseeds = 0..3\n");
  const auto s = read_config_file(dir / "run.cfg");
  const auto c = apply_settings(RunConfig{}, s);
  CHECK(c.mode == DecodingMode::CgrWithForcing);
  CHECK(c.budgets == std::vector<std::int64_t>{8000});
  CHECK(c.prompt_template == "{system}\n\n{question}");
  CHECK(c.seeds.size() == 4);
  CHECK_THROWS_AS(apply_settings(RunConfig{}, {{"colour", "red"}}), ConfigError);
  CHECK_THROWS_AS(apply_settings(RunConfig{}, {{"budget", "lots"}}), ConfigError);
  spit(dir / "bad.cfg", "budget\n");
  CHECK_THROWS_AS(read_config_file(dir / "bad.cfg"), ConfigError);
  CHECK_THROWS_AS(read_config_file(dir / "absent.cfg"), ConfigError);

  RunConfig v;
  v.budgets = {100};
  v.probe_interval = 1000;
  CHECK_THROWS_AS(v.validate(), ConfigError);
  v = RunConfig{};
  v.thresholds = {0.5, 0.97};
  CHECK(v.validate().size() == 1);

  const auto round = run_config_from_json(to_json(c));
  CHECK(to_json(round) == to_json(c));
}

TEST_CASE("seed and list parsing") {
  CHECK(parse_seed_list("0..3,9") == std::vector<std::uint64_t>{0, 1, 2, 3, 9});
  CHECK(parse_seed_list("0..63").size() == 64);
  CHECK_THROWS_AS(parse_seed_list("5..1"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list(""), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("a"), ConfigError);
  CHECK(parse_real_list("0, 0.25,1") == std::vector<double>{0, 0.25, 1});
  CHECK(parse_int_list("1000,2000") == std::vector<std::int64_t>{1000, 2000});
}

TEST_CASE("dataset loading") {
  const auto dir = fresh_dir("dataset");
  spit(dir / "ok.jsonl", "{\"id\":\"a\",\"question\":\"1+1\",\"answer\":2}\n\n{\"id\":7,\"question\":\"x\",\"answer\":999}\n");
  const auto ds = load_dataset(dir / "ok.jsonl");
  REQUIRE(ds.size() == 2);
  CHECK(ds[1].id == "7");
  CHECK(ds[1].truth == 999);

  auto line_of = [&](const std::string& text) -> std::size_t {
    spit(dir / "bad.jsonl", text);
    try {
      load_dataset(dir / "bad.jsonl");
    } catch (const DatasetError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("{\"id\":\"a\",\"question\":\"q\",\"answer\":1}\n{oops\n") == 2);
  CHECK(line_of("{\"id\":\"a\",\"question\":\"q\",\"answer\":1000}\n") == 1);
  CHECK(line_of("{\"id\":\"a\",\"question\":\"q\"}\n") == 1);
  CHECK(line_of("{\"id\":\"a\",\"question\":\"q\",\"answer\":1}\n{\"id\":\"a\",\"question\":\"r\",\"answer\":2}\n") == 2);
  CHECK_THROWS_AS(load_dataset(dir / "absent.jsonl"), DatasetError);
}

TEST_CASE("records CSV and trace JSONL round-trip") {
  RunConfig c = small_config();
  const auto dir = fresh_dir("roundtrip");
  const auto summary = run_experiment(c, questions(4), dir);
  REQUIRE(summary.records.size() == 12);
  const auto csv = records_to_csv(summary.records);
  CHECK(records_from_csv(csv) == summary.records);
  CHECK_THROWS_AS(records_from_csv("a,b\n"), InputError);

  ReasoningTrace t;
  t.question_id = "q,\"odd\"";
  t.mode = DecodingMode::CgrWithForcing;
  t.budget = 100;
  t.threshold = 0.97;
  t.thinking_tokens_used = 40;
  t.tokens = {{3, "3"}, {20, "x"}};
  t.stop_reason = {StopReason::Kind::EarlyExitCertainty, 40};
  t.final_answer.digit_tokens = {{{4, "4"}, 0.99}};
  t.final_answer.parsed_value = 4;
  t.final_certainty = 0.99;
  ProbeResult p;
  p.step = 40;
  p.answer = t.final_answer;
  p.certainty = 0.99;
  p.overhead_tokens = 4;
  t.probe_events = {p};
  t.probe_overhead_tokens = 4;
  const auto loaded = trace_from_jsonl(trace_to_jsonl(t, 9, 4, true, 17));
  CHECK(loaded.seed == 9);
  CHECK(loaded.truth == 4);
  CHECK(loaded.job_index == 17);
  CHECK(loaded.trace.question_id == t.question_id);
  CHECK(loaded.trace.stop_reason == t.stop_reason);
  CHECK(loaded.trace.probe_events == t.probe_events);
  CHECK(loaded.trace.final_answer == t.final_answer);
  CHECK(loaded.trace.tokens.size() == 2);
  CHECK_THROWS_AS(trace_from_jsonl("{\"question_id\":1}\n"), TraceFormatError);
}

TEST_CASE("run, regenerate and manifest") {
  const auto dir = fresh_dir("run");
  auto c = small_config();
  c.thresholds = {0.96, 0.99};
  c.budgets = {2000, 3000};
  const auto summary = run_experiment(c, questions(5), dir);
  CHECK(summary.failures.empty());
  CHECK(summary.records.size() == 2 * 2 * 3 * 5);

  const auto manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest.at("engine_version") == kEngineVersion);
  CHECK(manifest.at("config_hash") == sha256_hex(to_json(c)));
  std::set<std::string> listed;
  for (const auto& f : manifest.at("files")) {
    const auto path = f.at("path").get<std::string>();
    listed.insert(path);
    const auto body = slurp(dir / path);
    CHECK(f.at("sha256") == sha256_hex(body));
    CHECK(f.at("bytes") == body.size());
  }
  std::size_t on_disk = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir).generic_string();
    if (rel == "manifest.json") continue;
    ++on_disk;
    CHECK_MESSAGE(listed.count(rel) == 1, rel);
  }
  CHECK(on_disk == listed.size());
  CHECK(fs::exists(dir / "traces/CGRWithForcing/th0.96/b2000/s1/q0.jsonl"));

  const auto table = slurp(dir / "savings_table.txt");
  CHECK(table.find("# mode=CGRWithForcing budget=2000") != std::string::npos);

  const auto before = slurp(dir / "records.csv");
  const auto grades_before = slurp(dir / "grades.csv");
  fs::remove(dir / "records.csv");
  const auto again = regenerate_reports(dir);
  CHECK(again.records == summary.records);
  CHECK(slurp(dir / "records.csv") == before);
  CHECK(slurp(dir / "grades.csv") == grades_before);

  const auto plots = emit_plot_data(dir);
  CHECK(plots.size() == 4);
  std::istringstream acc(slurp(dir / "plotdata/accuracy_vs_budget.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(acc, line)) ++rows;
  CHECK(rows == 1 + 4);
}

TEST_CASE("worker count does not change the records") {
  auto c = small_config();
  c.seeds = {4, 5, 6, 7};
  c.save_tokens = false;
  const auto ds = questions(6);
  c.workers = 1;
  const auto one = run_experiment(c, ds, fresh_dir("w1"));
  c.workers = 4;
  const auto four = run_experiment(c, ds, fresh_dir("w4"));
  CHECK(one.records == four.records);
}

TEST_CASE("plot data cardinalities and missing inputs") {
  const auto dir = fresh_dir("plots");
  auto c = small_config();
  c.seeds = parse_seed_list("0..63");
  c.budgets = {500};
  c.probe_interval = 100;
  c.save_tokens = false;
  run_experiment(c, {{"only", "One question?", 7}}, dir);
  emit_plot_data(dir);
  auto count_lines = [&](const char* name) {
    std::istringstream in(slurp(dir / "plotdata" / name));
    std::string l, last;
    int n = 0;
    while (std::getline(in, l)) ++n, last = l;
    return std::pair{n - 1, last};
  };
  CHECK(count_lines("savings_per_question.csv").first == 1);
  const auto [cum_rows, last] = count_lines("cumulative_mean_vs_seed.csv");
  CHECK(cum_rows == 64);
  // The last prefix mean is the overall mean.
  const auto fields = split_csv_line(last);
  const auto acc = split_csv_line(count_lines("accuracy_vs_budget.csv").second);
  CHECK(fields.back() == acc[4]);

  const auto empty = fresh_dir("plots_empty");
  try {
    emit_plot_data(empty);
    FAIL("expected PlotDataError");
  } catch (const PlotDataError& e) {
    CHECK(std::string(e.what()).find("records.csv") != std::string::npos);
  }
}

TEST_CASE("backend specs") {
  CHECK_THROWS_AS(BackendFactory("gpt", std::nullopt), UnknownBackend);
  CHECK_THROWS_AS(BackendFactory("mock:accuracy=2", std::nullopt), ConfigError);
  CHECK_THROWS_AS(BackendFactory("mock:speed=1", std::nullopt), ConfigError);
  CHECK_THROWS_AS(BackendFactory("mock", std::string("nope")), UnknownBackend);
  CHECK(BackendFactory("mock:accuracy=0.5,noise=0", std::nullopt).deterministic());
  CHECK_FALSE(BackendFactory("http://127.0.0.1:9", std::nullopt).deterministic());

  const auto ds = questions(3);
  BackendFactory missing("trace:/definitely/not/here", std::nullopt);
  CHECK_THROWS_AS(missing.preflight(ds), TraceFormatError);
  BackendFactory dead("http://127.0.0.1:1", std::nullopt);
  CHECK_THROWS_AS(dead.preflight(ds), BackendUnavailable);
}

TEST_CASE("trace directories and remote servers as run backends") {
  const auto dir = fresh_dir("trace_backend");
  const auto ds = questions(3);
  for (const auto& q : ds) {
    const auto m = build_mock(0, synthetic_profile(0, q));
    const auto prompt = ids_of(m->tokenize("You are a helpful assistant\n" + q.prompt_text));
    write_trace(dir / "traces_in" / (q.id + ".jsonl"), default_vocabulary(), m->specials(),
                record_distributions(*m, prompt, 400, 4));
  }
  auto c = small_config();
  c.seeds = {0};
  c.budgets = {300};
  c.probe_interval = 100;
  c.mode = DecodingMode::BudgetForcing;
  c.backend = "trace:" + (dir / "traces_in").string();
  const auto replayed = run_experiment(c, ds, dir / "out_trace");
  c.backend = "mock";
  const auto direct = run_experiment(c, ds, dir / "out_mock");
  REQUIRE(replayed.records.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(replayed.records[i].thinking_tokens_used == direct.records[i].thinking_tokens_used);
    CHECK(replayed.records[i].stop_reason == direct.records[i].stop_reason);
  }

  MockProfile p;
  p.crossing_step = 150;
  p.answer_digits = {4};
  StubServer server(build_mock(0, p));
  server.start();
  c.mode = DecodingMode::CgrWithForcing;
  c.backend = server.endpoint();
  const auto remote = run_experiment(c, ds, dir / "out_remote");
  CHECK(remote.failures.empty());
  REQUIRE(remote.records.size() == 3);
  CHECK(remote.records[0].stop_reason == StopReason{StopReason::Kind::EarlyExitCertainty, 200});
  CHECK(remote.records[0].predicted == 4);
  server.stop();
}
