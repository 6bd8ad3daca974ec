#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "cgr/error.hpp"
#include "cgr/harness.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 1, kBackend = 2, kData = 3 };

struct Flag {
  const char* name;
  const char* help;
};

// Every run flag doubles as a config-file key.
const Flag kRunFlags[] = {
    {"mode", "Baseline, BudgetForcing, CGR or CGRWithForcing"},
    {"budget", "thinking budget in tokens"},
    {"threshold", "certainty threshold"},
    {"interval", "probe interval in tokens"},
    {"seeds", "seed list, e.g. 0..63 or 1,2,3"},
    {"penalties", "grade penalties, e.g. 0,0.25,0.5,1"},
    {"backend", "mock[:accuracy=..,noise=..], trace:<dir> or http://host:port"},
    {"probe-backend", "separate backend for certainty probes"},
    {"system-prompt", "system prompt text"},
    {"prompt-template", "prompt format with {system} and {question}"},
    {"top-k", "candidates requested per step"},
    {"max-answer-tokens", "answer digits decoded per probe"},
    {"workers", "worker threads (0: all cores)"},
    {"save-tokens", "store token ids in trace files"},
    {"abstain-threshold", "certainty below which the certainty policy abstains"},
};

struct RunArgs {
  std::string config_file;
  std::string dataset;
  std::string out;
  std::map<std::string, std::string> values;
};

void add_run_flags(CLI::App* cmd, RunArgs& args, bool sweep) {
  cmd->add_option("--config", args.config_file, "flat key = value config file");
  cmd->add_option("--dataset", args.dataset, "question file (JSON lines)");
  cmd->add_option("--out", args.out, "output run directory");
  for (const auto& f : kRunFlags) {
    cmd->add_option(std::string("--") + f.name, args.values[f.name], f.help);
  }
  if (sweep) {
    cmd->add_option("--thresholds", args.values["thresholds"], "threshold list");
    cmd->add_option("--budgets", args.values["budgets"], "budget list");
  }
}

cgr::Settings given(const CLI::App* cmd, const RunArgs& args) {
  cgr::Settings s;
  for (const auto& [key, value] : args.values) {
    if (cmd->count("--" + key) > 0) s[key] = value;
  }
  return s;
}

int do_run(const CLI::App* cmd, const RunArgs& args) {
  cgr::Settings file;
  if (!args.config_file.empty()) file = cgr::read_config_file(args.config_file);
  const char* env = std::getenv("CGR_BACKEND_URL");
  const auto config = cgr::resolve_config(file, given(cmd, args),
                                          env ? std::optional<std::string>(env) : std::nullopt);

  auto pick = [&](const std::string& flag, const char* key) {
    if (!flag.empty()) return flag;
    auto it = file.find(key);
    return it == file.end() ? std::string{} : it->second;
  };
  const auto dataset_path = pick(args.dataset, "dataset");
  const auto out = pick(args.out, "out");
  if (dataset_path.empty()) throw cgr::ConfigError("--dataset is required");
  if (out.empty()) throw cgr::ConfigError("--out is required");

  const auto dataset = cgr::load_dataset(dataset_path);
  const auto summary = cgr::run_experiment(config, dataset, out);
  for (const auto& w : summary.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << summary.records.size() << " runs written to " << out << '\n';
  if (!summary.failures.empty()) {
    for (const auto& f : summary.failures) {
      std::cerr << "failed: " << f.question_id << " seed " << f.seed << ": " << f.error << '\n';
    }
    return kBackend;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certainty-guided reasoning experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cgr::kEngineVersion);

  RunArgs run_args, sweep_args;
  auto* run = app.add_subcommand("run", "decode every (seed, question) and write reports");
  add_run_flags(run, run_args, false);
  auto* sweep = app.add_subcommand("sweep", "run over several thresholds and budgets");
  add_run_flags(sweep, sweep_args, true);

  std::string report_dir, plot_dir;
  auto* report = app.add_subcommand("report", "rebuild summaries from stored traces");
  report->add_option("run_dir", report_dir, "run directory")->required();
  auto* plot = app.add_subcommand("plotdata", "write plot series CSV files");
  plot->add_option("run_dir", plot_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return do_run(run, run_args);
    if (*sweep) return do_run(sweep, sweep_args);
    if (*report) {
      const auto summary = cgr::regenerate_reports(report_dir);
      std::cout << summary.records.size() << " records, reports rewritten in " << report_dir << '\n';
      return kOk;
    }
    if (*plot) {
      for (const auto& p : cgr::emit_plot_data(plot_dir)) std::cout << p.string() << '\n';
      return kOk;
    }
  } catch (const cgr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const cgr::InvalidProfile& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const cgr::UnknownBackend& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return kBackend;
  } catch (const cgr::BackendUnavailable& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return kBackend;
  } catch (const cgr::ProtocolError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return kBackend;
  } catch (const cgr::Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
