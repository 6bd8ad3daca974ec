#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cgr/certainty.hpp"
#include "cgr/decoder.hpp"
#include "cgr/eval.hpp"
#include "cgr/harness.hpp"
#include "cgr/mock_backend.hpp"
#include "cgr/sweep.hpp"

namespace py = pybind11;
using namespace cgr;

namespace {

std::vector<TokenId> ids(const Backend& b, std::string_view text) {
  std::vector<TokenId> out;
  for (const auto& t : b.tokenize(text)) out.push_back(t.id);
  return out;
}

AbstentionPolicy policy_from(const std::string& name, std::optional<double> theta) {
  if (name == "as_recorded") return AbstentionPolicy::as_recorded();
  if (name == "never") return AbstentionPolicy::never();
  if (name == "certainty_below") return AbstentionPolicy::certainty_below(theta.value_or(0.97));
  throw ConfigError("unknown abstention policy: " + name);
}

py::dict summary_dict(const RunSummary& s) {
  py::dict d;
  d["records"] = s.records;
  py::list failures;
  for (const auto& f : s.failures) {
    py::dict e;
    e["question_id"] = f.question_id;
    e["seed"] = f.seed;
    e["threshold"] = f.threshold;
    e["budget"] = f.budget;
    e["error"] = f.error;
    failures.append(e);
  }
  d["failures"] = failures;
  d["files"] = s.files;
  d["warnings"] = s.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_cgr_engine, m) {
  m.attr("__version__") = kEngineVersion;

  auto base = py::register_exception<Error>(m, "CgrError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InvalidProfile>(m, "InvalidProfile", base.ptr());
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<UnknownBackend>(m, "UnknownBackend", base.ptr());
  py::register_exception<BackendUnavailable>(m, "BackendUnavailable", base.ptr());
  py::register_exception<SweepUnsupported>(m, "SweepUnsupported", base.ptr());
  py::register_exception<DatasetError>(m, "DatasetError", base.ptr());
  py::register_exception<PlotDataError>(m, "PlotDataError", base.ptr());

  py::enum_<DecodingMode>(m, "DecodingMode")
      .value("Baseline", DecodingMode::Baseline)
      .value("BudgetForcing", DecodingMode::BudgetForcing)
      .value("Cgr", DecodingMode::Cgr)
      .value("CgrWithForcing", DecodingMode::CgrWithForcing);
  m.def("parse_mode", &parse_mode);

  py::enum_<StopReason::Kind>(m, "StopKind")
      .value("BudgetExhausted", StopReason::Kind::BudgetExhausted)
      .value("EarlyExitCertainty", StopReason::Kind::EarlyExitCertainty)
      .value("NaturalStopCertified", StopReason::Kind::NaturalStopCertified)
      .value("NaturalStop", StopReason::Kind::NaturalStop);

  py::class_<StopReason>(m, "StopReason")
      .def_readonly("kind", &StopReason::kind)
      .def_readonly("step", &StopReason::step)
      .def("__repr__", [](const StopReason& s) {
        return std::string(to_string(s.kind)) + "(" + std::to_string(s.step) + ")";
      });

  py::class_<MockProfile>(m, "MockProfile")
      .def(py::init<>())
      .def_readwrite("crossing_step", &MockProfile::crossing_step)
      .def_readwrite("pre_certainty", &MockProfile::pre_certainty)
      .def_readwrite("post_certainty", &MockProfile::post_certainty)
      .def_readwrite("stop_attempt_steps", &MockProfile::stop_attempt_steps)
      .def_readwrite("noise_amplitude", &MockProfile::noise_amplitude)
      .def_readwrite("answer_digits", &MockProfile::answer_digits)
      .def("validate", &MockProfile::validate)
      .def("level_at", &MockProfile::level_at);

  py::class_<Backend, std::shared_ptr<Backend>>(m, "Backend")
      .def("encode", [](const Backend& b, const std::string& text) { return ids(b, text); })
      .def("decode_ids", [](const Backend& b, const std::vector<TokenId>& v) { return b.detokenize(v); })
      .def_property_readonly("deterministic", &Backend::deterministic);
  py::class_<MockBackend, Backend, std::shared_ptr<MockBackend>>(m, "MockBackend")
      .def_property_readonly("seed", &MockBackend::seed)
      .def_property_readonly("profile", &MockBackend::profile)
      .def("digit_probability", &MockBackend::digit_probability);
  m.def("build_mock", py::overload_cast<std::uint64_t, const MockProfile&>(&build_mock), py::arg("seed"),
        py::arg("profile"));

  py::class_<DecodeConfig>(m, "DecodeConfig")
      .def(py::init([](std::int64_t budget, double threshold, std::int64_t interval, std::size_t top_k,
                       std::size_t max_answer_tokens) {
             return DecodeConfig{budget, threshold, interval, top_k, max_answer_tokens};
           }),
           py::arg("budget") = 32000, py::arg("threshold") = 0.97, py::arg("probe_interval") = 1000,
           py::arg("top_k") = 1, py::arg("max_answer_tokens") = 4)
      .def_readwrite("budget", &DecodeConfig::budget)
      .def_readwrite("threshold", &DecodeConfig::threshold)
      .def_readwrite("probe_interval", &DecodeConfig::probe_interval)
      .def_readwrite("top_k", &DecodeConfig::top_k)
      .def_readwrite("max_answer_tokens", &DecodeConfig::max_answer_tokens);

  py::class_<ReasoningTrace>(m, "ReasoningTrace")
      .def_readonly("question_id", &ReasoningTrace::question_id)
      .def_readonly("mode", &ReasoningTrace::mode)
      .def_readonly("thinking_tokens_used", &ReasoningTrace::thinking_tokens_used)
      .def_readonly("budget", &ReasoningTrace::budget)
      .def_readonly("threshold", &ReasoningTrace::threshold)
      .def_readonly("forced_wait_count", &ReasoningTrace::forced_wait_count)
      .def_readonly("stop_reason", &ReasoningTrace::stop_reason)
      .def_readonly("final_certainty", &ReasoningTrace::final_certainty)
      .def_readonly("probe_overhead_tokens", &ReasoningTrace::probe_overhead_tokens)
      .def_readonly("wait_truncated", &ReasoningTrace::wait_truncated)
      .def_readonly("abstainable", &ReasoningTrace::abstainable)
      .def_property_readonly("token_ids",
                             [](const ReasoningTrace& t) {
                               std::vector<TokenId> v;
                               for (const auto& k : t.tokens) v.push_back(k.id);
                               return v;
                             })
      .def_property_readonly("answer", [](const ReasoningTrace& t) { return extract_answer(t.final_answer); })
      .def_property_readonly("probes", [](const ReasoningTrace& t) {
        py::list out;
        for (const auto& p : t.probe_events) out.append(py::make_tuple(p.step, to_string(p.trigger), p.certainty));
        return out;
      });

  m.def(
      "decode",
      [](const std::string& prompt, std::shared_ptr<Backend> backend, DecodingMode mode, const DecodeConfig& config,
         std::shared_ptr<Backend> probe_backend) {
        const auto q = ids(*backend, prompt);
        py::gil_scoped_release release;
        return decode(q, *backend, probe_backend ? *probe_backend : *backend, mode, config);
      },
      py::arg("prompt"), py::arg("backend"), py::arg("mode") = DecodingMode::CgrWithForcing,
      py::arg("config") = DecodeConfig{}, py::arg("probe_backend") = nullptr);

  m.def(
      "sweep_thresholds",
      [](const std::string& prompt, std::shared_ptr<Backend> backend, const std::vector<double>& thresholds,
         DecodingMode mode, const DecodeConfig& config, std::optional<int> truth) {
        const auto q = ids(*backend, prompt);
        const auto s = sweep_thresholds({q, backend.get(), nullptr, mode, truth}, thresholds, config);
        py::list out;
        for (const auto& p : s.points) {
          py::dict d;
          d["threshold"] = p.threshold;
          d["stop_step"] = p.stop_step;
          d["tokens_saved"] = p.tokens_saved;
          d["answer"] = p.answer;
          d["correct"] = p.correct;
          out.append(d);
        }
        return out;
      },
      py::arg("prompt"), py::arg("backend"), py::arg("thresholds"), py::arg("mode") = DecodingMode::CgrWithForcing,
      py::arg("config") = DecodeConfig{}, py::arg("truth") = std::nullopt);

  m.def("softmax", [](const std::vector<double>& x) { return softmax(x); });
  m.def("parse_answer_text", &parse_answer_text);
  m.def("min_certainty", [](const std::vector<double>& probs) {
    AnswerDecode a;
    for (std::size_t i = 0; i < probs.size(); ++i) a.digit_tokens.push_back({{0, "0"}, probs[i]});
    a.parsed_value = probs.empty() ? std::nullopt : std::optional<int>(0);
    return answer_certainty(a);
  });

  py::class_<EvalRecord>(m, "EvalRecord")
      .def(py::init<>())
      .def_readwrite("question_id", &EvalRecord::question_id)
      .def_readwrite("seed", &EvalRecord::seed)
      .def_readwrite("threshold", &EvalRecord::threshold)
      .def_readwrite("predicted", &EvalRecord::predicted)
      .def_readwrite("truth", &EvalRecord::truth)
      .def_readwrite("correct", &EvalRecord::correct)
      .def_readwrite("abstained", &EvalRecord::abstained)
      .def_readwrite("thinking_tokens_used", &EvalRecord::thinking_tokens_used)
      .def_readwrite("tokens_saved", &EvalRecord::tokens_saved)
      .def_readwrite("final_certainty", &EvalRecord::final_certainty)
      .def_readwrite("budget", &EvalRecord::budget)
      .def_readonly("stop_reason", &EvalRecord::stop_reason)
      .def_readonly("mode", &EvalRecord::mode)
      .def("__eq__", [](const EvalRecord& a, const EvalRecord& b) { return a == b; });

  py::class_<GradeReport>(m, "GradeReport")
      .def_readonly("penalty_c", &GradeReport::penalty_c)
      .def_readonly("total_correct", &GradeReport::total_correct)
      .def_readonly("total_wrong", &GradeReport::total_wrong)
      .def_readonly("total_abstained", &GradeReport::total_abstained)
      .def_readonly("grade", &GradeReport::grade);
  m.def("score_question", &score_question, py::arg("predicted"), py::arg("truth"), py::arg("abstained"), py::arg("c"));
  m.def(
      "grade_dataset",
      [](const std::vector<EvalRecord>& records, double c, const std::string& policy, std::optional<double> theta) {
        return grade_dataset(records, c, policy_from(policy, theta));
      },
      py::arg("records"), py::arg("c"), py::arg("policy") = "as_recorded", py::arg("abstain_threshold") = std::nullopt);

  py::class_<SavingsRow>(m, "SavingsRow")
      .def(py::init([](double th, std::int64_t total, std::int64_t seeds, std::int64_t questions) {
             return SavingsRow{th, total, seeds, questions};
           }),
           py::arg("threshold"), py::arg("total_saved"), py::arg("seed_count"), py::arg("question_count"))
      .def_readonly("threshold", &SavingsRow::threshold)
      .def_readonly("total_saved", &SavingsRow::total_saved)
      .def_readonly("seed_count", &SavingsRow::seed_count)
      .def_readonly("question_count", &SavingsRow::question_count);
  m.def("tokens_saved_summary", [](const std::vector<EvalRecord>& r) { return tokens_saved_summary(r); });
  m.def("format_savings_table", [](const std::vector<SavingsRow>& r) { return format_savings_table(r); });

  py::class_<SeedAggregate>(m, "SeedAggregate")
      .def_readonly("seeds", &SeedAggregate::seeds)
      .def_readonly("mean_correct", &SeedAggregate::mean_correct)
      .def_readonly("std_correct", &SeedAggregate::std_correct)
      .def_readonly("cumulative_means", &SeedAggregate::cumulative_means)
      .def_readonly("mean_grade", &SeedAggregate::mean_grade);
  m.def(
      "aggregate_seeds",
      [](const std::vector<double>& counts, const std::map<double, std::vector<double>>& grades) {
        return aggregate_seeds(counts, grades);
      },
      py::arg("correct_counts"), py::arg("grades") = std::map<double, std::vector<double>>{});

  m.def(
      "run_experiment",
      [](const std::filesystem::path& dataset, const std::filesystem::path& out, const Settings& settings) {
        const auto config = resolve_config({}, settings, std::nullopt);
        const auto questions = load_dataset(dataset);
        RunSummary s;
        {
          py::gil_scoped_release release;
          s = run_experiment(config, questions, out);
        }
        return summary_dict(s);
      },
      py::arg("dataset"), py::arg("out_dir"), py::arg("settings") = Settings{});
  m.def("regenerate_reports", [](const std::filesystem::path& dir) { return summary_dict(regenerate_reports(dir)); });
  m.def("emit_plot_data", &emit_plot_data);
}
