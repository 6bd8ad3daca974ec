#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgr/answer.hpp"
#include "cgr/decoder.hpp"

namespace cgr {

/// Outcome of one question under one seed and one run setting.
struct EvalRecord {
  std::string question_id;
  std::uint64_t seed = 0;
  double threshold = 0.0;
  Prediction predicted;
  int truth = 0;
  bool correct = false;
  bool abstained = false;
  std::int64_t thinking_tokens_used = 0;
  std::int64_t tokens_saved = 0;
  double final_certainty = 0.0;
  StopReason stop_reason;
  DecodingMode mode = DecodingMode::Baseline;
  std::int64_t budget = 0;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

/// Builds the record for a finished trace; abstention follows the trace's
/// abstainable flag.
EvalRecord make_record(const ReasoningTrace& trace, std::uint64_t seed, int truth);

/// +1 correct, 0 abstained, -c otherwise.
double score_question(Prediction predicted, int truth, bool abstained, double c);

struct AbstentionPolicy {
  enum class Kind { AsRecorded, CertaintyBelow, Never };
  Kind kind = Kind::AsRecorded;
  double min_certainty = 0.97;

  static AbstentionPolicy as_recorded() { return {Kind::AsRecorded, 0.0}; }
  static AbstentionPolicy certainty_below(double theta) { return {Kind::CertaintyBelow, theta}; }
  static AbstentionPolicy never() { return {Kind::Never, 0.0}; }

  /// Whether `record` counts as an abstention under this policy.
  bool abstains(const EvalRecord& record) const;
  std::string name() const;
};

struct GradeReport {
  double penalty_c = 0.0;
  std::int64_t total_correct = 0;
  std::int64_t total_wrong = 0;
  std::int64_t total_abstained = 0;
  double grade = 0.0;
};

/// Sums score_question over records after applying the policy. Under Never
/// an unparseable prediction counts as wrong. Throws InputError on duplicate
/// question ids or negative c.
GradeReport grade_dataset(std::span<const EvalRecord> records, double c,
                          const AbstentionPolicy& policy);

struct SavingsRow {
  double threshold = 0.0;
  std::int64_t total_saved = 0;
  std::int64_t seed_count = 0;
  std::int64_t question_count = 0;

  double avg_per_seed() const { return static_cast<double>(total_saved) / static_cast<double>(seed_count); }
  double avg_per_question() const {
    return static_cast<double>(total_saved) / static_cast<double>(seed_count * question_count);
  }
};

/// One row per distinct threshold, ascending. Throws InputError on empty
/// input or mixed budgets.
std::vector<SavingsRow> tokens_saved_summary(std::span<const EvalRecord> records);

/// Renders rows as "threshold & total & per seed & per question \\" lines with
/// thousands separators; averages are truncated toward zero.
std::string format_savings_table(std::span<const SavingsRow> rows);

struct FormattedSavings {
  double threshold = 0.0;
  std::int64_t total_saved = 0;
  std::int64_t avg_per_seed = 0;
  std::int64_t avg_per_question = 0;
};

/// Inverse of format_savings_table. Throws InputError.
std::vector<FormattedSavings> parse_savings_table(std::string_view text);

/// "1,234,567"
std::string with_thousands(std::int64_t value);

struct SeedAggregate {
  std::size_t seeds = 0;
  double mean_correct = 0.0;
  double std_correct = 0.0;
  std::vector<double> cumulative_means;
  std::map<double, double> mean_grade;
};

/// Mean, sample standard deviation and prefix means in the given seed order.
/// `grades` maps each penalty to per-seed grades. Throws InputError on empty
/// input or mismatched lengths.
SeedAggregate aggregate_seeds(std::span<const double> correct_counts,
                              const std::map<double, std::vector<double>>& grades = {});

struct RankedQuestion {
  std::string question_id;
  double mean_tokens_saved = 0.0;
  /// 1 is the easiest (most tokens saved).
  std::size_t difficulty_rank = 0;
};

/// Orders questions by mean tokens saved, descending; ties by ascending id.
std::vector<RankedQuestion> rank_questions(std::span<const EvalRecord> records);

}  // namespace cgr
