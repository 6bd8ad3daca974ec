#include "cgr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "cgr/error.hpp"

namespace cgr {

EvalRecord make_record(const ReasoningTrace& trace, std::uint64_t seed, int truth) {
  EvalRecord r;
  r.question_id = trace.question_id;
  r.seed = seed;
  r.threshold = trace.threshold;
  r.predicted = extract_answer(trace.final_answer);
  r.truth = truth;
  r.abstained = trace.abstainable || !r.predicted;
  r.correct = !r.abstained && r.predicted == truth;
  r.thinking_tokens_used = trace.thinking_tokens_used;
  r.tokens_saved = trace.budget - trace.thinking_tokens_used;
  r.final_certainty = trace.final_certainty;
  r.stop_reason = trace.stop_reason;
  r.mode = trace.mode;
  r.budget = trace.budget;
  return r;
}

double score_question(Prediction predicted, int truth, bool abstained, double c) {
  if (abstained) return 0.0;
  if (predicted && *predicted == truth) return 1.0;
  return -c;
}

bool AbstentionPolicy::abstains(const EvalRecord& record) const {
  switch (kind) {
    case Kind::AsRecorded: return record.abstained || !record.predicted;
    case Kind::CertaintyBelow: return !record.predicted || record.final_certainty < min_certainty;
    case Kind::Never: return false;
  }
  return false;
}

std::string AbstentionPolicy::name() const {
  switch (kind) {
    case Kind::AsRecorded: return "as_recorded";
    case Kind::CertaintyBelow: {
      std::ostringstream s;
      s << "certainty_below(" << min_certainty << ")";
      return s.str();
    }
    case Kind::Never: return "never";
  }
  return "?";
}

GradeReport grade_dataset(std::span<const EvalRecord> records, double c,
                          const AbstentionPolicy& policy) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw InputError("penalty c must be finite and >= 0");
  std::unordered_set<std::string> seen;
  GradeReport g;
  g.penalty_c = c;
  for (const auto& r : records) {
    if (!seen.insert(r.question_id).second) {
      throw InputError("duplicate question id '" + r.question_id + "' in graded record set");
    }
    if (policy.abstains(r)) {
      ++g.total_abstained;
    } else if (r.predicted && *r.predicted == r.truth) {
      ++g.total_correct;
    } else {
      ++g.total_wrong;
    }
  }
  g.grade = static_cast<double>(g.total_correct) - c * static_cast<double>(g.total_wrong);
  return g;
}

std::vector<SavingsRow> tokens_saved_summary(std::span<const EvalRecord> records) {
  if (records.empty()) throw InputError("no records to summarise");
  const auto budget = records.front().budget;
  struct Group {
    std::int64_t total = 0;
    std::set<std::uint64_t> seeds;
    std::set<std::string> questions;
  };
  std::map<double, Group> groups;
  for (const auto& r : records) {
    if (r.budget != budget) throw InputError("records mix budgets; summarise each budget separately");
    auto& g = groups[r.threshold];
    g.total += r.tokens_saved;
    g.seeds.insert(r.seed);
    g.questions.insert(r.question_id);
  }
  std::vector<SavingsRow> rows;
  for (const auto& [th, g] : groups) {
    rows.push_back({th, g.total, static_cast<std::int64_t>(g.seeds.size()),
                    static_cast<std::int64_t>(g.questions.size())});
  }
  return rows;
}

std::string with_thousands(std::int64_t value) {
  const bool negative = value < 0;
  std::string digits = std::to_string(negative ? -value : value);
  std::string out;
  const std::size_t lead = digits.size() % 3;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i != 0 && (i + 3 - lead) % 3 == 0) out += ',';
    out += digits[i];
  }
  return negative ? "-" + out : out;
}

namespace {

std::string threshold_text(double th) {
  char buf[32];
  for (int prec = 2; prec <= 8; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*f", prec, th);
    if (std::strtod(buf, nullptr) == th) return buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", th);
  return buf;
}

std::int64_t parse_grouped(std::string field) {
  field.erase(std::remove_if(field.begin(), field.end(),
                             [](char ch) { return ch == ',' || ch == ' '; }),
              field.end());
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(field, &used);
  } catch (const std::exception&) {
    throw InputError("not an integer: '" + field + "'");
  }
  if (used != field.size()) throw InputError("not an integer: '" + field + "'");
  return v;
}

}  // namespace

std::string format_savings_table(std::span<const SavingsRow> rows) {
  std::string out = "Threshold & Total Tokens Saved & Avg. per Seed & Avg. per Question \\\\\n";
  for (const auto& r : rows) {
    const auto per_seed = r.seed_count > 0 ? r.total_saved / r.seed_count : 0;
    const auto per_question =
        r.seed_count * r.question_count > 0 ? r.total_saved / (r.seed_count * r.question_count) : 0;
    out += threshold_text(r.threshold) + " & " + with_thousands(r.total_saved) + " & " +
           with_thousands(per_seed) + " & " + with_thousands(per_question) + " \\\\\n";
  }
  return out;
}

std::vector<FormattedSavings> parse_savings_table(std::string_view text) {
  std::vector<FormattedSavings> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line.rfind("Threshold", 0) == 0) continue;
    if (auto pos = line.rfind("\\\\"); pos != std::string::npos) line.erase(pos);
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, '&')) fields.push_back(f);
    if (fields.size() != 4) throw InputError("savings row needs 4 fields: '" + line + "'");
    FormattedSavings row;
    try {
      row.threshold = std::stod(fields[0]);
    } catch (const std::exception&) {
      throw InputError("bad threshold in savings row: '" + line + "'");
    }
    row.total_saved = parse_grouped(fields[1]);
    row.avg_per_seed = parse_grouped(fields[2]);
    row.avg_per_question = parse_grouped(fields[3]);
    rows.push_back(row);
  }
  return rows;
}

SeedAggregate aggregate_seeds(std::span<const double> correct_counts,
                              const std::map<double, std::vector<double>>& grades) {
  if (correct_counts.empty()) throw InputError("seed aggregate needs at least one seed");
  SeedAggregate a;
  a.seeds = correct_counts.size();
  const double n = static_cast<double>(a.seeds);
  double sum = 0.0;
  for (std::size_t i = 0; i < correct_counts.size(); ++i) {
    sum += correct_counts[i];
    a.cumulative_means.push_back(sum / static_cast<double>(i + 1));
  }
  a.mean_correct = sum / n;
  if (a.seeds > 1) {
    double ss = 0.0;
    for (double v : correct_counts) ss += (v - a.mean_correct) * (v - a.mean_correct);
    a.std_correct = std::sqrt(ss / (n - 1.0));
  }
  for (const auto& [c, per_seed] : grades) {
    if (per_seed.size() != a.seeds) {
      throw InputError("grade series length does not match the seed count");
    }
    double s = 0.0;
    for (double g : per_seed) s += g;
    a.mean_grade[c] = s / n;
  }
  return a;
}

std::vector<RankedQuestion> rank_questions(std::span<const EvalRecord> records) {
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto& r : records) {
    auto& [total, count] = sums[r.question_id];
    total += static_cast<double>(r.tokens_saved);
    ++count;
  }
  std::vector<RankedQuestion> out;
  for (const auto& [id, tc] : sums) {
    out.push_back({id, tc.first / static_cast<double>(tc.second), 0});
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedQuestion& a, const RankedQuestion& b) {
    if (a.mean_tokens_saved != b.mean_tokens_saved) return a.mean_tokens_saved > b.mean_tokens_saved;
    return a.question_id < b.question_id;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].difficulty_rank = i + 1;
  return out;
}

}  // namespace cgr
