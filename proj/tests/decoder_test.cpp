#include <doctest.h>

#include <algorithm>
#include <random>

#include "cgr/decoder.hpp"
#include "cgr/error.hpp"
#include "cgr/mock_backend.hpp"
#include "reference.hpp"

using namespace cgr;
using Kind = StopReason::Kind;

namespace {

DecodeConfig config(std::int64_t budget, double threshold, std::int64_t interval) {
  DecodeConfig c;
  c.budget = budget;
  c.threshold = threshold;
  c.probe_interval = interval;
  return c;
}

bool has_end_think(const ReasoningTrace& t, TokenId end_think) {
  return std::any_of(t.tokens.begin(), t.tokens.end(), [&](const Token& k) { return k.id == end_think; });
}

}  // namespace

TEST_CASE("mode names round-trip") {
  for (auto m : {DecodingMode::Baseline, DecodingMode::BudgetForcing, DecodingMode::Cgr,
                 DecodingMode::CgrWithForcing}) {
    CHECK(parse_mode(to_string(m)) == m);
  }
  CHECK(parse_mode("cgr+bf") == DecodingMode::CgrWithForcing);
  CHECK(parse_mode("bf") == DecodingMode::BudgetForcing);
  CHECK_THROWS_AS(parse_mode("greedy"), ConfigError);
}

TEST_CASE("decode agrees with the reference interpreters") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 60; ++trial) {
    const std::int64_t budget = 200 + static_cast<std::int64_t>(rng() % 3000);
    const std::int64_t interval = std::vector<std::int64_t>{50, 100, 250, 1000}[rng() % 4];
    const double theta = 0.9 + 0.01 * static_cast<double>(rng() % 10);
    const auto m = build_mock(trial, ref::random_profile(rng, budget));
    const auto q = ref::prompt_ids(*m);
    const auto cfg = config(std::max(budget, interval), theta, interval);

    const auto a = decode(q, *m, *m, DecodingMode::Cgr, cfg);
    const auto ra = ref::cgr_loop(*m, q, cfg.budget, theta, interval);
    CHECK(a.stop_reason.kind == ra.kind);
    CHECK(a.stop_reason.step == ra.step);
    CHECK(a.thinking_tokens_used == ra.step);

    const auto b = decode(q, *m, *m, DecodingMode::CgrWithForcing, cfg);
    const auto rb = ref::cgr_forcing_loop(*m, q, cfg.budget, theta, interval);
    CHECK(b.stop_reason.kind == rb.kind);
    CHECK(b.stop_reason.step == rb.step);
    CHECK(b.forced_wait_count == rb.waits);

    const auto c = decode(q, *m, *m, DecodingMode::BudgetForcing, cfg);
    const auto rc = ref::forcing_loop(*m, q, cfg.budget);
    CHECK(c.stop_reason.kind == rc.kind);
    CHECK(c.thinking_tokens_used == cfg.budget);
    CHECK(c.forced_wait_count == rc.waits);
    CHECK(c.probe_events.empty());
  }
}

TEST_CASE("baseline stops at the first end of thinking without probing") {
  MockProfile p;
  p.crossing_step = 10;
  p.stop_attempt_steps = {57};
  p.answer_digits = {9};
  const auto m = build_mock(4, p);
  const auto q = ref::prompt_ids(*m);
  const auto t = decode(q, *m, *m, DecodingMode::Baseline, config(1000, 0.97, 10));
  CHECK(t.stop_reason == StopReason{Kind::NaturalStop, 58});
  CHECK(t.thinking_tokens_used == 58);
  CHECK(t.tokens.back().id == m->specials().end_think.id);
  CHECK(t.probe_events.empty());
  CHECK(t.probe_overhead_tokens == 0);
  CHECK(t.final_answer.parsed_value == 9);
  CHECK_FALSE(t.abstainable);

  const auto none = decode(q, *build_mock(4, MockProfile{}), *m, DecodingMode::Baseline, config(300, 0.97, 10));
  CHECK(none.stop_reason == StopReason{Kind::BudgetExhausted, 300});
  CHECK_FALSE(none.abstainable);
}

TEST_CASE("interval probes land exactly on multiples of the interval") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const std::int64_t interval = 1 + static_cast<std::int64_t>(rng() % 300);
    const std::int64_t budget = interval + static_cast<std::int64_t>(rng() % 2000);
    const auto m = build_mock(trial, ref::random_profile(rng, budget));
    const auto q = ref::prompt_ids(*m);
    for (auto mode : {DecodingMode::Cgr, DecodingMode::CgrWithForcing}) {
      const auto t = decode(q, *m, *m, mode, config(budget, 0.97, interval));
      std::int64_t overhead = 0;
      std::int64_t last = 0;
      for (const auto& e : t.probe_events) {
        overhead += static_cast<std::int64_t>(e.overhead_tokens);
        CHECK(e.step >= last);
        last = e.step;
        if (e.trigger == ProbeTrigger::Interval) {
          CHECK(e.step > 0);
          CHECK(e.step % interval == 0);
        }
        CHECK((e.certainty >= 0.97) == (&e == &t.probe_events.back() && t.stop_reason.kind != Kind::BudgetExhausted &&
                                         t.stop_reason.kind != Kind::NaturalStop));
      }
      CHECK(overhead == t.probe_overhead_tokens);
      const auto intervals = std::count_if(t.probe_events.begin(), t.probe_events.end(),
                                           [](const ProbeResult& e) { return e.trigger == ProbeTrigger::Interval; });
      // A natural stop counts its end of thinking but is not probed.
      const auto probed = t.thinking_tokens_used - (t.stop_reason.kind == Kind::NaturalStop ? 1 : 0);
      CHECK(intervals == probed / interval);
    }
  }
}

TEST_CASE("budget is never exceeded and forcing keeps end of thinking out") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 120; ++trial) {
    const std::int64_t budget = 50 + static_cast<std::int64_t>(rng() % 1500);
    const auto m = build_mock(trial, ref::random_profile(rng, budget));
    const auto q = ref::prompt_ids(*m);
    for (auto mode : {DecodingMode::Baseline, DecodingMode::BudgetForcing, DecodingMode::Cgr,
                      DecodingMode::CgrWithForcing}) {
      const auto t = decode(q, *m, *m, mode, config(budget, 0.97, 25));
      CHECK(t.thinking_tokens_used <= budget);
      CHECK(static_cast<std::int64_t>(t.tokens.size()) == t.thinking_tokens_used);
      if (forces_continuation(mode)) CHECK_FALSE(has_end_think(t, m->specials().end_think.id));
      if (t.stop_reason.kind == Kind::BudgetExhausted) CHECK(t.thinking_tokens_used == budget);
    }
  }
}

TEST_CASE("a multi-token wait cue is cut at the budget") {
  auto vocab = default_vocabulary();
  auto sp = default_specials(vocab);
  sp.wait_text = "\nwait";
  MockProfile p;
  p.stop_attempt_steps = {98};
  const auto m = build_mock(0, p, vocab, sp);
  const auto q = ref::prompt_ids(*m);
  REQUIRE(m->tokenize(sp.wait_text).size() == 5);
  const auto t = decode(q, *m, *m, DecodingMode::BudgetForcing, config(100, 0.97, 100));
  CHECK(t.forced_wait_count == 1);
  CHECK(t.wait_truncated);
  CHECK(t.thinking_tokens_used == 100);
  CHECK(t.stop_reason.kind == Kind::BudgetExhausted);
  CHECK(m->detokenize(std::vector<TokenId>{t.tokens[98].id, t.tokens[99].id}) == "\nw");
}

TEST_CASE("a probe due in the middle of a wait cue fires at its exact step") {
  auto vocab = default_vocabulary();
  auto sp = default_specials(vocab);
  sp.wait_text = "\nwait";
  MockProfile p;
  p.stop_attempt_steps = {48};
  p.crossing_step = 50;
  p.pre_certainty = 0.5;
  p.post_certainty = 0.99;
  const auto m = build_mock(0, p, vocab, sp);
  const auto q = ref::prompt_ids(*m);
  // 48: stop attempt probed at 0.5, substituted; "\n" is step 49, "w" step 50.
  const auto t = decode(q, *m, *m, DecodingMode::CgrWithForcing, config(400, 0.97, 50));
  CHECK(t.stop_reason == StopReason{Kind::EarlyExitCertainty, 50});
  CHECK(t.forced_wait_count == 1);
  REQUIRE(t.probe_events.size() == 2);
  CHECK(t.probe_events[0].trigger == ProbeTrigger::StopAttempt);
  CHECK(t.probe_events[0].step == 48);
  CHECK(t.probe_events[1].trigger == ProbeTrigger::Interval);
  CHECK(t.probe_events[1].step == 50);
}

TEST_CASE("separate probe backend") {
  MockProfile gen_profile;
  gen_profile.answer_digits = {1};
  MockProfile probe_profile;
  probe_profile.crossing_step = 300;
  probe_profile.answer_digits = {2};
  const auto gen = build_mock(1, gen_profile);
  const auto probe = build_mock(1, probe_profile);
  const auto q = ref::prompt_ids(*gen);
  const auto t = decode(q, *gen, *probe, DecodingMode::CgrWithForcing, config(1000, 0.97, 100));
  CHECK(t.stop_reason == StopReason{Kind::EarlyExitCertainty, 300});
  CHECK(t.probe_events.back().answer.parsed_value == 2);
  CHECK(t.final_answer.parsed_value == 1);
}

TEST_CASE("certainty modes that run out of budget are abstainable") {
  MockProfile p;
  p.pre_certainty = 0.8;
  const auto m = build_mock(2, p);
  const auto q = ref::prompt_ids(*m);
  for (auto mode : {DecodingMode::Cgr, DecodingMode::CgrWithForcing}) {
    const auto t = decode(q, *m, *m, mode, config(500, 0.97, 100));
    CHECK(t.stop_reason.kind == Kind::BudgetExhausted);
    CHECK(t.abstainable);
    CHECK(t.final_certainty == doctest::Approx(0.8).epsilon(1e-12));
  }
  const auto bf = decode(q, *m, *m, DecodingMode::BudgetForcing, config(500, 0.97, 100));
  CHECK_FALSE(bf.abstainable);
}

TEST_CASE("decode rejects bad arguments") {
  const auto m = build_mock(0, MockProfile{});
  const auto q = ref::prompt_ids(*m);
  CHECK_THROWS_AS(decode(q, *m, *m, DecodingMode::Cgr, config(0, 0.97, 10)), InputError);
  CHECK_THROWS_AS(decode(q, *m, *m, DecodingMode::Cgr, config(100, 1.5, 10)), InputError);
  CHECK_THROWS_AS(decode(q, *m, *m, DecodingMode::Cgr, config(100, 0.97, 0)), InputError);
  CHECK_THROWS_AS(decode({}, *m, *m, DecodingMode::Cgr, config(100, 0.97, 10)), InputError);
}

TEST_CASE("decoding is reproducible") {
  std::mt19937_64 rng(8);
  const auto p = ref::random_profile(rng, 5000);
  const auto m = build_mock(42, p);
  const auto q = ref::prompt_ids(*m);
  const auto a = decode(q, *m, *m, DecodingMode::CgrWithForcing, config(5000, 0.97, 500), "x");
  const auto b = decode(q, *build_mock(42, p), *m, DecodingMode::CgrWithForcing, config(5000, 0.97, 500), "x");
  CHECK(a.tokens == b.tokens);
  CHECK(a.probe_events == b.probe_events);
  CHECK(a.stop_reason == b.stop_reason);
  CHECK(a.final_answer == b.final_answer);
}
