#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "cgr/certainty.hpp"
#include "cgr/error.hpp"
#include "cgr/mock_backend.hpp"
#include "reference.hpp"

using namespace cgr;
using big = boost::multiprecision::cpp_dec_float_50;

namespace {

std::vector<double> softmax_oracle(const std::vector<double>& logits) {
  std::vector<big> e;
  big total = 0;
  for (double x : logits) {
    e.push_back(boost::multiprecision::exp(big(x)));
    total += e.back();
  }
  std::vector<double> out;
  for (const auto& v : e) out.push_back(static_cast<double>(v / total));
  return out;
}

AnswerDecode digits(std::initializer_list<double> ps, std::optional<int> value) {
  AnswerDecode a;
  int d = 1;
  for (double p : ps) a.digit_tokens.push_back({{d, std::to_string(d)}, p}), ++d;
  a.parsed_value = value;
  return a;
}

}  // namespace

TEST_CASE("softmax agrees with a 50-digit oracle") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> logits(1 + trial % 17);
    for (auto& x : logits) x = u(rng);
    const auto got = softmax(logits);
    const auto want = softmax_oracle(logits);
    double sum = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(std::abs(got[i] - want[i]) <= 1e-14);
      sum += got[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("softmax handles extreme logits and rejects bad input") {
  const std::vector<double> wide{1000.0, 0.0};
  const auto p = softmax(wide);
  CHECK(std::isfinite(p[0]));
  CHECK(std::isfinite(p[1]));
  CHECK(p[0] == 1.0);
  const std::vector<double> low{-1000.0, -1001.0};
  const auto q = softmax(low);
  CHECK(q[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK_THROWS_AS(softmax(std::vector<double>{}), NumericalError);
  CHECK_THROWS_AS(softmax(std::vector<double>{1.0, NAN}), NumericalError);
  CHECK_THROWS_AS(softmax(std::vector<double>{INFINITY}), NumericalError);
}

TEST_CASE("certainty is the minimum over answer positions") {
  CHECK(answer_certainty(digits({0.99, 0.98, 0.99}, 123)) == 0.98);
  CHECK(answer_certainty(digits({0.7}, 5)) == 0.7);
  CHECK(answer_certainty(digits({1.0, 1.0}, 12)) == 1.0);
  CHECK(answer_certainty(digits({0.99, 0.99}, std::nullopt)) == 0.0);
  CHECK(answer_certainty(digits({}, std::nullopt)) == 0.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng);
    const double m = answer_certainty(digits({a, b, c}, 100));
    CHECK(m == std::min({a, b, c}));
    CHECK(m <= a);
  }
}

TEST_CASE("answer text parsing") {
  CHECK(parse_answer_text("42") == 42);
  CHECK(parse_answer_text(" 007 ") == 7);
  CHECK(parse_answer_text("0") == 0);
  CHECK(parse_answer_text("000") == 0);
  CHECK(parse_answer_text("999") == 999);
  CHECK_FALSE(parse_answer_text("1000").has_value());
  CHECK_FALSE(parse_answer_text("").has_value());
  CHECK_FALSE(parse_answer_text("4 2").has_value());
  CHECK_FALSE(parse_answer_text("x1").has_value());
  CHECK_FALSE(parse_answer_text("-5").has_value());
}

TEST_CASE("forced answers read the mock's digits and leave the context alone") {
  MockProfile p;
  p.crossing_step = 10;
  p.pre_certainty = 0.4;
  p.post_certainty = 0.995;
  p.answer_digits = {0, 4, 2};
  const auto m = build_mock(8, p);
  const auto q = ref::prompt_ids(*m);
  std::vector<TokenId> ctx = q;
  for (int i = 0; i < 12; ++i) ctx.push_back(20);
  const auto before = ctx;

  const auto f = force_answer_detailed({ctx, q.size()}, *m, 4);
  CHECK(ctx == before);
  REQUIRE(f.answer.digit_tokens.size() == 3);
  CHECK(f.answer.parsed_value == 42);
  CHECK(extract_answer(f.answer) == 42);
  CHECK(f.tokens_spent == 2 + 4);

  const auto probe = certainty_probe({ctx, q.size()}, *m, 12, ProbeTrigger::StopAttempt);
  CHECK(probe.certainty == doctest::Approx(0.995).epsilon(1e-12));
  CHECK(probe.step == 12);
  CHECK(probe.trigger == ProbeTrigger::StopAttempt);
  CHECK(probe.overhead_tokens == f.tokens_spent);
  CHECK(probe.certainty == doctest::Approx(ref::probe(*m, ctx, q.size())).epsilon(1e-12));

  std::vector<TokenId> early(q);
  for (int i = 0; i < 3; ++i) early.push_back(20);
  CHECK(certainty_probe({early, q.size()}, *m, 3).certainty == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("max_answer_tokens caps the forced decode") {
  MockProfile p;
  p.answer_digits = {1, 2, 3};
  const auto m = build_mock(1, p);
  const auto q = ref::prompt_ids(*m);
  const auto a = force_answer({q, q.size()}, *m, 2);
  CHECK(a.digit_tokens.size() == 2);
  CHECK(a.parsed_value == 12);
  const auto probe = certainty_probe({q, q.size()}, *m, 0, ProbeTrigger::Interval, 4);
  CHECK(probe.answer.parsed_value == 123);
}

TEST_CASE("probe results agree with the reference probe on random profiles") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = ref::random_profile(rng, 2000);
    const auto m = build_mock(trial, p);
    const auto q = ref::prompt_ids(*m);
    std::vector<TokenId> ctx = q;
    const int steps = static_cast<int>(rng() % 2000);
    for (int i = 0; i < steps; ++i) ctx.push_back(20);
    const auto r = certainty_probe({ctx, q.size()}, *m, steps);
    CHECK(r.certainty == ref::probe(*m, ctx, q.size()));
  }
}
