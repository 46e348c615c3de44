#include <doctest.h>

#include <stdexcept>

#include "fixtures.hpp"
#include "pace/constraints.hpp"
#include "pace/errors.hpp"
#include "pace/task.hpp"

using namespace pace;

TEST_CASE("letter match") {
  CHECK(score_letter_match("The answer is (B).", 'B').utility == 1.0);
  CHECK(score_letter_match("b", 'B').utility == 1.0);
  const auto miss = score_letter_match("none of these options", 'C');
  CHECK(miss.utility == 0.0);
  CHECK(miss.extraction_failed);
  CHECK(score_letter_match("C", 'B').utility == 0.0);
  CHECK_FALSE(score_letter_match("C", 'B').extraction_failed);
}

TEST_CASE("choice letter extraction") {
  CHECK(extract_choice_letter("Answer: d") == 'D');
  CHECK(extract_choice_letter("(A)") == 'A');
  CHECK_FALSE(extract_choice_letter("Beautiful day").has_value());
  CHECK_FALSE(extract_choice_letter("").has_value());
}

TEST_CASE("numeric normalization") {
  CHECK(normalize_numeric("1,234.50") == "1234.5");
  CHECK(normalize_numeric("7") == "7");
  CHECK(normalize_numeric("about 0.500 meters") == "0.5");
  CHECK(normalize_numeric("no digits") == "");
}

TEST_CASE("numeric exact match") {
  CHECK(score_numeric_exact("answer: 1,000", "1000").utility == 1.0);
  CHECK(score_numeric_exact("42", "42").utility == 1.0);
  const auto miss = score_numeric_exact("no number here", "5");
  CHECK(miss.utility == 0.0);
  CHECK(miss.extraction_failed);
}

TEST_CASE("span normalization and scoring") {
  CHECK(normalize_span("The Eiffel Tower.") == "eiffel tower");
  CHECK(normalize_span("") == "");
  CHECK(normalize_span("A  dog") == "dog");

  auto s = score_span_em_f1("the Eiffel Tower", "Eiffel Tower");
  CHECK(s.em == 1);
  CHECK(s.f1 == doctest::Approx(1.0));
  s = score_span_em_f1("barack obama", "obama");
  CHECK(s.em == 0);
  CHECK(s.f1 == doctest::Approx(2.0 / 3.0));
  s = score_span_em_f1("paris", "london");
  CHECK(s.em == 0);
  CHECK(s.f1 == 0.0);
}

TEST_CASE("strict constraint scoring") {
  const std::vector<nlohmann::json> specs = {
      {{"kind", "word_count"}, {"max", 5}},
      {{"kind", "case"}, {"mode", "lower"}},
      {{"kind", "keyword"}, {"keyword", "river"}},
  };
  const auto owned = make_checkers(specs);
  std::vector<const ConstraintChecker*> checkers;
  for (const auto& c : owned) checkers.push_back(c.get());

  auto r = score_strict_constraints("a river runs", checkers);
  CHECK(r.utility == 1.0);
  CHECK(r.loose == doctest::Approx(1.0));

  r = score_strict_constraints("A river runs", checkers);
  CHECK(r.utility == 0.0);
  CHECK(r.loose == doctest::Approx(2.0 / 3.0));
  CHECK(r.violated_constraints == std::vector<std::string>{"case#1"});

  r = score_strict_constraints("The Lake Is Calm And Very Still Today", checkers);
  CHECK(r.utility == 0.0);
  CHECK(r.loose == doctest::Approx(0.0));
}

TEST_CASE("constraint checkers") {
  CHECK_THROWS_AS(make_checker({{"kind", "rhyme"}}, 0), ConfigError);
  CHECK_THROWS_AS(make_checker({{"kind", "word_count"}, {"min", "three"}}, 0), ConfigError);
  CHECK(make_checker({{"kind", "case"}, {"mode", "upper"}}, 3)->id() == "case#3");
  CHECK(make_checker({{"kind", "case"}, {"mode", "upper"}, {"id", "caps"}}, 3)->id() == "caps");

  CHECK(make_checker({{"kind", "forbidden_punctuation"}, {"chars", ","}}, 0)->check("no commas here"));
  CHECK_FALSE(make_checker({{"kind", "forbidden_punctuation"}, {"chars", ","}}, 0)->check("one, two"));
  CHECK(make_checker({{"kind", "paragraph_count"}, {"count", 2}}, 0)->check("one\n\ntwo"));
  CHECK_FALSE(make_checker({{"kind", "paragraph_count"}, {"count", 2}}, 0)->check("one\ntwo"));
  CHECK(make_checker({{"kind", "keyword"}, {"keyword", "tea"}, {"present", false}}, 0)->check("coffee"));
  CHECK(make_checker({{"kind", "word_count"}, {"min", 2}, {"max", 3}}, 0)->check("two words"));
  CHECK_FALSE(make_checker({{"kind", "word_count"}, {"min", 2}, {"max", 3}}, 0)->check("one"));
}

TEST_CASE("pass^k") {
  CHECK(pass_k(4, 4, 4) == 1.0);
  CHECK(pass_k(3, 4, 2) == doctest::Approx(0.5));
  CHECK(pass_k(1, 4, 2) == 0.0);
  CHECK(pass_k(0, 3, 1) == 0.0);
  CHECK_THROWS_AS(pass_k(0, 3, 0), std::invalid_argument);
  CHECK_THROWS_AS(pass_k(5, 4, 2), std::invalid_argument);
  CHECK_THROWS_AS(pass_k(2, 4, 5), std::invalid_argument);
  CHECK_THROWS_AS(pass_k(-1, 4, 2), std::invalid_argument);
  CHECK_THROWS_AS(pass_k(1, 0, 0), std::invalid_argument);
}

TEST_CASE("score dispatch") {
  auto samples = fixtures::letter_samples(2);
  CHECK(score_answer(samples[1], "B").utility == 1.0);
  const auto empty = score_answer(samples[1], "");
  CHECK(empty.utility == 0.0);
  CHECK(empty.extraction_failed);

  TaskSample span;
  span.kind = TaskKind::span;
  span.gold = "Eiffel Tower";
  const auto r = score_answer(span, "the eiffel tower");
  CHECK(r.utility == 1.0);
  CHECK(r.f1 == doctest::Approx(1.0));

  auto constrained = fixtures::constrained_sample("c1", {{{"kind", "case"}, {"mode", "lower"}}});
  CHECK(score_answer(constrained, "all lower").utility == 1.0);
  CHECK(score_answer(constrained, "Not Lower").loose == doctest::Approx(0.0));
}

TEST_CASE("render task") {
  TaskSample one;
  one.input_fields = {{"question", "What is 2+2?"}};
  CHECK(render_task(one) == "What is 2+2?");
  const auto two = fixtures::letter_samples(1)[0];
  const auto text = render_task(two);
  CHECK(text.find("Question 0: pick one.") != std::string::npos);
  CHECK(text.find("A. a") != std::string::npos);
  CHECK(text.find("Question 0") < text.find("A. a"));
}

TEST_CASE("dataset round trip and splits") {
  fixtures::TempDir dir("pace-task");
  auto samples = fixtures::letter_samples(20);
  samples.push_back(fixtures::constrained_sample("c1", {{{"kind", "case"}, {"mode", "lower"}}}));
  samples[3].metadata["subject"] = "chemistry";
  fixtures::write_samples(dir.file("d.jsonl"), samples);

  const auto loaded = load_dataset(dir.file("d.jsonl"), TaskKind::letter_choice);
  REQUIRE(loaded.size() == samples.size());
  CHECK(loaded[3].metadata.at("subject") == "chemistry");
  CHECK(loaded[3].input_fields == samples[3].input_fields);
  CHECK(loaded.back().kind == TaskKind::constrained);
  CHECK(loaded.back().constraints.size() == 1);

  const auto a = make_splits(loaded, 15, 5, 7);
  const auto b = make_splits(loaded, 15, 5, 7);
  CHECK(a.train_pool.size() == 15);
  CHECK(a.test_set.size() == 5);
  std::set<std::string> ids;
  for (const auto& s : a.train_pool) ids.insert(s.id);
  for (const auto& s : a.test_set) CHECK(ids.insert(s.id).second);
  for (std::size_t i = 0; i < a.train_pool.size(); ++i) CHECK(a.train_pool[i].id == b.train_pool[i].id);

  CHECK_THROWS_AS(make_splits(loaded, 20, 5, 7), ConfigError);
  auto dup = loaded;
  dup[1].id = dup[0].id;
  CHECK_THROWS_AS(make_splits(dup, 10, 5, 7), ConfigError);
  CHECK_THROWS_AS(load_dataset(dir.file("missing.jsonl"), TaskKind::letter_choice), ConfigError);
}
