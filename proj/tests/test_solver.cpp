#include <doctest.h>

#include "fixtures.hpp"
#include "pace/errors.hpp"
#include "pace/pipeline.hpp"
#include "pace/scripted_backend.hpp"
#include "pace/solver.hpp"
#include "pace/synthetic_backend.hpp"

using namespace pace;
using fixtures::FakeBackend;

namespace {

std::string between(const std::string& text, const std::string& open, const std::string& close) {
  const auto a = text.find(open);
  if (a == std::string::npos) return {};
  const auto b = text.find(close, a + open.size());
  return text.substr(a + open.size(), b - a - open.size());
}

}  // namespace

TEST_CASE("pipeline validation") {
  for (const auto& [name, logic] : canonical_pipelines()) {
    INFO(name);
    CHECK(validate_pipeline(logic).empty());
  }

  auto no_return = canonical_pipeline("vanilla");
  no_return.stages.pop_back();
  const auto v = validate_pipeline(no_return);
  CHECK(std::find(v.begin(), v.end(), "must end in Return") != v.end());

  auto banned = canonical_pipeline("self_consistency_verify");
  banned.disallowed_stage_kinds = {"Verify"};
  const auto b = validate_pipeline(banned);
  REQUIRE(b.size() == 1);
  CHECK(b[0].find("Verify") != std::string::npos);

  auto delayed = canonical_pipeline("vanilla");
  delayed.stages[1].delay_ms = 50;
  CHECK_FALSE(validate_pipeline(delayed).empty());

  auto bad_hyper = canonical_pipeline("vanilla");
  bad_hyper.hyperparameters["warp_speed"] = 9;
  CHECK_FALSE(validate_pipeline(bad_hyper).empty());

  auto orphan_exit = canonical_pipeline("vanilla");
  orphan_exit.stages.insert(orphan_exit.stages.begin() + 2, PipelineStage{EarlyExitParams{}});
  CHECK_FALSE(validate_pipeline(orphan_exit).empty());

  PipelineConfig too_long;
  too_long.stages.push_back({SampleParams{}});
  for (int i = 0; i < 12; ++i) too_long.stages.push_back({ExtractParams{}});
  too_long.stages.push_back({ReturnParams{}});
  CHECK_FALSE(validate_pipeline(too_long).empty());
}

TEST_CASE("canonical pipelines") {
  const auto vanilla = canonical_pipeline("vanilla");
  REQUIRE(vanilla.stages.size() == 3);
  CHECK(std::get<SampleParams>(vanilla.stages[0].params) == SampleParams{1, 0.0});
  CHECK(vanilla.stages[1].kind() == StageKind::Extract);
  CHECK(vanilla.stages[2].kind() == StageKind::Return);

  const auto scv = canonical_pipeline("self_consistency_verify");
  std::vector<StageKind> kinds;
  for (const auto& s : scv.stages) kinds.push_back(s.kind());
  CHECK(kinds == std::vector<StageKind>{StageKind::Sample, StageKind::Extract, StageKind::Aggregate,
                                        StageKind::EarlyExit, StageKind::Verify, StageKind::Return});
  CHECK(std::get<SampleParams>(scv.stages[0].params) == SampleParams{3, 0.5});
  CHECK(std::get<EarlyExitParams>(scv.stages[3].params).threshold == 2.0);
  CHECK(std::get<VerifyParams>(scv.stages[4].params).temperature == 0.0);

  const auto sar = canonical_pipeline("score_and_repair");
  kinds.clear();
  for (const auto& s : sar.stages) kinds.push_back(s.kind());
  CHECK(kinds == std::vector<StageKind>{StageKind::Sample, StageKind::SelfCheckScore, StageKind::Aggregate,
                                        StageKind::EarlyExit, StageKind::Repair, StageKind::Return});
  CHECK(std::get<SampleParams>(sar.stages[0].params) == SampleParams{3, 0.3});
  CHECK(std::get<AggregateParams>(sar.stages[2].params).rule == AggregateRule::argmax_score);

  CHECK_THROWS_AS(canonical_pipeline("turbo"), ConfigError);
}

TEST_CASE("pipeline json round trip") {
  for (const auto& [name, logic] : canonical_pipelines()) {
    auto copy = logic;
    copy.hyperparameters["sample_n"] = 5;
    copy.disallowed_stage_kinds = {"Repair"};
    CHECK(pipeline_from_json(to_json(copy)) == copy);
    CHECK(config_digest(pipeline_from_json(to_json(copy))) == config_digest(copy));
  }
  CHECK_THROWS_AS(pipeline_from_json(nlohmann::json::parse(R"({"stages":[{"kind":"Generate"}]})")), ConfigError);
  CHECK_THROWS_AS(pipeline_from_json(nlohmann::json::parse(R"({"stages":[{"kind":"Sample","n":"three"}]})")),
                  ConfigError);

  AgentConfig agent{PromptConfig{}, canonical_pipeline("vanilla")};
  agent.prompt.requirements = {"Think step by step."};
  agent.prompt.output_mode = OutputMode::structured_keyed;
  CHECK(agent_from_json(to_json(agent)) == agent);
  CHECK(prompt_from_json(to_json(agent.prompt)) == agent.prompt);
}

TEST_CASE("answer extraction") {
  CHECK(extract_answer("Answer: C", ExtractorKind::task_default, OutputMode::free_text, TaskKind::letter_choice) ==
        "C");
  CHECK(extract_answer(R"({"reasoning":"r","answer":"d"})", ExtractorKind::task_default, OutputMode::structured_keyed,
                       TaskKind::letter_choice) == "D");
  CHECK(extract_answer(R"({"reasoning":"r","answer":12})", ExtractorKind::task_default, OutputMode::structured_keyed,
                       TaskKind::numeric) == "12");
  CHECK(extract_answer("So x = 1,200", ExtractorKind::task_default, OutputMode::free_text, TaskKind::numeric) ==
        "1200");
  CHECK(extract_answer("thinking...\nAnswer: the Eiffel Tower", ExtractorKind::task_default, OutputMode::free_text,
                       TaskKind::span) == "the Eiffel Tower");
  // Malformed keyed output falls back to the raw text.
  CHECK(extract_answer("{broken answer: B", ExtractorKind::letter, OutputMode::structured_keyed,
                       TaskKind::letter_choice) == "B");
  CHECK(extract_answer("no idea", ExtractorKind::letter, OutputMode::free_text, TaskKind::letter_choice).empty());
  CHECK(extract_reasoning(R"({"reasoning":"because","answer":"A"})") == "because");
  CHECK(extract_reasoning("plain") == "plain");
}

TEST_CASE("system prompt") {
  PromptConfig p;
  p.role = "Role.";
  CHECK(build_system_prompt(p) == "Role.");
  p.requirements = {"One.", "Two."};
  CHECK(build_system_prompt(p) == "Role.\n\nRequirements:\n- One.\n- Two.");
  p.output_mode = OutputMode::structured_keyed;
  CHECK(build_system_prompt(p).find("\"answer\"") != std::string::npos);
}

TEST_CASE("compliance fraction parsing") {
  CHECK(parse_compliance_fraction("3/4 constraints satisfied") == doctest::Approx(0.75));
  CHECK(parse_compliance_fraction("all satisfied") == doctest::Approx(1.0));
  CHECK(parse_compliance_fraction("none of the constraints are satisfied") == doctest::Approx(0.0));
  CHECK(parse_compliance_fraction("not all constraints are satisfied") == std::nullopt);
  CHECK(parse_compliance_fraction("first 1/3 then 2/3 constraints satisfied") == doctest::Approx(2.0 / 3.0));
  CHECK_FALSE(parse_compliance_fraction("banana").has_value());
}

TEST_CASE("self-check judge") {
  const auto sample = fixtures::constrained_sample("c1", {{{"kind", "case"}, {"mode", "lower"}}});
  SUBCASE("parsed fraction") {
    FakeBackend backend([](const GenerationRequest&, int) { return "3/4 constraints satisfied"; });
    const auto r = self_check_constraints(sample, "text", backend);
    CHECK(r.score == doctest::Approx(0.75));
    CHECK(r.parsed);
    CHECK(r.usage.calls == 1);
    CHECK(backend.requests()[0].temperature == 0.0);
    CHECK(backend.requests()[0].messages[1].content.find("<response>\ntext\n</response>") != std::string::npos);
  }
  SUBCASE("all satisfied") {
    FakeBackend backend([](const GenerationRequest&, int) { return "all satisfied"; });
    CHECK(self_check_constraints(sample, "text", backend).score == 1.0);
  }
  SUBCASE("garbage") {
    FakeBackend backend([](const GenerationRequest&, int) { return "lorem ipsum"; });
    const auto r = self_check_constraints(sample, "text", backend);
    CHECK(r.score == 0.0);
    CHECK_FALSE(r.parsed);
  }
}

TEST_CASE("repair acceptance") {
  CHECK(apply_repair_acceptance(0.6, 0.9) == RepairDecision::take_repair);
  CHECK(apply_repair_acceptance(0.6, 0.6) == RepairDecision::take_repair);
  CHECK(apply_repair_acceptance(0.6, 0.5) == RepairDecision::keep_best);
}

TEST_CASE("vanilla pipeline through a scripted backend") {
  const auto sample = fixtures::letter_samples(3)[2];
  PromptConfig prompt;
  Script script;
  fixtures::script_task(script, prompt, sample, prompt.temperature, 0, "I think the answer is C.");
  ScriptedBackend backend(script);
  const auto out = run_pipeline(prompt, canonical_pipeline("vanilla"), sample, backend);
  CHECK(out.answer == "C");
  CHECK(out.usage.calls == 1);
  CHECK_FALSE(out.extraction_failed);
  REQUIRE(out.trace.size() == 3);
  CHECK(out.trace[0].kind == StageKind::Sample);
  CHECK(out.trace[0].outputs == std::vector<std::string>{"I think the answer is C."});
  CHECK(out.trace[1].outputs == std::vector<std::string>{"C"});
}

TEST_CASE("self-consistency with consensus exits early") {
  const auto sample = fixtures::letter_samples(1)[0];
  const std::vector<std::string> replies = {"Answer: A", "Answer: A", "Answer: B"};
  FakeBackend backend([&](const GenerationRequest& r, int i) {
    return r.purpose == Purpose::task ? replies[static_cast<std::size_t>(i)] : std::string("Answer: D");
  });
  const auto out = run_pipeline(PromptConfig{}, canonical_pipeline("self_consistency_verify"), sample, backend);
  CHECK(out.answer == "A");
  CHECK(backend.total_calls() == 1);
  CHECK(backend.calls(Purpose::verify) == 0);
  CHECK(backend.requests()[0].n == 3);
  CHECK(backend.requests()[0].temperature == doctest::Approx(0.5));
}

TEST_CASE("self-consistency without consensus asks for verification") {
  const auto sample = fixtures::letter_samples(1)[0];
  const std::vector<std::string> replies = {"Answer: A", "Answer: B", "Answer: C"};
  FakeBackend backend([&](const GenerationRequest& r, int i) {
    return r.purpose == Purpose::task ? replies[static_cast<std::size_t>(i)] : std::string("Answer: C");
  });
  const auto out = run_pipeline(PromptConfig{}, canonical_pipeline("self_consistency_verify"), sample, backend);
  CHECK(out.answer == "C");
  CHECK(backend.total_calls() == 2);
  const auto& verify = backend.requests()[1];
  CHECK(verify.purpose == Purpose::verify);
  CHECK(verify.temperature == 0.0);
  CHECK(verify.messages.back().content.find("Previous answer: A") != std::string::npos);
}

TEST_CASE("unparseable verification keeps the top answer") {
  const auto sample = fixtures::letter_samples(1)[0];
  const std::vector<std::string> replies = {"Answer: B", "Answer: C", "Answer: D"};
  FakeBackend backend([&](const GenerationRequest& r, int i) {
    return r.purpose == Purpose::task ? replies[static_cast<std::size_t>(i)] : std::string("hmm");
  });
  const auto out = run_pipeline(PromptConfig{}, canonical_pipeline("self_consistency_verify"), sample, backend);
  CHECK(out.answer == "B");
}

TEST_CASE("score and repair stops on a perfect self-check") {
  const auto sample = fixtures::constrained_sample("c1", {{{"kind", "case"}, {"mode", "lower"}}});
  const std::vector<std::string> replies = {"first draft", "second draft", "third draft"};
  const std::map<std::string, std::string> verdicts = {{"first draft", "3/5 constraints satisfied"},
                                                       {"second draft", "5/5 constraints satisfied"},
                                                       {"third draft", "3/10 constraints satisfied"}};
  FakeBackend backend([&](const GenerationRequest& r, int i) {
    if (r.purpose == Purpose::task) return replies[static_cast<std::size_t>(i)];
    if (r.purpose == Purpose::judge)
      return verdicts.at(between(r.messages.back().content, "<response>\n", "\n</response>"));
    return std::string("repaired\nSELF-CHECK: 1/1 constraints satisfied");
  });
  const auto out = run_pipeline(PromptConfig{}, canonical_pipeline("score_and_repair"), sample, backend);
  CHECK(out.answer == "second draft");
  CHECK(backend.calls(Purpose::repair) == 0);
  CHECK(backend.total_calls() == 4);
}

TEST_CASE("score and repair applies the acceptance rule") {
  const auto sample = fixtures::constrained_sample("c1", {{{"kind", "case"}, {"mode", "lower"}}});
  const std::vector<std::string> replies = {"draft a", "draft b", "draft c"};
  auto run = [&](const std::string& repair_reply) {
    FakeBackend backend([&](const GenerationRequest& r, int i) {
      if (r.purpose == Purpose::task) return replies[static_cast<std::size_t>(i)];
      if (r.purpose == Purpose::judge)
        return std::string(between(r.messages.back().content, "<response>\n", "\n</response>") == "draft b"
                               ? "2/3 constraints satisfied"
                               : "1/3 constraints satisfied");
      return repair_reply;
    });
    auto out = run_pipeline(PromptConfig{}, canonical_pipeline("score_and_repair"), sample, backend);
    CHECK(backend.total_calls() == 5);
    CHECK(backend.requests().back().messages.size() == 4);
    return out.answer;
  };
  CHECK(run("fixed text\nSELF-CHECK: 3/3 constraints satisfied") == "fixed text");
  CHECK(run("tie text\nSELF-CHECK: 2/3 constraints satisfied") == "tie text");
  CHECK(run("worse text\nSELF-CHECK: 1/3 constraints satisfied") == "draft b");
  CHECK(run("no score line") == "draft b");
}

TEST_CASE("hyperparameter overrides") {
  const auto sample = fixtures::letter_samples(1)[0];
  auto logic = canonical_pipeline("self_consistency_verify");
  logic.hyperparameters["sample_n"] = 5;
  logic.hyperparameters["consensus_threshold"] = 4;
  logic.hyperparameters["temperature_floor"] = 0.8;
  const std::vector<std::string> replies = {"A", "A", "A", "B", "C"};
  FakeBackend backend([&](const GenerationRequest& r, int i) {
    return r.purpose == Purpose::task ? replies[static_cast<std::size_t>(i)] : std::string("B");
  });
  const auto out = run_pipeline(PromptConfig{}, logic, sample, backend);
  CHECK(backend.requests()[0].n == 5);
  CHECK(backend.requests()[0].temperature == doctest::Approx(0.8));
  CHECK(backend.total_calls() == 2);
  CHECK(out.answer == "B");
}

TEST_CASE("extraction failure is reported") {
  const auto sample = fixtures::letter_samples(1)[0];
  FakeBackend backend([](const GenerationRequest&, int) { return "I cannot determine this."; });
  const auto out = run_pipeline(PromptConfig{}, canonical_pipeline("vanilla"), sample, backend);
  CHECK(out.answer.empty());
  CHECK(out.extraction_failed);
}

TEST_CASE("wrong candidate count is a protocol error") {
  class Short final : public Backend {
   public:
    GenerationResponse generate(const GenerationRequest&) override { return GenerationResponse{{"A"}}; }
  } backend;
  const auto sample = fixtures::letter_samples(1)[0];
  CHECK_THROWS_AS(run_pipeline(PromptConfig{}, canonical_pipeline("self_consistency_verify"), sample, backend),
                  ProtocolError);
}

TEST_CASE("max output units reach every request") {
  const auto sample = fixtures::letter_samples(1)[0];
  const std::vector<std::string> replies = {"A", "B", "C"};
  FakeBackend backend([&](const GenerationRequest& r, int i) {
    return r.purpose == Purpose::task ? replies[static_cast<std::size_t>(i)] : std::string("A");
  });
  run_pipeline(PromptConfig{}, canonical_pipeline("self_consistency_verify"), sample, backend, 8000);
  for (const auto& r : backend.requests()) CHECK(r.max_output_units == 8000);
}
