#include "pace/synthetic_backend.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pace/digest.hpp"
#include "pace/errors.hpp"
#include "pace/pipeline.hpp"
#include "pace/solver.hpp"

namespace pace {
namespace {

// Independent random streams per use, so adding one kind of draw never shifts another.
enum Stream : std::uint64_t {
  kMalformedStream = 1,
  kGoldStream = 2,
  kDistractorStream = 3,
  kJudgeStream = 4,
  kRepairStream = 5,
  kProposalStream = 6,
};

double draw(std::uint64_t seed, std::uint64_t key, std::uint64_t index, Stream stream) {
  std::uint64_t h = mix64(seed ^ 0x5bd1e995ULL);
  h = mix64(h ^ key);
  h = mix64(h ^ (index * 0x9e3779b97f4a7c15ULL));
  h = mix64(h ^ static_cast<std::uint64_t>(stream));
  return unit_interval(h);
}

std::string system_text(const GenerationRequest& request) {
  for (const auto& m : request.messages)
    if (m.role == Role::system) return m.content;
  return {};
}

std::string format_number(double v) {
  std::ostringstream out;
  out.precision(12);
  out << v;
  return out.str();
}

std::vector<std::string> make_distractors(const TaskSample& sample, bool single) {
  switch (sample.kind) {
    case TaskKind::letter_choice: {
      const char gold = static_cast<char>(std::toupper(static_cast<unsigned char>(sample.gold.front())));
      std::vector<std::string> out;
      for (int step = 1; step <= 3; ++step) {
        out.emplace_back(1, static_cast<char>('A' + ((gold - 'A' + step) % 4)));
        if (single) break;
      }
      return out;
    }
    case TaskKind::numeric: {
      const auto norm = normalize_numeric(sample.gold);
      const double g = norm.empty() ? 0.0 : std::stod(norm);
      if (single) return {format_number(g + 1)};
      return {format_number(g + 1), format_number(g - 1), format_number(g * 2 + 3)};
    }
    case TaskKind::span:
      if (single) return {"unknown"};
      return {"unknown", "none of them", "not stated"};
    case TaskKind::constrained: {
      auto it = sample.metadata.find("synthetic_violating");
      if (it == sample.metadata.end())
        throw ConfigError("sample " + sample.id + ": constrained synthetic samples need synthetic_violating");
      return {it->second};
    }
  }
  return {};
}

double metadata_double(const TaskSample& s, const char* key, double fallback) {
  auto it = s.metadata.find(key);
  return it == s.metadata.end() ? fallback : std::stod(it->second);
}

// What the surrogate says for one candidate of a task-style request.
struct Draw {
  bool malformed = false;
  bool gold = false;
  std::string answer;
};

Draw draw_answer(const Landscape& landscape, const SampleProfile& profile, const std::string& sys,
                 std::uint64_t seed, std::uint64_t key, int index, Stream gold_stream) {
  Draw d;
  if (draw(seed, key, static_cast<std::uint64_t>(index), kMalformedStream) <
      landscape.malformed_probability(profile, sys)) {
    d.malformed = true;
    return d;
  }
  if (draw(seed, key, static_cast<std::uint64_t>(index), gold_stream) < landscape.gold_probability(profile, sys)) {
    d.gold = true;
    d.answer = profile.gold;
    return d;
  }
  const auto pick = draw(seed, key, static_cast<std::uint64_t>(index), kDistractorStream);
  const auto n = profile.distractors.size();
  d.answer = profile.distractors[std::min(n - 1, static_cast<std::size_t>(pick * static_cast<double>(n)))];
  return d;
}

std::string malformed_text(const SampleProfile& profile) {
  return profile.kind == TaskKind::letter_choice || profile.kind == TaskKind::numeric ? "I cannot determine this."
                                                                                     : "";
}

bool judge_correct(const SampleProfile& profile, std::string_view candidate) {
  if (profile.kind == TaskKind::constrained) return candidate == profile.gold;
  TaskSample probe;
  probe.kind = profile.kind;
  probe.gold = profile.gold;
  const auto answer = extract_answer(candidate, ExtractorKind::task_default, OutputMode::free_text, profile.kind);
  return score_answer(probe, answer).utility >= 1.0;
}

std::string between(const std::string& text, std::string_view open, std::string_view close) {
  const auto b = text.find(open);
  if (b == std::string::npos) return {};
  const auto start = b + open.size();
  const auto e = text.find(close, start);
  return text.substr(start, e == std::string::npos ? std::string::npos : e - start);
}

}  // namespace

double Landscape::gold_probability(const SampleProfile& profile, std::string_view system) const {
  double p = profile.base;
  for (const auto& e : effects)
    if (system.find(e.directive) != std::string_view::npos) p += e.accuracy_bonus;
  return std::clamp(p, 0.0, cap);
}

double Landscape::malformed_probability(const SampleProfile& profile, std::string_view system) const {
  double m = profile.malformed;
  for (const auto& e : effects)
    if (system.find(e.directive) != std::string_view::npos) m -= e.malformed_reduction;
  return std::clamp(m, 0.0, 1.0);
}

std::string render_synthetic_answer(const std::string& answer, OutputMode mode) {
  if (mode == OutputMode::structured_keyed) {
    nlohmann::ordered_json j;
    j["reasoning"] = "Working through the problem carefully.";
    j["answer"] = answer;
    return j.dump();
  }
  return "Answer: " + answer;
}

Landscape landscape_from_json(const nlohmann::json& spec, std::span<const TaskSample> samples) {
  Landscape l;
  const double base = spec.value("base", 0.5);
  const double malformed = spec.value("malformed", 0.0);
  l.cap = spec.value("cap", 1.0);
  l.judge_accuracy = spec.value("judge_accuracy", 1.0);
  const auto distractors = spec.value("distractors", std::string("all"));
  if (distractors != "all" && distractors != "single") throw ConfigError("landscape distractors must be all|single");

  if (spec.contains("effects")) {
    for (const auto& e : spec.at("effects"))
      l.effects.push_back(DirectiveEffect{e.at("directive").get<std::string>(), e.value("accuracy_bonus", 0.0),
                                          e.value("malformed_reduction", 0.0)});
  }
  l.directive_vocabulary = spec.value("vocabulary", std::vector<std::string>{});
  if (l.directive_vocabulary.empty())
    for (const auto& e : l.effects) l.directive_vocabulary.push_back(e.directive);

  if (spec.contains("proposer")) {
    for (const auto& p : spec.at("proposer")) {
      ProposerEntry entry;
      entry.weight = p.value("weight", 1.0);
      if (p.contains("reply")) {
        entry.reply = p.at("reply").get<std::string>();
      } else {
        nlohmann::ordered_json reply;
        reply["category"] = p.at("category").get<std::string>();
        const auto& pipeline = p.at("pipeline");
        reply["pipeline"] = pipeline.is_string() ? to_json(canonical_pipeline(pipeline.get<std::string>()))
                                                 : nlohmann::ordered_json::parse(pipeline.dump());
        entry.reply = reply.dump();
      }
      if (entry.weight <= 0) throw ConfigError("proposer weights must be positive");
      l.proposer.push_back(std::move(entry));
    }
  }

  for (const auto& s : samples) {
    SampleProfile profile;
    profile.kind = s.kind;
    if (s.kind == TaskKind::constrained) {
      auto it = s.metadata.find("synthetic_compliant");
      if (it == s.metadata.end())
        throw ConfigError("sample " + s.id + ": constrained synthetic samples need synthetic_compliant");
      profile.gold = it->second;
    } else {
      profile.gold = s.gold;
    }
    profile.distractors = make_distractors(s, distractors == "single");
    profile.base = metadata_double(s, "synthetic_base", base);
    profile.malformed = metadata_double(s, "synthetic_malformed", malformed);
    l.samples[s.id] = std::move(profile);
  }
  return l;
}

GenerationResponse generate_synthetic(const Landscape& landscape, const GenerationRequest& request,
                                      std::uint64_t seed, const CostModel& cost) {
  validate_request(request);
  GenerationResponse response;
  const auto digest_key = fnv1a64(request_digest(request.messages));

  auto profile_for = [&]() -> const SampleProfile& {
    auto it = landscape.samples.find(request.sample_id);
    if (it == landscape.samples.end())
      throw BackendError("synthetic landscape has no sample '" + request.sample_id + "'");
    return it->second;
  };

  for (int i = 0; i < request.n; ++i) {
    std::string text;
    switch (request.purpose) {
      case Purpose::verify: {
        // The surrogate confirms the answer under review rather than resampling it.
        auto previous = between(request.messages.back().content, "Previous answer: ", "\n");
        if (!previous.empty()) {
          text = render_synthetic_answer(previous, request.output_mode);
          break;
        }
        [[fallthrough]];
      }
      case Purpose::task: {
        const auto& profile = profile_for();
        const auto d = draw_answer(landscape, profile, system_text(request), seed, fnv1a64(request.sample_id), i,
                                   kGoldStream);
        text = d.malformed ? malformed_text(profile) : render_synthetic_answer(d.answer, request.output_mode);
        break;
      }
      case Purpose::repair: {
        const auto& profile = profile_for();
        const auto d = draw_answer(landscape, profile, system_text(request), seed, fnv1a64(request.sample_id), i,
                                   kRepairStream);
        const bool truthful = draw(seed, digest_key, static_cast<std::uint64_t>(i), kJudgeStream) <
                              landscape.judge_accuracy;
        const bool claims_ok = d.gold == truthful;
        text = d.malformed ? malformed_text(profile) : d.answer;
        text += std::string("\nSELF-CHECK: ") + (claims_ok ? "1/1" : "0/1") + " constraints satisfied";
        break;
      }
      case Purpose::judge: {
        const auto& profile = profile_for();
        const auto candidate = between(request.messages.back().content, "<response>\n", "\n</response>");
        const bool truthful = draw(seed, digest_key, static_cast<std::uint64_t>(i), kJudgeStream) <
                              landscape.judge_accuracy;
        const bool ok = judge_correct(profile, candidate) == truthful;
        text = ok ? "All constraints satisfied." : "0/1 constraints satisfied";
        break;
      }
      case Purpose::diagnosis:
        text = "The reply did not follow the expected reasoning.";
        break;
      case Purpose::reflection: {
        if (landscape.directive_vocabulary.empty()) {
          text = "{}";
          break;
        }
        const auto u = draw(seed, digest_key, static_cast<std::uint64_t>(i), kProposalStream);
        const auto& vocab = landscape.directive_vocabulary;
        const auto& pick = vocab[std::min(vocab.size() - 1, static_cast<std::size_t>(u * static_cast<double>(vocab.size())))];
        nlohmann::ordered_json j;
        j["add_requirements"] = {pick};
        text = j.dump();
        break;
      }
      case Purpose::crossover:
        text = "{}";
        break;
      case Purpose::propose_edit: {
        if (landscape.proposer.empty()) {
          text = "no edit";
          break;
        }
        double total = 0.0;
        for (const auto& e : landscape.proposer) total += e.weight;
        double u = draw(seed, digest_key, static_cast<std::uint64_t>(i), kProposalStream) * total;
        text = landscape.proposer.back().reply;
        for (const auto& e : landscape.proposer) {
          if (u < e.weight) {
            text = e.reply;
            break;
          }
          u -= e.weight;
        }
        break;
      }
    }
    response.candidates.push_back(std::move(text));
  }
  response.input_units = cost.input_units(request);
  response.output_units = cost.output_units(response.candidates);
  return response;
}

}  // namespace pace
