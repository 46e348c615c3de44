#include "pace/task.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "pace/constraints.hpp"
#include "pace/errors.hpp"

namespace pace {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::letter_choice: return "letter_choice";
    case TaskKind::numeric: return "numeric";
    case TaskKind::span: return "span";
    case TaskKind::constrained: return "constrained";
  }
  return "letter_choice";
}

TaskKind task_kind_from_string(std::string_view name) {
  if (name == "letter_choice" || name == "mmlu") return TaskKind::letter_choice;
  if (name == "numeric" || name == "mgsm") return TaskKind::numeric;
  if (name == "span" || name == "hotpotqa") return TaskKind::span;
  if (name == "constrained" || name == "ifeval") return TaskKind::constrained;
  throw ConfigError("unknown task kind '" + std::string(name) + "'");
}

std::string render_task(const TaskSample& sample) {
  if (sample.input_fields.size() == 1) return sample.input_fields.front().second;
  std::string out;
  for (const auto& [name, value] : sample.input_fields) {
    if (!out.empty()) out += "\n\n";
    std::string label = name;
    if (!label.empty()) label[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
    out += label + ":\n" + value;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Letter choice

std::optional<char> extract_choice_letter(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isalnum(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
    if (j - i == 1) {
      const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(text[i])));
      if (c >= 'A' && c <= 'D') return c;
    }
    i = j;
  }
  return std::nullopt;
}

ScoreResult score_letter_match(std::string_view prediction, char gold) {
  ScoreResult r;
  const auto letter = extract_choice_letter(prediction);
  if (!letter) {
    r.extraction_failed = true;
    return r;
  }
  r.utility = *letter == static_cast<char>(std::toupper(static_cast<unsigned char>(gold))) ? 1.0 : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Numeric

std::string normalize_numeric(std::string_view text) {
  static const std::regex kNumber(R"([-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, kNumber)) return {};

  std::string token;
  for (char c : m.str())
    if (c != ',') token.push_back(c);

  bool negative = false;
  if (token.front() == '+' || token.front() == '-') {
    negative = token.front() == '-';
    token.erase(0, 1);
  }
  auto dot = token.find('.');
  std::string int_part = token.substr(0, dot);
  std::string frac_part = dot == std::string::npos ? "" : token.substr(dot + 1);
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.pop_back();
  const auto first_nonzero = int_part.find_first_not_of('0');
  int_part = first_nonzero == std::string::npos ? "0" : int_part.substr(first_nonzero);

  std::string out = int_part;
  if (!frac_part.empty()) out += "." + frac_part;
  if (negative && out != "0") out.insert(out.begin(), '-');
  return out;
}

ScoreResult score_numeric_exact(std::string_view prediction, std::string_view gold) {
  ScoreResult r;
  const auto pred = normalize_numeric(prediction);
  if (pred.empty()) {
    r.extraction_failed = true;
    return r;
  }
  r.utility = pred == normalize_numeric(gold) ? 1.0 : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Span

std::string normalize_span(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char c : text) {
    if (std::ispunct(c)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(c)));
  }
  std::istringstream in(cleaned);
  std::string out;
  for (std::string word; in >> word;) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

SpanScore score_span_em_f1(std::string_view prediction, std::string_view gold) {
  const auto pred = normalize_span(prediction);
  const auto ref = normalize_span(gold);
  SpanScore s;
  s.em = pred == ref ? 1 : 0;

  auto tokens = [](const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string w; in >> w;) out.push_back(w);
    return out;
  };
  const auto p = tokens(pred);
  const auto g = tokens(ref);
  if (p.empty() || g.empty()) {
    s.f1 = p.empty() && g.empty() ? 1.0 : 0.0;
    return s;
  }
  std::unordered_map<std::string, int> counts;
  for (const auto& t : g) ++counts[t];
  int common = 0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return s;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  s.f1 = 2.0 * precision * recall / (precision + recall);
  return s;
}

// ---------------------------------------------------------------------------
// Constraints

ScoreResult score_strict_constraints(std::string_view response,
                                     std::span<const ConstraintChecker* const> checkers) {
  if (checkers.empty()) throw ContractViolation("score_strict_constraints requires at least one checker");
  ScoreResult r;
  std::size_t passed = 0;
  for (const auto* checker : checkers) {
    if (checker->check(response))
      ++passed;
    else
      r.violated_constraints.push_back(checker->id());
  }
  r.loose = static_cast<double>(passed) / static_cast<double>(checkers.size());
  r.utility = passed == checkers.size() ? 1.0 : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// pass^k

namespace {

// Exact C(n, k) while it fits in 64 bits; nullopt on overflow.
std::optional<std::uint64_t> binomial_exact(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 acc = 1;
  for (int i = 1; i <= k; ++i) {
    acc = acc * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    if (acc > std::numeric_limits<std::uint64_t>::max()) return std::nullopt;
  }
  return static_cast<std::uint64_t>(acc);
}

}  // namespace

double pass_k(int successes, int trials, int k) {
  if (trials < 1 || k < 1 || k > trials || successes < 0 || successes > trials)
    throw std::invalid_argument("pass_k requires 0 <= c <= n and 1 <= k <= n (got c=" +
                                std::to_string(successes) + ", n=" + std::to_string(trials) +
                                ", k=" + std::to_string(k) + ")");
  if (successes < k) return 0.0;
  const auto num = binomial_exact(successes, k);
  const auto den = binomial_exact(trials, k);
  if (num && den) return static_cast<double>(*num) / static_cast<double>(*den);
  long double ratio = 1.0L;
  for (int i = 0; i < k; ++i)
    ratio *= static_cast<long double>(successes - i) / static_cast<long double>(trials - i);
  return static_cast<double>(ratio);
}

// ---------------------------------------------------------------------------

ScoreResult score_answer(const TaskSample& sample, std::string_view answer) {
  switch (sample.kind) {
    case TaskKind::letter_choice:
      return score_letter_match(answer, sample.gold.empty() ? '?' : sample.gold.front());
    case TaskKind::numeric:
      return score_numeric_exact(answer, sample.gold);
    case TaskKind::span: {
      ScoreResult r;
      if (normalize_span(answer).empty()) {
        r.extraction_failed = true;
        return r;
      }
      const auto s = score_span_em_f1(answer, sample.gold);
      r.utility = s.em;
      r.f1 = s.f1;
      return r;
    }
    case TaskKind::constrained: {
      const auto checkers = make_checkers(sample.constraints);
      if (answer.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        ScoreResult r;
        r.extraction_failed = true;
        r.loose = 0.0;
        for (const auto& c : checkers) r.violated_constraints.push_back(c->id());
        return r;
      }
      std::vector<const ConstraintChecker*> raw;
      raw.reserve(checkers.size());
      for (const auto& c : checkers) raw.push_back(c.get());
      return score_strict_constraints(answer, raw);
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Dataset IO

TaskSample sample_from_json(const nlohmann::ordered_json& record, TaskKind default_kind) {
  TaskSample s;
  if (!record.is_object()) throw ConfigError("dataset record is not an object");
  if (!record.contains("id")) throw ConfigError("dataset record missing 'id'");
  const auto& id = record.at("id");
  s.id = id.is_string() ? id.get<std::string>() : id.dump();
  s.kind = record.contains("task") ? task_kind_from_string(record.at("task").get<std::string>()) : default_kind;

  if (!record.contains("input_fields") || !record.at("input_fields").is_object())
    throw ConfigError("record " + s.id + ": 'input_fields' must be an object");
  for (const auto& [name, value] : record.at("input_fields").items())
    s.input_fields.emplace_back(name, value.is_string() ? value.get<std::string>() : value.dump());

  if (record.contains("gold")) {
    const auto& gold = record.at("gold");
    if (gold.is_array()) {
      for (const auto& c : gold) s.constraints.push_back(nlohmann::json::parse(c.dump()));
      s.kind = TaskKind::constrained;
    } else {
      s.gold = gold.is_string() ? gold.get<std::string>() : gold.dump();
    }
  }
  if (record.contains("metadata")) {
    for (const auto& [key, value] : record.at("metadata").items())
      s.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
  }
  if (s.kind == TaskKind::constrained) {
    if (s.constraints.empty()) throw ConfigError("record " + s.id + ": constrained sample without constraints");
    make_checkers(s.constraints);  // validates kinds eagerly
  } else if (s.gold.empty()) {
    throw ConfigError("record " + s.id + ": empty gold answer");
  }
  return s;
}

nlohmann::ordered_json sample_to_json(const TaskSample& sample) {
  nlohmann::ordered_json j;
  j["id"] = sample.id;
  j["task"] = std::string(to_string(sample.kind));
  j["input_fields"] = nlohmann::ordered_json::object();
  for (const auto& [name, value] : sample.input_fields) j["input_fields"][name] = value;
  if (sample.kind == TaskKind::constrained) {
    j["gold"] = nlohmann::ordered_json::array();
    for (const auto& c : sample.constraints) j["gold"].push_back(nlohmann::ordered_json::parse(c.dump()));
  } else {
    j["gold"] = sample.gold;
  }
  j["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : sample.metadata) j["metadata"][k] = v;
  return j;
}

std::vector<TaskSample> load_dataset(const std::string& path, TaskKind default_kind) {
  std::ifstream in(path);
  if (!in) throw ConfigError("dataset file not found: " + path);
  std::vector<TaskSample> out;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::ordered_json record;
    try {
      record = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    auto sample = sample_from_json(record, default_kind);
    if (!seen.insert(sample.id).second)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": duplicate id " + sample.id);
    out.push_back(std::move(sample));
  }
  return out;
}

DatasetSplits make_splits(std::vector<TaskSample> samples, std::size_t train_size, std::size_t test_size,
                          std::uint64_t seed) {
  std::unordered_set<std::string> ids;
  for (const auto& s : samples)
    if (!ids.insert(s.id).second) throw ConfigError("duplicate sample id " + s.id);
  if (train_size + test_size > samples.size())
    throw ConfigError("dataset has " + std::to_string(samples.size()) + " samples; split needs " +
                      std::to_string(train_size + test_size));
  // Canonical order first so the split depends only on the sample set and the seed.
  std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::mt19937_64 rng(seed);
  std::shuffle(samples.begin(), samples.end(), rng);

  DatasetSplits splits;
  splits.seed = seed;
  splits.train_pool.assign(std::make_move_iterator(samples.begin()),
                           std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(train_size)));
  splits.test_set.assign(
      std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(train_size)),
      std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(train_size + test_size)));
  return splits;
}

}  // namespace pace
