#include "pace/constraints.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <sstream>

#include "pace/errors.hpp"

namespace pace {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::size_t count_words(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

class WordCountChecker final : public ConstraintChecker {
 public:
  WordCountChecker(std::string id, long min, long max) : id_(std::move(id)), min_(min), max_(max) {}
  const std::string& id() const override { return id_; }
  bool check(std::string_view response) const override {
    const auto n = static_cast<long>(count_words(response));
    return n >= min_ && n <= max_;
  }

 private:
  std::string id_;
  long min_;
  long max_;
};

class CaseChecker final : public ConstraintChecker {
 public:
  CaseChecker(std::string id, bool upper) : id_(std::move(id)), upper_(upper) {}
  const std::string& id() const override { return id_; }
  bool check(std::string_view response) const override {
    bool any_alpha = false;
    for (unsigned char c : response) {
      if (!std::isalpha(c)) continue;
      any_alpha = true;
      if (upper_ ? std::islower(c) : std::isupper(c)) return false;
    }
    return any_alpha;
  }

 private:
  std::string id_;
  bool upper_;
};

class KeywordChecker final : public ConstraintChecker {
 public:
  KeywordChecker(std::string id, std::string keyword, bool present)
      : id_(std::move(id)), keyword_(lower(keyword)), present_(present) {}
  const std::string& id() const override { return id_; }
  bool check(std::string_view response) const override {
    const bool found = lower(response).find(keyword_) != std::string::npos;
    return found == present_;
  }

 private:
  std::string id_;
  std::string keyword_;
  bool present_;
};

class ForbiddenPunctuationChecker final : public ConstraintChecker {
 public:
  ForbiddenPunctuationChecker(std::string id, std::string chars)
      : id_(std::move(id)), chars_(std::move(chars)) {}
  const std::string& id() const override { return id_; }
  bool check(std::string_view response) const override {
    return response.find_first_of(chars_) == std::string_view::npos;
  }

 private:
  std::string id_;
  std::string chars_;
};

class ParagraphCountChecker final : public ConstraintChecker {
 public:
  ParagraphCountChecker(std::string id, long count) : id_(std::move(id)), count_(count) {}
  const std::string& id() const override { return id_; }
  bool check(std::string_view response) const override {
    long paragraphs = 0;
    bool in_paragraph = false;
    std::istringstream in{std::string(response)};
    for (std::string line; std::getline(in, line);) {
      const bool blank = std::all_of(line.begin(), line.end(),
                                     [](unsigned char c) { return std::isspace(c); });
      if (!blank && !in_paragraph) ++paragraphs;
      in_paragraph = !blank;
    }
    return paragraphs == count_;
  }

 private:
  std::string id_;
  long count_;
};

long required_int(const nlohmann::json& spec, const char* key, const std::string& id) {
  if (!spec.contains(key) || !spec.at(key).is_number_integer())
    throw ConfigError("constraint " + id + ": field '" + key + "' must be an integer");
  return spec.at(key).get<long>();
}

}  // namespace

std::unique_ptr<ConstraintChecker> make_checker(const nlohmann::json& spec, std::size_t index) {
  if (!spec.is_object() || !spec.contains("kind") || !spec.at("kind").is_string())
    throw ConfigError("constraint spec #" + std::to_string(index) + " has no string 'kind'");
  const auto kind = spec.at("kind").get<std::string>();
  std::string id = spec.value("id", kind + "#" + std::to_string(index));

  if (kind == "word_count") {
    const long min = spec.contains("min") ? required_int(spec, "min", id) : 0;
    const long max = spec.contains("max") ? required_int(spec, "max", id) : std::numeric_limits<long>::max();
    if (min > max) throw ConfigError("constraint " + id + ": min exceeds max");
    return std::make_unique<WordCountChecker>(std::move(id), min, max);
  }
  if (kind == "case") {
    const auto mode = spec.value("mode", std::string{});
    if (mode != "upper" && mode != "lower")
      throw ConfigError("constraint " + id + ": mode must be 'upper' or 'lower'");
    return std::make_unique<CaseChecker>(std::move(id), mode == "upper");
  }
  if (kind == "keyword") {
    const auto keyword = spec.value("keyword", std::string{});
    if (keyword.empty()) throw ConfigError("constraint " + id + ": empty keyword");
    return std::make_unique<KeywordChecker>(std::move(id), keyword, spec.value("present", true));
  }
  if (kind == "forbidden_punctuation") {
    const auto chars = spec.value("chars", std::string{});
    if (chars.empty()) throw ConfigError("constraint " + id + ": empty chars");
    return std::make_unique<ForbiddenPunctuationChecker>(std::move(id), chars);
  }
  if (kind == "paragraph_count") {
    const long count = required_int(spec, "count", id);
    if (count < 1) throw ConfigError("constraint " + id + ": count must be >= 1");
    return std::make_unique<ParagraphCountChecker>(std::move(id), count);
  }
  throw ConfigError("unknown constraint checker kind '" + kind + "'");
}

std::vector<std::unique_ptr<ConstraintChecker>> make_checkers(const std::vector<nlohmann::json>& specs) {
  std::vector<std::unique_ptr<ConstraintChecker>> out;
  out.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) out.push_back(make_checker(specs[i], i));
  return out;
}

}  // namespace pace
