#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace pace {

// A verifiable instruction attached to a constrained-generation sample.
class ConstraintChecker {
 public:
  virtual ~ConstraintChecker() = default;

  virtual const std::string& id() const = 0;
  virtual bool check(std::string_view response) const = 0;
};

// Builds a checker from a spec object. Supported kinds:
//   {"kind": "word_count", "min"?: int, "max"?: int}
//   {"kind": "case", "mode": "upper" | "lower"}
//   {"kind": "keyword", "keyword": text, "present": bool (default true)}
//   {"kind": "forbidden_punctuation", "chars": text}
//   {"kind": "paragraph_count", "count": int}   paragraphs are separated by blank lines
// An optional "id" overrides the default "<kind>#<index>" identifier.
// Unknown kinds and malformed parameters throw ConfigError.
std::unique_ptr<ConstraintChecker> make_checker(const nlohmann::json& spec, std::size_t index);

std::vector<std::unique_ptr<ConstraintChecker>> make_checkers(const std::vector<nlohmann::json>& specs);

}  // namespace pace
