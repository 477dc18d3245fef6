#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

namespace cppl {

enum class Code {
  MALFORMED_JSON,
  SCHEMA_VIOLATION,
  DUPLICATE_ID,
  USE_BEFORE_DEF,
  UNKNOWN_ID,
  UNKNOWN_MODULE,
  UNKNOWN_PORT,
  MISSING_OUTPUT,
  MULTIPLE_OUTPUT,
  OUTPUT_NOT_LAST,
  UNBOUND_OUTPUT_PORT,
  RECURSIVE_INSTANTIATION,
  COMB_LOOP,
  WIDTH_MISMATCH,
  BAD_ATTR,
  DEAD_CODE,
};

enum class Severity { error, warning };

inline constexpr std::array<std::pair<Code, std::string_view>, 16> kCodeNames{{
    {Code::MALFORMED_JSON, "MALFORMED_JSON"},
    {Code::SCHEMA_VIOLATION, "SCHEMA_VIOLATION"},
    {Code::DUPLICATE_ID, "DUPLICATE_ID"},
    {Code::USE_BEFORE_DEF, "USE_BEFORE_DEF"},
    {Code::UNKNOWN_ID, "UNKNOWN_ID"},
    {Code::UNKNOWN_MODULE, "UNKNOWN_MODULE"},
    {Code::UNKNOWN_PORT, "UNKNOWN_PORT"},
    {Code::MISSING_OUTPUT, "MISSING_OUTPUT"},
    {Code::MULTIPLE_OUTPUT, "MULTIPLE_OUTPUT"},
    {Code::OUTPUT_NOT_LAST, "OUTPUT_NOT_LAST"},
    {Code::UNBOUND_OUTPUT_PORT, "UNBOUND_OUTPUT_PORT"},
    {Code::RECURSIVE_INSTANTIATION, "RECURSIVE_INSTANTIATION"},
    {Code::COMB_LOOP, "COMB_LOOP"},
    {Code::WIDTH_MISMATCH, "WIDTH_MISMATCH"},
    {Code::BAD_ATTR, "BAD_ATTR"},
    {Code::DEAD_CODE, "DEAD_CODE"},
}};

inline std::string_view to_string(Code code) {
  for (const auto& [c, name] : kCodeNames)
    if (c == code) return name;
  return "UNKNOWN";
}

inline std::optional<Code> parse_code(std::string_view name) {
  for (const auto& [c, n] : kCodeNames)
    if (n == name) return c;
  return std::nullopt;
}

// DEAD_CODE is the only warning.
inline Severity severity_of(Code code) {
  return code == Code::DEAD_CODE ? Severity::warning : Severity::error;
}

// A machine-readable compiler finding. Serialized diagnostics are the
// payload handed back to the body generator on each refinement attempt.
struct Diagnostic {
  Code code{};
  Severity severity = Severity::error;
  std::optional<std::string> module;
  std::optional<std::size_t> item_index;
  std::vector<std::string> related_ids;
  std::string message;
  // Location inside the source document (parse diagnostics only).
  std::string path;

  bool is_error() const { return severity == Severity::error; }

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

inline Diagnostic make_diag(Code code, std::optional<std::string> module,
                            std::optional<std::size_t> item, std::vector<std::string> ids,
                            std::string message) {
  return Diagnostic{code, severity_of(code), std::move(module), item, std::move(ids),
                    std::move(message), {}};
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return d.is_error(); });
}

inline void append(std::vector<Diagnostic>& into, std::vector<Diagnostic> more) {
  into.insert(into.end(), std::make_move_iterator(more.begin()),
              std::make_move_iterator(more.end()));
}

// Ordering used for rendering: module, then item index (none first), then code.
inline bool diagnostic_less(const Diagnostic& a, const Diagnostic& b) {
  auto key = [](const Diagnostic& d) {
    return std::tuple(d.module.value_or(""), d.module.has_value(),
                      d.item_index ? *d.item_index + 1 : std::size_t{0}, to_string(d.code),
                      d.related_ids, d.message);
  };
  return key(a) < key(b);
}

inline nlohmann::ordered_json to_json(const Diagnostic& d) {
  nlohmann::ordered_json j;
  j["code"] = std::string(to_string(d.code));
  j["severity"] = d.severity == Severity::error ? "error" : "warning";
  j["module"] = d.module ? nlohmann::ordered_json(*d.module) : nlohmann::ordered_json(nullptr);
  j["itemIndex"] =
      d.item_index ? nlohmann::ordered_json(*d.item_index) : nlohmann::ordered_json(nullptr);
  j["relatedIds"] = d.related_ids;
  j["message"] = d.message;
  if (!d.path.empty()) j["path"] = d.path;
  return j;
}

inline nlohmann::ordered_json to_json(const std::vector<Diagnostic>& diags) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& d : diags) arr.push_back(to_json(d));
  return arr;
}

inline std::optional<Diagnostic> diagnostic_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("code") || !j["code"].is_string()) return std::nullopt;
  auto code = parse_code(j["code"].get<std::string>());
  if (!code) return std::nullopt;
  Diagnostic d;
  d.code = *code;
  d.severity = j.value("severity", "error") == "warning" ? Severity::warning : Severity::error;
  if (j.contains("module") && j["module"].is_string()) d.module = j["module"].get<std::string>();
  if (j.contains("itemIndex") && j["itemIndex"].is_number_unsigned())
    d.item_index = j["itemIndex"].get<std::size_t>();
  if (j.contains("relatedIds") && j["relatedIds"].is_array())
    for (const auto& id : j["relatedIds"])
      if (id.is_string()) d.related_ids.push_back(id.get<std::string>());
  d.message = j.value("message", "");
  d.path = j.value("path", "");
  return d;
}

// Either a value or the diagnostics explaining why there is none.
template <class T>
class Result {
 public:
  Result(T value) : value_(std::move(value)) {}
  Result(std::vector<Diagnostic> diags) : diags_(std::move(diags)) {}

  bool ok() const { return value_.has_value(); }
  explicit operator bool() const { return ok(); }

  const T& value() const& { return *value_; }
  T& value() & { return *value_; }
  T&& value() && { return std::move(*value_); }
  const T& operator*() const { return *value_; }
  const T* operator->() const { return &*value_; }

  const std::vector<Diagnostic>& diagnostics() const { return diags_; }

 private:
  std::optional<T> value_;
  std::vector<Diagnostic> diags_;
};

}  // namespace cppl
