#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "json.hpp"

// Evaluation metrics: the unbiased pass@k estimator and geometric means.
namespace cppl {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

class EvalError : public std::invalid_argument {
 public:
  EvalError(std::string code, const std::string& what) : std::invalid_argument(code + ": " + what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

struct ProblemOutcomes {
  std::string id;
  std::uint64_t n = 0;
  std::uint64_t c = 0;
};

inline BigInt binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  BigInt r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Mean over problems of 1 - C(n-c, k) / C(n, k), exact.
inline Rational pass_at_k(const std::vector<ProblemOutcomes>& outcomes, std::uint64_t k) {
  if (k == 0) throw EvalError("INVALID_K", "k must be >= 1");
  if (outcomes.empty()) throw EvalError("EMPTY_LIST", "no problems");
  Rational sum = 0;
  for (const auto& p : outcomes) {
    if (p.n == 0 || p.c > p.n)
      throw EvalError("INVALID_OUTCOME", "problem '" + p.id + "' needs 0 <= c <= n and n >= 1");
    if (k > p.n)
      throw EvalError("K_EXCEEDS_N", "k=" + std::to_string(k) + " exceeds n=" + std::to_string(p.n) + " for '" + p.id + "'");
    sum += 1 - Rational(binomial(p.n - p.c, k), binomial(p.n, k));
  }
  return sum / outcomes.size();
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline double geo_mean(const std::vector<double>& values) {
  if (values.empty()) throw EvalError("EMPTY_LIST", "no values");
  long double log_sum = 0;
  for (double v : values) {
    if (!(v > 0)) throw EvalError("NONPOSITIVE_VALUE", "value " + std::to_string(v) + " is not positive");
    log_sum += std::log(static_cast<long double>(v));
  }
  return static_cast<double>(std::exp(log_sum / static_cast<long double>(values.size())));
}

// [{"id": ..., "n": ..., "c": ...}, ...]
inline std::vector<ProblemOutcomes> outcomes_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw EvalError("SCHEMA_VIOLATION", "outcomes must be a JSON array");
  std::vector<ProblemOutcomes> out;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("n") || !e.contains("c") || !e["n"].is_number_unsigned() ||
        !e["c"].is_number_unsigned())
      throw EvalError("SCHEMA_VIOLATION", "each outcome needs unsigned integers n and c");
    ProblemOutcomes p;
    p.id = e.contains("id") ? (e["id"].is_string() ? e["id"].get<std::string>() : e["id"].dump()) : std::to_string(out.size());
    p.n = e["n"].get<std::uint64_t>();
    p.c = e["c"].get<std::uint64_t>();
    out.push_back(std::move(p));
  }
  return out;
}

// {"design": count, ...} or a plain array of numbers.
inline std::vector<double> measurements_from_json(const nlohmann::json& j) {
  std::vector<double> out;
  auto take = [&](const nlohmann::json& v) {
    if (!v.is_number()) throw EvalError("SCHEMA_VIOLATION", "measurements must be numbers");
    out.push_back(v.get<double>());
  };
  if (j.is_object())
    for (const auto& [_, v] : j.items()) take(v);
  else if (j.is_array())
    for (const auto& v : j) take(v);
  else
    throw EvalError("SCHEMA_VIOLATION", "measurements must be an object or an array");
  return out;
}

}  // namespace cppl
