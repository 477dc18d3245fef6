#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "cppl/checker.hpp"
#include "cppl/compiler.hpp"
#include "cppl/diagnostic.hpp"
#include "cppl/ir.hpp"
#include "cppl/ir_json.hpp"

// Bounded compile-diagnose-regenerate loop around a pluggable body
// generator.
namespace cppl {

struct GenerationRequest {
  ModuleDef skeleton;  // ports plus pre-inserted instance items
  std::string intent;
  std::vector<std::vector<Diagnostic>> history;  // one list per failed attempt
  std::size_t attempt = 0;
};

struct RefineConfig {
  std::size_t n_max = 3;
  std::optional<std::string> command;
};

// Thrown by a generator that could not produce a response at all.
class GeneratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Produces the text of a JSON array of body items (or an object with a
// "body" array). The text is parsed by the loop, so malformed output is
// reported back to the generator like any other diagnostic.
class BodyGenerator {
 public:
  virtual ~BodyGenerator() = default;
  virtual std::string generate(const GenerationRequest& req) = 0;
};

class FunctionGenerator : public BodyGenerator {
 public:
  explicit FunctionGenerator(std::function<std::string(const GenerationRequest&)> f) : f_(std::move(f)) {}
  std::string generate(const GenerationRequest& req) override { return f_(req); }

 private:
  std::function<std::string(const GenerationRequest&)> f_;
};

// Replays canned responses in order; the last one repeats.
class ScriptedGenerator : public BodyGenerator {
 public:
  explicit ScriptedGenerator(std::vector<std::string> responses) : responses_(std::move(responses)) {
    if (responses_.empty()) throw std::invalid_argument("ScriptedGenerator needs at least one response");
  }

  std::string generate(const GenerationRequest& req) override {
    requests_.push_back(req);
    return responses_[std::min(calls_++, responses_.size() - 1)];
  }

  std::size_t calls() const { return calls_; }
  const std::vector<GenerationRequest>& requests() const { return requests_; }

 private:
  std::vector<std::string> responses_;
  std::vector<GenerationRequest> requests_;
  std::size_t calls_ = 0;
};

inline std::string render_feedback(std::vector<Diagnostic> diags) {
  std::sort(diags.begin(), diags.end(), diagnostic_less);
  std::ostringstream os;
  for (const auto& d : diags) {
    os << (d.is_error() ? "error: " : "warning: ") << to_string(d.code);
    if (d.module) os << " in " << *d.module;
    if (d.item_index) os << " at item " << *d.item_index;
    if (!d.related_ids.empty()) {
      os << " [";
      for (std::size_t i = 0; i < d.related_ids.size(); ++i) os << (i ? ", " : "") << d.related_ids[i];
      os << "]";
    }
    os << ": " << d.message << "\n";
  }
  return os.str();
}

inline nlohmann::ordered_json request_to_json(const GenerationRequest& req) {
  nlohmann::ordered_json j;
  j["module"] = to_ordered_json(req.skeleton);
  j["intent"] = req.intent;
  j["attempt"] = req.attempt;
  j["history"] = nlohmann::ordered_json::array();
  for (const auto& attempt : req.history) j["history"].push_back(to_json(attempt));
  j["feedback"] = req.history.empty() ? std::string() : render_feedback(req.history.back());
  return j;
}

// Runs a shell command with the request JSON on stdin and reads the
// response from stdout.
class CommandGenerator : public BodyGenerator {
 public:
  explicit CommandGenerator(std::string command) : command_(std::move(command)) {}

  std::string generate(const GenerationRequest& req) override {
    std::string path = (std::filesystem::temp_directory_path() / "cppl-request-XXXXXX").string();
    const int fd = mkstemp(path.data());
    if (fd < 0) throw GeneratorError("cannot create request file");
    const std::string payload = request_to_json(req).dump();
    const bool written = ::write(fd, payload.data(), payload.size()) == static_cast<ssize_t>(payload.size());
    ::close(fd);
    if (!written) {
      std::filesystem::remove(path);
      throw GeneratorError("cannot write request file");
    }

    const std::string cmd = "(" + command_ + ") < '" + path + "'";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) {
      std::filesystem::remove(path);
      throw GeneratorError("cannot start generator: " + command_);
    }
    std::string out;
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, n);
    const int status = ::pclose(pipe);
    std::filesystem::remove(path);
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0)
      throw GeneratorError("generator exited with status " + std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : status));
    return out;
  }

 private:
  std::string command_;
};

enum class RefineStatus { success, exhausted, generator_failure, skeleton_tampered };

inline std::string_view to_string(RefineStatus s) {
  switch (s) {
    case RefineStatus::success: return "SUCCESS";
    case RefineStatus::exhausted: return "REFINEMENT_EXHAUSTED";
    case RefineStatus::generator_failure: return "GENERATOR_FAILURE";
    case RefineStatus::skeleton_tampered: return "SKELETON_TAMPERED";
  }
  return "?";
}

struct RefineResult {
  RefineStatus status = RefineStatus::exhausted;
  std::optional<ModuleDef> module;
  std::size_t attempts = 0;
  std::vector<std::vector<Diagnostic>> history;
  std::string message;

  bool ok() const { return status == RefineStatus::success; }
};

// The pre-inserted part of a module: its instance items.
inline ModuleDef skeleton_of(const ModuleDef& m) {
  ModuleDef s{m.name, m.ports, {}};
  for (const auto& item : m.body)
    if (std::holds_alternative<InstanceItem>(item)) s.body.push_back(item);
  return s;
}

// `name` plus every module it transitively instantiates, in design order.
inline Design callee_closure(const Design& d, const std::string& name) {
  std::set<std::string> keep;
  std::vector<std::string> todo{name};
  while (!todo.empty()) {
    const std::string cur = todo.back();
    todo.pop_back();
    if (!keep.insert(cur).second) continue;
    if (const ModuleDef* m = d.find(cur))
      for (const auto& item : m->body)
        if (const auto* inst = std::get_if<InstanceItem>(&item)) todo.push_back(inst->module);
  }
  Design out;
  for (const auto& m : d.modules)
    if (keep.count(m.name)) out.modules.push_back(m);
  return out;
}

namespace detail {

struct Candidate {
  std::optional<ModuleDef> module;
  std::vector<Diagnostic> diagnostics;
  bool tampered = false;
  std::string message;
};

// Parses a generator response and splices it after the skeleton's instance
// items. A response that starts by repeating those items verbatim is
// accepted with the repetition dropped.
inline Candidate splice(const ModuleDef& skeleton, const std::string& response) {
  Candidate c;
  nlohmann::ordered_json body;
  try {
    body = nlohmann::ordered_json::parse(response);
  } catch (const nlohmann::ordered_json::exception& e) {
    c.diagnostics.push_back(make_diag(Code::MALFORMED_JSON, skeleton.name, std::nullopt, {},
                                      std::string("generator response is not JSON: ") + e.what()));
    return c;
  }
  if (body.is_object() && body.contains("body")) body = body["body"];
  if (!body.is_array()) {
    c.diagnostics.push_back(make_diag(Code::SCHEMA_VIOLATION, skeleton.name, std::nullopt, {},
                                      "generator response must be an array of body items"));
    return c;
  }

  auto doc = nlohmann::ordered_json::array();
  auto jm = to_ordered_json(ModuleDef{skeleton.name, skeleton.ports, {}});
  jm["body"] = body;
  doc.push_back(jm);
  auto parsed = parse_design(doc.dump());
  if (!parsed) {
    c.diagnostics = parsed.diagnostics();
    for (auto& d : c.diagnostics)
      if (!d.module) d.module = skeleton.name;
    return c;
  }

  std::vector<BodyItem> generated = parsed->modules.front().body;
  const auto& pre = skeleton.body;
  if (generated.size() >= pre.size() && std::equal(pre.begin(), pre.end(), generated.begin()))
    generated.erase(generated.begin(), generated.begin() + static_cast<std::ptrdiff_t>(pre.size()));

  std::set<std::string> reserved;
  for (const auto& item : pre)
    for (const auto& id : defined_ids(item)) reserved.insert(id);
  for (const auto& item : generated) {
    const auto* inst = std::get_if<InstanceItem>(&item);
    if (!inst) continue;
    for (const auto& id : inst->ids) {
      if (reserved.count(id)) {
        c.tampered = true;
        c.message = "generated instance redefines pre-inserted instance result '" + id + "'";
        return c;
      }
    }
  }

  ModuleDef m{skeleton.name, skeleton.ports, pre};
  m.body.insert(m.body.end(), generated.begin(), generated.end());
  c.module = std::move(m);
  return c;
}

}  // namespace detail

// Asks `gen` for a body up to cfg.n_max times. Each attempt is checked in
// the context of the callees in `context`; failing diagnostics accumulate
// in the request history.
inline RefineResult refine_module(const Design& context, GenerationRequest req, const RefineConfig& cfg,
                                  BodyGenerator& gen) {
  if (cfg.n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  RefineResult result;
  req.history.clear();
  for (std::size_t attempt = 0; attempt < cfg.n_max; ++attempt) {
    req.attempt = attempt;
    result.attempts = attempt + 1;
    std::string response;
    try {
      response = gen.generate(req);
    } catch (const std::exception& e) {
      result.status = RefineStatus::generator_failure;
      result.message = e.what();
      result.history = req.history;
      return result;
    }

    auto cand = detail::splice(req.skeleton, response);
    if (cand.tampered) {
      result.status = RefineStatus::skeleton_tampered;
      result.message = cand.message;
      result.history = req.history;
      return result;
    }
    std::vector<Diagnostic> diags = std::move(cand.diagnostics);
    if (cand.module) {
      Design d = context;
      if (ModuleDef* slot = d.find(req.skeleton.name)) *slot = *cand.module;
      else d.modules.push_back(*cand.module);
      diags = check_design(callee_closure(d, req.skeleton.name)).diagnostics;
      if (!has_errors(diags)) {
        result.status = RefineStatus::success;
        result.module = std::move(cand.module);
        result.history = req.history;
        return result;
      }
    }
    req.history.push_back(std::move(diags));
  }
  result.status = RefineStatus::exhausted;
  result.history = req.history;
  result.message = "no valid body after " + std::to_string(cfg.n_max) + " attempts";
  return result;
}

}  // namespace cppl
