#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cppl/compiler.hpp"
#include "cppl/evalkit.hpp"
#include "cppl/ir_json.hpp"
#include "cppl/pipeline.hpp"
#include "cppl/refine.hpp"
#include "cppl/sim.hpp"

namespace {

enum Exit { kOk = 0, kFailed = 1, kUsage = 2, kExhausted = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw UsageError("cannot write '" + path + "'");
}

void print_json(const nlohmann::ordered_json& j) { std::cout << j.dump(2) << "\n"; }

void log_diagnostics(const std::vector<cppl::Diagnostic>& diags) {
  if (!diags.empty()) std::cerr << cppl::render_feedback(diags);
}

nlohmann::ordered_json encode(const cppl::Value& v) {
  if (v.fits_u64()) return v.to_u64();
  return v.to_hex();
}

// Module nobody instantiates; the last such one when there are several.
std::string default_top(const cppl::Design& d) {
  std::set<std::string> called;
  for (const auto& m : d.modules)
    for (const auto& item : m.body)
      if (const auto* inst = std::get_if<cppl::InstanceItem>(&item)) called.insert(inst->module);
  for (auto it = d.modules.rbegin(); it != d.modules.rend(); ++it)
    if (!called.count(it->name)) return it->name;
  return d.modules.empty() ? std::string() : d.modules.back().name;
}

std::optional<cppl::Design> load_design(const std::string& path) {
  auto parsed = cppl::parse_design(read_file(path));
  if (parsed) return std::move(parsed).value();
  print_json(cppl::to_json(parsed.diagnostics()));
  log_diagnostics(parsed.diagnostics());
  return std::nullopt;
}

int cmd_check(const std::string& input) {
  auto d = load_design(input);
  if (!d) return kFailed;
  const auto report = cppl::check_design(*d);
  print_json(cppl::to_json(report.diagnostics));
  log_diagnostics(report.diagnostics);
  return report.ok() ? kOk : kFailed;
}

int cmd_compile(const std::string& input, const std::string& output, bool no_opt, const std::string& circt) {
  auto d = load_design(input);
  if (!d) return kFailed;
  auto compiled = cppl::compile_design(*d, !no_opt);
  if (!compiled) {
    print_json(cppl::to_json(compiled.diagnostics()));
    log_diagnostics(compiled.diagnostics());
    return kFailed;
  }
  log_diagnostics(compiled->warnings);
  for (const auto& p : compiled->passes)
    if (p.changed())
      std::cerr << "opt: " << p.module << ": " << p.pass << " removed " << p.items_removed << ", rewrote "
                << p.items_rewritten << "\n";
  if (!circt.empty()) write_file(circt, compiled->circt);
  if (output.empty()) std::cout << compiled->verilog;
  else write_file(output, compiled->verilog);
  return kOk;
}

int cmd_sim(const std::string& input, const std::string& vectors_path, std::string top) {
  auto d = load_design(input);
  if (!d) return kFailed;
  nlohmann::json vectors;
  try {
    vectors = nlohmann::json::parse(read_file(vectors_path));
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("vectors file is not JSON: " + std::string(e.what()));
  }
  if (!vectors.is_object() || !vectors.contains("steps") || !vectors["steps"].is_array())
    throw UsageError("vectors file needs a \"steps\" array");
  if (top.empty() && vectors.contains("top") && vectors["top"].is_string()) top = vectors["top"].get<std::string>();
  if (top.empty()) top = default_top(*d);

  const auto report = cppl::check_design(*d);
  if (!report.ok()) {
    print_json(cppl::to_json(report.diagnostics));
    log_diagnostics(report.diagnostics);
    return kFailed;
  }
  if (!d->find(top)) {
    const std::vector<cppl::Diagnostic> diags{cppl::make_diag(cppl::Code::UNKNOWN_MODULE, std::nullopt, std::nullopt,
                                                              {top}, "no module named '" + top + "'")};
    print_json(cppl::to_json(diags));
    log_diagnostics(diags);
    return kFailed;
  }

  cppl::Simulator sim(*d);
  cppl::SimState state = sim.initial_state(top);
  auto results = nlohmann::ordered_json::array();
  try {
    for (const auto& s : vectors["steps"]) {
      cppl::PortValues in;
      const auto ports = sim.input_ports(top);
      if (s.contains("inputs") && s["inputs"].is_object()) {
        for (const auto& [name, v] : s["inputs"].items()) {
          auto port = std::find_if(ports.begin(), ports.end(), [&](const auto& p) { return p.first == name; });
          if (port == ports.end()) throw cppl::ContractViolation("'" + name + "' is not an input of '" + top + "'");
          std::optional<cppl::Value> value;
          if (v.is_number_unsigned()) {
            if (port->second < 64 && (v.get<std::uint64_t>() >> port->second) != 0)
              throw cppl::ContractViolation("value for '" + name + "' is wider than the port");
            value = cppl::Value(port->second, v.get<std::uint64_t>());
          } else if (v.is_string()) {
            value = cppl::Value::from_hex(v.get<std::string>(), port->second);
          }
          if (!value) throw cppl::ContractViolation("bad value for input '" + name + "'");
          in.emplace(name, *value);
        }
      }
      auto r = sim.step(top, in, state);
      state = std::move(r.state);
      nlohmann::ordered_json outs = nlohmann::ordered_json::object();
      for (const auto& [port, v] : r.outputs) outs[port] = encode(v);
      nlohmann::ordered_json entry;
      entry["outputs"] = std::move(outs);
      results.push_back(std::move(entry));
    }
  } catch (const cppl::ContractViolation& e) {
    std::cerr << "error: CONTRACT_VIOLATION: " << e.what() << "\n";
    return kFailed;
  }
  print_json(results);
  return kOk;
}

std::map<std::string, std::string> load_intents(const std::string& path, const cppl::Design& d) {
  std::map<std::string, std::string> out;
  if (path.empty()) return out;
  const std::string text = read_file(path);
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_object()) {
    for (const auto& [k, v] : j.items())
      if (v.is_string()) out[k] = v.get<std::string>();
  } else {
    for (const auto& m : d.modules) out[m.name] = text;
  }
  return out;
}

bool is_skeleton(const cppl::ModuleDef& m) {
  return std::none_of(m.body.begin(), m.body.end(),
                      [](const cppl::BodyItem& i) { return std::holds_alternative<cppl::OutputItem>(i); });
}

int cmd_refine(const std::string& input, const std::string& intent_path, std::size_t n_max, const std::string& top,
               const std::string& output, const std::string& emit_ir) {
  const char* cmd = std::getenv("CPPL_GENERATOR_CMD");
  if (!cmd || !*cmd) throw UsageError("no generator configured: set CPPL_GENERATOR_CMD");
  if (n_max < 1) throw UsageError("--n-max must be >= 1");
  auto d = load_design(input);
  if (!d) return kFailed;
  if (!top.empty() && !d->find(top)) throw UsageError("no module named '" + top + "'");
  const auto intents = load_intents(intent_path, *d);

  const auto graph = cppl::check_instance_graph(*d);
  if (cppl::has_errors(graph.diagnostics)) {
    print_json(cppl::to_json(graph.diagnostics));
    log_diagnostics(graph.diagnostics);
    return kFailed;
  }

  cppl::CommandGenerator gen(cmd);
  cppl::RefineConfig cfg{n_max, std::string(cmd)};
  for (const auto& name : graph.order) {
    cppl::ModuleDef& m = *d->find(name);
    if (!top.empty() && name != top) continue;
    if (!is_skeleton(m)) continue;
    cppl::GenerationRequest req{cppl::skeleton_of(m), intents.count(name) ? intents.at(name) : std::string(), {}, 0};
    auto r = cppl::refine_module(*d, req, cfg, gen);
    for (std::size_t i = 0; i < r.history.size(); ++i)
      std::cerr << "refine: " << name << " attempt " << i + 1 << "/" << n_max << " failed\n"
                << cppl::render_feedback(r.history[i]);
    if (!r.ok()) {
      std::cerr << "refine: " << name << ": " << cppl::to_string(r.status) << ": " << r.message << "\n";
      nlohmann::ordered_json j;
      j["status"] = std::string(cppl::to_string(r.status));
      j["module"] = name;
      j["attempts"] = r.attempts;
      j["message"] = r.message;
      j["history"] = nlohmann::ordered_json::array();
      for (const auto& h : r.history) j["history"].push_back(cppl::to_json(h));
      print_json(j);
      return r.status == cppl::RefineStatus::generator_failure ? kUsage : kExhausted;
    }
    std::cerr << "refine: " << name << " attempt " << r.attempts << "/" << n_max << " ok\n";
    m = *r.module;
  }

  if (!emit_ir.empty()) write_file(emit_ir, cppl::serialize_design(*d) + "\n");
  auto compiled = cppl::compile_design(*d, true);
  if (!compiled) {
    print_json(cppl::to_json(compiled.diagnostics()));
    log_diagnostics(compiled.diagnostics());
    return kFailed;
  }
  if (output.empty()) std::cout << compiled->verilog;
  else write_file(output, compiled->verilog);
  return kOk;
}

nlohmann::json load_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("'" + path + "' is not JSON: " + std::string(e.what()));
  }
}

int eval_error(const cppl::EvalError& e) {
  nlohmann::ordered_json j;
  j["error"] = e.code();
  j["message"] = e.what();
  print_json(j);
  std::cerr << "error: " << e.what() << "\n";
  return kFailed;
}

int cmd_passk(const std::string& input, const std::vector<std::uint64_t>& ks) {
  const auto j = load_json(input);
  try {
    const auto outcomes = cppl::outcomes_from_json(j);
    auto out = nlohmann::ordered_json::array();
    for (auto k : ks) {
      const auto r = cppl::pass_at_k(outcomes, k);
      nlohmann::ordered_json e;
      e["k"] = k;
      e["pass_at_k"] = cppl::to_double(r);
      e["exact"] = r.str();
      out.push_back(std::move(e));
    }
    print_json(out);
  } catch (const cppl::EvalError& e) {
    return eval_error(e);
  }
  return kOk;
}

int cmd_geomean(const std::string& input) {
  const auto j = load_json(input);
  try {
    const auto values = cppl::measurements_from_json(j);
    nlohmann::ordered_json out;
    out["count"] = values.size();
    out["geomean"] = cppl::geo_mean(values);
    print_json(out);
  } catch (const cppl::EvalError& e) {
    return eval_error(e);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CPPL IR compiler toolchain"};
  app.require_subcommand(1);

  std::string input, output, circt, vectors, top, intent, emit_ir;
  bool no_opt = false;
  std::size_t n_max = 3;
  std::vector<std::uint64_t> ks;

  auto* check = app.add_subcommand("check", "Parse, check and type a design; print diagnostics JSON");
  check->add_option("input", input, "Design JSON")->required();

  auto* compile = app.add_subcommand("compile", "Compile a design to Verilog");
  compile->add_option("input", input, "Design JSON")->required();
  compile->add_option("-o,--output", output, "Verilog output path (default stdout)");
  compile->add_flag("--no-opt", no_opt, "Skip the optimization pipeline");
  compile->add_option("--emit-circt", circt, "Also write the CIRCT-style dump here");

  auto* sim = app.add_subcommand("sim", "Simulate a design over input vectors");
  sim->add_option("input", input, "Design JSON")->required();
  sim->add_option("--vectors", vectors, "Vector file")->required();
  sim->add_option("--top", top, "Top module");

  auto* refine = app.add_subcommand("refine", "Complete skeleton modules with the generator in CPPL_GENERATOR_CMD");
  refine->add_option("input", input, "Skeleton design JSON")->required();
  refine->add_option("--intent", intent, "Intent text, or a JSON object of module -> intent");
  refine->add_option("--n-max", n_max, "Maximum generator attempts per module");
  refine->add_option("--top", top, "Only refine this module");
  refine->add_option("-o,--output", output, "Verilog output path (default stdout)");
  refine->add_option("--emit-ir", emit_ir, "Write the completed design JSON here");

  auto* passk = app.add_subcommand("passk", "pass@k over a JSON list of {id, n, c}");
  passk->add_option("input", input, "Outcomes JSON")->required();
  passk->add_option("--k", ks, "k (repeatable)")->required();

  auto* geomean = app.add_subcommand("geomean", "Geometric mean of measurement counts");
  geomean->add_option("input", input, "Counts JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*check) return cmd_check(input);
    if (*compile) return cmd_compile(input, output, no_opt, circt);
    if (*sim) return cmd_sim(input, vectors, top);
    if (*refine) return cmd_refine(input, intent, n_max, top, output, emit_ir);
    if (*passk) return cmd_passk(input, ks);
    if (*geomean) return cmd_geomean(input);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
