#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cppl/checker.hpp"
#include "cppl/diagnostic.hpp"
#include "cppl/ir.hpp"

// Width inference. Widths are the only type; every value is an unsigned
// integer i^w with w >= 1.
namespace cppl {

struct ModuleSignature {
  std::vector<std::pair<std::string, Width>> inputs;
  std::vector<std::pair<std::string, Width>> outputs;

  std::optional<Width> input(std::string_view name) const {
    for (const auto& [n, w] : inputs)
      if (n == name) return w;
    return std::nullopt;
  }

  friend bool operator==(const ModuleSignature&, const ModuleSignature&) = default;
};

using SignatureEnv = std::map<std::string, ModuleSignature>;

// Identifier -> width. Bindings are write-once.
class WidthEnv {
 public:
  WidthEnv() = default;
  WidthEnv(std::initializer_list<std::pair<const std::string, Width>> init) : widths_(init) {}

  // False if `id` is already bound to a different width.
  bool bind(const std::string& id, Width w) {
    auto [it, inserted] = widths_.emplace(id, w);
    return inserted || it->second == w;
  }

  std::optional<Width> get(const std::string& id) const {
    auto it = widths_.find(id);
    if (it == widths_.end()) return std::nullopt;
    return it->second;
  }

  Width at(const std::string& id) const { return widths_.at(id); }
  bool contains(const std::string& id) const { return widths_.count(id) != 0; }
  std::size_t size() const { return widths_.size(); }
  const std::map<std::string, Width>& entries() const { return widths_; }

  friend bool operator==(const WidthEnv&, const WidthEnv&) = default;

 private:
  std::map<std::string, Width> widths_;
};

inline SignatureEnv build_signature_env(const Design& d) {
  SignatureEnv sigma;
  for (const auto& m : d.modules) {
    ModuleSignature sig;
    for (const auto& p : m.ports)
      (p.decl.dir == Direction::input ? sig.inputs : sig.outputs).emplace_back(p.name, p.decl.width);
    sigma.emplace(m.name, std::move(sig));
  }
  return sigma;
}

inline std::string_view typing_rule(Opcode op) {
  switch (op_class(op)) {
    case OpClass::constant: return "T-Const";
    case OpClass::unary: return "T-Unary";
    case OpClass::reduce: return "T-Reduce";
    case OpClass::binary: return "T-Bin";
    case OpClass::compare: return "T-Cmp";
    case OpClass::mux: return "T-Mux";
    case OpClass::cast: return "T-Cast";
    case OpClass::concat: return "T-Concat";
    case OpClass::extract: return "T-Extract";
    case OpClass::reg: return "T-Reg";
    case OpClass::instance: return "T-Inst";
    case OpClass::output: return "T-Out";
  }
  return "?";
}

// Reset value of a reg with a reset arg; absent resetValue means zero.
inline std::optional<Value> reset_value(const OperationItem& reg, Width w) {
  if (!reg.attrs.contains("resetValue")) return Value::zero(w);
  return attr_value(reg.attrs, "resetValue", w);
}

namespace detail {

inline std::optional<Width> positive_attr(const Attrs& attrs, const char* key) {
  auto v = attr_int(attrs, key);
  if (!v || *v < 1 || *v > UINT32_MAX) return std::nullopt;
  return static_cast<Width>(*v);
}

class ModuleTyper {
 public:
  ModuleTyper(const SignatureEnv& sigma, const ModuleDef& m) : sigma_(sigma), m_(m) {}

  Result<WidthEnv> run(std::size_t* passes_out) {
    for (const auto& p : m_.inputs()) env_.bind(p.name, p.decl.width);
    std::vector<bool> done(m_.body.size(), false);
    std::size_t passes = 0;
    bool progress = true;
    while (progress) {
      progress = false;
      ++passes;
      for (std::size_t i = 0; i < m_.body.size(); ++i) {
        if (done[i] || std::holds_alternative<OutputItem>(m_.body[i])) continue;
        if (step(i)) {
          done[i] = true;
          progress = true;
        }
      }
    }
    if (passes_out) *passes_out = passes;

    report_unresolved(done);
    check_outputs();
    if (!diags_.empty()) return diags_;
    return env_;
  }

 private:
  void fail(std::size_t i, Code code, std::string_view rule, std::vector<std::string> ids, const std::string& msg) {
    for (const auto& id : defined_ids(m_.body[i])) failed_.insert(id);
    diags_.push_back(make_diag(code, m_.name, i, std::move(ids),
                               rule.empty() ? msg : std::string(rule) + ": " + msg));
  }

  std::string w(const std::string& id) const { return std::to_string(env_.at(id)); }

  bool known(const std::vector<std::string>& ids) const {
    return std::all_of(ids.begin(), ids.end(), [&](const std::string& id) { return env_.contains(id); });
  }

  void define(std::size_t i, const std::string& id, Width width) {
    if (!env_.bind(id, width))
      fail(i, Code::WIDTH_MISMATCH, "", {id}, "'" + id + "' rebound to a different width");
  }

  // Returns true once item i is finished (typed or failed).
  bool step(std::size_t i) {
    const auto& item = m_.body[i];
    if (const auto* inst = std::get_if<InstanceItem>(&item)) return step_instance(i, *inst);
    const auto& op = std::get<OperationItem>(item);
    const auto rule = typing_rule(op.op);
    const auto& a = op.args;

    if (op.op == Opcode::reg) return step_reg(i, op);
    if (!known(a)) return false;

    switch (op_class(op.op)) {
      case OpClass::constant: {
        auto width = positive_attr(op.attrs, "width");
        if (!width) {
          fail(i, Code::BAD_ATTR, rule, {op.id}, "const '" + op.id + "' needs an integer width >= 1");
        } else if (!attr_value(op.attrs, "value", *width)) {
          fail(i, Code::BAD_ATTR, rule, {op.id},
               "const '" + op.id + "' value is missing, malformed, or does not fit in " +
                   std::to_string(*width) + " bits");
        } else {
          define(i, op.id, *width);
        }
        return true;
      }
      case OpClass::unary: define(i, op.id, env_.at(a[0])); return true;
      case OpClass::reduce: define(i, op.id, 1); return true;
      case OpClass::binary:
      case OpClass::compare:
        if (env_.at(a[0]) != env_.at(a[1])) {
          fail(i, Code::WIDTH_MISMATCH, rule, {op.id, a[0], a[1]},
               "operands of '" + op.id + "' differ in width ('" + a[0] + "' is " + w(a[0]) + ", '" + a[1] +
                   "' is " + w(a[1]) + ")");
        } else {
          define(i, op.id, op_class(op.op) == OpClass::binary ? env_.at(a[0]) : 1);
        }
        return true;
      case OpClass::mux:
        if (env_.at(a[0]) != 1) {
          fail(i, Code::WIDTH_MISMATCH, rule, {op.id, a[0]},
               "select '" + a[0] + "' of '" + op.id + "' has width " + w(a[0]) + ", expected 1");
        } else if (env_.at(a[1]) != env_.at(a[2])) {
          fail(i, Code::WIDTH_MISMATCH, rule, {op.id, a[1], a[2]},
               "branches of '" + op.id + "' differ in width ('" + a[1] + "' is " + w(a[1]) + ", '" + a[2] +
                   "' is " + w(a[2]) + ")");
        } else {
          define(i, op.id, env_.at(a[1]));
        }
        return true;
      case OpClass::cast: {
        auto width = positive_attr(op.attrs, "width");
        if (!width) {
          fail(i, Code::BAD_ATTR, rule, {op.id}, "cast '" + op.id + "' needs an integer width >= 1");
        } else if (env_.at(a[0]) > *width) {
          fail(i, Code::WIDTH_MISMATCH, rule, {op.id, a[0]},
               "cast '" + op.id + "' narrows '" + a[0] + "' from " + w(a[0]) + " to " + std::to_string(*width) +
                   " bits (use extract to truncate)");
        } else {
          define(i, op.id, *width);
        }
        return true;
      }
      case OpClass::concat: {
        std::uint64_t total = 0;
        for (const auto& arg : a) total += env_.at(arg);
        if (total > UINT32_MAX) {
          fail(i, Code::WIDTH_MISMATCH, rule, {op.id}, "concat '" + op.id + "' is too wide");
        } else {
          define(i, op.id, static_cast<Width>(total));
        }
        return true;
      }
      case OpClass::extract: {
        auto low = attr_int(op.attrs, "lowBit");
        auto width = positive_attr(op.attrs, "width");
        if (!low || *low < 0) {
          fail(i, Code::BAD_ATTR, rule, {op.id}, "extract '" + op.id + "' needs a non-negative integer lowBit");
        } else if (!width) {
          fail(i, Code::BAD_ATTR, rule, {op.id}, "extract '" + op.id + "' needs an integer width >= 1");
        } else if (static_cast<std::uint64_t>(*low) + *width > env_.at(a[0])) {
          fail(i, Code::WIDTH_MISMATCH, rule, {op.id, a[0]},
               "extract '" + op.id + "' reads bits [" + std::to_string(*low) + ", " +
                   std::to_string(*low + *width) + ") of '" + a[0] + "', which has width " + w(a[0]));
        } else {
          define(i, op.id, *width);
        }
        return true;
      }
      default: return true;
    }
  }

  // A reg with a width attr is bound immediately, which lets feedback through
  // the register resolve; otherwise its width comes from d.
  bool step_reg(std::size_t i, const OperationItem& op) {
    const auto& a = op.args;
    const auto declared = positive_attr(op.attrs, "width");
    if (op.attrs.contains("width") && !declared) {
      fail(i, Code::BAD_ATTR, "T-Reg", {op.id}, "reg '" + op.id + "' width must be an integer >= 1");
      return true;
    }
    if (declared && !env_.contains(op.id)) define(i, op.id, *declared);
    if (!known(a)) return false;

    const Width wd = env_.at(a[0]);
    if (declared && *declared != wd) {
      fail(i, Code::WIDTH_MISMATCH, "T-Reg", {op.id, a[0]},
           "reg '" + op.id + "' declares width " + std::to_string(*declared) + " but d '" + a[0] + "' has width " +
               w(a[0]));
      return true;
    }
    const char* names[] = {"d", "clk", "en", "rst"};
    for (std::size_t k = 1; k < a.size(); ++k) {
      if (env_.at(a[k]) != 1) {
        fail(i, Code::WIDTH_MISMATCH, "T-Reg", {op.id, a[k]},
             std::string(names[k]) + " '" + a[k] + "' of reg '" + op.id + "' has width " + w(a[k]) +
                 ", expected 1");
        return true;
      }
    }
    if (a.size() == 4 && !reset_value(op, wd)) {
      fail(i, Code::BAD_ATTR, "T-Reg", {op.id},
           "resetValue of reg '" + op.id + "' is malformed or does not fit in " + std::to_string(wd) + " bits");
      return true;
    }
    if (!declared) define(i, op.id, wd);
    return true;
  }

  bool step_instance(std::size_t i, const InstanceItem& inst) {
    auto it = sigma_.find(inst.module);
    if (it == sigma_.end()) {
      fail(i, Code::UNKNOWN_MODULE, "", {inst.module}, "instance of undeclared module '" + inst.module + "'");
      return true;
    }
    const ModuleSignature& sig = it->second;
    for (const auto& b : inst.args) {
      if (!sig.input(b.port)) {
        fail(i, Code::UNKNOWN_PORT, "T-Inst", {b.port},
             "'" + b.port + "' is not an input port of '" + inst.module + "'");
        return true;
      }
    }
    for (const auto& [port, width] : sig.inputs) {
      auto b = std::find_if(inst.args.begin(), inst.args.end(), [&](const Binding& x) { return x.port == port; });
      if (b == inst.args.end()) {
        fail(i, Code::WIDTH_MISMATCH, "T-Inst", {port},
             "input port '" + port + "' of '" + inst.module + "' is not bound");
        return true;
      }
    }
    if (inst.ids.size() != sig.outputs.size()) {
      fail(i, Code::WIDTH_MISMATCH, "T-Inst", inst.ids,
           "instance of '" + inst.module + "' names " + std::to_string(inst.ids.size()) + " result(s) but the module has " +
               std::to_string(sig.outputs.size()) + " output(s)");
      return true;
    }
    if (!known(used_ids(inst))) return false;
    for (const auto& b : inst.args) {
      const Width expected = *sig.input(b.port);
      if (env_.at(b.value) != expected) {
        fail(i, Code::WIDTH_MISMATCH, "T-Inst", {b.value, b.port},
             "'" + b.value + "' has width " + w(b.value) + " but port '" + inst.module + "." + b.port +
                 "' expects " + std::to_string(expected));
        return true;
      }
    }
    for (std::size_t k = 0; k < inst.ids.size(); ++k) define(i, inst.ids[k], sig.outputs[k].second);
    return true;
  }

  // Items left untyped at the fixpoint. Those downstream of an already
  // reported failure stay silent.
  void report_unresolved(const std::vector<bool>& done) {
    std::set<std::string> poisoned = failed_;
    bool grew = true;
    while (grew) {
      grew = false;
      for (std::size_t i = 0; i < m_.body.size(); ++i) {
        if (done[i]) continue;
        const auto uses = used_ids(m_.body[i]);
        if (std::none_of(uses.begin(), uses.end(), [&](const std::string& u) { return poisoned.count(u); })) continue;
        for (const auto& d : defined_ids(m_.body[i])) grew |= poisoned.insert(d).second;
      }
    }
    for (std::size_t i = 0; i < m_.body.size(); ++i) {
      if (done[i] || std::holds_alternative<OutputItem>(m_.body[i])) continue;
      const auto ids = defined_ids(m_.body[i]);
      if (std::any_of(ids.begin(), ids.end(), [&](const std::string& d) { return poisoned.count(d); })) continue;
      const auto uses = used_ids(m_.body[i]);
      if (std::any_of(uses.begin(), uses.end(), [&](const std::string& u) { return poisoned.count(u); })) continue;
      fail(i, Code::WIDTH_MISMATCH, typing_rule(opcode_of(m_.body[i])), ids,
           "width of '" + detail::join(ids) +
               "' cannot be inferred (feedback through a reg needs an explicit \"width\" attr)");
    }
    unresolved_ = std::move(poisoned);
  }

  void check_outputs() {
    for (std::size_t i = 0; i < m_.body.size(); ++i) {
      const auto* out = std::get_if<OutputItem>(&m_.body[i]);
      if (!out) continue;
      for (const auto& b : out->args) {
        const Port* port = m_.find_port(b.port);
        if (!port || port->decl.dir != Direction::output) continue;
        auto got = env_.get(b.value);
        if (!got || unresolved_.count(b.value)) continue;
        if (*got != port->decl.width)
          fail(i, Code::WIDTH_MISMATCH, "T-Out", {b.port, b.value},
               "output '" + b.port + "' is declared with width " + std::to_string(port->decl.width) + " but '" +
                   b.value + "' has width " + std::to_string(*got));
      }
    }
  }

  const SignatureEnv& sigma_;
  const ModuleDef& m_;
  WidthEnv env_;
  std::vector<Diagnostic> diags_;
  std::set<std::string> failed_;
  std::set<std::string> unresolved_;
};

}  // namespace detail

// Propagates widths from the input ports through the body to a fixpoint,
// then checks output bindings against the declared port widths.
// `passes`, when given, receives the number of sweeps over the body.
inline Result<WidthEnv> infer_module(const SignatureEnv& sigma, const ModuleDef& m, std::size_t* passes = nullptr) {
  return detail::ModuleTyper(sigma, m).run(passes);
}

using DesignWidths = std::map<std::string, WidthEnv>;

inline Result<DesignWidths> infer_design(const Design& d) {
  const auto graph = check_instance_graph(d);
  if (has_errors(graph.diagnostics)) return graph.diagnostics;
  const SignatureEnv sigma = build_signature_env(d);
  DesignWidths out;
  std::vector<Diagnostic> diags;
  for (const auto& name : graph.order) {
    auto r = infer_module(sigma, *d.find(name));
    if (r) out.emplace(name, std::move(r).value());
    else append(diags, r.diagnostics());
  }
  if (!diags.empty()) return diags;
  return out;
}

}  // namespace cppl
