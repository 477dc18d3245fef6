#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cppl/bits.hpp"
#include "cppl/compiler.hpp"
#include "cppl/ir.hpp"
#include "cppl/typer.hpp"

// Two-state, cycle-based reference interpreter for the IR.
namespace cppl {

namespace detail {
inline void expect_width(const Value& v, Width w, std::string_view what) {
  if (v.width() != w)
    throw ContractViolation(std::string(what) + ": expected width " + std::to_string(w) + ", got " +
                            std::to_string(v.width()));
}
inline void expect_args(const std::vector<Value>& args, std::size_t n, Opcode op) {
  if (args.size() != n)
    throw ContractViolation(std::string(to_string(op)) + ": expected " + std::to_string(n) + " argument(s)");
}
inline Width attr_width(const Attrs& attrs, const char* key, Opcode op) {
  auto v = attr_int(attrs, key);
  if (!v || *v < 0 || *v > UINT32_MAX)
    throw ContractViolation(std::string(to_string(op)) + ": bad '" + key + "' attr");
  return static_cast<Width>(*v);
}
}  // namespace detail

// Evaluates one combinational opcode. reg, instance, and output are not
// value operations and are rejected.
inline Value eval_op(Opcode op, const std::vector<Value>& args, const Attrs& attrs = Attrs::object()) {
  using detail::expect_args;
  switch (op_class(op)) {
    case OpClass::constant: {
      expect_args(args, 0, op);
      const Width w = detail::attr_width(attrs, "width", op);
      auto v = attr_value(attrs, "value", w);
      if (!v) throw ContractViolation("const: value does not fit its width");
      return *v;
    }
    case OpClass::unary:
      expect_args(args, 1, op);
      return op == Opcode::not_ ? Value::bitwise_not(args[0]) : Value::neg(args[0]);
    case OpClass::reduce:
      expect_args(args, 1, op);
      if (op == Opcode::and_reduce) return Value::from_bool(args[0].all_ones());
      if (op == Opcode::or_reduce) return Value::from_bool(!args[0].is_zero());
      return Value::from_bool(args[0].parity());
    case OpClass::binary: {
      expect_args(args, 2, op);
      const auto& a = args[0];
      const auto& b = args[1];
      switch (op) {
        case Opcode::add: return Value::add(a, b);
        case Opcode::sub: return Value::sub(a, b);
        case Opcode::mul: return Value::mul(a, b);
        case Opcode::and_: return Value::bitwise_and(a, b);
        case Opcode::or_: return Value::bitwise_or(a, b);
        case Opcode::xor_: return Value::bitwise_xor(a, b);
        case Opcode::shl: return Value::shl(a, b);
        default: return Value::shr(a, b);
      }
    }
    case OpClass::compare: {
      expect_args(args, 2, op);
      const int c = Value::compare(args[0], args[1]);
      switch (op) {
        case Opcode::eq: return Value::from_bool(c == 0);
        case Opcode::ne: return Value::from_bool(c != 0);
        case Opcode::ult: return Value::from_bool(c < 0);
        case Opcode::ule: return Value::from_bool(c <= 0);
        case Opcode::ugt: return Value::from_bool(c > 0);
        default: return Value::from_bool(c >= 0);
      }
    }
    case OpClass::mux:
      expect_args(args, 3, op);
      detail::expect_width(args[0], 1, "mux select");
      detail::expect_width(args[2], args[1].width(), "mux branch");
      return args[0].is_zero() ? args[2] : args[1];
    case OpClass::cast: {
      expect_args(args, 1, op);
      return Value::zero_extend(args[0], detail::attr_width(attrs, "width", op));
    }
    case OpClass::concat:
      if (args.empty()) throw ContractViolation("concat: needs at least one argument");
      return Value::concat(args);
    case OpClass::extract: {
      expect_args(args, 1, op);
      return Value::extract(args[0], detail::attr_width(attrs, "lowBit", op), detail::attr_width(attrs, "width", op));
    }
    default: throw ContractViolation(std::string(to_string(op)) + " is not a value operation");
  }
}

// Register contents of one module instance and, recursively, its children.
struct SimState {
  std::map<std::string, Value> regs;
  std::map<std::string, SimState> instances;
  friend bool operator==(const SimState&, const SimState&) = default;
};

using PortValues = std::map<std::string, Value>;

struct StepResult {
  SimState state;
  PortValues outputs;
};

// Emitted instance names: "<Callee>_<k>", k counting instances of that
// callee in body order.
inline std::vector<std::string> instance_names(const ModuleDef& m) {
  std::vector<std::string> names;
  std::map<std::string, std::size_t> seen;
  for (const auto& item : m.body)
    if (const auto* inst = std::get_if<InstanceItem>(&item))
      names.push_back(inst->module + "_" + std::to_string(seen[inst->module]++));
  return names;
}

// A design compiled for repeated simulation.
class Simulator {
 public:
  explicit Simulator(const Design& d) {
    const CheckReport report = check_design(d);
    if (!report.ok())
      throw ContractViolation("design does not check: " + std::string(to_string(report.diagnostics[0].code)) +
                              ": " + report.diagnostics[0].message);
    for (const auto& name : report.order) compile(*d.find(name), report.widths.at(name));
  }

  bool has_module(const std::string& name) const { return index_.count(name) != 0; }

  SimState initial_state(const std::string& top) const { return initial(plan(top)); }

  PortValues eval_comb(const std::string& top, const PortValues& inputs, const SimState& state) const {
    const Plan& p = plan(top);
    std::vector<Value> slots;
    run(p, gather_inputs(p, inputs), state, slots, nullptr);
    return collect_outputs(p, slots);
  }

  StepResult step(const std::string& top, const PortValues& inputs, const SimState& state) const {
    const Plan& p = plan(top);
    std::vector<Value> slots;
    StepResult r;
    run(p, gather_inputs(p, inputs), state, slots, &r.state);
    r.outputs = collect_outputs(p, slots);
    return r;
  }

  // Builds port values from plain integers using the declared port widths.
  PortValues make_inputs(const std::string& top, const std::map<std::string, std::uint64_t>& raw) const {
    const Plan& p = plan(top);
    PortValues out;
    for (const auto& [name, bits] : raw) {
      auto it = std::find_if(p.inputs.begin(), p.inputs.end(), [&](const auto& x) { return x.first == name; });
      if (it == p.inputs.end()) throw ContractViolation("'" + name + "' is not an input of '" + top + "'");
      out.emplace(name, Value(it->second, bits));
    }
    return out;
  }

  std::vector<std::pair<std::string, Width>> input_ports(const std::string& top) const { return plan(top).inputs; }

 private:
  struct Step {
    Opcode op;
    std::vector<std::size_t> args;
    Attrs attrs;
    std::size_t result = 0;
    // reg
    std::string name;
    Width width = 0;
    std::optional<Value> reset;
    std::optional<Value> constant;
    // instance
    std::size_t callee = 0;
    std::vector<std::size_t> results;
  };
  struct Plan {
    std::string name;
    std::vector<std::pair<std::string, Width>> inputs;
    std::vector<std::pair<std::string, std::size_t>> outputs;
    std::vector<Step> steps;
    std::size_t slot_count = 0;
    std::vector<std::size_t> regs;  // indices into steps
  };

  const Plan& plan(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractViolation("UNKNOWN_MODULE: no module named '" + name + "'");
    return plans_[it->second];
  }

  void compile(const ModuleDef& m, const WidthEnv& widths) {
    Plan p;
    p.name = m.name;
    std::map<std::string, std::size_t> slot;
    for (const auto& port : m.inputs()) {
      slot[port.name] = p.inputs.size();
      p.inputs.emplace_back(port.name, port.decl.width);
    }
    std::size_t next = p.inputs.size();
    for (const auto& item : m.body)
      for (const auto& id : defined_ids(item)) slot[id] = next++;
    p.slot_count = next;

    const auto names = instance_names(m);
    std::size_t k = 0;
    for (const auto& item : m.body) {
      if (const auto* out = std::get_if<OutputItem>(&item)) {
        // Declaration order, so instance results map positionally.
        for (const auto& port : m.outputs()) {
          auto b = std::find_if(out->args.begin(), out->args.end(),
                                [&](const Binding& x) { return x.port == port.name; });
          p.outputs.emplace_back(port.name, slot.at(b->value));
        }
        continue;
      }
      Step s;
      if (const auto* inst = std::get_if<InstanceItem>(&item)) {
        s.op = Opcode::instance;
        s.name = names[k++];
        s.callee = index_.at(inst->module);
        for (const auto& [port, _] : plans_[s.callee].inputs) {
          auto b = std::find_if(inst->args.begin(), inst->args.end(), [&](const Binding& x) { return x.port == port; });
          s.args.push_back(slot.at(b->value));
        }
        for (const auto& id : inst->ids) s.results.push_back(slot.at(id));
      } else {
        const auto& op = std::get<OperationItem>(item);
        s.op = op.op;
        s.attrs = op.attrs;
        s.result = slot.at(op.id);
        for (const auto& a : op.args) s.args.push_back(slot.at(a));
        if (op.op == Opcode::reg) {
          s.name = op.id;
          s.width = widths.at(op.id);
          if (op.args.size() == 4) s.reset = reset_value(op, s.width);
          p.regs.push_back(p.steps.size());
        } else if (op.op == Opcode::const_) {
          s.constant = eval_op(Opcode::const_, {}, op.attrs);
        }
      }
      p.steps.push_back(std::move(s));
    }
    index_.emplace(m.name, plans_.size());
    plans_.push_back(std::move(p));
  }

  SimState initial(const Plan& p) const {
    SimState s;
    for (const auto& st : p.steps) {
      if (st.op == Opcode::reg) s.regs.emplace(st.name, Value::zero(st.width));
      if (st.op == Opcode::instance) s.instances.emplace(st.name, initial(plans_[st.callee]));
    }
    return s;
  }

  static std::vector<Value> gather_inputs(const Plan& p, const PortValues& inputs) {
    std::vector<Value> out;
    for (const auto& [name, width] : p.inputs) {
      auto it = inputs.find(name);
      if (it == inputs.end()) throw ContractViolation("missing input '" + name + "' for '" + p.name + "'");
      if (it->second.width() != width)
        throw ContractViolation("input '" + name + "' has width " + std::to_string(it->second.width()) +
                                ", port is " + std::to_string(width));
      out.push_back(it->second);
    }
    if (inputs.size() != p.inputs.size()) {
      for (const auto& [name, _] : inputs)
        if (std::none_of(p.inputs.begin(), p.inputs.end(), [&](const auto& x) { return x.first == name; }))
          throw ContractViolation("'" + name + "' is not an input of '" + p.name + "'");
    }
    return out;
  }

  static PortValues collect_outputs(const Plan& p, const std::vector<Value>& slots) {
    PortValues out;
    for (const auto& [port, s] : p.outputs) out.emplace(port, slots[s]);
    return out;
  }

  // Evaluates one module instance. When `next` is set, also computes the
  // post-edge register state from this cycle's values (all registers read
  // pre-step values, so update order does not matter).
  void run(const Plan& p, std::vector<Value> inputs, const SimState& state, std::vector<Value>& slots,
           SimState* next) const {
    slots.assign(p.slot_count, Value{});
    std::move(inputs.begin(), inputs.end(), slots.begin());
    static const SimState kEmpty;
    std::vector<Value> args;
    for (const auto& st : p.steps) {
      switch (st.op) {
        case Opcode::const_: slots[st.result] = *st.constant; break;
        case Opcode::reg: {
          auto it = state.regs.find(st.name);
          slots[st.result] = it == state.regs.end() ? Value::zero(st.width) : it->second;
          break;
        }
        case Opcode::instance: {
          const Plan& callee = plans_[st.callee];
          std::vector<Value> child_in;
          for (auto a : st.args) child_in.push_back(slots[a]);
          auto cs = state.instances.find(st.name);
          std::vector<Value> child_slots;
          SimState* child_next = next ? &next->instances[st.name] : nullptr;
          run(callee, std::move(child_in), cs == state.instances.end() ? kEmpty : cs->second, child_slots,
              child_next);
          for (std::size_t j = 0; j < st.results.size(); ++j)
            slots[st.results[j]] = child_slots[callee.outputs[j].second];
          break;
        }
        default: {
          args.clear();
          for (auto a : st.args) args.push_back(slots[a]);
          slots[st.result] = eval_op(st.op, args, st.attrs);
        }
      }
    }
    if (!next) return;
    for (auto r : p.regs) {
      const Step& st = p.steps[r];
      const Value& current = slots[st.result];
      Value nv = current;
      if (st.args.size() == 4 && !slots[st.args[3]].is_zero()) nv = *st.reset;
      else if (!slots[st.args[2]].is_zero()) nv = slots[st.args[0]];
      next->regs[st.name] = nv;
    }
  }

  std::vector<Plan> plans_;
  std::map<std::string, std::size_t> index_;
};

inline PortValues eval_comb(const Design& d, const std::string& top, const PortValues& inputs,
                            const SimState& state = {}) {
  return Simulator(d).eval_comb(top, inputs, state);
}

inline StepResult step(const Design& d, const std::string& top, const PortValues& inputs, const SimState& state) {
  return Simulator(d).step(top, inputs, state);
}

}  // namespace cppl
