#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cppl/ir.hpp"
#include "cppl/sim.hpp"
#include "cppl/typer.hpp"

// Lowering of a checked design to a flat per-module netlist, and text
// emission from it: synthesizable Verilog and a CIRCT-style dump.
namespace cppl {

enum class NetKind { input, wire, reg_state };

struct Net {
  std::string id;
  Width width = 1;
  NetKind kind = NetKind::wire;
  friend bool operator==(const Net&, const Net&) = default;
};

// One combinational or register cell. For reg, inputs are d, clk, en and
// optionally rst, in that order.
struct Cell {
  Opcode op = Opcode::const_;
  std::vector<std::string> inputs;
  std::string output;
  Attrs attrs = Attrs::object();
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct NetInstance {
  std::string name;
  std::string callee;
  std::vector<Binding> inputs;   // callee input port -> net
  std::vector<Binding> results;  // callee output port -> net
  friend bool operator==(const NetInstance&, const NetInstance&) = default;
};

struct NetlistModule {
  std::string name;
  std::vector<Port> ports;
  std::vector<Net> nets;  // input ports first, then body nets in body order
  std::vector<Cell> cells;
  std::vector<NetInstance> instances;
  std::vector<Binding> outputs;  // port declaration order

  const Net& net(std::string_view id) const {
    auto it = std::find_if(nets.begin(), nets.end(), [&](const Net& n) { return n.id == id; });
    if (it == nets.end()) throw ContractViolation("netlist has no net '" + std::string(id) + "'");
    return *it;
  }
  friend bool operator==(const NetlistModule&, const NetlistModule&) = default;
};

struct Netlist {
  std::vector<NetlistModule> modules;

  const NetlistModule* find(std::string_view name) const {
    auto it = std::find_if(modules.begin(), modules.end(), [&](const NetlistModule& m) { return m.name == name; });
    return it == modules.end() ? nullptr : &*it;
  }
  friend bool operator==(const Netlist&, const Netlist&) = default;
};

inline NetlistModule lower_module(const Design& d, const ModuleDef& m, const WidthEnv& gamma) {
  NetlistModule n;
  n.name = m.name;
  n.ports = m.ports;
  for (const auto& p : m.inputs()) n.nets.push_back({p.name, p.decl.width, NetKind::input});

  const auto names = instance_names(m);
  std::size_t k = 0;
  for (const auto& item : m.body) {
    if (const auto* op = std::get_if<OperationItem>(&item)) {
      n.nets.push_back({op->id, gamma.at(op->id), op->op == Opcode::reg ? NetKind::reg_state : NetKind::wire});
      n.cells.push_back({op->op, op->args, op->id, op->attrs});
    } else if (const auto* inst = std::get_if<InstanceItem>(&item)) {
      const ModuleDef& callee = *d.find(inst->module);
      NetInstance ni{names[k++], inst->module, {}, {}};
      for (const auto& p : callee.inputs()) {
        auto b = std::find_if(inst->args.begin(), inst->args.end(), [&](const Binding& x) { return x.port == p.name; });
        ni.inputs.push_back({p.name, b->value});
      }
      const auto outs = callee.outputs();
      for (std::size_t j = 0; j < inst->ids.size(); ++j) {
        n.nets.push_back({inst->ids[j], gamma.at(inst->ids[j]), NetKind::wire});
        ni.results.push_back({outs[j].name, inst->ids[j]});
      }
      n.instances.push_back(std::move(ni));
    } else {
      const auto& out = std::get<OutputItem>(item);
      for (const auto& p : m.outputs()) {
        auto b = std::find_if(out.args.begin(), out.args.end(), [&](const Binding& x) { return x.port == p.name; });
        n.outputs.push_back({p.name, b->value});
      }
    }
  }
  return n;
}

// Pre: every module checked and typed; `gammas` holds each module's widths.
inline Netlist lower(const Design& d, const DesignWidths& gammas) {
  Netlist n;
  for (const auto& m : d.modules) n.modules.push_back(lower_module(d, m, gammas.at(m.name)));
  return n;
}

namespace detail {

inline const std::set<std::string, std::less<>>& verilog_keywords() {
  static const std::set<std::string, std::less<>> words{
      "always", "and", "assign", "automatic", "begin", "buf", "bufif0", "bufif1", "case", "casex", "casez", "cell",
      "cmos", "config", "deassign", "default", "defparam", "design", "disable", "edge", "else", "end", "endcase",
      "endconfig", "endfunction", "endgenerate", "endmodule", "endprimitive", "endspecify", "endtable", "endtask",
      "event", "for", "force", "forever", "fork", "function", "generate", "genvar", "highz0", "highz1", "if",
      "ifnone", "incdir", "include", "initial", "inout", "input", "instance", "integer", "join", "large",
      "liblist", "library", "localparam", "macromodule", "medium", "module", "nand", "negedge", "nmos", "nor",
      "noshowcancelled", "not", "notif0", "notif1", "or", "output", "parameter", "pmos", "posedge", "primitive",
      "pull0", "pull1", "pulldown", "pullup", "pulsestyle_ondetect", "pulsestyle_onevent", "rcmos", "real",
      "realtime", "reg", "release", "repeat", "rnmos", "rpmos", "rtran", "rtranif0", "rtranif1", "scalared",
      "showcancelled", "signed", "small", "specify", "specparam", "strong0", "strong1", "supply0", "supply1",
      "table", "task", "time", "tran", "tranif0", "tranif1", "tri", "tri0", "tri1", "triand", "trior", "trireg",
      "unsigned", "use", "uwire", "vectored", "wait", "wand", "weak0", "weak1", "while", "wire", "wor", "xnor",
      "xor", "logic", "bit", "byte", "int", "shortint", "longint", "always_comb", "always_ff", "always_latch"};
  return words;
}

// Hands out Verilog names: keywords and taken names get `_` appended until
// unique.
class NameTable {
 public:
  std::string claim(std::string name) {
    while (verilog_keywords().count(name) || taken_.count(name)) name += '_';
    taken_.insert(name);
    return name;
  }

 private:
  std::set<std::string> taken_;
};

struct VerilogNames {
  std::string module;
  std::map<std::string, std::string> ports;
  std::map<std::string, std::string> nets;
  std::map<std::string, std::string> instances;
};

inline std::map<std::string, VerilogNames> assign_names(const Netlist& n) {
  std::map<std::string, VerilogNames> out;
  NameTable modules;
  for (const auto& m : n.modules) out[m.name].module = modules.claim(m.name);
  for (const auto& m : n.modules) {
    VerilogNames& v = out[m.name];
    NameTable local;
    for (const auto& p : m.ports) {
      v.ports[p.name] = local.claim(p.name);
      if (p.decl.dir == Direction::input) v.nets[p.name] = v.ports[p.name];
    }
    for (const auto& inst : m.instances) v.instances[inst.name] = local.claim(inst.name);
    for (const auto& inst : m.instances)
      for (const auto& r : inst.results) v.nets[r.value] = local.claim("_" + inst.name + "_" + r.port);
    for (const auto& net : m.nets)
      if (!v.nets.count(net.id)) v.nets[net.id] = local.claim(net.id);
  }
  return out;
}

inline std::string range(Width w) { return w == 1 ? std::string() : "[" + std::to_string(w - 1) + ":0]"; }

inline std::string literal(const Value& v) { return std::to_string(v.width()) + "'h" + v.to_hex().substr(2); }

inline std::string_view binary_operator(Opcode op) {
  switch (op) {
    case Opcode::add: return "+";
    case Opcode::sub: return "-";
    case Opcode::mul: return "*";
    case Opcode::and_: return "&";
    case Opcode::or_: return "|";
    case Opcode::xor_: return "^";
    case Opcode::shl: return "<<";
    case Opcode::shr: return ">>";
    case Opcode::eq: return "==";
    case Opcode::ne: return "!=";
    case Opcode::ult: return "<";
    case Opcode::ule: return "<=";
    case Opcode::ugt: return ">";
    case Opcode::uge: return ">=";
    default: return "";
  }
}

inline std::string cell_expression(const NetlistModule& m, const Cell& c, const VerilogNames& v) {
  auto name = [&](const std::string& id) { return v.nets.at(id); };
  const Width w = m.net(c.output).width;
  switch (op_class(c.op)) {
    case OpClass::constant: return literal(eval_op(Opcode::const_, {}, c.attrs));
    case OpClass::unary: return (c.op == Opcode::not_ ? "~" : "-") + name(c.inputs[0]);
    case OpClass::reduce: {
      const char* sym = c.op == Opcode::and_reduce ? "&" : c.op == Opcode::or_reduce ? "|" : "^";
      return sym + name(c.inputs[0]);
    }
    case OpClass::binary:
    case OpClass::compare:
      return name(c.inputs[0]) + " " + std::string(binary_operator(c.op)) + " " + name(c.inputs[1]);
    case OpClass::mux: return name(c.inputs[0]) + " ? " + name(c.inputs[1]) + " : " + name(c.inputs[2]);
    case OpClass::cast: {
      const Width ws = m.net(c.inputs[0]).width;
      if (ws == w) return name(c.inputs[0]);
      return "{{" + std::to_string(w - ws) + "{1'b0}}, " + name(c.inputs[0]) + "}";
    }
    case OpClass::concat: {
      std::string out = "{";
      for (std::size_t i = 0; i < c.inputs.size(); ++i) out += (i ? ", " : "") + name(c.inputs[i]);
      return out + "}";
    }
    case OpClass::extract: {
      const Width ws = m.net(c.inputs[0]).width;
      const auto low = static_cast<Width>(*attr_int(c.attrs, "lowBit"));
      if (low == 0 && w == ws) return name(c.inputs[0]);
      if (w == 1) return name(c.inputs[0]) + "[" + std::to_string(low) + "]";
      return name(c.inputs[0]) + "[" + std::to_string(low + w - 1) + ":" + std::to_string(low) + "]";
    }
    default: throw ContractViolation("no expression for " + std::string(to_string(c.op)));
  }
}

inline std::size_t widest(const std::vector<std::string>& xs) {
  std::size_t w = 0;
  for (const auto& x : xs) w = std::max(w, x.size());
  return w;
}

inline std::string pad(std::string s, std::size_t w) {
  s.resize(std::max(s.size(), w), ' ');
  return s;
}

}  // namespace detail

inline std::string emit_verilog(const Netlist& n) {
  const auto names = detail::assign_names(n);
  std::ostringstream os;
  bool first = true;
  for (const auto& m : n.modules) {
    const auto& v = names.at(m.name);
    if (!first) os << "\n";
    first = false;

    if (m.ports.empty()) {
      os << "module " << v.module << "();\n";
    } else {
      std::vector<std::string> ranges;
      for (const auto& p : m.ports) ranges.push_back(detail::range(p.decl.width));
      const std::size_t rw = detail::widest(ranges);
      os << "module " << v.module << "(\n";
      for (std::size_t i = 0; i < m.ports.size(); ++i) {
        const auto& p = m.ports[i];
        std::string line = p.decl.dir == Direction::input ? "input  " : "output ";
        if (rw) line += detail::pad(ranges[i], rw) + " ";
        os << "  " << line << v.ports.at(p.name) << (i + 1 < m.ports.size() ? ",\n" : "\n");
      }
      os << ");\n";
    }

    std::vector<std::string> kinds, ranges, ids;
    for (const auto& net : m.nets) {
      if (net.kind == NetKind::input) continue;
      kinds.push_back(net.kind == NetKind::reg_state ? "reg " : "wire");
      ranges.push_back(detail::range(net.width));
      ids.push_back(v.nets.at(net.id));
    }
    if (!ids.empty()) {
      os << "\n";
      const std::size_t rw = detail::widest(ranges);
      for (std::size_t i = 0; i < ids.size(); ++i)
        os << "  " << kinds[i] << " " << (rw ? detail::pad(ranges[i], rw) + " " : "") << ids[i] << ";\n";
    }

    for (const auto& inst : m.instances) {
      const NetlistModule& callee = *n.find(inst.callee);
      const auto& cv = names.at(inst.callee);
      std::vector<std::pair<std::string, std::string>> conns;
      for (const auto& p : callee.ports) {
        const auto& list = p.decl.dir == Direction::input ? inst.inputs : inst.results;
        auto b = std::find_if(list.begin(), list.end(), [&](const Binding& x) { return x.port == p.name; });
        conns.emplace_back(cv.ports.at(p.name), v.nets.at(b->value));
      }
      os << "\n  " << cv.module << " " << v.instances.at(inst.name);
      if (conns.empty()) {
        os << " ();\n";
        continue;
      }
      std::size_t pw = 0;
      for (const auto& c : conns) pw = std::max(pw, c.first.size());
      os << " (\n";
      for (std::size_t i = 0; i < conns.size(); ++i)
        os << "    ." << detail::pad(conns[i].first, pw) << " (" << conns[i].second << ")"
           << (i + 1 < conns.size() ? ",\n" : "\n");
      os << "  );\n";
    }

    bool any = false;
    for (const auto& c : m.cells) {
      if (c.op == Opcode::reg) continue;
      if (!any) os << "\n";
      any = true;
      os << "  assign " << v.nets.at(c.output) << " = " << detail::cell_expression(m, c, v) << ";\n";
    }

    for (const auto& c : m.cells) {
      if (c.op != Opcode::reg) continue;
      const std::string q = v.nets.at(c.output);
      os << "\n  always @(posedge " << v.nets.at(c.inputs[1]) << ")\n";
      if (c.inputs.size() == 4) {
        const Value rv = *reset_value(OperationItem{c.output, c.op, c.inputs, c.attrs}, m.net(c.output).width);
        os << "    if (" << v.nets.at(c.inputs[3]) << ") " << q << " <= " << detail::literal(rv) << ";\n";
        os << "    else if (" << v.nets.at(c.inputs[2]) << ") " << q << " <= " << v.nets.at(c.inputs[0]) << ";\n";
      } else {
        os << "    if (" << v.nets.at(c.inputs[2]) << ") " << q << " <= " << v.nets.at(c.inputs[0]) << ";\n";
      }
    }

    if (!m.outputs.empty()) os << "\n";
    for (const auto& b : m.outputs) os << "  assign " << v.ports.at(b.port) << " = " << v.nets.at(b.value) << ";\n";
    os << "endmodule\n";
  }
  return os.str();
}

namespace detail {

inline std::string ty(Width w) { return "i" + std::to_string(w); }

inline std::string_view circt_name(Opcode op) {
  switch (op) {
    case Opcode::not_: return "comb.not";
    case Opcode::neg: return "comb.neg";
    case Opcode::and_reduce: return "comb.and_reduce";
    case Opcode::or_reduce: return "comb.or_reduce";
    case Opcode::xor_reduce: return "comb.parity";
    case Opcode::add: return "comb.add";
    case Opcode::sub: return "comb.sub";
    case Opcode::mul: return "comb.mul";
    case Opcode::and_: return "comb.and";
    case Opcode::or_: return "comb.or";
    case Opcode::xor_: return "comb.xor";
    case Opcode::shl: return "comb.shl";
    case Opcode::shr: return "comb.shru";
    default: return "";
  }
}

inline std::string circt_cell(const NetlistModule& m, const Cell& c) {
  auto ref = [](const std::string& id) { return "%" + id; };
  const Width w = m.net(c.output).width;
  std::string out = "%" + c.output + " = ";
  switch (op_class(c.op)) {
    case OpClass::constant: {
      const Value v = eval_op(Opcode::const_, {}, c.attrs);
      return out + "hw.constant " + (v.fits_u64() ? std::to_string(v.to_u64()) : v.to_hex()) + " : " + ty(w);
    }
    case OpClass::unary:
    case OpClass::reduce:
      return out + std::string(circt_name(c.op)) + " " + ref(c.inputs[0]) + " : " + ty(m.net(c.inputs[0]).width);
    case OpClass::binary:
      return out + std::string(circt_name(c.op)) + " " + ref(c.inputs[0]) + ", " + ref(c.inputs[1]) + " : " + ty(w);
    case OpClass::compare:
      return out + "comb.icmp " + std::string(to_string(c.op)) + " " + ref(c.inputs[0]) + ", " + ref(c.inputs[1]) +
             " : " + ty(m.net(c.inputs[0]).width);
    case OpClass::mux:
      return out + "comb.mux " + ref(c.inputs[0]) + ", " + ref(c.inputs[1]) + ", " + ref(c.inputs[2]) + " : " + ty(w);
    case OpClass::cast:
      return out + "hw.zext " + ref(c.inputs[0]) + " : (" + ty(m.net(c.inputs[0]).width) + ") -> " + ty(w);
    case OpClass::concat: {
      std::string args, types;
      for (std::size_t i = 0; i < c.inputs.size(); ++i) {
        args += (i ? ", " : "") + ref(c.inputs[i]);
        types += (i ? ", " : "") + ty(m.net(c.inputs[i]).width);
      }
      return out + "comb.concat " + args + " : " + types;
    }
    case OpClass::extract:
      return out + "comb.extract " + ref(c.inputs[0]) + " from " + std::to_string(*attr_int(c.attrs, "lowBit")) +
             " : (" + ty(m.net(c.inputs[0]).width) + ") -> " + ty(w);
    case OpClass::reg: {
      out += "seq.compreg.ce " + ref(c.inputs[0]) + ", " + ref(c.inputs[1]) + ", " + ref(c.inputs[2]);
      if (c.inputs.size() == 4) {
        const Value rv = *reset_value(OperationItem{c.output, c.op, c.inputs, c.attrs}, w);
        out += " reset " + ref(c.inputs[3]) + ", " + (rv.fits_u64() ? std::to_string(rv.to_u64()) : rv.to_hex());
      }
      return out + " : " + ty(w);
    }
    default: throw ContractViolation("no CIRCT form for " + std::string(to_string(c.op)));
  }
}

}  // namespace detail

// Inspection dump in the style of CIRCT's hw/comb/seq dialects. Cells are
// listed in body order with instances first.
inline std::string emit_circt_text(const Netlist& n) {
  std::ostringstream os;
  os << "module {\n";
  for (const auto& m : n.modules) {
    os << "  hw.module @" << m.name << "(";
    for (std::size_t i = 0; i < m.ports.size(); ++i) {
      const auto& p = m.ports[i];
      os << (i ? ", " : "") << (p.decl.dir == Direction::input ? "in %" : "out ") << p.name << " : "
         << detail::ty(p.decl.width);
    }
    os << ") {\n";
    for (const auto& inst : m.instances) {
      os << "    ";
      for (std::size_t j = 0; j < inst.results.size(); ++j) os << (j ? ", %" : "%") << inst.results[j].value;
      if (!inst.results.empty()) os << " = ";
      os << "hw.instance \"" << inst.name << "\" @" << inst.callee << "(";
      for (std::size_t j = 0; j < inst.inputs.size(); ++j)
        os << (j ? ", " : "") << inst.inputs[j].port << ": %" << inst.inputs[j].value << ": "
           << detail::ty(m.net(inst.inputs[j].value).width);
      os << ") -> (";
      for (std::size_t j = 0; j < inst.results.size(); ++j)
        os << (j ? ", " : "") << inst.results[j].port << ": " << detail::ty(m.net(inst.results[j].value).width);
      os << ")\n";
    }
    for (const auto& c : m.cells) os << "    " << detail::circt_cell(m, c) << "\n";
    os << "    hw.output";
    std::string values, types;
    for (std::size_t i = 0; i < m.outputs.size(); ++i) {
      values += (i ? ", %" : " %") + m.outputs[i].value;
      types += (i ? ", " : "") + detail::ty(m.net(m.outputs[i].value).width);
    }
    if (!m.outputs.empty()) os << values << " : " << types;
    os << "\n  }\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace cppl
