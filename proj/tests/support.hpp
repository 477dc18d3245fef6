#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cppl/elaborator.hpp"
#include "cppl/ir.hpp"
#include "cppl/ir_json.hpp"
#include "cppl/sim.hpp"

// Fixtures, oracles and random generators shared by the unit tests and the
// acceptance runner.
namespace cppl::testing {

using Rng = std::mt19937_64;

// The two-module ALU document, verbatim.
inline constexpr const char* kAluDocument = R"json([
  {
    "name": "Adder8",
    "ports": {
      "a":   { "dir": "input",  "width": 8 }, 
      "b":   { "dir": "input",  "width": 8 }, 
      "sum": { "dir": "output", "width": 8 }
    },
    "body": [
      { "id": "sum_val", "op": "add", "args": ["a", "b"] },
      { "op": "output", "args": { "sum": "sum_val" } }
    ]
  },
  {
    "name": "ALU",
    "ports": {
      "op_code": { "dir": "input",  "width": 2 }, 
      "op_a":    { "dir": "input",  "width": 8 }, 
      "op_b":    { "dir": "input",  "width": 8 }, 
      "res":     { "dir": "output", "width": 8 }, 
      "zero":    { "dir": "output", "width": 1 }
    },
    "body": [
      { "id": ["adder8_sum"], "op": "instance", "module": "Adder8", "args": { "a": "op_a", "b": "op_b" } },
      { "id": "sel0", "op": "extract", "args": ["op_code"], "lowBit": 0, "width": 1 },
      { "id": "sel1", "op": "extract", "args": ["op_code"], "lowBit": 1, "width": 1 },
      { "id": "sub_res", "op": "sub", "args": ["op_a", "op_b"] },
      { "id": "and_res", "op": "and", "args": ["op_a", "op_b"] },
      { "id": "or_res",  "op": "or",  "args": ["op_a", "op_b"] },
      { "id": "mux_lo", "op": "mux", "args": ["sel0", "sub_res", "adder8_sum"] },
      { "id": "mux_hi", "op": "mux", "args": ["sel0", "or_res", "and_res"] },
      { "id": "res_mux", "op": "mux", "args": ["sel1", "mux_hi", "mux_lo"] },
      { "id": "any_set", "op": "or_reduce", "args": ["res_mux"] },
      { "id": "is_zero", "op": "not", "args": ["any_set"] },
      { "op": "output", "args": { "res": "res_mux", "zero": "is_zero" } }
    ]
  }
]
)json";

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Design load_design_file(const std::filesystem::path& p) {
  auto r = parse_design(read_text(p));
  if (!r) throw std::runtime_error("cannot parse " + p.string() + ": " + r.diagnostics().front().message);
  return std::move(r).value();
}

inline std::vector<std::filesystem::path> corpus_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// Module no other module instantiates; the last one when several qualify.
inline std::string top_module(const Design& d) {
  std::set<std::string> called;
  for (const auto& m : d.modules)
    for (const auto& item : m.body)
      if (const auto* inst = std::get_if<InstanceItem>(&item)) called.insert(inst->module);
  for (auto it = d.modules.rbegin(); it != d.modules.rend(); ++it)
    if (!called.count(it->name)) return it->name;
  return d.modules.back().name;
}

// The ALU behaviour written directly from its English description:
// 00 add, 01 subtract, 10 and, 11 or, all modulo 256; zero flags res == 0.
struct AluOut {
  unsigned res;
  unsigned zero;
};

inline AluOut alu_oracle(unsigned op, unsigned a, unsigned b) {
  unsigned r = 0;
  switch (op & 3U) {
    case 0: r = (a + b) % 256; break;
    case 1: r = (a + 256 - b) % 256; break;
    case 2: r = a & b; break;
    case 3: r = a | b; break;
  }
  return {r, r == 0 ? 1U : 0U};
}

inline Value random_value(Rng& rng, Width w) {
  if (w <= 64) return Value::truncate(w, rng());
  std::vector<Value> parts;
  Width left = w;
  while (left > 0) {
    const Width take = std::min<Width>(left, 64);
    parts.push_back(Value::truncate(take, rng()));
    left -= take;
  }
  return Value::concat(parts);
}

inline PortValues random_inputs(Rng& rng, const std::vector<std::pair<std::string, Width>>& ports) {
  PortValues in;
  for (const auto& [name, w] : ports) in.emplace(name, random_value(rng, w));
  return in;
}

// -- random well-typed modules ------------------------------------------------

struct Builder {
  ModuleDef m;
  std::vector<std::pair<std::string, Width>> pool;
  std::size_t next = 0;

  std::string fresh() { return "v" + std::to_string(next++); }

  void add(OperationItem op, Width w) {
    pool.emplace_back(op.id, w);
    m.body.emplace_back(std::move(op));
  }

  const std::pair<std::string, Width>& pick(Rng& rng) const { return pool[rng() % pool.size()]; }

  std::optional<std::string> pick_width(Rng& rng, Width w) const {
    std::vector<std::string> c;
    for (const auto& [id, pw] : pool)
      if (pw == w) c.push_back(id);
    if (c.empty()) return std::nullopt;
    return c[rng() % c.size()];
  }

  std::string bit(Rng& rng) {
    if (auto b = pick_width(rng, 1); b && rng() % 3 != 0) return *b;
    const auto [src, w] = pick(rng);
    OperationItem op{fresh(), Opcode::extract, {src}, Attrs::object()};
    op.attrs["lowBit"] = rng() % w;
    op.attrs["width"] = 1;
    const std::string id = op.id;
    add(std::move(op), 1);
    return id;
  }
};

// A single-module design whose every item is well typed by construction.
// With `sequential`, regs (some with feedback through an explicit width)
// are mixed in.
inline Design random_module(Rng& rng, std::size_t items, bool sequential = true) {
  Builder b;
  b.m.name = "Rand";
  const std::size_t n_in = 1 + rng() % 4;
  for (std::size_t i = 0; i < n_in; ++i) {
    const Width w = static_cast<Width>(1 + rng() % 16);
    b.m.ports.push_back({"in" + std::to_string(i), {Direction::input, w}});
    b.pool.emplace_back("in" + std::to_string(i), w);
  }

  const Opcode binops[] = {Opcode::add, Opcode::sub, Opcode::mul, Opcode::and_, Opcode::or_,
                           Opcode::xor_, Opcode::shl, Opcode::shr};
  const Opcode cmps[] = {Opcode::eq, Opcode::ne, Opcode::ult, Opcode::ule, Opcode::ugt, Opcode::uge};
  const Opcode unary[] = {Opcode::not_, Opcode::neg, Opcode::and_reduce, Opcode::or_reduce, Opcode::xor_reduce};

  while (b.m.body.size() < items) {
    const unsigned kind = static_cast<unsigned>(rng() % (sequential ? 10 : 9));
    const std::string id = b.fresh();
    switch (kind) {
      case 0: {
        const Width w = static_cast<Width>(1 + rng() % 16);
        b.add(make_const(id, random_value(rng, w)), w);
        break;
      }
      case 1: {
        const auto [a, w] = b.pick(rng);
        const Opcode op = unary[rng() % 5];
        b.add({id, op, {a}, Attrs::object()}, op_class(op) == OpClass::reduce ? 1 : w);
        break;
      }
      case 2:
      case 3: {
        const auto [a, w] = b.pick(rng);
        const std::string c = *b.pick_width(rng, w);
        b.add({id, binops[rng() % 8], {a, c}, Attrs::object()}, w);
        break;
      }
      case 4: {
        const auto [a, w] = b.pick(rng);
        b.add({id, cmps[rng() % 6], {a, *b.pick_width(rng, w)}, Attrs::object()}, 1);
        break;
      }
      case 5: {
        const std::string sel = b.bit(rng);
        const auto [x, w] = b.pick(rng);
        b.add({id, Opcode::mux, {sel, x, *b.pick_width(rng, w)}, Attrs::object()}, w);
        break;
      }
      case 6: {
        const auto [a, w] = b.pick(rng);
        const Width to = w + static_cast<Width>(rng() % 8);
        OperationItem op{id, Opcode::cast, {a}, Attrs::object()};
        op.attrs["width"] = to;
        b.add(std::move(op), to);
        break;
      }
      case 7: {
        std::vector<std::string> parts;
        Width total = 0;
        const std::size_t n = 1 + rng() % 3;
        for (std::size_t k = 0; k < n; ++k) {
          const auto [a, w] = b.pick(rng);
          parts.push_back(a);
          total += w;
        }
        b.add({id, Opcode::concat, parts, Attrs::object()}, total);
        break;
      }
      case 8: {
        const auto [a, w] = b.pick(rng);
        const Width width = static_cast<Width>(1 + rng() % w);
        OperationItem op{id, Opcode::extract, {a}, Attrs::object()};
        op.attrs["lowBit"] = rng() % (w - width + 1);
        op.attrs["width"] = width;
        b.add(std::move(op), width);
        break;
      }
      default: {
        const std::string clk = b.bit(rng);
        const std::string en = b.bit(rng);
        std::vector<std::string> args{"", clk, en};
        if (rng() % 2) args.push_back(b.bit(rng));
        if (rng() % 2) {
          // Feedback: d is defined right after the reg and reads it.
          const Width w = static_cast<Width>(1 + rng() % 12);
          args[0] = id + "_n";
          OperationItem reg{id, Opcode::reg, args, Attrs::object()};
          reg.attrs["width"] = w;
          if (args.size() == 4) reg.attrs["resetValue"] = rng() % (w >= 63 ? 1000 : (std::uint64_t{1} << w));
          b.add(std::move(reg), w);
          const auto other = b.pick_width(rng, w);
          if (other && *other != id && rng() % 2)
            b.add({id + "_n", Opcode::add, {id, *other}, Attrs::object()}, w);
          else
            b.add({id + "_n", Opcode::not_, {id}, Attrs::object()}, w);
        } else {
          const auto [d, w] = b.pick(rng);
          args[0] = d;
          b.add({id, Opcode::reg, args, Attrs::object()}, w);
        }
      }
    }
  }

  OutputItem out;
  const std::size_t n_out = 1 + rng() % 3;
  for (std::size_t k = 0; k < n_out; ++k) {
    const auto [v, w] = b.pool[b.pool.size() - 1 - (rng() % std::min<std::size_t>(b.pool.size(), 4))];
    const std::string port = "out" + std::to_string(k);
    b.m.ports.push_back({port, {Direction::output, w}});
    out.args.push_back({port, v});
  }
  b.m.body.emplace_back(std::move(out));
  return Design{{std::move(b.m)}};
}

// -- single-rule typing mutations --------------------------------------------

enum class Mutation { widen_operand, widen_select, extract_out_of_range, output_width };

struct Mutant {
  Design design;
  Mutation kind;
  std::string rule;
};

inline std::optional<Mutant> mutate(const Design& d, const WidthEnv& gamma, Mutation kind, Rng& rng) {
  ModuleDef m = d.modules.front();
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < m.body.size(); ++i) {
    const auto* op = std::get_if<OperationItem>(&m.body[i]);
    if (!op) continue;
    const OpClass c = op_class(op->op);
    if (kind == Mutation::widen_operand && (c == OpClass::binary || c == OpClass::compare)) candidates.push_back(i);
    if (kind == Mutation::widen_select && c == OpClass::mux) candidates.push_back(i);
    if (kind == Mutation::extract_out_of_range && c == OpClass::extract) candidates.push_back(i);
  }

  if (kind == Mutation::output_width) {
    std::vector<std::size_t> outs;
    for (std::size_t p = 0; p < m.ports.size(); ++p)
      if (m.ports[p].decl.dir == Direction::output) outs.push_back(p);
    Port& port = m.ports[outs[rng() % outs.size()]];
    port.decl.width += 1 + static_cast<Width>(rng() % 4);
    return Mutant{Design{{m}}, kind, "T-Out"};
  }
  if (candidates.empty()) return std::nullopt;

  const std::size_t i = candidates[rng() % candidates.size()];
  auto& op = std::get<OperationItem>(m.body[i]);
  if (kind == Mutation::extract_out_of_range) {
    const Width src = gamma.at(op.args[0]);
    const auto width = *attr_int(op.attrs, "width");
    op.attrs["lowBit"] = src - width + 1 + rng() % 4;
    return Mutant{Design{{m}}, kind, "T-Extract"};
  }
  const std::size_t arg = kind == Mutation::widen_select ? 0 : rng() % 2;
  const std::string rule(typing_rule(op.op));
  const std::string src = op.args[arg];
  OperationItem wide{"mut_wide", Opcode::cast, {src}, Attrs::object()};
  wide.attrs["width"] = gamma.at(src) + 1 + rng() % 4;
  op.args[arg] = "mut_wide";
  m.body.insert(m.body.begin() + static_cast<std::ptrdiff_t>(i), BodyItem{wide});
  return Mutant{Design{{m}}, kind, rule};
}

inline std::string_view to_string(Mutation k) {
  switch (k) {
    case Mutation::widen_operand: return "operand widened";
    case Mutation::widen_select: return "mux select widened";
    case Mutation::extract_out_of_range: return "extract out of range";
    case Mutation::output_width: return "output width changed";
  }
  return "?";
}

// -- random architectural phrases --------------------------------------------

struct PhraseGen {
  Rng& rng;
  ModuleEnv env;
  std::string root = "top";
  std::string root_module = "Top";
  std::size_t budget = 20;
  std::size_t counter = 0;

  explicit PhraseGen(Rng& r) : rng(r) {
    for (const char* mod : {"Top", "A", "B", "C"}) env[mod] = {"p0", "p1", "p2"};
  }

  // Returns the phrase and the vertices it introduces.
  std::pair<PhrasePtr, std::map<std::string, std::string>> gen(int depth,
                                                               const std::map<std::string, std::string>& scope) {
    const unsigned pick = depth <= 0 || budget == 0 ? rng() % 2 : rng() % 5;
    switch (pick) {
      case 0: return {phrase::empty(), {}};
      case 1: {
        if (budget == 0) return {phrase::empty(), {}};
        --budget;
        const std::string v = "d" + std::to_string(counter++);
        return {phrase::module_decl(v), {{v, v}}};
      }
      case 2: {
        --budget;
        const std::string v = "u" + std::to_string(counter++);
        static const char* mods[] = {"A", "B", "C"};
        const std::string mod = mods[rng() % 3];
        auto inner = scope;
        inner[v] = mod;
        auto [rest, made] = gen(depth - 1, inner);
        made[v] = mod;
        return {phrase::inst(v, mod, rest), made};
      }
      case 3: {
        auto [rest, made] = gen(depth - 1, scope);
        std::vector<std::string> ends{root + ".p0", root + ".p1"};
        for (const auto* src : std::array<const std::map<std::string, std::string>*, 2>{&scope, &made})
          for (const auto& [v, mod] : *src)
            if (env.count(mod)) ends.push_back(v + ".p" + std::to_string(rng() % 3));
        const std::string a = ends[rng() % ends.size()];
        const std::string c = ends[rng() % ends.size()];
        return {phrase::connect(a, c, rest), made};
      }
      default: {
        auto [first, made1] = gen(depth - 1, scope);
        auto inner = scope;
        inner.insert(made1.begin(), made1.end());
        auto [second, made2] = gen(depth - 1, inner);
        made1.insert(made2.begin(), made2.end());
        return {phrase::seq(first, second), made1};
      }
    }
  }
};

// -- random dependency graphs ------------------------------------------------

using Adjacency = std::vector<std::vector<std::size_t>>;

// Independent cycle oracle: three-colour DFS.
inline bool has_cycle(const Adjacency& g) {
  std::vector<int> colour(g.size(), 0);
  std::function<bool(std::size_t)> visit = [&](std::size_t v) {
    colour[v] = 1;
    for (auto w : g[v]) {
      if (colour[w] == 1) return true;
      if (colour[w] == 0 && visit(w)) return true;
    }
    colour[v] = 2;
    return false;
  };
  for (std::size_t v = 0; v < g.size(); ++v)
    if (colour[v] == 0 && visit(v)) return true;
  return false;
}

// Edges whose removal leaves the graph acyclic (DFS back edges).
inline std::set<std::pair<std::size_t, std::size_t>> back_edges(const Adjacency& g) {
  std::set<std::pair<std::size_t, std::size_t>> out;
  std::vector<int> colour(g.size(), 0);
  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    colour[v] = 1;
    for (auto w : g[v]) {
      if (colour[w] == 1) out.insert({v, w});
      else if (colour[w] == 0) visit(w);
    }
    colour[v] = 2;
  };
  for (std::size_t v = 0; v < g.size(); ++v)
    if (colour[v] == 0) visit(v);
  return out;
}

inline Adjacency random_graph(Rng& rng, std::size_t max_nodes = 30) {
  const std::size_t n = 1 + rng() % max_nodes;
  Adjacency g(n);
  const double density = std::uniform_real_distribution<double>(0.0, 2.5)(rng) / static_cast<double>(n);
  std::bernoulli_distribution edge(std::min(1.0, density));
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t w = 0; w < n; ++w)
      if (edge(rng)) g[v].push_back(w);
  return g;
}

// Node v reads its successors in `g` (edge v -> w means v depends on w).
// Edges listed in `registered` read through a reg instead.
inline ModuleDef graph_module(const Adjacency& g, const std::set<std::pair<std::size_t, std::size_t>>& registered = {}) {
  ModuleDef m{"Graph", {{"a", {Direction::input, 8}}, {"clk", {Direction::input, 1}}, {"en", {Direction::input, 1}},
                        {"o", {Direction::output, 8}}}, {}};
  auto node = [](std::size_t v) { return "n" + std::to_string(v); };
  for (std::size_t v = 0; v < g.size(); ++v) {
    std::vector<std::string> args;
    for (auto w : g[v]) {
      if (registered.count({v, w})) {
        const std::string r = "r" + std::to_string(v) + "_" + std::to_string(w);
        m.body.emplace_back(OperationItem{r, Opcode::reg, {node(w), "clk", "en"}, Attrs::object()});
        args.push_back(r);
      } else {
        args.push_back(node(w));
      }
    }
    if (args.empty()) m.body.emplace_back(OperationItem{node(v), Opcode::not_, {"a"}, Attrs::object()});
    else m.body.emplace_back(OperationItem{node(v), Opcode::concat, args, Attrs::object()});
  }
  m.body.emplace_back(OutputItem{{{"o", node(0)}}});
  return m;
}

}  // namespace cppl::testing
