#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cppl/diagnostic.hpp"
#include "cppl/ir.hpp"

namespace cppl {

namespace detail {

inline std::string join(const std::vector<std::string>& parts, std::string_view sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// reg args d (0) and rst (3) may refer to later definitions.
inline bool may_forward_reference(const BodyItem& item, std::size_t arg_pos) {
  const auto* op = std::get_if<OperationItem>(&item);
  return op && op->op == Opcode::reg && (arg_pos == 0 || arg_pos == 3);
}

}  // namespace detail

// Identifier table: ports and item ids must be unique, every use must
// resolve, and every use other than a reg's d/rst must follow its definition.
inline std::vector<Diagnostic> check_symbols(const ModuleDef& m) {
  std::vector<Diagnostic> diags;
  // id -> defining item index (nullopt for ports); only input ports are values.
  std::map<std::string, std::optional<std::size_t>> defs;
  std::set<std::string> reserved;
  for (const auto& p : m.ports) {
    reserved.insert(p.name);
    if (p.decl.dir == Direction::input) defs[p.name] = std::nullopt;
  }
  for (std::size_t i = 0; i < m.body.size(); ++i) {
    for (const auto& id : defined_ids(m.body[i])) {
      if (auto it = defs.find(id); it != defs.end() || reserved.count(id)) {
        std::string where = (it != defs.end() && it->second) ? "item " + std::to_string(*it->second)
                                                              : std::string("a port declaration");
        diags.push_back(make_diag(Code::DUPLICATE_ID, m.name, i, {id},
                                  "'" + id + "' defined at item " + std::to_string(i) +
                                      " is already defined by " + where));
        continue;
      }
      defs[id] = i;
    }
  }
  for (std::size_t i = 0; i < m.body.size(); ++i) {
    const auto& item = m.body[i];
    const bool is_output = std::holds_alternative<OutputItem>(item);
    const auto uses = used_ids(item);
    for (std::size_t pos = 0; pos < uses.size(); ++pos) {
      const auto& use = uses[pos];
      auto it = defs.find(use);
      if (it == defs.end()) {
        diags.push_back(make_diag(Code::UNKNOWN_ID, m.name, i, {use},
                                  "'" + use + "' is not defined in module '" + m.name + "'"));
        continue;
      }
      if (is_output || !it->second || *it->second < i) continue;
      if (detail::may_forward_reference(item, pos)) continue;
      diags.push_back(make_diag(Code::USE_BEFORE_DEF, m.name, i, {use},
                                "'" + use + "' is used at item " + std::to_string(i) +
                                    " but defined at item " + std::to_string(*it->second)));
    }
  }
  return diags;
}

// Exactly one output item, in last position, binding every declared output
// port exactly once to a defined value.
inline std::vector<Diagnostic> check_terminator(const ModuleDef& m) {
  std::vector<Diagnostic> diags;
  std::vector<std::size_t> outputs;
  for (std::size_t i = 0; i < m.body.size(); ++i)
    if (std::holds_alternative<OutputItem>(m.body[i])) outputs.push_back(i);
  if (outputs.empty()) {
    diags.push_back(make_diag(Code::MISSING_OUTPUT, m.name, std::nullopt, {},
                              "module '" + m.name + "' has no output item"));
    return diags;
  }
  if (outputs.size() > 1) {
    for (std::size_t k = 1; k < outputs.size(); ++k)
      diags.push_back(make_diag(Code::MULTIPLE_OUTPUT, m.name, outputs[k], {},
                                "extra output item at " + std::to_string(outputs[k]) +
                                    " (first at " + std::to_string(outputs[0]) + ")"));
  }
  if (outputs[0] + 1 != m.body.size())
    diags.push_back(make_diag(Code::OUTPUT_NOT_LAST, m.name, outputs[0], {},
                              "output item at " + std::to_string(outputs[0]) + " of a " +
                                  std::to_string(m.body.size()) + "-item body must be last"));

  std::set<std::string> values;
  for (const auto& p : m.ports)
    if (p.decl.dir == Direction::input) values.insert(p.name);
  for (const auto& item : m.body)
    for (const auto& id : defined_ids(item)) values.insert(id);

  const auto& out = std::get<OutputItem>(m.body[outputs[0]]);
  std::map<std::string, int> bound;
  for (const auto& b : out.args) {
    const Port* port = m.find_port(b.port);
    if (!port || port->decl.dir != Direction::output) {
      diags.push_back(make_diag(Code::UNKNOWN_PORT, m.name, outputs[0], {b.port},
                                "'" + b.port + "' is not an output port of '" + m.name + "'"));
      continue;
    }
    if (++bound[b.port] > 1)
      diags.push_back(make_diag(Code::MULTIPLE_OUTPUT, m.name, outputs[0], {b.port},
                                "output port '" + b.port + "' bound more than once"));
    if (!values.count(b.value))
      diags.push_back(make_diag(Code::UNKNOWN_ID, m.name, outputs[0], {b.value},
                                "output '" + b.port + "' bound to undefined '" + b.value + "'"));
  }
  for (const auto& p : m.outputs())
    if (!bound.count(p.name))
      diags.push_back(make_diag(Code::UNBOUND_OUTPUT_PORT, m.name, outputs[0], {p.name},
                                "output port '" + p.name + "' is not bound"));
  return diags;
}

// -- strongly connected components ----------------------------------------------

// Tarjan over an adjacency list; components come out in reverse topological
// order of the condensation.
inline std::vector<std::vector<std::size_t>> strongly_connected_components(
    const std::vector<std::vector<std::size_t>>& adj) {
  const std::size_t n = adj.size();
  std::vector<std::size_t> index(n, SIZE_MAX), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> comps;
  std::size_t counter = 0;

  // Iterative to survive long dependency chains.
  struct Frame {
    std::size_t v;
    std::size_t next;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != SIZE_MAX) continue;
    std::vector<Frame> frames{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      auto& f = frames.back();
      if (f.next < adj[f.v].size()) {
        const std::size_t w = adj[f.v][f.next++];
        if (index[w] == SIZE_MAX) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      const std::size_t v = f.v;
      frames.pop_back();
      if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
      if (low[v] == index[v]) {
        std::vector<std::size_t> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
      }
    }
  }
  return comps;
}

// Components that contain a cycle: size >= 2, or a single node with a self-edge.
inline std::vector<std::vector<std::size_t>> cyclic_components(
    const std::vector<std::vector<std::size_t>>& adj) {
  std::vector<std::vector<std::size_t>> out;
  for (auto& comp : strongly_connected_components(adj)) {
    const bool self = comp.size() == 1 &&
                      std::find(adj[comp[0]].begin(), adj[comp[0]].end(), comp[0]) != adj[comp[0]].end();
    if (comp.size() >= 2 || self) out.push_back(std::move(comp));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// -- instance graph -----------------------------------------------------------------

struct InstanceGraphReport {
  std::vector<Diagnostic> diagnostics;
  // Callees before callers; ties broken by declaration order. Modules on a
  // recursive cycle are omitted.
  std::vector<std::string> order;
};

inline InstanceGraphReport check_instance_graph(const Design& d) {
  InstanceGraphReport report;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < d.modules.size(); ++i) index.emplace(d.modules[i].name, i);

  std::vector<std::vector<std::size_t>> callees(d.modules.size());
  for (std::size_t i = 0; i < d.modules.size(); ++i) {
    const auto& m = d.modules[i];
    for (std::size_t k = 0; k < m.body.size(); ++k) {
      const auto* inst = std::get_if<InstanceItem>(&m.body[k]);
      if (!inst) continue;
      auto it = index.find(inst->module);
      if (it == index.end()) {
        report.diagnostics.push_back(make_diag(Code::UNKNOWN_MODULE, m.name, k, {inst->module},
                                               "instance of undeclared module '" + inst->module + "'"));
        continue;
      }
      if (std::find(callees[i].begin(), callees[i].end(), it->second) == callees[i].end())
        callees[i].push_back(it->second);
    }
  }

  std::set<std::size_t> cyclic;
  for (const auto& comp : cyclic_components(callees)) {
    std::vector<std::string> names;
    for (auto v : comp) {
      names.push_back(d.modules[v].name);
      cyclic.insert(v);
    }
    report.diagnostics.push_back(make_diag(Code::RECURSIVE_INSTANTIATION, d.modules[comp[0]].name,
                                           std::nullopt, names,
                                           "recursive instantiation cycle: " + detail::join(names, " -> ")));
  }

  // Kahn's algorithm with declaration-order tie breaking.
  std::vector<std::size_t> pending(d.modules.size(), 0);
  for (std::size_t i = 0; i < d.modules.size(); ++i) pending[i] = callees[i].size();
  std::vector<bool> done(d.modules.size(), false);
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t i = 0; i < d.modules.size(); ++i) {
      if (done[i] || cyclic.count(i)) continue;
      const bool ready = std::all_of(callees[i].begin(), callees[i].end(), [&](std::size_t c) { return done[c]; });
      if (!ready) continue;
      done[i] = true;
      report.order.push_back(d.modules[i].name);
      progress = true;
      break;
    }
  }
  return report;
}

// -- combinational dependency graph -----------------------------------------------

// Nodes are the values a module defines (input ports, item ids, instance
// results); edges run from each combinational result to each of its args.
struct DepGraph {
  std::vector<std::string> nodes;
  std::vector<std::vector<std::size_t>> edges;
  // Defining body item of each node (nullopt for ports).
  std::vector<std::optional<std::size_t>> item_of;
};

inline DepGraph build_dep_graph(const ModuleDef& m) {
  DepGraph g;
  std::unordered_map<std::string, std::size_t> id;
  auto add = [&](const std::string& name, std::optional<std::size_t> item) {
    if (id.count(name)) return;
    id.emplace(name, g.nodes.size());
    g.nodes.push_back(name);
    g.item_of.push_back(item);
  };
  for (const auto& p : m.ports)
    if (p.decl.dir == Direction::input) add(p.name, std::nullopt);
  for (std::size_t i = 0; i < m.body.size(); ++i)
    for (const auto& d : defined_ids(m.body[i])) add(d, i);
  g.edges.resize(g.nodes.size());

  for (const auto& item : m.body) {
    const Opcode op = opcode_of(item);
    if (op == Opcode::reg || op == Opcode::output) continue;
    for (const auto& result : defined_ids(item)) {
      const std::size_t from = id.at(result);
      for (const auto& use : used_ids(item)) {
        auto it = id.find(use);
        if (it == id.end()) continue;
        if (std::find(g.edges[from].begin(), g.edges[from].end(), it->second) == g.edges[from].end())
          g.edges[from].push_back(it->second);
      }
    }
  }
  return g;
}

// One COMB_LOOP per cyclic component of the dependency graph.
inline std::vector<Diagnostic> detect_comb_loops(const ModuleDef& m) {
  std::vector<Diagnostic> diags;
  const DepGraph g = build_dep_graph(m);
  for (const auto& comp : cyclic_components(g.edges)) {
    std::vector<std::string> members;
    std::optional<std::size_t> first_item;
    for (auto v : comp) {
      members.push_back(g.nodes[v]);
      if (g.item_of[v] && (!first_item || *g.item_of[v] < *first_item)) first_item = g.item_of[v];
    }
    diags.push_back(make_diag(Code::COMB_LOOP, m.name, first_item, members,
                              "combinational loop through " + detail::join(members)));
  }
  return diags;
}

// -- liveness -------------------------------------------------------------------------

struct DeadCode {
  std::set<std::size_t> dead_items;
  std::vector<Diagnostic> diagnostics;
};

// Reverse reachability from the output bindings. An instance is live when
// any of its results is.
inline DeadCode mark_dead_code(const ModuleDef& m) {
  std::unordered_map<std::string, std::size_t> def_item;
  for (std::size_t i = 0; i < m.body.size(); ++i)
    for (const auto& d : defined_ids(m.body[i])) def_item.emplace(d, i);

  std::vector<bool> live(m.body.size(), false);
  std::vector<std::size_t> work;
  auto need = [&](const std::string& value) {
    auto it = def_item.find(value);
    if (it == def_item.end() || live[it->second]) return;
    live[it->second] = true;
    work.push_back(it->second);
  };
  for (std::size_t i = 0; i < m.body.size(); ++i) {
    if (!std::holds_alternative<OutputItem>(m.body[i])) continue;
    live[i] = true;
    for (const auto& u : used_ids(m.body[i])) need(u);
  }
  while (!work.empty()) {
    const std::size_t i = work.back();
    work.pop_back();
    for (const auto& u : used_ids(m.body[i])) need(u);
  }

  DeadCode out;
  for (std::size_t i = 0; i < m.body.size(); ++i) {
    if (live[i]) continue;
    out.dead_items.insert(i);
    const auto ids = defined_ids(m.body[i]);
    out.diagnostics.push_back(make_diag(Code::DEAD_CODE, m.name, i, ids,
                                        "item " + std::to_string(i) + " (" + detail::join(ids) +
                                            ") does not reach any output and will be removed"));
  }
  return out;
}

}  // namespace cppl
