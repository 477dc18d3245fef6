#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cppl/diagnostic.hpp"
#include "cppl/ir.hpp"

// Structural elaboration of architectural phrases into a hierarchy graph
// H = (V, E_h, E_w), plus the check that the hierarchy projection of H is
// isomorphic to the phrase's syntactic module/instance tree.
namespace cppl {

struct Phrase;
using PhrasePtr = std::shared_ptr<const Phrase>;

namespace phrase {
struct ModuleDecl {
  std::string name;
};
struct Inst {
  std::string name;
  std::string module;
  PhrasePtr rest;
};
// Port paths are dotted: "vertex.port".
struct Connect {
  std::string src;
  std::string dst;
  PhrasePtr rest;
};
struct Seq {
  PhrasePtr first;
  PhrasePtr second;
};
struct Empty {};
}  // namespace phrase

struct Phrase {
  std::variant<phrase::Empty, phrase::ModuleDecl, phrase::Inst, phrase::Connect, phrase::Seq> node;
};

namespace phrase {
inline PhrasePtr empty() { return std::make_shared<Phrase>(Phrase{Empty{}}); }
inline PhrasePtr module_decl(std::string m) { return std::make_shared<Phrase>(Phrase{ModuleDecl{std::move(m)}}); }
inline PhrasePtr inst(std::string x, std::string m, PhrasePtr rest = empty()) {
  return std::make_shared<Phrase>(Phrase{Inst{std::move(x), std::move(m), std::move(rest)}});
}
inline PhrasePtr connect(std::string p, std::string q, PhrasePtr rest = empty()) {
  return std::make_shared<Phrase>(Phrase{Connect{std::move(p), std::move(q), std::move(rest)}});
}
inline PhrasePtr seq(PhrasePtr a, PhrasePtr b) {
  return std::make_shared<Phrase>(Phrase{Seq{std::move(a), std::move(b)}});
}
}  // namespace phrase

// Scope Γ: known module names and their port names.
using ModuleEnv = std::map<std::string, std::vector<std::string>>;

using Edge = std::pair<std::string, std::string>;

struct HierGraph {
  std::set<std::string> vertices;
  // Module (type) of each vertex; used to resolve port paths.
  std::map<std::string, std::string> vertex_module;
  std::set<Edge> hier_edges;
  std::set<Edge> wire_edges;

  friend bool operator==(const HierGraph&, const HierGraph&) = default;
};

struct StructGraph {
  std::set<std::string> vertices;
  std::set<Edge> hier_edges;
  friend bool operator==(const StructGraph&, const StructGraph&) = default;
};

enum class ElabErrorKind { unknown_module, unknown_port, duplicate_instance, ill_formed };

struct ElabError {
  ElabErrorKind kind;
  std::string detail;
};

inline std::string_view to_string(ElabErrorKind k) {
  switch (k) {
    case ElabErrorKind::unknown_module: return "UNKNOWN_MODULE";
    case ElabErrorKind::unknown_port: return "UNKNOWN_PORT";
    case ElabErrorKind::duplicate_instance: return "DUPLICATE_INSTANCE";
    case ElabErrorKind::ill_formed: return "ILL_FORMED";
  }
  return "?";
}

struct Elaboration {
  std::optional<HierGraph> graph;
  std::optional<ElabError> error;
  bool ok() const { return graph.has_value(); }
};

namespace detail {

struct ElabFailure {
  ElabError error;
};

class Elaborator {
 public:
  Elaborator(const ModuleEnv& env, std::string root, std::optional<std::string> root_module)
      : env_(env), root_(std::move(root)), root_module_(std::move(root_module)) {}

  // `visible` holds vertices introduced by enclosing phrases, which connect
  // endpoints may refer to alongside the vertices of the rest phrase.
  HierGraph run(const Phrase& s, const std::map<std::string, std::string>& visible) {
    return std::visit([&](const auto& node) { return elab(node, visible); }, s.node);
  }

 private:
  [[noreturn]] static void fail(ElabErrorKind kind, std::string detail) {
    throw ElabFailure{ElabError{kind, std::move(detail)}};
  }

  void claim(const std::string& vertex, const std::map<std::string, std::string>& visible) {
    if (vertex == root_ || visible.count(vertex))
      fail(ElabErrorKind::duplicate_instance, "vertex '" + vertex + "' already declared");
  }

  HierGraph elab(const phrase::Empty&, const std::map<std::string, std::string>&) { return {}; }

  HierGraph elab(const phrase::ModuleDecl& d, const std::map<std::string, std::string>& visible) {
    claim(d.name, visible);
    HierGraph h;
    h.vertices.insert(d.name);
    h.vertex_module[d.name] = d.name;
    h.hier_edges.insert({root_, d.name});
    return h;
  }

  HierGraph elab(const phrase::Inst& i, const std::map<std::string, std::string>& visible) {
    if (!env_.count(i.module)) fail(ElabErrorKind::unknown_module, "module '" + i.module + "' not in scope");
    claim(i.name, visible);
    auto inner = visible;
    inner[i.name] = i.module;
    HierGraph h = run(*i.rest, inner);
    if (h.vertices.count(i.name)) fail(ElabErrorKind::duplicate_instance, "vertex '" + i.name + "' declared twice");
    h.vertices.insert(i.name);
    h.vertex_module[i.name] = i.module;
    h.hier_edges.insert({root_, i.name});
    return h;
  }

  HierGraph elab(const phrase::Connect& c, const std::map<std::string, std::string>& visible) {
    HierGraph h = run(*c.rest, visible);
    for (const auto* path : {&c.src, &c.dst})
      if (!is_port(*path, h, visible)) fail(ElabErrorKind::unknown_port, "'" + *path + "' is not a port in scope");
    h.wire_edges.insert({c.src, c.dst});
    return h;
  }

  HierGraph elab(const phrase::Seq& s, const std::map<std::string, std::string>& visible) {
    HierGraph a = run(*s.first, visible);
    auto inner = visible;
    inner.insert(a.vertex_module.begin(), a.vertex_module.end());
    HierGraph b = run(*s.second, inner);
    for (const auto& v : b.vertices)
      if (a.vertices.count(v)) fail(ElabErrorKind::duplicate_instance, "vertex '" + v + "' declared twice");
    a.vertices.insert(b.vertices.begin(), b.vertices.end());
    a.vertex_module.insert(b.vertex_module.begin(), b.vertex_module.end());
    a.hier_edges.insert(b.hier_edges.begin(), b.hier_edges.end());
    a.wire_edges.insert(b.wire_edges.begin(), b.wire_edges.end());
    return a;
  }

  bool is_port(const std::string& path, const HierGraph& h,
               const std::map<std::string, std::string>& visible) const {
    const auto dot = path.find('.');
    if (dot == std::string::npos) return false;
    const std::string vertex = path.substr(0, dot);
    const std::string port = path.substr(dot + 1);
    std::optional<std::string> module;
    if (vertex == root_) {
      module = root_module_;
    } else if (auto it = h.vertex_module.find(vertex); it != h.vertex_module.end()) {
      module = it->second;
    } else if (auto jt = visible.find(vertex); jt != visible.end()) {
      module = jt->second;
    }
    if (!module) return false;
    auto e = env_.find(*module);
    if (e == env_.end()) return false;
    return std::find(e->second.begin(), e->second.end(), port) != e->second.end();
  }

  const ModuleEnv& env_;
  std::string root_;
  std::optional<std::string> root_module_;
};

}  // namespace detail

// Elaborates `s` under parent `root`. When `root_module` names a module in
// `env`, the root's own ports are valid connect endpoints.
inline Elaboration elaborate(const ModuleEnv& env, const std::string& root, const Phrase& s,
                             std::optional<std::string> root_module = std::nullopt) {
  try {
    detail::Elaborator e(env, root, std::move(root_module));
    return {e.run(s, {}), std::nullopt};
  } catch (const detail::ElabFailure& f) {
    return {std::nullopt, f.error};
  }
}

inline StructGraph struct_projection(const HierGraph& h) { return {h.vertices, h.hier_edges}; }

// Adds a wiring edge. Never touches the hierarchy.
inline HierGraph add_wire(HierGraph h, std::string p, std::string q) {
  h.wire_edges.insert({std::move(p), std::move(q)});
  return h;
}

// -- syntactic parse tree and isomorphism --------------------------------------

struct TreeNode {
  std::string label;
  std::vector<TreeNode> children;
};

// Module/instance tree read straight off the phrase syntax. Every module
// declaration and instance call is a child of the root.
inline TreeNode parse_tree(const std::string& root, const Phrase& s) {
  TreeNode tree{root, {}};
  std::vector<const Phrase*> stack{&s};
  // Preorder walk keeps syntactic order of the children.
  while (!stack.empty()) {
    const Phrase* p = stack.back();
    stack.pop_back();
    if (const auto* d = std::get_if<phrase::ModuleDecl>(&p->node)) {
      tree.children.push_back({d->name, {}});
    } else if (const auto* i = std::get_if<phrase::Inst>(&p->node)) {
      tree.children.push_back({i->name, {}});
      stack.push_back(i->rest.get());
    } else if (const auto* c = std::get_if<phrase::Connect>(&p->node)) {
      stack.push_back(c->rest.get());
    } else if (const auto* q = std::get_if<phrase::Seq>(&p->node)) {
      stack.push_back(q->second.get());
      stack.push_back(q->first.get());
    }
  }
  return tree;
}

struct PreservationWitness {
  bool isomorphic = false;
  // Graph vertex (including the root) -> tree node path.
  std::map<std::string, std::string> mapping;
  std::string counterexample;
  std::optional<ElabError> error;
};

namespace detail {

inline std::string canonical(const TreeNode& t) {
  std::vector<std::string> kids;
  for (const auto& c : t.children) kids.push_back(canonical(c));
  std::sort(kids.begin(), kids.end());
  std::string out = t.label + "(";
  for (const auto& k : kids) out += k + ",";
  return out + ")";
}

// Rebuilds a rooted tree from Struct(H). Fails if the hierarchy is not a
// tree hanging off `root` (a vertex with two parents, or unreachable).
inline std::optional<TreeNode> tree_of(const StructGraph& g, const std::string& root, std::string& why) {
  std::map<std::string, std::vector<std::string>> kids;
  std::map<std::string, int> parents;
  for (const auto& [p, c] : g.hier_edges) {
    kids[p].push_back(c);
    if (++parents[c] > 1) {
      why = "vertex '" + c + "' has more than one parent";
      return std::nullopt;
    }
  }
  std::set<std::string> seen;
  std::function<TreeNode(const std::string&)> build = [&](const std::string& v) {
    seen.insert(v);
    TreeNode n{v, {}};
    for (const auto& c : kids[v]) n.children.push_back(build(c));
    return n;
  };
  TreeNode t = build(root);
  for (const auto& v : g.vertices)
    if (!seen.count(v)) {
      why = "vertex '" + v + "' is not reachable from the root";
      return std::nullopt;
    }
  return t;
}

inline void match(const TreeNode& a, const TreeNode& b, const std::string& path,
                  std::map<std::string, std::string>& mapping) {
  mapping[a.label] = path;
  std::vector<std::pair<std::string, const TreeNode*>> ka, kb;
  for (const auto& c : a.children) ka.emplace_back(canonical(c), &c);
  for (const auto& c : b.children) kb.emplace_back(canonical(c), &c);
  std::sort(ka.begin(), ka.end());
  std::sort(kb.begin(), kb.end());
  for (std::size_t i = 0; i < ka.size(); ++i)
    match(*ka[i].second, *kb[i].second, path + "/" + kb[i].second->label, mapping);
}

}  // namespace detail

// Elaborates `s`, builds Tree_root(s) syntactically, and returns the
// label-preserving isomorphism between Struct(H) and that tree.
inline PreservationWitness check_preservation(const ModuleEnv& env, const std::string& root, const Phrase& s,
                                              std::optional<std::string> root_module = std::nullopt) {
  PreservationWitness w;
  auto elab = elaborate(env, root, s, std::move(root_module));
  if (!elab.ok()) {
    w.error = ElabError{ElabErrorKind::ill_formed,
                        std::string(to_string(elab.error->kind)) + ": " + elab.error->detail};
    w.counterexample = w.error->detail;
    return w;
  }
  const TreeNode syntactic = parse_tree(root, s);
  std::string why;
  auto graph_tree = detail::tree_of(struct_projection(*elab.graph), root, why);
  if (!graph_tree) {
    w.counterexample = why;
    return w;
  }
  if (detail::canonical(*graph_tree) != detail::canonical(syntactic)) {
    w.counterexample = "hierarchy " + detail::canonical(*graph_tree) + " differs from parse tree " +
                       detail::canonical(syntactic);
    return w;
  }
  detail::match(*graph_tree, syntactic, root, w.mapping);
  w.isomorphic = true;
  return w;
}

// -- hierarchy of a parsed design ---------------------------------------------

inline std::string instance_vertex(const std::string& module, std::size_t k) {
  return module + "/instance#" + std::to_string(k);
}

// One vertex per module, one per instance item (named by body order), hier
// edges from each module to its instances, and wire edges for every
// instance argument and output binding ("vertex.name" endpoints).
inline Result<HierGraph> design_hierarchy(const Design& d) {
  HierGraph h;
  std::vector<Diagnostic> diags;
  for (const auto& m : d.modules) {
    h.vertices.insert(m.name);
    h.vertex_module[m.name] = m.name;
  }
  for (const auto& m : d.modules) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < m.body.size(); ++i) {
      if (const auto* inst = std::get_if<InstanceItem>(&m.body[i])) {
        if (!d.find(inst->module)) {
          diags.push_back(make_diag(Code::UNKNOWN_MODULE, m.name, i, {inst->module},
                                    "instance of undeclared module '" + inst->module + "'"));
          ++k;
          continue;
        }
        const std::string v = instance_vertex(m.name, k++);
        h.vertices.insert(v);
        h.vertex_module[v] = inst->module;
        h.hier_edges.insert({m.name, v});
        for (const auto& b : inst->args) h.wire_edges.insert({m.name + "." + b.value, v + "." + b.port});
      } else if (const auto* out = std::get_if<OutputItem>(&m.body[i])) {
        for (const auto& b : out->args) h.wire_edges.insert({m.name + "." + b.value, m.name + "." + b.port});
      }
    }
  }
  if (!diags.empty()) return diags;
  return h;
}

struct ModulePhrase {
  PhrasePtr phrase;
  ModuleEnv env;
  std::string root;
};

// Phrase form of one module's instance structure: an Inst per instance item
// followed by Connects for its argument bindings. The root's "ports" are the
// module's ports and locally defined values.
inline ModulePhrase module_phrase(const Design& d, const ModuleDef& m) {
  ModulePhrase out{phrase::empty(), {}, m.name};
  for (const auto& mod : d.modules) {
    auto& ports = out.env[mod.name];
    for (const auto& p : mod.ports) ports.push_back(p.name);
  }
  auto& local = out.env[m.name];
  for (const auto& item : m.body)
    for (const auto& id : defined_ids(item)) local.push_back(id);

  std::vector<std::pair<std::size_t, const InstanceItem*>> insts;
  std::size_t k = 0;
  for (const auto& item : m.body)
    if (const auto* inst = std::get_if<InstanceItem>(&item)) insts.emplace_back(k++, inst);
  PhrasePtr tail = phrase::empty();
  for (auto it = insts.rbegin(); it != insts.rend(); ++it) {
    const std::string v = instance_vertex(m.name, it->first);
    PhrasePtr body = tail;
    for (auto b = it->second->args.rbegin(); b != it->second->args.rend(); ++b)
      body = phrase::connect(m.name + "." + b->value, v + "." + b->port, body);
    tail = phrase::inst(v, it->second->module, body);
  }
  out.phrase = tail;
  return out;
}

// Graphviz rendering for debugging.
inline std::string to_dot(const HierGraph& h) {
  std::ostringstream os;
  os << "digraph H {\n";
  for (const auto& v : h.vertices) os << "  \"" << v << "\";\n";
  for (const auto& [a, b] : h.hier_edges) os << "  \"" << a << "\" -> \"" << b << "\";\n";
  for (const auto& [a, b] : h.wire_edges) os << "  \"" << a << "\" -> \"" << b << "\" [style=dashed];\n";
  os << "}\n";
  return os.str();
}

}  // namespace cppl
