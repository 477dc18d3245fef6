#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cppl/diagnostic.hpp"
#include "cppl/ir.hpp"
#include "json.hpp"

namespace cppl {

namespace detail {

using ojson = nlohmann::ordered_json;

// Expected positional arity per opcode: {min, max}.
inline std::pair<std::size_t, std::size_t> arity(Opcode op) {
  switch (op_class(op)) {
    case OpClass::constant: return {0, 0};
    case OpClass::unary:
    case OpClass::reduce:
    case OpClass::cast:
    case OpClass::extract: return {1, 1};
    case OpClass::binary:
    case OpClass::compare: return {2, 2};
    case OpClass::mux: return {3, 3};
    case OpClass::concat: return {1, SIZE_MAX};
    case OpClass::reg: return {3, 4};
    default: return {0, SIZE_MAX};
  }
}

class DesignReader {
 public:
  std::vector<Diagnostic> diags;

  Design read(const ojson& doc) {
    Design d;
    if (!doc.is_array()) {
      fail("", std::nullopt, "design must be a JSON array of modules");
      return d;
    }
    std::set<std::string> names;
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const std::string path = "modules[" + std::to_string(i) + "]";
      auto m = read_module(doc[i], path);
      if (!m.name.empty() && !names.insert(m.name).second)
        fail(path + ".name", m.name, "duplicate module name '" + m.name + "'");
      d.modules.push_back(std::move(m));
    }
    return d;
  }

 private:
  void fail(std::string path, std::optional<std::string> module, std::string what,
            std::optional<std::size_t> item = std::nullopt) {
    Diagnostic diag = make_diag(Code::SCHEMA_VIOLATION, std::move(module), item, {},
                                (path.empty() ? std::string("document") : path) + ": " + what);
    diag.path = std::move(path);
    diags.push_back(std::move(diag));
  }

  std::string read_identifier(const ojson& j, const std::string& path,
                              const std::optional<std::string>& module,
                              std::optional<std::size_t> item = std::nullopt) {
    if (!j.is_string()) {
      fail(path, module, "expected an identifier string", item);
      return {};
    }
    auto s = j.get<std::string>();
    if (!is_identifier(s)) fail(path, module, "'" + s + "' is not a valid identifier", item);
    return s;
  }

  ModuleDef read_module(const ojson& j, const std::string& path) {
    ModuleDef m;
    if (!j.is_object()) {
      fail(path, std::nullopt, "module must be an object");
      return m;
    }
    for (const auto& [key, _] : j.items())
      if (key != "name" && key != "ports" && key != "body")
        fail(path + "." + key, std::nullopt, "unexpected key '" + key + "'");
    if (!j.contains("name")) {
      fail(path + ".name", std::nullopt, "missing required key 'name'");
    } else {
      m.name = read_identifier(j["name"], path + ".name", std::nullopt);
    }
    std::optional<std::string> mod = m.name.empty() ? std::nullopt : std::optional(m.name);

    if (!j.contains("ports")) {
      fail(path + ".ports", mod, "missing required key 'ports'");
    } else if (!j["ports"].is_object()) {
      fail(path + ".ports", mod, "ports must be an object");
    } else {
      for (const auto& [pname, pj] : j["ports"].items()) {
        const std::string ppath = path + ".ports." + pname;
        if (!is_identifier(pname)) fail(ppath, mod, "'" + pname + "' is not a valid identifier");
        m.ports.push_back(Port{pname, read_port(pj, ppath, mod)});
      }
    }

    if (!j.contains("body")) {
      fail(path + ".body", mod, "missing required key 'body'");
    } else if (!j["body"].is_array()) {
      fail(path + ".body", mod, "body must be an array");
    } else {
      const auto& body = j["body"];
      for (std::size_t i = 0; i < body.size(); ++i)
        m.body.push_back(read_item(body[i], path + ".body[" + std::to_string(i) + "]", mod, i));
    }
    return m;
  }

  PortDecl read_port(const ojson& j, const std::string& path,
                     const std::optional<std::string>& mod) {
    PortDecl p;
    if (!j.is_object()) {
      fail(path, mod, "port declaration must be an object");
      return p;
    }
    for (const auto& [key, _] : j.items())
      if (key != "dir" && key != "width") fail(path + "." + key, mod, "unexpected key '" + key + "'");
    if (!j.contains("dir")) {
      fail(path + ".dir", mod, "missing required key 'dir'");
    } else if (j["dir"] == "input") {
      p.dir = Direction::input;
    } else if (j["dir"] == "output") {
      p.dir = Direction::output;
    } else {
      fail(path + ".dir", mod, "dir must be \"input\" or \"output\"");
    }
    if (!j.contains("width")) {
      fail(path + ".width", mod, "missing required key 'width'");
    } else if (!j["width"].is_number_integer() || j["width"].get<std::int64_t>() < 1 ||
               j["width"].get<std::int64_t>() > UINT32_MAX) {
      fail(path + ".width", mod, "width must be an integer >= 1");
    } else {
      p.width = static_cast<Width>(j["width"].get<std::int64_t>());
    }
    return p;
  }

  std::vector<Binding> read_bindings(const ojson& j, const std::string& path,
                                     const std::optional<std::string>& mod, std::size_t index) {
    std::vector<Binding> out;
    for (const auto& [port, value] : j.items()) {
      if (!is_identifier(port))
        fail(path + "." + port, mod, "'" + port + "' is not a valid identifier", index);
      out.push_back(Binding{port, read_identifier(value, path + "." + port, mod, index)});
    }
    return out;
  }

  static Attrs collect_attrs(const ojson& j, std::initializer_list<std::string_view> fixed) {
    Attrs attrs = Attrs::object();
    for (const auto& [key, value] : j.items()) {
      if (std::find(fixed.begin(), fixed.end(), key) != fixed.end()) continue;
      attrs[key] = Attrs::parse(value.dump());
    }
    return attrs;
  }

  BodyItem read_item(const ojson& j, const std::string& path, const std::optional<std::string>& mod,
                     std::size_t index) {
    if (!j.is_object()) {
      fail(path, mod, "body item must be an object", index);
      return OperationItem{};
    }
    if (!j.contains("op") || !j["op"].is_string()) {
      fail(path + ".op", mod, "missing or non-string 'op'", index);
      return OperationItem{};
    }
    const auto opname = j["op"].get<std::string>();
    const auto op = parse_opcode(opname);
    if (!op) {
      fail(path + ".op", mod, "unknown opcode '" + opname + "'", index);
      return OperationItem{};
    }

    if (*op == Opcode::output) {
      OutputItem out;
      for (const auto& [key, _] : j.items())
        if (key != "op" && key != "args")
          fail(path + "." + key, mod, "unexpected key '" + key + "' on output item", index);
      if (!j.contains("args") || !j["args"].is_object())
        fail(path + ".args", mod, "output args must be a named map", index);
      else
        out.args = read_bindings(j["args"], path + ".args", mod, index);
      return out;
    }

    if (*op == Opcode::instance) {
      InstanceItem inst;
      if (!j.contains("id") || !j["id"].is_array() || j["id"].empty()) {
        fail(path + ".id", mod, "instance id must be a non-empty identifier list", index);
      } else {
        for (std::size_t k = 0; k < j["id"].size(); ++k)
          inst.ids.push_back(
              read_identifier(j["id"][k], path + ".id[" + std::to_string(k) + "]", mod, index));
      }
      if (!j.contains("module"))
        fail(path + ".module", mod, "instance requires 'module'", index);
      else
        inst.module = read_identifier(j["module"], path + ".module", mod, index);
      if (!j.contains("args") || !j["args"].is_object())
        fail(path + ".args", mod, "instance args must be a named map", index);
      else
        inst.args = read_bindings(j["args"], path + ".args", mod, index);
      inst.attrs = collect_attrs(j, {"id", "op", "module", "args"});
      return inst;
    }

    OperationItem item;
    item.op = *op;
    if (!j.contains("id"))
      fail(path + ".id", mod, "missing required key 'id'", index);
    else
      item.id = read_identifier(j["id"], path + ".id", mod, index);
    if (j.contains("module"))
      fail(path + ".module", mod, "'module' is only valid on instance items", index);
    if (!j.contains("args")) {
      if (*op != Opcode::const_) fail(path + ".args", mod, "missing required key 'args'", index);
    } else if (!j["args"].is_array()) {
      fail(path + ".args", mod, "'" + opname + "' takes a positional args list", index);
    } else {
      const auto& args = j["args"];
      for (std::size_t k = 0; k < args.size(); ++k)
        item.args.push_back(
            read_identifier(args[k], path + ".args[" + std::to_string(k) + "]", mod, index));
      const auto [lo, hi] = arity(*op);
      if (args.size() < lo || args.size() > hi)
        fail(path + ".args", mod,
             "'" + opname + "' takes " +
                 (lo == hi ? std::to_string(lo)
                           : (hi == SIZE_MAX ? "at least " + std::to_string(lo)
                                             : std::to_string(lo) + " or " + std::to_string(hi))) +
                 " argument(s), got " + std::to_string(args.size()),
             index);
    }
    item.attrs = collect_attrs(j, {"id", "op", "args", "module"});
    return item;
  }
};

}  // namespace detail

// Parses a design document. Field order follows the document; attrs are
// kept verbatim (sorted by key).
inline Result<Design> parse_design(std::string_view text) {
  using detail::ojson;
  std::vector<std::set<std::string>> scopes;
  std::vector<std::string> duplicates;
  auto track_keys = [&](int, ojson::parse_event_t event, ojson& parsed) {
    switch (event) {
      case ojson::parse_event_t::object_start: scopes.emplace_back(); break;
      case ojson::parse_event_t::object_end:
        if (!scopes.empty()) scopes.pop_back();
        break;
      case ojson::parse_event_t::key:
        if (!scopes.empty() && !scopes.back().insert(parsed.get<std::string>()).second)
          duplicates.push_back(parsed.get<std::string>());
        break;
      default: break;
    }
    return true;
  };

  ojson doc;
  try {
    doc = ojson::parse(text.begin(), text.end(), track_keys);
  } catch (const ojson::exception& e) {
    return std::vector<Diagnostic>{make_diag(Code::MALFORMED_JSON, std::nullopt, std::nullopt, {},
                                             std::string("not parseable as JSON: ") + e.what())};
  }

  detail::DesignReader reader;
  for (const auto& key : duplicates)
    reader.diags.push_back(make_diag(Code::SCHEMA_VIOLATION, std::nullopt, std::nullopt, {key},
                                     "duplicate object key '" + key + "'"));
  Design design = reader.read(doc);
  if (!reader.diags.empty()) return std::move(reader.diags);
  return design;
}

inline nlohmann::ordered_json to_ordered_json(const ModuleDef& m) {
  using detail::ojson;
  ojson jm;
  jm["name"] = m.name;
  jm["ports"] = ojson::object();
  for (const auto& p : m.ports) {
    ojson jp;
    jp["dir"] = p.decl.dir == Direction::input ? "input" : "output";
    jp["width"] = p.decl.width;
    jm["ports"][p.name] = std::move(jp);
  }
  jm["body"] = ojson::array();
  auto bindings = [](const std::vector<Binding>& bs) {
    ojson o = ojson::object();
    for (const auto& b : bs) o[b.port] = b.value;
    return o;
  };
  auto add_attrs = [](ojson& into, const Attrs& attrs) {
    for (const auto& [k, v] : attrs.items()) into[k] = ojson::parse(v.dump());
  };
  for (const auto& item : m.body) {
    ojson ji;
    if (const auto* op = std::get_if<OperationItem>(&item)) {
      ji["id"] = op->id;
      ji["op"] = std::string(to_string(op->op));
      ji["args"] = op->args;
      add_attrs(ji, op->attrs);
    } else if (const auto* inst = std::get_if<InstanceItem>(&item)) {
      ji["id"] = inst->ids;
      ji["op"] = "instance";
      ji["module"] = inst->module;
      ji["args"] = bindings(inst->args);
      add_attrs(ji, inst->attrs);
    } else {
      ji["op"] = "output";
      ji["args"] = bindings(std::get<OutputItem>(item).args);
    }
    jm["body"].push_back(std::move(ji));
  }
  return jm;
}

inline nlohmann::ordered_json to_ordered_json(const Design& d) {
  auto doc = nlohmann::ordered_json::array();
  for (const auto& m : d.modules) doc.push_back(to_ordered_json(m));
  return doc;
}

// Deterministic serialization. Key order: name, ports, body; within items:
// id, op, module, args, then attrs sorted lexically.
inline std::string serialize_design(const Design& d) { return to_ordered_json(d).dump(2); }

struct Signature {
  std::vector<Port> inputs;
  std::vector<Port> outputs;
  friend bool operator==(const Signature&, const Signature&) = default;
};

inline Result<Signature> lookup_signature(const Design& d, std::string_view name) {
  const ModuleDef* m = d.find(name);
  if (!m)
    return std::vector<Diagnostic>{make_diag(Code::UNKNOWN_MODULE, std::nullopt, std::nullopt,
                                             {std::string(name)},
                                             "no module named '" + std::string(name) + "'")};
  return Signature{m->inputs(), m->outputs()};
}

}  // namespace cppl
