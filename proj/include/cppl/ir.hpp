#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cppl/bits.hpp"
#include "json.hpp"

// The circuit IR document model: a design is an ordered list of modules, each
// with an ordered port map and a body of identified operations.
namespace cppl {

enum class Opcode {
  const_,
  not_,
  neg,
  and_reduce,
  or_reduce,
  xor_reduce,
  add,
  sub,
  mul,
  and_,
  or_,
  xor_,
  shl,
  shr,
  eq,
  ne,
  ult,
  ule,
  ugt,
  uge,
  mux,
  cast,
  concat,
  extract,
  reg,
  instance,
  output,
};

// Typing classes; each opcode belongs to exactly one.
enum class OpClass { constant, unary, reduce, binary, compare, mux, cast, concat, extract, reg, instance, output };

inline constexpr std::array<std::pair<Opcode, std::string_view>, 27> kOpcodeNames{{
    {Opcode::const_, "const"},       {Opcode::not_, "not"},
    {Opcode::neg, "neg"},            {Opcode::and_reduce, "and_reduce"},
    {Opcode::or_reduce, "or_reduce"}, {Opcode::xor_reduce, "xor_reduce"},
    {Opcode::add, "add"},            {Opcode::sub, "sub"},
    {Opcode::mul, "mul"},            {Opcode::and_, "and"},
    {Opcode::or_, "or"},             {Opcode::xor_, "xor"},
    {Opcode::shl, "shl"},            {Opcode::shr, "shr"},
    {Opcode::eq, "eq"},              {Opcode::ne, "ne"},
    {Opcode::ult, "ult"},            {Opcode::ule, "ule"},
    {Opcode::ugt, "ugt"},            {Opcode::uge, "uge"},
    {Opcode::mux, "mux"},            {Opcode::cast, "cast"},
    {Opcode::concat, "concat"},      {Opcode::extract, "extract"},
    {Opcode::reg, "reg"},            {Opcode::instance, "instance"},
    {Opcode::output, "output"},
}};

inline std::string_view to_string(Opcode op) {
  for (const auto& [o, name] : kOpcodeNames)
    if (o == op) return name;
  return "?";
}

inline std::optional<Opcode> parse_opcode(std::string_view name) {
  for (const auto& [o, n] : kOpcodeNames)
    if (n == name) return o;
  return std::nullopt;
}

inline OpClass op_class(Opcode op) {
  switch (op) {
    case Opcode::const_: return OpClass::constant;
    case Opcode::not_:
    case Opcode::neg: return OpClass::unary;
    case Opcode::and_reduce:
    case Opcode::or_reduce:
    case Opcode::xor_reduce: return OpClass::reduce;
    case Opcode::add:
    case Opcode::sub:
    case Opcode::mul:
    case Opcode::and_:
    case Opcode::or_:
    case Opcode::xor_:
    case Opcode::shl:
    case Opcode::shr: return OpClass::binary;
    case Opcode::eq:
    case Opcode::ne:
    case Opcode::ult:
    case Opcode::ule:
    case Opcode::ugt:
    case Opcode::uge: return OpClass::compare;
    case Opcode::mux: return OpClass::mux;
    case Opcode::cast: return OpClass::cast;
    case Opcode::concat: return OpClass::concat;
    case Opcode::extract: return OpClass::extract;
    case Opcode::reg: return OpClass::reg;
    case Opcode::instance: return OpClass::instance;
    case Opcode::output: return OpClass::output;
  }
  return OpClass::output;
}

inline bool is_commutative(Opcode op) {
  switch (op) {
    case Opcode::add:
    case Opcode::mul:
    case Opcode::and_:
    case Opcode::or_:
    case Opcode::xor_:
    case Opcode::eq:
    case Opcode::ne: return true;
    default: return false;
  }
}

// Value opcodes take positional args; instance/output take a named map.
inline bool is_value_opcode(Opcode op) { return op != Opcode::instance && op != Opcode::output; }

// Identifiers match [A-Za-z_][A-Za-z0-9_]*.
inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; };
  if (!alpha(s[0])) return false;
  return std::all_of(s.begin() + 1, s.end(),
                     [&](char c) { return alpha(c) || (c >= '0' && c <= '9'); });
}

enum class Direction { input, output };

struct PortDecl {
  Direction dir = Direction::input;
  Width width = 1;
  friend bool operator==(const PortDecl&, const PortDecl&) = default;
};

struct Port {
  std::string name;
  PortDecl decl;
  friend bool operator==(const Port&, const Port&) = default;
};

// One `port: value` entry of a named args map.
struct Binding {
  std::string port;
  std::string value;
  friend bool operator==(const Binding&, const Binding&) = default;
};

// Attributes are an open key/value map; stored sorted so equality and
// serialization do not depend on document key order.
using Attrs = nlohmann::json;

struct OperationItem {
  std::string id;
  Opcode op = Opcode::const_;
  std::vector<std::string> args;
  Attrs attrs = Attrs::object();
  friend bool operator==(const OperationItem&, const OperationItem&) = default;
};

struct InstanceItem {
  std::vector<std::string> ids;
  std::string module;
  std::vector<Binding> args;
  Attrs attrs = Attrs::object();
  friend bool operator==(const InstanceItem&, const InstanceItem&) = default;
};

struct OutputItem {
  std::vector<Binding> args;
  friend bool operator==(const OutputItem&, const OutputItem&) = default;
};

using BodyItem = std::variant<OperationItem, InstanceItem, OutputItem>;

struct ModuleDef {
  std::string name;
  std::vector<Port> ports;
  std::vector<BodyItem> body;

  const Port* find_port(std::string_view port) const {
    auto it = std::find_if(ports.begin(), ports.end(), [&](const Port& p) { return p.name == port; });
    return it == ports.end() ? nullptr : &*it;
  }

  std::vector<Port> ports_with(Direction dir) const {
    std::vector<Port> out;
    std::copy_if(ports.begin(), ports.end(), std::back_inserter(out),
                 [&](const Port& p) { return p.decl.dir == dir; });
    return out;
  }

  std::vector<Port> inputs() const { return ports_with(Direction::input); }
  std::vector<Port> outputs() const { return ports_with(Direction::output); }

  friend bool operator==(const ModuleDef&, const ModuleDef&) = default;
};

struct Design {
  std::vector<ModuleDef> modules;

  const ModuleDef* find(std::string_view name) const {
    auto it = std::find_if(modules.begin(), modules.end(),
                           [&](const ModuleDef& m) { return m.name == name; });
    return it == modules.end() ? nullptr : &*it;
  }

  ModuleDef* find(std::string_view name) {
    auto it = std::find_if(modules.begin(), modules.end(),
                           [&](const ModuleDef& m) { return m.name == name; });
    return it == modules.end() ? nullptr : &*it;
  }

  friend bool operator==(const Design&, const Design&) = default;
};

// Identifiers an item defines (empty for output items).
inline std::vector<std::string> defined_ids(const BodyItem& item) {
  if (const auto* op = std::get_if<OperationItem>(&item)) return {op->id};
  if (const auto* inst = std::get_if<InstanceItem>(&item)) return inst->ids;
  return {};
}

// Identifiers an item reads, in argument order.
inline std::vector<std::string> used_ids(const BodyItem& item) {
  if (const auto* op = std::get_if<OperationItem>(&item)) return op->args;
  std::vector<std::string> out;
  const auto& bindings = std::holds_alternative<InstanceItem>(item) ? std::get<InstanceItem>(item).args
                                                                    : std::get<OutputItem>(item).args;
  for (const auto& b : bindings) out.push_back(b.value);
  return out;
}

inline Opcode opcode_of(const BodyItem& item) {
  if (const auto* op = std::get_if<OperationItem>(&item)) return op->op;
  return std::holds_alternative<InstanceItem>(item) ? Opcode::instance : Opcode::output;
}

// Rewrites every identifier use through `f`.
template <class F>
void rewrite_uses(BodyItem& item, F&& f) {
  if (auto* op = std::get_if<OperationItem>(&item)) {
    for (auto& a : op->args) a = f(a);
  } else if (auto* inst = std::get_if<InstanceItem>(&item)) {
    for (auto& b : inst->args) b.value = f(b.value);
  } else {
    for (auto& b : std::get<OutputItem>(item).args) b.value = f(b.value);
  }
}

// -- attribute helpers -------------------------------------------------------

inline std::optional<std::int64_t> attr_int(const Attrs& attrs, const char* key) {
  if (!attrs.is_object()) return std::nullopt;
  auto it = attrs.find(key);
  if (it == attrs.end() || !it->is_number_integer()) return std::nullopt;
  if (it->is_number_unsigned()) {
    auto v = it->get<std::uint64_t>();
    if (v > static_cast<std::uint64_t>(INT64_MAX)) return std::nullopt;
    return static_cast<std::int64_t>(v);
  }
  return it->get<std::int64_t>();
}

// Decodes a constant attribute (non-negative integer or "0x" string) at the
// given width. nullopt if absent, malformed, or too wide.
inline std::optional<Value> attr_value(const Attrs& attrs, const char* key, Width width) {
  if (!attrs.is_object() || width == 0) return std::nullopt;
  auto it = attrs.find(key);
  if (it == attrs.end()) return std::nullopt;
  if (it->is_number_unsigned() || (it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
    const auto v = it->get<std::uint64_t>();
    if (width < 64 && (v >> width) != 0) return std::nullopt;
    return Value(width, v);
  }
  if (it->is_string()) return Value::from_hex(it->get<std::string>(), width);
  return std::nullopt;
}

// Encodes a constant as an attribute value: integer when it fits 64 bits,
// otherwise a hex string.
inline nlohmann::json encode_value(const Value& v) {
  if (v.fits_u64()) return v.to_u64();
  return v.to_hex();
}

inline OperationItem make_const(std::string id, const Value& v) {
  OperationItem item{std::move(id), Opcode::const_, {}, Attrs::object()};
  item.attrs["value"] = encode_value(v);
  item.attrs["width"] = v.width();
  return item;
}

}  // namespace cppl
