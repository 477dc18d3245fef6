#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cppl/checker.hpp"
#include "cppl/compiler.hpp"
#include "cppl/ir.hpp"
#include "cppl/sim.hpp"
#include "cppl/typer.hpp"

// IR-level optimization: constant folding, common subexpression elimination
// and dead code elimination, run per module to a fixpoint.
namespace cppl {

struct PassReport {
  std::string pass;
  std::string module;
  std::size_t items_removed = 0;
  std::size_t items_rewritten = 0;
  std::size_t iterations = 0;

  bool changed() const { return items_removed != 0 || items_rewritten != 0; }
  friend bool operator==(const PassReport&, const PassReport&) = default;
};

// Replaces every combinational item whose args are all constants with the
// evaluated constant. A mux with a constant select becomes a same-width
// cast of the chosen branch (the IR has no alias op).
inline std::pair<ModuleDef, PassReport> constant_fold(const ModuleDef& m, const WidthEnv& gamma) {
  ModuleDef out = m;
  PassReport report{"constant_fold", m.name, 0, 0, 1};
  std::unordered_map<std::string, Value> consts;
  for (auto& item : out.body) {
    auto* op = std::get_if<OperationItem>(&item);
    if (!op) continue;
    if (op->op == Opcode::const_) {
      consts.emplace(op->id, eval_op(Opcode::const_, {}, op->attrs));
      continue;
    }
    if (op->op == Opcode::reg) continue;

    std::vector<Value> args;
    for (const auto& a : op->args) {
      auto it = consts.find(a);
      if (it == consts.end()) break;
      args.push_back(it->second);
    }
    if (args.size() == op->args.size()) {
      const Value v = eval_op(op->op, args, op->attrs);
      *op = make_const(op->id, v);
      consts.emplace(op->id, v);
      ++report.items_rewritten;
      continue;
    }
    if (op->op == Opcode::mux) {
      auto sel = consts.find(op->args[0]);
      if (sel == consts.end()) continue;
      const std::string chosen = sel->second.is_zero() ? op->args[2] : op->args[1];
      OperationItem alias{op->id, Opcode::cast, {chosen}, Attrs::object()};
      alias.attrs["width"] = gamma.at(op->id);
      *op = std::move(alias);
      ++report.items_rewritten;
    }
  }
  return {std::move(out), report};
}

namespace detail {

// Attributes that affect an op's value; everything else is ignored.
inline std::string semantic_attrs(const OperationItem& op) {
  switch (op.op) {
    case Opcode::const_: {
      const auto v = eval_op(Opcode::const_, {}, op.attrs);
      return std::to_string(v.width()) + ":" + v.to_hex();
    }
    case Opcode::cast: return std::to_string(*attr_int(op.attrs, "width"));
    case Opcode::extract:
      return std::to_string(*attr_int(op.attrs, "lowBit")) + ":" + std::to_string(*attr_int(op.attrs, "width"));
    default: return {};
  }
}

}  // namespace detail

// Merges items with identical (opcode, args, attrs); commutative opcodes
// are keyed on sorted args. reg and instance items are never merged. Uses
// are redirected to the earliest definition.
inline std::pair<ModuleDef, PassReport> cse(const ModuleDef& m) {
  PassReport report{"cse", m.name, 0, 0, 1};
  std::unordered_map<std::string, std::string> redirect;
  std::unordered_map<std::string, std::string> seen;
  auto resolve = [&](const std::string& id) {
    auto it = redirect.find(id);
    return it == redirect.end() ? id : it->second;
  };

  std::vector<BodyItem> kept;
  for (const auto& item : m.body) {
    const auto* op = std::get_if<OperationItem>(&item);
    if (!op || op->op == Opcode::reg) {
      kept.push_back(item);
      continue;
    }
    std::vector<std::string> args;
    for (const auto& a : op->args) args.push_back(resolve(a));
    if (is_commutative(op->op)) std::sort(args.begin(), args.end());
    std::string key(to_string(op->op));
    key += "(";
    for (const auto& a : args) key += a + ",";
    key += ")" + detail::semantic_attrs(*op);
    auto [it, inserted] = seen.emplace(key, op->id);
    if (inserted) {
      kept.push_back(item);
    } else {
      redirect[op->id] = it->second;
      ++report.items_removed;
    }
  }
  for (auto& item : kept) rewrite_uses(item, resolve);

  ModuleDef out = m;
  out.body = std::move(kept);
  return {std::move(out), report};
}

inline std::pair<ModuleDef, PassReport> dce(const ModuleDef& m) {
  const auto dead = mark_dead_code(m).dead_items;
  ModuleDef out = m;
  out.body.clear();
  for (std::size_t i = 0; i < m.body.size(); ++i)
    if (!dead.count(i)) out.body.push_back(m.body[i]);
  return {std::move(out), PassReport{"dce", m.name, dead.size(), 0, 1}};
}

inline constexpr std::size_t kMaxPipelineRounds = 16;

struct OptimizeResult {
  Design design;
  std::vector<PassReport> reports;
  // Rounds each module needed, including the final no-change round.
  std::map<std::string, std::size_t> rounds;
};

// Repeats [constant_fold, cse, dce] per module until a round changes
// nothing. Disabled: returns the design untouched with no reports.
inline OptimizeResult run_pipeline(const Design& d, bool enable_opt = true) {
  OptimizeResult result{d, {}, {}};
  if (!enable_opt) return result;
  const CheckReport check = check_design(d);
  if (!check.ok()) throw ContractViolation("run_pipeline requires a checked design");

  for (auto& m : result.design.modules) {
    const WidthEnv& gamma = check.widths.at(m.name);
    PassReport fold{"constant_fold", m.name, 0, 0, 0};
    PassReport merge{"cse", m.name, 0, 0, 0};
    PassReport sweep{"dce", m.name, 0, 0, 0};
    std::size_t round = 0;
    for (bool changed = true; changed;) {
      if (++round > kMaxPipelineRounds)
        throw std::logic_error("optimizer did not reach a fixpoint on '" + m.name + "'");
      changed = false;
      for (PassReport* total : {&fold, &merge, &sweep}) {
        auto [next, r] = total == &fold ? constant_fold(m, gamma) : total == &merge ? cse(m) : dce(m);
        m = std::move(next);
        total->items_removed += r.items_removed;
        total->items_rewritten += r.items_rewritten;
        total->iterations = round;
        changed |= r.changed();
      }
    }
    result.rounds[m.name] = round;
    result.reports.push_back(fold);
    result.reports.push_back(merge);
    result.reports.push_back(sweep);
  }
  return result;
}

}  // namespace cppl
