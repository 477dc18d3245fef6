#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cppl/checker.hpp"
#include "cppl/diagnostic.hpp"
#include "cppl/ir.hpp"
#include "cppl/typer.hpp"

namespace cppl {

struct CheckReport {
  std::vector<Diagnostic> diagnostics;
  // Topological module order (callees first).
  std::vector<std::string> order;
  DesignWidths widths;
  std::map<std::string, std::set<std::size_t>> dead_items;

  bool ok() const { return !has_errors(diagnostics); }
};

// Full static analysis in fixed order: symbols, terminator, instance graph,
// width inference, combinational loops, dead code. A module stops at the
// first stage that reports an error for it.
//
// Exception: when a module's only symbol errors are USE_BEFORE_DEF, every
// identifier still resolves, so the loop detector runs on it as well and
// reports the cycle that the out-of-order use creates.
inline CheckReport check_design(const Design& d) {
  CheckReport report;
  std::set<std::string> blocked;

  for (const auto& m : d.modules) {
    auto diags = check_symbols(m);
    if (!has_errors(diags)) continue;
    blocked.insert(m.name);
    const bool only_order = std::all_of(diags.begin(), diags.end(),
                                        [](const Diagnostic& x) { return x.code == Code::USE_BEFORE_DEF; });
    append(report.diagnostics, std::move(diags));
    if (only_order) append(report.diagnostics, detect_comb_loops(m));
  }

  for (const auto& m : d.modules) {
    if (blocked.count(m.name)) continue;
    auto diags = check_terminator(m);
    if (has_errors(diags)) blocked.insert(m.name);
    append(report.diagnostics, std::move(diags));
  }

  auto graph = check_instance_graph(d);
  for (const auto& diag : graph.diagnostics) {
    if (diag.code == Code::RECURSIVE_INSTANTIATION)
      blocked.insert(diag.related_ids.begin(), diag.related_ids.end());
    else if (diag.module)
      blocked.insert(*diag.module);
  }
  append(report.diagnostics, std::move(graph.diagnostics));
  report.order = graph.order;

  const SignatureEnv sigma = build_signature_env(d);
  for (const auto& name : graph.order) {
    if (blocked.count(name)) continue;
    auto typed = infer_module(sigma, *d.find(name));
    if (typed) {
      report.widths.emplace(name, std::move(typed).value());
    } else {
      blocked.insert(name);
      append(report.diagnostics, typed.diagnostics());
    }
  }

  for (const auto& m : d.modules) {
    if (blocked.count(m.name) || !report.widths.count(m.name)) continue;
    auto loops = detect_comb_loops(m);
    if (has_errors(loops)) {
      blocked.insert(m.name);
      append(report.diagnostics, std::move(loops));
    }
  }

  for (const auto& m : d.modules) {
    if (blocked.count(m.name) || !report.widths.count(m.name)) continue;
    auto dead = mark_dead_code(m);
    report.dead_items[m.name] = dead.dead_items;
    append(report.diagnostics, std::move(dead.diagnostics));
  }
  return report;
}

}  // namespace cppl
