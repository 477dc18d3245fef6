#pragma once

#include <string>
#include <vector>

#include "cppl/backend.hpp"
#include "cppl/compiler.hpp"
#include "cppl/diagnostic.hpp"
#include "cppl/ir.hpp"
#include "cppl/optimizer.hpp"

namespace cppl {

struct Compiled {
  Design design;  // after optimization
  Netlist netlist;
  std::string verilog;
  std::string circt;
  std::vector<PassReport> passes;
  std::vector<Diagnostic> warnings;
};

// check -> optimize (unless disabled) -> lower -> emit.
inline Result<Compiled> compile_design(const Design& d, bool enable_opt = true) {
  CheckReport report = check_design(d);
  if (!report.ok()) return report.diagnostics;
  OptimizeResult opt = run_pipeline(d, enable_opt);
  CheckReport after = enable_opt ? check_design(opt.design) : report;
  if (!after.ok()) throw ContractViolation("optimizer produced a design that does not check");

  Compiled c;
  c.netlist = lower(opt.design, after.widths);
  c.verilog = emit_verilog(c.netlist);
  c.circt = emit_circt_text(c.netlist);
  c.design = std::move(opt.design);
  c.passes = std::move(opt.reports);
  c.warnings = std::move(report.diagnostics);
  return c;
}

}  // namespace cppl
