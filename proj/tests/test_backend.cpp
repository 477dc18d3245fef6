#include <regex>

#include "catch_amalgamated.hpp"
#include "cppl/ir_json.hpp"
#include "cppl/pipeline.hpp"
#include "support.hpp"

using namespace cppl;

namespace {

Compiled compile(const std::string& text, bool opt = true) {
  auto d = parse_design(text);
  REQUIRE(d.ok());
  auto c = compile_design(*d, opt);
  REQUIRE(c.ok());
  return *c;
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

// Collapses runs of whitespace to one space.
std::string squash(const std::string& s) { return std::regex_replace(s, std::regex("\\s+"), " "); }

}  // namespace

TEST_CASE("ALU netlist") {
  const Design d = *parse_design(testing::kAluDocument);
  const auto widths = infer_design(d).value();
  const Netlist n = lower(d, widths);
  const NetlistModule* alu = n.find("ALU");
  REQUIRE(alu);
  REQUIRE(alu->instances.size() == 1);
  CHECK(alu->instances[0].name == "Adder8_0");
  CHECK(alu->instances[0].callee == "Adder8");
  CHECK(alu->instances[0].results == std::vector<Binding>{{"sum", "adder8_sum"}});
  CHECK(alu->net("adder8_sum").width == 8);
  CHECK(alu->cells.size() == 10);
  CHECK(alu->outputs == std::vector<Binding>{{"res", "res_mux"}, {"zero", "is_zero"}});
}

TEST_CASE("ALU Verilog") {
  const Compiled c = compile(testing::kAluDocument);
  const std::string& v = c.verilog;
  CHECK(contains(v, "module Adder8("));
  CHECK(contains(v, "module ALU("));
  CHECK(contains(v, "input  [1:0] op_code,"));
  CHECK(contains(v, "output       zero"));
  CHECK(contains(v, "Adder8 Adder8_0 ("));
  CHECK(contains(v, ".sum (_Adder8_0_sum)"));
  CHECK(contains(v, "assign mux_lo = sel0 ? sub_res : _Adder8_0_sum;"));
  CHECK(contains(v, "assign any_set = |res_mux;"));
  CHECK(contains(v, "assign is_zero = ~any_set;"));
  CHECK(contains(v, "assign sel1 = op_code[1];"));
  CHECK(contains(v, "assign zero = is_zero;"));
  CHECK(v.find("module Adder8(") < v.find("module ALU("));
}

TEST_CASE("ALU CIRCT-style dump") {
  const Compiled c = compile(testing::kAluDocument);
  const std::string& t = c.circt;
  CHECK(t.rfind("module {\n", 0) == 0);
  CHECK(contains(t, "hw.module @Adder8(in %a : i8, in %b : i8, out sum : i8) {"));
  CHECK(contains(t, "%sum_val = comb.add %a, %b : i8\n    hw.output %sum_val : i8"));
  CHECK(contains(t, "hw.module @ALU("));
  const std::regex inst("hw\\.instance \"Adder8_0\" @Adder8\\(");
  CHECK(std::distance(std::sregex_iterator(t.begin(), t.end(), inst), std::sregex_iterator()) == 1);
  CHECK(contains(t, "hw.output %res_mux, %is_zero : i8, i1"));
}

TEST_CASE("empty design") {
  const Netlist n = lower(Design{}, {});
  CHECK(emit_circt_text(n) == "module {\n}\n");
  CHECK(emit_verilog(n).empty());
}

TEST_CASE("identity module") {
  const Compiled c = compile(R"([{"name": "Id", "ports": {"a": {"dir": "input", "width": 8},
    "o": {"dir": "output", "width": 8}}, "body": [{"op": "output", "args": {"o": "a"}}]}])");
  const NetlistModule& m = c.netlist.modules[0];
  CHECK(m.cells.empty());
  CHECK(m.outputs == std::vector<Binding>{{"o", "a"}});
  CHECK(contains(c.verilog, "assign o = a;"));
  std::size_t assigns = 0;
  for (std::size_t at = 0; (at = c.verilog.find("assign", at)) != std::string::npos; ++at) ++assigns;
  CHECK(assigns == 1);
}

TEST_CASE("registers") {
  const Compiled plain = compile(R"([{"name": "R", "ports": {"d": {"dir": "input", "width": 4},
    "clk": {"dir": "input", "width": 1}, "en": {"dir": "input", "width": 1}, "o": {"dir": "output", "width": 4}},
    "body": [{"id": "q", "op": "reg", "args": ["d", "clk", "en"]}, {"op": "output", "args": {"o": "q"}}]}])");
  const NetlistModule& m = plain.netlist.modules[0];
  CHECK(m.net("q").kind == NetKind::reg_state);
  CHECK(m.cells.size() == 1);
  CHECK(m.cells[0].inputs == std::vector<std::string>{"d", "clk", "en"});
  CHECK(contains(plain.verilog, "reg  [3:0] q;"));
  CHECK(contains(squash(plain.verilog), "always @(posedge clk) if (en) q <= d;"));

  const Compiled counter = compile(testing::read_text(CPPL_TEST_DATA "/corpus/counter.json"));
  CHECK(contains(squash(counter.verilog), "always @(posedge clk) if (rst) q <= 8'h0; else if (en) q <= next;"));
  CHECK(contains(counter.circt, "seq.compreg.ce %next, %clk, %en reset %rst, 0 : i8"));
}

TEST_CASE("expression forms") {
  const Compiled c = compile(R"([{"name": "E", "ports": {"a": {"dir": "input", "width": 8},
    "b": {"dir": "input", "width": 4}, "o": {"dir": "output", "width": 16}}, "body": [
      {"id": "hi", "op": "extract", "args": ["a"], "lowBit": 4, "width": 4},
      {"id": "all", "op": "extract", "args": ["a"], "lowBit": 0, "width": 8},
      {"id": "wide", "op": "cast", "args": ["b"], "width": 8},
      {"id": "same", "op": "cast", "args": ["wide"], "width": 8},
      {"id": "cat", "op": "concat", "args": ["hi", "same", "b"]},
      {"id": "k", "op": "const", "value": 4660, "width": 16},
      {"id": "sh", "op": "shl", "args": ["cat", "k"]},
      {"id": "x", "op": "xor", "args": ["sh", "cat"]},
      {"id": "p", "op": "xor_reduce", "args": ["all"]},
      {"id": "n", "op": "neg", "args": ["x"]},
      {"id": "lt", "op": "ult", "args": ["hi", "b"]},
      {"id": "m", "op": "mux", "args": ["lt", "n", "x"]},
      {"op": "output", "args": {"o": "m"}}]}])",
                                 false);
  const std::string& v = c.verilog;
  CHECK(contains(v, "assign hi = a[7:4];"));
  CHECK(contains(v, "assign all = a;"));
  CHECK(contains(v, "assign wide = {{4{1'b0}}, b};"));
  CHECK(contains(v, "assign same = wide;"));
  CHECK(contains(v, "assign cat = {hi, same, b};"));
  CHECK(contains(v, "assign k = 16'h1234;"));
  CHECK(contains(v, "assign sh = cat << k;"));
  CHECK(contains(v, "assign p = ^all;"));
  CHECK(contains(v, "assign n = -x;"));
  CHECK(contains(v, "assign lt = hi < b;"));
}

TEST_CASE("keywords and collisions are renamed") {
  const Compiled c = compile(R"([{"name": "K", "ports": {"wire": {"dir": "input", "width": 2},
    "o": {"dir": "output", "width": 2}}, "body": [
      {"id": "assign", "op": "not", "args": ["wire"]},
      {"id": "_Sub_0_o", "op": "not", "args": ["assign"]},
      {"id": ["r"], "op": "instance", "module": "Sub", "args": {"a": "_Sub_0_o"}},
      {"op": "output", "args": {"o": "r"}}]},
    {"name": "Sub", "ports": {"a": {"dir": "input", "width": 2}, "o": {"dir": "output", "width": 2}},
     "body": [{"op": "output", "args": {"o": "a"}}]}])");
  const std::string& v = c.verilog;
  CHECK(contains(v, "input  [1:0] wire_,"));
  CHECK(contains(v, "assign assign_ = ~wire_;"));
  CHECK(contains(v, ".o (_Sub_0_o)"));
  CHECK(contains(v, "assign _Sub_0_o_ = ~assign_;"));
  CHECK(contains(v, ".a (_Sub_0_o_)"));
}

TEST_CASE("emitted wire widths follow the inferred widths") {
  const std::regex decl(R"((wire|reg) +(\[(\d+):0\])? *([A-Za-z_][A-Za-z0-9_$]*);)");
  std::size_t seen = 0;
  for (const auto& path : testing::corpus_files(CPPL_TEST_DATA "/corpus")) {
    INFO(path);
    const Design d = testing::load_design_file(path);
    const Compiled c = *compile_design(d, false);
    const auto widths = infer_design(d).value();
    for (const auto& m : c.netlist.modules) {
      const auto names = detail::assign_names(c.netlist).at(m.name);
      std::map<std::string, std::string> back;
      for (const auto& [id, name] : names.nets) back[name] = id;
      const auto start = c.verilog.find("module " + names.module + "(");
      const auto stop = c.verilog.find("endmodule", start);
      const std::string text = c.verilog.substr(start, stop - start);
      for (auto it = std::sregex_iterator(text.begin(), text.end(), decl); it != std::sregex_iterator(); ++it) {
        const std::string name = (*it)[4];
        const Width w = (*it)[3].matched ? static_cast<Width>(std::stoul((*it)[3])) + 1 : 1;
        REQUIRE(back.count(name));
        CHECK(widths.at(m.name).at(back.at(name)) == w);
        ++seen;
      }
    }
  }
  CHECK(seen > 100);
}

TEST_CASE("emission is deterministic") {
  for (const auto& path : testing::corpus_files(CPPL_TEST_DATA "/corpus")) {
    const Design d = testing::load_design_file(path);
    const Compiled a = *compile_design(d);
    const Compiled b = *compile_design(testing::load_design_file(path));
    CHECK(a.verilog == b.verilog);
    CHECK(a.circt == b.circt);
  }
}

TEST_CASE("compile reports check failures") {
  auto d = parse_design(R"([{"name": "M", "ports": {"o": {"dir": "output", "width": 1}}, "body": []}])");
  REQUIRE(d.ok());
  auto c = compile_design(*d);
  REQUIRE_FALSE(c.ok());
  CHECK(c.diagnostics()[0].code == Code::MISSING_OUTPUT);
}
