#include <algorithm>

#include "catch_amalgamated.hpp"
#include "cppl/ir_json.hpp"
#include "cppl/sim.hpp"
#include "support.hpp"

using namespace cppl;

namespace {

Design parse(const std::string& text) {
  auto r = parse_design(text);
  REQUIRE(r.ok());
  return *r;
}

const char* kRegDoc = R"([{"name": "R", "ports": {"d": {"dir": "input", "width": 8}, "clk": {"dir": "input", "width": 1},
  "en": {"dir": "input", "width": 1}, "rst": {"dir": "input", "width": 1}, "o": {"dir": "output", "width": 8}},
  "body": [{"id": "q", "op": "reg", "args": ["d", "clk", "en", "rst"], "resetValue": 0},
           {"op": "output", "args": {"o": "q"}}]}])";

}  // namespace

TEST_CASE("ALU examples") {
  const Design d = parse(testing::kAluDocument);
  const Simulator sim(d);
  auto run = [&](std::uint64_t op, std::uint64_t a, std::uint64_t b) {
    return sim.eval_comb("ALU", sim.make_inputs("ALU", {{"op_code", op}, {"op_a", a}, {"op_b", b}}), {});
  };
  auto r = run(0, 3, 5);
  CHECK(r.at("res") == Value(8, 8));
  CHECK(r.at("zero") == Value(1, 0));
  r = run(1, 5, 3);
  CHECK(r.at("res") == Value(8, 2));
  CHECK(r.at("zero") == Value(1, 0));
  r = run(2, 0, 255);
  CHECK(r.at("res") == Value(8, 0));
  CHECK(r.at("zero") == Value(1, 1));
  CHECK(eval_comb(d, "Adder8", {{"a", Value(8, 200)}, {"b", Value(8, 100)}}).at("sum") == Value(8, 44));
}

TEST_CASE("ALU matches the oracle on random operands") {
  const Design d = parse(testing::kAluDocument);
  const Simulator sim(d);
  testing::Rng rng(64);
  for (unsigned op = 0; op < 4; ++op) {
    for (int i = 0; i < 256; ++i) {
      const unsigned a = rng() % 256;
      const unsigned b = rng() % 256;
      const auto out = sim.eval_comb("ALU", sim.make_inputs("ALU", {{"op_code", op}, {"op_a", a}, {"op_b", b}}), {});
      const auto want = testing::alu_oracle(op, a, b);
      REQUIRE(out.at("res") == Value(8, want.res));
      REQUIRE(out.at("zero") == Value(1, want.zero));
    }
  }
}

TEST_CASE("register update") {
  const Design d = parse(kRegDoc);
  const Simulator sim(d);
  SimState s = sim.initial_state("R");
  CHECK(s.regs.at("q") == Value(8, 0));
  auto in = [&](std::uint64_t dv, std::uint64_t en, std::uint64_t rst) {
    return sim.make_inputs("R", {{"d", dv}, {"clk", 0}, {"en", en}, {"rst", rst}});
  };

  auto load = sim.step("R", in(7, 1, 0), s);
  CHECK(load.outputs.at("o") == Value(8, 0));
  CHECK(load.state.regs.at("q") == Value(8, 7));

  auto hold = sim.step("R", in(9, 0, 0), load.state);
  CHECK(hold.outputs.at("o") == Value(8, 7));
  CHECK(hold.state == load.state);

  auto reset = sim.step("R", in(7, 1, 1), hold.state);
  CHECK(reset.state.regs.at("q") == Value(8, 0));

  auto reset_disabled = sim.step("R", in(7, 0, 1), hold.state);
  CHECK(reset_disabled.state.regs.at("q") == Value(8, 0));
}

TEST_CASE("reset value") {
  const Design d = testing::load_design_file(CPPL_TEST_DATA "/corpus/lfsr.json");
  const Simulator sim(d);
  const std::string top = testing::top_module(d);
  PortValues in;
  for (const auto& [name, w] : sim.input_ports(top)) in.emplace(name, Value(w, name == "rst" ? 1 : 0));
  auto r = sim.step(top, in, sim.initial_state(top));
  REQUIRE(r.state.regs.size() == 1);
  CHECK(r.state.regs.begin()->second.to_hex() == "0x1");
}

TEST_CASE("counter counts") {
  const Design d = testing::load_design_file(CPPL_TEST_DATA "/corpus/counter.json");
  const Simulator sim(d);
  SimState s = sim.initial_state("Counter");
  for (unsigned t = 0; t < 300; ++t) {
    auto r = sim.step("Counter", sim.make_inputs("Counter", {{"clk", 0}, {"en", 1}, {"rst", 0}}), s);
    REQUIRE(r.outputs.at("count") == Value(8, t % 256));
    s = r.state;
  }
}

TEST_CASE("instances keep their own state") {
  const Design d = parse(std::string(R"([{"name": "Top", "ports": {"d": {"dir": "input", "width": 8},
    "clk": {"dir": "input", "width": 1}, "en": {"dir": "input", "width": 1}, "rst": {"dir": "input", "width": 1},
    "o": {"dir": "output", "width": 8}}, "body": [
      {"id": ["x"], "op": "instance", "module": "R", "args": {"d": "d", "clk": "clk", "en": "en", "rst": "rst"}},
      {"id": ["y"], "op": "instance", "module": "R", "args": {"d": "x", "clk": "clk", "en": "en", "rst": "rst"}},
      {"op": "output", "args": {"o": "y"}}]},)") +
                         std::string(kRegDoc).substr(1));
  const Simulator sim(d);
  SimState s = sim.initial_state("Top");
  CHECK(s.instances.count("R_0"));
  CHECK(s.instances.count("R_1"));
  std::vector<std::uint64_t> seen;
  for (std::uint64_t v : {11, 22, 33, 44}) {
    auto r = sim.step("Top", sim.make_inputs("Top", {{"d", v}, {"clk", 0}, {"en", 1}, {"rst", 0}}), s);
    seen.push_back(r.outputs.at("o").to_u64());
    s = r.state;
  }
  CHECK(seen == std::vector<std::uint64_t>{0, 0, 11, 22});
}

TEST_CASE("register order does not matter") {
  testing::Rng rng(0x5117);
  int shuffled = 0;
  for (int i = 0; i < 200; ++i) {
    const Design d = testing::random_module(rng, 10 + rng() % 30);
    Design p = d;
    auto& body = p.modules[0].body;
    std::vector<std::size_t> regs;
    for (std::size_t k = 0; k < body.size(); ++k)
      if (opcode_of(body[k]) == Opcode::reg) regs.push_back(k);
    if (regs.size() < 2) continue;
    // Permute regs among their own slots; retry until clk/en still precede each reg.
    std::vector<BodyItem> items;
    for (auto k : regs) items.push_back(body[k]);
    bool ok = false;
    for (int tries = 0; tries < 20 && !ok; ++tries) {
      std::shuffle(items.begin(), items.end(), rng);
      for (std::size_t j = 0; j < regs.size(); ++j) body[regs[j]] = items[j];
      ok = check_design(p).ok();
    }
    if (!ok) continue;
    ++shuffled;
    const Simulator a(d);
    const Simulator b(p);
    SimState sa = a.initial_state("Rand");
    SimState sb = b.initial_state("Rand");
    for (int t = 0; t < 50; ++t) {
      const PortValues in = testing::random_inputs(rng, a.input_ports("Rand"));
      auto ra = a.step("Rand", in, sa);
      auto rb = b.step("Rand", in, sb);
      REQUIRE(ra.outputs == rb.outputs);
      REQUIRE(ra.state == rb.state);
      sa = ra.state;
      sb = rb.state;
    }
  }
  CHECK(shuffled > 50);
}

TEST_CASE("results stay within their width") {
  testing::Rng rng(0x5118);
  for (int i = 0; i < 100; ++i) {
    const Design d = testing::random_module(rng, 5 + rng() % 30);
    const Simulator sim(d);
    SimState s = sim.initial_state("Rand");
    const auto widths = infer_design(d).value().at("Rand");
    for (int t = 0; t < 20; ++t) {
      auto r = sim.step("Rand", testing::random_inputs(rng, sim.input_ports("Rand")), s);
      for (const auto& p : d.modules[0].outputs()) REQUIRE(r.outputs.at(p.name).width() == p.decl.width);
      for (const auto& [id, v] : r.state.regs) REQUIRE(v.width() == widths.at(id));
      s = r.state;
    }
  }
}

TEST_CASE("simulator contract violations") {
  const Design d = parse(testing::kAluDocument);
  const Simulator sim(d);
  CHECK_THROWS_AS(sim.eval_comb("ALU", {{"op_code", Value(2, 0)}, {"op_a", Value(8, 0)}}, {}), ContractViolation);
  CHECK_THROWS_AS(
      sim.eval_comb("ALU", {{"op_code", Value(3, 0)}, {"op_a", Value(8, 0)}, {"op_b", Value(8, 0)}}, {}),
      ContractViolation);
  CHECK_THROWS_AS(sim.make_inputs("ALU", {{"op_code", 4}}), ContractViolation);
  CHECK_THROWS_AS(sim.eval_comb("Nope", {}, {}), ContractViolation);

  auto bad = parse(R"([{"name": "M", "ports": {"o": {"dir": "output", "width": 1}}, "body": []}])");
  CHECK_THROWS_AS(Simulator(bad), ContractViolation);
}
