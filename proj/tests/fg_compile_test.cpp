#include <catch2/catch_amalgamated.hpp>

#include "fgg/fg_compile.hpp"
#include "test_support.hpp"

using namespace fgg;
using namespace fggtest;

TEST_CASE("cond_one gates exactly-one against all-off") {
  FactorFunction c1 = cond_one(1);
  // Layout: (B, B1), false=0 / true=1, row-major.
  CHECK(c1.table == std::vector<double>{1, 0, 0, 1});
  FactorFunction c2 = cond_one(2);
  auto at = [&](int b, int b1, int b2) { return c2.table[b * 4 + b1 * 2 + b2]; };
  CHECK(at(1, 1, 0) == 1.0);
  CHECK(at(1, 0, 1) == 1.0);
  CHECK(at(1, 0, 0) == 0.0);
  CHECK(at(1, 1, 1) == 0.0);
  CHECK(at(0, 0, 0) == 1.0);
  CHECK(at(0, 1, 0) == 0.0);
  FactorFunction c0 = cond_one(0);
  CHECK(c0.table == std::vector<double>{1, 0});
}

TEST_CASE("cond_one refuses oversized tables") {
  try {
    cond_one(25);
    FAIL("expected TableTooLarge");
  } catch (const error& e) {
    CHECK(e.code() == errc::table_too_large);
  }
}

TEST_CASE("compiling the four-rule example matches its structure") {
  FGG g = fixtures::example9_fgg();
  CompiledFactorGraph c = compile(g);

  // 3 nonterminal switches + 4 rule switches.
  std::size_t b_vars = 0, copies = 0, slots = 0;
  for (const auto& [id, p] : c.provenance) {
    if (p.kind == "B_nonterminal" || p.kind == "B_rule") ++b_vars;
    if (p.kind == "rule_node_copy") ++copies;
    if (p.kind == "nt_slot") ++slots;
  }
  CHECK(b_vars == 7);
  CHECK(copies == 10);  // n_G
  CHECK(slots == 5);    // |type(X)| + |type(Y)|
  CHECK(c.variable_count == 22);

  std::size_t pins = 0, ones = 0, norms = 0, facs = 0, eqs = 0;
  for (const auto& [id, p] : c.provenance) {
    if (p.kind == "pin") ++pins;
    if (p.kind == "cond_one_use" || p.kind == "cond_one_def") ++ones;
    if (p.kind == "cond_normalize") ++norms;
    if (p.kind == "cond_factor") ++facs;
    if (p.kind == "cond_equals_use" || p.kind == "cond_equals_def") ++eqs;
  }
  CHECK(pins == 1);
  CHECK(ones == 5);   // one per nonterminal definition, use-side for X and Y
  CHECK(norms == 15);  // 10 rule copies + 5 endpoint slots
  CHECK(facs == 2);    // f and g
  CHECK(eqs == 10);    // 3+2 use-side + 3+2 definition-side
  CHECK(c.factor_count == pins + ones + norms + facs + eqs);

  // Counting bounds from the construction.
  std::size_t n_g = 10, m_g = 6;
  CHECK(c.variable_count <= 3 + 4 + 2 * n_g);
  CHECK(c.factor_count <= m_g + 2 * n_g + 2 * 3 + 2 * n_g);
}

TEST_CASE("a single constant rule compiles to Z = c") {
  FGG g;
  g.space.add_edge_label("c", {}, FactorFunction::constant(0.35));
  g.space.add_edge_label("S", {});
  g.terminals = {"c"};
  g.nonterminals = {"S"};
  g.start = "S";
  Rule r{"only", "S", {}};
  r.rhs.graph.edges = {{"e", "c", {}}};
  g.rules = {r};
  validate_fgg(g);
  CompiledFactorGraph c = compile(g);
  CHECK(c.variable_count == 2);  // B_S and B_rule
  double z = brute_force_sum_product(c.space, c.graph, SemiringId::real);
  CHECK(rel_diff(z, 0.35) < 1e-12);
}

TEST_CASE("two start rules compile to the sum of their constants") {
  FGG g;
  g.space.add_edge_label("a", {}, FactorFunction::constant(0.3));
  g.space.add_edge_label("b", {}, FactorFunction::constant(0.45));
  g.space.add_edge_label("S", {});
  g.terminals = {"a", "b"};
  g.nonterminals = {"S"};
  g.start = "S";
  Rule r1{"r1", "S", {}};
  r1.rhs.graph.edges = {{"e", "a", {}}};
  Rule r2{"r2", "S", {}};
  r2.rhs.graph.edges = {{"e", "b", {}}};
  g.rules = {r1, r2};
  validate_fgg(g);
  CompiledFactorGraph c = compile(g);
  double z = brute_force_sum_product(c.space, c.graph, SemiringId::real);
  CHECK(rel_diff(z, 0.75) < 1e-12);
}

TEST_CASE("compiling the example with random tables preserves Z") {
  Rng rng(51);
  for (int round = 0; round < 5; ++round) {
    FGG g = fixtures::example9_fgg(random_table(rng, 4, 0.0),
                                   random_table(rng, 4, 0.0));
    CompileVerifyReport rep = verify_compile(g);
    CHECK(rep.rel_diff < 1e-12);
    if (round == 0) {
      // Cross-check the verifier's elimination against plain brute force.
      CompiledFactorGraph c = compile(g);
      double zb = brute_force_sum_product(c.space, c.graph, SemiringId::real);
      CHECK(rel_diff(zb, rep.z_compiled) < 1e-10);
    }
  }
}

TEST_CASE("compilation rejects reentrant grammars") {
  try {
    compile(fixtures::hmm_fgg());
    FAIL("expected ReentrantInput");
  } catch (const error& e) {
    CHECK(e.code() == errc::reentrant_input);
  }
}

TEST_CASE("invalid switch configurations carry zero weight") {
  FGG g = fixtures::example9_fgg();
  CompiledFactorGraph c = compile(g);
  std::size_t bool_idx = 0;

  // All switches on is not a derivation: pi1 and pi2 both active violates
  // CondOne at S.
  Assignment xi;
  for (const Node& n : c.graph.nodes)
    xi.values[n.id] = n.label == c.bool_label ? 1 : 0;
  CHECK(assignment_weight(c.space, c.graph, xi) == 0.0);

  // All switches off violates the start pin.
  for (const Node& n : c.graph.nodes)
    if (n.label == c.bool_label) xi.values[n.id] = 0;
  CHECK(assignment_weight(c.space, c.graph, xi) == 0.0);
  (void)bool_idx;
}

TEST_CASE("unused clusters sum out to one") {
  // Weight of a valid B-configuration times the used clusters' factor
  // product must equal the full graph contribution: pin the derivation
  // pi2-pi4 and check that summing over the unused pi1/pi3/X clusters
  // changes nothing.
  FGG g = fixtures::example9_fgg();
  CompiledFactorGraph c = compile(g);
  // Z restricted to the pi2-pi4 derivation: add pins forcing B_pi2/B_pi4
  // true and B_pi1/B_pi3 false.
  LabelSpace s = c.space;
  Hypergraph h = c.graph;
  auto pin = [&](const std::string& var, int value) {
    std::vector<double> t = {value == 0 ? 1.0 : 0.0, value == 1 ? 1.0 : 0.0};
    Label l = "testpin:" + var;
    s.add_edge_label(l, {c.bool_label}, FactorFunction::dense(t));
    h.edges.push_back({l, l, {var}});
  };
  pin("B@pi1", 0);
  pin("B@pi2", 1);
  pin("B@pi3", 0);
  pin("B@pi4", 1);
  double restricted = brute_force_sum_product(s, h, SemiringId::real);
  // The pi2-pi4 derivation's own sum-product.
  double direct = 0.0;
  const auto& gt = g.space.factors.at("g").table;
  for (double v : gt) direct += v;
  CHECK(rel_diff(restricted, direct) < 1e-12);
}

TEST_CASE("random nonreentrant grammars compile equivalently") {
  Rng rng(52);
  for (int round = 0; round < 25; ++round) {
    FGG g = random_nonreentrant_fgg(rng);
    CompileVerifyReport rep = verify_compile(g);
    CHECK(rep.rel_diff < 1e-9);

    CompiledFactorGraph c = compile(g);
    std::size_t n_g = 0, m_g = 0, type_sum = 0;
    for (const Rule& r : g.rules) {
      n_g += r.rhs.graph.nodes.size();
      m_g += r.rhs.graph.edges.size();
    }
    for (const Label& x : g.nonterminals)
      type_sum += g.space.signature_of(x).size();
    CHECK(c.variable_count ==
          g.nonterminals.size() + g.rules.size() + n_g + type_sum);
    CHECK(c.variable_count <=
          g.nonterminals.size() + g.rules.size() + 2 * n_g);
    CHECK(c.factor_count <=
          m_g + 2 * n_g + 2 * g.nonterminals.size() + 2 * n_g);
  }
}
