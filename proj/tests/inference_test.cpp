#include <catch2/catch_amalgamated.hpp>

#include "fgg/conjunction.hpp"
#include "fgg/inference.hpp"
#include "test_support.hpp"

using namespace fgg;
using namespace fggtest;

TEST_CASE("rule_inside on a node-free rhs is the factor constant") {
  FGG g = fixtures::geometric_fgg(0.5, 0.5);
  const Rule* x2 = g.rule_by_id("x2");
  SemiringTable t = rule_inside(g, *x2, {}, SemiringId::real);
  REQUIRE(t.values.size() == 1);
  CHECK(t.values[0] == Catch::Approx(0.5));
}

namespace {

FGG unary_rule_grammar(bool external) {
  FGG g;
  g.space.add_node_label("T", {"x", "y"});
  g.space.add_edge_label("u", {"T"}, FactorFunction::dense({0.3, 0.4}));
  g.space.add_edge_label("S", {});
  g.space.add_edge_label("A", external ? std::vector<Label>{"T"}
                                       : std::vector<Label>{});
  g.terminals = {"u"};
  g.nonterminals = {"S", "A"};
  g.start = "S";
  Rule a;
  a.id = "a";
  a.lhs = "A";
  a.rhs.graph.nodes = {{"1", "T"}};
  a.rhs.graph.edges = {{"e", "u", {"1"}}};
  if (external) a.rhs.externals = {"1"};
  g.rules = {a};
  return g;
}

}  // namespace

TEST_CASE("rule_inside keeps externals unsummed") {
  FGG g = unary_rule_grammar(true);
  SemiringTable t =
      rule_inside(g, *g.rule_by_id("a"), {}, SemiringId::real);
  REQUIRE(t.values.size() == 2);
  CHECK(t.values[0] == Catch::Approx(0.3));
  CHECK(t.values[1] == Catch::Approx(0.4));
}

TEST_CASE("rule_inside sums or maximizes internal nodes") {
  FGG g = unary_rule_grammar(false);
  SemiringTable tr = rule_inside(g, *g.rule_by_id("a"), {}, SemiringId::real);
  REQUIRE(tr.values.size() == 1);
  CHECK(tr.values[0] == Catch::Approx(0.7));
  SemiringTable tv =
      rule_inside(g, *g.rule_by_id("a"), {}, SemiringId::viterbi);
  CHECK(tv.values[0] == Catch::Approx(0.4));
}

TEST_CASE("rule_inside requires child tables") {
  FGG g = fixtures::geometric_fgg(0.5, 0.5);
  try {
    rule_inside(g, *g.rule_by_id("x1"), {}, SemiringId::real);
    FAIL("expected MissingChildTable");
  } catch (const error& e) {
    CHECK(e.code() == errc::missing_child_table);
  }
}

TEST_CASE("geometric grammar solves by linear elimination and by iteration") {
  for (double p : {0.1, 0.5, 0.9}) {
    double q = 1.0 - p;
    FGG g = fixtures::geometric_fgg(p, q);
    SumProductResult direct = solve_sum_product(g, SemiringId::real);
    CHECK(std::abs(direct.z - q / (1.0 - p)) < 1e-10);
    CHECK(direct.converged);
    bool used_gaussian = false;
    for (const SccReport& r : direct.scc_report)
      if (r.method == "gaussian") {
        used_gaussian = true;
        CHECK(r.iterations == 0);
      }
    CHECK(used_gaussian);

    SolverConfig kleene;
    kleene.method = SolverConfig::Method::kleene;
    SumProductResult iter = solve_sum_product(g, SemiringId::real, kleene);
    CHECK(std::abs(iter.z - q / (1.0 - p)) < 1e-10);
  }
}

TEST_CASE("kleene iteration count grows as the spectral radius nears one") {
  SolverConfig kleene;
  kleene.method = SolverConfig::Method::kleene;
  auto iterations = [&](double p) {
    SumProductResult r =
        solve_sum_product(fixtures::geometric_fgg(p, 1 - p),
                          SemiringId::real, kleene);
    int total = 0;
    for (const SccReport& rep : r.scc_report) total += rep.iterations;
    return total;
  };
  int i1 = iterations(0.1), i5 = iterations(0.5), i9 = iterations(0.9);
  CHECK(i1 < i5);
  CHECK(i5 < i9);
}

TEST_CASE("nonlinear grammar converges to the least root") {
  struct Case {
    double p, q, expect;
  };
  for (const Case& c : {Case{0.4, 0.6, 1.0}, Case{0.6, 0.4, 2.0 / 3.0}}) {
    FGG g = fixtures::quadratic_fgg(c.p, c.q);
    SumProductResult newton = solve_sum_product(g, SemiringId::real);
    CHECK(std::abs(newton.z - c.expect) < 1e-8);
    SolverConfig kcfg;
    kcfg.method = SolverConfig::Method::kleene;
    SumProductResult kleene = solve_sum_product(g, SemiringId::real, kcfg);
    CHECK(std::abs(kleene.z - c.expect) < 1e-8);
    // The larger root (1.5 resp. 1.0) must not be returned.
    double other = (1.0 + std::sqrt(1.0 - 4 * c.p * c.q)) / (2 * c.p);
    CHECK(newton.z < other - 0.1);
    CHECK(kleene.z < other - 0.1);
  }
}

TEST_CASE("newton needs far fewer iterations than kleene") {
  FGG g = fixtures::quadratic_fgg(0.4, 0.6);
  SolverConfig ncfg;
  ncfg.method = SolverConfig::Method::newton;
  ncfg.tol = 1e-12;
  SolverConfig kcfg;
  kcfg.method = SolverConfig::Method::kleene;
  kcfg.tol = 1e-12;
  auto total = [](const SumProductResult& r) {
    int t = 0;
    for (const SccReport& rep : r.scc_report) t += rep.iterations;
    return t;
  };
  int ni = total(solve_sum_product(g, SemiringId::real, ncfg));
  int ki = total(solve_sum_product(g, SemiringId::real, kcfg));
  CHECK(ni * 3 <= ki);
}

TEST_CASE("a normalized HMM sums to one over all lengths") {
  FGG g = fixtures::hmm_fgg();
  SumProductResult r = solve_sum_product(g, SemiringId::real);
  CHECK(r.converged);
  CHECK(std::abs(r.z - 1.0) < 1e-9);

  // Truncated enumeration approaches Z monotonically from below.
  double prev = 0.0;
  for (int depth : {3, 5, 8, 12, 20}) {
    EnumerationResult en = enumerate_derivations(g, depth, 100000);
    double sum = 0.0;
    for (const DerivationTree& d : en.trees)
      sum += brute_force_sum_product(g.space, derive(g, d), SemiringId::real);
    CHECK(sum >= prev - 1e-12);
    CHECK(sum <= r.z + 1e-9);
    prev = sum;
  }
  CHECK(r.z - prev < 1e-6);
}

TEST_CASE("conjunction with a string grammar matches the forward algorithm") {
  fixtures::HmmParams p = fixtures::default_hmm_params();
  FGG g = fixtures::hmm_fgg(p);
  std::vector<std::string> w = {"the", "dog", "dog"};
  FGG conj = conjoin(g, fixtures::hmm_string_query(p, w));
  CHECK(classify_recursion(conj) == RecursionClass::nonrecursive);
  SumProductResult r = solve_sum_product(conj, SemiringId::real);
  CHECK(rel_diff(r.z, forward_algorithm(p, w)) < 1e-9);
}

TEST_CASE("divergent linear grammars report infinity") {
  // Continue weight 1.2: the series 0.5 * sum 1.2^k diverges.
  FGG g = fixtures::geometric_fgg(1.2, 0.5);
  SumProductResult r = solve_sum_product(g, SemiringId::real);
  CHECK_FALSE(r.converged);
  CHECK(std::isinf(r.z));
}

TEST_CASE("improper nonlinear grammars diverge with infinity") {
  // z = z^2 + 1 has no real root; the least solution is infinite.
  FGG g = fixtures::quadratic_fgg(1.0, 1.0);
  SumProductResult r = solve_sum_product(g, SemiringId::real);
  CHECK_FALSE(r.converged);
  CHECK(std::isinf(r.z));
}

TEST_CASE("strict mode raises NonConvergence") {
  SolverConfig cfg;
  cfg.strict = true;
  try {
    solve_sum_product(fixtures::geometric_fgg(1.2, 0.5), SemiringId::real,
                      cfg);
    FAIL("expected NonConvergence");
  } catch (const error& e) {
    CHECK(e.code() == errc::non_convergence);
  }
}

TEST_CASE("solver matches the enumeration oracle on random grammars") {
  Rng rng(31);
  for (int i = 0; i < 60; ++i) {
    RandomFgg rf = random_nonrecursive_fgg(rng);
    SumProductResult r = solve_sum_product(rf.g, SemiringId::real);
    double oracle = oracle_sum_product(rf.g, rf.derivations, SemiringId::real);
    CHECK(rel_diff(r.z, oracle) < 1e-9);
    SumProductResult v = solve_sum_product(rf.g, SemiringId::viterbi);
    double oracle_v =
        oracle_sum_product(rf.g, rf.derivations, SemiringId::viterbi);
    CHECK(rel_diff(v.z, oracle_v) < 1e-9);
    CHECK(r.z >= v.z - 1e-9);
  }
}

TEST_CASE("viterbi derivation of a single-derivation grammar") {
  FGG g = fixtures::example9_fgg();
  std::vector<Rule> rules;
  for (const Rule& r : g.rules)
    if (r.id != "pi2") rules.push_back(r);
  g.rules = rules;  // single derivation pi1-pi3-pi4
  ViterbiResult v = viterbi_derivation(g);
  CHECK(v.tree.rule == "pi1");
  Hypergraph h = derive(g, v.tree);
  CHECK(v.weight ==
        assignment_weight(g.space, h, v.assignment));  // exact equality
  double zv = solve_sum_product(g, SemiringId::viterbi).z;
  CHECK(rel_diff(v.weight, zv) < 1e-9);
}

TEST_CASE("viterbi prefers the shortest geometric derivation") {
  FGG g = fixtures::geometric_fgg(0.5, 0.5);
  ViterbiResult v = viterbi_derivation(g);
  CHECK(v.weight == Catch::Approx(0.5));
  // Tree is s -> x2 directly.
  REQUIRE(v.tree.children.count("1"));
  CHECK(v.tree.children.at("1").rule == "x2");
  CHECK(v.tree.children.at("1").children.empty());
}

TEST_CASE("viterbi on HMM conjunction matches the exhaustive argmax") {
  Rng rng(32);
  fixtures::HmmParams p = fixtures::default_hmm_params();
  // Perturb to continuous random values so the argmax is unique.
  for (double& x : p.transition)
    if (x > 0) x *= urand(rng, 0.9, 1.1);
  for (double& x : p.emission)
    if (x > 0) x *= urand(rng, 0.9, 1.1);
  FGG g = fixtures::hmm_fgg(p);
  std::vector<std::string> w = {"dog", "the", "dog", "the"};
  FGG conj = conjoin(g, fixtures::hmm_string_query(p, w));
  ViterbiResult v = viterbi_derivation(conj);
  auto [best, tags] = viterbi_exhaustive(p, w);
  CHECK(rel_diff(v.weight, best) < 1e-9);

  // Tag sequence: T-labeled derived nodes in path-depth order, dropping
  // the BOS and EOS endpoints.
  Hypergraph h = derive(conj, v.tree);
  std::vector<std::pair<std::size_t, NodeId>> tnodes;
  for (const Node& n : h.nodes)
    if (n.label == "T") tnodes.emplace_back(n.id.size(), n.id);
  std::sort(tnodes.begin(), tnodes.end());
  REQUIRE(tnodes.size() == w.size() + 2);
  for (std::size_t i = 0; i < tags.size(); ++i)
    CHECK(v.assignment.values.at(tnodes[i + 1].second) == tags[i]);
}

TEST_CASE("viterbi fails cleanly on zero sum-products") {
  FGG g = fixtures::geometric_fgg(0.5, 0.0);
  try {
    viterbi_derivation(g);
    FAIL("expected NoDerivation");
  } catch (const error& e) {
    CHECK(e.code() == errc::no_derivation);
  }
}

TEST_CASE("node_distribution pins a single-rule node") {
  FGG g;
  g.space.add_node_label("T", {"x", "y"});
  g.space.add_edge_label("u", {"T"}, FactorFunction::dense({0.3, 0.7}));
  g.space.add_edge_label("S", {});
  g.terminals = {"u"};
  g.nonterminals = {"S"};
  g.start = "S";
  Rule r;
  r.id = "only";
  r.lhs = "S";
  r.rhs.graph.nodes = {{"1", "T"}};
  r.rhs.graph.edges = {{"e", "u", {"1"}}};
  g.rules = {r};
  std::vector<double> dist = node_distribution(g, "only", "1");
  REQUIRE(dist.size() == 2);
  CHECK(dist[0] == Catch::Approx(0.3));
  CHECK(dist[1] == Catch::Approx(0.7));
}

TEST_CASE("second-to-last-tag distribution sums to the HMM partition") {
  fixtures::HmmParams p = fixtures::default_hmm_params();
  FGG g = fixtures::hmm_fgg(p);
  FGG q = second_to_last_query(g);
  REQUIRE(q.rules.size() == 4);
  FGG conj = conjoin(g, q);
  CHECK(classify_recursion(conj) == RecursionClass::linear);
  double z = solve_sum_product(g, SemiringId::real).z;
  // The second-to-last tag is node 1 of the pair of (pi2, pi3).
  std::vector<double> dist =
      node_distribution(conj, pair_label("pi2", "pi3"), "1");
  double total = 0.0;
  for (double v : dist) total += v;
  // Summing the pin over all values restores every derivation of length
  // >= 2; length-1 strings have no second-to-last tag.
  EnumerationResult short_ones = enumerate_derivations(g, 2, 100);
  double short_mass = 0.0;
  for (const DerivationTree& d : short_ones.trees)
    short_mass +=
        brute_force_sum_product(g.space, derive(g, d), SemiringId::real);
  CHECK(rel_diff(total + short_mass, z) < 1e-6);
}

TEST_CASE("node_distribution of an unreachable rule repeats Z") {
  FGG g = fixtures::geometric_fgg(0.5, 0.5);
  g.space.add_node_label("T", {"x", "y"});
  g.space.add_edge_label("Dead", {});
  g.nonterminals.push_back("Dead");
  Rule dead;
  dead.id = "dead";
  dead.lhs = "Dead";
  dead.rhs.graph.nodes = {{"1", "T"}};
  g.rules.push_back(dead);
  validate_fgg(g);
  double z = solve_sum_product(g, SemiringId::real).z;
  std::vector<double> dist = node_distribution(g, "dead", "1");
  for (double v : dist) CHECK(rel_diff(v, z) < 1e-12);
}

TEST_CASE("check_consistency reports small residuals after convergence") {
  FGG g = fixtures::geometric_fgg(0.5, 0.5);
  SumProductResult r = solve_sum_product(g, SemiringId::real);
  ConsistencyReport rep = check_consistency(r, g);
  CHECK(rep.max_residual <= 1e-10);

  SumProductResult rq =
      solve_sum_product(fixtures::quadratic_fgg(0.4, 0.6), SemiringId::real);
  ConsistencyReport repq =
      check_consistency(rq, fixtures::quadratic_fgg(0.4, 0.6));
  CHECK(repq.max_residual <= 10 * 1e-12 + 1e-12);
}

TEST_CASE("check_consistency flags a non-fixed-point") {
  FGG g = fixtures::geometric_fgg(0.5, 0.5);
  SumProductResult r = solve_sum_product(g, SemiringId::real);
  for (auto& [_, t] : r.psi) t.values.assign(t.values.size(), 0.0);
  ConsistencyReport rep = check_consistency(r, g);
  CHECK(rep.max_residual > 0.4);
}

TEST_CASE("the solver fills tables for rule-less nonterminals") {
  FGG g = fixtures::geometric_fgg(0.5, 0.5);
  g.space.add_edge_label("Unused", {});
  g.nonterminals.push_back("Unused");
  validate_fgg(g);
  SumProductResult r = solve_sum_product(g, SemiringId::real);
  REQUIRE(r.psi.count("Unused"));
  CHECK(r.psi.at("Unused").values[0] == 0.0);
  CHECK(std::abs(r.z - 1.0) < 1e-10);
}
