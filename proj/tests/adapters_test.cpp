#include <catch2/catch_amalgamated.hpp>

#include "fgg/adapters.hpp"
#include "fgg/conjunction.hpp"
#include "fgg/inference.hpp"
#include "test_support.hpp"

using namespace fgg;
using namespace fggtest;

TEST_CASE("the two-plate example converts to the five rule families") {
  PlatedFactorGraph pfg = fixtures::pfg_example(2, 3);
  FGG g = pfg_to_fgg(pfg);
  // A^0..A^J over (X,Y), B^0..B^I over (X), and the top rule.
  CHECK(g.rules.size() == (3 + 1) + (2 + 1) + 1);
  std::map<std::string, int> lhs_counts;
  for (const Rule& r : g.rules) lhs_counts[r.lhs]++;
  CHECK(lhs_counts[g.start] == 1);
  // Inner chain carries both frontier variables.
  CHECK(g.space.signature_of("A^0").size() == 2);
  CHECK(g.space.signature_of("B^0").size() == 1);
  CHECK(classify_recursion(g) == RecursionClass::nonrecursive);
}

TEST_CASE("plate-free factor graphs convert to one rule") {
  PlatedFactorGraph pfg = fixtures::pfg_example(2, 2);
  pfg.plates.clear();
  pfg.node_plates.clear();
  pfg.edge_plates.clear();
  pfg.counts.clear();
  FGG g = pfg_to_fgg(pfg);
  REQUIRE(g.rules.size() == 1);
  CHECK(g.rules[0].rhs.graph.nodes.size() == 2);
  CHECK(g.rules[0].rhs.graph.edges.size() == 3);
}

TEST_CASE("the RBM pattern is not convertible") {
  try {
    pfg_to_fgg(fixtures::rbm_pfg());
    FAIL("expected NotConvertible");
  } catch (const error& e) {
    CHECK(e.code() == errc::not_convertible);
  }
}

TEST_CASE("PFG conversion matches brute force on the unrolled graph") {
  for (auto [ci, cj] : std::vector<std::pair<int, int>>{
           {1, 1}, {2, 1}, {1, 3}, {2, 2}, {3, 2}}) {
    PlatedFactorGraph pfg = fixtures::pfg_example(ci, cj);
    FGG g = pfg_to_fgg(pfg);
    double z_fgg = solve_sum_product(g, SemiringId::real).z;
    double z_direct =
        brute_force_sum_product(pfg.space, unroll(pfg), SemiringId::real);
    CHECK(rel_diff(z_fgg, z_direct) < 1e-9);
  }
}

namespace {

PlatedFactorGraph random_chain_pfg(Rng& rng) {
  // A convertible family: plate I holds a chain segment linked to an
  // outside anchor variable.
  PlatedFactorGraph pfg;
  pfg.space.add_node_label("V", {"0", "1"});
  pfg.space.add_edge_label("un", {"V"},
                           FactorFunction::dense(random_table(rng, 2, 0.0)));
  pfg.space.add_edge_label("bi", {"V", "V"},
                           FactorFunction::dense(random_table(rng, 4, 0.0)));
  pfg.base.nodes = {{"a", "V"}, {"b", "V"}};
  pfg.base.edges = {{"ea", "un", {"a"}},
                    {"eab", "bi", {"a", "b"}},
                    {"eb", "un", {"b"}}};
  pfg.plates = {"I"};
  pfg.node_plates = {{"a", {}}, {"b", {"I"}}};
  pfg.edge_plates = {{"ea", {}}, {"eab", {"I"}}, {"eb", {"I"}}};
  pfg.counts = {{"I", irand(rng, 1, 3)}};
  validate_pfg(pfg);
  return pfg;
}

}  // namespace

TEST_CASE("random convertible PFGs agree with their unrollings") {
  Rng rng(61);
  for (int round = 0; round < 20; ++round) {
    PlatedFactorGraph pfg = random_chain_pfg(rng);
    FGG g = pfg_to_fgg(pfg);
    double z_fgg = solve_sum_product(g, SemiringId::real).z;
    double z_direct =
        brute_force_sum_product(pfg.space, unroll(pfg), SemiringId::real);
    CHECK(rel_diff(z_fgg, z_direct) < 1e-9);
  }
}

TEST_CASE("DGM conversion generates exactly the n-step unrolling") {
  DGM dgm = fixtures::dgm_example();
  for (int n : {2, 3, 4}) {
    FGG g = dgm_to_fgg(dgm, n);
    auto ds = enumerate_all(g);
    REQUIRE(ds.size() == 1);
    Hypergraph derived = derive(g, ds[0]);
    Hypergraph direct = unroll(dgm, n);
    CHECK(derived.nodes.size() == direct.nodes.size());
    CHECK(derived.edges.size() == direct.edges.size());
    std::map<Label, int> a, b;
    for (const Edge& e : derived.edges) a[e.label]++;
    for (const Edge& e : direct.edges) b[e.label]++;
    CHECK(a == b);
  }
}

TEST_CASE("DGM n=2 matches the prologue-epilogue composition") {
  DGM dgm = fixtures::dgm_example();
  FGG g = dgm_to_fgg(dgm, 2);
  // 10 h2-copy nodes + 5 h1 + 5 h3; edges: 3 slices * 6 + 3 cross sets * 4.
  Hypergraph direct = unroll(dgm, 2);
  CHECK(direct.nodes.size() == 20);
  CHECK(direct.edges.size() == 18 + 12);
  double z_fgg = solve_sum_product(g, SemiringId::real).z;
  double z_direct = eliminate_sum_product(dgm.space, direct);
  CHECK(rel_diff(z_fgg, z_direct) < 1e-9);
}

TEST_CASE("a DGM without recurrent edges factorizes across slices") {
  Rng rng(62);
  DGM dgm;
  dgm.space.add_node_label("V", {"0", "1"});
  dgm.space.add_edge_label("e", {"V", "V"},
                           FactorFunction::dense(random_table(rng, 4, 0.0)));
  auto slice = [&]() {
    Hypergraph h;
    h.nodes = {{"1", "V"}, {"2", "V"}};
    h.edges = {{"i", "e", {"1", "2"}}};
    return h;
  };
  dgm.h1 = slice();
  dgm.h2 = slice();
  dgm.h3 = slice();
  dgm.e12 = {{"1", "1", "e"}};
  dgm.e23 = {{"2", "2", "e"}};
  // e22 empty: the A-rules carry no externals.
  int n = 3;
  FGG g = dgm_to_fgg(dgm, n);
  for (const Rule& r : g.rules)
    if (r.lhs != "S" && r.lhs != g.start)
      CHECK((r.rhs.externals.empty()));
  double z_fgg = solve_sum_product(g, SemiringId::real).z;
  double z_direct =
      brute_force_sum_product(dgm.space, unroll(dgm, n), SemiringId::real);
  CHECK(rel_diff(z_fgg, z_direct) < 1e-9);
}

TEST_CASE("random DGMs agree with their unrollings") {
  Rng rng(63);
  for (int round = 0; round < 10; ++round) {
    DGM dgm;
    dgm.space.add_node_label("V", {"0", "1"});
    dgm.space.add_edge_label("e1", {"V", "V"},
                             FactorFunction::dense(random_table(rng, 4, 0.0)));
    dgm.space.add_edge_label("e2", {"V", "V"},
                             FactorFunction::dense(random_table(rng, 4, 0.0)));
    auto slice = [&]() {
      Hypergraph h;
      int k = irand(rng, 2, 3);
      for (int i = 1; i <= k; ++i)
        h.nodes.push_back({std::to_string(i), "V"});
      int edges = irand(rng, 1, 2);
      for (int e = 0; e < edges; ++e)
        h.edges.push_back({"i" + std::to_string(e),
                           irand(rng, 0, 1) ? "e1" : "e2",
                           {std::to_string(irand(rng, 1, k)),
                            std::to_string(irand(rng, 1, k))}});
      return h;
    };
    dgm.h1 = slice();
    dgm.h2 = slice();
    dgm.h3 = slice();
    int k2 = (int)dgm.h2.nodes.size();
    auto cross = [&](int from_max, int to_max) {
      std::vector<DGM::CrossEdge> out;
      int c = irand(rng, 1, 2);
      for (int i = 0; i < c; ++i)
        out.push_back({std::to_string(irand(rng, 1, from_max)),
                       std::to_string(irand(rng, 1, to_max)),
                       irand(rng, 0, 1) ? "e1" : "e2"});
      return out;
    };
    dgm.e12 = cross((int)dgm.h1.nodes.size(), k2);
    dgm.e22 = cross(k2, k2);
    dgm.e23 = cross(k2, (int)dgm.h3.nodes.size());
    validate_dgm(dgm);
    int n = irand(rng, 2, 4);
    FGG g = dgm_to_fgg(dgm, n);
    double z_fgg = solve_sum_product(g, SemiringId::real).z;
    double z_direct =
        brute_force_sum_product(dgm.space, unroll(dgm, n), SemiringId::real);
    CHECK(rel_diff(z_fgg, z_direct) < 1e-9);
  }
}

namespace {

CFD small_cfd() {
  // case(x) over (factor(unit, case(y) over (unit, empty)), unit)
  CFD cfd;
  cfd.nodes.push_back({"u", CFD::DagNode::Kind::unit, "", "", ""});
  cfd.nodes.push_back({"dead", CFD::DagNode::Kind::empty, "", "", ""});
  cfd.nodes.push_back({"cy", CFD::DagNode::Kind::case_, "y", "u", "dead"});
  cfd.nodes.push_back({"f", CFD::DagNode::Kind::factor, "", "u", "cy"});
  cfd.nodes.push_back({"cx", CFD::DagNode::Kind::case_, "x", "f", "u"});
  cfd.root = "cx";
  cfd.costs = {{"x", 0.5}, {"y", 1.25}};
  return cfd;
}

}  // namespace

TEST_CASE("CFD evaluation follows the case/factor/unit/empty table") {
  CFD unit_only;
  unit_only.nodes.push_back({"u", CFD::DagNode::Kind::unit, "", "", ""});
  unit_only.root = "u";
  CHECK(eval_cfd(unit_only) == 1.0);
  std::map<std::string, int> empty_xi;
  CHECK(eval_cfd(unit_only, &empty_xi) == 1.0);

  CFD empty_only;
  empty_only.nodes.push_back({"e", CFD::DagNode::Kind::empty, "", "", ""});
  empty_only.root = "e";
  CHECK(eval_cfd(empty_only) == 0.0);

  CFD case_over_units;
  case_over_units.nodes.push_back({"u", CFD::DagNode::Kind::unit, "", "", ""});
  case_over_units.nodes.push_back(
      {"c", CFD::DagNode::Kind::case_, "x", "u", "u"});
  case_over_units.root = "c";
  case_over_units.costs = {{"x", 0.0}};
  CHECK(eval_cfd(case_over_units) == Catch::Approx(2.0));
  std::map<std::string, int> xi1 = {{"x", 1}}, xi0 = {{"x", 0}};
  CHECK(eval_cfd(case_over_units, &xi1) == Catch::Approx(1.0));
  CHECK(eval_cfd(case_over_units, &xi0) == Catch::Approx(1.0));
}

TEST_CASE("CFD conversion preserves Z and constrained values") {
  CFD cfd = small_cfd();
  FGG g = cfd_to_fgg(cfd);
  double z = solve_sum_product(g, SemiringId::real).z;
  CHECK(rel_diff(z, eval_cfd(cfd)) < 1e-12);

  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      std::map<std::string, int> xi = {{"x", x}, {"y", y}};
      FGG constraint = cfd_constraint_fgg(cfd, xi);
      double q = solve_sum_product(conjoin(g, constraint), SemiringId::real).z;
      CHECK(rel_diff(q, eval_cfd(cfd, &xi)) < 1e-12);
    }
}

TEST_CASE("an empty branch contributes zero") {
  CFD cfd = small_cfd();
  // Reaching `dead` requires x=1 (into the factor) and y=0.
  std::map<std::string, int> xi = {{"x", 1}, {"y", 0}};
  CHECK(eval_cfd(cfd, &xi) == 0.0);
  FGG g = cfd_to_fgg(cfd);
  FGG constraint = cfd_constraint_fgg(cfd, xi);
  CHECK(solve_sum_product(conjoin(g, constraint), SemiringId::real).z == 0.0);
}

TEST_CASE("SPN evaluation and conversion agree") {
  SPN spn;
  spn.nodes.push_back({"x", SPN::DagNode::Kind::leaf, "x", "", "", 0, 0});
  spn.nodes.push_back({"nx", SPN::DagNode::Kind::negleaf, "x", "", "", 0, 0});
  spn.nodes.push_back(
      {"s", SPN::DagNode::Kind::sum, "", "x", "nx", 0.3, 0.7});
  spn.root = "s";
  validate_spn(spn);
  std::map<std::string, int> xi1 = {{"x", 1}}, xi0 = {{"x", 0}};
  CHECK(eval_spn(spn, xi1) == Catch::Approx(0.3));
  CHECK(eval_spn(spn, xi0) == Catch::Approx(0.7));

  FGG g = spn_to_fgg(spn);
  CHECK(g.rules.size() == 4);  // leaf, negleaf, two sum branches
  double z = solve_sum_product(g, SemiringId::real).z;
  CHECK(rel_diff(z, 1.0) < 1e-12);
  for (auto* xi : {&xi1, &xi0}) {
    FGG constraint = spn_constraint_fgg(spn, *xi);
    double q = solve_sum_product(conjoin(g, constraint), SemiringId::real).z;
    CHECK(rel_diff(q, eval_spn(spn, *xi)) < 1e-12);
  }
}

TEST_CASE("a lone leaf evaluates and converts trivially") {
  SPN spn;
  spn.nodes.push_back({"x", SPN::DagNode::Kind::leaf, "x", "", "", 0, 0});
  spn.root = "x";
  std::map<std::string, int> xi = {{"x", 1}};
  CHECK(eval_spn(spn, xi) == 1.0);
  FGG g = spn_to_fgg(spn);
  FGG constraint = spn_constraint_fgg(spn, xi);
  CHECK(solve_sum_product(conjoin(g, constraint), SemiringId::real).z == 1.0);
}

TEST_CASE("products of same-scope sums match the evaluator everywhere") {
  Rng rng(64);
  for (int round = 0; round < 10; ++round) {
    SPN spn;
    double l1 = urand(rng, 0.1, 1.0), l2 = urand(rng, 0.1, 1.0);
    double m1 = urand(rng, 0.1, 1.0), m2 = urand(rng, 0.1, 1.0);
    spn.nodes.push_back({"x", SPN::DagNode::Kind::leaf, "x", "", "", 0, 0});
    spn.nodes.push_back({"nx", SPN::DagNode::Kind::negleaf, "x", "", "", 0, 0});
    spn.nodes.push_back({"s1", SPN::DagNode::Kind::sum, "", "x", "x", l1, l2});
    spn.nodes.push_back({"s2", SPN::DagNode::Kind::sum, "", "x", "x", m1, m2});
    spn.nodes.push_back(
        {"p", SPN::DagNode::Kind::product, "", "s1", "s2", 0, 0});
    spn.root = "p";
    validate_spn(spn);
    FGG g = spn_to_fgg(spn);
    double z = solve_sum_product(g, SemiringId::real).z;
    double direct = 0.0;
    for (int x = 0; x < 2; ++x) {
      std::map<std::string, int> xi = {{"x", x}};
      direct += eval_spn(spn, xi);
      FGG constraint = spn_constraint_fgg(spn, xi);
      double q = solve_sum_product(conjoin(g, constraint), SemiringId::real).z;
      CHECK(rel_diff(q, eval_spn(spn, xi)) < 1e-12);
    }
    CHECK(rel_diff(z, direct) < 1e-12);
    (void)spn.nodes[1];
  }
}

TEST_CASE("polarity conflicts under a product are invalid") {
  SPN spn;
  spn.nodes.push_back({"x", SPN::DagNode::Kind::leaf, "x", "", "", 0, 0});
  spn.nodes.push_back({"nx", SPN::DagNode::Kind::negleaf, "x", "", "", 0, 0});
  spn.nodes.push_back({"p", SPN::DagNode::Kind::product, "", "x", "nx", 0, 0});
  spn.root = "p";
  try {
    validate_spn(spn);
    FAIL("expected InvalidSPN");
  } catch (const error& e) {
    CHECK(e.code() == errc::invalid_spn);
  }
}

TEST_CASE("scope mismatches under a sum are invalid") {
  SPN spn;
  spn.nodes.push_back({"x", SPN::DagNode::Kind::leaf, "x", "", "", 0, 0});
  spn.nodes.push_back({"y", SPN::DagNode::Kind::leaf, "y", "", "", 0, 0});
  spn.nodes.push_back({"s", SPN::DagNode::Kind::sum, "", "x", "y", 0.5, 0.5});
  spn.root = "s";
  CHECK_THROWS_AS(validate_spn(spn), error);
}
