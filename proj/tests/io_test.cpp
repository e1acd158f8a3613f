#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "fgg/conjunction.hpp"
#include "fgg/io.hpp"
#include "test_support.hpp"

using namespace fgg;
using namespace fggtest;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kFixtureDir = std::string(FGG_SOURCE_DIR) + "/fixtures";

}  // namespace

TEST_CASE("the bundled HMM fixture parses to the expected grammar") {
  FGG g = io::parse_fgg(slurp(kFixtureDir + "/hmm.fgg.json"));
  CHECK(g.start == "S");
  CHECK(g.rules.size() == 3);
  CHECK(g.nonterminals == std::vector<Label>{"S", "X"});
  CHECK(classify_recursion(g) == RecursionClass::linear);
  CHECK(std::abs(solve_sum_product(g, SemiringId::real).z - 1.0) < 1e-9);
}

TEST_CASE("serialization round-trips structurally") {
  std::vector<FGG> grammars = {fixtures::hmm_fgg(),
                               fixtures::geometric_fgg(0.5, 0.5),
                               fixtures::example9_fgg()};
  Rng rng(71);
  for (int i = 0; i < 5; ++i)
    grammars.push_back(random_nonrecursive_fgg(rng).g);
  for (const FGG& g : grammars) {
    std::string text = io::serialize(g);
    FGG back = io::parse_fgg(text);
    CHECK(io::serialize(back) == text);
    CHECK(back.rules == g.rules);
    CHECK(back.start == g.start);
  }
}

TEST_CASE("serialization is byte-stable") {
  FGG g = fixtures::hmm_fgg();
  CHECK(io::serialize(g) == io::serialize(fixtures::hmm_fgg()));
}

TEST_CASE("the conjoined golden fixture matches byte for byte") {
  fixtures::HmmParams p = fixtures::default_hmm_params();
  FGG conj = conjoin(fixtures::hmm_fgg(p),
                     fixtures::hmm_string_query(p, {"the", "dog"}));
  CHECK(io::serialize(conj) == slurp(kFixtureDir + "/hmm_conj_the_dog.fgg.json"));
}

TEST_CASE("parse errors carry a JSON path") {
  // A factor on a nonterminal label.
  FGG g = fixtures::geometric_fgg(0.5, 0.5);
  io::json doc = io::json::parse(io::serialize(g));
  doc["body"]["edge_labels"]["X"]["factor"] = {{"constant", 1.0}};
  try {
    io::parse(doc.dump());
    FAIL("expected ParseError");
  } catch (const error& e) {
    CHECK(e.code() == errc::parse_error);
    CHECK(std::string(e.what()).find("$.body") != std::string::npos);
  }
}

TEST_CASE("missing keys are reported at their path") {
  try {
    io::parse(R"({"format_version":"fgg/1","kind":"fgg","body":{}})");
    FAIL("expected ParseError");
  } catch (const error& e) {
    CHECK(std::string(e.what()).find("$.body") != std::string::npos);
    CHECK(std::string(e.what()).find("node_labels") != std::string::npos);
  }
}

TEST_CASE("strict mode rejects unknown keys, lenient mode warns") {
  FGG g = fixtures::geometric_fgg(0.5, 0.5);
  io::json doc = io::json::parse(io::serialize(g));
  doc["body"]["extra_field"] = 42;
  CHECK_THROWS_AS(io::parse(doc.dump(), true), error);
  io::ParsedDocument parsed = io::parse(doc.dump(), false);
  REQUIRE(parsed.warnings.size() == 1);
  CHECK(parsed.warnings[0].find("extra_field") != std::string::npos);
}

TEST_CASE("unsupported versions and kinds are rejected") {
  CHECK_THROWS_AS(
      io::parse(R"({"format_version":"fgg/2","kind":"fgg","body":{}})"),
      error);
  CHECK_THROWS_AS(
      io::parse(R"({"format_version":"fgg/1","kind":"mystery","body":{}})"),
      error);
}

TEST_CASE("an empty grammar serializes minimally and reparses") {
  FGG g;
  g.space.add_edge_label("S", {});
  g.nonterminals = {"S"};
  g.start = "S";
  std::string text = io::serialize(g);
  FGG back = io::parse_fgg(text);
  CHECK(back.rules.empty());
  CHECK(io::serialize(back) == text);
}

TEST_CASE("factor graph documents round-trip with provenance") {
  FGG g = fixtures::example9_fgg();
  CompiledFactorGraph c = compile(g);
  io::FactorGraphDoc doc = io::to_document(c);
  std::string text = io::serialize(doc);
  io::ParsedDocument back = io::parse(text);
  REQUIRE(back.kind == "factorgraph");
  const auto& fd = std::get<io::FactorGraphDoc>(back.value);
  CHECK(fd.fragment.graph.nodes.size() == c.graph.nodes.size());
  CHECK(fd.fragment.graph.edges.size() == c.graph.edges.size());
  CHECK(fd.provenance.size() == c.provenance.size());
  CHECK(io::serialize(fd) == text);
}

TEST_CASE("pfg, dgm, cfd, and spn documents round-trip") {
  PlatedFactorGraph pfg = fixtures::pfg_example();
  std::string pt = io::serialize(pfg);
  io::ParsedDocument pback = io::parse(pt);
  CHECK(io::serialize(std::get<PlatedFactorGraph>(pback.value)) == pt);

  DGM dgm = fixtures::dgm_example();
  std::string dt = io::serialize(dgm);
  io::ParsedDocument dback = io::parse(dt);
  CHECK(io::serialize(std::get<DGM>(dback.value)) == dt);

  CFD cfd;
  cfd.nodes.push_back({"u", CFD::DagNode::Kind::unit, "", "", ""});
  cfd.nodes.push_back({"c", CFD::DagNode::Kind::case_, "x", "u", "u"});
  cfd.root = "c";
  cfd.costs = {{"x", 0.25}};
  std::string ct = io::serialize(cfd);
  io::ParsedDocument cback = io::parse(ct);
  CHECK(io::serialize(std::get<CFD>(cback.value)) == ct);

  SPN spn;
  spn.nodes.push_back({"x", SPN::DagNode::Kind::leaf, "x", "", "", 0, 0});
  spn.nodes.push_back({"nx", SPN::DagNode::Kind::negleaf, "x", "", "", 0, 0});
  spn.nodes.push_back({"s", SPN::DagNode::Kind::sum, "", "x", "nx", 0.3, 0.7});
  spn.root = "s";
  std::string st = io::serialize(spn);
  io::ParsedDocument sback = io::parse(st);
  CHECK(io::serialize(std::get<SPN>(sback.value)) == st);
}
