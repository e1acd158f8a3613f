#pragma once

#include <string>
#include <vector>

#include "fgg/adapters.hpp"
#include "fgg/grammar.hpp"

namespace fgg::fixtures {

/// Parameters of the HMM grammar: tag/word alphabets, a row-major
/// transition table p(T2|T1), and an emission table p(W|T). The tag list
/// must contain "BOS" and "EOS".
struct HmmParams {
  std::vector<std::string> tags;
  std::vector<std::string> words;
  std::vector<double> transition;  // |T| x |T|
  std::vector<double> emission;    // |T| x |W|
};

inline HmmParams default_hmm_params() {
  HmmParams p;
  p.tags = {"BOS", "D", "N", "EOS"};
  p.words = {"the", "dog"};
  // Rows for BOS/D/N are proper distributions; EOS is absorbing (all-zero
  // row), so the grammar sums to one over all lengths.
  p.transition = {
      // to: BOS   D     N     EOS        from:
      0.0, 0.6, 0.4, 0.0,  // BOS
      0.0, 0.1, 0.5, 0.4,  // D
      0.0, 0.2, 0.3, 0.5,  // N
      0.0, 0.0, 0.0, 0.0,  // EOS
  };
  p.emission = {
      0.5, 0.5,  // BOS (unused)
      0.8, 0.2,  // D
      0.3, 0.7,  // N
      0.5, 0.5,  // EOS (always followed by a zero transition row)
  };
  return p;
}

inline std::size_t index_of(const std::vector<std::string>& xs,
                            const std::string& x) {
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i] == x) return i;
  fail(errc::unknown_label, x);
}

/// The HMM grammar: S starts a tag chain at BOS, X extends it by one
/// tag/word step or closes it at EOS.
inline FGG hmm_fgg(const HmmParams& p) {
  FGG g;
  g.space.add_node_label("T", p.tags);
  g.space.add_node_label("W", p.words);
  std::vector<double> bos(p.tags.size(), 0.0), eos(p.tags.size(), 0.0);
  bos[index_of(p.tags, "BOS")] = 1.0;
  eos[index_of(p.tags, "EOS")] = 1.0;
  g.space.add_edge_label("bos", {"T"}, FactorFunction::dense(bos));
  g.space.add_edge_label("eos", {"T"}, FactorFunction::dense(eos));
  g.space.add_edge_label("trans", {"T", "T"},
                         FactorFunction::dense(p.transition));
  g.space.add_edge_label("emit", {"T", "W"}, FactorFunction::dense(p.emission));
  g.space.add_edge_label("S", {});
  g.space.add_edge_label("X", {"T"});
  g.terminals = {"bos", "eos", "trans", "emit"};
  g.nonterminals = {"S", "X"};
  g.start = "S";

  Rule pi1;
  pi1.id = "pi1";
  pi1.lhs = "S";
  pi1.rhs.graph.nodes = {{"1", "T"}};
  pi1.rhs.graph.edges = {{"b", "bos", {"1"}}, {"2", "X", {"1"}}};

  Rule pi2;
  pi2.id = "pi2";
  pi2.lhs = "X";
  pi2.rhs.graph.nodes = {{"1", "T"}, {"2", "T"}, {"3", "W"}};
  pi2.rhs.graph.edges = {{"t", "trans", {"1", "2"}},
                         {"e", "emit", {"2", "3"}},
                         {"4", "X", {"2"}}};
  pi2.rhs.externals = {"1"};

  Rule pi3;
  pi3.id = "pi3";
  pi3.lhs = "X";
  pi3.rhs.graph.nodes = {{"1", "T"}, {"2", "T"}};
  pi3.rhs.graph.edges = {{"t", "trans", {"1", "2"}}, {"z", "eos", {"2"}}};
  pi3.rhs.externals = {"1"};

  g.rules = {pi1, pi2, pi3};
  validate_fgg(g);
  return g;
}

inline FGG hmm_fgg() { return hmm_fgg(default_hmm_params()); }

/// The string-observation grammar G_w: same shapes and shared ids as the
/// HMM rules, but its factors only pin each W node to the observed word.
inline FGG hmm_string_query(const HmmParams& p,
                            const std::vector<std::string>& w) {
  FGG g;
  g.space.add_node_label("T", p.tags);
  g.space.add_node_label("W", p.words);
  g.space.add_edge_label("S", {});
  g.nonterminals.push_back("S");
  g.start = "S";
  std::size_t n = w.size();
  for (std::size_t i = 0; i <= n; ++i) {
    Label pos = "pos" + std::to_string(i);
    g.space.add_edge_label(pos, {"T"});
    g.nonterminals.push_back(pos);
  }
  for (std::size_t i = 1; i <= n; ++i) {
    std::vector<double> pin(p.words.size(), 0.0);
    pin[index_of(p.words, w[i - 1])] = 1.0;
    g.space.add_edge_label("obs" + std::to_string(i), {"W"},
                           FactorFunction::dense(pin));
    g.terminals.push_back("obs" + std::to_string(i));
  }

  Rule rs;
  rs.id = "q0";
  rs.lhs = "S";
  rs.rhs.graph.nodes = {{"1", "T"}};
  rs.rhs.graph.edges = {{"2", "pos0", {"1"}}};
  g.rules.push_back(rs);
  for (std::size_t i = 1; i <= n; ++i) {
    Rule r;
    r.id = "q" + std::to_string(i);
    r.lhs = "pos" + std::to_string(i - 1);
    r.rhs.graph.nodes = {{"1", "T"}, {"2", "T"}, {"3", "W"}};
    r.rhs.graph.edges = {{"w", "obs" + std::to_string(i), {"3"}},
                         {"4", "pos" + std::to_string(i), {"2"}}};
    r.rhs.externals = {"1"};
    g.rules.push_back(r);
  }
  Rule re;
  re.id = "q" + std::to_string(n + 1);
  re.lhs = "pos" + std::to_string(n);
  re.rhs.graph.nodes = {{"1", "T"}, {"2", "T"}};
  re.rhs.externals = {"1"};
  g.rules.push_back(re);
  validate_fgg(g);
  return g;
}

/// PCFG in Chomsky normal form: start pin, a binary rule table
/// p(A -> B C), and a lexical table p(A -> w). symbols[0] is the start.
struct PcfgParams {
  std::vector<std::string> symbols;
  std::vector<std::string> words;
  std::vector<double> binary;   // |N|^3, row-major (A, B, C)
  std::vector<double> lexical;  // |N| x |W|
};

inline FGG pcfg_fgg(const PcfgParams& p) {
  FGG g;
  g.space.add_node_label("N", p.symbols);
  g.space.add_node_label("W", p.words);
  std::vector<double> start_pin(p.symbols.size(), 0.0);
  start_pin[0] = 1.0;
  g.space.add_edge_label("isstart", {"N"}, FactorFunction::dense(start_pin));
  g.space.add_edge_label("prod", {"N", "N", "N"},
                         FactorFunction::dense(p.binary));
  g.space.add_edge_label("lex", {"N", "W"}, FactorFunction::dense(p.lexical));
  g.space.add_edge_label("S'", {});
  g.space.add_edge_label("X", {"N"});
  g.terminals = {"isstart", "prod", "lex"};
  g.nonterminals = {"S'", "X"};
  g.start = "S'";

  Rule rs;
  rs.id = "start";
  rs.lhs = "S'";
  rs.rhs.graph.nodes = {{"1", "N"}};
  rs.rhs.graph.edges = {{"p", "isstart", {"1"}}, {"2", "X", {"1"}}};

  Rule rb;
  rb.id = "binary";
  rb.lhs = "X";
  rb.rhs.graph.nodes = {{"1", "N"}, {"2", "N"}, {"3", "N"}};
  rb.rhs.graph.edges = {{"p", "prod", {"1", "2", "3"}},
                        {"4", "X", {"2"}},
                        {"5", "X", {"3"}}};
  rb.rhs.externals = {"1"};

  Rule rl;
  rl.id = "lexical";
  rl.lhs = "X";
  rl.rhs.graph.nodes = {{"1", "N"}, {"2", "W"}};
  rl.rhs.graph.edges = {{"p", "lex", {"1", "2"}}};
  rl.rhs.externals = {"1"};

  g.rules = {rs, rb, rl};
  validate_fgg(g);
  return g;
}

/// Span grammar constraining the PCFG to a string: nonterminals (i,j) split
/// at every k, length-one spans pin the observed word.
inline FGG pcfg_string_query(const PcfgParams& p,
                             const std::vector<std::string>& w) {
  std::size_t n = w.size();
  FGG g;
  g.space.add_node_label("N", p.symbols);
  g.space.add_node_label("W", p.words);
  g.space.add_edge_label("root", {});
  g.nonterminals.push_back("root");
  g.start = "root";
  auto span = [](std::size_t i, std::size_t j) {
    return "sp" + std::to_string(i) + "," + std::to_string(j);
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j <= n; ++j) {
      g.space.add_edge_label(span(i, j), {"N"});
      g.nonterminals.push_back(span(i, j));
    }
  for (std::size_t l = 1; l <= n; ++l) {
    std::vector<double> pin(p.words.size(), 0.0);
    pin[index_of(p.words, w[l - 1])] = 1.0;
    g.space.add_edge_label("obs" + std::to_string(l), {"W"},
                           FactorFunction::dense(pin));
    g.terminals.push_back("obs" + std::to_string(l));
  }

  Rule rs;
  rs.id = "start";
  rs.lhs = "root";
  rs.rhs.graph.nodes = {{"1", "N"}};
  rs.rhs.graph.edges = {{"2", span(0, n), {"1"}}};
  g.rules.push_back(rs);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 2; j <= n; ++j)
      for (std::size_t k = i + 1; k < j; ++k) {
        Rule r;
        r.id = span(i, j) + "@" + std::to_string(k);
        r.lhs = span(i, j);
        r.rhs.graph.nodes = {{"1", "N"}, {"2", "N"}, {"3", "N"}};
        r.rhs.graph.edges = {{"4", span(i, k), {"2"}},
                             {"5", span(k, j), {"3"}}};
        r.rhs.externals = {"1"};
        g.rules.push_back(r);
      }
  for (std::size_t l = 1; l <= n; ++l) {
    Rule r;
    r.id = span(l - 1, l) + "@w";
    r.lhs = span(l - 1, l);
    r.rhs.graph.nodes = {{"1", "N"}, {"2", "W"}};
    r.rhs.graph.edges = {{"p", "obs" + std::to_string(l), {"2"}}};
    r.rhs.externals = {"1"};
    g.rules.push_back(r);
  }
  validate_fgg(g);
  return g;
}

/// The four-rule nonreentrant grammar with factors f(A1,A4) and g(A1,B2)
/// used to exercise the factor-graph compilation; domains and both 2x2
/// tables are parameters.
inline FGG example9_fgg(const std::vector<double>& f_table,
                        const std::vector<double>& g_table,
                        std::size_t dom_a = 2, std::size_t dom_b = 2) {
  FGG g;
  std::vector<std::string> da, db;
  for (std::size_t i = 0; i < dom_a; ++i) da.push_back("a" + std::to_string(i));
  for (std::size_t i = 0; i < dom_b; ++i) db.push_back("b" + std::to_string(i));
  g.space.add_node_label("A", da);
  g.space.add_node_label("B", db);
  g.space.add_edge_label("f", {"A", "A"}, FactorFunction::dense(f_table));
  g.space.add_edge_label("g", {"A", "B"}, FactorFunction::dense(g_table));
  g.space.add_edge_label("S", {});
  g.space.add_edge_label("X", {"A", "B", "A"});
  g.space.add_edge_label("Y", {"A", "B"});
  g.terminals = {"f", "g"};
  g.nonterminals = {"S", "X", "Y"};
  g.start = "S";

  Rule pi1;
  pi1.id = "pi1";
  pi1.lhs = "S";
  pi1.rhs.graph.nodes = {{"1", "A"}, {"2", "B"}, {"4", "A"}};
  pi1.rhs.graph.edges = {{"3", "X", {"1", "2", "4"}}};

  Rule pi2;
  pi2.id = "pi2";
  pi2.lhs = "S";
  pi2.rhs.graph.nodes = {{"1", "A"}, {"2", "B"}};
  pi2.rhs.graph.edges = {{"3", "Y", {"1", "2"}}};

  Rule pi3;
  pi3.id = "pi3";
  pi3.lhs = "X";
  pi3.rhs.graph.nodes = {{"1", "A"}, {"2", "B"}, {"4", "A"}};
  pi3.rhs.graph.edges = {{"f", "f", {"1", "4"}}, {"3", "Y", {"4", "2"}}};
  pi3.rhs.externals = {"1", "2", "4"};

  Rule pi4;
  pi4.id = "pi4";
  pi4.lhs = "Y";
  pi4.rhs.graph.nodes = {{"1", "A"}, {"2", "B"}};
  pi4.rhs.graph.edges = {{"g", "g", {"1", "2"}}};
  pi4.rhs.externals = {"1", "2"};

  g.rules = {pi1, pi2, pi3, pi4};
  validate_fgg(g);
  return g;
}

inline FGG example9_fgg() {
  return example9_fgg({0.1, 0.2, 0.3, 0.4}, {0.1, 0.2, 0.3, 0.4});
}

/// Geometric grammar: S -> X; X -> p X | q, all 0-ary. Z = q / (1 - p).
inline FGG geometric_fgg(double p, double q) {
  FGG g;
  g.space.add_edge_label("p", {}, FactorFunction::constant(p));
  g.space.add_edge_label("q", {}, FactorFunction::constant(q));
  g.space.add_edge_label("S", {});
  g.space.add_edge_label("X", {});
  g.terminals = {"p", "q"};
  g.nonterminals = {"S", "X"};
  g.start = "S";
  Rule s;
  s.id = "s";
  s.lhs = "S";
  s.rhs.graph.edges = {{"1", "X", {}}};
  Rule x1;
  x1.id = "x1";
  x1.lhs = "X";
  x1.rhs.graph.edges = {{"c", "p", {}}, {"1", "X", {}}};
  Rule x2;
  x2.id = "x2";
  x2.lhs = "X";
  x2.rhs.graph.edges = {{"c", "q", {}}};
  g.rules = {s, x1, x2};
  validate_fgg(g);
  return g;
}

/// Quadratic grammar: S -> X; X -> p X X | q. The least solution of
/// z = p z^2 + q is (1 - sqrt(1 - 4 p q)) / (2 p).
inline FGG quadratic_fgg(double p, double q) {
  FGG g;
  g.space.add_edge_label("p", {}, FactorFunction::constant(p));
  g.space.add_edge_label("q", {}, FactorFunction::constant(q));
  g.space.add_edge_label("S", {});
  g.space.add_edge_label("X", {});
  g.terminals = {"p", "q"};
  g.nonterminals = {"S", "X"};
  g.start = "S";
  Rule s;
  s.id = "s";
  s.lhs = "S";
  s.rhs.graph.edges = {{"1", "X", {}}};
  Rule x1;
  x1.id = "x1";
  x1.lhs = "X";
  x1.rhs.graph.edges = {{"c", "p", {}}, {"1", "X", {}}, {"2", "X", {}}};
  Rule x2;
  x2.id = "x2";
  x2.lhs = "X";
  x2.rhs.graph.edges = {{"c", "q", {}}};
  g.rules = {s, x1, x2};
  validate_fgg(g);
  return g;
}

/// The two-plate X--Y example: F(x) outside all plates, H(x,y) in both
/// plates, G(y) in the outer plate only.
inline PlatedFactorGraph pfg_example(int count_i = 2, int count_j = 2) {
  PlatedFactorGraph pfg;
  pfg.space.add_node_label("VX", {"0", "1"});
  pfg.space.add_node_label("VY", {"0", "1"});
  pfg.space.add_edge_label("F", {"VX"}, FactorFunction::dense({0.4, 0.6}));
  pfg.space.add_edge_label(
      "H", {"VX", "VY"}, FactorFunction::dense({0.1, 0.9, 0.7, 0.3}));
  pfg.space.add_edge_label("G", {"VY"}, FactorFunction::dense({0.2, 0.8}));
  pfg.base.nodes = {{"x", "VX"}, {"y", "VY"}};
  pfg.base.edges = {{"eF", "F", {"x"}}, {"eH", "H", {"x", "y"}},
                    {"eG", "G", {"y"}}};
  pfg.plates = {"I", "J"};
  pfg.node_plates = {{"x", {}}, {"y", {"I"}}};
  pfg.edge_plates = {{"eF", {}}, {"eH", {"I", "J"}}, {"eG", {"I"}}};
  pfg.counts = {{"I", count_i}, {"J", count_j}};
  validate_pfg(pfg);
  return pfg;
}

/// Restricted-Boltzmann-machine pattern: two plated layers joined by a
/// fully-plated factor. Not convertible to an FGG.
inline PlatedFactorGraph rbm_pfg(int count_i = 2, int count_j = 2) {
  PlatedFactorGraph pfg;
  pfg.space.add_node_label("VX", {"0", "1"});
  pfg.space.add_node_label("VY", {"0", "1"});
  pfg.space.add_edge_label(
      "Wt", {"VX", "VY"}, FactorFunction::dense({1.0, 2.0, 3.0, 4.0}));
  pfg.base.nodes = {{"x", "VX"}, {"y", "VY"}};
  pfg.base.edges = {{"w", "Wt", {"x", "y"}}};
  pfg.plates = {"I", "J"};
  pfg.node_plates = {{"x", {"I"}}, {"y", {"J"}}};
  pfg.edge_plates = {{"w", {"I", "J"}}};
  pfg.counts = {{"I", count_i}, {"J", count_j}};
  validate_pfg(pfg);
  return pfg;
}

/// The five-node-per-slice dynamic graphical model example; every factor is
/// the same generic binary table.
inline DGM dgm_example() {
  DGM dgm;
  dgm.space.add_node_label("V", {"0", "1"});
  dgm.space.add_edge_label(
      "e", {"V", "V"}, FactorFunction::dense({0.9, 0.3, 0.4, 0.6}));
  auto slice = [&]() {
    Hypergraph h;
    for (int i = 1; i <= 5; ++i)
      h.nodes.push_back({std::to_string(i), "V"});
    std::size_t k = 0;
    for (auto [a, b] : std::vector<std::pair<int, int>>{
             {1, 2}, {2, 3}, {4, 3}, {4, 5}, {4, 1}, {4, 2}})
      h.edges.push_back({"i" + std::to_string(k++), "e",
                         {std::to_string(a), std::to_string(b)}});
    return h;
  };
  dgm.h1 = slice();
  dgm.h2 = slice();
  dgm.h3 = slice();
  for (auto [a, b] : std::vector<std::pair<int, int>>{
           {2, 2}, {3, 2}, {3, 4}, {4, 4}}) {
    dgm.e12.push_back({std::to_string(a), std::to_string(b), "e"});
    dgm.e22.push_back({std::to_string(a), std::to_string(b), "e"});
    dgm.e23.push_back({std::to_string(a), std::to_string(b), "e"});
  }
  validate_dgm(dgm);
  return dgm;
}

}  // namespace fgg::fixtures
