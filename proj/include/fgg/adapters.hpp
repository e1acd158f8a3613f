#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fgg/grammar.hpp"

namespace fgg {

/// Factor graph with replication plates: every node/edge belongs to a set
/// of plates, and each plate carries an unrolling count.
struct PlatedFactorGraph {
  LabelSpace space;
  Hypergraph base;
  std::vector<std::string> plates;
  std::map<NodeId, std::set<std::string>> node_plates;
  std::map<EdgeId, std::set<std::string>> edge_plates;
  std::map<std::string, int> counts;

  std::set<std::string> plates_of_node(const NodeId& v) const {
    auto it = node_plates.find(v);
    return it == node_plates.end() ? std::set<std::string>{} : it->second;
  }
  std::set<std::string> plates_of_edge(const EdgeId& e) const {
    auto it = edge_plates.find(e);
    return it == edge_plates.end() ? std::set<std::string>{} : it->second;
  }
};

inline void validate_pfg(const PlatedFactorGraph& pfg) {
  validate(pfg.space, pfg.base);
  std::set<std::string> declared(pfg.plates.begin(), pfg.plates.end());
  for (const auto& [id, ps] : pfg.node_plates)
    for (const auto& b : ps)
      if (!declared.count(b)) fail(errc::unknown_label, "plate " + b);
  for (const auto& [id, ps] : pfg.edge_plates)
    for (const auto& b : ps)
      if (!declared.count(b)) fail(errc::unknown_label, "plate " + b);
  for (const auto& b : pfg.plates) {
    auto it = pfg.counts.find(b);
    if (it == pfg.counts.end() || it->second < 1)
      fail(errc::label_class, "plate " + b + " needs a positive count");
  }
  // A factor's plate set contains the plate sets of its endpoints.
  for (const Edge& e : pfg.base.edges) {
    auto pe = pfg.plates_of_edge(e.id);
    for (const NodeId& v : e.att)
      for (const auto& b : pfg.plates_of_node(v))
        if (!pe.count(b))
          fail(errc::label_class,
               "edge " + e.id + " misses plate " + b + " of endpoint " + v);
  }
}

/// Direct unrolling oracle: every node/edge is replicated once per index
/// tuple over its plates, with endpoints resolved by tuple restriction.
inline Hypergraph unroll(const PlatedFactorGraph& pfg) {
  validate_pfg(pfg);
  Hypergraph out;
  auto tuples_over = [&](const std::set<std::string>& ps) {
    std::vector<std::string> ordered;
    for (const auto& b : pfg.plates)
      if (ps.count(b)) ordered.push_back(b);
    std::vector<std::size_t> shape;
    for (const auto& b : ordered)
      shape.push_back(static_cast<std::size_t>(pfg.counts.at(b)));
    std::vector<std::map<std::string, std::size_t>> out_tuples;
    std::vector<std::size_t> t(ordered.size(), 0);
    do {
      std::map<std::string, std::size_t> m;
      for (std::size_t i = 0; i < ordered.size(); ++i) m[ordered[i]] = t[i];
      out_tuples.push_back(std::move(m));
    } while (next_tuple(t, shape));
    return out_tuples;
  };
  auto copy_id = [&](const std::string& id, const std::set<std::string>& ps,
                     const std::map<std::string, std::size_t>& tuple) {
    std::string s = id;
    for (const auto& b : pfg.plates)
      if (ps.count(b)) s += "[" + b + "=" + std::to_string(tuple.at(b)) + "]";
    return s;
  };
  for (const Node& n : pfg.base.nodes) {
    auto ps = pfg.plates_of_node(n.id);
    for (const auto& t : tuples_over(ps))
      out.nodes.push_back({copy_id(n.id, ps, t), n.label});
  }
  for (const Edge& e : pfg.base.edges) {
    auto ps = pfg.plates_of_edge(e.id);
    for (const auto& t : tuples_over(ps)) {
      std::vector<NodeId> att;
      for (const NodeId& v : e.att)
        att.push_back(copy_id(v, pfg.plates_of_node(v), t));
      out.edges.push_back({copy_id(e.id, ps, t), e.label, std::move(att)});
    }
  }
  return out;
}

/// Converts a plated factor graph to an FGG that generates exactly the
/// unrolling, by repeatedly carving out maximal-plate-set components and
/// replacing them with counted nonterminal chains. Fails with
/// NotConvertible exactly where the plated sum-product algorithm would.
inline FGG pfg_to_fgg(const PlatedFactorGraph& pfg) {
  validate_pfg(pfg);

  struct WorkEdge {
    Edge edge;
    std::set<std::string> plates;
  };
  std::vector<Node> nodes = pfg.base.nodes;
  std::map<NodeId, std::set<std::string>> node_plates = pfg.node_plates;
  std::vector<WorkEdge> edges;
  for (const Edge& e : pfg.base.edges)
    edges.push_back({e, pfg.plates_of_edge(e.id)});

  FGG out;
  for (const Label& l : pfg.space.node_labels)
    out.space.add_node_label(l, pfg.space.domains.at(l));
  for (const Label& l : pfg.space.edge_labels)
    if (pfg.space.factors.count(l)) {
      out.space.add_edge_label(l, pfg.space.signature_of(l),
                               pfg.space.factors.at(l));
      out.terminals.push_back(l);
    }

  std::set<Label> used(pfg.space.edge_labels.begin(),
                       pfg.space.edge_labels.end());
  used.insert("S");
  int nt_counter = 0;
  auto fresh_base = [&]() {
    for (;;) {
      int k = nt_counter++;
      // A, B, ..., Z, A1, B1, ...
      std::string name(1, static_cast<char>('A' + k % 26));
      if (k >= 26) name += std::to_string(k / 26);
      bool taken = used.count(name) != 0;
      for (auto it = used.lower_bound(name + "^"); !taken && it != used.end();
           ++it) {
        if (it->rfind(name + "^", 0) != 0) break;
        taken = true;
      }
      if (!taken) return name;
    }
  };

  auto label_of_node = [&](const NodeId& v) {
    for (const Node& n : nodes)
      if (n.id == v) return n.label;
    fail(errc::internal, "lost node " + v);
  };

  for (;;) {
    // Pick the edge with the largest nonempty plate set, declaration order
    // breaking ties; stop when only plate-free structure remains.
    const WorkEdge* picked = nullptr;
    for (const WorkEdge& we : edges)
      if (!we.plates.empty() &&
          (!picked || we.plates.size() > picked->plates.size()))
        picked = &we;
    if (!picked) break;
    std::set<std::string> L = picked->plates;

    // Subgraph of nodes and edges whose plate set is exactly L.
    std::set<NodeId> sub_nodes;
    for (const Node& n : nodes)
      if (node_plates[n.id] == L) sub_nodes.insert(n.id);
    std::vector<std::size_t> sub_edges;
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (edges[i].plates == L) sub_edges.push_back(i);

    // Connected components of the subgraph; edges are adjacent only through
    // nodes that are themselves in the subgraph.
    std::map<std::string, std::string> uf;  // element key -> parent key
    std::function<std::string(const std::string&)> find =
        [&](const std::string& k) -> std::string {
      auto it = uf.find(k);
      if (it == uf.end() || it->second == k) return k;
      return it->second = find(it->second);
    };
    auto unite = [&](const std::string& a, const std::string& b) {
      std::string ra = find(a), rb = find(b);
      if (ra != rb) uf[std::max(ra, rb)] = std::min(ra, rb);
    };
    for (const NodeId& v : sub_nodes) uf.emplace("n:" + v, "n:" + v);
    for (std::size_t i : sub_edges) {
      std::string ek = "e:" + edges[i].edge.id;
      uf.emplace(ek, ek);
      for (const NodeId& v : edges[i].edge.att)
        if (sub_nodes.count(v)) unite(ek, "n:" + v);
    }

    // Process the component holding the smallest key; node keys sort before
    // edge keys, so this is "lowest node id first".
    std::string root;
    for (const auto& [k, _] : uf) {
      std::string r = find(k);
      if (root.empty() || r < root) root = r;
    }
    std::set<NodeId> comp_nodes;
    std::set<std::size_t> comp_edges;
    for (const NodeId& v : sub_nodes)
      if (find("n:" + v) == root) comp_nodes.insert(v);
    for (std::size_t i : sub_edges)
      if (find("e:" + edges[i].edge.id) == root) comp_edges.insert(i);

    // Frontier: variables outside the component incident to its factors.
    std::vector<NodeId> frontier;
    for (const Node& n : nodes) {
      if (comp_nodes.count(n.id)) continue;
      bool incident = false;
      for (std::size_t i : comp_edges)
        for (const NodeId& v : edges[i].edge.att)
          if (v == n.id) incident = true;
      if (incident) frontier.push_back(n.id);
    }
    std::set<std::string> L2;
    for (const NodeId& v : frontier) {
      auto ps = node_plates[v];
      L2.insert(ps.begin(), ps.end());
    }
    if (L2 == L)
      fail(errc::not_convertible,
           "component cannot be separated from its plates");

    long long n_count = 1;
    for (const auto& b : L)
      if (!L2.count(b)) n_count *= pfg.counts.at(b);

    Label base = fresh_base();
    used.insert(base);
    std::vector<Label> sig;
    for (const NodeId& v : frontier) sig.push_back(label_of_node(v));
    for (long long i = 0; i <= n_count; ++i) {
      Label counted = base + "^" + std::to_string(i);
      used.insert(counted);
      out.space.add_edge_label(counted, sig);
      out.nonterminals.push_back(counted);
    }

    // Chain rules: X^i carries one copy of the component plus X^{i-1}.
    for (long long i = n_count; i >= 1; --i) {
      Rule r;
      r.id = base + "^" + std::to_string(i);
      r.lhs = base + "^" + std::to_string(i);
      for (const NodeId& v : frontier)
        r.rhs.graph.nodes.push_back({v, label_of_node(v)});
      for (const Node& n : nodes)
        if (comp_nodes.count(n.id)) r.rhs.graph.nodes.push_back(n);
      for (std::size_t ei : comp_edges)
        r.rhs.graph.edges.push_back(edges[ei].edge);
      r.rhs.graph.edges.push_back(
          {"rec", base + "^" + std::to_string(i - 1), frontier});
      r.rhs.externals = frontier;
      out.rules.push_back(std::move(r));
    }
    Rule r0;
    r0.id = base + "^0";
    r0.lhs = base + "^0";
    for (const NodeId& v : frontier)
      r0.rhs.graph.nodes.push_back({v, label_of_node(v)});
    r0.rhs.externals = frontier;
    out.rules.push_back(std::move(r0));

    // Replace the component with the counted nonterminal edge and rescan.
    std::vector<Node> kept_nodes;
    for (const Node& n : nodes)
      if (!comp_nodes.count(n.id)) kept_nodes.push_back(n);
    nodes = std::move(kept_nodes);
    std::vector<WorkEdge> kept_edges;
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (!comp_edges.count(i)) kept_edges.push_back(edges[i]);
    Edge rep{"rep:" + base, base + "^" + std::to_string(n_count), frontier};
    kept_edges.push_back({rep, L2});
    edges = std::move(kept_edges);
  }

  Label start = "S";
  while (out.space.has_edge_label(start)) start += "'";
  out.space.add_edge_label(start, {});
  out.nonterminals.push_back(start);
  out.start = start;
  Rule top;
  top.id = start;
  top.lhs = start;
  top.rhs.graph.nodes = nodes;
  for (const WorkEdge& we : edges) top.rhs.graph.edges.push_back(we.edge);
  out.rules.push_back(std::move(top));
  validate_fgg(out);
  return out;
}

/// Three-slice dynamic graphical model with binary factors; cross edges
/// carry the factor label to instantiate between slice copies.
struct DGM {
  LabelSpace space;
  Hypergraph h1, h2, h3;
  struct CrossEdge {
    NodeId from, to;
    Label label;
  };
  std::vector<CrossEdge> e12, e22, e23;
};

inline void validate_dgm(const DGM& dgm) {
  validate(dgm.space, dgm.h1);
  validate(dgm.space, dgm.h2);
  validate(dgm.space, dgm.h3);
  auto check_binary = [&](const Label& l) {
    if (dgm.space.signature_of(l).size() != 2)
      fail(errc::arity_mismatch, "DGM factors must be binary: " + l);
  };
  for (const Hypergraph* h : {&dgm.h1, &dgm.h2, &dgm.h3})
    for (const Edge& e : h->edges) check_binary(e.label);
  auto check_cross = [&](const std::vector<DGM::CrossEdge>& es,
                         const Hypergraph& from, const Hypergraph& to) {
    for (const auto& ce : es) {
      if (!from.find_node(ce.from))
        fail(errc::unknown_label, "cross edge from " + ce.from);
      if (!to.find_node(ce.to))
        fail(errc::unknown_label, "cross edge to " + ce.to);
      check_binary(ce.label);
    }
  };
  check_cross(dgm.e12, dgm.h1, dgm.h2);
  check_cross(dgm.e22, dgm.h2, dgm.h2);
  check_cross(dgm.e23, dgm.h2, dgm.h3);
}

namespace detail {

inline std::vector<NodeId> e22_sources(const DGM& dgm) {
  std::vector<NodeId> src;
  for (const Node& n : dgm.h2.nodes) {
    for (const auto& ce : dgm.e22)
      if (ce.from == n.id) {
        src.push_back(n.id);
        break;
      }
  }
  return src;
}

}  // namespace detail

/// Direct unrolling oracle: H1, n copies of H2 chained by E22, then H3.
inline Hypergraph unroll(const DGM& dgm, int n) {
  if (n < 2) fail(errc::label_class, "DGM unrolling needs n >= 2");
  validate_dgm(dgm);
  Hypergraph out;
  auto slice = [&](const Hypergraph& h, const std::string& prefix) {
    for (const Node& nd : h.nodes) out.nodes.push_back({prefix + nd.id, nd.label});
    for (const Edge& e : h.edges) {
      std::vector<NodeId> att;
      for (const NodeId& v : e.att) att.push_back(prefix + v);
      out.edges.push_back({prefix + e.id, e.label, std::move(att)});
    }
  };
  slice(dgm.h1, "1:");
  for (int i = 1; i <= n; ++i) slice(dgm.h2, "2:" + std::to_string(i) + ":");
  slice(dgm.h3, "3:");
  std::size_t k = 0;
  for (const auto& ce : dgm.e12)
    out.edges.push_back({"e12:" + std::to_string(k++), ce.label,
                         {"1:" + ce.from, "2:1:" + ce.to}});
  for (int i = 2; i <= n; ++i)
    for (std::size_t j = 0; j < dgm.e22.size(); ++j)
      out.edges.push_back(
          {"e22:" + std::to_string(i) + ":" + std::to_string(j),
           dgm.e22[j].label,
           {"2:" + std::to_string(i - 1) + ":" + dgm.e22[j].from,
            "2:" + std::to_string(i) + ":" + dgm.e22[j].to}});
  k = 0;
  for (const auto& ce : dgm.e23)
    out.edges.push_back({"e23:" + std::to_string(k++), ce.label,
                         {"2:" + std::to_string(n) + ":" + ce.from,
                          "3:" + ce.to}});
  return out;
}

/// Converts a DGM and a length n >= 2 into an FGG generating exactly the
/// unrolling: a prologue rule, a chain of slice rules, and an epilogue.
inline FGG dgm_to_fgg(const DGM& dgm, int n) {
  if (n < 2) fail(errc::label_class, "DGM conversion needs n >= 2");
  validate_dgm(dgm);
  FGG out;
  for (const Label& l : dgm.space.node_labels)
    out.space.add_node_label(l, dgm.space.domains.at(l));
  for (const Label& l : dgm.space.edge_labels)
    if (dgm.space.factors.count(l)) {
      out.space.add_edge_label(l, dgm.space.signature_of(l),
                               dgm.space.factors.at(l));
      out.terminals.push_back(l);
    }
  std::vector<NodeId> sources = detail::e22_sources(dgm);
  std::vector<Label> sig;
  for (const NodeId& v : sources) sig.push_back(dgm.h2.find_node(v)->label);

  out.space.add_edge_label("S", {});
  out.nonterminals.push_back("S");
  out.start = "S";
  for (int i = 1; i <= n - 1; ++i) {
    Label a = "A^" + std::to_string(i);
    out.space.add_edge_label(a, sig);
    out.nonterminals.push_back(a);
  }

  auto copy_into = [&](Rule& r, const Hypergraph& h, const std::string& pre) {
    for (const Node& nd : h.nodes)
      r.rhs.graph.nodes.push_back({pre + nd.id, nd.label});
    for (const Edge& e : h.edges) {
      std::vector<NodeId> att;
      for (const NodeId& v : e.att) att.push_back(pre + v);
      r.rhs.graph.edges.push_back({pre + e.id, e.label, std::move(att)});
    }
  };
  auto chain_endpoints = [&](const std::string& pre) {
    std::vector<NodeId> att;
    for (const NodeId& v : sources) att.push_back(pre + v);
    return att;
  };

  {  // prologue: H1 + first H2 copy + E12, handing E22 sources onward
    Rule r;
    r.id = "S";
    r.lhs = "S";
    copy_into(r, dgm.h1, "1:");
    copy_into(r, dgm.h2, "2:");
    std::size_t k = 0;
    for (const auto& ce : dgm.e12)
      r.rhs.graph.edges.push_back({"e12:" + std::to_string(k++), ce.label,
                                   {"1:" + ce.from, "2:" + ce.to}});
    r.rhs.graph.edges.push_back(
        {"rec", "A^" + std::to_string(n - 1), chain_endpoints("2:")});
    out.rules.push_back(std::move(r));
  }
  for (int i = n - 1; i >= 2; --i) {  // repeated slice
    Rule r;
    r.id = "A^" + std::to_string(i);
    r.lhs = r.id;
    for (const NodeId& v : sources)
      r.rhs.graph.nodes.push_back({"x:" + v, dgm.h2.find_node(v)->label});
    copy_into(r, dgm.h2, "2:");
    std::size_t k = 0;
    for (const auto& ce : dgm.e22)
      r.rhs.graph.edges.push_back({"e22:" + std::to_string(k++), ce.label,
                                   {"x:" + ce.from, "2:" + ce.to}});
    r.rhs.graph.edges.push_back(
        {"rec", "A^" + std::to_string(i - 1), chain_endpoints("2:")});
    for (const NodeId& v : sources) r.rhs.externals.push_back("x:" + v);
    out.rules.push_back(std::move(r));
  }
  {  // epilogue: last H2 copy + H3 + E23
    Rule r;
    r.id = "A^1";
    r.lhs = "A^1";
    for (const NodeId& v : sources)
      r.rhs.graph.nodes.push_back({"x:" + v, dgm.h2.find_node(v)->label});
    copy_into(r, dgm.h2, "2:");
    copy_into(r, dgm.h3, "3:");
    std::size_t k = 0;
    for (const auto& ce : dgm.e22)
      r.rhs.graph.edges.push_back({"e22:" + std::to_string(k++), ce.label,
                                   {"x:" + ce.from, "2:" + ce.to}});
    k = 0;
    for (const auto& ce : dgm.e23)
      r.rhs.graph.edges.push_back({"e23:" + std::to_string(k++), ce.label,
                                   {"2:" + ce.from, "3:" + ce.to}});
    for (const NodeId& v : sources) r.rhs.externals.push_back("x:" + v);
    out.rules.push_back(std::move(r));
  }
  validate_fgg(out);
  return out;
}

/// Case-factor diagram: rooted DAG of case/factor/unit/empty nodes with
/// per-variable costs.
struct CFD {
  struct DagNode {
    std::string id;
    enum class Kind { case_, factor, unit, empty } kind;
    std::string var;            // case only
    std::string child1, child2; // case/factor
  };
  std::vector<DagNode> nodes;
  std::string root;
  std::map<std::string, double> costs;  // Psi

  const DagNode& at(const std::string& id) const {
    for (const DagNode& n : nodes)
      if (n.id == id) return n;
    fail(errc::unknown_label, "CFD node " + id);
  }
};

/// q(root, xi) when an assignment is given, Z(root) otherwise, by memoized
/// evaluation of the four-case table.
inline double eval_cfd(const CFD& cfd,
                       const std::map<std::string, int>* xi = nullptr) {
  std::map<std::string, double> memo;
  std::function<double(const std::string&)> go =
      [&](const std::string& id) -> double {
    auto it = memo.find(id);
    if (it != memo.end()) return it->second;
    const CFD::DagNode& n = cfd.at(id);
    double v = 0.0;
    switch (n.kind) {
      case CFD::DagNode::Kind::unit: v = 1.0; break;
      case CFD::DagNode::Kind::empty: v = 0.0; break;
      case CFD::DagNode::Kind::factor: v = go(n.child1) * go(n.child2); break;
      case CFD::DagNode::Kind::case_: {
        double w = std::exp(-cfd.costs.at(n.var));
        if (!xi)
          v = w * go(n.child1) + go(n.child2);
        else if (xi->at(n.var) == 1)
          v = w * go(n.child1);
        else
          v = go(n.child2);
        break;
      }
    }
    memo[id] = v;
    return v;
  };
  return go(cfd.root);
}

namespace detail {

// Shared skeleton for the model grammar and per-assignment constraint
// grammars; rule and edge ids line up so by-id conjunction pairs branches
// with themselves only.
inline FGG cfd_like_fgg(const CFD& cfd, const std::map<std::string, int>* xi) {
  FGG out;
  std::set<std::string> vars;
  for (const auto& n : cfd.nodes)
    if (n.kind == CFD::DagNode::Kind::case_) vars.insert(n.var);
  for (const auto& v : vars) out.space.add_node_label(v, {"0", "1"});
  std::string ns = xi ? "Q:" : "D:";
  for (const auto& n : cfd.nodes) {
    out.space.add_edge_label(ns + n.id, {});
    out.nonterminals.push_back(ns + n.id);
  }
  out.start = ns + cfd.root;

  auto pin = [&](const std::string& label, const std::string& var, int val) {
    std::vector<double> t(2, 0.0);
    t[val] = 1.0;
    out.space.add_edge_label(label, {var}, FactorFunction::dense(t));
    out.terminals.push_back(label);
  };
  for (const auto& n : cfd.nodes) {
    switch (n.kind) {
      case CFD::DagNode::Kind::case_: {
        Rule r1;
        r1.id = n.id + ":1";
        r1.lhs = ns + n.id;
        r1.rhs.graph.nodes.push_back({"1", n.var});
        pin(ns + n.id + ":p1", n.var, xi ? xi->at(n.var) : 1);
        r1.rhs.graph.edges.push_back({"2", ns + n.id + ":p1", {"1"}});
        if (!xi) {
          out.space.add_edge_label(
              ns + n.id + ":w", {},
              FactorFunction::constant(std::exp(-cfd.costs.at(n.var))));
          out.terminals.push_back(ns + n.id + ":w");
          r1.rhs.graph.edges.push_back({"3", ns + n.id + ":w", {}});
        }
        r1.rhs.graph.edges.push_back({"4", ns + n.child1, {}});
        out.rules.push_back(std::move(r1));

        Rule r0;
        r0.id = n.id + ":0";
        r0.lhs = ns + n.id;
        r0.rhs.graph.nodes.push_back({"1", n.var});
        pin(ns + n.id + ":p0", n.var, xi ? xi->at(n.var) : 0);
        r0.rhs.graph.edges.push_back({"2", ns + n.id + ":p0", {"1"}});
        r0.rhs.graph.edges.push_back({"5", ns + n.child2, {}});
        out.rules.push_back(std::move(r0));
        break;
      }
      case CFD::DagNode::Kind::factor: {
        Rule r;
        r.id = n.id + ":f";
        r.lhs = ns + n.id;
        r.rhs.graph.edges.push_back({"4", ns + n.child1, {}});
        r.rhs.graph.edges.push_back({"5", ns + n.child2, {}});
        out.rules.push_back(std::move(r));
        break;
      }
      case CFD::DagNode::Kind::unit: {
        Rule r;
        r.id = n.id + ":u";
        r.lhs = ns + n.id;
        out.rules.push_back(std::move(r));
        break;
      }
      case CFD::DagNode::Kind::empty:
        break;  // no rules: derivations reaching empty fail
    }
  }
  validate_fgg(out);
  return out;
}

}  // namespace detail

inline FGG cfd_to_fgg(const CFD& cfd) { return detail::cfd_like_fgg(cfd, nullptr); }

inline FGG cfd_constraint_fgg(const CFD& cfd,
                              const std::map<std::string, int>& xi) {
  return detail::cfd_like_fgg(cfd, &xi);
}

/// Sum-product network: rooted DAG of weighted sums, products, and
/// positive/negated variable leaves.
struct SPN {
  struct DagNode {
    std::string id;
    enum class Kind { sum, product, leaf, negleaf } kind;
    std::string var;             // leaf/negleaf
    std::string child1, child2;  // sum/product
    double lambda1 = 0.0, lambda2 = 0.0;  // sum
  };
  std::vector<DagNode> nodes;
  std::string root;

  const DagNode& at(const std::string& id) const {
    for (const DagNode& n : nodes)
      if (n.id == id) return n;
    fail(errc::unknown_label, "SPN node " + id);
  }
};

namespace detail {

// scope and per-polarity occurrence, for the validity checks
inline void spn_scopes(const SPN& spn,
                       std::map<std::string, std::set<std::string>>& scope,
                       std::map<std::string, std::set<std::string>>& pos,
                       std::map<std::string, std::set<std::string>>& neg) {
  std::function<void(const std::string&)> go = [&](const std::string& id) {
    if (scope.count(id)) return;
    const SPN::DagNode& n = spn.at(id);
    scope[id] = {};
    switch (n.kind) {
      case SPN::DagNode::Kind::leaf:
        scope[id] = {n.var};
        pos[id] = {n.var};
        break;
      case SPN::DagNode::Kind::negleaf:
        scope[id] = {n.var};
        neg[id] = {n.var};
        break;
      default:
        go(n.child1);
        go(n.child2);
        for (const auto& c : {n.child1, n.child2}) {
          scope[id].insert(scope[c].begin(), scope[c].end());
          pos[id].insert(pos[c].begin(), pos[c].end());
          neg[id].insert(neg[c].begin(), neg[c].end());
        }
    }
  };
  go(spn.root);
}

}  // namespace detail

/// Checks SPN validity: sum children share scope (completeness), product
/// children never hold a variable in opposite polarities (consistency).
inline void validate_spn(const SPN& spn) {
  std::map<std::string, std::set<std::string>> scope, pos, neg;
  detail::spn_scopes(spn, scope, pos, neg);
  for (const auto& n : spn.nodes) {
    if (!scope.count(n.id)) continue;  // unreachable from the root
    if (n.kind == SPN::DagNode::Kind::sum) {
      if (scope.at(n.child1) != scope.at(n.child2))
        fail(errc::invalid_spn, "sum node " + n.id + " children differ in scope");
      if (n.lambda1 < 0 || n.lambda2 < 0)
        fail(errc::invalid_spn, "negative weight at " + n.id);
    }
    if (n.kind == SPN::DagNode::Kind::product) {
      for (const auto& v : pos.at(n.child1))
        if (neg.at(n.child2).count(v))
          fail(errc::invalid_spn, "variable " + v + " conflicts under " + n.id);
      for (const auto& v : pos.at(n.child2))
        if (neg.at(n.child1).count(v))
          fail(errc::invalid_spn, "variable " + v + " conflicts under " + n.id);
    }
  }
}

inline double eval_spn(const SPN& spn, const std::map<std::string, int>& xi) {
  validate_spn(spn);
  std::map<std::string, double> memo;
  std::function<double(const std::string&)> go =
      [&](const std::string& id) -> double {
    auto it = memo.find(id);
    if (it != memo.end()) return it->second;
    const SPN::DagNode& n = spn.at(id);
    double v = 0.0;
    switch (n.kind) {
      case SPN::DagNode::Kind::leaf: v = xi.at(n.var); break;
      case SPN::DagNode::Kind::negleaf: v = 1.0 - xi.at(n.var); break;
      case SPN::DagNode::Kind::sum:
        v = n.lambda1 * go(n.child1) + n.lambda2 * go(n.child2);
        break;
      case SPN::DagNode::Kind::product: v = go(n.child1) * go(n.child2); break;
    }
    memo[id] = v;
    return v;
  };
  return go(spn.root);
}

namespace detail {

// One FGG node per leaf occurrence; validity makes the occurrences agree.
inline FGG spn_like_fgg(const SPN& spn, const std::map<std::string, int>* xi) {
  validate_spn(spn);
  FGG out;
  std::set<std::string> vars;
  for (const auto& n : spn.nodes)
    if (n.kind == SPN::DagNode::Kind::leaf ||
        n.kind == SPN::DagNode::Kind::negleaf)
      vars.insert(n.var);
  for (const auto& v : vars) out.space.add_node_label(v, {"0", "1"});
  std::string ns = xi ? "Q:" : "D:";
  for (const auto& n : spn.nodes) {
    out.space.add_edge_label(ns + n.id, {});
    out.nonterminals.push_back(ns + n.id);
  }
  out.start = ns + spn.root;

  for (const auto& n : spn.nodes) {
    switch (n.kind) {
      case SPN::DagNode::Kind::leaf:
      case SPN::DagNode::Kind::negleaf: {
        Rule r;
        r.id = n.id + ":l";
        r.lhs = ns + n.id;
        r.rhs.graph.nodes.push_back({"1", n.var});
        int val = n.kind == SPN::DagNode::Kind::leaf ? 1 : 0;
        if (xi) val = xi->at(n.var);
        std::vector<double> t(2, 0.0);
        t[val] = 1.0;
        out.space.add_edge_label(ns + n.id + ":p", {n.var},
                                 FactorFunction::dense(t));
        out.terminals.push_back(ns + n.id + ":p");
        r.rhs.graph.edges.push_back({"2", ns + n.id + ":p", {"1"}});
        out.rules.push_back(std::move(r));
        break;
      }
      case SPN::DagNode::Kind::sum: {
        for (int branch : {1, 2}) {
          Rule r;
          r.id = n.id + ":" + std::to_string(branch);
          r.lhs = ns + n.id;
          if (!xi) {
            Label w = ns + n.id + ":w" + std::to_string(branch);
            out.space.add_edge_label(
                w, {},
                FactorFunction::constant(branch == 1 ? n.lambda1 : n.lambda2));
            out.terminals.push_back(w);
            r.rhs.graph.edges.push_back({"2", w, {}});
          }
          r.rhs.graph.edges.push_back(
              {branch == 1 ? "3" : "4",
               ns + (branch == 1 ? n.child1 : n.child2),
               {}});
          out.rules.push_back(std::move(r));
        }
        break;
      }
      case SPN::DagNode::Kind::product: {
        Rule r;
        r.id = n.id + ":p";
        r.lhs = ns + n.id;
        r.rhs.graph.edges.push_back({"3", ns + n.child1, {}});
        r.rhs.graph.edges.push_back({"4", ns + n.child2, {}});
        out.rules.push_back(std::move(r));
        break;
      }
    }
  }
  validate_fgg(out);
  return out;
}

}  // namespace detail

inline FGG spn_to_fgg(const SPN& spn) { return detail::spn_like_fgg(spn, nullptr); }

inline FGG spn_constraint_fgg(const SPN& spn,
                              const std::map<std::string, int>& xi) {
  return detail::spn_like_fgg(spn, &xi);
}

}  // namespace fgg
