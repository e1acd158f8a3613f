#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fgg/grammar.hpp"

namespace fgg {

/// Witness that two rules share rhs structure: a node bijection and a
/// nonterminal-edge bijection compatible with labels, endpoints, and the
/// external ordering.
struct RuleCorrespondence {
  std::map<NodeId, NodeId> node_map;     // r1 -> r2
  std::map<EdgeId, EdgeId> nt_edge_map;  // r1 -> r2
};

enum class MatchMode { by_id, search };

/// Serialized pair nonterminal; nested conjunction stays left-associated
/// ("X,Y" then "X,Y,Z"). Commas inside atomic labels must be pre-escaped
/// as "\," by the grammar author.
inline Label pair_label(const Label& a, const Label& b) { return a + "," + b; }

namespace detail {

struct ConjoinView {
  std::vector<const Node*> nodes;
  std::vector<const Edge*> nt_edges;
  std::vector<const Edge*> t_edges;

  ConjoinView(const FGG& g, const Rule& r) {
    for (const Node& n : r.rhs.graph.nodes) nodes.push_back(&n);
    for (const Edge& e : r.rhs.graph.edges)
      (g.is_nonterminal(e.label) ? nt_edges : t_edges).push_back(&e);
  }
};

inline bool correspondence_valid(const FGG& g1, const Rule& r1, const FGG& g2,
                                 const Rule& r2, const RuleCorrespondence& c) {
  const Hypergraph& h1 = r1.rhs.graph;
  const Hypergraph& h2 = r2.rhs.graph;
  ConjoinView v1(g1, r1), v2(g2, r2);
  if (v1.nodes.size() != v2.nodes.size()) return false;
  if (v1.nt_edges.size() != v2.nt_edges.size()) return false;
  if (c.node_map.size() != v1.nodes.size()) return false;
  if (c.nt_edge_map.size() != v1.nt_edges.size()) return false;

  std::set<NodeId> image;
  for (const Node& n : h1.nodes) {
    auto it = c.node_map.find(n.id);
    if (it == c.node_map.end()) return false;
    const Node* m = h2.find_node(it->second);
    if (!m || m->label != n.label) return false;
    if (!image.insert(it->second).second) return false;
  }
  if (r1.rhs.externals.size() != r2.rhs.externals.size()) return false;
  for (std::size_t i = 0; i < r1.rhs.externals.size(); ++i)
    if (c.node_map.at(r1.rhs.externals[i]) != r2.rhs.externals[i])
      return false;

  std::set<EdgeId> eimage;
  for (const Edge* e : v1.nt_edges) {
    auto it = c.nt_edge_map.find(e->id);
    if (it == c.nt_edge_map.end()) return false;
    const Edge* m = h2.find_edge(it->second);
    if (!m || !g2.is_nonterminal(m->label)) return false;
    if (!eimage.insert(it->second).second) return false;
    if (g1.space.signature_of(e->label) != g2.space.signature_of(m->label))
      return false;
    if (e->att.size() != m->att.size()) return false;
    for (std::size_t i = 0; i < e->att.size(); ++i)
      if (c.node_map.at(e->att[i]) != m->att[i]) return false;
  }
  return true;
}

// Deterministic first match in id order, with a step budget.
struct CorrespondenceSearch {
  const FGG& g1;
  const Rule& r1;
  const FGG& g2;
  const Rule& r2;
  std::size_t budget;
  std::map<NodeId, NodeId> node_map;
  std::set<NodeId> used;

  bool extend(std::size_t i, const std::vector<const Node*>& n1,
              const std::vector<const Node*>& n2) {
    if (budget == 0) return false;
    --budget;
    if (i == n1.size()) return match_edges();
    if (node_map.count(n1[i]->id))  // forced by the external ordering
      return extend(i + 1, n1, n2);
    for (const Node* cand : n2) {
      if (cand->label != n1[i]->label || used.count(cand->id)) continue;
      node_map[n1[i]->id] = cand->id;
      used.insert(cand->id);
      if (extend(i + 1, n1, n2)) return true;
      node_map.erase(n1[i]->id);
      used.erase(cand->id);
    }
    return false;
  }

  std::map<EdgeId, EdgeId> nt_edge_map;

  bool match_edges() {
    detail::ConjoinView v1(g1, r1), v2(g2, r2);
    return match_edge(0, v1.nt_edges, v2.nt_edges);
  }

  bool match_edge(std::size_t i, const std::vector<const Edge*>& e1,
                  const std::vector<const Edge*>& e2) {
    if (budget == 0) return false;
    --budget;
    if (i == e1.size()) return true;
    std::set<EdgeId> taken;
    for (const auto& [_, v] : nt_edge_map) taken.insert(v);
    for (const Edge* cand : e2) {
      if (taken.count(cand->id)) continue;
      if (g1.space.signature_of(e1[i]->label) !=
          g2.space.signature_of(cand->label))
        continue;
      if (cand->att.size() != e1[i]->att.size()) continue;
      bool ok = true;
      for (std::size_t k = 0; k < cand->att.size(); ++k)
        if (node_map.at(e1[i]->att[k]) != cand->att[k]) ok = false;
      if (!ok) continue;
      nt_edge_map[e1[i]->id] = cand->id;
      if (match_edge(i + 1, e1, e2)) return true;
      nt_edge_map.erase(e1[i]->id);
    }
    return false;
  }
};

}  // namespace detail

/// Decides whether two rules are conjoinable. In `by_id` mode the identity
/// on node ids and nonterminal-edge ids must itself be a valid
/// correspondence (the shared-structure layout the figures use); `search`
/// looks for any correspondence by backtracking.
inline std::optional<RuleCorrespondence> conjoinable(
    const FGG& g1, const Rule& r1, const FGG& g2, const Rule& r2,
    MatchMode mode = MatchMode::by_id, std::size_t budget = 1'000'000) {
  if (g1.space.signature_of(r1.lhs) != g2.space.signature_of(r2.lhs))
    return std::nullopt;
  if (mode == MatchMode::by_id) {
    RuleCorrespondence c;
    for (const Node& n : r1.rhs.graph.nodes) c.node_map[n.id] = n.id;
    for (const Edge& e : r1.rhs.graph.edges)
      if (g1.is_nonterminal(e.label)) c.nt_edge_map[e.id] = e.id;
    if (detail::correspondence_valid(g1, r1, g2, r2, c)) return c;
    return std::nullopt;
  }
  detail::ConjoinView v1(g1, r1), v2(g2, r2);
  if (v1.nodes.size() != v2.nodes.size() ||
      v1.nt_edges.size() != v2.nt_edges.size())
    return std::nullopt;
  if (r1.rhs.externals.size() != r2.rhs.externals.size()) return std::nullopt;
  detail::CorrespondenceSearch s{g1, r1, g2, r2, budget};
  for (std::size_t i = 0; i < r1.rhs.externals.size(); ++i) {
    s.node_map[r1.rhs.externals[i]] = r2.rhs.externals[i];
    s.used.insert(r2.rhs.externals[i]);
  }
  if (!s.extend(0, v1.nodes, v2.nodes)) return std::nullopt;
  RuleCorrespondence c;
  c.node_map = std::move(s.node_map);
  c.nt_edge_map = std::move(s.nt_edge_map);
  return c;
}

/// Conjunction of one rule pair: shared nodes and nonterminal edges appear
/// once (nonterminal labels paired), terminal edges of both sides are kept
/// distinct with "1:"/"2:" id prefixes. Uses r1's ids and externals.
inline Rule conjoin_rules(const FGG& g1, const Rule& r1, const FGG& g2,
                          const Rule& r2, const RuleCorrespondence& c) {
  if (!detail::correspondence_valid(g1, r1, g2, r2, c))
    fail(errc::invalid_correspondence, r1.id + " vs " + r2.id);
  std::map<NodeId, NodeId> inverse;
  for (const auto& [a, b] : c.node_map) inverse[b] = a;

  Rule out;
  out.id = pair_label(r1.id, r2.id);
  out.lhs = pair_label(r1.lhs, r2.lhs);
  out.rhs.graph.nodes = r1.rhs.graph.nodes;
  out.rhs.externals = r1.rhs.externals;
  for (const Edge& e : r1.rhs.graph.edges) {
    if (g1.is_nonterminal(e.label)) {
      const Edge* m = r2.rhs.graph.find_edge(c.nt_edge_map.at(e.id));
      out.rhs.graph.edges.push_back(
          {e.id, pair_label(e.label, m->label), e.att});
    } else {
      out.rhs.graph.edges.push_back({"1:" + e.id, e.label, e.att});
    }
  }
  for (const Edge& e : r2.rhs.graph.edges) {
    if (g2.is_nonterminal(e.label)) continue;
    std::vector<NodeId> att;
    for (const NodeId& v : e.att) att.push_back(inverse.at(v));
    out.rhs.graph.edges.push_back({"2:" + e.id, e.label, std::move(att)});
  }
  return out;
}

/// Conjunction of two grammars: all pairwise rule conjunctions, start
/// <S1,S2>. Node labels and shared terminal labels must agree across the
/// two label spaces. Pass `prune` to drop pair nonterminals unreachable
/// from the start.
inline FGG conjoin(const FGG& g1, const FGG& g2,
                   MatchMode mode = MatchMode::by_id, bool prune = false,
                   std::size_t budget = 1'000'000) {
  FGG out;
  for (const Label& l : g1.space.node_labels)
    out.space.add_node_label(l, g1.space.domains.at(l));
  for (const Label& l : g2.space.node_labels) {
    if (!out.space.has_node_label(l)) {
      out.space.add_node_label(l, g2.space.domains.at(l));
    } else if (out.space.domains.at(l) != g2.space.domains.at(l)) {
      fail(errc::incompatible_label_spaces, "domain of node label " + l);
    }
  }
  for (const Label& t : g1.terminals) {
    out.space.add_edge_label(t, g1.space.signature_of(t),
                             g1.space.factors.at(t));
    out.terminals.push_back(t);
  }
  for (const Label& t : g2.terminals) {
    if (!out.space.has_edge_label(t)) {
      out.space.add_edge_label(t, g2.space.signature_of(t),
                               g2.space.factors.at(t));
      out.terminals.push_back(t);
    } else if (out.space.signature_of(t) != g2.space.signature_of(t) ||
               !(out.space.factors.at(t) == g2.space.factors.at(t))) {
      fail(errc::incompatible_label_spaces, "terminal " + t);
    }
  }

  auto add_nonterminal = [&](const Label& paired, const Label& of) {
    if (out.space.has_edge_label(paired)) {
      if (std::find(out.terminals.begin(), out.terminals.end(), paired) !=
          out.terminals.end())
        fail(errc::label_class, "pair label collides with terminal " + paired);
      return;
    }
    out.space.add_edge_label(paired, g1.space.signature_of(of));
    out.nonterminals.push_back(paired);
  };

  out.start = pair_label(g1.start, g2.start);
  add_nonterminal(out.start, g1.start);
  for (const Rule& r1 : g1.rules) {
    for (const Rule& r2 : g2.rules) {
      auto c = conjoinable(g1, r1, g2, r2, mode, budget);
      if (!c) continue;
      Rule pr = conjoin_rules(g1, r1, g2, r2, *c);
      add_nonterminal(pr.lhs, r1.lhs);
      for (const Edge& e : r1.rhs.graph.edges)
        if (g1.is_nonterminal(e.label)) {
          const Edge* m = r2.rhs.graph.find_edge(c->nt_edge_map.at(e.id));
          add_nonterminal(pair_label(e.label, m->label), e.label);
        }
      out.rules.push_back(std::move(pr));
    }
  }

  if (prune) {
    std::set<Label> reach{out.start};
    bool changed = true;
    while (changed) {
      changed = false;
      for (const Rule& r : out.rules) {
        if (!reach.count(r.lhs)) continue;
        for (const Edge& e : r.rhs.graph.edges)
          if (out.is_nonterminal(e.label) && reach.insert(e.label).second)
            changed = true;
      }
    }
    std::vector<Rule> kept;
    for (Rule& r : out.rules)
      if (reach.count(r.lhs)) kept.push_back(std::move(r));
    out.rules = std::move(kept);
    std::vector<Label> nts;
    for (const Label& l : out.nonterminals) {
      if (reach.count(l)) {
        nts.push_back(l);
      } else {
        out.space.signature.erase(l);
        std::erase(out.space.edge_labels, l);
      }
    }
    out.nonterminals = std::move(nts);
  }

  validate_fgg(out);
  return out;
}

/// Builds the second-to-last-tag query grammar for an HMM-shaped grammar
/// (start rule, one recursive rule, one stop rule). Conjoining marks node
/// T1 of the rule that expands to Y as the second-to-last tag.
inline FGG second_to_last_query(const FGG& g) {
  const Rule* start_rule = nullptr;
  const Rule* step_rule = nullptr;
  const Rule* stop_rule = nullptr;
  for (const Rule& r : g.rules) {
    std::size_t nts = g.nonterminal_edges(r).size();
    if (r.lhs == g.start && nts == 1)
      start_rule = &r;
    else if (nts == 1)
      step_rule = &r;
    else if (nts == 0)
      stop_rule = &r;
  }
  if (!start_rule || !step_rule || !stop_rule)
    fail(errc::invalid_correspondence, "grammar is not HMM-shaped");

  FGG q;
  for (const Label& l : g.space.node_labels)
    q.space.add_node_label(l, g.space.domains.at(l));
  q.space.add_edge_label("S", {});
  q.space.add_edge_label("X", g.space.signature_of(step_rule->lhs));
  q.space.add_edge_label("Y", g.space.signature_of(step_rule->lhs));
  q.nonterminals = {"S", "X", "Y"};
  q.start = "S";

  auto strip = [&](const Rule& src, const std::string& id, const Label& lhs,
                   const Label& child) {
    Rule r;
    r.id = id;
    r.lhs = lhs;
    r.rhs.graph.nodes = src.rhs.graph.nodes;
    r.rhs.externals = src.rhs.externals;
    for (const Edge& e : src.rhs.graph.edges)
      if (g.is_nonterminal(e.label))
        r.rhs.graph.edges.push_back({e.id, child, e.att});
    return r;
  };
  q.rules.push_back(strip(*start_rule, "pi1", "S", "X"));
  q.rules.push_back(strip(*step_rule, "pi2", "X", "X"));
  q.rules.push_back(strip(*step_rule, "pi3", "X", "Y"));
  q.rules.push_back(strip(*stop_rule, "pi4", "Y", ""));
  validate_fgg(q);
  return q;
}

}  // namespace fgg
