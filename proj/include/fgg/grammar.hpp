#pragma once

#include <deque>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fgg/core.hpp"

namespace fgg {

struct Rule {
  std::string id;
  Label lhs;
  Fragment rhs;
  bool operator==(const Rule&) const = default;
};

/// A factor graph grammar: an HRG whose terminal edge labels carry factors
/// and whose node labels carry finite value domains.
struct FGG {
  LabelSpace space;
  std::vector<Label> nonterminals;
  std::vector<Label> terminals;
  std::vector<Rule> rules;
  Label start;

  bool is_nonterminal(const Label& l) const {
    return std::find(nonterminals.begin(), nonterminals.end(), l) !=
           nonterminals.end();
  }
  bool is_terminal(const Label& l) const {
    return std::find(terminals.begin(), terminals.end(), l) != terminals.end();
  }

  std::vector<const Rule*> rules_for(const Label& lhs) const {
    std::vector<const Rule*> out;
    for (const Rule& r : rules)
      if (r.lhs == lhs) out.push_back(&r);
    return out;
  }

  const Rule* rule_by_id(const std::string& id) const {
    for (const Rule& r : rules)
      if (r.id == id) return &r;
    return nullptr;
  }

  std::vector<const Edge*> nonterminal_edges(const Rule& r) const {
    std::vector<const Edge*> out;
    for (const Edge& e : r.rhs.graph.edges)
      if (is_nonterminal(e.label)) out.push_back(&e);
    return out;
  }
};

/// Checks the FGG invariants: disjoint alphabets, factors exactly on
/// terminals, 0-ary start, rule externals matching the lhs signature.
/// Unreachable nonterminals are permitted.
inline void validate_fgg(const FGG& g) {
  g.space.check();
  std::set<Label> nts(g.nonterminals.begin(), g.nonterminals.end());
  std::set<Label> ts(g.terminals.begin(), g.terminals.end());
  for (const Label& l : g.nonterminals) {
    if (ts.count(l)) fail(errc::label_class, l + " is both N and T");
    if (!g.space.has_edge_label(l)) fail(errc::unknown_label, l);
    if (g.space.factors.count(l))
      fail(errc::label_class, "nonterminal " + l + " has a factor");
  }
  for (const Label& l : g.terminals) {
    if (!g.space.has_edge_label(l)) fail(errc::unknown_label, l);
    if (!g.space.factors.count(l))
      fail(errc::label_class, "terminal " + l + " lacks a factor");
  }
  if (!nts.count(g.start)) fail(errc::unknown_label, "start " + g.start);
  if (!g.space.signature_of(g.start).empty())
    fail(errc::start_has_nonempty_type, g.start);
  std::set<std::string> rule_ids;
  for (const Rule& r : g.rules) {
    if (!rule_ids.insert(r.id).second) fail(errc::duplicate_id, "rule " + r.id);
    if (!nts.count(r.lhs))
      fail(errc::label_class, "rule " + r.id + " lhs " + r.lhs);
    validate(g.space, r.rhs);
    for (const Edge& e : r.rhs.graph.edges)
      if (!nts.count(e.label) && !ts.count(e.label))
        fail(errc::unknown_label,
             "rule " + r.id + " edge " + e.id + " labeled " + e.label);
    const auto& sig = g.space.signature_of(r.lhs);
    if (r.rhs.externals.size() != sig.size())
      fail(errc::external_signature_mismatch, "rule " + r.id);
    for (std::size_t i = 0; i < sig.size(); ++i)
      if (r.rhs.graph.find_node(r.rhs.externals[i])->label != sig[i])
        fail(errc::external_signature_mismatch,
             "rule " + r.id + " external " + std::to_string(i + 1));
  }
}

/// Rule-labeled tree; children are keyed by the rhs nonterminal edge they
/// replace.
struct DerivationTree {
  std::string rule;
  std::map<EdgeId, DerivationTree> children;
  bool operator==(const DerivationTree&) const = default;

  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& [_, c] : children) n += c.size();
    return n;
  }
  std::size_t height() const {
    std::size_t h = 0;
    for (const auto& [_, c] : children) h = std::max(h, c.height());
    return h + 1;
  }
};

namespace detail {

inline void derive_into(const FGG& g, const DerivationTree& d,
                        const std::string& path,
                        const std::vector<NodeId>& ext_ids, Hypergraph& out) {
  const Rule* rule = g.rule_by_id(d.rule);
  if (!rule) fail(errc::invalid_derivation, "at " + path + ": no rule " + d.rule);
  if (rule->rhs.externals.size() != ext_ids.size())
    fail(errc::invalid_derivation, "at " + path + ": external count");

  // Fresh ids are path-prefixed so repeated calls agree; externals fuse
  // with the parent-side endpoint ids.
  std::map<NodeId, NodeId> derived_id;
  for (std::size_t i = 0; i < ext_ids.size(); ++i)
    derived_id[rule->rhs.externals[i]] = ext_ids[i];
  for (const Node& n : rule->rhs.graph.nodes) {
    if (derived_id.count(n.id)) continue;
    NodeId id = path + n.id;
    derived_id[n.id] = id;
    out.nodes.push_back({id, n.label});
  }

  std::set<EdgeId> expected;
  for (const Edge& e : rule->rhs.graph.edges) {
    std::vector<NodeId> att;
    for (const NodeId& v : e.att) att.push_back(derived_id.at(v));
    if (g.is_nonterminal(e.label)) {
      expected.insert(e.id);
      auto it = d.children.find(e.id);
      if (it == d.children.end())
        fail(errc::invalid_derivation,
             "at " + path + ": missing child for edge " + e.id);
      const Rule* child_rule = g.rule_by_id(it->second.rule);
      if (!child_rule || child_rule->lhs != e.label)
        fail(errc::invalid_derivation,
             "at " + path + ": child of edge " + e.id + " does not expand " +
                 e.label);
      derive_into(g, it->second, path + e.id + "/", att, out);
    } else {
      out.edges.push_back({path + e.id, e.label, std::move(att)});
    }
  }
  for (const auto& [eid, _] : d.children)
    if (!expected.count(eid))
      fail(errc::invalid_derivation,
           "at " + path + ": stray child key " + eid);
}

}  // namespace detail

/// Builds the derived (terminal-only) graph of a derivation. The root rule
/// must expand the start symbol unless `require_start` is false.
inline Hypergraph derive(const FGG& g, const DerivationTree& d,
                         bool require_start = true) {
  const Rule* root = g.rule_by_id(d.rule);
  if (!root) fail(errc::invalid_derivation, "no rule " + d.rule);
  if (require_start && root->lhs != g.start)
    fail(errc::invalid_derivation, "root rule expands " + root->lhs);
  Hypergraph out;
  std::vector<NodeId> ext_ids;
  // Root external nodes keep their own ids (and are dropped as externals).
  for (const NodeId& x : root->rhs.externals) {
    ext_ids.push_back(x);
    out.nodes.push_back({x, root->rhs.graph.find_node(x)->label});
  }
  detail::derive_into(g, d, "", ext_ids, out);
  return out;
}

struct EnumerationResult {
  std::vector<DerivationTree> trees;
  bool truncated = false;
};

namespace detail {

struct Enumerator {
  const FGG& g;
  std::size_t max_count;
  bool truncated = false;

  std::vector<DerivationTree> trees_for(const Label& nt, int depth) {
    std::vector<DerivationTree> out;
    if (depth <= 0) {
      if (!g.rules_for(nt).empty()) truncated = true;
      return out;
    }
    for (const Rule* r : g.rules_for(nt)) {
      auto nt_edges = g.nonterminal_edges(*r);
      std::vector<std::vector<DerivationTree>> options;
      bool dead = false;
      for (const Edge* e : nt_edges) {
        options.push_back(trees_for(e->label, depth - 1));
        if (options.back().empty()) dead = true;
      }
      if (dead) continue;
      std::vector<std::size_t> pick(options.size(), 0);
      std::vector<std::size_t> shape;
      for (const auto& o : options) shape.push_back(o.size());
      do {
        DerivationTree t;
        t.rule = r->id;
        for (std::size_t i = 0; i < nt_edges.size(); ++i)
          t.children[nt_edges[i]->id] = options[i][pick[i]];
        out.push_back(std::move(t));
        if (out.size() > max_count) {
          truncated = true;
          out.resize(max_count);
          return out;
        }
      } while (next_tuple(pick, shape));
    }
    return out;
  }
};

}  // namespace detail

/// All derivation trees of height <= max_depth in deterministic order
/// (rules in declaration order, children depth-first), truncated at
/// max_count.
inline EnumerationResult enumerate_derivations(const FGG& g, int max_depth,
                                               std::size_t max_count = 10000) {
  detail::Enumerator en{g, max_count};
  EnumerationResult res;
  res.trees = en.trees_for(g.start, max_depth);
  res.truncated = en.truncated;
  return res;
}

struct NonterminalGraph {
  std::vector<Label> vertices;                 // declaration order
  std::set<std::pair<Label, Label>> arcs;      // lhs -> rhs occurrence
  std::vector<std::vector<Label>> scc_order;   // reverse topological
};

/// Directed graph over nonterminals with an arc X -> Y iff some rule with
/// lhs X has an rhs edge labeled Y; components in reverse topological order.
inline NonterminalGraph nonterminal_graph(const FGG& g) {
  NonterminalGraph ng;
  ng.vertices = g.nonterminals;
  std::map<Label, std::size_t> index;
  for (std::size_t i = 0; i < ng.vertices.size(); ++i)
    index[ng.vertices[i]] = i;
  std::vector<std::set<std::size_t>> adj(ng.vertices.size());
  for (const Rule& r : g.rules)
    for (const Edge& e : r.rhs.graph.edges)
      if (g.is_nonterminal(e.label)) {
        ng.arcs.insert({r.lhs, e.label});
        adj[index.at(r.lhs)].insert(index.at(e.label));
      }

  // Tarjan; emits components in reverse topological order.
  std::size_t n = ng.vertices.size();
  std::vector<int> low(n, -1), num(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  int counter = 0;
  std::function<void(std::size_t)> strongconnect = [&](std::size_t v) {
    num[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (std::size_t w : adj[v]) {
      if (num[w] < 0) {
        strongconnect(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], num[w]);
      }
    }
    if (low[v] == num[v]) {
      std::vector<std::size_t> comp;
      for (;;) {
        std::size_t w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp.push_back(w);
        if (w == v) break;
      }
      std::sort(comp.begin(), comp.end());  // stable: declaration order
      std::vector<Label> labels;
      for (std::size_t i : comp) labels.push_back(ng.vertices[i]);
      ng.scc_order.push_back(std::move(labels));
    }
  };
  for (std::size_t v = 0; v < n; ++v)
    if (num[v] < 0) strongconnect(v);
  return ng;
}

enum class RecursionClass { nonrecursive, linear, nonlinear };

inline const char* to_string(RecursionClass c) {
  switch (c) {
    case RecursionClass::nonrecursive: return "nonrecursive";
    case RecursionClass::linear: return "linear";
    case RecursionClass::nonlinear: return "nonlinear";
  }
  return "?";
}

/// Nonrecursive iff the nonterminal graph is acyclic. A recursive grammar is
/// nonlinear iff some rule whose lhs lies in a cyclic component has two or
/// more rhs edges labeled inside that component (two disjoint same-component
/// descents from one derivation node).
inline RecursionClass classify_recursion(const FGG& g) {
  NonterminalGraph ng = nonterminal_graph(g);
  std::map<Label, std::size_t> comp_of;
  for (std::size_t c = 0; c < ng.scc_order.size(); ++c)
    for (const Label& l : ng.scc_order[c]) comp_of[l] = c;
  std::set<std::size_t> cyclic;
  for (std::size_t c = 0; c < ng.scc_order.size(); ++c) {
    if (ng.scc_order[c].size() > 1)
      cyclic.insert(c);
    else if (ng.arcs.count({ng.scc_order[c][0], ng.scc_order[c][0]}))
      cyclic.insert(c);
  }
  if (cyclic.empty()) return RecursionClass::nonrecursive;
  for (const Rule& r : g.rules) {
    std::size_t c = comp_of.at(r.lhs);
    if (!cyclic.count(c)) continue;
    std::size_t in_comp = 0;
    for (const Edge& e : r.rhs.graph.edges)
      if (g.is_nonterminal(e.label) && comp_of.at(e.label) == c) ++in_comp;
    if (in_comp >= 2) return RecursionClass::nonlinear;
  }
  return RecursionClass::linear;
}

namespace detail {

// Nonterminals with at least one complete derivation.
inline std::set<Label> productive_nonterminals(const FGG& g) {
  std::set<Label> prod;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Rule& r : g.rules) {
      if (prod.count(r.lhs)) continue;
      bool ok = true;
      for (const Edge& e : r.rhs.graph.edges)
        if (g.is_nonterminal(e.label) && !prod.count(e.label)) ok = false;
      if (ok) {
        prod.insert(r.lhs);
        changed = true;
      }
    }
  }
  return prod;
}

}  // namespace detail

/// True iff no derivation contains two X-type subderivations for any X:
/// the grammar is nonrecursive and the maximum occurrence count of every
/// nonterminal over complete derivations is at most one.
inline bool is_nonreentrant(const FGG& g) {
  if (classify_recursion(g) != RecursionClass::nonrecursive) return false;
  std::set<Label> prod = detail::productive_nonterminals(g);
  if (!prod.count(g.start)) return true;  // no derivations at all

  NonterminalGraph ng = nonterminal_graph(g);
  // scc_order is reverse topological, so every component is a singleton and
  // callees precede callers; a single pass fills the DP bottom-up.
  std::map<Label, std::map<Label, std::size_t>> maxocc;
  for (const auto& comp : ng.scc_order) {
    const Label& y = comp[0];
    if (!prod.count(y)) continue;
    std::map<Label, std::size_t> best;
    best[y] = 1;
    for (const Rule* r : g.rules_for(y)) {
      bool usable = true;
      std::map<Label, std::size_t> occ;
      occ[y] = 1;
      for (const Edge& e : r->rhs.graph.edges) {
        if (!g.is_nonterminal(e.label)) continue;
        if (!prod.count(e.label)) {
          usable = false;
          break;
        }
        for (const auto& [x, c] : maxocc.at(e.label)) occ[x] += c;
      }
      if (!usable) continue;
      for (const auto& [x, c] : occ) best[x] = std::max(best[x], c);
    }
    maxocc[y] = std::move(best);
  }
  for (const auto& [_, c] : maxocc.at(g.start))
    if (c >= 2) return false;
  return true;
}

/// Duplicates rules and renames nonterminals so that every nonterminal is
/// used at most once per derivation. Unreachable rules are dropped. The
/// generated weighted graph language is unchanged; fails if the output
/// would exceed `rule_limit` rules.
inline FGG make_nonreentrant(const FGG& g, std::size_t rule_limit = 10000) {
  if (classify_recursion(g) != RecursionClass::nonrecursive)
    fail(errc::recursive_input, "make_nonreentrant needs a nonrecursive FGG");

  FGG out;
  out.space.node_labels = g.space.node_labels;
  out.space.domains = g.space.domains;
  for (const Label& t : g.terminals) {
    out.space.add_edge_label(t, g.space.signature_of(t), g.space.factors.at(t));
    out.terminals.push_back(t);
  }

  std::set<Label> used(g.space.edge_labels.begin(), g.space.edge_labels.end());
  // Fresh names carry the occurrence path (rule/edge ids from the start).
  auto fresh = [&](const Label& base, const std::string& path) {
    Label cand = base + "@" + path;
    while (!used.insert(cand).second) cand += "'";
    return cand;
  };

  out.start = g.start;
  out.space.add_edge_label(g.start, g.space.signature_of(g.start));
  out.nonterminals.push_back(g.start);
  struct Occurrence {
    Label orig, renamed;
    std::string path;
  };
  std::deque<Occurrence> queue;
  queue.push_back({g.start, g.start, ""});
  while (!queue.empty()) {
    Occurrence occ = queue.front();
    queue.pop_front();
    for (const Rule* r : g.rules_for(occ.orig)) {
      Rule nr;
      nr.id = occ.path.empty() ? r->id : r->id + "@" + occ.path;
      nr.lhs = occ.renamed;
      nr.rhs = r->rhs;
      for (Edge& e : nr.rhs.graph.edges) {
        if (!g.is_nonterminal(e.label)) continue;
        std::string path =
            occ.path.empty() ? r->id + "/" + e.id
                             : occ.path + "." + r->id + "/" + e.id;
        Label nn = fresh(e.label, path);
        out.space.add_edge_label(nn, g.space.signature_of(e.label));
        out.nonterminals.push_back(nn);
        queue.push_back({e.label, nn, path});
        e.label = nn;
      }
      out.rules.push_back(std::move(nr));
      if (out.rules.size() > rule_limit)
        fail(errc::blowup_limit_exceeded,
             "more than " + std::to_string(rule_limit) + " rules");
    }
  }
  return out;
}

}  // namespace fgg
