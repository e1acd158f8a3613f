#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "fgg/grammar.hpp"

namespace fgg {

struct Bag {
  std::string id;
  std::vector<NodeId> nodes;   // rhs node declaration order
  std::vector<EdgeId> edges;   // edges assigned to this bag
};

/// Rooted tree decomposition of a fragment augmented with a virtual
/// hyperedge over its externals; the root bag contains all externals.
struct TreeDecomposition {
  std::vector<Bag> bags;  // construction order
  std::map<std::string, std::string> parent;  // absent for the root
  std::string root;

  int width() const {
    int w = -1;
    for (const Bag& b : bags) w = std::max(w, static_cast<int>(b.nodes.size()) - 1);
    return w;
  }

  const Bag& bag(const std::string& id) const {
    for (const Bag& b : bags)
      if (b.id == id) return b;
    fail(errc::invalid_decomposition, "no bag " + id);
  }
};

enum class DecompStrategy { minfill, mindegree };

/// Verifies node cover, edge cover (each edge in exactly one bag covering
/// its endpoints), running intersection, tree shape, and externals in the
/// root bag. Throws InvalidDecomposition otherwise.
inline void check_tree_decomposition(const Fragment& frag,
                                     const TreeDecomposition& td) {
  std::set<NodeId> all_nodes;
  for (const Node& n : frag.graph.nodes) all_nodes.insert(n.id);
  std::set<NodeId> covered;
  std::map<std::string, const Bag*> by_id;
  for (const Bag& b : td.bags) {
    if (!by_id.emplace(b.id, &b).second)
      fail(errc::invalid_decomposition, "duplicate bag " + b.id);
    for (const NodeId& v : b.nodes) {
      if (!all_nodes.count(v))
        fail(errc::invalid_decomposition, "bag " + b.id + " holds foreign " + v);
      covered.insert(v);
    }
  }
  if (covered != all_nodes)
    fail(errc::invalid_decomposition, "node cover violated");

  std::map<EdgeId, int> assigned;
  for (const Bag& b : td.bags) {
    std::set<NodeId> vb(b.nodes.begin(), b.nodes.end());
    for (const EdgeId& eid : b.edges) {
      const Edge* e = frag.graph.find_edge(eid);
      if (!e) fail(errc::invalid_decomposition, "bag edge " + eid);
      ++assigned[eid];
      for (const NodeId& v : e->att)
        if (!vb.count(v))
          fail(errc::invalid_decomposition,
               "edge " + eid + " not covered by bag " + b.id);
    }
  }
  for (const Edge& e : frag.graph.edges)
    if (assigned[e.id] != 1)
      fail(errc::invalid_decomposition, "edge cover violated at " + e.id);

  // Tree shape: parent links acyclic, all bags reach the root.
  if (!by_id.count(td.root)) fail(errc::invalid_decomposition, "missing root");
  for (const Bag& b : td.bags) {
    std::set<std::string> seen;
    std::string cur = b.id;
    while (cur != td.root) {
      if (!seen.insert(cur).second)
        fail(errc::invalid_decomposition, "parent cycle at " + cur);
      auto it = td.parent.find(cur);
      if (it == td.parent.end())
        fail(errc::invalid_decomposition, "bag " + cur + " detached");
      cur = it->second;
    }
  }

  // Running intersection: bags containing v form a connected subtree.
  for (const NodeId& v : all_nodes) {
    std::set<std::string> holding;
    for (const Bag& b : td.bags)
      for (const NodeId& u : b.nodes)
        if (u == v) holding.insert(b.id);
    // Walk each holding bag to the root; v's subtree is connected iff every
    // holding bag's parent chain stays inside `holding` until the topmost
    // holding bag is reached.
    std::string top;
    std::map<std::string, std::size_t> depth;
    for (const Bag& b : td.bags) {
      std::size_t d = 0;
      std::string cur = b.id;
      while (cur != td.root) {
        cur = td.parent.at(cur);
        ++d;
      }
      depth[b.id] = d;
    }
    for (const auto& h : holding)
      if (top.empty() || depth[h] < depth[top]) top = h;
    for (const auto& h : holding) {
      std::string cur = h;
      while (cur != top) {
        if (!holding.count(cur))
          fail(errc::invalid_decomposition,
               "running intersection violated for " + v);
        if (cur == td.root) break;
        cur = td.parent.at(cur);
      }
      if (cur != top && !holding.count(cur))
        fail(errc::invalid_decomposition,
             "running intersection violated for " + v);
    }
  }

  std::set<NodeId> root_nodes(td.bag(td.root).nodes.begin(),
                              td.bag(td.root).nodes.end());
  for (const NodeId& x : frag.externals)
    if (!root_nodes.count(x))
      fail(errc::invalid_decomposition, "external " + x + " outside root bag");
}

/// Heuristic tree decomposition by elimination (minfill or mindegree),
/// with the externals forced into one bag that becomes the root. Subset
/// bags are merged away. Width is heuristic, not guaranteed optimal.
inline TreeDecomposition tree_decompose(const Fragment& frag,
                                        DecompStrategy strategy =
                                            DecompStrategy::minfill) {
  const std::vector<Node>& nodes = frag.graph.nodes;
  std::size_t n = nodes.size();
  std::map<NodeId, std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i) idx[nodes[i].id] = i;

  // Moral graph of the fragment plus a virtual clique over the externals.
  std::vector<std::set<std::size_t>> adj(n);
  auto connect = [&](const std::vector<std::size_t>& group) {
    for (std::size_t a : group)
      for (std::size_t b : group)
        if (a != b) adj[a].insert(b);
  };
  for (const Edge& e : frag.graph.edges) {
    std::vector<std::size_t> group;
    for (const NodeId& v : e.att) group.push_back(idx.at(v));
    connect(group);
  }
  {
    std::vector<std::size_t> ext;
    for (const NodeId& v : frag.externals) ext.push_back(idx.at(v));
    connect(ext);
  }

  // Eliminate; bag_i = {v_i} + its neighbors at elimination time.
  std::vector<bool> gone(n, false);
  std::vector<std::vector<std::size_t>> bag_members;
  std::vector<std::size_t> elim_order;
  std::vector<int> elim_pos(n, -1);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t best = n;
    long best_score = -1;
    for (std::size_t v = 0; v < n; ++v) {
      if (gone[v]) continue;
      long score;
      if (strategy == DecompStrategy::mindegree) {
        score = static_cast<long>(adj[v].size());
      } else {
        score = 0;  // missing edges among neighbors
        for (std::size_t a : adj[v])
          for (std::size_t b : adj[v])
            if (a < b && !adj[a].count(b)) ++score;
      }
      if (best == n || score < best_score) {
        best = v;
        best_score = score;
      }
    }
    std::vector<std::size_t> members{best};
    for (std::size_t u : adj[best]) members.push_back(u);
    std::sort(members.begin(), members.end());
    bag_members.push_back(std::move(members));
    elim_pos[best] = static_cast<int>(step);
    elim_order.push_back(best);
    for (std::size_t a : adj[best])
      for (std::size_t b : adj[best])
        if (a != b) adj[a].insert(b);
    for (std::size_t u : adj[best]) adj[u].erase(best);
    adj[best].clear();
    gone[best] = true;
  }
  if (n == 0) bag_members.push_back({});  // single empty bag

  // Tree: each bag attaches to the bag of its earliest-eliminated other
  // member; bags fully contained in that neighbor are merged into it.
  std::size_t m = bag_members.size();
  std::vector<int> attach(m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    int first = -1;
    for (std::size_t u : bag_members[i]) {
      if (i < elim_order.size() && u == elim_order[i]) continue;
      if (first < 0 || elim_pos[u] < first) first = elim_pos[u];
    }
    attach[i] = first;  // -1 for bags with no later members
  }

  std::vector<int> merged_into(m, -1);
  auto target = [&](std::size_t i) {
    std::size_t cur = i;
    while (merged_into[cur] >= 0) cur = merged_into[cur];
    return cur;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < m; ++i) {
      if (merged_into[i] >= 0 || attach[i] < 0) continue;
      std::size_t p = target(attach[i]);
      if (p == i) continue;
      const auto& a = bag_members[i];
      const auto& b = bag_members[p];
      if (std::includes(b.begin(), b.end(), a.begin(), a.end())) {
        merged_into[i] = static_cast<int>(p);
        changed = true;
      } else if (std::includes(a.begin(), a.end(), b.begin(), b.end())) {
        // Parent is a subset of the child: absorb the parent downward.
        merged_into[p] = static_cast<int>(i);
        attach[i] = attach[p];
        changed = true;
      }
    }
  }

  std::vector<std::size_t> kept;
  std::map<std::size_t, std::size_t> kept_index;
  for (std::size_t i = 0; i < m; ++i)
    if (merged_into[i] < 0) {
      kept_index[i] = kept.size();
      kept.push_back(i);
    }

  TreeDecomposition td;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    Bag b;
    b.id = "b" + std::to_string(k);
    for (std::size_t u : bag_members[kept[k]]) b.nodes.push_back(nodes[u].id);
    td.bags.push_back(std::move(b));
  }

  // Root: the first bag containing all externals (the virtual clique
  // guarantees one exists), then parents via BFS over the merged tree.
  std::set<NodeId> ext(frag.externals.begin(), frag.externals.end());
  std::size_t root_k = 0;
  for (std::size_t k = 0; k < td.bags.size(); ++k) {
    std::set<NodeId> vb(td.bags[k].nodes.begin(), td.bags[k].nodes.end());
    bool all = true;
    for (const NodeId& x : ext)
      if (!vb.count(x)) all = false;
    if (all) {
      root_k = k;
      break;
    }
  }
  td.root = td.bags[root_k].id;

  std::vector<std::set<std::size_t>> tree_adj(kept.size());
  for (std::size_t i = 0; i < m; ++i) {
    if (merged_into[i] >= 0 || attach[i] < 0) continue;
    std::size_t a = kept_index.at(target(i));
    std::size_t b = kept_index.at(target(attach[i]));
    if (a != b) {
      tree_adj[a].insert(b);
      tree_adj[b].insert(a);
    }
  }
  {  // orient away from the root; stray components hang off the root
    std::vector<bool> seen(kept.size(), false);
    std::vector<std::size_t> queue{root_k};
    seen[root_k] = true;
    while (!queue.empty()) {
      std::size_t cur = queue.back();
      queue.pop_back();
      for (std::size_t nb : tree_adj[cur])
        if (!seen[nb]) {
          seen[nb] = true;
          td.parent[td.bags[nb].id] = td.bags[cur].id;
          queue.push_back(nb);
        }
    }
    for (std::size_t k = 0; k < kept.size(); ++k)
      if (!seen[k]) {
        // Disconnected piece (no externals, no shared nodes with the rest).
        std::vector<std::size_t> q2{k};
        seen[k] = true;
        td.parent[td.bags[k].id] = td.bags[root_k].id;
        while (!q2.empty()) {
          std::size_t cur = q2.back();
          q2.pop_back();
          for (std::size_t nb : tree_adj[cur])
            if (!seen[nb]) {
              seen[nb] = true;
              td.parent[td.bags[nb].id] = td.bags[cur].id;
              q2.push_back(nb);
            }
        }
      }
  }

  // Each edge lands in the first bag (bag order) covering its endpoints.
  for (const Edge& e : frag.graph.edges) {
    bool placed = false;
    for (Bag& b : td.bags) {
      std::set<NodeId> vb(b.nodes.begin(), b.nodes.end());
      bool covers = true;
      for (const NodeId& v : e.att)
        if (!vb.count(v)) covers = false;
      if (covers) {
        b.edges.push_back(e.id);
        placed = true;
        break;
      }
    }
    if (!placed)
      fail(errc::internal, "edge " + e.id + " not covered by any bag");
  }

  check_tree_decomposition(frag, td);
  return td;
}

struct FactorizedRules {
  std::vector<Rule> rules;                       // root-bag rule first
  std::vector<std::pair<Label, std::vector<Label>>> new_nonterminals;
};

/// Splits one rule along a tree decomposition of its rhs: the root bag
/// keeps the lhs and externals, every other bag becomes a fresh
/// nonterminal whose interface is the overlap with its parent.
inline FactorizedRules factorize_rule(const FGG& g, const Rule& rule,
                                      const TreeDecomposition& td) {
  check_tree_decomposition(rule.rhs, td);
  FactorizedRules out;

  std::map<std::string, std::vector<std::string>> children;
  for (const Bag& b : td.bags)
    if (b.id != td.root) children[td.parent.at(b.id)].push_back(b.id);

  // Deterministic interface order: rhs node declaration order.
  std::map<NodeId, std::size_t> node_order;
  for (std::size_t i = 0; i < rule.rhs.graph.nodes.size(); ++i)
    node_order[rule.rhs.graph.nodes[i].id] = i;
  auto overlap = [&](const Bag& a, const Bag& b) {
    std::set<NodeId> sb(b.nodes.begin(), b.nodes.end());
    std::vector<NodeId> out_nodes;
    for (const Node& n : rule.rhs.graph.nodes)
      if (sb.count(n.id) &&
          std::find(a.nodes.begin(), a.nodes.end(), n.id) != a.nodes.end())
        out_nodes.push_back(n.id);
    return out_nodes;
  };

  std::map<std::string, Label> bag_nt;
  for (const Bag& b : td.bags) {
    if (b.id == td.root) {
      bag_nt[b.id] = rule.lhs;
      continue;
    }
    Label nt = rule.lhs + "#" + rule.id + "#" + b.id;
    while (g.space.has_edge_label(nt)) nt += "'";
    bag_nt[b.id] = nt;
  }

  // Emit root first, then the other bags in construction order.
  std::vector<const Bag*> order{&td.bag(td.root)};
  for (const Bag& b : td.bags)
    if (b.id != td.root) order.push_back(&b);

  for (const Bag* b : order) {
    Rule r;
    r.id = b->id == td.root ? rule.id : rule.id + "#" + b->id;
    r.lhs = bag_nt.at(b->id);
    std::set<NodeId> vb(b->nodes.begin(), b->nodes.end());
    for (const Node& n : rule.rhs.graph.nodes)
      if (vb.count(n.id)) r.rhs.graph.nodes.push_back(n);
    for (const EdgeId& eid : b->edges)
      r.rhs.graph.edges.push_back(*rule.rhs.graph.find_edge(eid));
    if (b->id == td.root) {
      r.rhs.externals = rule.rhs.externals;
    } else {
      r.rhs.externals = overlap(td.bag(td.parent.at(b->id)), *b);
      std::vector<Label> sig;
      for (const NodeId& v : r.rhs.externals)
        sig.push_back(rule.rhs.graph.find_node(v)->label);
      out.new_nonterminals.emplace_back(r.lhs, std::move(sig));
    }
    for (const std::string& cid : children[b->id]) {
      std::vector<NodeId> att = overlap(*b, td.bag(cid));
      r.rhs.graph.edges.push_back({"nt#" + cid, bag_nt.at(cid), att});
    }
    out.rules.push_back(std::move(r));
  }
  return out;
}

struct FactorizeReport {
  struct PerRule {
    std::string rule_id;
    int width;
    std::size_t bags;
  };
  std::vector<PerRule> rules;
  int max_width = -1;
};

/// Rewrites the grammar so every rhs has at most (achieved width + 1)
/// nodes, preserving the generated weighted language.
inline FGG factorize_fgg(const FGG& g,
                         DecompStrategy strategy = DecompStrategy::minfill,
                         FactorizeReport* report = nullptr) {
  FGG out;
  out.space = g.space;
  out.nonterminals = g.nonterminals;
  out.terminals = g.terminals;
  out.start = g.start;
  for (const Rule& r : g.rules) {
    TreeDecomposition td = tree_decompose(r.rhs, strategy);
    if (report)
      report->rules.push_back({r.id, td.width(), td.bags.size()});
    if (report) report->max_width = std::max(report->max_width, td.width());
    FactorizedRules fr = factorize_rule(out, r, td);
    for (auto& [nt, sig] : fr.new_nonterminals) {
      out.space.add_edge_label(nt, sig);
      out.nonterminals.push_back(nt);
    }
    for (Rule& nr : fr.rules) out.rules.push_back(std::move(nr));
  }
  validate_fgg(out);
  return out;
}

}  // namespace fgg
