#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "fgg/error.hpp"

namespace fgg {

using Label = std::string;
using NodeId = std::string;
using EdgeId = std::string;

enum class SemiringId { real, viterbi };

inline double sr_zero() { return 0.0; }
inline double sr_one() { return 1.0; }

inline double sr_add(SemiringId s, double a, double b) {
  return s == SemiringId::real ? a + b : std::max(a, b);
}

// Multiplication with 0 absorbing, so that 0 * inf = 0 rather than NaN.
// Divergent sum-products are reported as +inf and must not leak NaNs into
// branches that a zero factor has already killed.
inline double sr_mul(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

/// Cap on dense-table materialization, overridable via FGG_MAX_TABLE.
inline std::size_t max_table_entries() {
  static const std::size_t cap = [] {
    if (const char* s = std::getenv("FGG_MAX_TABLE")) {
      char* end = nullptr;
      unsigned long long v = std::strtoull(s, &end, 10);
      if (end != s && v > 0) return static_cast<std::size_t>(v);
    }
    return static_cast<std::size_t>(100'000'000);
  }();
  return cap;
}

// Product of domain sizes with overflow/cap checking.
inline std::size_t checked_size(const std::vector<std::size_t>& shape,
                                std::size_t cap, errc code) {
  std::size_t n = 1;
  for (std::size_t s : shape) {
    if (s == 0) return 0;
    if (n > cap / s) fail(code, "table of shape product exceeds cap");
    n *= s;
  }
  if (n > cap) fail(code, "table of shape product exceeds cap");
  return n;
}

// Row-major odometer; returns false after the last tuple.
inline bool next_tuple(std::vector<std::size_t>& t,
                       const std::vector<std::size_t>& shape) {
  for (std::size_t i = t.size(); i-- > 0;) {
    if (++t[i] < shape[i]) return true;
    t[i] = 0;
  }
  return false;
}

/// A factor: either a dense row-major table over the edge signature's
/// assignment space, or a bare constant for 0-ary edges.
struct FactorFunction {
  enum class Kind { dense_table, constant };

  Kind kind = Kind::constant;
  std::vector<double> table;  // row-major in signature order
  double value = 0.0;

  static FactorFunction dense(std::vector<double> t) {
    FactorFunction f;
    f.kind = Kind::dense_table;
    f.table = std::move(t);
    return f;
  }

  static FactorFunction constant(double v) {
    FactorFunction f;
    f.kind = Kind::constant;
    f.value = v;
    return f;
  }

  double at(std::size_t flat) const {
    return kind == Kind::constant ? value : table[flat];
  }

  bool operator==(const FactorFunction&) const = default;
};

struct Node {
  NodeId id;
  Label label;
  bool operator==(const Node&) const = default;
};

struct Edge {
  EdgeId id;
  Label label;
  std::vector<NodeId> att;  // ordered endpoints, repeats allowed
  bool operator==(const Edge&) const = default;
};

struct Hypergraph {
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  const Node* find_node(const NodeId& id) const {
    for (const Node& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }

  const Edge* find_edge(const EdgeId& id) const {
    for (const Edge& e : edges)
      if (e.id == id) return &e;
    return nullptr;
  }

  bool operator==(const Hypergraph&) const = default;
};

/// Hypergraph plus an ordered external-node interface.
struct Fragment {
  Hypergraph graph;
  std::vector<NodeId> externals;
  bool operator==(const Fragment&) const = default;
};

/// Maps every node of a graph to an index into its label's domain.
struct Assignment {
  std::map<NodeId, std::size_t> values;
};

/// Global label alphabets: node-label domains, edge-label signatures, and
/// factors for terminal edge labels.
struct LabelSpace {
  std::vector<Label> node_labels;  // declaration order
  std::vector<Label> edge_labels;
  std::map<Label, std::vector<Label>> signature;
  std::map<Label, std::vector<std::string>> domains;
  std::map<Label, FactorFunction> factors;

  bool has_node_label(const Label& l) const { return domains.count(l) != 0; }
  bool has_edge_label(const Label& l) const { return signature.count(l) != 0; }

  void add_node_label(const Label& l, std::vector<std::string> values) {
    if (has_node_label(l)) fail(errc::duplicate_id, "node label " + l);
    node_labels.push_back(l);
    domains[l] = std::move(values);
  }

  void add_edge_label(const Label& l, std::vector<Label> sig) {
    if (has_edge_label(l)) fail(errc::duplicate_id, "edge label " + l);
    edge_labels.push_back(l);
    signature[l] = std::move(sig);
  }

  void add_edge_label(const Label& l, std::vector<Label> sig,
                      FactorFunction factor) {
    add_edge_label(l, std::move(sig));
    factors[l] = std::move(factor);
  }

  std::size_t domain_size(const Label& node_label) const {
    auto it = domains.find(node_label);
    if (it == domains.end()) fail(errc::unknown_label, "node label " + node_label);
    return it->second.size();
  }

  const std::vector<Label>& signature_of(const Label& edge_label) const {
    auto it = signature.find(edge_label);
    if (it == signature.end()) fail(errc::unknown_label, "edge label " + edge_label);
    return it->second;
  }

  std::vector<std::size_t> shape_of(const Label& edge_label) const {
    std::vector<std::size_t> shape;
    for (const Label& l : signature_of(edge_label)) shape.push_back(domain_size(l));
    return shape;
  }

  /// Checks the label-space invariants: declared labels, non-empty
  /// duplicate-free domains, and factor tables shaped by their signatures.
  void check() const {
    for (const Label& l : node_labels) {
      const auto& vals = domains.at(l);
      if (vals.empty()) fail(errc::label_class, "empty domain for " + l);
      std::set<std::string> seen(vals.begin(), vals.end());
      if (seen.size() != vals.size())
        fail(errc::duplicate_id, "duplicate domain value under " + l);
    }
    for (const Label& l : edge_labels) {
      for (const Label& nl : signature.at(l))
        if (!has_node_label(nl))
          fail(errc::unknown_label, "signature of " + l + " uses " + nl);
    }
    for (const auto& [l, f] : factors) {
      if (!has_edge_label(l)) fail(errc::unknown_label, "factor for " + l);
      std::size_t want =
          checked_size(shape_of(l), max_table_entries(), errc::table_too_large);
      if (f.kind == FactorFunction::Kind::constant) {
        if (!signature.at(l).empty())
          fail(errc::arity_mismatch, "constant factor on non-0-ary label " + l);
        if (f.value < 0.0) fail(errc::label_class, "negative factor for " + l);
      } else {
        if (f.table.size() != want)
          fail(errc::arity_mismatch, "factor table size for " + l);
        for (double v : f.table)
          if (v < 0.0) fail(errc::label_class, "negative factor entry for " + l);
      }
    }
  }
};

/// Validates a hypergraph against a label space: unique ids, known labels,
/// edge arities and positional endpoint labels per the signature.
inline void validate(const LabelSpace& space, const Hypergraph& g) {
  std::unordered_map<std::string, Label> node_label_of;
  for (const Node& n : g.nodes) {
    if (!node_label_of.emplace(n.id, n.label).second)
      fail(errc::duplicate_id, "node " + n.id);
    if (!space.has_node_label(n.label))
      fail(errc::unknown_label, "node " + n.id + " labeled " + n.label);
  }
  std::set<EdgeId> edge_ids;
  for (const Edge& e : g.edges) {
    if (!edge_ids.insert(e.id).second) fail(errc::duplicate_id, "edge " + e.id);
    if (!space.has_edge_label(e.label))
      fail(errc::unknown_label, "edge " + e.id + " labeled " + e.label);
    const auto& sig = space.signature_of(e.label);
    if (e.att.size() != sig.size())
      fail(errc::arity_mismatch, "edge " + e.id + " has " +
                                     std::to_string(e.att.size()) +
                                     " endpoints, signature wants " +
                                     std::to_string(sig.size()));
    for (std::size_t i = 0; i < sig.size(); ++i) {
      auto it = node_label_of.find(e.att[i]);
      if (it == node_label_of.end())
        fail(errc::unknown_label, "edge " + e.id + " endpoint " + e.att[i]);
      if (it->second != sig[i])
        fail(errc::label_mismatch, "edge " + e.id + " position " +
                                       std::to_string(i + 1) + ": expected " +
                                       sig[i] + ", got " + it->second);
    }
  }
}

inline void validate(const LabelSpace& space, const Fragment& frag) {
  validate(space, frag.graph);
  std::set<NodeId> seen;
  for (const NodeId& x : frag.externals) {
    if (!frag.graph.find_node(x))
      fail(errc::unknown_label, "external " + x + " is not a node");
    if (!seen.insert(x).second) fail(errc::duplicate_id, "external " + x);
  }
}

namespace detail {

// Node ids resolved to dense indices for fast weight evaluation.
struct IndexedGraph {
  std::vector<std::size_t> domain_sizes;            // per node
  std::vector<std::vector<std::size_t>> edge_att;   // per edge, node indices
  std::vector<std::vector<std::size_t>> edge_shape; // per edge, domain sizes
  std::vector<const FactorFunction*> edge_factor;
  std::unordered_map<NodeId, std::size_t> node_index;

  IndexedGraph(const LabelSpace& space, const Hypergraph& g) {
    node_index.reserve(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      node_index.emplace(g.nodes[i].id, i);
      domain_sizes.push_back(space.domain_size(g.nodes[i].label));
    }
    for (const Edge& e : g.edges) {
      auto f = space.factors.find(e.label);
      if (f == space.factors.end())
        fail(errc::nonterminal_edge_present,
             "edge " + e.id + " labeled " + e.label + " has no factor");
      edge_factor.push_back(&f->second);
      std::vector<std::size_t> att, shape;
      for (const NodeId& v : e.att) {
        att.push_back(node_index.at(v));
        shape.push_back(domain_sizes[att.back()]);
      }
      edge_att.push_back(std::move(att));
      edge_shape.push_back(std::move(shape));
    }
  }

  double weight(const std::vector<std::size_t>& values) const {
    double w = 1.0;
    for (std::size_t e = 0; e < edge_att.size(); ++e) {
      std::size_t flat = 0;
      for (std::size_t i = 0; i < edge_att[e].size(); ++i)
        flat = flat * edge_shape[e][i] + values[edge_att[e][i]];
      w = sr_mul(w, edge_factor[e]->at(flat));
      if (w == 0.0) return 0.0;
    }
    return w;
  }
};

}  // namespace detail

/// Weight of an assignment: the product over edges of their factor values.
/// The graph must be terminal-only (every edge label carries a factor).
inline double assignment_weight(const LabelSpace& space, const Hypergraph& g,
                                const Assignment& xi) {
  detail::IndexedGraph ig(space, g);
  std::vector<std::size_t> values(g.nodes.size(), 0);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    auto it = xi.values.find(g.nodes[i].id);
    if (it == xi.values.end())
      fail(errc::unknown_label, "assignment misses node " + g.nodes[i].id);
    if (it->second >= ig.domain_sizes[i])
      fail(errc::label_class, "assignment out of range at " + g.nodes[i].id);
    values[i] = it->second;
  }
  if (xi.values.size() != g.nodes.size())
    fail(errc::unknown_label, "assignment covers nodes outside the graph");
  return ig.weight(values);
}

/// Exhaustive sum-product over all assignments of a terminal-only graph.
/// `real` sums weights, `viterbi` maximizes. The assignment count is capped.
inline double brute_force_sum_product(const LabelSpace& space,
                                      const Hypergraph& g, SemiringId semiring,
                                      std::size_t cap = 10'000'000) {
  detail::IndexedGraph ig(space, g);
  checked_size(ig.domain_sizes, cap, errc::assignment_space_too_large);
  std::vector<std::size_t> values(g.nodes.size(), 0);
  double acc = sr_zero();
  do {
    acc = sr_add(semiring, acc, ig.weight(values));
  } while (next_tuple(values, ig.domain_sizes));
  return acc;
}

/// Exact real-semiring sum-product by variable elimination (min-degree
/// order). Exponential only in the elimination width, so it reaches graphs
/// far beyond the brute-force cap.
inline double eliminate_sum_product(const LabelSpace& space,
                                    const Hypergraph& g,
                                    std::size_t table_cap = 0) {
  if (table_cap == 0) table_cap = max_table_entries();
  detail::IndexedGraph ig(space, g);

  struct Tab {
    std::vector<std::size_t> vars;   // node indices, ascending
    std::vector<std::size_t> shape;
    std::vector<double> values;     // row-major over vars
  };
  std::vector<Tab> tabs;
  double scalar = 1.0;
  for (std::size_t e = 0; e < ig.edge_att.size(); ++e) {
    std::vector<std::size_t> vars(ig.edge_att[e]);
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    Tab t;
    t.vars = vars;
    for (std::size_t v : vars) t.shape.push_back(ig.domain_sizes[v]);
    std::size_t n = checked_size(t.shape, table_cap, errc::table_too_large);
    t.values.assign(std::max<std::size_t>(n, 1), 0.0);
    std::vector<std::size_t> tuple(vars.size(), 0);
    do {
      std::size_t flat_e = 0;
      for (std::size_t i = 0; i < ig.edge_att[e].size(); ++i) {
        std::size_t pos = std::lower_bound(vars.begin(), vars.end(),
                                           ig.edge_att[e][i]) -
                          vars.begin();
        flat_e = flat_e * ig.edge_shape[e][i] + tuple[pos];
      }
      std::size_t flat_t = 0;
      for (std::size_t i = 0; i < vars.size(); ++i)
        flat_t = flat_t * t.shape[i] + tuple[i];
      t.values[flat_t] = ig.edge_factor[e]->at(flat_e);
    } while (next_tuple(tuple, t.shape));
    if (vars.empty())
      scalar = sr_mul(scalar, t.values[0]);
    else
      tabs.push_back(std::move(t));
  }

  std::set<std::size_t> alive;
  for (const Tab& t : tabs) alive.insert(t.vars.begin(), t.vars.end());
  // Nodes touched by no factor sum out to their domain size.
  for (std::size_t v = 0; v < ig.domain_sizes.size(); ++v)
    if (!alive.count(v)) scalar *= static_cast<double>(ig.domain_sizes[v]);

  while (!alive.empty()) {
    // Min-degree: eliminate the variable with the fewest co-occurring vars.
    std::size_t best = *alive.begin();
    std::size_t best_deg = std::numeric_limits<std::size_t>::max();
    for (std::size_t v : alive) {
      std::set<std::size_t> nb;
      for (const Tab& t : tabs)
        if (std::binary_search(t.vars.begin(), t.vars.end(), v))
          nb.insert(t.vars.begin(), t.vars.end());
      nb.erase(v);
      if (nb.size() < best_deg) {
        best_deg = nb.size();
        best = v;
      }
    }

    std::vector<Tab> touching, rest;
    for (Tab& t : tabs) {
      if (std::binary_search(t.vars.begin(), t.vars.end(), best))
        touching.push_back(std::move(t));
      else
        rest.push_back(std::move(t));
    }
    std::set<std::size_t> uvars;
    for (const Tab& t : touching) uvars.insert(t.vars.begin(), t.vars.end());
    uvars.erase(best);

    Tab prod;
    prod.vars.assign(uvars.begin(), uvars.end());
    for (std::size_t v : prod.vars) prod.shape.push_back(ig.domain_sizes[v]);
    std::size_t n = checked_size(prod.shape, table_cap, errc::table_too_large);
    prod.values.assign(std::max<std::size_t>(n, 1), 0.0);

    std::vector<std::size_t> out_tuple(prod.vars.size(), 0);
    do {
      double sum = 0.0;
      for (std::size_t x = 0; x < ig.domain_sizes[best]; ++x) {
        double w = 1.0;
        for (const Tab& t : touching) {
          std::size_t flat = 0;
          for (std::size_t i = 0; i < t.vars.size(); ++i) {
            std::size_t val;
            if (t.vars[i] == best) {
              val = x;
            } else {
              std::size_t pos = std::lower_bound(prod.vars.begin(),
                                                 prod.vars.end(), t.vars[i]) -
                                prod.vars.begin();
              val = out_tuple[pos];
            }
            flat = flat * t.shape[i] + val;
          }
          w = sr_mul(w, t.values[flat]);
          if (w == 0.0) break;
        }
        sum += w;
      }
      std::size_t flat_out = 0;
      for (std::size_t i = 0; i < prod.vars.size(); ++i)
        flat_out = flat_out * prod.shape[i] + out_tuple[i];
      prod.values[flat_out] = sum;
    } while (next_tuple(out_tuple, prod.shape));

    alive.erase(best);
    tabs = std::move(rest);
    if (prod.vars.empty())
      scalar = sr_mul(scalar, prod.values[0]);
    else
      tabs.push_back(std::move(prod));
  }
  return scalar;
}

}  // namespace fgg
