#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "fgg/grammar.hpp"
#include "fgg/inference.hpp"

namespace fgg {

/// Gating factor over (B, B1..Bl): weight 1 iff B is true and exactly one
/// Bi is true, or B is false and every Bi is false.
inline FactorFunction cond_one(std::size_t l, std::size_t cap = 20) {
  if (l > cap)
    fail(errc::table_too_large,
         "CondOne over " + std::to_string(l) + " rule switches");
  std::vector<double> table(std::size_t{1} << (l + 1), 0.0);
  for (std::size_t bits = 0; bits < table.size(); ++bits) {
    bool b = (bits >> l) & 1;  // leading endpoint, row-major
    std::size_t ones = 0;
    for (std::size_t i = 0; i < l; ++i) ones += (bits >> (l - 1 - i)) & 1;
    table[bits] = b ? (ones == 1 ? 1.0 : 0.0) : (ones == 0 ? 1.0 : 0.0);
  }
  return FactorFunction::dense(std::move(table));
}

/// Where each compiled variable/factor came from.
struct ProvenanceEntry {
  std::string kind;  // B_nonterminal, B_rule, rule_node_copy, nt_slot,
                     // pin, cond_one_use, cond_one_def, cond_normalize,
                     // cond_factor, cond_equals_use, cond_equals_def
  Label nonterminal;     // for *_nonterminal / nt_slot / cond_one_*
  std::string rule;      // for B_rule / per-rule factors
  std::string node;      // originating rhs node or edge id
  std::size_t slot = 0;  // endpoint index for nt_slot / cond_equals
};

struct CompiledFactorGraph {
  LabelSpace space;
  Hypergraph graph;
  Label bool_label;
  std::map<std::string, ProvenanceEntry> provenance;  // by variable/factor id
  std::size_t variable_count = 0;
  std::size_t factor_count = 0;
};

/// Compiles a nonreentrant FGG into one factor graph with the same
/// sum-product: B variables select a derivation, CondOne factors force
/// exactly one, clusters carry per-rule node copies gated by CondFactor /
/// CondNormalize, and CondEquals ties fused endpoints together.
inline CompiledFactorGraph compile(const FGG& g) {
  if (!is_nonreentrant(g))
    fail(errc::reentrant_input, "compile needs a nonreentrant FGG");

  CompiledFactorGraph out;
  out.space.node_labels = g.space.node_labels;
  out.space.domains = g.space.domains;
  out.bool_label = "B";
  while (out.space.has_node_label(out.bool_label)) out.bool_label += "'";
  out.space.add_node_label(out.bool_label, {"false", "true"});

  auto add_var = [&](const std::string& id, const Label& label,
                     ProvenanceEntry prov) {
    out.graph.nodes.push_back({id, label});
    out.provenance[id] = std::move(prov);
  };
  // One fresh edge label per emitted factor; the label doubles as the id.
  auto add_factor = [&](const std::string& id, std::vector<Label> sig,
                        FactorFunction f, ProvenanceEntry prov) {
    std::string label = id;
    while (out.space.has_edge_label(label)) label += "'";
    out.space.add_edge_label(label, std::move(sig), std::move(f));
    out.provenance[label] = std::move(prov);
    return label;
  };
  auto attach = [&](const std::string& label, std::vector<NodeId> att) {
    out.graph.edges.push_back({label, label, std::move(att)});
  };

  auto b_nt = [&](const Label& x) { return "B." + x; };
  auto b_rule = [&](const std::string& r) { return "B@" + r; };
  auto copy_id = [&](const std::string& r, const NodeId& v) {
    return r + "." + v;
  };
  auto slot_id = [&](const Label& x, std::size_t i) {
    return x + "$" + std::to_string(i);
  };

  for (const Label& x : g.nonterminals)
    add_var(b_nt(x), out.bool_label, {"B_nonterminal", x, "", "", 0});
  for (const Rule& r : g.rules)
    add_var(b_rule(r.id), out.bool_label, {"B_rule", "", r.id, "", 0});

  // Rules holding an X-labeled edge; nonreentrancy admits one such edge
  // per rule, which compile insists on.
  std::map<Label, std::vector<const Rule*>> uses;
  for (const Rule& r : g.rules) {
    std::set<Label> seen;
    for (const Edge& e : r.rhs.graph.edges) {
      if (!g.is_nonterminal(e.label)) continue;
      if (!seen.insert(e.label).second)
        fail(errc::reentrant_input,
             "rule " + r.id + " uses " + e.label + " twice");
      uses[e.label].push_back(&r);
    }
  }

  {  // the start switch is pinned on
    std::string label = add_factor("pin:" + g.start, {out.bool_label},
                                   FactorFunction::dense({0.0, 1.0}),
                                   {"pin", g.start, "", "", 0});
    attach(label, {b_nt(g.start)});
  }
  for (const Label& x : g.nonterminals) {
    if (x != g.start) {
      const auto& rs = uses[x];
      std::vector<NodeId> att{b_nt(x)};
      std::vector<Label> sig{out.bool_label};
      for (const Rule* r : rs) {
        att.push_back(b_rule(r->id));
        sig.push_back(out.bool_label);
      }
      std::string label = add_factor("one:use:" + x, std::move(sig),
                                     cond_one(rs.size()),
                                     {"cond_one_use", x, "", "", 0});
      attach(label, std::move(att));
    }
    std::vector<const Rule*> defs = g.rules_for(x);
    std::vector<NodeId> att{b_nt(x)};
    std::vector<Label> sig{out.bool_label};
    for (const Rule* r : defs) {
      att.push_back(b_rule(r->id));
      sig.push_back(out.bool_label);
    }
    std::string label =
        add_factor("one:def:" + x, std::move(sig), cond_one(defs.size()),
                   {"cond_one_def", x, "", "", 0});
    attach(label, std::move(att));
  }

  auto cond_normalize = [&](const Label& node_label) {
    // Cond(not B, p(v)) with p uniform: row B=false is 1/m, row B=true is 1.
    std::size_t m = out.space.domain_size(node_label);
    std::vector<double> t(2 * m);
    for (std::size_t i = 0; i < m; ++i) {
      t[i] = 1.0 / static_cast<double>(m);
      t[m + i] = 1.0;
    }
    return FactorFunction::dense(std::move(t));
  };
  auto cond_equals = [&](const Label& node_label) {
    std::size_t m = out.space.domain_size(node_label);
    std::vector<double> t(2 * m * m, 0.0);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b)
        t[0 * m * m + a * m + b] = 1.0;  // B=false: always 1
    for (std::size_t a = 0; a < m; ++a) t[m * m + a * m + a] = 1.0;
    return FactorFunction::dense(std::move(t));
  };

  // Per-rule clusters: a copy of every rhs node, a CondNormalize gate for
  // it, and a CondFactor per terminal edge.
  for (const Rule& r : g.rules) {
    for (const Node& n : r.rhs.graph.nodes) {
      add_var(copy_id(r.id, n.id), n.label,
              {"rule_node_copy", "", r.id, n.id, 0});
      std::string label = add_factor(
          "norm:" + r.id + ":" + n.id, {out.bool_label, n.label},
          cond_normalize(n.label), {"cond_normalize", "", r.id, n.id, 0});
      attach(label, {b_rule(r.id), copy_id(r.id, n.id)});
    }
    for (const Edge& e : r.rhs.graph.edges) {
      if (g.is_nonterminal(e.label)) continue;
      const FactorFunction& f = g.space.factors.at(e.label);
      std::vector<Label> sig{out.bool_label};
      std::vector<NodeId> att{b_rule(r.id)};
      std::vector<std::size_t> shape;
      for (const NodeId& v : e.att) {
        const Label& nl = r.rhs.graph.find_node(v)->label;
        sig.push_back(nl);
        att.push_back(copy_id(r.id, v));
        shape.push_back(out.space.domain_size(nl));
      }
      std::size_t m = checked_size(shape, max_table_entries() / 2,
                                   errc::table_too_large);
      std::vector<double> t(2 * m);
      for (std::size_t i = 0; i < m; ++i) {
        t[i] = 1.0;
        t[m + i] = f.at(i);
      }
      std::string label = add_factor("fac:" + r.id + ":" + e.id,
                                     std::move(sig),
                                     FactorFunction::dense(std::move(t)),
                                     {"cond_factor", "", r.id, e.id, 0});
      attach(label, std::move(att));
    }
  }

  // Per-nonterminal endpoint clusters and the CondEquals ties.
  for (const Label& x : g.nonterminals) {
    const auto& sig = g.space.signature_of(x);
    for (std::size_t i = 0; i < sig.size(); ++i) {
      add_var(slot_id(x, i), sig[i], {"nt_slot", x, "", "", i});
      std::string label = add_factor(
          "norm:" + x + "$" + std::to_string(i), {out.bool_label, sig[i]},
          cond_normalize(sig[i]), {"cond_normalize", x, "", "", i});
      attach(label, {b_nt(x), slot_id(x, i)});
    }
    for (const Rule* r : uses[x]) {
      const Edge* e = nullptr;
      for (const Edge& cand : r->rhs.graph.edges)
        if (cand.label == x) e = &cand;
      for (std::size_t i = 0; i < sig.size(); ++i) {
        std::string label = add_factor(
            "eq:use:" + r->id + ":" + x + ":" + std::to_string(i),
            {out.bool_label, sig[i], sig[i]}, cond_equals(sig[i]),
            {"cond_equals_use", x, r->id, e->att[i], i});
        attach(label,
               {b_rule(r->id), slot_id(x, i), copy_id(r->id, e->att[i])});
      }
    }
    for (const Rule* r : g.rules_for(x)) {
      for (std::size_t i = 0; i < sig.size(); ++i) {
        std::string label = add_factor(
            "eq:def:" + r->id + ":" + std::to_string(i),
            {out.bool_label, sig[i], sig[i]}, cond_equals(sig[i]),
            {"cond_equals_def", x, r->id, r->rhs.externals[i], i});
        attach(label, {b_rule(r->id), slot_id(x, i),
                       copy_id(r->id, r->rhs.externals[i])});
      }
    }
  }

  out.variable_count = out.graph.nodes.size();
  out.factor_count = out.graph.edges.size();
  validate(out.space, out.graph);
  return out;
}

struct CompileVerifyReport {
  double z_fgg = 0.0;
  double z_compiled = 0.0;
  double rel_diff = 0.0;
};

/// Independently computes the sum-product of the compiled graph (variable
/// elimination) and of the grammar (equation solving) and reports the
/// relative difference.
inline CompileVerifyReport verify_compile(const FGG& g,
                                          const SolverConfig& cfg = {}) {
  CompiledFactorGraph c = compile(g);
  CompileVerifyReport rep;
  rep.z_fgg = solve_sum_product(g, SemiringId::real, cfg).z;
  rep.z_compiled = eliminate_sum_product(c.space, c.graph);
  double denom = std::max({std::abs(rep.z_fgg), std::abs(rep.z_compiled), 1e-300});
  rep.rel_diff = std::abs(rep.z_fgg - rep.z_compiled) / denom;
  return rep;
}

}  // namespace fgg
