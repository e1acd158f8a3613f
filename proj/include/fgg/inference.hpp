#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fgg/grammar.hpp"

namespace fgg {

/// Dense value table over the assignment space of a nonterminal's endpoint
/// types. Houses the per-nonterminal inside values.
struct SemiringTable {
  Label nonterminal;
  std::vector<std::size_t> shape;
  std::vector<double> values;  // row-major, length = product of shape

  static SemiringTable zeros(const Label& nt, std::vector<std::size_t> shape) {
    SemiringTable t;
    t.nonterminal = nt;
    t.shape = std::move(shape);
    t.values.assign(
        checked_size(t.shape, max_table_entries(), errc::table_too_large),
        0.0);
    return t;
  }
};

struct SolverConfig {
  enum class Method { auto_, kleene, newton };
  Method method = Method::auto_;
  double tol = 1e-12;  // absolute, on the max table-entry change
  int max_iter = 10000;
  bool strict = false;  // throw NonConvergence instead of returning partials
};

struct SccReport {
  std::vector<Label> members;
  std::string method;
  int iterations = 0;
  bool converged = true;
};

struct SumProductResult {
  double z = 0.0;
  std::map<Label, SemiringTable> psi;
  std::vector<SccReport> scc_report;
  bool converged = true;
  std::size_t rule_inside_evals = 0;
};

namespace detail {

// Precomputed enumeration layout for one rule's right-hand side.
struct RuleEval {
  const Rule* rule;
  std::vector<std::size_t> sizes;     // per rhs node, in declaration order
  std::vector<std::size_t> ext_pos;   // node positions of the externals
  std::vector<std::size_t> ext_shape;

  struct Term {
    bool terminal;
    const FactorFunction* factor;  // terminal
    Label label;                   // nonterminal
    EdgeId edge_id;
    std::vector<std::size_t> att_pos;
    std::vector<std::size_t> att_shape;
  };
  std::vector<Term> terms;

  RuleEval(const FGG& g, const Rule& r) : rule(&r) {
    std::map<NodeId, std::size_t> pos;
    for (std::size_t i = 0; i < r.rhs.graph.nodes.size(); ++i) {
      pos[r.rhs.graph.nodes[i].id] = i;
      sizes.push_back(g.space.domain_size(r.rhs.graph.nodes[i].label));
    }
    checked_size(sizes, max_table_entries(), errc::assignment_space_too_large);
    for (const NodeId& x : r.rhs.externals) {
      ext_pos.push_back(pos.at(x));
      ext_shape.push_back(sizes[ext_pos.back()]);
    }
    for (const Edge& e : r.rhs.graph.edges) {
      Term t;
      t.terminal = !g.is_nonterminal(e.label);
      t.factor = t.terminal ? &g.space.factors.at(e.label) : nullptr;
      t.label = e.label;
      t.edge_id = e.id;
      for (const NodeId& v : e.att) {
        t.att_pos.push_back(pos.at(v));
        t.att_shape.push_back(sizes[t.att_pos.back()]);
      }
      terms.push_back(std::move(t));
    }
  }

  std::size_t ext_flat(const std::vector<std::size_t>& values) const {
    std::size_t flat = 0;
    for (std::size_t i = 0; i < ext_pos.size(); ++i)
      flat = flat * ext_shape[i] + values[ext_pos[i]];
    return flat;
  }

  static std::size_t term_flat(const Term& t,
                               const std::vector<std::size_t>& values) {
    std::size_t flat = 0;
    for (std::size_t i = 0; i < t.att_pos.size(); ++i)
      flat = flat * t.att_shape[i] + values[t.att_pos[i]];
    return flat;
  }

  template <class Visit>
  void for_each_assignment(Visit&& visit) const {
    std::vector<std::size_t> values(sizes.size(), 0);
    do {
      visit(values);
    } while (next_tuple(values, sizes));
  }
};

using TableLookup = std::function<const SemiringTable*(const Label&)>;

inline TableLookup lookup_in(const std::map<Label, SemiringTable>& tables) {
  return [&tables](const Label& l) -> const SemiringTable* {
    auto it = tables.find(l);
    return it == tables.end() ? nullptr : &it->second;
  };
}

// One full pass over the rule's assignment space, semiring-accumulating the
// per-external sums into `out`.
inline void accumulate_rule(const FGG& g, const RuleEval& ev,
                            const TableLookup& child, SemiringId semiring,
                            SemiringTable& out) {
  ev.for_each_assignment([&](const std::vector<std::size_t>& values) {
    double w = 1.0;
    for (const RuleEval::Term& t : ev.terms) {
      double v;
      if (t.terminal) {
        v = t.factor->at(RuleEval::term_flat(t, values));
      } else {
        const SemiringTable* tab = child(t.label);
        if (!tab) fail(errc::missing_child_table, t.label);
        v = tab->values[RuleEval::term_flat(t, values)];
      }
      w = sr_mul(w, v);
      if (w == 0.0) return;
    }
    std::size_t flat = ev.ext_flat(values);
    out.values[flat] = sr_add(semiring, out.values[flat], w);
  });
}

}  // namespace detail

/// Inside table of one rule: sums (or maximizes) over rhs assignments
/// consistent with each external assignment, multiplying terminal factors
/// and child tables.
inline SemiringTable rule_inside(
    const FGG& g, const Rule& rule,
    const std::map<Label, SemiringTable>& child_tables, SemiringId semiring) {
  detail::RuleEval ev(g, rule);
  SemiringTable out =
      SemiringTable::zeros(rule.lhs, g.space.shape_of(rule.lhs));
  detail::accumulate_rule(g, ev, detail::lookup_in(child_tables), semiring,
                          out);
  return out;
}

namespace detail {

constexpr double kDivergenceBound = 1e300;

struct Solver {
  const FGG& g;
  SemiringId semiring;
  SolverConfig cfg;
  SumProductResult result;
  bool record_attained = false;
  std::map<Label, std::vector<int>> attained;  // kleene iteration of last rise
  std::map<Label, std::size_t> scc_of;

  Solver(const FGG& g_, SemiringId s, const SolverConfig& c)
      : g(g_), semiring(s), cfg(c) {}

  TableLookup psi_lookup() { return lookup_in(result.psi); }

  void run() {
    NonterminalGraph ng = nonterminal_graph(g);
    for (std::size_t c = 0; c < ng.scc_order.size(); ++c)
      for (const Label& l : ng.scc_order[c]) scc_of[l] = c;
    for (const auto& comp : ng.scc_order) {
      std::set<Label> members(comp.begin(), comp.end());
      bool cyclic = false;
      std::vector<std::pair<const Rule*, RuleEval>> rules;
      std::size_t max_internal = 0;
      for (const Rule& r : g.rules) {
        if (!members.count(r.lhs)) continue;
        rules.emplace_back(&r, RuleEval(g, r));
        std::size_t internal = 0;
        for (const auto& t : rules.back().second.terms)
          if (!t.terminal && members.count(t.label)) ++internal;
        max_internal = std::max(max_internal, internal);
        if (internal > 0) cyclic = true;
      }
      for (const Label& l : comp)
        result.psi.emplace(
            l, SemiringTable::zeros(l, g.space.shape_of(l)));

      SccReport rep;
      rep.members = comp;
      if (!cyclic) {
        solve_direct(rules, rep);
      } else if (semiring == SemiringId::viterbi ||
                 cfg.method == SolverConfig::Method::kleene) {
        solve_kleene(members, rules, rep);
      } else if (cfg.method == SolverConfig::Method::newton) {
        solve_newton(members, rules, rep);
      } else if (max_internal <= 1) {
        solve_gaussian(members, rules, rep);
      } else {
        solve_newton(members, rules, rep);
      }
      if (!rep.converged) result.converged = false;
      result.scc_report.push_back(std::move(rep));
    }
    const SemiringTable& s = result.psi.at(g.start);
    result.z = s.values.at(0);
    if (cfg.strict && !result.converged)
      fail(errc::non_convergence, "solver did not converge");
  }

  void mark_attained(const Label& l, std::size_t idx, int iter) {
    if (!record_attained) return;
    auto& v = attained[l];
    if (v.size() <= idx) v.resize(result.psi.at(l).values.size(), 0);
    v[idx] = iter;
  }

  void solve_direct(const std::vector<std::pair<const Rule*, RuleEval>>& rules,
                    SccReport& rep) {
    for (const auto& [r, ev] : rules) {
      accumulate_rule(g, ev, psi_lookup(), semiring, result.psi.at(r->lhs));
      ++result.rule_inside_evals;
    }
    rep.method = "direct";
    if (record_attained)
      for (const Label& l : rep.members) attained[l].assign(
          result.psi.at(l).values.size(), 0);
  }

  void solve_kleene(const std::set<Label>& members,
                    const std::vector<std::pair<const Rule*, RuleEval>>& rules,
                    SccReport& rep, const char* tag = "kleene") {
    rep.method = tag;
    std::map<Label, SemiringTable> cur, next;
    for (const Label& l : members) {
      cur.emplace(l, result.psi.at(l));
      if (record_attained)
        attained[l].assign(result.psi.at(l).values.size(), 0);
    }
    auto look = [&](const Label& l) -> const SemiringTable* {
      auto it = cur.find(l);
      if (it != cur.end()) return &it->second;
      auto jt = result.psi.find(l);
      return jt == result.psi.end() ? nullptr : &jt->second;
    };
    bool diverged = false;
    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
      next = cur;
      for (auto& [_, t] : next) t.values.assign(t.values.size(), 0.0);
      for (const auto& [r, ev] : rules) {
        accumulate_rule(g, ev, look, semiring, next.at(r->lhs));
        ++result.rule_inside_evals;
      }
      double delta = 0.0;
      double peak = 0.0;
      for (auto& [l, t] : next) {
        const auto& old = cur.at(l).values;
        for (std::size_t i = 0; i < t.values.size(); ++i) {
          // Kleene iterates from zero must be entrywise non-decreasing.
          if (t.values[i] < old[i])
            fail(errc::internal, "Kleene monotonicity violated at " + l);
          if (t.values[i] > old[i]) mark_attained(l, i, iter);
          delta = std::max(delta, t.values[i] - old[i]);
          peak = std::max(peak, t.values[i]);
        }
      }
      rep.iterations = iter;
      cur.swap(next);
      if (peak > kDivergenceBound) {
        diverged = true;
        break;
      }
      if (delta <= cfg.tol) {
        rep.converged = true;
        for (auto& [l, t] : cur) result.psi.at(l) = t;
        return;
      }
    }
    rep.converged = false;
    for (auto& [l, t] : cur) {
      if (diverged)
        for (double& v : t.values)
          if (v > kDivergenceBound)
            v = std::numeric_limits<double>::infinity();
      result.psi.at(l) = t;
    }
  }

  struct Layout {
    std::vector<Label> order;
    std::map<Label, std::size_t> offset;
    std::size_t total = 0;
  };

  Layout layout_of(const std::set<Label>& members) {
    Layout lay;
    for (const Label& l : g.nonterminals) {
      if (!members.count(l)) continue;
      lay.order.push_back(l);
      lay.offset[l] = lay.total;
      lay.total += result.psi.at(l).values.size();
    }
    return lay;
  }

  void write_back(const Layout& lay, const Eigen::VectorXd& x) {
    for (const Label& l : lay.order) {
      auto& t = result.psi.at(l);
      for (std::size_t i = 0; i < t.values.size(); ++i)
        t.values[i] = std::max(x[lay.offset.at(l) + i], 0.0);
    }
  }

  // Linear case of Theorem 3: psi = A psi + b over the component's unknowns,
  // solved directly. Falls back to iteration when the system is singular or
  // the algebraic solution is not the (nonnegative) least solution.
  void solve_gaussian(
      const std::set<Label>& members,
      const std::vector<std::pair<const Rule*, RuleEval>>& rules,
      SccReport& rep) {
    Layout lay = layout_of(members);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(lay.total, lay.total);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(lay.total);
    for (const auto& [r, ev] : rules) {
      std::size_t row0 = lay.offset.at(r->lhs);
      ev.for_each_assignment([&](const std::vector<std::size_t>& values) {
        double base = 1.0;
        const detail::RuleEval::Term* internal = nullptr;
        for (const auto& t : ev.terms) {
          if (!t.terminal && members.count(t.label)) {
            if (internal)
              fail(errc::internal, "two in-component edges in a linear SCC");
            internal = &t;
            continue;
          }
          double v = t.terminal
                         ? t.factor->at(RuleEval::term_flat(t, values))
                         : result.psi.at(t.label)
                               .values[RuleEval::term_flat(t, values)];
          base = sr_mul(base, v);
          if (base == 0.0) return;
        }
        std::size_t row = row0 + ev.ext_flat(values);
        if (internal) {
          std::size_t col = lay.offset.at(internal->label) +
                            RuleEval::term_flat(*internal, values);
          A(row, col) += base;
        } else {
          b[row] += base;
        }
      });
      ++result.rule_inside_evals;
    }

    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(lay.total, lay.total) - A;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (lu.isInvertible()) {
      Eigen::VectorXd x = lu.solve(b);
      if (x.minCoeff() >= -1e-9 * std::max(1.0, x.cwiseAbs().maxCoeff())) {
        write_back(lay, x);
        rep.method = "gaussian";
        rep.iterations = 0;
        rep.converged = true;
        if (record_attained)
          for (const Label& l : lay.order)
            attained[l].assign(result.psi.at(l).values.size(), 1);
        return;
      }
    }
    // Singular system or negative algebraic solution: the least solution is
    // divergent (or the equation row is degenerate); let iteration decide.
    solve_kleene(members, rules, rep, "gaussian-singular:kleene");
  }

  void solve_newton(
      const std::set<Label>& members,
      const std::vector<std::pair<const Rule*, RuleEval>>& rules,
      SccReport& rep) {
    Layout lay = layout_of(members);
    std::size_t n = lay.total;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);

    auto eval = [&](const Eigen::VectorXd& at, Eigen::VectorXd& F,
                    Eigen::MatrixXd& J) {
      F.setZero();
      J.setZero();
      auto val_of = [&](const Label& l, std::size_t idx) {
        auto it = lay.offset.find(l);
        if (it != lay.offset.end()) return at[it->second + idx];
        return result.psi.at(l).values[idx];
      };
      for (const auto& [r, ev] : rules) {
        std::size_t row0 = lay.offset.at(r->lhs);
        ev.for_each_assignment([&](const std::vector<std::size_t>& values) {
          double base = 1.0;
          std::vector<std::pair<std::size_t, double>> internals;
          for (const auto& t : ev.terms) {
            if (!t.terminal && members.count(t.label)) {
              std::size_t col =
                  lay.offset.at(t.label) + RuleEval::term_flat(t, values);
              internals.emplace_back(col, at[col]);
              continue;
            }
            double v = t.terminal
                           ? t.factor->at(RuleEval::term_flat(t, values))
                           : val_of(t.label, RuleEval::term_flat(t, values));
            base = sr_mul(base, v);
            if (base == 0.0) return;
          }
          std::size_t row = row0 + ev.ext_flat(values);
          double prod = base;
          for (const auto& [_, v] : internals) prod = sr_mul(prod, v);
          F[row] += prod;
          for (std::size_t j = 0; j < internals.size(); ++j) {
            double d = base;
            for (std::size_t i = 0; i < internals.size(); ++i)
              if (i != j) d = sr_mul(d, internals[i].second);
            J(row, internals[j].first) += d;
          }
        });
        ++result.rule_inside_evals;
      }
    };

    rep.method = "newton";
    Eigen::VectorXd F(n);
    Eigen::MatrixXd J(n, n);
    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
      eval(x, F, J);
      Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - J;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
      if (!lu.isInvertible()) {
        // Singular Jacobian: restart with Kleene from zero, which also
        // detects divergent least solutions.
        for (const Label& l : lay.order) {
          auto& t = result.psi.at(l);
          t.values.assign(t.values.size(), 0.0);
        }
        int spent = iter;
        solve_kleene(members, rules, rep, "newton-singular:kleene");
        rep.iterations += spent;
        return;
      }
      Eigen::VectorXd d = lu.solve(F - x);
      double t = 1.0;
      for (int halvings = 0; halvings < 60 && ((x + t * d).minCoeff() < 0.0);
           ++halvings)
        t *= 0.5;
      Eigen::VectorXd xn = (x + t * d).cwiseMax(0.0);
      double delta = (xn - x).cwiseAbs().maxCoeff();
      x = xn;
      rep.iterations = iter;
      if (x.maxCoeff() > kDivergenceBound) {
        for (std::size_t i = 0; i < n; ++i)
          if (x[i] > kDivergenceBound)
            x[i] = std::numeric_limits<double>::infinity();
        rep.converged = false;
        write_back(lay, x);
        return;
      }
      if (delta <= cfg.tol) {
        rep.converged = true;
        write_back(lay, x);
        if (record_attained)
          for (const Label& l : lay.order)
            attained[l].assign(result.psi.at(l).values.size(), 1);
        return;
      }
    }
    // Newton can cycle without converging (e.g. no real fixed point);
    // Kleene from zero settles whether the least solution diverges.
    for (const Label& l : lay.order) {
      auto& t = result.psi.at(l);
      t.values.assign(t.values.size(), 0.0);
    }
    int spent = rep.iterations;
    solve_kleene(members, rules, rep, "newton:kleene");
    rep.iterations += spent;
  }
};

}  // namespace detail

/// Sum-product of the grammar over the chosen semiring, per Theorem 3:
/// components of the nonterminal graph are solved in reverse topological
/// order, acyclic components directly, linear real-semiring components by a
/// linear solve, and the rest iteratively (Kleene from zero, or Newton).
inline SumProductResult solve_sum_product(const FGG& g, SemiringId semiring,
                                          const SolverConfig& cfg = {}) {
  detail::Solver s(g, semiring, cfg);
  s.run();
  return std::move(s.result);
}

struct ViterbiResult {
  DerivationTree tree;
  Assignment assignment;
  double weight = 0.0;
};

namespace detail {

struct ViterbiExtractor {
  const FGG& g;
  Solver& solver;
  DerivationTree tree_out;
  Assignment assignment_out;

  int attained_of(const Label& l, std::size_t idx) const {
    auto it = solver.attained.find(l);
    if (it == solver.attained.end() || it->second.empty()) return 0;
    return it->second[idx];
  }

  DerivationTree extract(const Label& nt, std::size_t target,
                         const std::string& path,
                         const std::vector<NodeId>& ext_ids) {
    std::size_t my_scc = solver.scc_of.at(nt);
    int my_attained = attained_of(nt, target);
    double best = -1.0;
    const Rule* best_rule = nullptr;
    RuleEval const* best_ev = nullptr;
    std::vector<std::size_t> best_values;
    std::vector<std::pair<const Rule*, RuleEval>> evs;
    for (const Rule* r : g.rules_for(nt)) evs.emplace_back(r, RuleEval(g, *r));
    for (const auto& [r, ev] : evs) {
      ev.for_each_assignment([&](const std::vector<std::size_t>& values) {
        if (ev.ext_flat(values) != target) return;
        double w = 1.0;
        for (const auto& t : ev.terms) {
          double v;
          std::size_t flat = RuleEval::term_flat(t, values);
          if (t.terminal) {
            v = t.factor->at(flat);
          } else {
            // Only options whose in-component children stabilized strictly
            // earlier are admissible; one always achieves the fixed point.
            if (solver.scc_of.at(t.label) == my_scc &&
                attained_of(t.label, flat) >= my_attained)
              return;
            v = solver.result.psi.at(t.label).values[flat];
          }
          w = sr_mul(w, v);
          if (w == 0.0) return;
        }
        if (w > best) {
          best = w;
          best_rule = r;
          best_ev = &ev;
          best_values = values;
        }
      });
    }
    double want = solver.result.psi.at(nt).values[target];
    if (!best_rule || best <= 0.0 ||
        std::abs(best - want) > 1e-9 * std::max(1.0, want))
      fail(errc::internal, "viterbi backtrace mismatch at " + nt);

    const Rule& r = *best_rule;
    std::map<NodeId, NodeId> derived_id;
    for (std::size_t i = 0; i < ext_ids.size(); ++i)
      derived_id[r.rhs.externals[i]] = ext_ids[i];
    for (std::size_t i = 0; i < r.rhs.graph.nodes.size(); ++i) {
      const Node& nd = r.rhs.graph.nodes[i];
      if (!derived_id.count(nd.id)) {
        derived_id[nd.id] = path + nd.id;
        assignment_out.values[path + nd.id] = best_values[i];
      }
    }
    DerivationTree t;
    t.rule = r.id;
    for (const auto& term : best_ev->terms) {
      if (term.terminal) continue;
      std::vector<NodeId> child_ext;
      const Edge* e = r.rhs.graph.find_edge(term.edge_id);
      for (const NodeId& v : e->att) child_ext.push_back(derived_id.at(v));
      t.children[term.edge_id] =
          extract(term.label, RuleEval::term_flat(term, best_values),
                  path + term.edge_id + "/", child_ext);
    }
    return t;
  }
};

}  // namespace detail

/// Highest-weight derivation and assignment under the Viterbi semiring,
/// with deterministic tie-breaking (rule declaration order, then
/// lexicographic rhs assignment). The returned weight is recomputed as the
/// assignment weight of the derived graph, which it equals exactly.
inline ViterbiResult viterbi_derivation(const FGG& g,
                                        const SolverConfig& cfg = {}) {
  detail::Solver solver(g, SemiringId::viterbi, cfg);
  solver.record_attained = true;
  solver.run();
  if (!solver.result.converged)
    fail(errc::not_converged, "viterbi solve did not converge");
  if (solver.result.z <= 0.0)
    fail(errc::no_derivation, "sum-product is zero");

  detail::ViterbiExtractor ex{g, solver};
  ViterbiResult res;
  res.tree = ex.extract(g.start, 0, "", {});
  res.assignment = std::move(ex.assignment_out);
  Hypergraph derived = derive(g, res.tree);
  res.weight = assignment_weight(g.space, derived, res.assignment);
  if (std::abs(res.weight - solver.result.z) >
      1e-6 * std::max(1.0, solver.result.z))
    fail(errc::internal, "viterbi weight self-check failed");
  return res;
}

/// Unnormalized distribution of one rhs node: entry v is the sum-product of
/// the grammar with a one-hot pin factor [node = v] added to that rule.
inline std::vector<double> node_distribution(const FGG& g,
                                             const std::string& rule_id,
                                             const NodeId& node_id,
                                             const SolverConfig& cfg = {}) {
  const Rule* rule = g.rule_by_id(rule_id);
  if (!rule) fail(errc::unknown_label, "rule " + rule_id);
  const Node* node = rule->rhs.graph.find_node(node_id);
  if (!node) fail(errc::unknown_label, "node " + node_id + " in " + rule_id);
  std::size_t m = g.space.domain_size(node->label);

  Label pin = "pin@" + rule_id + "/" + node_id;
  while (g.space.has_edge_label(pin)) pin += "'";
  std::vector<double> out(m, 0.0);
  for (std::size_t v = 0; v < m; ++v) {
    FGG pinned = g;
    std::vector<double> table(m, 0.0);
    table[v] = 1.0;
    pinned.space.add_edge_label(pin, {node->label},
                                FactorFunction::dense(std::move(table)));
    pinned.terminals.push_back(pin);
    for (Rule& r : pinned.rules)
      if (r.id == rule_id)
        r.rhs.graph.edges.push_back({pin + "#e", pin, {node_id}});
    out[v] = solve_sum_product(pinned, SemiringId::real, cfg).z;
  }
  return out;
}

struct ConsistencyReport {
  double max_residual = 0.0;
  Label worst_nonterminal;
  std::size_t worst_index = 0;
};

/// Re-evaluates every equation of the system at the solved tables and
/// reports the largest residual |psi_X(xi) - sum_rules tau_R(xi)|.
inline ConsistencyReport check_consistency(const SumProductResult& result,
                                           const FGG& g) {
  ConsistencyReport rep;
  for (const Label& x : g.nonterminals) {
    SemiringTable rhs = SemiringTable::zeros(x, g.space.shape_of(x));
    for (const Rule* r : g.rules_for(x)) {
      detail::RuleEval ev(g, *r);
      detail::accumulate_rule(g, ev, detail::lookup_in(result.psi),
                              SemiringId::real, rhs);
    }
    const SemiringTable& lhs = result.psi.at(x);
    for (std::size_t i = 0; i < lhs.values.size(); ++i) {
      if (!std::isfinite(lhs.values[i]) || !std::isfinite(rhs.values[i]))
        continue;
      double resid = std::abs(lhs.values[i] - rhs.values[i]);
      if (resid > rep.max_residual) {
        rep.max_residual = resid;
        rep.worst_nonterminal = x;
        rep.worst_index = i;
      }
    }
  }
  return rep;
}

}  // namespace fgg
