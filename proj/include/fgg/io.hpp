#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "fgg/adapters.hpp"
#include "fgg/fg_compile.hpp"
#include "fgg/grammar.hpp"

namespace fgg::io {

using json = nlohmann::json;

inline constexpr const char* kFormatVersion = "fgg/1";

/// A factor graph document: label space plus one (terminal-only) graph with
/// optional externals, and optional provenance carried verbatim.
struct FactorGraphDoc {
  LabelSpace space;
  Fragment fragment;
  json provenance;  // null unless emitted by the compiler
};

struct ParsedDocument {
  std::string kind;
  std::variant<FGG, FactorGraphDoc, PlatedFactorGraph, DGM, CFD, SPN, json>
      value;
  std::vector<std::string> warnings;
};

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& path,
                                    const std::string& message) {
  fail(errc::parse_error, path + ": " + message);
}

// JSON accessor carrying its location for diagnostics.
class Cursor {
 public:
  Cursor(const json& j, std::string path, bool strict,
         std::vector<std::string>* warnings)
      : j_(&j), path_(std::move(path)), strict_(strict), warnings_(warnings) {}

  const json& raw() const { return *j_; }
  const std::string& path() const { return path_; }
  bool has(const std::string& key) const {
    return j_->is_object() && j_->contains(key);
  }

  Cursor at(const std::string& key) const {
    if (!j_->is_object() || !j_->contains(key))
      parse_fail(path_, "missing key \"" + key + "\"");
    return Cursor((*j_)[key], path_ + "." + key, strict_, warnings_);
  }

  Cursor at(std::size_t i) const {
    if (!j_->is_array() || i >= j_->size())
      parse_fail(path_, "missing index " + std::to_string(i));
    return Cursor((*j_)[i], path_ + "[" + std::to_string(i) + "]", strict_,
                  warnings_);
  }

  std::size_t size() const {
    if (!j_->is_array()) parse_fail(path_, "expected an array");
    return j_->size();
  }

  std::string as_string() const {
    if (!j_->is_string()) parse_fail(path_, "expected a string");
    return j_->get<std::string>();
  }

  double as_number() const {
    if (!j_->is_number()) parse_fail(path_, "expected a number");
    return j_->get<double>();
  }

  long as_integer() const {
    if (!j_->is_number_integer()) parse_fail(path_, "expected an integer");
    return j_->get<long>();
  }

  std::vector<std::string> as_string_array() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).as_string());
    return out;
  }

  std::vector<double> as_number_array() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).as_number());
    return out;
  }

  void check_keys(std::initializer_list<const char*> allowed) const {
    if (!j_->is_object()) parse_fail(path_, "expected an object");
    for (const auto& [key, _] : j_->items()) {
      bool ok = false;
      for (const char* a : allowed)
        if (key == a) ok = true;
      if (ok) continue;
      if (strict_)
        parse_fail(path_, "unknown key \"" + key + "\"");
      else if (warnings_)
        warnings_->push_back(path_ + ": ignoring unknown key \"" + key + "\"");
    }
  }

  template <class F>
  void each_member(F&& f) const {
    if (!j_->is_object()) parse_fail(path_, "expected an object");
    for (const auto& [key, _] : j_->items())
      f(key, Cursor((*j_)[key], path_ + "." + key, strict_, warnings_));
  }

 private:
  const json* j_;
  std::string path_;
  bool strict_;
  std::vector<std::string>* warnings_;
};

inline LabelSpace parse_label_space(const Cursor& body) {
  LabelSpace space;
  body.at("node_labels").each_member([&](const std::string& l, Cursor c) {
    c.check_keys({"values"});
    space.add_node_label(l, c.at("values").as_string_array());
  });
  body.at("edge_labels").each_member([&](const std::string& l, Cursor c) {
    c.check_keys({"type", "factor"});
    std::vector<Label> sig = c.at("type").as_string_array();
    if (c.has("factor")) {
      Cursor f = c.at("factor");
      f.check_keys({"table", "constant"});
      if (f.has("constant")) {
        space.add_edge_label(l, std::move(sig),
                             FactorFunction::constant(f.at("constant").as_number()));
      } else if (f.has("table")) {
        space.add_edge_label(
            l, std::move(sig),
            FactorFunction::dense(f.at("table").as_number_array()));
      } else {
        parse_fail(f.path(), "factor needs \"table\" or \"constant\"");
      }
    } else {
      space.add_edge_label(l, std::move(sig));
    }
  });
  try {
    space.check();
  } catch (const error& e) {
    parse_fail(body.path(), e.what());
  }
  return space;
}

inline Hypergraph parse_graph_body(const Cursor& c) {
  Hypergraph g;
  Cursor nodes = c.at("nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Cursor n = nodes.at(i);
    n.check_keys({"id", "label"});
    g.nodes.push_back({n.at("id").as_string(), n.at("label").as_string()});
  }
  Cursor edges = c.at("edges");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    Cursor e = edges.at(i);
    e.check_keys({"id", "label", "att"});
    g.edges.push_back({e.at("id").as_string(), e.at("label").as_string(),
                       e.at("att").as_string_array()});
  }
  return g;
}

inline Fragment parse_fragment(const Cursor& c) {
  Fragment f;
  c.check_keys({"nodes", "edges", "externals"});
  f.graph = parse_graph_body(c);
  if (c.has("externals")) f.externals = c.at("externals").as_string_array();
  return f;
}

inline FGG parse_fgg_body(const Cursor& body) {
  body.check_keys({"node_labels", "edge_labels", "nonterminals", "terminals",
                   "start", "rules"});
  FGG g;
  g.space = parse_label_space(body);
  g.nonterminals = body.at("nonterminals").as_string_array();
  g.terminals = body.at("terminals").as_string_array();
  g.start = body.at("start").as_string();
  Cursor rules = body.at("rules");
  for (std::size_t i = 0; i < rules.size(); ++i) {
    Cursor r = rules.at(i);
    r.check_keys({"id", "lhs", "rhs"});
    Rule rule;
    rule.id = r.at("id").as_string();
    rule.lhs = r.at("lhs").as_string();
    rule.rhs = parse_fragment(r.at("rhs"));
    g.rules.push_back(std::move(rule));
  }
  try {
    validate_fgg(g);
  } catch (const error& e) {
    parse_fail(body.path(), e.what());
  }
  return g;
}

inline FactorGraphDoc parse_factorgraph_body(const Cursor& body) {
  body.check_keys({"node_labels", "edge_labels", "graph", "provenance"});
  FactorGraphDoc doc;
  doc.space = parse_label_space(body);
  doc.fragment = parse_fragment(body.at("graph"));
  if (body.has("provenance")) doc.provenance = body.at("provenance").raw();
  try {
    validate(doc.space, doc.fragment);
  } catch (const error& e) {
    parse_fail(body.path(), e.what());
  }
  return doc;
}

inline PlatedFactorGraph parse_pfg_body(const Cursor& body) {
  body.check_keys({"node_labels", "edge_labels", "graph", "plates",
                   "membership", "counts"});
  PlatedFactorGraph pfg;
  pfg.space = parse_label_space(body);
  pfg.base = parse_graph_body(body.at("graph"));
  pfg.plates = body.at("plates").as_string_array();
  Cursor mem = body.at("membership");
  mem.check_keys({"nodes", "edges"});
  mem.at("nodes").each_member([&](const std::string& id, Cursor c) {
    auto v = c.as_string_array();
    pfg.node_plates[id] = {v.begin(), v.end()};
  });
  mem.at("edges").each_member([&](const std::string& id, Cursor c) {
    auto v = c.as_string_array();
    pfg.edge_plates[id] = {v.begin(), v.end()};
  });
  body.at("counts").each_member([&](const std::string& b, Cursor c) {
    pfg.counts[b] = static_cast<int>(c.as_integer());
  });
  try {
    validate_pfg(pfg);
  } catch (const error& e) {
    parse_fail(body.path(), e.what());
  }
  return pfg;
}

inline DGM parse_dgm_body(const Cursor& body) {
  body.check_keys({"node_labels", "edge_labels", "h1", "h2", "h3", "e12",
                   "e22", "e23"});
  DGM dgm;
  dgm.space = parse_label_space(body);
  dgm.h1 = parse_graph_body(body.at("h1"));
  dgm.h2 = parse_graph_body(body.at("h2"));
  dgm.h3 = parse_graph_body(body.at("h3"));
  auto cross = [&](const char* key) {
    std::vector<DGM::CrossEdge> out;
    Cursor c = body.at(key);
    for (std::size_t i = 0; i < c.size(); ++i) {
      Cursor e = c.at(i);
      e.check_keys({"from", "to", "label"});
      out.push_back({e.at("from").as_string(), e.at("to").as_string(),
                     e.at("label").as_string()});
    }
    return out;
  };
  dgm.e12 = cross("e12");
  dgm.e22 = cross("e22");
  dgm.e23 = cross("e23");
  try {
    validate_dgm(dgm);
  } catch (const error& e) {
    parse_fail(body.path(), e.what());
  }
  return dgm;
}

inline CFD parse_cfd_body(const Cursor& body) {
  body.check_keys({"nodes", "root", "costs"});
  CFD cfd;
  Cursor nodes = body.at("nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Cursor n = nodes.at(i);
    n.check_keys({"id", "kind", "var", "children"});
    CFD::DagNode d;
    d.id = n.at("id").as_string();
    std::string kind = n.at("kind").as_string();
    if (kind == "case") {
      d.kind = CFD::DagNode::Kind::case_;
      d.var = n.at("var").as_string();
    } else if (kind == "factor") {
      d.kind = CFD::DagNode::Kind::factor;
    } else if (kind == "unit") {
      d.kind = CFD::DagNode::Kind::unit;
    } else if (kind == "empty") {
      d.kind = CFD::DagNode::Kind::empty;
    } else {
      parse_fail(n.at("kind").path(), "unknown CFD node kind " + kind);
    }
    if (kind == "case" || kind == "factor") {
      Cursor ch = n.at("children");
      if (ch.size() != 2) parse_fail(ch.path(), "expected two children");
      d.child1 = ch.at(0).as_string();
      d.child2 = ch.at(1).as_string();
    }
    cfd.nodes.push_back(std::move(d));
  }
  cfd.root = body.at("root").as_string();
  if (body.has("costs"))
    body.at("costs").each_member([&](const std::string& v, Cursor c) {
      cfd.costs[v] = c.as_number();
    });
  return cfd;
}

inline SPN parse_spn_body(const Cursor& body) {
  body.check_keys({"nodes", "root"});
  SPN spn;
  Cursor nodes = body.at("nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Cursor n = nodes.at(i);
    n.check_keys({"id", "kind", "var", "children", "weights"});
    SPN::DagNode d;
    d.id = n.at("id").as_string();
    std::string kind = n.at("kind").as_string();
    if (kind == "sum") {
      d.kind = SPN::DagNode::Kind::sum;
      Cursor w = n.at("weights");
      if (w.size() != 2) parse_fail(w.path(), "expected two weights");
      d.lambda1 = w.at(0).as_number();
      d.lambda2 = w.at(1).as_number();
    } else if (kind == "product") {
      d.kind = SPN::DagNode::Kind::product;
    } else if (kind == "leaf") {
      d.kind = SPN::DagNode::Kind::leaf;
      d.var = n.at("var").as_string();
    } else if (kind == "negleaf") {
      d.kind = SPN::DagNode::Kind::negleaf;
      d.var = n.at("var").as_string();
    } else {
      parse_fail(n.at("kind").path(), "unknown SPN node kind " + kind);
    }
    if (kind == "sum" || kind == "product") {
      Cursor ch = n.at("children");
      if (ch.size() != 2) parse_fail(ch.path(), "expected two children");
      d.child1 = ch.at(0).as_string();
      d.child2 = ch.at(1).as_string();
    }
    spn.nodes.push_back(std::move(d));
  }
  spn.root = body.at("root").as_string();
  return spn;
}

}  // namespace detail

/// Parses and fully validates a document; diagnostics carry the JSON path
/// of the first error. Strict mode rejects unknown keys.
inline ParsedDocument parse(const std::string& text, bool strict = true) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    detail::parse_fail("$", e.what());
  }
  ParsedDocument doc;
  detail::Cursor root(j, "$", strict, &doc.warnings);
  root.check_keys({"format_version", "kind", "body"});
  std::string version = root.at("format_version").as_string();
  if (version != kFormatVersion)
    detail::parse_fail("$.format_version", "unsupported version " + version);
  doc.kind = root.at("kind").as_string();
  detail::Cursor body = root.at("body");
  if (doc.kind == "fgg")
    doc.value = detail::parse_fgg_body(body);
  else if (doc.kind == "factorgraph")
    doc.value = detail::parse_factorgraph_body(body);
  else if (doc.kind == "pfg")
    doc.value = detail::parse_pfg_body(body);
  else if (doc.kind == "dgm")
    doc.value = detail::parse_dgm_body(body);
  else if (doc.kind == "cfd")
    doc.value = detail::parse_cfd_body(body);
  else if (doc.kind == "spn")
    doc.value = detail::parse_spn_body(body);
  else if (doc.kind == "result")
    doc.value = body.raw();
  else
    detail::parse_fail("$.kind", "unknown kind " + doc.kind);
  return doc;
}

inline FGG parse_fgg(const std::string& text, bool strict = true) {
  ParsedDocument doc = parse(text, strict);
  if (doc.kind != "fgg")
    detail::parse_fail("$.kind", "expected an fgg document, got " + doc.kind);
  return std::get<FGG>(std::move(doc.value));
}

namespace detail {

inline json label_space_json(const LabelSpace& space) {
  json node_labels = json::object();
  for (const Label& l : space.node_labels)
    node_labels[l] = {{"values", space.domains.at(l)}};
  json edge_labels = json::object();
  for (const Label& l : space.edge_labels) {
    json e = {{"type", space.signature.at(l)}};
    auto f = space.factors.find(l);
    if (f != space.factors.end()) {
      if (f->second.kind == FactorFunction::Kind::constant)
        e["factor"] = {{"constant", f->second.value}};
      else
        e["factor"] = {{"table", f->second.table}};
    }
    edge_labels[l] = std::move(e);
  }
  return {{"node_labels", std::move(node_labels)},
          {"edge_labels", std::move(edge_labels)}};
}

inline json graph_json(const Hypergraph& g) {
  json nodes = json::array();
  for (const Node& n : g.nodes)
    nodes.push_back({{"id", n.id}, {"label", n.label}});
  json edges = json::array();
  for (const Edge& e : g.edges)
    edges.push_back({{"id", e.id}, {"label", e.label}, {"att", e.att}});
  return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

inline json envelope(const std::string& kind, json body) {
  return {{"format_version", kFormatVersion},
          {"kind", kind},
          {"body", std::move(body)}};
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

/// Canonical text: sorted keys, declaration-order arrays, shortest
/// round-trip numbers; byte-identical across runs.
inline std::string serialize(const FGG& g) {
  json body = detail::label_space_json(g.space);
  body["nonterminals"] = g.nonterminals;
  body["terminals"] = g.terminals;
  body["start"] = g.start;
  json rules = json::array();
  for (const Rule& r : g.rules) {
    json rhs = detail::graph_json(r.rhs.graph);
    rhs["externals"] = r.rhs.externals;
    rules.push_back({{"id", r.id}, {"lhs", r.lhs}, {"rhs", std::move(rhs)}});
  }
  body["rules"] = std::move(rules);
  return detail::dump(detail::envelope("fgg", std::move(body)));
}

inline std::string serialize(const FactorGraphDoc& doc) {
  json body = detail::label_space_json(doc.space);
  json graph = detail::graph_json(doc.fragment.graph);
  graph["externals"] = doc.fragment.externals;
  body["graph"] = std::move(graph);
  if (!doc.provenance.is_null()) body["provenance"] = doc.provenance;
  return detail::dump(detail::envelope("factorgraph", std::move(body)));
}

inline FactorGraphDoc to_document(const CompiledFactorGraph& c) {
  FactorGraphDoc doc;
  doc.space = c.space;
  doc.fragment.graph = c.graph;
  json prov = json::object();
  for (const auto& [id, p] : c.provenance) {
    json e = {{"kind", p.kind}};
    if (!p.nonterminal.empty()) e["nonterminal"] = p.nonterminal;
    if (!p.rule.empty()) e["rule"] = p.rule;
    if (!p.node.empty()) e["node"] = p.node;
    if (p.kind == "nt_slot" || p.kind == "cond_equals_use" ||
        p.kind == "cond_equals_def")
      e["slot"] = p.slot;
    prov[id] = std::move(e);
  }
  doc.provenance = std::move(prov);
  return doc;
}

inline std::string serialize(const PlatedFactorGraph& pfg) {
  json body = detail::label_space_json(pfg.space);
  body["graph"] = detail::graph_json(pfg.base);
  body["plates"] = pfg.plates;
  json mn = json::object(), me = json::object();
  for (const Node& n : pfg.base.nodes)
    mn[n.id] = pfg.plates_of_node(n.id);
  for (const Edge& e : pfg.base.edges)
    me[e.id] = pfg.plates_of_edge(e.id);
  body["membership"] = {{"nodes", std::move(mn)}, {"edges", std::move(me)}};
  body["counts"] = pfg.counts;
  return detail::dump(detail::envelope("pfg", std::move(body)));
}

inline std::string serialize(const DGM& dgm) {
  json body = detail::label_space_json(dgm.space);
  body["h1"] = detail::graph_json(dgm.h1);
  body["h2"] = detail::graph_json(dgm.h2);
  body["h3"] = detail::graph_json(dgm.h3);
  auto cross = [](const std::vector<DGM::CrossEdge>& es) {
    json out = json::array();
    for (const auto& ce : es)
      out.push_back(
          {{"from", ce.from}, {"to", ce.to}, {"label", ce.label}});
    return out;
  };
  body["e12"] = cross(dgm.e12);
  body["e22"] = cross(dgm.e22);
  body["e23"] = cross(dgm.e23);
  return detail::dump(detail::envelope("dgm", std::move(body)));
}

inline std::string serialize(const CFD& cfd) {
  json nodes = json::array();
  for (const auto& n : cfd.nodes) {
    json e = {{"id", n.id}};
    switch (n.kind) {
      case CFD::DagNode::Kind::case_:
        e["kind"] = "case";
        e["var"] = n.var;
        e["children"] = {n.child1, n.child2};
        break;
      case CFD::DagNode::Kind::factor:
        e["kind"] = "factor";
        e["children"] = {n.child1, n.child2};
        break;
      case CFD::DagNode::Kind::unit: e["kind"] = "unit"; break;
      case CFD::DagNode::Kind::empty: e["kind"] = "empty"; break;
    }
    nodes.push_back(std::move(e));
  }
  json body = {{"nodes", std::move(nodes)},
               {"root", cfd.root},
               {"costs", cfd.costs}};
  return detail::dump(detail::envelope("cfd", std::move(body)));
}

inline std::string serialize(const SPN& spn) {
  json nodes = json::array();
  for (const auto& n : spn.nodes) {
    json e = {{"id", n.id}};
    switch (n.kind) {
      case SPN::DagNode::Kind::sum:
        e["kind"] = "sum";
        e["children"] = {n.child1, n.child2};
        e["weights"] = {n.lambda1, n.lambda2};
        break;
      case SPN::DagNode::Kind::product:
        e["kind"] = "product";
        e["children"] = {n.child1, n.child2};
        break;
      case SPN::DagNode::Kind::leaf:
        e["kind"] = "leaf";
        e["var"] = n.var;
        break;
      case SPN::DagNode::Kind::negleaf:
        e["kind"] = "negleaf";
        e["var"] = n.var;
        break;
    }
    nodes.push_back(std::move(e));
  }
  json body = {{"nodes", std::move(nodes)}, {"root", spn.root}};
  return detail::dump(detail::envelope("spn", std::move(body)));
}

inline std::string serialize_result(const json& body) {
  return detail::dump(detail::envelope("result", body));
}

}  // namespace fgg::io
