// Command-line front end: validation, classification, conjunction,
// sum-products, Viterbi derivations, marginals, factorization, factor-graph
// compilation, derivation dumps, and imports from related formalisms.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "fgg/conjunction.hpp"
#include "fgg/factorize.hpp"
#include "fgg/fg_compile.hpp"
#include "fgg/fixtures.hpp"
#include "fgg/grammar.hpp"
#include "fgg/inference.hpp"
#include "fgg/io.hpp"

namespace {

using fgg::io::json;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitNotConvertible = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) fgg::fail(fgg::errc::parse_error, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) fgg::fail(fgg::errc::parse_error, "cannot write " + path);
  out << text;
}

struct Options {
  bool json_output = false;
  bool lenient = false;
};

fgg::FGG load_fgg(const std::string& path, const Options& opt) {
  fgg::io::ParsedDocument doc = fgg::io::parse(slurp(path), !opt.lenient);
  for (const std::string& w : doc.warnings) std::cerr << "warning: " << w << "\n";
  if (doc.kind != "fgg")
    fgg::fail(fgg::errc::parse_error,
              path + ": expected an fgg document, got " + doc.kind);
  return std::get<fgg::FGG>(std::move(doc.value));
}

fgg::SolverConfig solver_config(const std::string& method, double tol,
                                int max_iter) {
  fgg::SolverConfig cfg;
  cfg.tol = tol;
  cfg.max_iter = max_iter;
  if (method == "kleene")
    cfg.method = fgg::SolverConfig::Method::kleene;
  else if (method == "newton")
    cfg.method = fgg::SolverConfig::Method::newton;
  return cfg;
}

void print_result(const Options& opt, const json& machine,
                  const std::string& human) {
  if (opt.json_output)
    std::cout << fgg::io::serialize_result(machine);
  else
    std::cout << human;
}

json scc_report_json(const fgg::SumProductResult& r) {
  json sccs = json::array();
  for (const fgg::SccReport& rep : r.scc_report)
    sccs.push_back({{"members", rep.members},
                    {"method", rep.method},
                    {"iterations", rep.iterations},
                    {"converged", rep.converged}});
  return sccs;
}

void print_tree(const fgg::DerivationTree& t, const std::string& indent,
                std::ostream& os) {
  os << indent << t.rule << "\n";
  for (const auto& [edge, child] : t.children) {
    os << indent << "  " << edge << " ->\n";
    print_tree(child, indent + "    ", os);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"factor graph grammar toolkit"};
  app.require_subcommand(1);
  Options opt;
  app.add_flag("--json", opt.json_output, "machine-readable output");
  app.add_flag("--lenient", opt.lenient, "warn on unknown document keys");

  std::string in_path, in2_path, out_path;
  std::string mode = "by-id", semiring = "real", method = "auto";
  std::string strategy = "minfill", format, rule_id, node_id;
  double tol = 1e-12;
  int max_iter = 10000, count_n = 2, max_depth = 8, index = -1;
  std::size_t max_count = 1000;
  bool prune = false, report = false, verify = false;

  CLI::App* validate = app.add_subcommand("validate", "check a document");
  validate->add_option("input", in_path)->required();

  CLI::App* classify =
      app.add_subcommand("classify", "recursion and reentrancy class");
  classify->add_option("input", in_path)->required();

  CLI::App* conjoin = app.add_subcommand("conjoin", "conjunction of two FGGs");
  conjoin->add_option("first", in_path)->required();
  conjoin->add_option("second", in2_path)->required();
  conjoin->add_option("-o,--output", out_path)->required();
  conjoin->add_option("--mode", mode)->check(CLI::IsMember({"by-id", "search"}));
  conjoin->add_flag("--prune", prune, "drop unreachable pair nonterminals");

  CLI::App* sumproduct = app.add_subcommand("sumproduct", "solve for Z");
  sumproduct->add_option("input", in_path)->required();
  sumproduct->add_option("--semiring", semiring)
      ->check(CLI::IsMember({"real", "viterbi"}));
  sumproduct->add_option("--method", method)
      ->check(CLI::IsMember({"auto", "kleene", "newton"}));
  sumproduct->add_option("--tol", tol);
  sumproduct->add_option("--max-iter", max_iter);

  CLI::App* viterbi =
      app.add_subcommand("viterbi", "highest-weight derivation");
  viterbi->add_option("input", in_path)->required();
  viterbi->add_option("--tol", tol);
  viterbi->add_option("--max-iter", max_iter);

  CLI::App* marginal =
      app.add_subcommand("marginal", "unnormalized node distribution");
  marginal->add_option("input", in_path)->required();
  marginal->add_option("--rule", rule_id)->required();
  marginal->add_option("--node", node_id)->required();

  CLI::App* factorize =
      app.add_subcommand("factorize", "binarize rule right-hand sides");
  factorize->add_option("input", in_path)->required();
  factorize->add_option("-o,--output", out_path)->required();
  factorize->add_option("--strategy", strategy)
      ->check(CLI::IsMember({"minfill", "mindegree"}));
  factorize->add_flag("--report", report, "print per-rule widths");

  CLI::App* tofg = app.add_subcommand(
      "to-factorgraph", "compile a nonreentrant FGG to one factor graph");
  tofg->add_option("input", in_path)->required();
  tofg->add_option("-o,--output", out_path)->required();
  tofg->add_flag("--verify", verify, "check Z equality after compiling");

  CLI::App* derive_cmd =
      app.add_subcommand("derive", "enumerate and derive factor graphs");
  derive_cmd->add_option("input", in_path)->required();
  derive_cmd->add_option("--max-depth", max_depth);
  derive_cmd->add_option("--max-count", max_count);
  derive_cmd->add_option("--index", index, "derive the i-th derivation");
  derive_cmd->add_option("-o,--output", out_path);

  CLI::App* import = app.add_subcommand("import", "convert into an FGG");
  import->add_option("--format", format)
      ->required()
      ->check(CLI::IsMember({"pfg", "dgm", "cfd", "spn"}));
  import->add_option("input", in_path)->required();
  import->add_option("-o,--output", out_path)->required();
  import->add_option("-n", count_n, "unrolling length for dgm");

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) {
    fgg::io::ParsedDocument doc = fgg::io::parse(slurp(in_path), !opt.lenient);
    for (const std::string& w : doc.warnings)
      std::cerr << "warning: " << w << "\n";
    print_result(opt, {{"valid", true}, {"kind", doc.kind}},
                 "valid " + doc.kind + " document\n");
    return kExitOk;
  }

  if (classify->parsed()) {
    fgg::FGG g = load_fgg(in_path, opt);
    fgg::RecursionClass rc = fgg::classify_recursion(g);
    bool nonreentrant = fgg::is_nonreentrant(g);
    std::string human = std::string(fgg::to_string(rc)) + ", " +
                        (nonreentrant ? "nonreentrant" : "reentrant") + "\n";
    print_result(opt,
                 {{"recursion", fgg::to_string(rc)},
                  {"nonreentrant", nonreentrant}},
                 human);
    return kExitOk;
  }

  if (conjoin->parsed()) {
    fgg::FGG a = load_fgg(in_path, opt);
    fgg::FGG b = load_fgg(in2_path, opt);
    fgg::MatchMode m =
        mode == "search" ? fgg::MatchMode::search : fgg::MatchMode::by_id;
    fgg::FGG out = fgg::conjoin(a, b, m, prune);
    spill(out_path, fgg::io::serialize(out));
    print_result(opt,
                 {{"rules", out.rules.size()},
                  {"nonterminals", out.nonterminals.size()}},
                 "wrote " + out_path + " (" + std::to_string(out.rules.size()) +
                     " rules)\n");
    return kExitOk;
  }

  if (sumproduct->parsed()) {
    fgg::FGG g = load_fgg(in_path, opt);
    fgg::SemiringId sr = semiring == "viterbi" ? fgg::SemiringId::viterbi
                                               : fgg::SemiringId::real;
    fgg::SumProductResult r =
        fgg::solve_sum_product(g, sr, solver_config(method, tol, max_iter));
    char zbuf[64];
    std::snprintf(zbuf, sizeof zbuf, "%.12g", r.z);
    std::ostringstream human;
    human << "Z = " << zbuf << (r.converged ? "" : "  (not converged)")
          << "\n";
    for (const fgg::SccReport& rep : r.scc_report) {
      human << "  [";
      for (std::size_t i = 0; i < rep.members.size(); ++i)
        human << (i ? " " : "") << rep.members[i];
      human << "] " << rep.method;
      if (rep.iterations) human << ", " << rep.iterations << " iterations";
      if (!rep.converged) human << ", not converged";
      human << "\n";
    }
    print_result(opt,
                 {{"z", r.z},
                  {"semiring", semiring},
                  {"converged", r.converged},
                  {"scc_report", scc_report_json(r)}},
                 human.str());
    return r.converged ? kExitOk : kExitNotConverged;
  }

  if (viterbi->parsed()) {
    fgg::FGG g = load_fgg(in_path, opt);
    fgg::ViterbiResult v =
        fgg::viterbi_derivation(g, solver_config("auto", tol, max_iter));
    std::ostringstream human;
    char wbuf[64];
    std::snprintf(wbuf, sizeof wbuf, "%.12g", v.weight);
    human << "weight = " << wbuf << "\n";
    print_tree(v.tree, "", human);
    human << "assignment:\n";
    fgg::Hypergraph h = fgg::derive(g, v.tree);
    for (const fgg::Node& n : h.nodes)
      human << "  " << n.id << " = "
            << g.space.domains.at(n.label)[v.assignment.values.at(n.id)]
            << "\n";
    json jassign = json::object();
    for (const auto& [id, val] : v.assignment.values) jassign[id] = val;
    json jtree;
    std::function<json(const fgg::DerivationTree&)> tree_json =
        [&](const fgg::DerivationTree& t) {
          json children = json::object();
          for (const auto& [edge, child] : t.children)
            children[edge] = tree_json(child);
          return json{{"rule", t.rule}, {"children", children}};
        };
    print_result(opt,
                 {{"weight", v.weight},
                  {"tree", tree_json(v.tree)},
                  {"assignment", jassign}},
                 human.str());
    return kExitOk;
  }

  if (marginal->parsed()) {
    fgg::FGG g = load_fgg(in_path, opt);
    std::vector<double> dist =
        fgg::node_distribution(g, rule_id, node_id,
                               solver_config(method, tol, max_iter));
    const fgg::Rule* r = g.rule_by_id(rule_id);
    const fgg::Node* n = r->rhs.graph.find_node(node_id);
    const auto& values = g.space.domains.at(n->label);
    std::ostringstream human;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.12g", dist[i]);
      human << values[i] << "\t" << buf << "\n";
    }
    json jd = json::object();
    for (std::size_t i = 0; i < dist.size(); ++i) jd[values[i]] = dist[i];
    print_result(opt, {{"distribution", jd}}, human.str());
    return kExitOk;
  }

  if (factorize->parsed()) {
    fgg::FGG g = load_fgg(in_path, opt);
    fgg::DecompStrategy strat = strategy == "mindegree"
                                    ? fgg::DecompStrategy::mindegree
                                    : fgg::DecompStrategy::minfill;
    fgg::FactorizeReport frep;
    fgg::FGG out = fgg::factorize_fgg(g, strat, &frep);
    spill(out_path, fgg::io::serialize(out));
    std::ostringstream human;
    human << "wrote " << out_path << " (" << out.rules.size() << " rules, width "
          << frep.max_width << ")\n";
    if (report)
      for (const auto& pr : frep.rules)
        human << "  " << pr.rule_id << ": width " << pr.width << ", "
              << pr.bags << " bags\n";
    json jrules = json::array();
    for (const auto& pr : frep.rules)
      jrules.push_back(
          {{"rule", pr.rule_id}, {"width", pr.width}, {"bags", pr.bags}});
    print_result(opt,
                 {{"rules", out.rules.size()},
                  {"max_width", frep.max_width},
                  {"per_rule", jrules}},
                 human.str());
    return kExitOk;
  }

  if (tofg->parsed()) {
    fgg::FGG g = load_fgg(in_path, opt);
    fgg::CompiledFactorGraph c = fgg::compile(g);
    spill(out_path, fgg::io::serialize(fgg::io::to_document(c)));
    std::ostringstream human;
    human << "wrote " << out_path << " (" << c.variable_count << " variables, "
          << c.factor_count << " factors)\n";
    json machine = {{"variables", c.variable_count},
                    {"factors", c.factor_count}};
    if (verify) {
      fgg::CompileVerifyReport rep = fgg::verify_compile(g);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.3g", rep.rel_diff);
      human << "verified: |Z_fgg - Z_compiled| / Z = " << buf << "\n";
      machine["verify"] = {{"z_fgg", rep.z_fgg},
                           {"z_compiled", rep.z_compiled},
                           {"rel_diff", rep.rel_diff}};
      if (rep.rel_diff > 1e-6)
        fgg::fail(fgg::errc::internal, "compiled Z mismatch");
    }
    print_result(opt, machine, human.str());
    return kExitOk;
  }

  if (derive_cmd->parsed()) {
    fgg::FGG g = load_fgg(in_path, opt);
    fgg::EnumerationResult en =
        fgg::enumerate_derivations(g, max_depth, max_count);
    if (index >= 0) {
      if (static_cast<std::size_t>(index) >= en.trees.size())
        fgg::fail(fgg::errc::invalid_derivation,
                  "only " + std::to_string(en.trees.size()) + " derivations");
      fgg::Hypergraph h = fgg::derive(g, en.trees[index]);
      fgg::io::FactorGraphDoc doc;
      doc.space = g.space;
      doc.fragment.graph = h;
      std::string text = fgg::io::serialize(doc);
      if (out_path.empty())
        std::cout << text;
      else
        spill(out_path, text);
      return kExitOk;
    }
    std::ostringstream human;
    human << en.trees.size() << " derivations"
          << (en.truncated ? " (truncated)" : "") << "\n";
    for (std::size_t i = 0; i < en.trees.size(); ++i) {
      human << "#" << i << "\n";
      print_tree(en.trees[i], "  ", human);
    }
    print_result(opt,
                 {{"count", en.trees.size()}, {"truncated", en.truncated}},
                 human.str());
    return kExitOk;
  }

  if (import->parsed()) {
    fgg::io::ParsedDocument doc = fgg::io::parse(slurp(in_path), !opt.lenient);
    if (doc.kind != format)
      fgg::fail(fgg::errc::parse_error,
                "document kind " + doc.kind + " does not match --format " +
                    format);
    fgg::FGG out;
    if (format == "pfg")
      out = fgg::pfg_to_fgg(std::get<fgg::PlatedFactorGraph>(doc.value));
    else if (format == "dgm")
      out = fgg::dgm_to_fgg(std::get<fgg::DGM>(doc.value), count_n);
    else if (format == "cfd")
      out = fgg::cfd_to_fgg(std::get<fgg::CFD>(doc.value));
    else
      out = fgg::spn_to_fgg(std::get<fgg::SPN>(doc.value));
    spill(out_path, fgg::io::serialize(out));
    print_result(opt, {{"rules", out.rules.size()}},
                 "wrote " + out_path + " (" + std::to_string(out.rules.size()) +
                     " rules)\n");
    return kExitOk;
  }

  return kExitInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const fgg::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case fgg::errc::not_convertible:
        return kExitNotConvertible;
      case fgg::errc::non_convergence:
      case fgg::errc::not_converged:
        return kExitNotConverged;
      default:
        return kExitInvalid;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}
