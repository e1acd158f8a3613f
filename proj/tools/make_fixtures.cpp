// Regenerates the bundled JSON fixtures under fixtures/.

#include <fstream>
#include <iostream>
#include <string>

#include "fgg/conjunction.hpp"
#include "fgg/fixtures.hpp"
#include "fgg/io.hpp"

namespace {

void write(const std::string& dir, const std::string& name,
           const std::string& text) {
  std::ofstream out(dir + "/" + name, std::ios::binary);
  out << text;
  std::cout << name << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  std::string dir = argc > 1 ? argv[1] : "fixtures";
  using namespace fgg;
  fixtures::HmmParams p = fixtures::default_hmm_params();

  write(dir, "hmm.fgg.json", io::serialize(fixtures::hmm_fgg(p)));
  write(dir, "hmm_w_the_dog.fgg.json",
        io::serialize(fixtures::hmm_string_query(p, {"the", "dog"})));
  write(dir, "hmm_conj_the_dog.fgg.json",
        io::serialize(conjoin(fixtures::hmm_fgg(p),
                              fixtures::hmm_string_query(p, {"the", "dog"}))));
  write(dir, "query_second_to_last.fgg.json",
        io::serialize(second_to_last_query(fixtures::hmm_fgg(p))));

  fixtures::PcfgParams pc;
  pc.symbols = {"S", "A", "B"};
  pc.words = {"a", "b"};
  pc.binary = std::vector<double>(27, 0.0);
  auto b3 = [&](int a, int b, int c) -> double& {
    return pc.binary[(a * 3 + b) * 3 + c];
  };
  b3(0, 1, 2) = 0.7;  // S -> A B
  b3(1, 1, 1) = 0.2;  // A -> A A
  b3(2, 2, 1) = 0.3;  // B -> B A
  pc.lexical = {0.0, 0.0, 0.5, 0.3, 0.2, 0.5};
  write(dir, "pcfg.fgg.json", io::serialize(fixtures::pcfg_fgg(pc)));
  write(dir, "pcfg_w_aba.fgg.json",
        io::serialize(fixtures::pcfg_string_query(pc, {"a", "b", "a"})));

  write(dir, "example9.fgg.json", io::serialize(fixtures::example9_fgg()));
  write(dir, "geometric.fgg.json",
        io::serialize(fixtures::geometric_fgg(0.5, 0.5)));
  write(dir, "quadratic.fgg.json",
        io::serialize(fixtures::quadratic_fgg(0.4, 0.6)));
  write(dir, "quadratic_divergent.fgg.json",
        io::serialize(fixtures::quadratic_fgg(1.0, 1.0)));
  write(dir, "pfg_example.pfg.json", io::serialize(fixtures::pfg_example()));
  write(dir, "rbm.pfg.json", io::serialize(fixtures::rbm_pfg()));
  write(dir, "dgm_example.dgm.json", io::serialize(fixtures::dgm_example()));
  return 0;
}
