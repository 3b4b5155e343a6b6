// Renders the procedural toy corpus used by tests and the offline pipeline.

#include <iostream>

#include <CLI11.hpp>

#include "synthaug/common/errors.hpp"
#include "synthaug/toy/corpus.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Render the toy insulator corpus"};
  std::string out;
  synthaug::toy::ToyCorpusConfig cfg;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--groups", cfg.n_groups, "Number of insulator groups");
  app.add_option("--dual", cfg.n_dual_defect, "Groups with both damage types");
  app.add_option("--seed", cfg.seed, "Random seed");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto summary = synthaug::toy::write_toy_corpus(out, cfg);
    std::cout << synthaug::toy::to_json(summary).dump() << "\n";
  } catch (const synthaug::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  }
  return 0;
}
