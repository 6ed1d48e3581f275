#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "semilab/error.hpp"
#include "semilab/harness.hpp"

namespace h = semilab::harness;
using semilab::ErrorKind;

namespace {

int error_exit(const semilab::Error& e) {
  std::cerr << "semilab: " << e.what() << "\n";
  switch (e.kind()) {
    case ErrorKind::Usage:
    case ErrorKind::Io:
    case ErrorKind::Precondition:
      return 2;
    default:
      return 3;
  }
}

h::Json read_json(const std::string& path) {
  std::ifstream in(path);
  semilab::require(static_cast<bool>(in), ErrorKind::Io, "cannot open config " + path);
  try {
    return h::Json::parse(in);
  } catch (const h::Json::exception& e) {
    semilab::fail(ErrorKind::Usage, "config " + path + " is not valid JSON: " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semilab: numerical experiments on Markov semigroups"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "list experiment ids");
  auto* run = app.add_subcommand("run", "run one experiment");
  std::string id, config_path, out_dir, format = "csv";
  std::optional<std::uint64_t> seed;
  run->add_option("id", id, "experiment id")->required();
  run->add_option("--config", config_path, "JSON config file");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "root seed");
  run->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*list) {
      for (auto& e : h::registry())
        std::cout << e.id << "\t" << (e.stochastic ? "stochastic" : "deterministic") << "\t" << e.statement << "\n";
      return 0;
    }
    h::Json j = config_path.empty() ? h::Json::object() : read_json(config_path);
    auto cfg = h::parse_config(j, id);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    auto r = h::run(cfg);
    auto paths = h::emit(r, cfg.output_dir, format == "json" ? h::Format::Json : h::Format::Csv);
    std::cout << r.experiment_id << ": " << h::verdict_name(r.verdict);
    if (!r.message.empty() && r.verdict == h::Verdict::Fail) std::cout << " (" << r.message << ")";
    std::cout << "\n";
    for (auto& p : paths) std::cout << "  " << p << "\n";
    return h::exit_code(r.verdict);
  } catch (const semilab::Error& e) {
    return error_exit(e);
  }
}
