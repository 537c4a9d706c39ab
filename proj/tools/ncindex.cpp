// ncindex: run scenarios, acceptance suites, list bundled scenarios.
//
// Exit status: 0 all expectations met / all criteria pass, 1 otherwise,
// 2 on configuration errors.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "ncindex/acceptance.hpp"
#include "ncindex/scenario.hpp"

#ifndef NCINDEX_SCENARIO_DIR
#define NCINDEX_SCENARIO_DIR "scenarios"
#endif

namespace {

int run(const std::string& path, const std::string& out, const std::string& csv_dir) {
  const ncindex::Scenario sc = ncindex::load_scenario(path);
  const ncindex::Json rep = ncindex::run_scenario(sc);
  const std::string text = rep.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ncindex::ConfigError("cannot write report '" + out + "'");
    f << text;
  }
  if (!csv_dir.empty()) ncindex::write_chern_csv(sc, csv_dir);

  std::cerr << sc.name << ": " << rep["status"].get<std::string>() << "\n";
  for (const auto& e : rep["expectations"])
    if (!e["met"].get<bool>())
      std::cerr << "  expectation failed: " << e["quantity"].get<std::string>() << " expected " << e["expected"].dump()
                << " got " << e["actual"].dump() << " (tol " << e["tol"].get<double>() << ")\n";
  return rep["status"] == "ok" ? 0 : 1;
}

int suite(const std::string& name, std::uint64_t seed) {
  const std::vector<int> ids = ncindex::suite_criteria(name);
  int failed = 0;
  for (int id : ids) {
    const ncindex::CriterionResult r = ncindex::run_criterion(id, seed);
    ncindex::print_result(r, std::cout);
    failed += !r.pass;
  }
  std::cout << (ids.size() - failed) << "/" << ids.size() << " passed\n";
  return failed == 0 ? 0 : 1;
}

int list(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    std::string name = "?";
    try {
      std::ifstream in(p);
      name = ncindex::Json::parse(in).value("name", "?");
    } catch (const std::exception&) {
    }
    std::cout << p.filename().string() << "  " << name << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noncommutative twisted index computations on the torus"};
  app.require_subcommand(1);

  std::string scenario, out, csv_dir;
  auto* run_cmd = app.add_subcommand("run", "run one scenario config and write its JSON report");
  run_cmd->add_option("--scenario", scenario, "scenario JSON file")->required();
  run_cmd->add_option("--out", out, "report path (stdout when omitted)");
  run_cmd->add_option("--csv-dir", csv_dir, "directory for the Chern form CSV");

  std::string suite_name;
  std::uint64_t seed = ncindex::kDefaultSeed;
  auto* suite_cmd = app.add_subcommand("suite", "run an acceptance group and print a pass/fail table");
  suite_cmd->add_option("name", suite_name, "all | chern | index | cover | modules")->required();
  suite_cmd->add_option("--seed", seed, "seed for randomized checks");

  std::string dir = NCINDEX_SCENARIO_DIR;
  auto* list_cmd = app.add_subcommand("list", "list bundled scenarios");
  list_cmd->add_option("--dir", dir, "scenario directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return run(scenario, out, csv_dir);
    if (*suite_cmd) return suite(suite_name, seed);
    if (*list_cmd) return list(dir);
  } catch (const ncindex::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
