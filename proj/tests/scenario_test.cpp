#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "ncindex/acceptance.hpp"
#include "ncindex/scenario.hpp"

using namespace ncindex;

namespace {

Json classical() {
  return Json::parse(R"({
    "name": "t", "seed": 3, "algebra": {"blocks": [1]}, "trace": {"kind": "normalized"},
    "grid": {"n": 8}, "bundle": {"presentation": "automorphy", "chern": 1},
    "expect": [{"quantity": "analytic_index", "value": 1, "provenance": "degree of the line bundle"}]
  })");
}

std::string error_of(const Json& j) {
  try {
    parse_scenario(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::vector<std::filesystem::path> bundled() {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(NCINDEX_SCENARIO_DIR))
    if (e.path().extension() == ".json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(Scenario, ErrorsNameTheOffendingField) {
  Json j = classical();
  j["grid"]["n"] = "sixteen";
  EXPECT_NE(error_of(j).find("grid.n"), std::string::npos) << error_of(j);

  j = classical();
  j.erase("name");
  EXPECT_NE(error_of(j).find("'name'"), std::string::npos) << error_of(j);

  j = classical();
  j["expect"][0]["quantity"] = "euler_characteristic";
  EXPECT_NE(error_of(j).find("expect[0].quantity"), std::string::npos) << error_of(j);

  j = classical();
  j["expect"][0].erase("provenance");
  EXPECT_NE(error_of(j).find("provenance"), std::string::npos) << error_of(j);

  j = classical();
  j["operator"] = "signature";
  EXPECT_NE(error_of(j).find("operator"), std::string::npos) << error_of(j);

  j = classical();
  j["cover"] = {{"group", "Z/3"}, {"axis", "y"}};
  EXPECT_NE(error_of(j).find("cover.axis"), std::string::npos) << error_of(j);

  j = classical();
  j["grid"]["n"] = 100;
  EXPECT_NE(error_of(j).find("grid.n"), std::string::npos) << error_of(j);
}

TEST(Scenario, InvalidJsonIsAConfigError) {
  const std::filesystem::path p = std::filesystem::temp_directory_path() / "ncindex_broken.json";
  std::ofstream(p) << "{\"name\": \"x\",";
  EXPECT_THROW(load_scenario(p.string()), ConfigError);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST(Scenario, ReportIsDeterministic) {
  Json j = classical();
  j["bundle"]["omega"] = {{"random", {{"scale", 0.4}, {"modes", 1}}}};
  const Scenario sc = parse_scenario(j);
  EXPECT_EQ(run_scenario(sc).dump(), run_scenario(parse_scenario(j)).dump());
}

TEST(Scenario, FailedExpectationSetsStatus) {
  Json j = classical();
  j["expect"][0]["value"] = 2;
  const Json rep = run_scenario(parse_scenario(j));
  EXPECT_EQ(rep["status"], "expectation_failure");
  EXPECT_FALSE(rep["expectations"][0]["met"].get<bool>());
}

TEST(Scenario, BundledScenariosMeetTheirExpectations) {
  const auto files = bundled();
  ASSERT_GE(files.size(), 5u);
  for (const auto& p : files) {
    const Json rep = run_scenario(load_scenario(p.string()));
    EXPECT_EQ(rep["status"], "ok") << p << "\n" << rep["expectations"].dump(2);
    EXPECT_FALSE(rep["expectations"].empty()) << p;
    for (const auto& e : rep["expectations"]) EXPECT_FALSE(e["provenance"].get<std::string>().empty());
  }
}

TEST(Scenario, UnknownSuiteIsRejected) {
  EXPECT_THROW(suite_criteria("everything"), ConfigError);
  EXPECT_EQ(suite_criteria("all").size(), 8u);
}
