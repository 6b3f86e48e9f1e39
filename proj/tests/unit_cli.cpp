#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "peval/cli.hpp"
#include "peval/estimators.hpp"
#include "peval/io.hpp"

namespace {

namespace fs = std::filesystem;

const fs::path kData = fs::path(PEVAL_SOURCE_DIR) / "data";

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"peval"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return peval::cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path temp(const std::string& name) { return fs::temp_directory_path() / ("peval_cli_" + name); }

std::string csv_cell(const std::string& csv, const std::string& column, std::size_t row_index = 0) {
  std::istringstream in(csv);
  std::string header, line;
  std::getline(in, header);
  std::vector<std::string> cols;
  std::istringstream hs(header);
  std::string tok;
  while (std::getline(hs, tok, ',')) cols.push_back(tok);
  std::size_t target = cols.size();
  for (std::size_t i = 0; i < cols.size(); ++i)
    if (cols[i] == column) target = i;
  REQUIRE(target < cols.size());
  for (std::size_t r = 0; std::getline(in, line); ++r) {
    if (r != row_index) continue;
    std::istringstream ls(line);
    std::vector<std::string> cells;
    while (std::getline(ls, tok, ',')) cells.push_back(tok);
    REQUIRE(target < cells.size());
    return cells[target];
  }
  FAIL("row not found");
  return {};
}

}  // namespace

TEST_CASE("validate accepts the shipped fixtures") {
  CHECK(run_cli({"validate", "--model", (kData / "models" / "default_2x2x2.json").string()}) == 0);
  CHECK(run_cli({"validate", "--model", (kData / "models" / "default_2x2x2.json").string(), "--class",
                 (kData / "classes" / "grid8.json").string()}) == 0);
}

TEST_CASE("validate rejects malformed input with exit 1") {
  const fs::path bad = temp("bad_model.json");
  {
    std::ofstream out(bad);
    out << "{\"format_version\":1,\"type\":\"pomdp\",\"num_states\":2}";
  }
  CHECK(run_cli({"validate", "--model", bad.string()}) == 1);
  fs::remove(bad);
}

TEST_CASE("missing files exit with the io code") {
  CHECK(run_cli({"validate", "--model", "/nonexistent/peval/model.json"}) == 3);
}

TEST_CASE("unknown flags and subcommands are rejected") {
  CHECK(run_cli({"validate", "--frobnicate"}) == 1);
  CHECK(run_cli({"transmogrify"}) == 1);
  CHECK(run_cli({}) == 1);
}

TEST_CASE("bounds rejects an out-of-range delta with a field-level message") {
  CHECK(run_cli({"bounds", "--formula", "lemma2-epsilon", "--delta", "1.5", "--n", "100", "--eta", "2"}) == 1);
}

TEST_CASE("bounds computes the lemma radius and echoes its inputs") {
  const fs::path out = temp("bound.csv");
  CHECK(run_cli({"bounds", "--formula", "lemma2-epsilon", "--v-max", "1", "--eta", "2", "--delta", "0.05",
                 "--n", "100", "--variant", "paper_form", "--out", out.string()}) == 0);
  const std::string csv = slurp(out);
  CHECK(std::stod(csv_cell(csv, "value")) == doctest::Approx(0.1246364411263218).epsilon(1e-12));
  CHECK(csv_cell(csv, "variant") == "paper_form");
  CHECK(csv_cell(csv, "eta") == "2.0");
  fs::remove(out);
}

TEST_CASE("simulate then estimate reproduces the library result") {
  const fs::path dataset = temp("dataset.jsonl");
  const fs::path report = temp("estimate.csv");
  CHECK(run_cli({"simulate", "--model", (kData / "models" / "default_2x2x2.json").string(), "--behavior",
                 (kData / "policies" / "uniform.json").string(), "--return-kind", "finite_horizon", "--horizon",
                 "4", "--r-max", "2.0", "--n", "200", "--seed", "91", "--dataset", dataset.string()}) == 0);
  CHECK(run_cli({"estimate", "--dataset", dataset.string(), "--target",
                 (kData / "policies" / "mild.json").string(), "--estimator", "is", "--out", report.string()}) ==
        0);

  const peval::io::Dataset ds = peval::io::load_dataset(dataset);
  const peval::Estimate expected = peval::is_estimate(ds.samples, fixtures::mild_2x2());
  const std::string csv = slurp(report);
  CHECK(std::stod(csv_cell(csv, "value")) == doctest::Approx(expected.value).epsilon(1e-12));
  CHECK(std::stod(csv_cell(csv, "weight_mean")) == doctest::Approx(expected.weight_mean).epsilon(1e-12));
  CHECK(csv_cell(csv, "behavior_policy_id") == "uniform");

  // Byte-identical reports on a second run.
  const fs::path report2 = temp("estimate2.csv");
  CHECK(run_cli({"estimate", "--dataset", dataset.string(), "--target",
                 (kData / "policies" / "mild.json").string(), "--estimator", "is", "--out", report2.string()}) ==
        0);
  CHECK(slurp(report) == slurp(report2));

  fs::remove(dataset);
  fs::remove(report);
  fs::remove(report2);
}

TEST_CASE("estimate with target equal to behavior reports the crude mean") {
  const fs::path dataset = temp("dataset_onpolicy.jsonl");
  const fs::path report = temp("estimate_onpolicy.csv");
  CHECK(run_cli({"simulate", "--model", (kData / "models" / "default_2x2x2.json").string(), "--behavior",
                 (kData / "policies" / "uniform.json").string(), "--return-kind", "finite_horizon", "--horizon",
                 "4", "--r-max", "2.0", "--n", "150", "--seed", "17", "--dataset", dataset.string()}) == 0);
  CHECK(run_cli({"estimate", "--dataset", dataset.string(), "--target",
                 (kData / "policies" / "uniform.json").string(), "--out", report.string()}) == 0);
  const peval::io::Dataset ds = peval::io::load_dataset(dataset);
  const double crude = peval::crude_estimate(ds.samples.returns).value;
  CHECK(std::stod(csv_cell(slurp(report), "value")) == doctest::Approx(crude).epsilon(1e-12));
  fs::remove(dataset);
  fs::remove(report);
}

TEST_CASE("oracle exact-value agrees with the library") {
  const fs::path report = temp("oracle.csv");
  CHECK(run_cli({"oracle", "--op", "exact-value", "--model",
                 (kData / "models" / "default_2x2x2.json").string(), "--target",
                 (kData / "policies" / "mild.json").string(), "--return-kind", "finite_horizon", "--horizon",
                 "4", "--r-max", "2.0", "--out", report.string()}) == 0);
  const double expected =
      peval::exact_value(fixtures::default_model(), fixtures::mild_2x2(), fixtures::default_spec());
  CHECK(std::stod(csv_cell(slurp(report), "value")) == doctest::Approx(expected).epsilon(1e-12));
  fs::remove(report);
}

TEST_CASE("oracle flags numeric failures with exit 2") {
  // Horizon 12 blows the default enumeration cap on the 2x2x2 instance.
  CHECK(run_cli({"oracle", "--op", "exact-value", "--model",
                 (kData / "models" / "default_2x2x2.json").string(), "--target",
                 (kData / "policies" / "mild.json").string(), "--return-kind", "finite_horizon", "--horizon",
                 "12", "--r-max", "2.0"}) == 2);
}

TEST_CASE("config files drive subcommands and flags override them") {
  const fs::path cfg = temp("config.json");
  const fs::path out = temp("bound_cfg.csv");
  {
    std::ofstream o(cfg);
    o << R"({"format_version":1,"formula":"lemma2-epsilon","v_max":1.0,"eta":2.0,"delta":0.05,)"
      << R"("n_samples":100,"variant":"paper_form"})";
  }
  CHECK(run_cli({"bounds", "--config", cfg.string(), "--out", out.string()}) == 0);
  const double base = std::stod(csv_cell(slurp(out), "value"));
  CHECK(base == doctest::Approx(0.1246364411263218).epsilon(1e-12));

  // --delta on the command line overrides the config's 0.05.
  CHECK(run_cli({"bounds", "--config", cfg.string(), "--delta", "1.0", "--out", out.string()}) == 0);
  CHECK(std::stod(csv_cell(slurp(out), "value")) == 0.0);
  fs::remove(cfg);
  fs::remove(out);
}
