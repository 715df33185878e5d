#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "percolab/experiments.hpp"

using namespace percolab;

namespace {

ExperimentSpec spec_from(const std::string& yaml) { return ExperimentSpec::from_json(parse_spec_text(yaml)); }

std::string first_code(const ExperimentSpec& s) {
  const auto d = validate(s);
  return d.empty() ? "" : d.front().code;
}

}  // namespace

TEST_CASE("yaml spec parsing") {
  const json j = parse_spec_text(
      "name: t\nkind: pi_scaling\nregion: {shape: box, half_width: 20}\n"
      "params: {scales: [2, 4.5], label: '7', flag: true, none: null}\nn_samples: 50\nseed: 3\n");
  CHECK(j.at("params").at("scales")[0].is_number_integer());
  CHECK(j.at("params").at("scales")[1] == 4.5);
  CHECK(j.at("params").at("label") == "7");
  CHECK(j.at("params").at("flag") == true);
  CHECK(j.at("params").at("none").is_null());
  const ExperimentSpec s = ExperimentSpec::from_json(j);
  CHECK(s.kind == "pi_scaling");
  CHECK(s.n_samples == 50);
  CHECK(s.seed == 3);
  CHECK(ExperimentSpec::from_json(s.to_json()).to_json() == s.to_json());
  CHECK(parse_spec_text("{\"kind\": \"pi_scaling\"}").at("kind") == "pi_scaling");
}

TEST_CASE("every example spec validates") {
  const std::filesystem::path dir = std::filesystem::path(PERCOLAB_SOURCE_DIR) / "examples_specs";
  size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const ExperimentSpec s = load_spec(e.path().string());
    INFO(e.path().string());
    CHECK(validate(s).empty());
    ++n;
  }
  CHECK(n == experiment_kinds().size());
}

TEST_CASE("diagnostics") {
  CHECK(first_code(spec_from("kind: nope\n")) == "kind");
  CHECK(first_code(spec_from("kind: pi_scaling\nregion: {shape: box, half_width: 10}\nparams: {scales: [4, 40]}\n")) ==
        "margin");
  CHECK(first_code(spec_from("kind: coupling_test\nregion: {shape: box, half_width: 60}\n"
                             "params: {eta: 8, delta: 4, eps: 16}\n")) == "hierarchy");
  CHECK(first_code(spec_from("kind: pi_scaling\nparams: {scales: fish}\n")) == "param");
  CHECK(first_code(spec_from("kind: coupling_test\nregion: {shape: box, half_width: 60}\nparams: {eta: 2, delta: 4, eps: 16, exact: {region: {shape: rhombus, side: 6}}}\n")) ==
        "guard");
  CHECK(first_code(spec_from("kind: pi_scaling\nregion: {shape: box, half_width: 30}\nparams: {scales: [2, 4, 8]}\n"))
            .empty());
}

TEST_CASE("tables are identical across thread counts") {
  ExperimentSpec s = spec_from(
      "kind: p2_scaling\nregion: {shape: box, half_width: 24}\nparams: {distances: [2, 4, 8], directions: [0]}\n"
      "n_samples: 700\nseed: 5\n");
  s.threads = 1;
  const ExperimentResult a = run_experiment(s);
  s.threads = 3;
  const ExperimentResult b = run_experiment(s);
  REQUIRE(a.tables.size() == b.tables.size());
  for (size_t i = 0; i < a.tables.size(); ++i) CHECK(table_csv(a.tables[i]) == table_csv(b.tables[i]));
  CHECK(a.manifest.at("estimates") == b.manifest.at("estimates"));
  CHECK(a.manifest.at("seed") == 5);
  CHECK(a.manifest.at("n_samples") == 700);
  CHECK(a.manifest.contains("fit"));
}

TEST_CASE("results are written to disk") {
  ExperimentSpec s = spec_from(
      "kind: rhombus_crossing\nregion: {shape: box, half_width: 8}\nparams: {sides: [2, 4]}\nn_samples: 100\n");
  const ExperimentResult r = run_experiment(s);
  const auto dir = std::filesystem::temp_directory_path() / "percolab_unit_write";
  std::filesystem::remove_all(dir);
  for (const std::string fmt : {"csv", "json"}) {
    write_result(r, dir.string(), fmt);
    CHECK(std::filesystem::exists(dir / "manifest.json"));
    for (const Table& t : r.tables) CHECK(std::filesystem::exists(dir / (t.name + "." + fmt)));
  }
  std::ifstream in(dir / "manifest.json");
  const json m = json::parse(in);
  CHECK(m.at("kind") == "rhombus_crossing");
  std::filesystem::remove_all(dir);
  CHECK_THROWS(write_result(r, dir.string(), "xml"));
}

TEST_CASE("csv quoting") {
  const Table t{"t", {"a", "b"}, {{json(1), json("x,y")}, {json(2.5), json(nullptr)}}};
  const std::string csv = table_csv(t);
  CHECK(csv.rfind("a,b\n", 0) == 0);
  CHECK(csv.find("\"x,y\"") != std::string::npos);
}
