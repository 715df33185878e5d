#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "percolab/serialization.hpp"

namespace percolab {

/// Problem found in an experiment spec. Codes: "parse", "kind", "param",
/// "margin" (geometry does not fit the region), "guard" (enumeration too
/// large), "hierarchy" (scale separation violated).
struct Diagnostic {
  std::string code;
  std::string message;
};

struct ExperimentSpec {
  std::string name;
  std::string kind;
  json region;  // region descriptor, null for the kind's default
  json params = json::object();
  uint64_t n_samples = 1000;
  uint64_t seed = 0;
  unsigned threads = 0;  // 0: default_threads()
  std::string output = "results";
  std::string format = "csv";

  static ExperimentSpec from_json(const json& j);
  json to_json() const;
};

/// Parses YAML or JSON text into a json tree.
json parse_spec_text(const std::string& text);
ExperimentSpec load_spec(const std::string& path);

const std::vector<std::string>& experiment_kinds();

std::vector<Diagnostic> validate(const ExperimentSpec& spec);

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;
};

struct ExperimentResult {
  json manifest;
  std::vector<Table> tables;
  /// Extra files (name, content), e.g. loop exports.
  std::vector<std::pair<std::string, std::string>> files;
  /// Kind-specific verdict (oracle_suite, coupling_test); true otherwise.
  bool passed = true;
};

/// Runs a validated spec. Throws InvalidArgument / GeometryError /
/// GuardError on bad input and Error on runtime failure.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Writes manifest.json and one <table>.csv (or .json) per table into `dir`.
void write_result(const ExperimentResult& result, const std::string& dir, const std::string& format);

std::string table_csv(const Table& t);

}  // namespace percolab
