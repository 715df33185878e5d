#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

#include "percolab/percolab.h"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

int fail(percolab_status st, const char* what) {
  std::fprintf(stderr, "percolab: %s: %s\n", what, percolab_last_error());
  return st == PERCOLAB_RUNTIME || st == PERCOLAB_IO ? kExitRuntime : kExitValidation;
}

struct Overrides {
  std::string spec;
  std::optional<uint64_t> seed;
  std::optional<uint64_t> samples;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  std::optional<std::string> format;
};

percolab_status load(const Overrides& o, percolab_spec** spec) {
  percolab_status st = percolab_spec_load(o.spec.c_str(), spec);
  if (st != PERCOLAB_OK) return st;
  if (o.seed && (st = percolab_spec_set_seed(*spec, *o.seed)) != PERCOLAB_OK) return st;
  if (o.samples && (st = percolab_spec_set_samples(*spec, *o.samples)) != PERCOLAB_OK) return st;
  if (o.threads && (st = percolab_spec_set_threads(*spec, *o.threads)) != PERCOLAB_OK) return st;
  if (o.out && (st = percolab_spec_set_output(*spec, o.out->c_str())) != PERCOLAB_OK) return st;
  if (o.format && (st = percolab_spec_set_format(*spec, o.format->c_str())) != PERCOLAB_OK) return st;
  return PERCOLAB_OK;
}

// Prints diagnostics; returns true when the spec is usable.
bool check(percolab_spec* spec) {
  size_t n = 0;
  char* diag = nullptr;
  if (percolab_spec_validate(spec, &n, &diag) != PERCOLAB_OK) {
    std::fprintf(stderr, "percolab: validation failed: %s\n", percolab_last_error());
    return false;
  }
  if (n > 0) std::fprintf(stderr, "%s\n", diag);
  percolab_string_free(diag);
  return n == 0;
}

int do_validate(const Overrides& o) {
  percolab_spec* spec = nullptr;
  if (percolab_status st = load(o, &spec); st != PERCOLAB_OK) {
    percolab_spec_destroy(spec);
    return fail(st, "cannot load spec");
  }
  const bool ok = check(spec);
  percolab_spec_destroy(spec);
  if (ok) std::printf("ok\n");
  return ok ? 0 : kExitValidation;
}

int do_run(const Overrides& o) {
  percolab_spec* spec = nullptr;
  if (percolab_status st = load(o, &spec); st != PERCOLAB_OK) {
    percolab_spec_destroy(spec);
    return fail(st, "cannot load spec");
  }
  if (!check(spec)) {
    percolab_spec_destroy(spec);
    return kExitValidation;
  }
  percolab_result* res = nullptr;
  percolab_status st = percolab_run(spec, &res);
  if (st != PERCOLAB_OK) {
    percolab_spec_destroy(spec);
    return fail(st, "run failed");
  }
  const std::string dir = percolab_spec_output(spec);
  st = percolab_result_write(res, dir.c_str(), percolab_spec_format(spec));
  int passed = 1;
  percolab_result_passed(res, &passed);
  size_t tables = 0;
  percolab_result_table_count(res, &tables);
  for (size_t i = 0; i < tables && st == PERCOLAB_OK; ++i) {
    char* name = nullptr;
    char* csv = nullptr;
    percolab_result_table_name(res, i, &name);
    percolab_result_table_csv(res, i, &csv);
    std::printf("# %s\n%s", name, csv);
    percolab_string_free(name);
    percolab_string_free(csv);
  }
  percolab_result_destroy(res);
  percolab_spec_destroy(spec);
  if (st != PERCOLAB_OK) return fail(st, "cannot write results");
  std::printf("# results written to %s\n", dir.c_str());
  return passed ? 0 : 1;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--spec", o.spec, "experiment spec (YAML or JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "override the spec seed");
  cmd->add_option("--samples", o.samples, "override n_samples")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", o.threads, "worker threads (default: PERCOLAB_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--format", o.format, "table format")->check(CLI::IsMember({"csv", "json"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo experiments for critical site percolation on the triangular lattice"};
  app.set_version_flag("--version", std::string(percolab_version()));
  app.require_subcommand(1);
  Overrides run_o, val_o;
  CLI::App* run = app.add_subcommand("run", "run an experiment and write its tables and manifest");
  add_common(run, run_o);
  CLI::App* val = app.add_subcommand("validate", "check a spec without running it");
  add_common(val, val_o);
  app.add_subcommand("kinds", "list experiment kinds");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  if (run->parsed()) return do_run(run_o);
  if (val->parsed()) return do_validate(val_o);
  char* kinds = nullptr;
  if (percolab_status st = percolab_experiment_kinds(&kinds); st != PERCOLAB_OK) return fail(st, "kinds");
  std::printf("%s", kinds);
  percolab_string_free(kinds);
  return 0;
}
