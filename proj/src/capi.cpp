#include "percolab/percolab.h"

#include <cstring>
#include <string>

#include "percolab/experiments.hpp"
#include "percolab/inference.hpp"
#include "percolab/sampling.hpp"

struct percolab_region {
  percolab::RegionPtr ptr;
};

struct percolab_spec {
  percolab::ExperimentSpec spec;
};

struct percolab_result {
  percolab::ExperimentResult result;
};

namespace {

thread_local std::string last_error;

template <class F>
percolab_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return PERCOLAB_OK;
  } catch (const percolab::InvalidArgument& e) {
    last_error = e.what();
    return PERCOLAB_INVALID_ARGUMENT;
  } catch (const percolab::GeometryError& e) {
    last_error = e.what();
    return PERCOLAB_GEOMETRY;
  } catch (const percolab::GuardError& e) {
    last_error = e.what();
    return PERCOLAB_GUARD;
  } catch (const percolab::IoError& e) {
    last_error = e.what();
    return PERCOLAB_IO;
  } catch (const nlohmann::json::exception& e) {
    last_error = e.what();
    return PERCOLAB_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    last_error = e.what();
    return PERCOLAB_RUNTIME;
  } catch (...) {
    last_error = "unknown error";
    return PERCOLAB_RUNTIME;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw percolab::InvalidArgument(std::string(what) + " is null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

percolab::json parse(const char* text) {
  need(text, "json text");
  try {
    return percolab::json::parse(text);
  } catch (const percolab::json::exception& e) {
    throw percolab::InvalidArgument(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

extern "C" {

const char* percolab_version(void) { return "0.1.0"; }

const char* percolab_last_error(void) { return last_error.c_str(); }

void percolab_string_free(char* s) { std::free(s); }

percolab_status percolab_region_from_json(const char* json, percolab_region** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    auto r = percolab::region_from_json(parse(json));
    *out = new percolab_region{std::move(r)};
  });
}

void percolab_region_destroy(percolab_region* region) { delete region; }

percolab_status percolab_region_size(const percolab_region* region, size_t* sites, size_t* free_sites) {
  return guarded([&] {
    need(region, "region");
    if (sites) *sites = region->ptr->size();
    if (free_sites) *free_sites = region->ptr->unmasked_count();
  });
}

percolab_status percolab_region_to_json(const percolab_region* region, char** out) {
  return guarded([&] {
    need(region, "region");
    need(out, "out");
    *out = dup(percolab::region_to_json(*region->ptr).dump());
  });
}

percolab_status percolab_sample(const percolab_region* region, uint64_t seed, uint64_t replica, uint8_t* out,
                                size_t len) {
  return guarded([&] {
    need(region, "region");
    need(out, "out");
    if (len < region->ptr->size()) throw percolab::InvalidArgument("buffer smaller than the region");
    const percolab::Configuration cfg = percolab::sample(region->ptr, seed, replica);
    for (size_t i = 0; i < cfg.size(); ++i) out[i] = cfg.open(i) ? 1 : 0;
  });
}

percolab_status percolab_estimate_event(const percolab_region* region, const char* event_json, uint64_t n_samples,
                                        uint64_t seed, unsigned threads, double* mean, double* std_error) {
  return guarded([&] {
    need(region, "region");
    const percolab::EventSpec ev = percolab::EventSpec::from_json(parse(event_json));
    const percolab::Estimate e = percolab::estimate_event(
        ev, region->ptr, n_samples, seed, threads == 0 ? percolab::default_threads() : threads);
    if (mean) *mean = e.mean;
    if (std_error) *std_error = e.std_error;
  });
}

percolab_status percolab_exact_event(const percolab_region* region, const char* event_json, uint64_t* num,
                                     uint64_t* den) {
  return guarded([&] {
    need(region, "region");
    const percolab::EventSpec ev = percolab::EventSpec::from_json(parse(event_json));
    const percolab::Rational r = percolab::brute_force_probability(region->ptr, ev);
    if (num) *num = r.num;
    if (den) *den = r.den;
  });
}

percolab_status percolab_experiment_kinds(char** out) {
  return guarded([&] {
    need(out, "out");
    std::string s;
    for (const std::string& k : percolab::experiment_kinds()) s += k + "\n";
    *out = dup(s);
  });
}

percolab_status percolab_spec_load(const char* path, percolab_spec** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    *out = new percolab_spec{percolab::load_spec(path)};
  });
}

percolab_status percolab_spec_parse(const char* text, percolab_spec** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = nullptr;
    *out = new percolab_spec{percolab::ExperimentSpec::from_json(percolab::parse_spec_text(text))};
  });
}

void percolab_spec_destroy(percolab_spec* spec) { delete spec; }

percolab_status percolab_spec_set_seed(percolab_spec* spec, uint64_t seed) {
  return guarded([&] {
    need(spec, "spec");
    spec->spec.seed = seed;
  });
}

percolab_status percolab_spec_set_samples(percolab_spec* spec, uint64_t n_samples) {
  return guarded([&] {
    need(spec, "spec");
    if (n_samples < 1) throw percolab::InvalidArgument("n_samples must be >= 1");
    spec->spec.n_samples = n_samples;
  });
}

percolab_status percolab_spec_set_threads(percolab_spec* spec, unsigned threads) {
  return guarded([&] {
    need(spec, "spec");
    spec->spec.threads = threads;
  });
}

percolab_status percolab_spec_set_output(percolab_spec* spec, const char* dir) {
  return guarded([&] {
    need(spec, "spec");
    need(dir, "dir");
    spec->spec.output = dir;
  });
}

percolab_status percolab_spec_set_format(percolab_spec* spec, const char* format) {
  return guarded([&] {
    need(spec, "spec");
    need(format, "format");
    const std::string f = format;
    if (f != "csv" && f != "json") throw percolab::InvalidArgument("format must be csv or json");
    spec->spec.format = f;
  });
}

percolab_status percolab_spec_to_json(const percolab_spec* spec, char** out) {
  return guarded([&] {
    need(spec, "spec");
    need(out, "out");
    *out = dup(spec->spec.to_json().dump(2));
  });
}

const char* percolab_spec_output(const percolab_spec* spec) { return spec ? spec->spec.output.c_str() : ""; }

const char* percolab_spec_format(const percolab_spec* spec) { return spec ? spec->spec.format.c_str() : ""; }

percolab_status percolab_spec_validate(const percolab_spec* spec, size_t* n, char** diagnostics) {
  return guarded([&] {
    need(spec, "spec");
    const auto d = percolab::validate(spec->spec);
    percolab::json a = percolab::json::array();
    for (const auto& x : d) a.push_back({{"code", x.code}, {"message", x.message}});
    if (n) *n = d.size();
    if (diagnostics) *diagnostics = dup(a.dump());
  });
}

percolab_status percolab_run(const percolab_spec* spec, percolab_result** out) {
  return guarded([&] {
    need(spec, "spec");
    need(out, "out");
    *out = nullptr;
    *out = new percolab_result{percolab::run_experiment(spec->spec)};
  });
}

void percolab_result_destroy(percolab_result* result) { delete result; }

percolab_status percolab_result_manifest(const percolab_result* result, char** out) {
  return guarded([&] {
    need(result, "result");
    need(out, "out");
    *out = dup(result->result.manifest.dump(2));
  });
}

percolab_status percolab_result_table_count(const percolab_result* result, size_t* n) {
  return guarded([&] {
    need(result, "result");
    need(n, "n");
    *n = result->result.tables.size();
  });
}

static const percolab::Table& table_at(const percolab_result* result, size_t index) {
  need(result, "result");
  if (index >= result->result.tables.size()) throw percolab::InvalidArgument("table index out of range");
  return result->result.tables[index];
}

percolab_status percolab_result_table_name(const percolab_result* result, size_t index, char** out) {
  return guarded([&] {
    need(out, "out");
    *out = dup(table_at(result, index).name);
  });
}

percolab_status percolab_result_table_csv(const percolab_result* result, size_t index, char** out) {
  return guarded([&] {
    need(out, "out");
    *out = dup(percolab::table_csv(table_at(result, index)));
  });
}

percolab_status percolab_result_passed(const percolab_result* result, int* passed) {
  return guarded([&] {
    need(result, "result");
    need(passed, "passed");
    *passed = result->result.passed ? 1 : 0;
  });
}

percolab_status percolab_result_write(const percolab_result* result, const char* dir, const char* format) {
  return guarded([&] {
    need(result, "result");
    need(dir, "dir");
    percolab::write_result(result->result, dir, format ? format : "csv");
  });
}

}  // extern "C"
