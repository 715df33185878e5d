#ifndef PERCOLAB_H
#define PERCOLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(__GNUC__)
#define PERCOLAB_API __attribute__((visibility("default")))
#else
#define PERCOLAB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum percolab_status {
  PERCOLAB_OK = 0,
  PERCOLAB_INVALID_ARGUMENT = 1,
  PERCOLAB_GEOMETRY = 2,
  PERCOLAB_GUARD = 3,
  PERCOLAB_IO = 4,
  PERCOLAB_RUNTIME = 5
} percolab_status;

typedef struct percolab_region percolab_region;
typedef struct percolab_spec percolab_spec;
typedef struct percolab_result percolab_result;

PERCOLAB_API const char* percolab_version(void);

/* Message of the last failed call on this thread, "" if none. */
PERCOLAB_API const char* percolab_last_error(void);

/* Strings returned through char** out-parameters are owned by the caller. */
PERCOLAB_API void percolab_string_free(char* s);

PERCOLAB_API percolab_status percolab_region_from_json(const char* json, percolab_region** out);
PERCOLAB_API void percolab_region_destroy(percolab_region* region);
PERCOLAB_API percolab_status percolab_region_size(const percolab_region* region, size_t* sites, size_t* free_sites);
PERCOLAB_API percolab_status percolab_region_to_json(const percolab_region* region, char** out);

/* out[i] = 1 when site i is open, for i < percolab_region_size(). */
PERCOLAB_API percolab_status percolab_sample(const percolab_region* region, uint64_t seed, uint64_t replica, uint8_t* out,
                                size_t len);

/* Monte Carlo probability of an event given as JSON, e.g.
   {"event":"connection","points":[[0,0],[4,0]]}. threads == 0 picks the default. */
PERCOLAB_API percolab_status percolab_estimate_event(const percolab_region* region, const char* event_json, uint64_t n_samples,
                                        uint64_t seed, unsigned threads, double* mean, double* std_error);

/* Exact probability by enumeration, as num/den. */
PERCOLAB_API percolab_status percolab_exact_event(const percolab_region* region, const char* event_json, uint64_t* num,
                                     uint64_t* den);

/* Newline-separated list of experiment kinds. */
PERCOLAB_API percolab_status percolab_experiment_kinds(char** out);

PERCOLAB_API percolab_status percolab_spec_load(const char* path, percolab_spec** out);
PERCOLAB_API percolab_status percolab_spec_parse(const char* text, percolab_spec** out);
PERCOLAB_API void percolab_spec_destroy(percolab_spec* spec);
PERCOLAB_API percolab_status percolab_spec_set_seed(percolab_spec* spec, uint64_t seed);
PERCOLAB_API percolab_status percolab_spec_set_samples(percolab_spec* spec, uint64_t n_samples);
PERCOLAB_API percolab_status percolab_spec_set_threads(percolab_spec* spec, unsigned threads);
PERCOLAB_API percolab_status percolab_spec_set_output(percolab_spec* spec, const char* dir);
PERCOLAB_API percolab_status percolab_spec_set_format(percolab_spec* spec, const char* format);
PERCOLAB_API percolab_status percolab_spec_to_json(const percolab_spec* spec, char** out);
/* Output directory and format currently set on the spec. */
PERCOLAB_API const char* percolab_spec_output(const percolab_spec* spec);
PERCOLAB_API const char* percolab_spec_format(const percolab_spec* spec);

/* Writes a JSON array of {"code","message"} to *diagnostics and stores the
   count in *n. */
PERCOLAB_API percolab_status percolab_spec_validate(const percolab_spec* spec, size_t* n, char** diagnostics);

PERCOLAB_API percolab_status percolab_run(const percolab_spec* spec, percolab_result** out);
PERCOLAB_API void percolab_result_destroy(percolab_result* result);
PERCOLAB_API percolab_status percolab_result_manifest(const percolab_result* result, char** out);
PERCOLAB_API percolab_status percolab_result_table_count(const percolab_result* result, size_t* n);
PERCOLAB_API percolab_status percolab_result_table_name(const percolab_result* result, size_t index, char** out);
PERCOLAB_API percolab_status percolab_result_table_csv(const percolab_result* result, size_t index, char** out);
/* 1 when the experiment's own verdict passed (always 1 for plain estimators). */
PERCOLAB_API percolab_status percolab_result_passed(const percolab_result* result, int* passed);
PERCOLAB_API percolab_status percolab_result_write(const percolab_result* result, const char* dir, const char* format);

#ifdef __cplusplus
}
#endif

#endif
