#ifndef ABC_C_H
#define ABC_C_H

#include <stddef.h>
#include <stdint.h>

#if defined(ABC_BUILDING_LIBRARY)
#define ABC_API __attribute__((visibility("default")))
#else
#define ABC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum abc_status {
    ABC_OK = 0,
    ABC_ERR_INVALID = 1,   /* bad argument or precondition */
    ABC_ERR_USAGE = 2,     /* configuration or parse error */
    ABC_ERR_RANGE = 3,     /* overflow, e.g. strip evaluation */
    ABC_ERR_RUNTIME = 4,   /* module failure during a computation */
    ABC_ERR_IO = 5
} abc_status;

/* Message of the last failing call on this thread; never NULL. */
ABC_API const char* abc_last_error(void);
ABC_API const char* abc_version(void);
/* Strings returned through char** are owned by the caller. */
ABC_API void abc_string_free(char* s);

/* Parameter schedule */
typedef struct abc_schedule abc_schedule;
ABC_API abc_status abc_schedule_new(int64_t s0, abc_schedule** out);
ABC_API abc_status abc_schedule_extend(abc_schedule* sch, int64_t k, int64_t l, int64_t s_next);
ABC_API size_t abc_schedule_size(const abc_schedule* sch);
/* JSON record of stage n: {"n","k","l","s","p","q"}, p and q as decimal strings */
ABC_API abc_status abc_schedule_stage_json(const abc_schedule* sch, size_t n, char** out);
ABC_API void abc_schedule_free(abc_schedule* sch);

/* Words: letters are whitespace-separated tokens, or one character each when no spaces. */
ABC_API abc_status abc_circular_op(const char* const* words, size_t count, int64_t p, int64_t q, int64_t l, char** out);
/* readable = 1 when unique readability holds; witness_json is "null" then */
ABC_API abc_status abc_unique_readability(const char* const* words, size_t count, int* readable, char** witness_json);

/* Run configuration */
typedef struct abc_config abc_config;
ABC_API abc_status abc_config_new(abc_config** out);
ABC_API abc_status abc_config_load(const char* path, abc_config** out);
ABC_API abc_status abc_config_parse(const char* text, abc_config** out);
ABC_API abc_status abc_config_set(abc_config* cfg, const char* key, const char* value);
ABC_API abc_status abc_config_text(const abc_config* cfg, char** out);
ABC_API void abc_config_free(abc_config* cfg);

/* Reports */
typedef struct abc_report abc_report;
ABC_API abc_status abc_build(const abc_config* cfg, abc_report** out);
ABC_API abc_status abc_verify(const char* const* paths, size_t count, abc_report** out);
ABC_API abc_status abc_compare(const char* dir_a, const char* dir_b, int grid, abc_report** out);
ABC_API int abc_report_passed(const abc_report* rep);
ABC_API abc_status abc_report_json(const abc_report* rep, char** out);
ABC_API abc_status abc_report_summary(const abc_report* rep, char** out);
ABC_API void abc_report_free(abc_report* rep);

/* Analytic maps */
typedef struct abc_map abc_map;
ABC_API abc_status abc_map_load(const char* path, abc_map** out);
ABC_API abc_status abc_map_rotation(const char* alpha, abc_map** out);
ABC_API abc_status abc_map_apply(const abc_map* m, double xy[2]);
ABC_API abc_status abc_map_inverse(const abc_map* m, abc_map** out);
ABC_API abc_status abc_map_strip_distance(const abc_map* f, const abc_map* g, double rho, int grid, double* value);
ABC_API void abc_map_free(abc_map* m);

#ifdef __cplusplus
}
#endif

#endif
