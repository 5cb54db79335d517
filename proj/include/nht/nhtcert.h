#ifndef NHTCERT_H
#define NHTCERT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NHT_API __declspec(dllexport)
#else
#define NHT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Return codes of run calls; they double as process exit codes. */
enum {
    NHT_OK = 0,
    NHT_ERROR = 1,
    NHT_INCONCLUSIVE = 2 /* infeasible or inconclusive verdict */
};

typedef struct nht_session nht_session;

NHT_API nht_session* nht_session_create(void);
NHT_API void nht_session_destroy(nht_session* s);

/* Overrides applied on top of the configuration. NULL clears a string override. */
NHT_API int nht_session_set_seed(nht_session* s, uint64_t seed);
NHT_API int nht_session_set_task(nht_session* s, const char* task);
NHT_API int nht_session_set_out_dir(nht_session* s, const char* dir);
NHT_API int nht_session_set_quiet(nht_session* s, int quiet);

NHT_API int nht_run_config_file(nht_session* s, const char* path);
NHT_API int nht_run_config_json(nht_session* s, const char* json_text);

/* Valid until the next run or destroy; never NULL for a live session. */
NHT_API const char* nht_last_error(const nht_session* s);
NHT_API const char* nht_last_verdict(const nht_session* s);
NHT_API const char* nht_last_report(const nht_session* s);
NHT_API size_t nht_log_count(const nht_session* s);
NHT_API const char* nht_log_line(const nht_session* s, size_t i);
NHT_API size_t nht_written_count(const nht_session* s);
NHT_API const char* nht_written_path(const nht_session* s, size_t i);

NHT_API const char* nht_version(void);

/* Direct evaluations. out receives the bound(s); returns NHT_OK or NHT_ERROR. */
NHT_API int nht_kerr_saddle_bound(double M, double a, double Lambda, double l, double p1,
                                  double theta, double* out_worst);
/* out[0..2]: theorem, remark and Kerr-text forms */
NHT_API int nht_decay_threshold(double nu_u, double nu_s, double f, double p1, double mu,
                                double out[3]);

#ifdef __cplusplus
}
#endif

#endif
