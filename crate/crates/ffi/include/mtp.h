#ifndef MTP_H
#define MTP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MtpStatus {
  MTP_STATUS_OK = 0,
  MTP_STATUS_NULL_POINTER = 1,
  MTP_STATUS_INVALID_UTF8 = 2,
  // Bad input: argument, domain, config or unsupported combination.
  MTP_STATUS_INVALID = 3,
  // Numerical, coverage or construction failure.
  MTP_STATUS_NUMERIC = 4,
  MTP_STATUS_PANIC = 5,
} MtpStatus;

typedef enum MtpMetric {
  MTP_METRIC_SUP = 0,
  MTP_METRIC_EUCLIDEAN = 1,
  MTP_METRIC_TORUS_SUP = 2,
} MtpMetric;

// Opaque gauge handle.
typedef struct MtpGauge MtpGauge;

// Opaque gauge-pair handle.
typedef struct MtpGaugePair MtpGaugePair;

// Opaque set-model handle.
typedef struct MtpSetModel MtpSetModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version; static storage, do not free.
const char *mtp_version(void);

// Copy of the calling thread's last error message, or null. Free with `mtp_string_free`.
char *mtp_last_error(void);

// # Safety
// `s` must be null or a string returned by this library.
void mtp_string_free(char *s);

// `r^s`.
//
// # Safety
// `out` must be a writable pointer.
enum MtpStatus mtp_gauge_new_power(double s, struct MtpGauge **out);

// Gauge from its JSON form, e.g. `{"kind":"power","s":0.5}`.
//
// # Safety
// `json` must be a valid NUL-terminated string; `out` a writable pointer.
enum MtpStatus mtp_gauge_from_json(const char *json, struct MtpGauge **out);

// # Safety
// `g` must be a live handle.
enum MtpStatus mtp_gauge_eval(const struct MtpGauge *g, double r, double *out);

// # Safety
// `g` must be null or a handle not yet freed.
void mtp_gauge_free(struct MtpGauge *g);

// Pair `(f, g)` with exponent `kappa`; the gauges are copied.
//
// # Safety
// `f`, `g` must be live handles; `out` a writable pointer.
enum MtpStatus mtp_gauge_pair_new(const struct MtpGauge *f,
                                  const struct MtpGauge *g,
                                  double kappa,
                                  double lambda_doubling,
                                  struct MtpGaugePair **out);

// # Safety
// `json` must be a valid NUL-terminated string; `out` a writable pointer.
enum MtpStatus mtp_gauge_pair_from_json(const char *json, struct MtpGaugePair **out);

// Transformed radius `Ῡ` for `Υ = upsilon`.
//
// # Safety
// `p` must be a live handle; `out` a writable pointer.
enum MtpStatus mtp_radius_transform(const struct MtpGaugePair *p, double upsilon, double *out);

// # Safety
// `p` must be null or a handle not yet freed.
void mtp_gauge_pair_free(struct MtpGaugePair *p);

// Set model from its JSON form (`{"variant": "points", ...}` etc.).
//
// # Safety
// `json` must be a valid NUL-terminated string; `out` a writable pointer.
enum MtpStatus mtp_set_model_from_json(const char *json, struct MtpSetModel **out);

// Ambient dimension, or 0 for a null handle.
//
// # Safety
// `m` must be null or a live handle.
size_t mtp_set_model_dim(const struct MtpSetModel *m);

// Distance from the point `x[0..n]` to the set.
//
// # Safety
// `m` must be a live handle, `x` must point to `n` doubles, `out` writable.
enum MtpStatus mtp_set_model_distance(const struct MtpSetModel *m,
                                      const double *x,
                                      size_t n,
                                      enum MtpMetric metric,
                                      double *out);

// # Safety
// `m` must be null or a handle not yet freed.
void mtp_set_model_free(struct MtpSetModel *m);

// Runs a CLI command (`"fit-lsp"`, `"randsim"`, ...) on an inline JSON config
// and returns the run report as JSON. Nothing is written to disk; relative
// paths in the config resolve against the working directory. `threads` = 0
// uses the default pool size.
//
// # Safety
// `command` and `config_json` must be valid NUL-terminated strings; `out` writable.
enum MtpStatus mtp_run_json(const char *command,
                            const char *config_json,
                            size_t threads,
                            char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MTP_H */
