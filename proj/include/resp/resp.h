#ifndef RESP_RESP_H
#define RESP_RESP_H

#include <stddef.h>
#include <stdint.h>

#if defined(RESP_BUILDING_LIBRARY)
#define RESP_API __attribute__((visibility("default")))
#else
#define RESP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes for the command-line tool. */
typedef enum resp_status {
  RESP_OK = 0,
  RESP_ERR_INTERNAL = 1,
  RESP_ERR_CONFIG = 2,
  RESP_ERR_DATA = 3,
  RESP_ERR_NUMERICAL = 4
} resp_status;

RESP_API const char* resp_version(void);
/* Message of the last failed call on this thread; "" when none. */
RESP_API const char* resp_last_error(void);
/* "ok", "internal", "config", "data" or "numerical". */
RESP_API const char* resp_status_name(resp_status status);

/* A session holds a run configuration and an output directory. */
typedef struct resp_session resp_session;

RESP_API resp_status resp_session_create(resp_session** out);
RESP_API void resp_session_destroy(resp_session* session);
/* Loads an INI file; keys already set by resp_session_set are kept. */
RESP_API resp_status resp_session_load_config(resp_session* session, const char* path);
/* key is "section.key". */
RESP_API resp_status resp_session_set(resp_session* session, const char* key, const char* value);
RESP_API resp_status resp_session_set_output_dir(resp_session* session, const char* dir);

RESP_API resp_status resp_simulate(resp_session* session);
RESP_API resp_status resp_fit(resp_session* session);
RESP_API resp_status resp_compose(resp_session* session);
RESP_API resp_status resp_eofs(resp_session* session);
RESP_API resp_status resp_predict(resp_session* session);
RESP_API resp_status resp_validate(resp_session* session);
/* input_dir may be NULL to read from the output directory. */
RESP_API resp_status resp_report(resp_session* session, const char* input_dir);

/* Numerical primitives. Matrices are row-major. */
RESP_API resp_status resp_great_circle_km(double lon1, double lat1, double lon2, double lat2, double* out);
RESP_API resp_status resp_matern(double distance, double sigma2, double range, double nu, double* out);
/* out (m*p x s) = (A (m x n) ⊗ B (p x q)) C (n*q x s). */
RESP_API resp_status resp_kron_apply(const double* A, size_t m, size_t n, const double* B, size_t p, size_t q,
                                     const double* C, size_t s, double* out);
RESP_API resp_status resp_heidke(const int* predicted, const int* observed, size_t n, double* out);
/* probs is n x 3 row-major; observed holds categories 1..3. */
RESP_API resp_status resp_rps(const double* probs, const int* observed, size_t n, double* out);

/* Marginal likelihood of a dataset described by the session's [data] section. */
typedef struct resp_model resp_model;

typedef struct resp_state {
  const double* beta; /* length p */
  double sigma2_w;
  double nugget_ratio;
  double sigma2_alpha;
  double rho_w;
  double rho_alpha;
  double nu_w;
  double nu_alpha;
} resp_state;

RESP_API resp_status resp_model_open(const resp_session* session, resp_model** out);
RESP_API void resp_model_close(resp_model* model);
RESP_API resp_status resp_model_dims(const resp_model* model, size_t* n_s, size_t* n_t, size_t* n_r, size_t* k,
                                     size_t* p);
RESP_API resp_status resp_model_loglik(resp_model* model, const resp_state* state, double* out);

#ifdef __cplusplus
}
#endif

#endif
