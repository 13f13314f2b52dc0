#include "resp/resp.h"

#include "resp/assess.hpp"
#include "resp/covkernels.hpp"
#include "resp/errors.hpp"
#include "resp/kronlinalg.hpp"
#include "resp/pipeline.hpp"

#include <memory>
#include <new>
#include <string>

struct resp_session {
  resp::Session session;
  std::map<std::string, std::string> overrides;  // reapplied after every config load
};

struct resp_model {
  resp::IngestResult input;
  std::unique_ptr<resp::ModelContext> ctx;  // points into input.data
};

namespace {

thread_local std::string g_last_error;

resp_status fail(resp_status s, const std::string& message) {
  g_last_error = message;
  return s;
}

// Runs f and maps exceptions onto status codes.
template <class F>
resp_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return RESP_OK;
  } catch (const resp::Error& e) {
    return fail(static_cast<resp_status>(e.category()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(RESP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(RESP_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(RESP_ERR_INTERNAL, "unknown error");
  }
}

#define RESP_REQUIRE(ptr)                                                   \
  do {                                                                      \
    if (!(ptr)) return fail(RESP_ERR_CONFIG, #ptr " must not be NULL");     \
  } while (0)

}  // namespace

extern "C" {

const char* resp_version(void) { return RESP_VERSION_STRING; }

const char* resp_last_error(void) { return g_last_error.c_str(); }

const char* resp_status_name(resp_status status) {
  if (status == RESP_OK) return "ok";
  return resp::category_name(static_cast<resp::ErrorCategory>(status));
}

resp_status resp_session_create(resp_session** out) {
  RESP_REQUIRE(out);
  return guarded([&] { *out = new resp_session(); });
}

void resp_session_destroy(resp_session* session) { delete session; }

resp_status resp_session_load_config(resp_session* session, const char* path) {
  RESP_REQUIRE(session);
  RESP_REQUIRE(path);
  return guarded([&] {
    resp::RunConfig cfg = resp::RunConfig::from_file(path);
    for (const auto& [k, v] : session->overrides) cfg.set(k, v);
    session->session.config = std::move(cfg);
  });
}

resp_status resp_session_set(resp_session* session, const char* key, const char* value) {
  RESP_REQUIRE(session);
  RESP_REQUIRE(key);
  RESP_REQUIRE(value);
  return guarded([&] {
    session->session.config.set(key, value);
    session->overrides[key] = value;
  });
}

resp_status resp_session_set_output_dir(resp_session* session, const char* dir) {
  RESP_REQUIRE(session);
  RESP_REQUIRE(dir);
  return guarded([&] { session->session.output_dir = std::filesystem::path(dir); });
}

#define RESP_SUBCOMMAND(name)                                  \
  resp_status resp_##name(resp_session* session) {             \
    RESP_REQUIRE(session);                                     \
    return guarded([&] {                                       \
      std::filesystem::create_directories(session->session.out()); \
      resp::run_##name(session->session);                      \
    });                                                        \
  }

RESP_SUBCOMMAND(simulate)
RESP_SUBCOMMAND(fit)
RESP_SUBCOMMAND(compose)
RESP_SUBCOMMAND(eofs)
RESP_SUBCOMMAND(predict)
RESP_SUBCOMMAND(validate)

resp_status resp_report(resp_session* session, const char* input_dir) {
  RESP_REQUIRE(session);
  return guarded([&] {
    std::filesystem::create_directories(session->session.out());
    resp::run_report(session->session, input_dir ? std::filesystem::path(input_dir) : std::filesystem::path());
  });
}

resp_status resp_great_circle_km(double lon1, double lat1, double lon2, double lat2, double* out) {
  RESP_REQUIRE(out);
  return guarded([&] { *out = resp::great_circle_km({lon1, lat1}, {lon2, lat2}); });
}

resp_status resp_matern(double distance, double sigma2, double range, double nu, double* out) {
  RESP_REQUIRE(out);
  return guarded([&] { *out = resp::matern(distance, {sigma2, range, nu}); });
}

resp_status resp_kron_apply(const double* A, size_t m, size_t n, const double* B, size_t p, size_t q,
                            const double* C, size_t s, double* out) {
  RESP_REQUIRE(A);
  RESP_REQUIRE(B);
  RESP_REQUIRE(C);
  RESP_REQUIRE(out);
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto I = [](size_t v) { return static_cast<Eigen::Index>(v); };
  return guarded([&] {
    const resp::Matrix a = Eigen::Map<const RowMajor>(A, I(m), I(n));
    const resp::Matrix b = Eigen::Map<const RowMajor>(B, I(p), I(q));
    const resp::Matrix c = Eigen::Map<const RowMajor>(C, I(n * q), I(s));
    Eigen::Map<RowMajor>(out, I(m * p), I(s)) = resp::kron_apply(a, b, c);
  });
}

resp_status resp_heidke(const int* predicted, const int* observed, size_t n, double* out) {
  RESP_REQUIRE(predicted);
  RESP_REQUIRE(observed);
  RESP_REQUIRE(out);
  return guarded([&] {
    *out = resp::heidke(std::vector<int>(predicted, predicted + n), std::vector<int>(observed, observed + n));
  });
}

resp_status resp_rps(const double* probs, const int* observed, size_t n, double* out) {
  RESP_REQUIRE(probs);
  RESP_REQUIRE(observed);
  RESP_REQUIRE(out);
  return guarded([&] {
    resp::CategoricalForecast f;
    f.probs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(probs, static_cast<Eigen::Index>(n), 3);
    *out = resp::rps(f, std::vector<int>(observed, observed + n));
  });
}

resp_status resp_model_open(const resp_session* session, resp_model** out) {
  RESP_REQUIRE(session);
  RESP_REQUIRE(out);
  return guarded([&] {
    auto model = std::make_unique<resp_model>();
    model->input = resp::ingest(session->session.config);
    model->ctx = std::make_unique<resp::ModelContext>(model->input.data, model->input.knots);
    *out = model.release();
  });
}

void resp_model_close(resp_model* model) { delete model; }

resp_status resp_model_dims(const resp_model* model, size_t* n_s, size_t* n_t, size_t* n_r, size_t* k, size_t* p) {
  RESP_REQUIRE(model);
  const resp::Dataset& d = model->input.data;
  if (n_s) *n_s = static_cast<size_t>(d.n_s());
  if (n_t) *n_t = static_cast<size_t>(d.n_t());
  if (n_r) *n_r = static_cast<size_t>(d.n_r());
  if (k) *k = model->input.knots.size();
  if (p) *p = static_cast<size_t>(d.p());
  g_last_error.clear();
  return RESP_OK;
}

resp_status resp_model_loglik(resp_model* model, const resp_state* state, double* out) {
  RESP_REQUIRE(model);
  RESP_REQUIRE(state);
  RESP_REQUIRE(out);
  RESP_REQUIRE(state->beta);
  return guarded([&] {
    resp::ModelState s;
    const auto p = model->input.data.p();
    s.beta = Eigen::Map<const resp::Vector>(state->beta, p);
    s.sigma2_w = state->sigma2_w;
    s.nugget_ratio = state->nugget_ratio;
    s.sigma2_alpha = state->sigma2_alpha;
    s.rho_w = state->rho_w;
    s.rho_alpha = state->rho_alpha;
    s.nu_w = state->nu_w;
    s.nu_alpha = state->nu_alpha;
    s.validate();
    *out = model->ctx->marginal_loglik(s);
  });
}

}  // extern "C"
