#ifndef CURVLAB_H
#define CURVLAB_H

#include <stddef.h>
#include <stdint.h>

// Result codes shared by every entry point.
typedef enum CurvlabStatus {
  CURVLAB_STATUS_OK = 0,
  // A required pointer was null.
  CURVLAB_STATUS_NULL_POINTER = 1,
  // Malformed input: bad JSON, wrong dimensions, invalid entries.
  CURVLAB_STATUS_INVALID_INPUT = 2,
  // Well-formed input violating a precondition (irreducibility, monotonicity, size cap).
  CURVLAB_STATUS_PRECONDITION = 3,
  // A numerical routine failed.
  CURVLAB_STATUS_NUMERICAL = 4,
  // The caller's buffer is too small.
  CURVLAB_STATUS_BUFFER_TOO_SMALL = 5,
  // An internal panic was caught.
  CURVLAB_STATUS_PANIC = 6,
} CurvlabStatus;

// An analyzed chain: a kernel or a generator with its stationary law, metric and generating set.
typedef struct CurvlabChain CurvlabChain;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *curvlab_version(void);

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length excluding the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t curvlab_last_error(char *buf, size_t len);

// Parses and builds a chain from a JSON chain spec.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be a valid pointer.
enum CurvlabStatus curvlab_chain_from_json(const char *json, struct CurvlabChain **out);

// Releases a chain. Null is accepted.
//
// # Safety
// `chain` must come from [`curvlab_chain_from_json`] and not be used afterwards.
void curvlab_chain_free(struct CurvlabChain *chain);

// Number of states; `is_generator` is set to 1 for continuous-time chains.
//
// # Safety
// Pointers must be valid; `is_generator` may be null.
enum CurvlabStatus curvlab_chain_num_states(const struct CurvlabChain *chain,
                                            size_t *out,
                                            int32_t *is_generator);

// Writes the stationary law into `out[0..len]`; `len` must equal the state count.
//
// # Safety
// `out` must point to `len` writable doubles.
enum CurvlabStatus curvlab_chain_stationary(const struct CurvlabChain *chain,
                                            double *out,
                                            size_t len);

// Ollivier curvature of the kernel at time `t` (ignored for discrete chains).
//
// # Safety
// Pointers must be valid.
enum CurvlabStatus curvlab_chain_curvature(const struct CurvlabChain *chain,
                                           double t,
                                           double *kappa);

// Whether the adjoint of the kernel at time `t` has non-negative sectional curvature.
//
// # Safety
// Pointers must be valid.
enum CurvlabStatus curvlab_chain_sectional(const struct CurvlabChain *chain,
                                           double t,
                                           int32_t *holds);

// Estimates the entropy contraction constant of the kernel at time `t`.
// `starts == 0` and `tol <= 0` select the defaults.
//
// # Safety
// Pointers must be valid; `lambda2` may be null.
enum CurvlabStatus curvlab_chain_estimate_alpha(const struct CurvlabChain *chain,
                                                double t,
                                                size_t starts,
                                                double tol,
                                                uint64_t seed,
                                                double *alpha_hat,
                                                double *lambda2);

// `out[k] = H(μ₀ P_{times[k]} | π)` along the chain's semigroup (`e^{t(P−I)}` for kernels).
//
// # Safety
// `mu0` must hold `n` doubles, `times` and `out` `n_times` doubles each.
enum CurvlabStatus curvlab_chain_entropy_curve(const struct CurvlabChain *chain,
                                               const double *mu0,
                                               size_t n,
                                               const double *times,
                                               size_t n_times,
                                               double *out);

// Wasserstein distance between `mu` and `nu` under the row-major `n × n` metric `dist`.
//
// # Safety
// `mu`, `nu` must hold `n` doubles and `dist` `n * n`.
enum CurvlabStatus curvlab_wasserstein(const double *mu,
                                       const double *nu,
                                       const double *dist,
                                       size_t n,
                                       double *out);

// The root of `ε = (1 + e^{2ε/q})^{−1}`.
//
// # Safety
// `out` must be valid.
enum CurvlabStatus curvlab_solve_epsilon_q(uint32_t q, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CURVLAB_H */
