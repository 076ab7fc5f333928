#ifndef AL_REGRESS_H
#define AL_REGRESS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AlStatus {
  AL_STATUS_OK = 0,
  AL_STATUS_NULL_POINTER = 1,
  AL_STATUS_INVALID_INPUT = 2,
  AL_STATUS_IO = 3,
  AL_STATUS_PARSE = 4,
  AL_STATUS_DIMENSION_MISMATCH = 5,
  AL_STATUS_NOT_UNLABELED = 6,
  AL_STATUS_EMPTY_POOL = 7,
  AL_STATUS_ENUMERATION_LIMIT = 8,
  AL_STATUS_PANIC = 9,
} AlStatus;

// Uncertainty graph between a labeled set and an unlabeled pool.
typedef struct AlGraph AlGraph;

// Fitted linear model `y = w·x + b`.
typedef struct AlModel AlModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (truncated,
// always NUL-terminated when `len > 0`). Returns the full message length
// without the terminator, or 0 if the last call succeeded.
//
// # Safety
// `buf` must be NULL or point to `len` writable bytes.
size_t al_last_error_message(char *buf, size_t len);

// Builds the graph over `features` (`rows x cols`) with the given labeled
// and unlabeled row indices.
//
// # Safety
// Pointers must reference arrays of the stated lengths; `out` must be writable.
enum AlStatus al_graph_build(const double *features,
                             size_t rows,
                             size_t cols,
                             const size_t *labeled,
                             size_t n_labeled,
                             const size_t *unlabeled,
                             size_t n_unlabeled,
                             struct AlGraph **out_graph);

// # Safety
// `g` must be NULL or a handle from this library that is not used afterwards.
void al_graph_free(struct AlGraph *g);

// Number of unlabeled points; 0 for a NULL handle.
//
// # Safety
// `g` must be NULL or a live graph handle.
size_t al_graph_pool_size(const struct AlGraph *g);

// Copies the sorted unlabeled indices into `out_indices` (capacity `len`).
//
// # Safety
// `g` must be a live handle; `out_indices` must hold `len` values.
enum AlStatus al_graph_unlabeled(const struct AlGraph *g, size_t *out_indices, size_t len);

// Sum of all edge weights.
//
// # Safety
// `g` must be a live handle; `out_value` must be writable.
enum AlStatus al_graph_total_uncertainty(const struct AlGraph *g, double *out_value);

// Distance from unlabeled point `u` to its nearest labeled point.
//
// # Safety
// `g` must be a live handle; outputs must be writable.
enum AlStatus al_graph_theta(const struct AlGraph *g,
                             size_t u,
                             size_t *out_nearest,
                             double *out_theta);

// Uncertainty reduction from labeling `u` alone.
//
// # Safety
// `g` must be a live handle; `out_value` must be writable.
enum AlStatus al_graph_q_single(const struct AlGraph *g, size_t u, double *out_value);

// Uncertainty reduction from labeling the whole set at once.
//
// # Safety
// `g` must be a live handle; `set` must hold `len` indices.
enum AlStatus al_graph_q_set(const struct AlGraph *g,
                             const size_t *set,
                             size_t len,
                             double *out_value);

// Best single query; ties go to the smallest index.
//
// # Safety
// `g` must be a live handle; outputs must be writable.
enum AlStatus al_graph_select_sequential(const struct AlGraph *g,
                                         size_t *out_index,
                                         double *out_score);

// Batch of `k` queries by single-swap local search from the greedy seed set.
// Writes `k` indices in ascending order.
//
// # Safety
// `g` must be a live handle; `out_indices` must hold `k` values.
enum AlStatus al_graph_select_batch(const struct AlGraph *g,
                                    size_t k,
                                    size_t *out_indices,
                                    double *out_score);

// New graph with `set` moved from the pool to the labeled side; `g` is unchanged.
//
// # Safety
// `g` must be a live handle; `set` must hold `len` indices; `out_graph` writable.
enum AlStatus al_graph_commit(const struct AlGraph *g,
                              const size_t *set,
                              size_t len,
                              struct AlGraph **out_graph);

// Least squares (`alpha = 0`, minimum norm) or ridge fit with an
// unpenalized intercept.
//
// # Safety
// `x` must hold `rows * cols` values, `y` `rows` values; `out_model` writable.
enum AlStatus al_model_fit(const double *x,
                           size_t rows,
                           size_t cols,
                           const double *y,
                           double alpha,
                           struct AlModel **out_model);

// # Safety
// `m` must be NULL or a handle from this library that is not used afterwards.
void al_model_free(struct AlModel *m);

// Number of weights; 0 for a NULL handle.
//
// # Safety
// `m` must be NULL or a live model handle.
size_t al_model_dim(const struct AlModel *m);

// # Safety
// `m` must be a live handle; `out_weights` must hold `al_model_dim(m)` values.
enum AlStatus al_model_coefficients(const struct AlModel *m, double *out_weights, double *out_bias);

// # Safety
// `x` must hold `rows * cols` values and `out_pred` `rows` values.
enum AlStatus al_model_predict(const struct AlModel *m,
                               const double *x,
                               size_t rows,
                               size_t cols,
                               double *out_pred);

// # Safety
// `pred` and `truth` must hold `len` values; `out_value` writable.
enum AlStatus al_rmse(const double *pred, const double *truth, size_t len, double *out_value);

// Runs the default benchmark (all strategies, 10 rounds of 2 %, exact
// labels, linear regression) on one manifest dataset and writes the CSV
// reports into `out_dir`.
//
// # Safety
// String arguments must be NUL-terminated UTF-8.
enum AlStatus al_run_experiment(const char *manifest_path,
                                const char *dataset,
                                size_t trials,
                                uint64_t seed,
                                const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AL_REGRESS_H */
