#ifndef GRIDSEG_H
#define GRIDSEG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum GsStatus {
  GS_STATUS_OK = 0,
  GS_STATUS_NULL_POINTER = 1,
  GS_STATUS_INVALID_ARGUMENT = 2,
  GS_STATUS_OUT_OF_BOUNDS = 3,
  GS_STATUS_INFERENCE_REFUSED = 4,
  GS_STATUS_IO = 5,
  GS_STATUS_PANIC = 6,
} GsStatus;

/**
 * Dense `tw x th x p` grid.
 */
typedef struct GsGrid GsGrid;

/**
 * Result of a quarterly segmentation.
 */
typedef struct GsTree GsTree;

typedef struct GsChangePoint {
  size_t tau_w;
  size_t tau_h;
} GsChangePoint;

typedef struct GsInterval {
  double lo;
  double hi;
  double margin;
} GsInterval;

typedef struct GsInference {
  struct GsChangePoint tau;
  struct GsInterval vanishing_w;
  struct GsInterval vanishing_h;
  struct GsInterval nonvanishing_w;
  struct GsInterval nonvanishing_h;
  double xi_w2;
  double xi_h2;
  double sigma2_w;
  double sigma2_h;
} GsInference;

typedef struct GsTreeCounts {
  size_t change_points;
  size_t partitions;
  size_t depth;
} GsTreeCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *gs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gs_version(void);

/**
 * Copies `len = tw * th * p` values into a new grid. Values are ordered by
 * `w`, then `h`, then component (cell `(w, h)` starts at
 * `((w - 1) * th + (h - 1)) * p`).
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
enum GsStatus gs_grid_new(size_t tw,
                          size_t th,
                          size_t p,
                          const double *values,
                          size_t len,
                          struct GsGrid **out);

/**
 * Reads a grid CSV with header `w,h,x1,...,xp`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum GsStatus gs_grid_read_csv(const char *path, struct GsGrid **out);

/**
 * # Safety
 * `grid` must be null or a handle from this library not yet freed.
 */
void gs_grid_free(struct GsGrid *grid);

/**
 * # Safety
 * `grid` must be a live handle; the out pointers may be null.
 */
enum GsStatus gs_grid_dims(const struct GsGrid *grid, size_t *tw, size_t *th, size_t *p);

/**
 * Copies all values (same layout as [`gs_grid_new`]) into `buf`, which
 * must hold exactly `tw * th * p` doubles.
 *
 * # Safety
 * `grid` must be a live handle and `buf` writable for `len` doubles.
 */
enum GsStatus gs_grid_values(const struct GsGrid *grid, double *buf, size_t len);

/**
 * Single change point from the coarse 3x3 start. `algorithm` is 1
 * (two-step) or 2 (with boundary selection, tuned by `c_bic`).
 *
 * # Safety
 * `grid` must be a live handle and `out` writable.
 */
enum GsStatus gs_estimate(const struct GsGrid *grid,
                          uint32_t algorithm,
                          double c_bic,
                          struct GsChangePoint *out);

/**
 * Two-step estimate plus confidence intervals for both jump regimes.
 * Returns `GS_STATUS_INFERENCE_REFUSED` when the estimate lies on the
 * boundary or a directional jump is zero.
 *
 * # Safety
 * `grid` must be a live handle and `out` writable.
 */
enum GsStatus gs_infer(const struct GsGrid *grid,
                       double alpha,
                       size_t n_draws,
                       uint64_t seed,
                       struct GsInference *out);

/**
 * `q` with `P(|Z| <= q) = 1 - alpha` for the Brownian argmax limit.
 *
 * # Safety
 * `out` must be writable.
 */
enum GsStatus gs_yao_quantile(double alpha, double *out);

/**
 * Quarterly segmentation with the default threshold grid.
 *
 * # Safety
 * `grid` must be a live handle and `out` writable.
 */
enum GsStatus gs_segment(const struct GsGrid *grid,
                         double c_bic,
                         size_t min_cells,
                         size_t max_level,
                         struct GsTree **out);

/**
 * # Safety
 * `tree` must be null or a handle from this library not yet freed.
 */
void gs_tree_free(struct GsTree *tree);

/**
 * # Safety
 * `tree` must be a live handle and `out` writable.
 */
enum GsStatus gs_tree_counts(const struct GsTree *tree, struct GsTreeCounts *out);

/**
 * Tree as a JSON document; release it with [`gs_string_free`].
 *
 * # Safety
 * `tree` must be a live handle and `out` writable.
 */
enum GsStatus gs_tree_json(const struct GsTree *tree, char **out);

/**
 * Piecewise-constant reconstruction of `grid` over the leaves of `tree`.
 *
 * # Safety
 * `tree` and `grid` must be live handles and `out` writable.
 */
enum GsStatus gs_tree_reconstruct(const struct GsTree *tree,
                                  const struct GsGrid *grid,
                                  struct GsGrid **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void gs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDSEG_H */
