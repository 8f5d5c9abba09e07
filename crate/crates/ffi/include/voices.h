#ifndef VOICES_H
#define VOICES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result of every fallible call. The first four values match the CLI exit
// codes.
typedef enum VoicesStatus {
  VOICES_STATUS_OK = 0,
  // Invalid configuration or argument.
  VOICES_STATUS_USAGE = 1,
  // Input data unreadable or inconsistent.
  VOICES_STATUS_DATA = 2,
  // No valid solution (for example fewer than two clusters).
  VOICES_STATUS_DEGENERATE = 3,
  // A required pointer was null.
  VOICES_STATUS_NULL_ARGUMENT = 4,
  // An internal panic was caught at the boundary.
  VOICES_STATUS_PANIC = 5,
} VoicesStatus;

// Cluster labels plus model details.
typedef struct VoicesAssignment VoicesAssignment;

// A joined dataset, optionally with planted ground-truth labels.
typedef struct VoicesDataset VoicesDataset;

// A dense row-major matrix of doubles.
typedef struct VoicesMatrix VoicesMatrix;

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *voices_last_error(void);

// Loads embeddings (CSV, or binary for a `.bin` path) and joins them with an
// annotations JSONL file and a metadata CSV.
//
// # Safety
// Path arguments must be valid NUL-terminated strings; `out` must be a valid
// pointer to write the new handle to.
enum VoicesStatus voices_dataset_load(const char *embeddings_path,
                                      const char *annotations_path,
                                      const char *metadata_path,
                                      bool strict,
                                      struct VoicesDataset **out);

// Generates a built-in synthetic population (`"mbic"` or `"gwsd"`) with
// ground-truth labels.
//
// # Safety
// `profile` must be a valid NUL-terminated string; `out` must be writable.
enum VoicesStatus voices_dataset_fixture(const char *profile,
                                         uint64_t seed,
                                         struct VoicesDataset **out);

// Number of rows, or 0 for a null handle.
//
// # Safety
// `ds` must be null or a live handle.
size_t voices_dataset_rows(const struct VoicesDataset *ds);

// Embedding dimension, or 0 for a null handle.
//
// # Safety
// `ds` must be null or a live handle.
size_t voices_dataset_dim(const struct VoicesDataset *ds);

// Copies the planted group of each row into `out` (`len` must equal the row
// count). Fails with `VOICES_STATUS_DATA` when the dataset has no ground
// truth.
//
// # Safety
// `ds` must be a live handle and `out` must hold `len` integers.
enum VoicesStatus voices_dataset_ground_truth(const struct VoicesDataset *ds,
                                              int32_t *out,
                                              size_t len);

// # Safety
// `ds` must be null or a handle not yet freed.
void voices_dataset_free(struct VoicesDataset *ds);

// Copies a row-major `rows x cols` array into a new matrix.
//
// # Safety
// `data` must point to `rows * cols` doubles; `out` must be writable.
enum VoicesStatus voices_matrix_from_data(const double *data,
                                          size_t rows,
                                          size_t cols,
                                          struct VoicesMatrix **out);

// The dataset's embeddings as a matrix.
//
// # Safety
// `ds` must be a live handle; `out` must be writable.
enum VoicesStatus voices_dataset_embeddings(const struct VoicesDataset *ds,
                                            struct VoicesMatrix **out);

// # Safety
// `m` must be null or a live handle.
size_t voices_matrix_rows(const struct VoicesMatrix *m);

// # Safety
// `m` must be null or a live handle.
size_t voices_matrix_cols(const struct VoicesMatrix *m);

// Copies the matrix row-major into `out`; `len` must equal rows * cols.
//
// # Safety
// `m` must be a live handle and `out` must hold `len` doubles.
enum VoicesStatus voices_matrix_copy(const struct VoicesMatrix *m, double *out, size_t len);

// # Safety
// `m` must be null or a handle not yet freed.
void voices_matrix_free(struct VoicesMatrix *m);

// Reduces the dataset's embeddings. `config_json` uses the keys of the
// `[reduce]` section.
//
// # Safety
// `ds` must be a live handle, `config_json` null or a valid string, `out`
// writable.
enum VoicesStatus voices_reduce(const struct VoicesDataset *ds,
                                const char *config_json,
                                struct VoicesMatrix **out);

// Clusters the rows of `m`. `config_json` uses the keys of the `[cluster]`
// section. A degenerate solution is still returned; check
// [`voices_assignment_is_degenerate`].
//
// # Safety
// `m` must be a live handle, `config_json` null or a valid string, `out`
// writable.
enum VoicesStatus voices_cluster(const struct VoicesMatrix *m,
                                 const char *config_json,
                                 struct VoicesAssignment **out);

// # Safety
// `a` must be null or a live handle.
size_t voices_assignment_len(const struct VoicesAssignment *a);

// Number of non-noise clusters.
//
// # Safety
// `a` must be null or a live handle.
size_t voices_assignment_n_clusters(const struct VoicesAssignment *a);

// # Safety
// `a` must be null or a live handle.
bool voices_assignment_is_degenerate(const struct VoicesAssignment *a);

// Copies the labels (-1 for noise) into `out`; `len` must equal the row
// count.
//
// # Safety
// `a` must be a live handle and `out` must hold `len` integers.
enum VoicesStatus voices_assignment_labels(const struct VoicesAssignment *a,
                                           int32_t *out,
                                           size_t len);

// # Safety
// `a` must be null or a handle not yet freed.
void voices_assignment_free(struct VoicesAssignment *a);

// Validates an assignment and returns the report as a JSON string to be
// released with [`voices_string_free`]. `space` is the matrix the metrics are
// measured in; `options_json` uses the keys of the `[validate]` section. The
// ARI is included when the dataset carries ground truth.
//
// # Safety
// Handles must be live, `options_json` null or a valid string, `out_json`
// writable.
enum VoicesStatus voices_validate_json(const struct VoicesDataset *ds,
                                       const struct VoicesMatrix *space,
                                       const struct VoicesAssignment *a,
                                       const char *options_json,
                                       char **out_json);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void voices_string_free(char *s);

#endif  /* VOICES_H */
