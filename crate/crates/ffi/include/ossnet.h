#ifndef OSSNET_H
#define OSSNET_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Length of a node id buffer, terminator included.
 */
#define OSSNET_NODE_ID_LEN 33

typedef enum OssnetStatus {
  OSSNET_STATUS_OK = 0,
  OSSNET_STATUS_NULL_POINTER = 1,
  OSSNET_STATUS_INVALID_ARGUMENT = 2,
  OSSNET_STATUS_IO = 3,
  OSSNET_STATUS_PARSE = 4,
  OSSNET_STATUS_CONFIG = 5,
  OSSNET_STATUS_EMPTY = 6,
  OSSNET_STATUS_OUT_OF_RANGE = 7,
  OSSNET_STATUS_PANIC = 8,
} OssnetStatus;

typedef enum OssnetEdgeSelection {
  OSSNET_EDGE_SELECTION_UNION = 0,
  OSSNET_EDGE_SELECTION_COLLABORATION = 1,
} OssnetEdgeSelection;

typedef enum OssnetNodeKind {
  OSSNET_NODE_KIND_AUTHOR = 0,
  OSSNET_NODE_KIND_PROJECT = 1,
} OssnetNodeKind;

typedef struct OssnetGraph OssnetGraph;

typedef struct OssnetNodeTable OssnetNodeTable;

typedef struct OssnetSlicePlan OssnetSlicePlan;

typedef struct OssnetSlice {
  size_t index;
  int64_t start;
  int64_t end;
  uint64_t commit_count;
} OssnetSlice;

typedef struct OssnetNetworkMetrics {
  uint64_t author_count;
  uint64_t project_count;
  uint64_t contribution_count;
  uint64_t collaboration_count;
  double contribution_density;
  double collaboration_density;
  uint64_t component_count;
  uint64_t largest_component_size;
  double largest_component_fraction;
} OssnetNetworkMetrics;

typedef struct OssnetMetricOptions {
  /**
   * Betweenness pivots; 0 selects the default for the graph size.
   */
  size_t pivots;
  uint64_t seed;
  enum OssnetEdgeSelection edges;
} OssnetMetricOptions;

typedef struct OssnetNodeRow {
  char node_id[OSSNET_NODE_ID_LEN];
  enum OssnetNodeKind kind;
  uint64_t contribution_degree;
  /**
   * -1 for projects.
   */
  int64_t collaboration_degree;
  double betweenness;
  /**
   * NaN for projects.
   */
  double clustering;
} OssnetNodeRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ossnet_version(void);

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *ossnet_last_error(void);

/**
 * MD5 node id of `name`, written to `out` (at least `OSSNET_NODE_ID_LEN` bytes).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` must be writable for
 * `OSSNET_NODE_ID_LEN` bytes.
 */
enum OssnetStatus ossnet_node_id(const char *name, char *out);

/**
 * Plans slices over `len` non-decreasing timestamps.
 *
 * # Safety
 * `timestamps` must point to `len` values; `out` must be writable.
 */
enum OssnetStatus ossnet_plan_slices(const int64_t *timestamps,
                                     size_t len,
                                     size_t n_target,
                                     int64_t min_span_seconds,
                                     struct OssnetSlicePlan **out);

/**
 * Number of slices, 0 for a null plan.
 *
 * # Safety
 * `plan` must be null or a live plan handle.
 */
size_t ossnet_plan_len(const struct OssnetSlicePlan *plan);

/**
 * Whether fewer slices than requested fit.
 *
 * # Safety
 * `plan` must be null or a live plan handle.
 */
bool ossnet_plan_shortfall(const struct OssnetSlicePlan *plan);

/**
 * # Safety
 * `plan` must be a live plan handle and `out` writable.
 */
enum OssnetStatus ossnet_plan_get(const struct OssnetSlicePlan *plan,
                                  size_t index,
                                  struct OssnetSlice *out);

/**
 * # Safety
 * `plan` must be null or a handle not yet freed.
 */
void ossnet_plan_free(struct OssnetSlicePlan *plan);

/**
 * An empty graph.
 */
struct OssnetGraph *ossnet_graph_new(void);

/**
 * Loads `<stem>.nodes.csv` and `<stem>.edges.csv`.
 *
 * # Safety
 * `stem` must be a NUL-terminated string and `out` writable.
 */
enum OssnetStatus ossnet_graph_load_csv(const char *stem, struct OssnetGraph **out);

/**
 * Writes the graph as `<stem>.nodes.csv` and `<stem>.edges.csv`.
 *
 * # Safety
 * `graph` must be a live handle and `stem` a NUL-terminated string.
 */
enum OssnetStatus ossnet_graph_write_csv(const struct OssnetGraph *graph, const char *stem);

/**
 * Adds an author → project contribution, creating both nodes.
 *
 * # Safety
 * `graph` must be a live handle; names must be NUL-terminated strings.
 */
enum OssnetStatus ossnet_graph_add_contribution(struct OssnetGraph *graph,
                                                const char *author,
                                                const char *project);

/**
 * Adds a collaboration between two distinct authors, creating both nodes.
 *
 * # Safety
 * `graph` must be a live handle; names must be NUL-terminated strings.
 */
enum OssnetStatus ossnet_graph_add_collaboration(struct OssnetGraph *graph,
                                                 const char *author_a,
                                                 const char *author_b);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t ossnet_graph_node_count(const struct OssnetGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle and `out` writable.
 */
enum OssnetStatus ossnet_graph_network_metrics(struct OssnetGraph *graph,
                                               struct OssnetNetworkMetrics *out);

/**
 * Per-node metrics in node id order. `options` may be null for defaults.
 *
 * # Safety
 * `graph` must be a live handle, `options` null or readable, `out` writable.
 */
enum OssnetStatus ossnet_graph_node_metrics(struct OssnetGraph *graph,
                                            const struct OssnetMetricOptions *options,
                                            struct OssnetNodeTable **out);

/**
 * # Safety
 * `table` must be null or a live handle.
 */
size_t ossnet_node_table_len(const struct OssnetNodeTable *table);

/**
 * # Safety
 * `table` must be a live handle and `out` writable.
 */
enum OssnetStatus ossnet_node_table_get(const struct OssnetNodeTable *table,
                                        size_t index,
                                        struct OssnetNodeRow *out);

/**
 * # Safety
 * `table` must be null or a handle not yet freed.
 */
void ossnet_node_table_free(struct OssnetNodeTable *table);

/**
 * # Safety
 * `graph` must be null or a handle not yet freed.
 */
void ossnet_graph_free(struct OssnetGraph *graph);

/**
 * Runs every stage for the languages in a key=value config file. The number
 * of languages that aborted is stored in `aborted` when it is non-null.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `aborted` null or writable.
 */
enum OssnetStatus ossnet_run_pipeline(const char *config_path, size_t *aborted);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OSSNET_H */
