#ifndef EVACSIM_H
#define EVACSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum EvacsimStatus {
  EVACSIM_STATUS_OK = 0,
  EVACSIM_STATUS_NULL_POINTER = 1,
  EVACSIM_STATUS_INVALID_ARGUMENT = 2,
  EVACSIM_STATUS_CONFIG = 3,
  EVACSIM_STATUS_GRAPH = 4,
  EVACSIM_STATUS_IO = 5,
  EVACSIM_STATUS_TIME_CAP = 6,
  EVACSIM_STATUS_OUT_OF_RANGE = 7,
  EVACSIM_STATUS_PANIC = 8,
} EvacsimStatus;

/**
 * Loaded navigation graph.
 */
typedef struct EvacsimGraph EvacsimGraph;

/**
 * Paired ideal and perturbed run.
 */
typedef struct EvacsimResults EvacsimResults;

/**
 * Scenario parameters. Obtain defaults with `evacsim_scenario_default`.
 */
typedef struct EvacsimScenario {
  double t_s;
  double t_a;
  double t_el;
  double refresh_interval;
  double pod;
  uint32_t sod;
  double poe;
  double persistence;
  /**
   * Non-zero freezes the traversal-time field.
   */
  uint8_t static_field;
  /**
   * Non-zero draws the stale-table flag once per node instead of per decision.
   */
  uint8_t delay_per_node;
  uint64_t master_seed;
} EvacsimScenario;

/**
 * Outcome of one evacuee in a paired run.
 */
typedef struct EvacsimOutcome {
  size_t start;
  double ideal_arrival;
  double actual_arrival;
  uint8_t deadline_violated;
} EvacsimOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default scenario: 1800 s deadline, 5 s refresh, no delay, no errors.
 */
struct EvacsimScenario evacsim_scenario_default(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *evacsim_last_error(void);

/**
 * Reads and validates a graph file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EvacsimStatus evacsim_graph_load(const char *path, struct EvacsimGraph **out);

/**
 * Generates a synthetic multi-deck graph.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum EvacsimStatus evacsim_graph_generate(uint32_t decks,
                                          size_t nodes,
                                          size_t passages,
                                          size_t stairs,
                                          uint64_t seed,
                                          struct EvacsimGraph **out);

/**
 * # Safety
 * `graph` must come from this library and not be used afterwards.
 */
void evacsim_graph_free(struct EvacsimGraph *graph);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t evacsim_graph_node_count(const struct EvacsimGraph *graph);

/**
 * Number of edges, or 0 for a null handle.
 *
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t evacsim_graph_edge_count(const struct EvacsimGraph *graph);

/**
 * Exit node id.
 *
 * # Safety
 * `graph` must be a live handle and `out` a valid pointer.
 */
enum EvacsimStatus evacsim_graph_exit(const struct EvacsimGraph *graph, size_t *out);

/**
 * Runs the ideal and perturbed simulations of run `run_index` for the given
 * start nodes. With `starts` null, every non-exit node starts.
 *
 * # Safety
 * `graph` and `scenario` must be valid; `starts` must point to `n_starts`
 * ids or be null; `out` must be a valid pointer.
 */
enum EvacsimStatus evacsim_run_paired(const struct EvacsimGraph *graph,
                                      const struct EvacsimScenario *scenario,
                                      const size_t *starts,
                                      size_t n_starts,
                                      uint64_t run_index,
                                      struct EvacsimResults **out);

/**
 * # Safety
 * `results` must come from this library and not be used afterwards.
 */
void evacsim_results_free(struct EvacsimResults *results);

/**
 * Number of evacuees, or 0 for a null handle.
 *
 * # Safety
 * `results` must be null or a live handle.
 */
size_t evacsim_results_len(const struct EvacsimResults *results);

/**
 * Outcome of evacuee `index`.
 *
 * # Safety
 * `results` must be a live handle and `out` a valid pointer.
 */
enum EvacsimStatus evacsim_results_get(const struct EvacsimResults *results,
                                       size_t index,
                                       struct EvacsimOutcome *out);

/**
 * Relative difference of the summed arrival times, perturbed against ideal.
 *
 * # Safety
 * `results` must be a live handle and `out` a valid pointer.
 */
enum EvacsimStatus evacsim_results_delta_avg(const struct EvacsimResults *results, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EVACSIM_H */
