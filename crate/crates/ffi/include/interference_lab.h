/* C interface for the interference-lab engine. */

#ifndef INTERFERENCE_LAB_H
#define INTERFERENCE_LAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Estimands addressable over the ABI.
typedef enum IlEstimand {
  IL_DTE = 0,
  IL_TTE = 1,
  IL_GAMMA1 = 2,
  IL_GAMMA2 = 3,
} IlEstimand;

// Estimators addressable over the ABI.
typedef enum IlEstimator {
  IL_NAIVE = 0,
  IL_DOM = 1,
  IL_HT = 2,
  IL_HAJEK = 3,
  IL_GREG = 4,
  IL_MODEL_DEP = 5,
} IlEstimator;

// Exposure rules addressable over the ABI.
typedef enum IlExposure {
  IL_BINARY = 0,
  IL_SYMMETRIC = 1,
  IL_GENERAL = 2,
} IlExposure;

// Random-graph families exposed over the ABI.
typedef enum IlGraphModel {
  IL_ERDOS_RENYI = 0,
  IL_BARABASI_ALBERT = 1,
  IL_SMALL_WORLD = 2,
} IlGraphModel;

// Stock parameter generators.
typedef enum IlParamSpec {
  IL_UNCORRELATED = 0,
  IL_CORRELATED = 1,
} IlParamSpec;

// Status codes returned by fallible functions.
typedef enum IlStatus {
  IL_OK = 0,
  IL_ERR_NULL_POINTER = -1,
  IL_ERR_INVALID_ARGUMENT = -2,
  IL_ERR_UNSUPPORTED = -3,
  IL_ERR_POSITIVITY = -4,
  IL_ERR_TOO_LARGE = -5,
  IL_ERR_RUNTIME = -6,
} IlStatus;

// Opaque treatment design.
typedef struct IlDesign IlDesign;

// Opaque interference graph.
typedef struct IlGraph IlGraph;

// Opaque propensity table.
typedef struct IlPropensity IlPropensity;

// Opaque potential-outcome table.
typedef struct IlTable IlTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message into `buf` (NUL-terminated, truncated to
// `len`). Returns the full message length in bytes, excluding the NUL.
//
// # Safety
// `buf` must point to at least `len` writable bytes, or be null when
// `len == 0`.
size_t il_last_error(char *buf, size_t len);

// Frees a string returned by this library.
//
// # Safety
// `s` must come from this library and not be freed twice.
void il_string_free(char *s);

// Builds a graph from `edge_count` pairs laid out as `[i0, j0, i1, j1, …]`.
//
// # Safety
// `edges` must point to `2 * edge_count` readable u32 values (or be null
// when `edge_count == 0`); `out` must be a valid pointer.
enum IlStatus il_graph_from_edge_list(size_t n,
                                      const uint32_t *edges,
                                      size_t edge_count,
                                      struct IlGraph **out);

// Draws a graph. Parameter meaning by family: Erdős–Rényi uses `p1` as
// the edge probability; preferential attachment uses `int_param` as the
// minimum degree and `p1` as the attractiveness; the ring model uses
// `int_param` as the per-side neighborhood size and `p1` as the rewiring
// probability.
//
// # Safety
// `out` must be a valid pointer.
enum IlStatus il_graph_generate(enum IlGraphModel model,
                                size_t n,
                                size_t int_param,
                                double p1,
                                uint64_t seed,
                                struct IlGraph **out);

// # Safety
// `g` must be a live graph handle.
size_t il_graph_n(const struct IlGraph *g);

// # Safety
// `g` must be a live graph handle.
size_t il_graph_edge_count(const struct IlGraph *g);

// # Safety
// `g` must be a live graph handle and `unit < n`.
size_t il_graph_degree(const struct IlGraph *g, size_t unit);

// # Safety
// `g` must come from this library and not be freed twice.
void il_graph_free(struct IlGraph *g);

// # Safety
// `out` must be a valid pointer.
enum IlStatus il_design_crd(size_t n, size_t n_t, struct IlDesign **out);

// # Safety
// `out` must be a valid pointer.
enum IlStatus il_design_bernoulli(size_t n, double p, struct IlDesign **out);

// # Safety
// `out` must be a valid pointer.
enum IlStatus il_design_restricted_bernoulli(size_t n, double p, struct IlDesign **out);

// Cluster design over the `n`-entry `partition` array (cluster ids must
// cover `0..K` with no empty cluster), treating `k_t` clusters.
//
// # Safety
// `partition` must point to `n` readable usize values; `out` must be a
// valid pointer.
enum IlStatus il_design_cluster(const size_t *partition,
                                size_t n,
                                size_t k_t,
                                struct IlDesign **out);

// Independent-set design on the given graph; the graph is copied into
// the design, so the handle stays caller-owned.
//
// # Safety
// `g` must be a live graph handle; `out` must be a valid pointer.
enum IlStatus il_design_independent_set(const struct IlGraph *g,
                                        size_t k_t,
                                        double mix_p,
                                        struct IlDesign **out);

// Draws one treatment vector into the caller's buffer; the same seed
// reproduces the same draw.
//
// # Safety
// `d` must be a live design handle; `z_out` must point to `len` writable
// bytes, with `len` equal to the design's unit count.
enum IlStatus il_design_sample(const struct IlDesign *d, uint64_t seed, uint8_t *z_out, size_t len);

// # Safety
// `d` must come from this library and not be freed twice.
void il_design_free(struct IlDesign *d);

// # Safety
// `g` must be a live graph handle; `out` must be a valid pointer.
enum IlStatus il_table_generate(enum IlParamSpec spec,
                                const struct IlGraph *g,
                                uint64_t seed,
                                struct IlTable **out);

// Parses a table from the columnar replay text format.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be a valid pointer.
enum IlStatus il_table_from_text(const char *text, struct IlTable **out);

// True estimand value from the table; the "exposed" level is the one a
// unit reaches when all its neighbors are treated.
//
// # Safety
// `t` must be a live table handle; `out` must be a valid pointer.
enum IlStatus il_table_true_estimand(const struct IlTable *t, enum IlEstimand which, double *out);

// # Safety
// `t` must be a live table handle.
size_t il_table_n(const struct IlTable *t);

// # Safety
// `t` must come from this library and not be freed twice.
void il_table_free(struct IlTable *t);

// Closed-form propensities where published formulas exist.
//
// # Safety
// `d` and `g` must be live handles; `out` must be a valid pointer.
enum IlStatus il_propensity_analytic(const struct IlDesign *d,
                                     const struct IlGraph *g,
                                     enum IlExposure model,
                                     struct IlPropensity **out);

// Exact propensities by support enumeration. Joint probabilities are not
// exposed over the ABI; use the core crate for variance work.
//
// # Safety
// `d` and `g` must be live handles; `out` must be a valid pointer.
enum IlStatus il_propensity_enumerated(const struct IlDesign *d,
                                       const struct IlGraph *g,
                                       enum IlExposure model,
                                       struct IlPropensity **out);

// Monte-Carlo propensity frequencies.
//
// # Safety
// `d` and `g` must be live handles; `out` must be a valid pointer.
enum IlStatus il_propensity_mc(const struct IlDesign *d,
                               const struct IlGraph *g,
                               enum IlExposure model,
                               uint64_t samples,
                               uint64_t seed,
                               struct IlPropensity **out);

// Reads `π_unit(z, e)`; cells outside the support read as 0.
//
// # Safety
// `p` must be a live propensity handle; `out` must be a valid pointer.
enum IlStatus il_propensity_get(const struct IlPropensity *p,
                                size_t unit,
                                uint8_t z,
                                uint32_t e,
                                double *out);

// Renders the table as `unit,z,e,pi,provenance,se` CSV. Free with
// [`il_string_free`].
//
// # Safety
// `p` must be a live propensity handle.
char *il_propensity_csv(const struct IlPropensity *p);

// # Safety
// `p` must come from this library and not be freed twice.
void il_propensity_free(struct IlPropensity *p);

// Exact mean, variance and undefined probability mass of an estimator
// over the design's support, targeting the given estimand's contrast.
//
// # Safety
// All handles must be live; the three `out_*` pointers must be valid.
enum IlStatus il_exact_expectation(const struct IlDesign *d,
                                   const struct IlGraph *g,
                                   enum IlExposure model,
                                   const struct IlTable *t,
                                   enum IlEstimator estimator,
                                   enum IlEstimand estimand,
                                   double *out_mean,
                                   double *out_var,
                                   double *out_undefined_mass);

// Runs a full experiment from a TOML config string and returns the
// result table as CSV (free with [`il_string_free`]); null on error.
//
// # Safety
// `config` must be a NUL-terminated string.
char *il_run_toml(const char *config);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INTERFERENCE_LAB_H */
