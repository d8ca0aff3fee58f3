#ifndef PERCLAB_H
#define PERCLAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stdint.h>
#include <stddef.h>

#define PERCLAB_OK 0

#define PERCLAB_ERR_NULL -1

#define PERCLAB_ERR_CONFIG -2

#define PERCLAB_ERR_PARAMETER -3

#define PERCLAB_ERR_DOMAIN -4

#define PERCLAB_ERR_FIT -5

#define PERCLAB_ERR_FORMAT -6

#define PERCLAB_ERR_IO -7

#define PERCLAB_ERR_UTF8 -8

#define PERCLAB_ERR_KIND -9

#define PERCLAB_ERR_PANIC -10

// Open clusters of one configuration.
typedef struct PerclabClusters PerclabClusters;

// A sampled configuration (site percolation or FK-Ising).
typedef struct PerclabConfig PerclabConfig;

// Result of checking the box approximation on one configuration.
typedef struct PerclabVerdict {
  // Whether E(ε, δ) holds.
  bool e;
  // 1 passed, 0 failed, -1 skipped because E fails.
  int32_t outcome;
  uint64_t good_count;
  uint64_t cluster_count;
} PerclabVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static version string.
const char *perclab_version(void);

// Copies the last error message of this thread into `buf` (NUL terminated, truncated to
// `len`). Returns the full message length, or 0 when there is none.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t perclab_last_error(char *buf, size_t len);

// Critical site percolation on the triangular lattice over Λ_k at mesh `eta`. A negative
// `p` selects the critical value 1/2.
//
// # Safety
// `out` must be a valid pointer; the handle is released with `perclab_config_free`.
int32_t perclab_sample_site(double eta,
                            double k,
                            double p,
                            uint64_t seed,
                            uint64_t sample_index,
                            struct PerclabConfig **out);

// FK-Ising on the square lattice after `sweeps` Swendsen–Wang sweeps. A negative `p`
// selects the self-dual point.
//
// # Safety
// As `perclab_sample_site`.
int32_t perclab_sample_fk(double eta,
                          double k,
                          double p,
                          uint64_t seed,
                          uint64_t sample_index,
                          uint64_t sweeps,
                          struct PerclabConfig **out);

// Reads a configuration from the binary sample format.
//
// # Safety
// `bytes` must point to `len` readable bytes.
int32_t perclab_config_decode(const uint8_t *bytes, size_t len, struct PerclabConfig **out);

// Releases a configuration. Null is ignored.
//
// # Safety
// `cfg` must come from this library and not be used afterwards.
void perclab_config_free(struct PerclabConfig *cfg);

// Number of lattice vertices in the region.
//
// # Safety
// Pointers must be valid.
int32_t perclab_config_vertex_count(const struct PerclabConfig *cfg, uint64_t *out);

// Labels the open clusters of `cfg`.
//
// # Safety
// Pointers must be valid; release the result with `perclab_clusters_free`.
int32_t perclab_clusters_find(const struct PerclabConfig *cfg, struct PerclabClusters **out);

// # Safety
// `cs` must come from `perclab_clusters_find` and not be used afterwards.
void perclab_clusters_free(struct PerclabClusters *cs);

// # Safety
// Pointers must be valid.
int32_t perclab_clusters_count(const struct PerclabClusters *cs, uint64_t *out);

// Vertex count and L∞ diameter of cluster `index`.
//
// # Safety
// Pointers must be valid.
int32_t perclab_cluster_info(const struct PerclabClusters *cs,
                             uint64_t index,
                             uint64_t *size,
                             double *diameter);

// Arm event around (cx, cy) between radii a < b. `kappa` and `kappa_hp` are strings of
// 0/1 colours (1 = red); `side` is 1..4 for a half-plane sequence, 0 for none.
//
// # Safety
// Pointers must be valid; the strings NUL terminated.
int32_t perclab_arm_event(const struct PerclabConfig *cfg,
                          double cx,
                          double cy,
                          double a,
                          double b,
                          const char *kappa,
                          uint8_t side,
                          const char *kappa_hp,
                          bool *out);

// Checks the ε-box approximation against the clusters of `cfg` at scales (ε, δ).
//
// # Safety
// Pointers must be valid.
int32_t perclab_verify_correspondence(const struct PerclabConfig *cfg,
                                      double eps,
                                      double delta,
                                      struct PerclabVerdict *out);

// Φ^η(1_L) with L∞ half-width `l`, for an FK-Ising configuration.
//
// # Safety
// Pointers must be valid.
int32_t perclab_magnetization(const struct PerclabConfig *cfg, double l, double *out);

// Φ^η_ε(1_L): the signed sum over FK clusters of diameter at least ε.
//
// # Safety
// Pointers must be valid.
int32_t perclab_cutoff_magnetization(const struct PerclabConfig *cfg,
                                     double l,
                                     double eps,
                                     double *out);

// Two-sample Kolmogorov–Smirnov statistic.
//
// # Safety
// `x` and `y` must point to `nx` and `ny` doubles.
int32_t perclab_ks_distance(const double *x, size_t nx, const double *y, size_t ny, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERCLAB_H */
