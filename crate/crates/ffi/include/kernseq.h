/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef KERNSEQ_H
#define KERNSEQ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KsStatus {
  KS_STATUS_OK = 0,
  KS_STATUS_NULL_POINTER = 1,
  KS_STATUS_INVALID_ARGUMENT = 2,
  KS_STATUS_INPUT = 3,
  KS_STATUS_NUMERIC = 4,
  KS_STATUS_IO = 5,
  KS_STATUS_PANIC = 6,
} KsStatus;

typedef enum KsKernelKind {
  KS_KERNEL_KIND_COSINE = 0,
  KS_KERNEL_KIND_LINEAR = 1,
  KS_KERNEL_KIND_POLYNOMIAL = 2,
  KS_KERNEL_KIND_GAUSSIAN = 3,
  KS_KERNEL_KIND_ISOLATION = 4,
  KS_KERNEL_KIND_LAPLACIAN = 5,
  KS_KERNEL_KIND_SIGMOID = 6,
  KS_KERNEL_KIND_CHI2 = 7,
  KS_KERNEL_KIND_ADDITIVE_CHI2 = 8,
} KsKernelKind;

typedef struct KsEmbedding KsEmbedding;

typedef struct KsKernelMatrix KsKernelMatrix;

typedef struct KsTsneResult KsTsneResult;

// Kernel parameters. `sigma` and `gamma` at or below zero mean "pick the
// data-dependent default".
typedef struct KsKernelParams {
  enum KsKernelKind kind;
  double c;
  double r;
  uint32_t degree;
  double sigma;
  double gamma;
  double c0;
  size_t psi;
  size_t t_trees;
  uint64_t seed;
} KsKernelParams;

typedef struct KsTsneConfig {
  size_t dim;
  double perplexity;
  size_t max_iter;
  double eta;
  double alpha_initial;
  double alpha_late;
  size_t alpha_switch_iter;
  uint64_t seed;
  double init_scale;
  double exaggeration;
} KsTsneConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The
// pointer stays valid until the next failing call on the same thread.
const char *ks_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ks_version(void);

// Reads a FASTA file and embeds it. `method` is one of `kmer`,
// `minimizer`, `spaced` or `ohe`; `alphabet` may be null for DNA. Zero
// for `k`, `m` or `g` selects the method default.
enum KsStatus ks_embedding_from_fasta(const char *path,
                                      const char *alphabet,
                                      const char *method,
                                      size_t k,
                                      size_t m,
                                      size_t g,
                                      struct KsEmbedding **out);

// Wraps a row-major `n × d` buffer as an embedding with ids `r0, r1, …`.
enum KsStatus ks_embedding_from_rows(const double *data,
                                     size_t n,
                                     size_t d,
                                     struct KsEmbedding **out);

void ks_embedding_free(struct KsEmbedding *e);

// Row count, or 0 for a null handle.
size_t ks_embedding_rows(const struct KsEmbedding *e);

// Feature count, or 0 for a null handle.
size_t ks_embedding_dim(const struct KsEmbedding *e);

// Copies the row-major values into `buf`, which must hold `rows * dim`.
enum KsStatus ks_embedding_copy_data(const struct KsEmbedding *e, double *buf, size_t len);

struct KsKernelParams ks_kernel_params_default(enum KsKernelKind kind);

enum KsStatus ks_kernel_matrix(const struct KsEmbedding *e,
                               const struct KsKernelParams *params,
                               struct KsKernelMatrix **out);

// Side length `n`, or 0 for a null handle.
size_t ks_kernel_n(const struct KsKernelMatrix *k);

// Copies the `n × n` row-major values into `buf`.
enum KsStatus ks_kernel_copy_values(const struct KsKernelMatrix *k, double *buf, size_t len);

// Writes the matrix, binary for `.kskm`/`.bin` and CSV otherwise.
enum KsStatus ks_kernel_write(const struct KsKernelMatrix *k, const char *path);

void ks_kernel_free(struct KsKernelMatrix *k);

struct KsTsneConfig ks_tsne_config_default(void);

// Embeds the kernel matrix in `config.dim` dimensions. Perplexity is
// clamped to `(n − 1) / 3`.
enum KsStatus ks_tsne_run(const struct KsKernelMatrix *k,
                          const struct KsTsneConfig *config,
                          struct KsTsneResult **out);

size_t ks_tsne_result_rows(const struct KsTsneResult *r);

size_t ks_tsne_result_dim(const struct KsTsneResult *r);

// Copies the row-major coordinates into `buf`.
enum KsStatus ks_tsne_result_copy_coords(const struct KsTsneResult *r, double *buf, size_t len);

// KL divergence after the last iteration, NaN for a null handle.
double ks_tsne_result_final_kl(const struct KsTsneResult *r);

void ks_tsne_result_free(struct KsTsneResult *r);

// AUC of the rescaled neighborhood-preservation curve between row-major
// `n × d_hd` and `n × d_ld` point sets, written to `out`.
enum KsStatus ks_auc_rnx(const double *hd,
                         size_t d_hd,
                         const double *ld,
                         size_t d_ld,
                         size_t n,
                         size_t k_max,
                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KERNSEQ_H */
