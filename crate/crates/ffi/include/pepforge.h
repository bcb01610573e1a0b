#ifndef PEPFORGE_H
#define PEPFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PfStatus {
  PF_STATUS_OK = 0,
  PF_STATUS_NULL_POINTER = 1,
  PF_STATUS_INVALID_ARGUMENT = 2,
  PF_STATUS_CONFIG = 3,
  PF_STATUS_DATA = 4,
  PF_STATUS_DIVERGENCE = 5,
  PF_STATUS_IO = 6,
  PF_STATUS_FORMAT = 7,
  PF_STATUS_BUFFER_TOO_SMALL = 8,
  PF_STATUS_PANIC = 9,
} PfStatus;

typedef enum PfModelKind {
  PF_MODEL_KIND_STRUCTURE = 0,
  PF_MODEL_KIND_SEQUENCE = 1,
} PfModelKind;

/**
 * Prepared complex example (peptide, pocket and site).
 */
typedef struct PfExample PfExample;

/**
 * Trained denoiser loaded from a checkpoint.
 */
typedef struct PfModel PfModel;

/**
 * Parsed PDB file.
 */
typedef struct PfStructure PfStructure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pf_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `cap > 0`). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t pf_last_error_message(char *buf, size_t cap);

/**
 * Wraps an angle into [-pi, pi).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PfStatus pf_wrap_angle(double x, double *out);

/**
 * Reads a PDB file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum PfStatus pf_structure_read(const char *path, struct PfStructure **out);

/**
 * # Safety
 * `s` must be null or a handle from `pf_structure_read` not yet freed.
 */
void pf_structure_free(struct PfStructure *s);

/**
 * Interior angle rows (8 doubles each) of one chain. `rows_written`
 * receives the row count even when the buffer is too small.
 *
 * # Safety
 * `s` must be a live handle; `out` must hold `cap_rows * 8` doubles.
 */
enum PfStatus pf_structure_chain_angles(const struct PfStructure *s,
                                        char chain,
                                        double *out,
                                        size_t cap_rows,
                                        size_t *rows_written);

/**
 * Loads a prepared example JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum PfStatus pf_example_load(const char *path, struct PfExample **out);

/**
 * # Safety
 * `e` must be null or a handle from `pf_example_load` not yet freed.
 */
void pf_example_free(struct PfExample *e);

/**
 * Number of peptide angle rows (residues minus two).
 *
 * # Safety
 * `e` must be a live handle; `out` a valid pointer.
 */
enum PfStatus pf_example_peptide_rows(const struct PfExample *e, size_t *out);

/**
 * Loads a training checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum PfStatus pf_model_load(const char *path, struct PfModel **out);

/**
 * # Safety
 * `m` must be null or a handle from `pf_model_load` not yet freed.
 */
void pf_model_free(struct PfModel *m);

/**
 * # Safety
 * `m` must be a live handle; `out` a valid pointer.
 */
enum PfStatus pf_model_kind(const struct PfModel *m, enum PfModelKind *out);

/**
 * Samples `rows` angle rows for the example's pocket into `out`
 * (`rows * 8` doubles).
 *
 * # Safety
 * Handles must be live; `out` must hold `rows * 8` doubles.
 */
enum PfStatus pf_sample_structure(const struct PfModel *m,
                                  const struct PfExample *e,
                                  size_t rows,
                                  uint64_t seed,
                                  double *out);

/**
 * Samples a sequence for `rows` angle rows (`rows * 8` doubles). Writes
 * `rows` one-letter codes plus a NUL into `out` (`cap >= rows + 1`).
 *
 * # Safety
 * Handles must be live; `angles` must hold `rows * 8` doubles and `out`
 * `cap` bytes.
 */
enum PfStatus pf_sample_sequence(const struct PfModel *m,
                                 const struct PfExample *e,
                                 const double *angles,
                                 size_t rows,
                                 uint64_t seed,
                                 char *out,
                                 size_t cap);

/**
 * Backbone RMSD after superposition. Arrays hold `residues * 12` doubles
 * (N, CA, C, O per residue).
 *
 * # Safety
 * `a` and `b` must hold `residues * 12` doubles; `out` a valid pointer.
 */
enum PfStatus pf_kabsch_rmsd(const double *a, const double *b, size_t residues, double *out);

/**
 * TM-score over index-paired CA atoms; same layout as `pf_kabsch_rmsd`.
 *
 * # Safety
 * As for `pf_kabsch_rmsd`.
 */
enum PfStatus pf_tm_score(const double *a, const double *b, size_t residues, double *out);

/**
 * Global alignment score (BLOSUM62, linear gap 4) of two one-letter
 * sequences.
 *
 * # Safety
 * `s1`, `s2` must be NUL-terminated strings; `out` a valid pointer.
 */
enum PfStatus pf_nw_score(const char *s1, const char *s2, int64_t *out);

/**
 * Alignment score normalized by the reference's self-score.
 *
 * # Safety
 * As for `pf_nw_score`.
 */
enum PfStatus pf_seq_similarity(const char *pred, const char *truth, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEPFORGE_H */
