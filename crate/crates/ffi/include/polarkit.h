#ifndef POLARKIT_H
#define POLARKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PkCertificate {
  PK_CERTIFICATE_EQUIDISTANT = 0,
  PK_CERTIFICATE_ALMOST_EQUIDISTANT = 1,
  PK_CERTIFICATE_BEST_FOUND = 2,
} PkCertificate;

typedef enum PkRole {
  PK_ROLE_GOOD = 0,
  PK_ROLE_BAD = 1,
} PkRole;

typedef enum PkStatus {
  PK_STATUS_OK = 0,
  PK_STATUS_NULL_POINTER = 1,
  PK_STATUS_DOMAIN = 2,
  PK_STATUS_ALPHABET_MISMATCH = 3,
  PK_STATUS_SEARCH_TOO_LARGE = 4,
  PK_STATUS_BUFFER_TOO_SMALL = 5,
  PK_STATUS_UTF8 = 6,
  PK_STATUS_PANIC = 7,
} PkStatus;

/*
 Opaque 2x2 kernel.
 */
typedef struct PkKernel PkKernel;

/*
 Opaque signal set.
 */
typedef struct PkSignalSet PkSignalSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or NULL. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *pk_last_error(void);

/*
 Loads a preset (`psk:<q>`, `quad-eq`, `pam3-eq`).

 # Safety
 `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PkStatus pk_signal_set_preset(const char *name, struct PkSignalSet **out);

/*
 Builds a set from `q * dimension` coordinates, point by point.

 # Safety
 `coords` must hold `q * dimension` doubles and `out` must be valid.
 */
enum PkStatus pk_signal_set_from_points(size_t q,
                                        size_t dimension,
                                        const double *coords,
                                        struct PkSignalSet **out);

/*
 Alphabet size, or 0 for NULL.

 # Safety
 `set` must be NULL or a live handle.
 */
size_t pk_signal_set_q(const struct PkSignalSet *set);

/*
 Average energy, or NaN for NULL.

 # Safety
 `set` must be NULL or a live handle.
 */
double pk_signal_set_es(const struct PkSignalSet *set);

/*
 # Safety
 `set` must be NULL or a handle not yet freed.
 */
void pk_signal_set_free(struct PkSignalSet *set);

/*
 `f(u1, u2) = u1 + u2 mod q`.

 # Safety
 `out` must be a valid pointer.
 */
enum PkStatus pk_kernel_standard(size_t q, struct PkKernel **out);

/*
 `f(u1, u2) = u1 + image[u2] mod q`.

 # Safety
 `image` must hold `q` entries and `out` must be valid.
 */
enum PkStatus pk_kernel_permutation(const size_t *image, size_t q, struct PkKernel **out);

/*
 `f(u1, u2) = u1 + gamma * u2 mod q`, `q` prime.

 # Safety
 `out` must be a valid pointer.
 */
enum PkStatus pk_kernel_reed_solomon(size_t q, size_t gamma, struct PkKernel **out);

/*
 Kernel from a row-major `q * q` Latin square, `table[u1 * q + u2]`.

 # Safety
 `table` must hold `q * q` entries and `out` must be valid.
 */
enum PkStatus pk_kernel_from_table(const size_t *table, size_t q, struct PkKernel **out);

/*
 Writes `f(u1, u2)` to `out`.

 # Safety
 `kernel` must be a live handle and `out` valid.
 */
enum PkStatus pk_kernel_apply(const struct PkKernel *kernel, size_t u1, size_t u2, size_t *out);

/*
 Alphabet size, or 0 for NULL.

 # Safety
 `kernel` must be NULL or a live handle.
 */
size_t pk_kernel_q(const struct PkKernel *kernel);

/*
 # Safety
 `kernel` must be NULL or a handle not yet freed.
 */
void pk_kernel_free(struct PkKernel *kernel);

/*
 Distance spectrum at reference `(u1, u2)`. Writes the number of lines to
 `lines` and, when `capacity` suffices, the normalized distances and
 multiplicities in increasing distance order.

 # Safety
 Handles must be live; the output arrays must hold `capacity` entries.
 */
enum PkStatus pk_spectrum(const struct PkSignalSet *set,
                          const struct PkKernel *kernel,
                          enum PkRole role_,
                          size_t u1,
                          size_t u2,
                          double *d_over_sqrt_es,
                          size_t *counts,
                          size_t capacity,
                          size_t *lines);

/*
 Union bound of the worst-reference spectrum at `snr_db`.

 # Safety
 Handles must be live and `out` valid.
 */
enum PkStatus pk_union_bound(const struct PkSignalSet *set,
                             const struct PkKernel *kernel,
                             enum PkRole role_,
                             double snr_db,
                             double *out);

/*
 Gaussian tail probability `Q(x)`.
 */
double pk_q_function(double x);

/*
 Exhaustive search over `u1 + π(u2)` kernels for `set` (q <= 10).
 Writes the best `π` (q entries), its worst-reference `d_min / sqrt(Es)`
 and multiplicity, and the certificate.

 # Safety
 `set` must be live; `best_pi` must hold `q` entries; other outputs valid.
 */
enum PkStatus pk_search(const struct PkSignalSet *set,
                        size_t *best_pi,
                        double *d_min,
                        size_t *n_min,
                        enum PkCertificate *certificate);

/*
 One-step SER campaign. For each of the `points` SNR values writes the
 error count to `errors`. `threads = 0` uses the default pool.

 # Safety
 Handles must be live; `snr_db` and `errors` must hold `points` entries.
 */
enum PkStatus pk_simulate(const struct PkSignalSet *set,
                          const struct PkKernel *kernel,
                          enum PkRole role_,
                          const double *snr_db,
                          size_t points,
                          uint64_t trials,
                          uint64_t seed,
                          size_t threads,
                          uint64_t *errors);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLARKIT_H */
