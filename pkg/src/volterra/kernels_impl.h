/* Hot numerical kernels for dense tanh networks, in feature-major layout.
 *
 * All batch arrays are stored transposed, shape (dim, rows) with the row axis
 * contiguous, so every inner loop is a unit-stride stream that the compiler
 * can vectorize.  Gradient reductions accumulate per fixed-size row chunk and
 * are then summed in chunk order, which keeps results bit-identical for any
 * thread count.
 *
 * tanh is computed as 1 - 2/(exp(2x)+1) with a clamped, polynomial exp; the
 * three passes (clamp, exp, combine) are kept as separate straight-line loops
 * because gcc refuses to if-convert loops containing the bit-cast memcpys.
 * Absolute error is ~1e-16, which is ample for activations (values near zero
 * lose relative precision at the 1e-16 absolute level only).
 */
#ifndef VOLTERRA_KERNELS_IMPL_H
#define VOLTERRA_KERNELS_IMPL_H

#include <math.h>
#include <stdint.h>
#include <string.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#define VT_ROW_BLOCK 512
#define VT_GRAD_CHUNK 1024

static int vt_num_threads = 1;

static void vt_set_threads(int n) { vt_num_threads = n > 0 ? n : 1; }

static int vt_get_threads(void) { return vt_num_threads; }

/* exp for |x| <= 64: Cody-Waite reduction + degree-13 Horner polynomial.
 * Straight-line (no branches), so surrounding loops vectorize; relative
 * error a few 1e-16. Arguments are pre-clamped by the caller. */
static inline double vt_exp(double x) {
    const double inv_ln2 = 1.4426950408889634074;
    const double ln2_hi = 6.93147180369123816490e-01;
    const double ln2_lo = 1.90821492927058770002e-10;
    /* round(x/ln2) via the shift trick: adding 1.5*2^52 leaves the integer
     * in the low mantissa bits. */
    double kd = x * inv_ln2 + 6755399441055744.0;
    int64_t kbits;
    memcpy(&kbits, &kd, 8);
    int64_t k = kbits - INT64_C(0x4338000000000000);
    double dk = (double)k;
    double r = (x - dk * ln2_hi) - dk * ln2_lo;
    double p = 1.0 / 6227020800.0; /* 1/13! */
    p = p * r + 1.0 / 479001600.0;
    p = p * r + 1.0 / 39916800.0;
    p = p * r + 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    int64_t ebits = (k + 1023) << 52;
    double scale;
    memcpy(&scale, &ebits, 8);
    return p * scale;
}

/* In-place tanh over a short contiguous block (n <= VT_ROW_BLOCK). */
static inline void vt_tanh_block(double *restrict dst, int64_t n) {
    double tmp[VT_ROW_BLOCK];
    for (int64_t r = 0; r < n; r++) {
        double x = dst[r];
        double xc = x > 20.0 ? 20.0 : x;
        tmp[r] = xc < -20.0 ? -20.0 : xc;
    }
    for (int64_t r = 0; r < n; r++)
        tmp[r] = vt_exp(2.0 * tmp[r]);
    for (int64_t r = 0; r < n; r++)
        dst[r] = 1.0 - 2.0 / (tmp[r] + 1.0);
}

/* out[o, r] = act(b[o] + sum_i w[o, i] * hp[i, r]); act = tanh or identity.
 * hp: (I, R), w: (O, I), b: (O), out: (O, R). */
static void vt_dense_forward_t(const double *restrict hp,
                               const double *restrict w,
                               const double *restrict b,
                               double *restrict out,
                               int64_t rows, int in_dim, int out_dim,
                               int apply_tanh) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(vt_num_threads) \
    if (vt_num_threads > 1 && rows > 4 * VT_ROW_BLOCK)
#endif
    for (int64_t r0 = 0; r0 < rows; r0 += VT_ROW_BLOCK) {
        int64_t r1 = r0 + VT_ROW_BLOCK < rows ? r0 + VT_ROW_BLOCK : rows;
        for (int o = 0; o < out_dim; o++) {
            double *restrict dst = out + (int64_t)o * rows;
            const double bo = b[o];
            for (int64_t r = r0; r < r1; r++)
                dst[r] = bo;
            for (int i = 0; i < in_dim; i++) {
                const double wv = w[(int64_t)o * in_dim + i];
                const double *restrict src = hp + (int64_t)i * rows;
                for (int64_t r = r0; r < r1; r++)
                    dst[r] += wv * src[r];
            }
            if (apply_tanh)
                vt_tanh_block(dst + r0, r1 - r0);
        }
    }
}

/* dprev[i, r] = (sum_o delta[o, r] * w[o, i]) * (1 - hp[i, r]^2).
 * delta: (O, R), w: (O, I), hp: (I, R) post-tanh activations, dprev: (I, R). */
static void vt_backward_delta_t(const double *restrict delta,
                                const double *restrict w,
                                const double *restrict hp,
                                double *restrict dprev,
                                int64_t rows, int in_dim, int out_dim) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(vt_num_threads) \
    if (vt_num_threads > 1 && rows > 4 * VT_ROW_BLOCK)
#endif
    for (int64_t r0 = 0; r0 < rows; r0 += VT_ROW_BLOCK) {
        int64_t r1 = r0 + VT_ROW_BLOCK < rows ? r0 + VT_ROW_BLOCK : rows;
        for (int i = 0; i < in_dim; i++) {
            double *restrict dst = dprev + (int64_t)i * rows;
            for (int64_t r = r0; r < r1; r++)
                dst[r] = 0.0;
            for (int o = 0; o < out_dim; o++) {
                const double wv = w[(int64_t)o * in_dim + i];
                const double *restrict src = delta + (int64_t)o * rows;
                for (int64_t r = r0; r < r1; r++)
                    dst[r] += wv * src[r];
            }
            const double *restrict act = hp + (int64_t)i * rows;
            for (int64_t r = r0; r < r1; r++)
                dst[r] *= 1.0 - act[r] * act[r];
        }
    }
}

/* Deterministic chunked dot product of two contiguous rows a, b over
 * [r0, r1): eight independent accumulators in a fixed lane pattern. */
static inline double vt_row_dot(const double *restrict a,
                                const double *restrict b,
                                int64_t r0, int64_t r1) {
    double s[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int64_t r = r0;
    for (; r + 8 <= r1; r += 8)
        for (int j = 0; j < 8; j++)
            s[j] += a[r + j] * b[r + j];
    for (int j = 0; r < r1; r++, j++)
        s[j] += a[r] * b[r];
    return ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7]));
}

static inline double vt_row_sum(const double *restrict a, int64_t r0,
                                int64_t r1) {
    double s[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int64_t r = r0;
    for (; r + 8 <= r1; r += 8)
        for (int j = 0; j < 8; j++)
            s[j] += a[r + j];
    for (int j = 0; r < r1; r++, j++)
        s[j] += a[r];
    return ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7]));
}

/* dw[o, i] = sum_r delta[o, r] * hp[i, r];  db[o] = sum_r delta[o, r].
 * scratch: (n_chunks, out_dim * (in_dim + 1)) workspace; partials are
 * computed per chunk (possibly in parallel) and reduced serially in chunk
 * order, so the result is independent of the thread count. */
static void vt_backward_params_t(const double *restrict delta,
                                 const double *restrict hp,
                                 double *restrict dw, double *restrict db,
                                 double *restrict scratch,
                                 int64_t rows, int in_dim, int out_dim) {
    const int64_t n_chunks = (rows + VT_GRAD_CHUNK - 1) / VT_GRAD_CHUNK;
    const int64_t stride = (int64_t)out_dim * (in_dim + 1);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(vt_num_threads) \
    if (vt_num_threads > 1 && n_chunks > 4)
#endif
    for (int64_t c = 0; c < n_chunks; c++) {
        const int64_t r0 = c * VT_GRAD_CHUNK;
        const int64_t r1 = r0 + VT_GRAD_CHUNK < rows ? r0 + VT_GRAD_CHUNK : rows;
        double *restrict sc = scratch + c * stride;
        for (int o = 0; o < out_dim; o++) {
            const double *restrict drow = delta + (int64_t)o * rows;
            for (int i = 0; i < in_dim; i++)
                sc[(int64_t)o * in_dim + i] =
                    vt_row_dot(drow, hp + (int64_t)i * rows, r0, r1);
            sc[(int64_t)out_dim * in_dim + o] = vt_row_sum(drow, r0, r1);
        }
    }
    for (int64_t oi = 0; oi < (int64_t)out_dim * in_dim; oi++)
        dw[oi] = 0.0;
    for (int o = 0; o < out_dim; o++)
        db[o] = 0.0;
    for (int64_t c = 0; c < n_chunks; c++) {
        const double *restrict sc = scratch + c * stride;
        for (int64_t oi = 0; oi < (int64_t)out_dim * in_dim; oi++)
            dw[oi] += sc[oi];
        for (int o = 0; o < out_dim; o++)
            db[o] += sc[(int64_t)out_dim * in_dim + o];
    }
}

#endif /* VOLTERRA_KERNELS_IMPL_H */
