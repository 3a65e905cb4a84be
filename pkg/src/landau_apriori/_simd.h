#ifndef LANDAU_APRIORI_SIMD_H
#define LANDAU_APRIORI_SIMD_H

#include <stddef.h>

/* Dot product with a vectorized reduction.  The summation order depends only
   on the build, not on the thread count. */
static inline double la_dot(const double *a, const double *b, ptrdiff_t m)
{
    double s = 0.0;
    ptrdiff_t k;
#pragma omp simd reduction(+:s)
    for (k = 0; k < m; ++k)
        s += a[k] * b[k];
    return s;
}

/* out[j] += sum_l t[l - j] * f[l] for j = 0..n-1, l = 0..n-1, where t points
   at the kernel entry for offset zero.  Four outputs share each load of f. */
static inline void la_correlate_row(const double *t, const double *f, double *out, ptrdiff_t n)
{
    ptrdiff_t j = 0, l;
    for (; j + 4 <= n; j += 4) {
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        const double *t0 = t - j;
#pragma omp simd reduction(+:s0, s1, s2, s3)
        for (l = 0; l < n; ++l) {
            double fl = f[l];
            s0 += t0[l] * fl;
            s1 += t0[l - 1] * fl;
            s2 += t0[l - 2] * fl;
            s3 += t0[l - 3] * fl;
        }
        out[j] += s0;
        out[j + 1] += s1;
        out[j + 2] += s2;
        out[j + 3] += s3;
    }
    for (; j < n; ++j)
        out[j] += la_dot(t - j, f, n);
}

#endif
