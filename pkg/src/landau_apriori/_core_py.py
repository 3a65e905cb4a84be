"""Pure NumPy implementations of the hot kernels.

Same signatures and conventions as the compiled ``_core`` extension; used
when the extension is unavailable or ``LANDAU_APRIORI_BACKEND=python``.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def convolve(tables, f, d, n, nthreads=1):
    """Tabulated discrete convolution.

    ``tables`` is ``(ncomp, (2n-1)**d)`` holding each kernel (already weighted
    by the cell volume) at offsets ``-(n-1)..(n-1)`` per axis; ``f`` is the
    flattened ``n**d`` field.  Returns ``(ncomp, n**d)`` with
    ``out[c, v] = sum_u tables[c, v - u] * f[u]``.
    """
    del nthreads
    ncomp = tables.shape[0]
    m = 2 * n - 1
    t = np.asarray(tables).reshape((ncomp,) + (m,) * d)
    fv = np.asarray(f).reshape((n,) * d)
    # windows[c, a.., k..] = t[c, a + k]; target v uses the window starting at N - v
    windows = sliding_window_view(t, (n,) * d, axis=tuple(range(1, d + 1)))
    flip = (slice(None),) + (slice(None, None, -1),) * d
    windows = windows[flip]
    letters = "abc"[:d]
    src = "klm"[:d]
    out = np.einsum(f"z{letters}{src},{src}->z{letters}", windows, fv, optimize=False)
    return np.ascontiguousarray(out.reshape(ncomp, -1))


def apply_operator(f, abar, cbar, d, n, h):
    """``sum_ij abar_ij D2_ij f + cbar f`` with zero ghost values.

    ``abar`` is ``(d*d, n**d)`` (row-major matrix entries per node).
    Diagonal terms use the 3-point stencil, mixed terms the 4-point cross.
    """
    shape = (n,) * d
    fp = np.pad(np.asarray(f).reshape(shape), 1)
    a = np.asarray(abar).reshape((d, d) + shape)
    core = (slice(1, -1),) * d
    centre = fp[core]
    out = np.asarray(cbar).reshape(shape) * centre

    def shifted(offsets):
        return fp[tuple(slice(1 + o, fp.shape[k] - 1 + o) for k, o in enumerate(offsets))]

    inv_h2 = 1.0 / (h * h)
    for i in range(d):
        e = [0] * d
        e[i] = 1
        minus = [-x for x in e]
        out = out + a[i, i] * (shifted(e) - 2.0 * centre + shifted(minus)) * inv_h2
        for j in range(i + 1, d):
            pp = [0] * d
            pp[i], pp[j] = 1, 1
            pm = list(pp)
            pm[j] = -1
            mp = list(pp)
            mp[i] = -1
            mm = [-x for x in pp]
            cross = (shifted(pp) - shifted(pm) - shifted(mp) + shifted(mm)) * (0.25 * inv_h2)
            out = out + 2.0 * a[i, j] * cross
    return np.ascontiguousarray(out.reshape(-1))
