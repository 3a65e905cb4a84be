"""Landau diffusion matrix and reaction coefficient by direct convolution.

For a distribution ``f`` on a :class:`VelocityGrid`,

    abar(v) = a * sum_u (|w|^2 I - w w^T) |w|^gamma f(u) h^d,   w = v - u
    cbar(v) = c * sum_u |w|^gamma f(u) h^d

with ``f = 0`` off the grid.  The ``w = 0`` cell is singular for ``cbar``
when ``gamma < 0`` and for ``abar`` when ``gamma <= -2``; see
:func:`origin_cell_weight`.  At ``gamma = -d`` the reaction coefficient is
``cbar = c * f`` pointwise.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import core
from .grid import VelocityGrid, ScalarField, ball_volume, sphere_area, read_rows, write_rows

__all__ = [
    "KernelParams",
    "CoefficientField",
    "SpectralDiagnostics",
    "compute_coefficients",
    "compute_coefficients_direct",
    "compute_diffusion",
    "conservative_reaction",
    "kernel_tables",
    "origin_cell_weight",
    "ball_cell_integral",
    "max_eigenvalue",
    "divergence_identity_field",
    "divergence_identity_residual",
    "spectral_diagnostics",
    "write_coefficients_csv",
    "read_coefficients_csv",
]

CELL_RULES = ("matched", "ball")


@dataclass(frozen=True)
class KernelParams:
    """Potential exponent and normalising constants.

    ``c_const=None`` resolves to ``a_const * (d-1) * (d+gamma)``, the value for
    which ``cbar = -d_ij abar_ij``.  At the endpoint ``gamma = -d`` that
    expression vanishes; the limit of ``(d+gamma)|w|^gamma`` is
    ``|S^{d-1}| delta_0``, so the default there is ``a (d-1) |S^{d-1}|``.

    ``cell_rule`` selects the weight of the singular ``w = 0`` cell in the
    ``cbar`` sum: ``"matched"`` (default) makes the discrete kernel of
    ``cbar + D2 abar`` sum to zero over the convolution table, which keeps the
    divergence identity second-order accurate; ``"ball"`` integrates
    ``|w|^gamma`` over the ball with the cell's volume.
    """

    gamma: float
    a_const: float = 1.0
    c_const: float | None = None
    cell_rule: str = "matched"

    def __post_init__(self):
        if not self.a_const > 0:
            raise ValueError(f"a_const must be positive, got {self.a_const}")
        if self.c_const is not None and not self.c_const > 0:
            raise ValueError(f"c_const must be positive, got {self.c_const}")
        if self.cell_rule not in CELL_RULES:
            raise ValueError(f"cell_rule must be one of {CELL_RULES}, got {self.cell_rule!r}")

    def check_dimension(self, d: int) -> None:
        if not (-d <= self.gamma <= 0):
            raise ValueError(f"gamma must lie in [-d, 0] = [{-d}, 0], got {self.gamma}")

    def resolved_c_const(self, d: int) -> float:
        if self.c_const is not None:
            return self.c_const
        if self.gamma == -d:
            return self.a_const * (d - 1) * sphere_area(d)
        return self.a_const * (d - 1) * (d + self.gamma)


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """``abar`` as a ``(d, d, *grid.shape)`` array and ``cbar`` as ``grid.shape``."""

    grid: VelocityGrid
    abar: np.ndarray = field(repr=False)
    cbar: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = self.grid
        abar = np.array(self.abar, dtype=float)
        cbar = np.array(self.cbar, dtype=float)
        if abar.shape != (g.d, g.d) + g.shape:
            raise ValueError(f"abar shape {abar.shape} does not match grid")
        if cbar.shape != g.shape:
            raise ValueError(f"cbar shape {cbar.shape} does not match grid")
        abar.flags.writeable = False
        cbar.flags.writeable = False
        object.__setattr__(self, "abar", abar)
        object.__setattr__(self, "cbar", cbar)

    def upper_triangle(self) -> np.ndarray:
        """``(size, d(d+1)/2)`` entries ``a_ij`` with ``i <= j`` in row-major order."""
        d = self.grid.d
        return np.stack([self.abar[i, j].reshape(-1) for i, j in _upper_pairs(d)], axis=1)


def _upper_pairs(d: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(d) for j in range(i, d)]


def ball_cell_integral(d: int, exponent: float, h: float) -> float:
    """Integral of ``|w|^exponent`` over the ball whose volume is ``h^d``."""
    r_eff = (h**d / ball_volume(d)) ** (1.0 / d)
    return sphere_area(d) * r_eff ** (d + exponent) / (d + exponent)


def _unit_lattice(d: int, half: int) -> list[np.ndarray]:
    m = np.arange(-half, half + 1, dtype=float)
    return np.meshgrid(*([m] * d), indexing="ij")


def _abar_kernel(coords: list[np.ndarray], gamma: float, i: int, j: int, origin_value: float) -> np.ndarray:
    r2 = sum(c * c for c in coords)
    with np.errstate(divide="ignore", invalid="ignore"):
        rg = np.where(r2 > 0, r2 ** (gamma / 2), 0.0)
    k = -coords[i] * coords[j] * rg
    if i == j:
        k = k + r2 * rg
    k[r2 == 0] = origin_value if i == j else 0.0
    return k


@functools.lru_cache(maxsize=32)
def _matched_weight(d: int, n: int, gamma: float) -> float:
    # Unit lattice; all terms scale as h^(d+gamma) so the weight is h-free.
    N = n - 1
    coords = _unit_lattice(d, N + 1)
    origin = _abar_origin_unit(d, gamma)
    core_sl = (slice(1, -1),) * d
    total = 0.0
    for i, j in _upper_pairs(d):
        K = _abar_kernel(coords, gamma, i, j, origin)
        if i == j:
            e = [0] * d
            e[i] = 1
            D = _shift(K, e) - 2.0 * K[core_sl] + _shift(K, [-x for x in e])
            total += D.sum()
        else:
            pp = [0] * d
            pp[i] = pp[j] = 1
            pm = list(pp)
            pm[j] = -1
            mp = list(pp)
            mp[i] = -1
            mm = [-x for x in pp]
            D = (_shift(K, pp) - _shift(K, pm) - _shift(K, mp) + _shift(K, mm)) * 0.25
            total += 2.0 * D.sum()
    r2 = sum(c[core_sl] ** 2 for c in coords)
    with np.errstate(divide="ignore"):
        lattice_sum = np.where(r2 > 0, r2 ** (gamma / 2), 0.0).sum()
    return float(-lattice_sum - total / ((d - 1) * (d + gamma)))


def _shift(K: np.ndarray, offsets) -> np.ndarray:
    return K[tuple(slice(1 + o, K.shape[k] - 1 + o) for k, o in enumerate(offsets))]


def _abar_origin_unit(d: int, gamma: float) -> float:
    # Angular average of (I - w w^T/|w|^2) is (1 - 1/d) I.
    if gamma > -2:
        return 0.0
    return (1.0 - 1.0 / d) * ball_cell_integral(d, gamma + 2, 1.0)


def origin_cell_weight(d: int, n: int, gamma: float, rule: str = "matched") -> float:
    """Weight ``S`` such that the ``w = 0`` cell contributes ``S h^(d+gamma) f(v)`` to
    ``sum_u |v-u|^gamma f(u) h^d`` (before the ``c`` constant), for ``-d < gamma <= 0``."""
    if gamma == 0:
        return 1.0
    if rule == "ball" or d == 1:
        return ball_cell_integral(d, gamma, 1.0)
    if rule == "matched":
        return _matched_weight(d, n, float(gamma))
    raise ValueError(f"unknown cell rule {rule!r}")


@functools.lru_cache(maxsize=16)
def kernel_tables(grid: VelocityGrid, params: KernelParams) -> np.ndarray:
    """``(d(d+1)/2 + 1, (2n-1)^d)`` table of kernels times the cell volume.

    Rows are the upper-triangle entries of the ``abar`` kernel followed by the
    ``cbar`` kernel, indexed by offsets ``w/h`` in ``[-(n-1), n-1]^d``.
    """
    d, n, h = grid.d, grid.n, grid.h
    gamma = params.gamma
    params.check_dimension(d)
    a, c = params.a_const, params.resolved_c_const(d)
    coords = [x * h for x in _unit_lattice(d, n - 1)]
    vol = grid.cell_volume
    origin_a = _abar_origin_unit(d, gamma) * h ** (d + gamma + 2) / vol
    rows = [a * vol * _abar_kernel(coords, gamma, i, j, origin_a).reshape(-1) for i, j in _upper_pairs(d)]
    r2 = sum(x * x for x in coords)
    if gamma == -d:
        ck = np.where(r2 == 0, c, 0.0)
    else:
        with np.errstate(divide="ignore"):
            ck = np.where(r2 > 0, r2 ** (gamma / 2), 0.0) * vol
        ck[r2 == 0] = origin_cell_weight(d, n, gamma, params.cell_rule) * h ** (d + gamma)
        ck = c * ck
    rows.append(ck.reshape(-1))
    tables = np.ascontiguousarray(np.stack(rows))
    tables.flags.writeable = False
    return tables


def _assemble(grid: VelocityGrid, comps: np.ndarray) -> CoefficientField:
    d = grid.d
    abar = np.empty((d, d) + grid.shape)
    for row, (i, j) in zip(comps[:-1], _upper_pairs(d)):
        abar[i, j] = row.reshape(grid.shape)
        abar[j, i] = abar[i, j]
    return CoefficientField(grid, abar, comps[-1].reshape(grid.shape))


def compute_coefficients(f: ScalarField, params: KernelParams) -> CoefficientField:
    """Coefficients via the precomputed kernel table (compiled when available)."""
    grid = f.grid
    tables = kernel_tables(grid, params)
    fv = np.ascontiguousarray(f.clamped().reshape(-1))
    comps = core.convolve(np.asarray(tables), fv, grid.d, grid.n)
    return _assemble(grid, comps)


def compute_coefficients_direct(f: ScalarField, params: KernelParams) -> CoefficientField:
    """Reference path: evaluates the kernels pair by pair, no tabulation."""
    grid = f.grid
    d, n, h = grid.d, grid.n, grid.h
    gamma = params.gamma
    params.check_dimension(d)
    a, c = params.a_const, params.resolved_c_const(d)
    vol = grid.cell_volume
    src = np.stack([x.reshape(-1) for x in grid.coordinates()])
    fv = f.clamped().reshape(-1)
    live = fv > 0
    src, fv = src[:, live], fv[live]
    origin_a = _abar_origin_unit(d, gamma) * h ** (d + gamma + 2)
    if gamma not in (0.0, -d):
        origin_c = origin_cell_weight(d, n, gamma, params.cell_rule) * h ** (d + gamma)
    else:
        origin_c = vol
    pairs = _upper_pairs(d)
    comps = np.zeros((len(pairs) + 1, grid.size))
    targets = np.stack([x.reshape(-1) for x in grid.coordinates()])
    for t in range(grid.size):
        w = targets[:, t : t + 1] - src
        r2 = np.einsum("ij,ij->j", w, w)
        zero = r2 == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            rg = np.where(zero, 0.0, r2 ** (gamma / 2))
        for q, (i, j) in enumerate(pairs):
            k = -w[i] * w[j] * rg
            if i == j:
                k = k + r2 * rg
            s = np.dot(k, fv) * vol
            if i == j and zero.any():
                s += origin_a * fv[zero].sum()
            comps[q, t] = a * s
        if gamma == -d:
            comps[-1, t] = c * fv[zero].sum()
        else:
            comps[-1, t] = c * (np.dot(rg, fv) * vol + origin_c * fv[zero].sum())
    return _assemble(grid, comps)


def _shifted(arr: np.ndarray, offsets) -> np.ndarray:
    return arr[tuple(slice(1 + o, arr.shape[k] - 1 + o) for k, o in enumerate(offsets))]


def _stencil_sum(A: np.ndarray, h: float) -> np.ndarray:
    """``sum_ij D2_ij A_ij`` on the nodes of ``A`` after dropping one layer per side."""
    d = A.shape[0]
    inner = (slice(1, -1),) * d
    total = np.zeros(tuple(s - 2 for s in A.shape[2:]))
    for i in range(d):
        e = [0] * d
        e[i] = 1
        total += (_shifted(A[i, i], e) - 2.0 * A[i, i][inner] + _shifted(A[i, i], [-x for x in e])) / h**2
        for j in range(i + 1, d):
            pp = [0] * d
            pp[i] = pp[j] = 1
            pm = list(pp)
            pm[j] = -1
            mp = list(pp)
            mp[i] = -1
            mm = [-x for x in pp]
            cross = _shifted(A[i, j], pp) - _shifted(A[i, j], pm) - _shifted(A[i, j], mp) + _shifted(A[i, j], mm)
            total += 2.0 * cross / (4 * h**2)
    return total


def _second_differences(coeffs: CoefficientField) -> np.ndarray:
    """``sum_ij D2_ij abar_ij`` on interior nodes (outermost layer dropped)."""
    return _stencil_sum(coeffs.abar, coeffs.grid.h)


def conservative_reaction(grid: VelocityGrid, abar: np.ndarray) -> np.ndarray:
    """``-sum_ij D2_ij abar_ij`` on every node, with ``abar = 0`` off the grid.

    This is the adjoint of the solver stencil applied to ``abar``, so a step
    using it as the reaction coefficient changes the Riemann-sum mass only by
    rounding (the box boundary acts as a zero-flux wall).
    """
    d = grid.d
    padded = np.pad(np.asarray(abar), [(0, 0), (0, 0)] + [(1, 1)] * d)
    return -_stencil_sum(padded, grid.h)


def compute_diffusion(f: ScalarField, params: KernelParams) -> np.ndarray:
    """``abar`` alone, as a ``(d, d, *grid.shape)`` array (skips the ``cbar`` sum)."""
    grid = f.grid
    d = grid.d
    tables = np.asarray(kernel_tables(grid, params))[:-1]
    fv = np.ascontiguousarray(f.clamped().reshape(-1))
    comps = core.convolve(tables, fv, d, grid.n)
    abar = np.empty((d, d) + grid.shape)
    for row, (i, j) in zip(comps, _upper_pairs(d)):
        abar[i, j] = row.reshape(grid.shape)
        abar[j, i] = abar[i, j]
    return abar


def divergence_identity_field(coeffs: CoefficientField) -> np.ndarray:
    """``cbar + sum_ij D2_ij abar_ij`` on interior nodes."""
    if coeffs.grid.n < 5:
        raise ValueError(f"need at least 5 nodes per axis, got {coeffs.grid.n}")
    inner = (slice(1, -1),) * coeffs.grid.d
    return coeffs.cbar[inner] + _second_differences(coeffs)


def divergence_identity_residual(coeffs: CoefficientField) -> float:
    """Max over interior nodes of ``|cbar + sum_ij D2_ij abar_ij|``."""
    return float(np.abs(divergence_identity_field(coeffs)).max())


@dataclass(frozen=True, eq=False)
class SpectralDiagnostics:
    min_eig: np.ndarray
    max_eig: np.ndarray
    det: np.ndarray
    radial_eig: np.ndarray
    tangential_min_eig: np.ndarray


def _eig2(a, b, c):
    mid = 0.5 * (a + c)
    rad = np.sqrt((0.5 * (a - c)) ** 2 + b * b)
    return mid - rad, mid + rad


def _eig3(A):
    # Trigonometric closed form for symmetric 3x3 matrices.
    a00, a11, a22 = A[0, 0], A[1, 1], A[2, 2]
    a01, a02, a12 = A[0, 1], A[0, 2], A[1, 2]
    p1 = a01**2 + a02**2 + a12**2
    q = (a00 + a11 + a22) / 3.0
    p2 = (a00 - q) ** 2 + (a11 - q) ** 2 + (a22 - q) ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    safe = np.where(p > 0, p, 1.0)
    b00, b11, b22 = (a00 - q) / safe, (a11 - q) / safe, (a22 - q) / safe
    b01, b02, b12 = a01 / safe, a02 / safe, a12 / safe
    detb = b00 * (b11 * b22 - b12**2) - b01 * (b01 * b22 - b12 * b02) + b02 * (b01 * b12 - b11 * b02)
    r = np.clip(detb / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    return lo, hi


def _eig_range(A):
    d = A.shape[0]
    if d == 1:
        return A[0, 0], A[0, 0]
    if d == 2:
        return _eig2(A[0, 0], A[0, 1], A[1, 1])
    return _eig3(A)


def max_eigenvalue(abar: np.ndarray) -> np.ndarray:
    """Per-node largest eigenvalue of a symmetric ``(d, d, ...)`` field."""
    return np.asarray(_eig_range(abar)[1], dtype=float)


def _det(A, d):
    if d == 1:
        return A[0, 0]
    if d == 2:
        return A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    return (
        A[0, 0] * (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
        - A[0, 1] * (A[1, 0] * A[2, 2] - A[1, 2] * A[2, 0])
        + A[0, 2] * (A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0])
    )


def _quad(A, x, y):
    return np.einsum("i...,ij...,j...->...", x, A, y)


def spectral_diagnostics(coeffs: CoefficientField, tol: float = 1e-12) -> SpectralDiagnostics:
    """Per-node eigen-data of ``abar`` in closed form.

    ``radial_eig`` is ``<abar v^, v^>`` and ``tangential_min_eig`` the minimum of
    ``<abar e, e>`` over unit ``e`` orthogonal to ``v``; both equal ``min_eig`` at
    ``v = 0``.  For ``d = 1`` there is no tangential direction (NaN).
    """
    g = coeffs.grid
    d = g.d
    A = coeffs.abar
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    asym = float(np.abs(A - np.swapaxes(A, 0, 1)).max(initial=0.0))
    if asym > tol * scale:
        raise ValueError(f"abar is not symmetric (max |a_ij - a_ji| = {asym:.3e})")
    lo, hi = _eig_range(A)
    det = _det(A, d)

    coords = np.stack(g.coordinates())
    r = np.sqrt(np.sum(coords**2, axis=0))
    at_origin = r == 0
    vhat = coords / np.where(at_origin, 1.0, r)
    radial = np.where(at_origin, lo, _quad(A, vhat, vhat))
    if d == 1:
        tangential = np.full(g.shape, np.nan)
    elif d == 2:
        t = np.stack([-vhat[1], vhat[0]])
        tangential = np.where(at_origin, lo, _quad(A, t, t))
    else:
        # orthonormal basis of v^perp from the coordinate axis least aligned with v
        helper = np.zeros_like(vhat)
        pick = np.argmin(np.abs(vhat), axis=0)
        np.put_along_axis(helper, pick[None], 1.0, axis=0)
        e1 = np.cross(vhat, helper, axis=0)
        e1 /= np.where(at_origin, 1.0, np.linalg.norm(e1, axis=0))
        e2 = np.cross(vhat, e1, axis=0)
        t_lo, _ = _eig2(_quad(A, e1, e1), _quad(A, e1, e2), _quad(A, e2, e2))
        tangential = np.where(at_origin, lo, t_lo)
    return SpectralDiagnostics(
        min_eig=np.asarray(lo, dtype=float),
        max_eig=np.asarray(hi, dtype=float),
        det=np.asarray(det, dtype=float),
        radial_eig=np.asarray(radial, dtype=float),
        tangential_min_eig=np.asarray(tangential, dtype=float),
    )


def write_coefficients_csv(coeffs: CoefficientField, path) -> None:
    cols = np.hstack([coeffs.upper_triangle(), coeffs.cbar.reshape(-1, 1)])
    write_rows(path, coeffs.grid, cols)


def read_coefficients_csv(path) -> CoefficientField:
    grid, cols = read_rows(path)
    d = grid.d
    pairs = _upper_pairs(d)
    if cols.shape[-1] != len(pairs) + 1:
        raise ValueError(f"expected {len(pairs) + 1} value columns, found {cols.shape[-1]}")
    comps = np.moveaxis(cols, -1, 0).reshape(len(pairs) + 1, -1)
    return _assemble(grid, comps)


def write_spectral_csv(coeffs: CoefficientField, path) -> None:
    s = spectral_diagnostics(coeffs)
    cols = np.stack(
        [x.reshape(-1) for x in (s.min_eig, s.max_eig, s.det, s.radial_eig, s.tangential_min_eig)], axis=1
    )
    write_rows(path, coeffs.grid, cols)
