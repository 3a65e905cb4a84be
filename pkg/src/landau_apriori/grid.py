"""Uniform velocity grids, scalar fields on them, and integral functionals.

All functionals are plain Riemann sums over the nodes (second order for
smooth integrands).  Negative node values are clamped to zero inside every
functional, and the field is taken to vanish outside ``[-L, L]^d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "VelocityGrid",
    "ScalarField",
    "PhysicalSummary",
    "integrate",
    "lp_kappa_norm",
    "second_moment",
    "entropy",
    "entropy_prime",
    "summarize",
    "maxwellian",
    "bump_init",
    "bimodal",
    "ball_volume",
    "sphere_area",
    "write_field_csv",
    "read_field_csv",
]


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def ball_volume(d: int, radius: float = 1.0) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius**d


@dataclass(frozen=True)
class VelocityGrid:
    """Tensor grid on ``[-L, L]^d`` with ``n`` nodes per axis (``n`` odd)."""

    d: int
    L: float
    n: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if not self.L > 0:
            raise ValueError(f"half-width L must be positive, got {self.L}")
        if self.n < 3 or self.n % 2 == 0:
            raise ValueError(f"n must be odd and >= 3 so the origin is a node, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def origin_index(self) -> tuple[int, ...]:
        return ((self.n - 1) // 2,) * self.d

    def axis(self) -> np.ndarray:
        return -self.L + np.arange(self.n) * self.h

    def coordinates(self) -> list[np.ndarray]:
        """Per-axis coordinate arrays broadcast to the full grid shape."""
        return np.meshgrid(*([self.axis()] * self.d), indexing="ij")

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c**2 for c in self.coordinates()))

    def refined(self) -> "VelocityGrid":
        """Same box with spacing halved (``n -> 2n - 1``); coarse nodes are kept."""
        return VelocityGrid(self.d, self.L, 2 * self.n - 1)

    def index_of(self, point: Sequence[float]) -> tuple[int, ...]:
        return tuple(int(round((x + self.L) / self.h)) for x in point)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per grid node.

    Nonnegativity is not enforced; solver output may undershoot slightly.
    """

    grid: VelocityGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise ValueError(f"non-finite value at node {tuple(int(i) for i in bad)}")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def clamped(self) -> np.ndarray:
        return np.maximum(self.values, 0.0)

    def sup(self) -> float:
        return float(self.values.max(initial=0.0))

    def __add__(self, other: "ScalarField") -> "ScalarField":
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        return ScalarField(self.grid, self.values + other.values)

    def scaled(self, factor: float) -> "ScalarField":
        return ScalarField(self.grid, factor * self.values)


@dataclass(frozen=True)
class PhysicalSummary:
    mass: float
    energy: float
    entropy: float
    entropy_prime: float
    sup_norm: float


def integrate(f: ScalarField, kappa: float = 0.0, p: float = 1.0) -> float:
    """Riemann sum of ``(1+|v|)^kappa * max(f,0)^p``."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    g = f.grid
    weight = (1.0 + g.radius()) ** kappa if kappa != 0 else 1.0
    return float(np.sum(weight * f.clamped() ** p) * g.cell_volume)


def lp_kappa_norm(f: ScalarField, kappa: float = 0.0, p: float = 1.0) -> float:
    return integrate(f, kappa, p) ** (1.0 / p)


def second_moment(f: ScalarField) -> float:
    g = f.grid
    return float(np.sum(g.radius() ** 2 * f.clamped()) * g.cell_volume)


def _xlogx(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def entropy(f: ScalarField) -> float:
    """Riemann sum of ``f log f`` with ``0 log 0 = 0``."""
    return float(np.sum(_xlogx(f.clamped())) * f.grid.cell_volume)


def entropy_prime(f: ScalarField) -> float:
    """Riemann sum of ``f log(1+f)``."""
    x = f.clamped()
    return float(np.sum(x * np.log1p(x)) * f.grid.cell_volume)


def summarize(f: ScalarField) -> PhysicalSummary:
    return PhysicalSummary(
        mass=integrate(f),
        energy=second_moment(f),
        entropy=entropy(f),
        entropy_prime=entropy_prime(f),
        sup_norm=f.sup(),
    )


def maxwellian(grid: VelocityGrid) -> ScalarField:
    """Standard Gaussian ``(2 pi)^{-d/2} exp(-|v|^2/2)`` (unit mass, identity covariance)."""
    r2 = grid.radius() ** 2
    return ScalarField(grid, (2 * np.pi) ** (-grid.d / 2) * np.exp(-r2 / 2))


def _bump_values(grid: VelocityGrid, center, radius: float, height: float) -> np.ndarray:
    if not radius > 0:
        raise ValueError(f"bump radius must be positive, got {radius}")
    if height < 0:
        raise ValueError(f"bump height must be nonnegative, got {height}")
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.d,))
    if np.any(np.abs(center) > grid.L):
        raise ValueError(f"bump center {tuple(center)} lies outside the grid")
    coords = grid.coordinates()
    s = sum((c - x0) ** 2 for c, x0 in zip(coords, center)) / radius**2
    out = np.zeros(grid.shape)
    inside = s < 1
    out[inside] = height * np.exp(1.0 - 1.0 / (1.0 - s[inside]))
    return out


def bump_init(grid: VelocityGrid, center=0.0, radius: float = 1.0, height: float = 1.0) -> ScalarField:
    """Smooth compactly supported bump, equal to ``height`` at ``center``."""
    return ScalarField(grid, _bump_values(grid, center, radius, height))


def bimodal(grid: VelocityGrid, centers, radius: float = 1.0, height: float = 1.0) -> ScalarField:
    """Sum of bumps placed at each of ``centers``."""
    values = sum(_bump_values(grid, c, radius, height) for c in centers)
    return ScalarField(grid, values)


# CSV layout: "# d=<d> L=<L> n=<n>" then i0..i(d-1), v0..v(d-1), value columns,
# nodes in row-major (C) order.


def format_header(grid: VelocityGrid) -> str:
    return f"# d={grid.d} L={grid.L!r} n={grid.n}"


def parse_header(line: str) -> VelocityGrid:
    if not line.startswith("#"):
        raise ValueError(f"missing grid header, got {line!r}")
    items = dict(tok.split("=", 1) for tok in line[1:].split())
    try:
        return VelocityGrid(int(items["d"]), float(items["L"]), int(items["n"]))
    except KeyError as exc:
        raise ValueError(f"grid header lacks {exc.args[0]!r}: {line!r}") from None


def write_rows(path, grid: VelocityGrid, columns: np.ndarray) -> None:
    idx = np.indices(grid.shape).reshape(grid.d, -1).T
    coords = -grid.L + idx * grid.h
    with open(path, "w") as fh:
        fh.write(format_header(grid) + "\n")
        for i, v, c in zip(idx, coords, columns):
            fields = [str(int(x)) for x in i] + [repr(float(x)) for x in v] + [repr(float(x)) for x in c]
            fh.write(",".join(fields) + "\n")


def read_rows(path) -> tuple[VelocityGrid, np.ndarray]:
    """Return the grid and the value columns reshaped to ``grid.shape + (ncols,)``."""
    lines = Path(path).read_text().splitlines()
    grid = parse_header(lines[0])
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    if data.shape[0] != grid.size:
        raise ValueError(f"expected {grid.size} rows, found {data.shape[0]}")
    idx = data[:, : grid.d].astype(int)
    out = np.empty(grid.shape + (data.shape[1] - 2 * grid.d,))
    out[tuple(idx.T)] = data[:, 2 * grid.d :]
    return grid, out


def write_field_csv(f: ScalarField, path) -> None:
    write_rows(path, f.grid, f.values.reshape(-1, 1))


def read_field_csv(path) -> ScalarField:
    grid, cols = read_rows(path)
    if cols.shape[-1] != 1:
        raise ValueError(f"scalar field file must carry one value column, found {cols.shape[-1]}")
    return ScalarField(grid, cols[..., 0])
