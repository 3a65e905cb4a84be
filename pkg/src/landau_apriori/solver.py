"""Explicit Euler integration of ``f_t = abar_ij d_ij f + cbar f``.

Second differences use the 3-point stencil on the diagonal and the 4-point
cross stencil for mixed derivatives, with ``f = 0`` on ghost nodes outside the
box.  Coefficients are recomputed from the current iterate every
``refresh_every`` steps; a stride above one freezes them between refreshes
and is reported as an approximation in the trajectory.

Two reaction terms are available.  ``"convolution"`` uses ``cbar`` from the
``|w|^gamma`` sum.  ``"conservative"`` uses ``-sum_ij D2_ij abar_ij`` (the
adjoint stencil applied to ``abar``), which makes the discrete mass an exact
invariant of the step.  The two agree up to the divergence-identity
residual, which for sharply peaked data is much larger than the mass
tolerance a long run can afford.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import core
from .coefficients import (
    CoefficientField,
    KernelParams,
    compute_coefficients,
    compute_diffusion,
    conservative_reaction,
    max_eigenvalue,
)
from .grid import ScalarField, VelocityGrid, entropy, integrate, second_moment

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "TrajectoryRecord",
    "Trajectory",
    "CFLFallbackWarning",
    "cfl_timestep",
    "step",
    "evolve",
    "landau_coefficients",
    "constant_coefficients",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "TRAJECTORY_COLUMNS",
]

REACTIONS = ("convolution", "conservative")
ENTROPY_TOL = 1e-6
MASS_ABORT = 0.1

TRAJECTORY_COLUMNS = ("t", "supF", "mass", "energy", "entropy", "envelope", "massDrift", "energyDrift", "minF")


class CFLFallbackWarning(RuntimeWarning):
    """All coefficients vanished, so the step size came from ``t_end`` instead."""


@dataclass(frozen=True)
class SolverConfig:
    grid: VelocityGrid
    kernel: KernelParams
    t_end: float
    cfl_safety: float = 0.4
    refresh_every: int = 1
    record_every: int = 1
    clamp_negatives: bool = True
    reaction: str = "convolution"

    def __post_init__(self):
        if not (0 < self.cfl_safety <= 1):
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.refresh_every < 1 or self.record_every < 1:
            raise ValueError("refresh_every and record_every must be >= 1")
        if self.reaction not in REACTIONS:
            raise ValueError(f"reaction must be one of {REACTIONS}, got {self.reaction!r}")


@dataclass(frozen=True)
class TrajectoryRecord:
    t: float
    sup_f: float
    mass: float
    energy: float
    entropy: float
    envelope_value: float  # NaN when no envelope is attached
    mass_drift: float
    energy_drift: float
    entropy_increase_flag: bool
    min_f: float

    def row(self) -> list[float]:
        return [
            self.t,
            self.sup_f,
            self.mass,
            self.energy,
            self.entropy,
            self.envelope_value,
            self.mass_drift,
            self.energy_drift,
            self.min_f,
        ]


@dataclass
class Trajectory:
    """Records of a run plus how it ended.

    ``status`` is ``"completed"`` or ``"aborted"``; an aborted run keeps every
    record made before the failure and says why in ``message``.
    """

    records: list[TrajectoryRecord] = field(default_factory=list)
    final: Optional[ScalarField] = None
    status: str = "completed"
    message: str = ""
    steps: int = 0
    cfl_fallback: bool = False
    approximate_refresh: bool = False

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def __iter__(self):
        return iter(self.records)

    def column(self, name: str) -> np.ndarray:
        idx = TRAJECTORY_COLUMNS.index(name)
        return np.array([r.row()[idx] for r in self.records])

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])


def _timestep(coeffs: CoefficientField, safety: float, t_end: float) -> tuple[float, bool]:
    g = coeffs.grid
    if not (np.all(np.isfinite(coeffs.abar)) and np.all(np.isfinite(coeffs.cbar))):
        raise ValueError("coefficients must be finite")
    lam = max(float(max_eigenvalue(coeffs.abar).max()), 0.0)
    cmax = max(float(coeffs.cbar.max()), 0.0)
    denom = 2 * g.d * lam + g.h**2 * cmax
    if denom == 0.0:
        return safety * t_end / 1000.0, True
    return safety * g.h**2 / denom, False


def cfl_timestep(coeffs: CoefficientField, config: SolverConfig) -> float:
    """``safety * h^2 / (2 d maxEig + h^2 max cbar)`` over the grid.

    Vanishing coefficients give ``safety * t_end / 1000`` and a
    :class:`CFLFallbackWarning`.
    """
    dt, fallback = _timestep(coeffs, config.cfl_safety, config.t_end)
    if fallback:
        warnings.warn("all coefficients are zero; using t_end/1000 step", CFLFallbackWarning, stacklevel=2)
    return dt


def _advance(values: np.ndarray, coeffs: CoefficientField, dt: float, clamp: bool) -> tuple[np.ndarray, float]:
    g = coeffs.grid
    d = g.d
    fv = np.ascontiguousarray(values, dtype=float).reshape(-1)
    abar = np.ascontiguousarray(coeffs.abar.reshape(d * d, -1))
    cbar = np.ascontiguousarray(coeffs.cbar.reshape(-1))
    rate = core.apply_operator(fv, abar, cbar, d, g.n, g.h)
    with np.errstate(over="ignore", invalid="ignore"):
        new = fv + dt * rate
    if not np.all(np.isfinite(new)):
        bad = np.unravel_index(int(np.flatnonzero(~np.isfinite(new))[0]), g.shape)
        raise FloatingPointError(f"non-finite value at node {tuple(int(i) for i in bad)}")
    min_f = float(new.min())
    if clamp:
        np.maximum(new, 0.0, out=new)
    return new.reshape(g.shape), min_f


def step(f: ScalarField, coeffs: CoefficientField, dt: float, clamp_negatives: bool = True) -> ScalarField:
    """One explicit Euler step; raises ``FloatingPointError`` naming the first bad node."""
    if coeffs.grid != f.grid:
        raise ValueError("field and coefficients live on different grids")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    new, _ = _advance(f.values, coeffs, dt, clamp_negatives)
    return ScalarField(f.grid, new)


CoefficientFn = Callable[[ScalarField], CoefficientField]


def landau_coefficients(params: KernelParams, reaction: str = "convolution") -> CoefficientFn:
    """Coefficient map ``f -> (abar[f], cbar)`` for the chosen reaction term."""
    if reaction not in REACTIONS:
        raise ValueError(f"reaction must be one of {REACTIONS}, got {reaction!r}")
    if reaction == "convolution":
        return lambda f: compute_coefficients(f, params)

    def conservative(f: ScalarField) -> CoefficientField:
        abar = compute_diffusion(f, params)
        return CoefficientField(f.grid, abar, conservative_reaction(f.grid, abar))

    return conservative


def constant_coefficients(coeffs: CoefficientField) -> CoefficientFn:
    """Frozen coefficients, e.g. ``abar = I, cbar = 0`` for the heat equation."""
    return lambda f: coeffs


def _relative(value: float, ref: float) -> float:
    if ref == 0.0:
        return 0.0 if value == 0.0 else math.inf
    return (value - ref) / ref


def evolve(
    f0: ScalarField,
    config: SolverConfig,
    envelope=None,
    coefficients: Optional[CoefficientFn] = None,
    t0: float = 0.0,
    monitor: Optional[Callable[[TrajectoryRecord, ScalarField, CoefficientField], None]] = None,
) -> Trajectory:
    """Integrate from ``t0`` to ``t_end`` and record the monitors.

    The first record is taken after the first step (the envelope is singular
    at ``t = 0``) and the last exactly at ``t_end``.  ``envelope`` is any
    object with a ``value(t)`` method.  ``coefficients`` overrides the Landau
    coefficient map.  ``monitor`` is called at every record with the record,
    the field and the coefficients used for the step that produced it.  The
    run stops early, keeping its records, when the relative mass change
    exceeds 10% or a non-finite value appears.
    """
    if f0.grid != config.grid:
        raise ValueError("initial field is not on the configured grid")
    if np.any(f0.values < 0):
        raise ValueError("initial field must be nonnegative")
    if not t0 < config.t_end:
        raise ValueError(f"t0={t0} must be below t_end={config.t_end}")
    coeff_fn = coefficients or landau_coefficients(config.kernel, config.reaction)
    grid = config.grid
    traj = Trajectory(approximate_refresh=config.refresh_every > 1)
    if traj.approximate_refresh:
        log.warning("coefficients refreshed every %d steps (frozen in between)", config.refresh_every)

    mass0 = integrate(f0)
    energy0 = second_moment(f0)
    prev_entropy = entropy(f0)
    values = np.array(f0.values)
    t = t0
    coeffs = None
    nstep = 0
    min_since_record = math.inf
    # Guard against dt underflowing relative to t near the end.
    t_eps = 1e-12 * max(1.0, abs(config.t_end))

    while t < config.t_end - t_eps:
        if nstep % config.refresh_every == 0:
            coeffs = coeff_fn(ScalarField(grid, values))
        dt, fallback = _timestep(coeffs, config.cfl_safety, config.t_end - t0)
        if fallback and not traj.cfl_fallback:
            traj.cfl_fallback = True
            warnings.warn("all coefficients are zero; using t_end/1000 step", CFLFallbackWarning, stacklevel=2)
        last = t + dt >= config.t_end - t_eps
        if last:
            dt = config.t_end - t
        try:
            values, min_f = _advance(values, coeffs, dt, config.clamp_negatives)
        except FloatingPointError as exc:
            traj.status, traj.message = "aborted", f"step {nstep + 1} at t={t:.6g}: {exc}"
            break
        t = config.t_end if last else t + dt
        nstep += 1
        min_since_record = min(min_since_record, min_f)
        drifted = abs(_relative(float(np.maximum(values, 0.0).sum()) * grid.cell_volume, mass0)) > MASS_ABORT
        if nstep == 1 or last or drifted or nstep % config.record_every == 0:
            f = ScalarField(grid, values)
            mass = integrate(f)
            ent = entropy(f)
            rec = TrajectoryRecord(
                t=t,
                sup_f=f.sup(),
                mass=mass,
                energy=second_moment(f),
                entropy=ent,
                envelope_value=float(envelope.value(t)) if envelope is not None else math.nan,
                mass_drift=_relative(mass, mass0),
                energy_drift=_relative(second_moment(f), energy0),
                entropy_increase_flag=ent > prev_entropy + ENTROPY_TOL * max(1.0, abs(prev_entropy)),
                min_f=min_since_record,
            )
            traj.records.append(rec)
            if monitor is not None:
                monitor(rec, f, coeffs)
            prev_entropy = ent
            min_since_record = math.inf
            if abs(rec.mass_drift) > MASS_ABORT:
                traj.status = "aborted"
                traj.message = f"mass drift {rec.mass_drift:+.6g} exceeds {MASS_ABORT:g} at t={t:.6g}"
                break
    traj.steps = nstep
    traj.final = ScalarField(grid, values)
    if traj.status == "aborted":
        log.warning("evolve aborted: %s", traj.message)
    return traj


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for rec in traj.records:
            w.writerow([repr(float(x)) for x in rec.row()])


def read_trajectory_csv(path) -> np.ndarray:
    """Rows as a ``(nrec, 9)`` float array in :data:`TRAJECTORY_COLUMNS` order."""
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != TRAJECTORY_COLUMNS:
            raise ValueError(f"unexpected trajectory header {header}")
        return np.loadtxt(fh, delimiter=",", ndmin=2)
