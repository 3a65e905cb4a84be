"""Numerical checks of the coefficient bounds and the thick-set construction.

The lemmas behind these checks only assert that constants exist, so every
check *fits* its constant on the grid: the smallest ``C`` with
``measured <= C * majorant`` at every node, or the largest ``c`` with
``measured >= c * majorant``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientField, spectral_diagnostics
from .grid import PhysicalSummary, ScalarField, ball_volume, integrate, lp_kappa_norm

__all__ = [
    "ThickSetParams",
    "BoundCheckReport",
    "AbarBoundCheck",
    "FittedEllipticity",
    "thick_set_params",
    "verify_thick_set",
    "verify_abar_bounds",
    "verify_cbar_bound",
    "fitted_ellipticity",
    "lp_interp_interval",
]

REGIMES = ("moderatelySoft", "verySoft")
CBAR_VARIANTS = ("plain", "logImproved", "lpInterp")


@dataclass(frozen=True)
class ThickSetParams:
    R: float
    ell: float
    mu: float
    T_threshold: float

    def __post_init__(self):
        for name in ("R", "ell", "mu", "T_threshold"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")


def thick_set_params(summary: PhysicalSummary, M1: float, d: int) -> ThickSetParams:
    """Radius, density level and measure from mass, energy and ``int f log(1+f)``.

    ``R`` puts at least half of ``M1`` inside the ball, ``ell`` caps what the
    low-density part can carry, and ``T_threshold`` caps what the high-density
    part can carry via the entropy bound.
    """
    # allow M1 to equal a mass that differs from it by quadrature rounding
    if not (0 < M1 <= summary.mass * (1 + 1e-12)):
        raise ValueError(f"M1 must lie in (0, mass={summary.mass}], got {M1}")
    if not (math.isfinite(summary.energy) and math.isfinite(summary.entropy_prime)):
        raise ValueError("energy and entropy_prime must be finite")
    R = math.sqrt(2.0 * summary.energy / M1)
    ell = M1 / (4.0 * ball_volume(d, R))
    try:
        T = math.expm1(8.0 * summary.entropy_prime / M1)
    except OverflowError:
        raise ValueError(f"T_threshold = exp(8 H/M1) - 1 overflows for M1={M1}") from None
    return ThickSetParams(R=R, ell=ell, mu=M1 / (8.0 * T), T_threshold=T)


def verify_thick_set(f: ScalarField, params: ThickSetParams, center=None) -> tuple[float, bool]:
    """Node-count measure of ``{|v - center| <= R, f >= ell}`` and whether it reaches ``mu``."""
    g = f.grid
    if center is None:
        r = g.radius()
    else:
        c = np.broadcast_to(np.asarray(center, dtype=float), (g.d,))
        r = np.sqrt(sum((x - x0) ** 2 for x, x0 in zip(g.coordinates(), c)))
    count = int(np.count_nonzero((r <= params.R) & (f.values >= params.ell)))
    measure = count * g.cell_volume
    return measure, measure >= params.mu


@dataclass(frozen=True)
class BoundCheckReport:
    """Per-node samples of one bound and the constant fitted to them.

    ``kind`` is ``"upper"`` (fit the smallest C) or ``"lower"`` (fit the
    largest c).  ``passed`` is None unless a constant was supplied to compare
    against, or the check has its own criterion.
    """

    lemma: str
    gamma: float
    kind: str
    abs_v: np.ndarray = field(repr=False)
    measured: np.ndarray = field(repr=False)
    majorant: np.ndarray = field(repr=False)
    fitted_constant: float
    passed: bool | None = None

    def to_dict(self) -> dict:
        return {
            "lemma": self.lemma,
            "gamma": self.gamma,
            "kind": self.kind,
            "samples": [
                {"absV": float(r), "measured": float(m), "majorant": float(b)}
                for r, m, b in zip(self.abs_v, self.measured, self.majorant)
            ],
            "fittedConstant": self.fitted_constant,
            "pass": self.passed,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _fit(lemma, gamma, kind, abs_v, measured, majorant, constant=None) -> BoundCheckReport:
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = measured / majorant
    fitted = float(ratio.max()) if kind == "upper" else float(ratio.min())
    passed = None
    if constant is not None:
        passed = bool(fitted <= constant) if kind == "upper" else bool(fitted >= constant)
    return BoundCheckReport(lemma, float(gamma), kind, abs_v, measured, majorant, fitted, passed)


@dataclass(frozen=True)
class AbarBoundCheck:
    upper: BoundCheckReport
    lower: BoundCheckReport

    @property
    def passed(self) -> bool:
        return bool(self.lower.fitted_constant > 0 and math.isfinite(self.upper.fitted_constant))

    def to_dict(self) -> dict:
        return {"upper": self.upper.to_dict(), "lower": self.lower.to_dict(), "pass": self.passed}


def _check_regime(gamma: float, regime: str, d: int) -> None:
    if regime == "moderatelySoft":
        if not (-2 <= gamma <= 0):
            raise ValueError(f"moderately soft regime needs gamma in [-2, 0], got {gamma}")
    elif regime == "verySoft":
        if not (-d - 2 < gamma < -2):
            raise ValueError(f"very soft regime needs gamma in ({-d - 2}, -2), got {gamma}")
    else:
        raise ValueError(f"regime must be one of {REGIMES}, got {regime!r}")


def verify_abar_bounds(coeffs: CoefficientField, gamma: float, regime: str, sup_f: float) -> AbarBoundCheck:
    """Fit ``|abar| <= C w_up(v)`` and ``det abar >= c (1+|v|)^((d-1)(gamma+2)+gamma)``.

    ``w_up`` is ``1 + |v|^(gamma+2)`` for moderately soft potentials and the
    constant ``sup_f^(-(gamma+2)/d)`` for very soft ones.  The operator norm of
    the symmetric matrix is its largest eigenvalue.
    """
    g = coeffs.grid
    d = g.d
    if g.size == 0:
        raise ValueError("empty grid")
    _check_regime(gamma, regime, d)
    spec = spectral_diagnostics(coeffs)
    r = g.radius().reshape(-1)
    max_eig = spec.max_eig.reshape(-1)
    if regime == "moderatelySoft":
        w_up = 1.0 + r ** (gamma + 2)
    else:
        if not sup_f > 0:
            raise ValueError(f"sup_f must be positive in the very soft regime, got {sup_f}")
        w_up = np.full_like(r, sup_f ** (-(gamma + 2) / d))
    upper = _fit(f"abar-upper-{regime}", gamma, "upper", r, max_eig, w_up)
    w_low = (1.0 + r) ** ((d - 1) * (gamma + 2) + gamma)
    lower = _fit(f"abar-det-lower-{regime}", gamma, "lower", r, spec.det.reshape(-1), w_low)
    return AbarBoundCheck(upper, lower)


def lp_interp_interval(d: int, gamma: float) -> tuple[float, float]:
    """Open interval of admissible ``p`` for the interpolated bound (upper end inf at gamma = -d)."""
    lo = d / (d + 2 + gamma)
    hi = math.inf if d + gamma == 0 else d / (d + gamma)
    return lo, hi


def verify_cbar_bound(
    coeffs: CoefficientField,
    f: ScalarField,
    gamma: float,
    variant: str = "plain",
    p: float | None = None,
    constant: float | None = None,
) -> BoundCheckReport:
    """Fit ``cbar <= C * majorant`` with the majorant of the chosen variant.

    plain:        M0^(1+gamma/d) sup^(-gamma/d)
    logImproved:  sup^(-gamma/d) log(1+sup)^((d+gamma)/(2 gamma))
    lpInterp:     |f|_p^(p(d+gamma)/d) sup^(1-p(d+gamma)/d)
    """
    g = coeffs.grid
    d = g.d
    if variant not in CBAR_VARIANTS:
        raise ValueError(f"variant must be one of {CBAR_VARIANTS}, got {variant!r}")
    if variant == "plain" and not (-d <= gamma <= 0):
        raise ValueError(f"plain variant needs gamma in [-d, 0], got {gamma}")
    if variant == "logImproved" and not (-d < gamma < 0):
        raise ValueError(f"log-improved variant needs gamma in (-d, 0), got {gamma}")
    if variant == "lpInterp":
        lo, hi = lp_interp_interval(d, gamma)
        if p is None or not (lo < p < hi):
            raise ValueError(f"p must lie in the open interval ({lo}, {hi}), got {p}")
    sup = f.sup()
    if sup == 0:
        # zero field: every majorant vanishes and the fitted constant is undefined
        value = 0.0
    elif variant == "plain":
        value = integrate(f) ** (1 + gamma / d) * sup ** (-gamma / d)
    elif variant == "logImproved":
        value = sup ** (-gamma / d) * math.log1p(sup) ** ((d + gamma) / (2 * gamma))
    else:
        s = p * (d + gamma) / d
        value = lp_kappa_norm(f, 0.0, p) ** s * sup ** (1 - s)
    r = g.radius().reshape(-1)
    majorant = np.full_like(r, value)
    return _fit(f"cbar-{variant}", gamma, "upper", r, coeffs.cbar.reshape(-1), majorant, constant)


@dataclass(frozen=True)
class FittedEllipticity:
    """Constants of the envelope theorem fitted on one coefficient field.

    delta: min over nodes of det(abar) / (1+|v|)^(beta d - kappa)
    Lambda: max over nodes of maxEig(abar) / (1+|v|)^(min(2 beta, 2))
    C_c: max over nodes of cbar / sup_f^(alpha)
    """

    delta: float
    Lambda: float
    C_c: float


def fitted_ellipticity(coeffs: CoefficientField, sup_f: float, alpha: float, beta: float, kappa: float) -> FittedEllipticity:
    """Fit the ellipticity and reaction constants that enter ``K`` and ``T``."""
    g = coeffs.grid
    d = g.d
    spec = spectral_diagnostics(coeffs)
    r = g.radius()
    delta = float(np.min(spec.det / (1.0 + r) ** (beta * d - kappa)))
    lam = float(np.max(spec.max_eig / (1.0 + r) ** min(2 * beta, 2.0)))
    if sup_f > 0:
        cc = float(np.max(coeffs.cbar) / sup_f**alpha)
    else:
        cc = 0.0
    return FittedEllipticity(delta=delta, Lambda=lam, C_c=max(cc, 0.0))
