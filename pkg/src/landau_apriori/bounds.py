"""Explicit constants ``K``, ``T`` and the capped envelope ``m(t)``.

For the power variant

    K^p = C1 (1+Lambda)^(d+1) N / delta
    T   = ((1+Lambda) / (C K^alpha))^(1 / (1 - alpha d / (2p)))

and for the log-corrected borderline variant (``p = 1``, ``alpha = 2/d``)

    K = C1 N (1+Lambda)^(d+1) / delta
    T = K^(2/d) exp(-(2/d) (C2 K^(2/d) / (1+Lambda))^(1/eps))

The envelope is ``K t^(-d/(2p))`` up to ``T`` and constant afterwards.  ``T``
is carried as its logarithm so the log variant, whose ``T`` is routinely far
below the smallest double, stays representable.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimates import FittedEllipticity, lp_interp_interval

__all__ = [
    "BoundParams",
    "Envelope",
    "VARIANTS",
    "compute_envelope",
    "envelope_at",
    "landau_bound_params",
    "conditional_bound_params",
    "envelope_check",
    "conditional_kappa_floor",
]

VARIANTS = ("power", "logCorrected")


@dataclass(frozen=True)
class BoundParams:
    d: int
    p: float
    alpha: float
    beta: float
    kappa: float
    delta: float
    Lambda: float
    N: float
    C: float
    C1: float = 10.0
    C2: float = 10.0
    eps: float = 1.0
    variant: str = "power"

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        for name in ("delta", "Lambda", "N", "C", "C1", "C2", "eps"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.beta < -self.kappa / self.d:
            raise ValueError(f"need beta >= -kappa/d, got beta={self.beta}, kappa={self.kappa}")
        if self.variant == "power" and not self.alpha < 2 * self.p / self.d:
            raise ValueError(
                f"alpha={self.alpha} must be below 2p/d={2 * self.p / self.d}; the self-similar "
                "blow-up construction shows no bound of this form exists at or above it"
            )


@dataclass(frozen=True)
class Envelope:
    """Capped envelope ``m(t) = K min(t, T)^(-exponent)``."""

    K: float
    log_T: float
    exponent: float
    variant: str = "power"
    # T evaluated in linear arithmetic when that neither overflows nor
    # underflows; exact for the hand-checkable cases where exp(log_T) is not
    linear_T: float | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError(f"K must be positive, got {self.K}")
        if math.isnan(self.log_T):
            raise ValueError("log_T is NaN")

    @property
    def T(self) -> float:
        if self.linear_T is not None and 0.0 < self.linear_T < math.inf:
            return self.linear_T
        return math.exp(self.log_T) if self.log_T < 709.0 else math.inf

    @property
    def cap(self) -> float:
        """Value for ``t >= T``."""
        return _k_pow(self.K, self.exponent, self.log_T)

    def value(self, t: float) -> float:
        if not t > 0:
            raise ValueError(f"envelope needs t > 0, got {t}")
        return _k_pow(self.K, self.exponent, min(math.log(t), self.log_T))

    def to_dict(self, params: BoundParams | None = None) -> dict:
        out = {"variant": self.variant, "K": self.K, "T": self.T, "logT": self.log_T, "exponent": self.exponent}
        if params is not None:
            out["params"] = asdict(params)
        return out

    def to_json(self, params: BoundParams | None = None, path=None) -> str:
        text = json.dumps(self.to_dict(params), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _k_pow(K: float, exponent: float, log_t: float) -> float:
    # K * t^(-exponent) evaluated as exp(log K - exponent log t), saturating at inf
    log_value = math.log(K) - exponent * log_t
    return math.exp(log_value) if log_value < 709.0 else math.inf


def envelope_at(env: Envelope, t: float) -> float:
    return env.value(t)


def compute_envelope(params: BoundParams, variant: str | None = None) -> Envelope:
    variant = variant or params.variant
    d, p = params.d, params.p
    onep = 1.0 + params.Lambda
    if variant == "power":
        if not params.alpha < 2 * p / d:
            raise ValueError(
                f"alpha={params.alpha} must be below 2p/d={2 * p / d}; the self-similar blow-up "
                "construction shows the bound fails at or above it"
            )
        Kp = params.C1 * onep ** (d + 1) * params.N / params.delta
        K = Kp ** (1.0 / p)
        e = 1.0 / (1.0 - params.alpha * d / (2.0 * p))
        log_T = (math.log(onep) - math.log(params.C) - params.alpha * math.log(K)) * e
        try:
            linear_T = (onep / params.C) ** e * K ** (-params.alpha * e)
        except OverflowError:
            linear_T = None
        return Envelope(K=K, log_T=log_T, exponent=d / (2.0 * p), variant="power", linear_T=linear_T)
    if variant == "logCorrected":
        if not params.eps > 0:
            raise ValueError(f"eps must be positive, got {params.eps}")
        K = params.C1 * params.N * onep ** (d + 1) / params.delta
        inner = params.C2 * K ** (2.0 / d) / onep
        log_T = (2.0 / d) * math.log(K) - (2.0 / d) * inner ** (1.0 / params.eps)
        return Envelope(K=K, log_T=log_T, exponent=d / 2.0, variant="logCorrected")
    raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")


def landau_bound_params(
    gamma: float,
    d: int,
    M0: float,
    E0: float,
    fitted: FittedEllipticity,
    C1: float = 10.0,
    C2: float = 10.0,
) -> BoundParams:
    """Theorem parameters for ``gamma in [-2, 0]``.

    ``(-2, 0]``: power variant with ``alpha = -gamma/d``, ``p = 1``,
    ``beta = 2 + gamma``, ``kappa = 2``.  ``gamma = -2`` (``d >= 3`` only):
    log-corrected variant with ``eps = (d-2)/4``, ``beta = 0``, ``kappa = 2``.
    In both cases ``N = 2 M0 + 2 E0`` bounds ``int (1+|v|)^2 f``.
    """
    if not (-2 <= gamma <= 0):
        raise ValueError(f"gamma must lie in [-2, 0], got {gamma}")
    N = 2.0 * M0 + 2.0 * E0
    common = dict(d=d, delta=fitted.delta, Lambda=fitted.Lambda, N=N, C=fitted.C_c, C1=C1, C2=C2)
    if gamma == -2:
        if d < 3:
            raise ValueError(f"gamma = -2 uses the log-corrected bound, which needs d >= 3 (got d={d})")
        return BoundParams(p=1.0, alpha=2.0 / d, beta=0.0, kappa=2.0, eps=(d - 2) / 4.0, variant="logCorrected", **common)
    return BoundParams(p=1.0, alpha=-gamma / d, beta=2.0 + gamma, kappa=2.0, variant="power", **common)


def conditional_kappa_floor(d: int, gamma: float, p: float) -> float:
    """Strict lower bound on ``kappa`` for the very soft conditional bound."""
    return max(p * (2 + gamma + d) - d, 2 + 0.5 * d * d * (1 - 1 / p) - d * (1 + gamma / 2))


def conditional_bound_params(
    gamma: float,
    d: int,
    p: float,
    kappa: float,
    W0: float,
    delta: float,
    Lambda: float,
    C: float,
    C1: float = 10.0,
    C2: float = 10.0,
) -> BoundParams:
    """Parameters for ``gamma in [-d, -2)`` given a weighted ``L^p`` bound ``W0``.

    ``alpha = 1 - p(d+gamma)/d`` and ``beta = (2 + gamma + d - d/p)/2``.
    """
    if not (-d <= gamma < -2):
        raise ValueError(f"gamma must lie in [-d, -2) = [{-d}, -2), got {gamma}")
    lo, hi = lp_interp_interval(d, gamma)
    if not p > lo:
        raise ValueError(f"violates p > d/(d+2+gamma) = {lo}: p = {p}")
    if not p < hi:
        raise ValueError(f"violates p < d/(d+gamma) = {hi}: p = {p}")
    floor = conditional_kappa_floor(d, gamma, p)
    if not kappa > floor:
        raise ValueError(
            f"violates kappa > max(p(2+gamma+d)-d, 2+(d^2/2)(1-1/p)-d(1+gamma/2)) = {floor}: kappa = {kappa}"
        )
    alpha = 1.0 - p * (d + gamma) / d
    beta = (2.0 + gamma + d - d / p) / 2.0
    if not (0 < beta < 1):
        raise AssertionError(f"beta={beta} left (0, 1) for admissible p; formula inconsistency")
    if not alpha < 2 * p / d:
        raise AssertionError(f"alpha={alpha} is not below 2p/d for admissible p; formula inconsistency")
    return BoundParams(
        d=d, p=p, alpha=alpha, beta=beta, kappa=kappa, delta=delta, Lambda=Lambda, N=W0, C=C, C1=C1, C2=C2
    )


def envelope_check(trajectory, env: Envelope) -> tuple[float, bool]:
    """Worst ``supF(t) / m(t)`` over the records and whether it stays at or below 1."""
    records = list(trajectory)
    if not records:
        raise ValueError("trajectory is empty")
    times = np.array([r.t for r in records])
    if np.any(times <= 0):
        raise ValueError("trajectory times must be positive")
    if np.any(np.diff(times) <= 0):
        raise ValueError("trajectory times must be strictly increasing")
    worst = max(r.sup_f / env.value(r.t) for r in records)
    return float(worst), bool(worst <= 1.0)
