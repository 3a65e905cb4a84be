"""Self-similar blow-up for ``f_t <= lap f + f^(1+alpha)`` when ``alpha >= 2p/d``.

With a radial bump ``phi`` and ``tau = 1 - t``,

    f(t, x) = tau^(-d/(2p)) phi(x / sqrt(tau))

keeps ``|f(t)|_p`` constant, blows up at the origin as ``t -> 1``, and is a
subsolution as soon as ``phi`` satisfies the stationary inequality

    (d/(2p)) phi + (1/2) y . grad phi <= lap phi + phi^(1+alpha).

The profile is ``phi = k exp(1 - 1/(1 - r^2))``.  Writing ``phi = k e^g`` with
``g = 1 - 1/s`` and ``s = 1 - r^2`` gives closed forms for ``phi'/phi`` and
``lap phi / phi``; every check is done on these ratios so nothing underflows
near ``r = 1``, where ``phi`` itself is below the smallest double.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .bounds import Envelope
from .grid import sphere_area

__all__ = [
    "BumpProfile",
    "SelfSimilarFamily",
    "Calibration",
    "SelfSimilarReport",
    "limit_condition_check",
    "calibrate_profile",
    "verify_self_similar",
    "predicted_failure_time",
    "envelope_failure_time",
    "SHELL_SCAN",
    "AMPLITUDE_SCAN",
]

SHELL_SCAN = 20  # delta_shell = 2^-1 .. 2^-20
AMPLITUDE_SCAN = 40  # k = 2^0 .. 2^40
CHECK_SAMPLES = 10_000


@dataclass(frozen=True)
class BumpProfile:
    k: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"amplitude must be positive, got {self.k}")

    def value(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        s = 1.0 - r * r
        inside = s > 0
        out = np.zeros_like(r)
        out[inside] = self.k * np.exp(1.0 - 1.0 / s[inside])
        return out

    @staticmethod
    def log_derivative(r) -> np.ndarray:
        """``phi'(r) / phi(r)`` for ``r < 1``."""
        r = np.asarray(r, dtype=float)
        s = 1.0 - r * r
        return -2.0 * r / s**2

    @staticmethod
    def laplacian_ratio(r, d: int) -> np.ndarray:
        """``lap phi / phi`` in ``R^d`` for ``r < 1`` (finite at ``r = 0``, where it is ``-2d``)."""
        r = np.asarray(r, dtype=float)
        s = 1.0 - r * r
        g1 = -2.0 * r / s**2
        g2 = -2.0 / s**2 - 8.0 * r * r / s**3
        # (d-1) g'/r = -2(d-1)/s^2, written without the division so r = 0 is safe
        return g2 + g1 * g1 - 2.0 * (d - 1) / s**2

    def derivative(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = r < 1
        out[inside] = self.value(r[inside]) * self.log_derivative(r[inside])
        return out

    def laplacian(self, r, d: int) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = r < 1
        out[inside] = self.value(r[inside]) * self.laplacian_ratio(r[inside], d)
        return out


def limit_condition_check(profile: BumpProfile, r_grid, d: int = 2) -> tuple[np.ndarray, np.ndarray, bool]:
    """``lap phi / |phi'|`` and ``lap phi / phi`` along a ray.

    Returns both sequences and whether each sets a new running maximum at
    every sample beyond ``r = 0.9`` and exceeds ``1e3`` at the last sample.
    Both ratios are independent of the amplitude.
    """
    del profile  # ratios do not depend on the amplitude
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("r_grid must be a nonempty 1D sequence")
    if np.any(r >= 1) or np.any(r < 0):
        raise ValueError("r_grid must lie in [0, 1)")
    if np.any(np.diff(r) <= 0):
        raise ValueError("r_grid must be increasing")
    lap = BumpProfile.laplacian_ratio(r, d)
    with np.errstate(divide="ignore"):
        by_grad = lap / np.abs(BumpProfile.log_derivative(r))

    def divergent(seq):
        tail = r > 0.9
        if not tail.any() or seq[-1] <= 1e3:
            return False
        running = np.maximum.accumulate(seq)
        idx = np.flatnonzero(tail)
        # each tail sample must beat everything before it
        return bool(all(i == 0 or seq[i] > running[i - 1] for i in idx))

    return by_grad, lap, divergent(by_grad) and divergent(lap)


def _stationary_gap(r: np.ndarray, d: int, p: float) -> np.ndarray:
    """``lap phi/phi - d/(2p) - (r/2) phi'/phi``: the linear part of the inequality, per unit ``phi``."""
    return BumpProfile.laplacian_ratio(r, d) - d / (2 * p) - 0.5 * r * BumpProfile.log_derivative(r)


def _check_radii(lo: float, hi: float, samples: int = CHECK_SAMPLES) -> np.ndarray:
    r = np.linspace(lo, hi, samples + 1)
    return r[r < 1.0]


@dataclass(frozen=True)
class Calibration:
    k: float
    delta_shell: float
    alpha: float
    d: int
    p: float
    margin: float  # min over check nodes of (rhs - lhs) / phi

    @property
    def profile(self) -> BumpProfile:
        return BumpProfile(self.k)


def _margin(r: np.ndarray, k: float, d: int, p: float, alpha: float) -> np.ndarray:
    # (rhs - lhs)/phi for the k-scaled profile; phi^alpha = (k e^g)^alpha
    s = 1.0 - r * r
    log_phi = math.log(k) + 1.0 - 1.0 / s
    return _stationary_gap(r, d, p) + np.exp(alpha * log_phi)


def calibrate_profile(d: int, p: float, alpha: float) -> Calibration:
    """Shell width where the linear terms alone suffice, then an amplitude for the inside.

    ``delta_shell`` is the largest ``2^-m`` (``m <= 20``) for which the linear
    inequality holds on ``[1 - delta_shell, 1)``; ``k`` is the smallest ``2^j``
    (``j <= 40``) making the full inequality hold on ``[0, 1 - delta_shell]``.
    Both are verified on 10^4 radii, and the final margin is taken over the
    union of both ranges so the interface is covered by both mechanisms.
    """
    if d not in (1, 2, 3):
        raise ValueError(f"d must be 1, 2 or 3, got {d}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if alpha < 2 * p / d:
        raise ValueError(f"alpha={alpha} is below 2p/d={2 * p / d}; the blow-up family needs alpha >= 2p/d")
    delta = None
    for m in range(1, SHELL_SCAN + 1):
        cand = 2.0**-m
        if np.all(_stationary_gap(_check_radii(1.0 - cand, 1.0), d, p) > 0):
            delta = cand
            break
    if delta is None:
        raise RuntimeError(f"no shell width 2^-m with m <= {SHELL_SCAN} satisfies the linear inequality")
    inner = _check_radii(0.0, 1.0 - delta)
    for j in range(AMPLITUDE_SCAN + 1):
        k = 2.0**j
        if np.all(_margin(inner, k, d, p, alpha) > 0):
            break
    else:
        raise RuntimeError(f"no amplitude 2^j with j <= {AMPLITUDE_SCAN} satisfies the inner inequality")
    everywhere = np.concatenate([inner, _check_radii(1.0 - delta, 1.0)])
    margin = float(_margin(everywhere, k, d, p, alpha).min())
    return Calibration(k=k, delta_shell=delta, alpha=alpha, d=d, p=p, margin=margin)


@dataclass(frozen=True)
class SelfSimilarFamily:
    profile: BumpProfile
    p: float
    alpha: float
    d: int
    calibrated: bool = False

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.alpha < 2 * self.p / self.d:
            raise ValueError(
                f"alpha={self.alpha} is below 2p/d={2 * self.p / self.d}; the blow-up family needs alpha >= 2p/d"
            )

    @classmethod
    def from_calibration(cls, cal: Calibration) -> "SelfSimilarFamily":
        return cls(BumpProfile(cal.k), cal.p, cal.alpha, cal.d, calibrated=True)

    @property
    def exponent(self) -> float:
        return self.d / (2 * self.p)

    def value(self, t: float, r) -> np.ndarray:
        tau = 1.0 - t
        return tau**-self.exponent * self.profile.value(np.asarray(r, dtype=float) / math.sqrt(tau))

    def at_origin(self, t: float) -> float:
        return self.profile.k * (1.0 - t) ** -self.exponent

    def residual(self, t: float, r) -> np.ndarray:
        """``f_t - lap f - f^(1+alpha)`` at radius ``r``, time ``t``."""
        tau = 1.0 - t
        e = self.exponent
        y = np.asarray(r, dtype=float) / math.sqrt(tau)
        out = np.zeros_like(y)
        inside = y < 1
        yi = y[inside]
        phi = self.profile.value(yi)
        bracket = e + 0.5 * yi * BumpProfile.log_derivative(yi) - BumpProfile.laplacian_ratio(yi, self.d)
        growth = tau ** (1.0 - self.d * self.alpha / (2 * self.p))
        s = 1.0 - yi * yi
        phi_alpha = np.exp(self.alpha * (math.log(self.profile.k) + 1.0 - 1.0 / s))
        out[inside] = tau ** (-e - 1.0) * phi * (bracket - growth * phi_alpha)
        return out

    def lp_norm(self, t: float) -> float:
        """``|f(t)|_p`` by adaptive radial quadrature over the support ``|x| < sqrt(1-t)``."""
        rmax = math.sqrt(1.0 - t)
        integrand = lambda r: float(self.value(t, np.array([r]))[0]) ** self.p * r ** (self.d - 1)  # noqa: E731
        val, _ = integrate.quad(integrand, 0.0, rmax, epsabs=0.0, epsrel=1e-13, limit=200)
        return (sphere_area(self.d) * val) ** (1.0 / self.p)


@dataclass(frozen=True)
class SelfSimilarReport:
    k: float
    delta_shell: float
    max_residual: float
    lp_deviation: float
    blowup_samples: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "deltaShell": self.delta_shell,
            "maxResidual": self.max_residual,
            "lpDeviation": self.lp_deviation,
            "blowupSamples": [{"t": t, "fAt0": v} for t, v in self.blowup_samples],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def verify_self_similar(
    family: SelfSimilarFamily,
    t_grid,
    radial_samples: int = CHECK_SAMPLES,
    delta_shell: float = math.nan,
) -> SelfSimilarReport:
    """Residual sign, ``L^p`` constancy and growth at the origin on sampled times."""
    if not family.calibrated:
        raise ValueError("family is not calibrated; build it with SelfSimilarFamily.from_calibration")
    ts = np.asarray(t_grid, dtype=float)
    if ts.size == 0 or np.any(ts <= 0) or np.any(ts >= 1):
        raise ValueError("t_grid must be a nonempty subset of (0, 1)")
    max_res = -math.inf
    norms = []
    for t in ts:
        r = np.linspace(0.0, math.sqrt(1.0 - t), radial_samples, endpoint=False)
        max_res = max(max_res, float(family.residual(t, r).max()))
        norms.append(family.lp_norm(t))
    norms = np.array(norms)
    dev = float(np.max(np.abs(norms / norms[0] - 1.0)))
    samples = [(float(t), family.at_origin(float(t))) for t in ts]
    return SelfSimilarReport(
        k=family.profile.k, delta_shell=delta_shell, max_residual=max_res, lp_deviation=dev, blowup_samples=samples
    )


def predicted_failure_time(family: SelfSimilarFamily, level: float) -> float:
    """First time ``f(t, 0)`` exceeds a constant level: ``1 - (k/level)^(2p/d)`` (0 if already above)."""
    if not level > 0:
        raise ValueError(f"level must be positive, got {level}")
    k = family.profile.k
    if level <= k:
        return 0.0
    return 1.0 - (k / level) ** (1.0 / family.exponent)


def envelope_failure_time(family: SelfSimilarFamily, env: Envelope) -> float:
    """First ``t`` in ``(0, 1)`` at which ``f(t, 0) > m(t)``.

    Before ``T`` the envelope decays like ``t^(-d/(2p))``, which ``f(t,0)``
    overtakes at ``t = rho/(1+rho)`` with ``rho = (K/k)^(2p/d)``; after ``T``
    the envelope is the constant cap.
    """
    k, e = family.profile.k, family.exponent
    rho = (env.K / k) ** (1.0 / e)
    t_cross = rho / (1.0 + rho)
    if t_cross <= env.T:
        return t_cross
    return max(env.T, predicted_failure_time(family, env.cap))
