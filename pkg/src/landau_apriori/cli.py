"""Batch command line: ``landau-apriori {coeffs,verify,evolve,counterexample}``.

Exit codes: 0 when every check passes, 1 when checks ran and something
failed, 2 for configuration or usage errors.  Every subcommand writes
``manifest.json`` into the output directory with the resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, core
from .bounds import (
    compute_envelope,
    conditional_bound_params,
    envelope_check,
    landau_bound_params,
)
from .coefficients import (
    KernelParams,
    compute_coefficients,
    divergence_identity_residual,
    write_coefficients_csv,
    write_spectral_csv,
)
from .config import ConfigError, apply_overrides, default_config, load_config
from .counterexample import SelfSimilarFamily, calibrate_profile, verify_self_similar
from .estimates import (
    fitted_ellipticity,
    lp_interp_interval,
    thick_set_params,
    verify_abar_bounds,
    verify_cbar_bound,
    verify_thick_set,
)
from .grid import (
    ScalarField,
    VelocityGrid,
    bimodal,
    bump_init,
    maxwellian,
    read_field_csv,
    summarize,
    write_field_csv,
)
from .solver import SolverConfig, evolve, write_trajectory_csv

log = logging.getLogger("landau_apriori")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump(path: Path, payload) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=1, sort_keys=False) + "\n")


def build_grid(cfg) -> VelocityGrid:
    g = cfg["grid"]
    try:
        return VelocityGrid(g["d"], g["L"], g["n"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_kernel(cfg, d: int) -> KernelParams:
    k = cfg["kernel"]
    try:
        params = KernelParams(k["gamma"], k["a"], k["c"], k["cell_rule"])
        params.check_dimension(d)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return params


def build_field(cfg, grid: VelocityGrid, seed: int) -> ScalarField:
    init = cfg["init"]
    kind = init["kind"]
    try:
        if kind == "maxwellian":
            return maxwellian(grid)
        if kind == "zero":
            return ScalarField(grid, np.zeros(grid.shape))
        if kind == "bump":
            return bump_init(grid, init["center"], init["radius"], init["height"])
        if kind == "bimodal":
            centers = init["centers"]
            if centers is None:
                # random placement, reproducible through --seed
                rng = np.random.default_rng(seed)
                span = max(grid.L - init["radius"], 0.0) / 2
                centers = rng.uniform(-span, span, size=(init["count"], grid.d))
            return bimodal(grid, centers, init["radius"], init["height"])
        if kind == "file":
            if not init["path"]:
                raise ConfigError("init.kind = file needs init.path")
            f = read_field_csv(init["path"])
            if f.grid != grid:
                raise ConfigError(f"field file grid {f.grid} differs from configured grid {grid}")
            return f
    except (ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad initial field: {exc}") from None
    raise ConfigError(f"init.kind must be maxwellian, bump, bimodal, zero or file; got {kind!r}")


# ---------------------------------------------------------------- subcommands


def run_coeffs(cfg, out: Path, seed: int) -> tuple[int, dict]:
    grid = build_grid(cfg)
    params = build_kernel(cfg, grid.d)
    f = build_field(cfg, grid, seed)
    coeffs = compute_coefficients(f, params)
    write_field_csv(f, out / "field.csv")
    write_coefficients_csv(coeffs, out / "coefficients.csv")
    write_spectral_csv(coeffs, out / "spectral.csv")
    return EXIT_OK, {"outputs": ["field.csv", "coefficients.csv", "spectral.csv"]}


def _cbar_variants(cfg, gamma: float, d: int) -> list[str]:
    requested = cfg["verify"]["cbar_variants"]
    lo, hi = lp_interp_interval(d, gamma)
    admissible = {
        "plain": -d <= gamma <= 0,
        "logImproved": -d < gamma < 0,
        "lpInterp": hi > max(lo, 1.0),
    }
    if requested == "auto":
        return [v for v, ok in admissible.items() if ok]
    variants = [v.strip() for v in requested.split(",") if v.strip()]
    for v in variants:
        if v not in admissible:
            raise ConfigError(f"unknown cbar variant {v!r}")
        if not admissible[v]:
            raise ConfigError(f"cbar variant {v} is not admissible at gamma={gamma}, d={d}")
    return variants


def _lp_p(cfg, gamma: float, d: int) -> float:
    lo, hi = lp_interp_interval(d, gamma)
    p = cfg["verify"]["lp_p"]
    if p is None:
        lo = max(lo, 1.0)
        p = 0.5 * (lo + hi) if math.isfinite(hi) else lo + 1.0
    if not (lo < p < hi) or p < 1:
        raise ConfigError(f"verify.lp_p={p} must lie in ({lo}, {hi}) and be >= 1")
    return p


def run_verify(cfg, out: Path, seed: int) -> tuple[int, dict]:
    grid = build_grid(cfg)
    params = build_kernel(cfg, grid.d)
    gamma, d = params.gamma, grid.d
    variants = _cbar_variants(cfg, gamma, d)
    f = build_field(cfg, grid, seed)
    summary = summarize(f)
    coeffs = compute_coefficients(f, params)
    results = {}

    M1 = cfg["bounds"]["M1"] if cfg["bounds"]["M1"] is not None else summary.mass
    if summary.mass > 0:
        try:
            ts = thick_set_params(summary, M1, d)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        measure, ok = verify_thick_set(f, ts)
        thick = {"R": ts.R, "ell": ts.ell, "mu": ts.mu, "T": ts.T_threshold, "measuredMeasure": measure, "pass": ok}
    else:
        thick = {"measuredMeasure": 0.0, "pass": False, "reason": "field has zero mass"}
    _dump(out / "thick_set.json", thick)
    results["thickSet"] = thick["pass"]

    regime = "moderatelySoft" if gamma >= -2 else "verySoft"
    abar = verify_abar_bounds(coeffs, gamma, regime, summary.sup_norm)
    _dump(out / "abar_bounds.json", abar.to_dict())
    results["abarBounds"] = abar.passed

    for variant in variants:
        p = _lp_p(cfg, gamma, d) if variant == "lpInterp" else None
        rep = verify_cbar_bound(coeffs, f, gamma, variant, p)
        ok = bool(math.isfinite(rep.fitted_constant))
        payload = rep.to_dict()
        payload["pass"] = ok
        _dump(out / f"cbar_{variant}.json", payload)
        results[f"cbar-{variant}"] = ok

    if grid.n >= 5:
        residual = divergence_identity_residual(coeffs)
        tol = cfg["verify"]["div_tol"]
        _dump(out / "divergence.json", {"residual": residual, "tolerance": tol, "pass": residual < tol})
        results["divergenceIdentity"] = residual < tol

    all_ok = all(results.values())
    _dump(out / "verify.json", {"checks": results, "pass": all_ok})
    return (EXIT_OK if all_ok else EXIT_FAIL), {"checks": results}


def _bound_params(cfg, params: KernelParams, f: ScalarField, coeffs, summary):
    d = f.grid.d
    gamma = params.gamma
    b = cfg["bounds"]
    try:
        if gamma >= -2:
            if gamma == -2 and d < 3:
                raise ConfigError("gamma = -2 uses the log-corrected bound, which needs d >= 3")
            if gamma == -2:
                alpha, beta, kappa = 2.0 / d, 0.0, 2.0
            else:
                alpha, beta, kappa = -gamma / d, 2.0 + gamma, 2.0
            fit = fitted_ellipticity(coeffs, summary.sup_norm, alpha, beta, kappa)
            return landau_bound_params(gamma, d, summary.mass, summary.energy, fit, b["C1"], b["C2"]), fit
        if b["W0"] is None or b["p"] is None or b["kappa"] is None:
            raise ConfigError("gamma < -2 needs bounds.W0, bounds.p and bounds.kappa for the conditional bound")
        p = b["p"]
        alpha = 1.0 - p * (d + gamma) / d
        beta = (2.0 + gamma + d - d / p) / 2.0
        fit = fitted_ellipticity(coeffs, summary.sup_norm, alpha, beta, b["kappa"])
        bp = conditional_bound_params(
            gamma, d, p, b["kappa"], b["W0"], fit.delta, fit.Lambda, fit.C_c, b["C1"], b["C2"]
        )
        return bp, fit
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def run_evolve(cfg, out: Path, seed: int) -> tuple[int, dict]:
    grid = build_grid(cfg)
    params = build_kernel(cfg, grid.d)
    s = cfg["solver"]
    try:
        sconf = SolverConfig(
            grid=grid,
            kernel=params,
            t_end=s["t_end"],
            cfl_safety=s["cfl_safety"],
            refresh_every=s["refresh_every"],
            record_every=s["record_every"],
            clamp_negatives=s["clamp_negatives"],
            reaction=s["reaction"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    f0 = build_field(cfg, grid, seed)
    summary = summarize(f0)
    if summary.mass <= 0:
        raise ConfigError("initial field has zero mass")
    coeffs0 = compute_coefficients(f0, params)
    bparams, fit = _bound_params(cfg, params, f0, coeffs0, summary)
    env = compute_envelope(bparams)
    env_payload = env.to_dict(bparams)
    env_payload["fitted"] = {"delta": fit.delta, "Lambda": fit.Lambda, "C_c": fit.C_c}

    traj = evolve(f0, sconf, envelope=env)
    write_trajectory_csv(traj, out / "trajectory.csv")
    worst, env_ok = envelope_check(traj, env) if len(traj) else (math.nan, False)
    env_payload.update({"worstRatio": worst, "pass": env_ok})
    _dump(out / "envelope.json", env_payload)

    ev = cfg["evolve"]
    mass_dev = max((abs(r.mass_drift) for r in traj), default=math.inf)
    energy_dev = max((abs(r.energy_drift) for r in traj), default=math.inf)
    flags = sum(r.entropy_increase_flag for r in traj)
    checks = {
        "completed": traj.status == "completed",
        "envelope": env_ok,
        "massDrift": mass_dev < ev["mass_tol"],
        "energyDrift": energy_dev < ev["energy_tol"],
        "entropyMonotone": flags == 0,
    }
    info = {
        "checks": checks,
        "status": traj.status,
        "message": traj.message,
        "steps": traj.steps,
        "maxMassDrift": mass_dev,
        "maxEnergyDrift": energy_dev,
        "entropyIncreaseRecords": flags,
        "approximateRefresh": traj.approximate_refresh,
        "cflFallback": traj.cfl_fallback,
        "outputs": ["trajectory.csv", "envelope.json"],
    }
    if traj.status != "completed":
        log.error("run aborted: %s", traj.message)
    return (EXIT_OK if all(checks.values()) else EXIT_FAIL), info


def run_counterexample(cfg, out: Path, seed: int) -> tuple[int, dict]:
    c = cfg["counterexample"]
    try:
        cal = calibrate_profile(c["d"], c["p"], c["alpha"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    family = SelfSimilarFamily.from_calibration(cal)
    try:
        report = verify_self_similar(family, c["t_grid"], c["samples"], delta_shell=cal.delta_shell)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report.to_json(path=out / "counterexample.json")
    ok = report.max_residual <= 0 and report.lp_deviation <= 1e-6
    return (EXIT_OK if ok else EXIT_FAIL), {"margin": cal.margin, "outputs": ["counterexample.json"]}


COMMANDS = {
    "coeffs": run_coeffs,
    "verify": run_verify,
    "evolve": run_evolve,
    "counterexample": run_counterexample,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="landau-apriori",
        description="Landau coefficients, a priori envelopes and their numerical checks.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="flat 'section.key = value' config file")
    common.add_argument("--out", type=str, default="out", help="output directory (created if missing)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for the convolution (1 = serial)")
    common.add_argument("--seed", type=int, default=0, help="seed for random bump placement (unsigned 64-bit)")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override a config entry"
    )
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("coeffs", parents=[common], help="write coefficient and spectral CSVs for an initial field")
    sub.add_parser("verify", parents=[common], help="check the coefficient lemmas and the thick-set recipe")
    sub.add_parser("evolve", parents=[common], help="run the solver and check the a priori envelope")
    sub.add_parser("counterexample", parents=[common], help="calibrate and verify the self-similar blow-up")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not (0 <= args.seed < 2**64):
        ap.error("--seed must be an unsigned 64-bit integer")
    if args.threads < 1:
        ap.error("--threads must be >= 1")
    core.set_threads(args.threads)
    out = Path(args.out)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        apply_overrides(cfg, args.overrides)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError) as exc:
        print(f"landau-apriori: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    started = time.perf_counter()
    try:
        code, info = COMMANDS[args.command](cfg, out, args.seed)
    except ConfigError as exc:
        print(f"landau-apriori {args.command}: {exc}", file=sys.stderr)
        code, info = EXIT_CONFIG, {"error": str(exc)}
    manifest = {
        "command": args.command,
        "version": __version__,
        "backend": core.BACKEND,
        "threads": args.threads,
        "seed": args.seed,
        "config": cfg,
        "exitCode": code,
        "elapsedSeconds": round(time.perf_counter() - started, 3),
        **info,
    }
    _dump(out / "manifest.json", manifest)
    if code == EXIT_FAIL:
        failed = [k for k, v in info.get("checks", {}).items() if not v]
        print(f"landau-apriori {args.command}: checks failed: {', '.join(failed) or 'see outputs'}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
