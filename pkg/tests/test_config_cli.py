import json
import subprocess
import sys

import pytest

from landau_apriori.cli import main
from landau_apriori.config import ConfigError, apply_overrides, default_config, load_config, parse_config

# ---------------------------------------------------------------- config grammar


def test_defaults():
    cfg = default_config()
    assert cfg["grid"] == {"d": 2, "L": 8.0, "n": 65}
    assert cfg["kernel"]["gamma"] == -1.0
    assert cfg["kernel"]["c"] is None
    assert cfg["counterexample"]["t_grid"] == (0.1, 0.5, 0.9, 0.99)


def test_parse_values_and_comments():
    cfg = parse_config(
        """
        # comment line
        grid.n = 33          # trailing comment
        kernel.gamma = -0.5
        solver.clamp_negatives = off
        init.centers = -1, 0 ; 1, 0
        bounds.p =
        """
    )
    assert cfg["grid"]["n"] == 33
    assert cfg["kernel"]["gamma"] == -0.5
    assert cfg["solver"]["clamp_negatives"] is False
    assert cfg["init"]["centers"] == ((-1.0, 0.0), (1.0, 0.0))
    assert cfg["bounds"]["p"] is None


@pytest.mark.parametrize(
    "text,match",
    [
        ("grid.m = 3", "unknown key"),
        ("nosection = 3", "section prefix"),
        ("grid.n = three", "bad value"),
        ("grid.n", "expected"),
        ("grid.n = ", "needs a value"),
        ("solver.clamp_negatives = maybe", "bad value"),
    ],
)
def test_parse_errors_name_the_line(text, match):
    with pytest.raises(ConfigError, match=match) as info:
        parse_config(text, "cfg.txt")
    assert "cfg.txt:1" in str(info.value)


def test_load_and_override(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("grid.n = 17\n")
    cfg = load_config(path)
    apply_overrides(cfg, ["grid.L=4", "kernel.gamma = 0"])
    assert (cfg["grid"]["n"], cfg["grid"]["L"], cfg["kernel"]["gamma"]) == (17, 4.0, 0.0)
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["grid.L"])
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.cfg")


# ---------------------------------------------------------------- command line


def run(tmp_path, command, *sets, name="out", extra=()):
    out = tmp_path / name
    argv = [command, "--out", str(out), *extra]
    for s in sets:
        argv += ["--set", s]
    return main(argv), out


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_coeffs_writes_tables(tmp_path):
    code, out = run(tmp_path, "coeffs", "grid.n=17", "grid.L=4")
    assert code == 0
    # each file opens with the grid comment, then index, coordinate and value columns
    widths = {"field.csv": 5, "coefficients.csv": 8, "spectral.csv": 9}
    for name, width in widths.items():
        lines = (out / name).read_text().splitlines()
        assert lines[0] == "# d=2 L=4.0 n=17"
        assert len(lines) == 1 + 17 * 17
        assert {len(row.split(",")) for row in lines[1:]} == {width}
    m = manifest(out)
    assert m["command"] == "coeffs" and m["exitCode"] == 0
    assert m["config"]["grid"]["n"] == 17


def test_gamma_out_of_range_is_config_error(tmp_path):
    assert run(tmp_path, "coeffs", "grid.n=9", "kernel.gamma=-3")[0] == 2
    assert run(tmp_path, "coeffs", "grid.n=9", "kernel.gamma=0.5", name="b")[0] == 2


def test_bad_config_file_exit_code(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("grid.nope = 1\n")
    assert main(["coeffs", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_field_file_round_trip(tmp_path):
    code, first = run(tmp_path, "coeffs", "grid.n=17", "grid.L=4", "init.kind=bump", "init.center=0.5,0")
    assert code == 0
    code, second = run(
        tmp_path, "coeffs", "grid.n=17", "grid.L=4", "init.kind=file", f"init.path={first / 'field.csv'}", name="again"
    )
    assert code == 0
    assert (first / "coefficients.csv").read_bytes() == (second / "coefficients.csv").read_bytes()
    # mismatched grid is rejected
    assert run(tmp_path, "coeffs", "grid.n=9", "init.kind=file", f"init.path={first / 'field.csv'}", name="c")[0] == 2


@pytest.mark.slow
def test_verify_passes_on_fine_grid(tmp_path):
    code, out = run(tmp_path, "verify", "grid.n=129")
    assert code == 0
    summary = json.loads((out / "verify.json").read_text())
    assert summary["pass"]
    for name in ("thick_set.json", "abar_bounds.json", "divergence.json", "cbar_plain.json"):
        assert (out / name).exists()


def test_verify_fails_on_zero_field(tmp_path, capsys):
    code, out = run(tmp_path, "verify", "grid.n=17", "init.kind=zero")
    assert code == 1
    assert "checks failed" in capsys.readouterr().err
    assert not json.loads((out / "verify.json").read_text())["pass"]


def test_verify_rejects_inadmissible_variant(tmp_path):
    assert run(tmp_path, "verify", "grid.n=17", "kernel.gamma=-2", "verify.cbar_variants=logImproved")[0] == 2


def test_evolve_guards(tmp_path):
    assert run(tmp_path, "evolve", "grid.n=17", "kernel.gamma=-2")[0] == 2
    assert run(tmp_path, "evolve", "grid.n=17", "solver.t_end=0", name="b")[0] == 2


def test_evolve_outputs(tmp_path):
    code, out = run(tmp_path, "evolve", "grid.n=17", "grid.L=6", "solver.t_end=0.01", "init.kind=bimodal",
                    "init.centers=-1.5,0;1.5,0", "init.radius=1.5", "solver.record_every=5")
    assert code in (0, 1)
    env = json.loads((out / "envelope.json").read_text())
    assert {"K", "T", "worstRatio", "pass"} <= set(env)
    rows = (out / "trajectory.csv").read_text().splitlines()
    assert rows[0] == "t,supF,mass,energy,entropy,envelope,massDrift,energyDrift,minF"
    assert set(manifest(out)["checks"]) == {"completed", "envelope", "massDrift", "energyDrift", "entropyMonotone"}


def test_counterexample_command(tmp_path):
    code, out = run(tmp_path, "counterexample")
    assert code == 0
    data = json.loads((out / "counterexample.json").read_text())
    assert data["maxResidual"] <= 0 and data["lpDeviation"] <= 1e-6
    assert run(tmp_path, "counterexample", "counterexample.alpha=0.5", name="b")[0] == 2
    assert run(tmp_path, "counterexample", "counterexample.p=2", "counterexample.alpha=2", name="c")[0] == 0


def test_seed_and_threads_validation(tmp_path):
    for extra in (["--seed", "-1"], ["--seed", str(2**64)], ["--threads", "0"]):
        with pytest.raises(SystemExit) as info:
            main(["coeffs", "--out", str(tmp_path / "x"), *extra])
        assert info.value.code == 2


def test_manifest_records_run(tmp_path):
    code, out = run(tmp_path, "coeffs", "grid.n=9", extra=("--seed", "7", "--threads", "2"))
    m = manifest(out)
    assert (m["seed"], m["threads"], m["exitCode"]) == (7, 2, code)
    assert m["backend"] in ("compiled", "python")
    assert m["elapsedSeconds"] >= 0


def test_seeded_runs_are_byte_identical(tmp_path):
    sets = ("grid.n=17", "grid.L=6", "init.kind=bimodal", "init.count=3", "init.radius=1")
    _, a = run(tmp_path, "coeffs", *sets, name="a", extra=("--seed", "11"))
    _, b = run(tmp_path, "coeffs", *sets, name="b", extra=("--seed", "11"))
    _, c = run(tmp_path, "coeffs", *sets, name="c", extra=("--seed", "12"))
    for name in ("field.csv", "coefficients.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "field.csv").read_bytes() != (c / "field.csv").read_bytes()


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "landau_apriori.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "0.1.0" in out.stdout
