import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sq

from landau_apriori import core
from landau_apriori.coefficients import (
    CoefficientField,
    KernelParams,
    compute_coefficients,
    compute_coefficients_direct,
    compute_diffusion,
    conservative_reaction,
    divergence_identity_residual,
    read_coefficients_csv,
    spectral_diagnostics,
    write_coefficients_csv,
    write_spectral_csv,
)
from landau_apriori.grid import ScalarField, VelocityGrid, bimodal, integrate, maxwellian, sphere_area


def gaussian(x, y):
    return math.exp(-(x * x + y * y) / 2) / (2 * math.pi)


def polar_oracle(v, gamma):
    """``abar`` and ``cbar`` of the d=2 Maxwellian at ``v`` by adaptive quadrature in w = v - u."""
    vx, vy = v

    def comp(fn):
        val, _ = sq.dblquad(
            lambda r, th: fn(r, th) * gaussian(vx - r * math.cos(th), vy - r * math.sin(th)),
            0,
            2 * math.pi,
            0,
            30,
            epsabs=1e-11,
            epsrel=1e-11,
        )
        return val

    a11 = comp(lambda r, th: r ** (gamma + 3) * math.sin(th) ** 2)
    a12 = comp(lambda r, th: -(r ** (gamma + 3)) * math.sin(th) * math.cos(th))
    a22 = comp(lambda r, th: r ** (gamma + 3) * math.cos(th) ** 2)
    c = (2 + gamma) * comp(lambda r, th: r ** (gamma + 1))
    return np.array([a11, a12, a22, c])


@pytest.fixture(scope="module")
def maxwell_129():
    return maxwellian(VelocityGrid(2, 8.0, 129))


def test_kernel_params_defaults():
    assert KernelParams(-1.0).resolved_c_const(2) == pytest.approx(1.0)
    assert KernelParams(0.0).resolved_c_const(3) == pytest.approx(6.0)
    assert KernelParams(-2.0).resolved_c_const(2) == pytest.approx(sphere_area(2))
    with pytest.raises(ValueError):
        KernelParams(-1.0, a_const=0.0)
    with pytest.raises(ValueError):
        KernelParams(-1.0, cell_rule="cube")


@pytest.mark.parametrize("gamma", [0.5, -2.5])
def test_gamma_out_of_range_rejected(gamma):
    f = maxwellian(VelocityGrid(2, 4.0, 9))
    with pytest.raises(ValueError, match="gamma"):
        compute_coefficients(f, KernelParams(gamma))


def test_gamma_zero_closed_form(maxwell_129):
    g = maxwell_129.grid
    coeffs = compute_coefficients(maxwell_129, KernelParams(0.0))
    o = g.origin_index
    np.testing.assert_allclose(coeffs.abar[(slice(None), slice(None)) + o], np.eye(2), atol=1e-3)
    at = g.index_of((1.0, 0.0))
    np.testing.assert_allclose(coeffs.abar[(slice(None), slice(None)) + at], np.diag([1.0, 2.0]), atol=1e-3)
    np.testing.assert_allclose(coeffs.cbar, 2.0 * integrate(maxwell_129), atol=1e-12)


@pytest.mark.parametrize("gamma", [-0.5, -1.0])
@pytest.mark.parametrize("v", [(1.0, 0.0), (0.5, 1.5)])
def test_soft_potential_against_quadrature(maxwell_129, gamma, v):
    g = maxwell_129.grid
    coeffs = compute_coefficients(maxwell_129, KernelParams(gamma))
    i = g.index_of(v)
    num = np.array([coeffs.abar[0, 0][i], coeffs.abar[0, 1][i], coeffs.abar[1, 1][i], coeffs.cbar[i]])
    err = np.abs(num - polar_oracle(v, gamma))
    assert err[:3].max() < 1e-4
    assert err[3] < 1e-3


def test_soft_potential_converges_at_second_order():
    v, gamma = (1.0, 0.0), -1.0
    oracle = polar_oracle(v, gamma)
    errs = []
    for n in (65, 129):
        g = VelocityGrid(2, 8.0, n)
        c = compute_coefficients(maxwellian(g), KernelParams(gamma))
        i = g.index_of(v)
        errs.append(abs(c.abar[0, 0][i] - oracle[0]) + abs(c.cbar[i] - oracle[3]))
    assert errs[0] / errs[1] > 3.0


def test_endpoint_gamma_equals_minus_d():
    g = VelocityGrid(2, 6.0, 33)
    f = maxwellian(g)
    coeffs = compute_coefficients(f, KernelParams(-2.0))
    np.testing.assert_allclose(coeffs.cbar, sphere_area(2) * f.values, rtol=1e-13)


def test_zero_field_gives_zero_coefficients():
    g = VelocityGrid(2, 4.0, 17)
    coeffs = compute_coefficients(ScalarField(g, np.zeros(g.shape)), KernelParams(-1.0))
    assert not coeffs.abar.any() and not coeffs.cbar.any()
    assert divergence_identity_residual(coeffs) == 0.0


@pytest.mark.parametrize("d,n", [(1, 21), (2, 13), (3, 7)])
@pytest.mark.parametrize("gamma", [0.0, -0.7, -1.0])
def test_tabulated_matches_direct(d, n, gamma):
    if gamma < -d:
        pytest.skip("gamma below -d")
    g = VelocityGrid(d, 3.0, n)
    rng = np.random.default_rng(7)
    f = ScalarField(g, rng.random(g.shape))
    params = KernelParams(gamma)
    fast = compute_coefficients(f, params)
    ref = compute_coefficients_direct(f, params)
    scale = max(np.abs(ref.abar).max(), np.abs(ref.cbar).max())
    assert np.abs(fast.abar - ref.abar).max() <= 1e-12 * scale
    assert np.abs(fast.cbar - ref.cbar).max() <= 1e-12 * scale


def test_divergence_identity_is_second_order():
    res = []
    for n in (33, 65):
        c = compute_coefficients(maxwellian(VelocityGrid(2, 8.0, n)), KernelParams(-1.0))
        res.append(divergence_identity_residual(c))
    assert res[0] / res[1] > 3.0


def test_divergence_identity_detects_wrong_constant():
    g = VelocityGrid(2, 8.0, 65)
    f = maxwellian(g)
    good = compute_coefficients(f, KernelParams(0.0))
    bad = compute_coefficients(f, KernelParams(0.0, c_const=4.0))
    assert divergence_identity_residual(good) < 1e-8
    # linear in cConst: doubling it leaves a residual of cbar/2 = 2
    assert divergence_identity_residual(bad) == pytest.approx(good.cbar.max(), rel=1e-6)


def test_divergence_identity_needs_five_nodes():
    g = VelocityGrid(2, 1.0, 3)
    c = compute_coefficients(maxwellian(g), KernelParams(0.0))
    with pytest.raises(ValueError):
        divergence_identity_residual(c)


def test_conservative_reaction_gives_zero_operator_mass():
    g = VelocityGrid(2, 4.0, 33)
    f = bimodal(g, [(-1.0, 0.0), (1.0, 0.5)], 1.0, 1.0)
    abar = compute_diffusion(f, KernelParams(-1.0))
    np.testing.assert_allclose(abar, compute_coefficients(f, KernelParams(-1.0)).abar, rtol=1e-14, atol=1e-15)
    cbar = conservative_reaction(g, abar)
    # with this reaction term the discrete operator has zero column sums, so
    # the Riemann-sum mass of abar_ij D2_ij f + cbar f vanishes for any f
    rng = np.random.default_rng(11)
    for _ in range(3):
        probe = rng.random(g.size)
        rate = core.apply_operator(probe, abar.reshape(4, -1), cbar.reshape(-1), 2, g.n, g.h)
        assert abs(rate.sum()) < 1e-11 * np.abs(rate).sum()


def test_spectral_diagnostics_trivial_matrices():
    g = VelocityGrid(3, 1.0, 3)
    abar = np.zeros((3, 3) + g.shape)
    for k, val in enumerate((1.0, 2.0, 3.0)):
        abar[k, k] = val
    s = spectral_diagnostics(CoefficientField(g, abar, np.zeros(g.shape)))
    np.testing.assert_allclose(s.det, 6.0)
    np.testing.assert_allclose(s.min_eig, 1.0)
    np.testing.assert_allclose(s.max_eig, 3.0)

    g2 = VelocityGrid(2, 1.0, 3)
    ident = np.broadcast_to(np.eye(2)[:, :, None, None], (2, 2) + g2.shape)
    s2 = spectral_diagnostics(CoefficientField(g2, ident, np.zeros(g2.shape)))
    for arr in (s2.min_eig, s2.max_eig, s2.det, s2.radial_eig, s2.tangential_min_eig):
        np.testing.assert_allclose(arr, 1.0)


def test_spectral_diagnostics_maxwellian_gamma_zero(maxwell_129):
    g = maxwell_129.grid
    s = spectral_diagnostics(compute_coefficients(maxwell_129, KernelParams(0.0)))
    i = g.index_of((1.0, 0.0))
    assert s.radial_eig[i] == pytest.approx(1.0, abs=1e-3)
    assert s.tangential_min_eig[i] == pytest.approx(2.0, abs=1e-3)
    assert s.det[i] == pytest.approx(2.0, abs=1e-3)


def test_spectral_rejects_asymmetric():
    g = VelocityGrid(2, 1.0, 3)
    abar = np.zeros((2, 2) + g.shape)
    abar[0, 1] = 1.0
    with pytest.raises(ValueError, match="symmetric"):
        spectral_diagnostics(CoefficientField(g, abar, np.zeros(g.shape)))


def test_eigenvalues_match_numpy_in_3d():
    g = VelocityGrid(3, 2.0, 7)
    rng = np.random.default_rng(3)
    f = ScalarField(g, rng.random(g.shape))
    c = compute_coefficients(f, KernelParams(-1.5))
    s = spectral_diagnostics(c)
    mats = np.moveaxis(c.abar.reshape(3, 3, -1), -1, 0)
    eig = np.linalg.eigvalsh(mats)
    np.testing.assert_allclose(s.min_eig.reshape(-1), eig[:, 0], rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(s.max_eig.reshape(-1), eig[:, -1], rtol=1e-9, atol=1e-12)


def test_coefficient_csv_round_trip(tmp_path):
    g = VelocityGrid(2, 4.0, 9)
    c = compute_coefficients(maxwellian(g), KernelParams(-1.0))
    write_coefficients_csv(c, tmp_path / "c.csv")
    back = read_coefficients_csv(tmp_path / "c.csv")
    np.testing.assert_allclose(back.abar, c.abar, rtol=1e-15)
    np.testing.assert_allclose(back.cbar, c.cbar, rtol=1e-15)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "# d=2 L=4.0 n=9"
    assert len(lines[1].split(",")) == 2 + 2 + 3 + 1
    write_spectral_csv(c, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").exists()


# ---------------------------------------------------------------- properties

small_grid = VelocityGrid(2, 2.0, 9)
field_values = st.lists(st.floats(0, 5, allow_nan=False), min_size=81, max_size=81).map(
    lambda xs: np.array(xs).reshape(9, 9)
)
gammas = st.sampled_from([0.0, -0.5, -1.0, -1.5, -2.0])


@given(field_values, gammas)
def test_psd_and_positive_reaction(values, gamma):
    c = compute_coefficients(ScalarField(small_grid, values), KernelParams(gamma))
    s = spectral_diagnostics(c)
    assert np.all(s.min_eig >= -1e-12 * np.maximum(s.max_eig, 1e-300))
    assert np.all(c.cbar >= 0)


@given(field_values, field_values, gammas)
def test_linearity(a, b, gamma):
    params = KernelParams(gamma)
    ca = compute_coefficients(ScalarField(small_grid, a), params)
    cb = compute_coefficients(ScalarField(small_grid, b), params)
    cab = compute_coefficients(ScalarField(small_grid, a + b), params)
    scale = max(1.0, np.abs(cab.abar).max(), np.abs(cab.cbar).max())
    assert np.abs(cab.abar - ca.abar - cb.abar).max() <= 1e-12 * scale
    assert np.abs(cab.cbar - ca.cbar - cb.cbar).max() <= 1e-12 * scale


@given(st.integers(-3, 3), st.integers(-3, 3), gammas)
def test_translation_equivariance(sx, sy, gamma):
    g = VelocityGrid(2, 4.0, 17)
    base = np.zeros(g.shape)
    base[6:11, 6:11] = np.random.default_rng(0).random((5, 5))
    shifted = np.roll(base, (sx, sy), axis=(0, 1))
    params = KernelParams(gamma)
    c0 = compute_coefficients(ScalarField(g, base), params)
    c1 = compute_coefficients(ScalarField(g, shifted), params)
    # compare on the interior region that both fields see identically
    win = (slice(4 + max(sx, 0), 13 + min(sx, 0)), slice(4 + max(sy, 0), 13 + min(sy, 0)))
    win0 = (slice(win[0].start - sx, win[0].stop - sx), slice(win[1].start - sy, win[1].stop - sy))
    np.testing.assert_allclose(c1.cbar[win], c0.cbar[win0], rtol=1e-12)
    np.testing.assert_allclose(c1.abar[(slice(None), slice(None)) + win], c0.abar[(slice(None), slice(None)) + win0], rtol=1e-11, atol=1e-14)


@given(st.sampled_from([0.0, -0.5, -1.0, -1.5]))
def test_isotropy_at_origin(gamma):
    g = VelocityGrid(2, 8.0, 33)
    c = compute_coefficients(maxwellian(g), KernelParams(gamma))
    a0 = c.abar[(slice(None), slice(None)) + g.origin_index]
    assert abs(a0[0, 1]) < 1e-14
    assert a0[0, 0] == pytest.approx(a0[1, 1], rel=1e-13)


def test_gamma_continuity():
    g = VelocityGrid(2, 8.0, 65)
    f = maxwellian(g)
    c0 = compute_coefficients(f, KernelParams(0.0))
    c1 = compute_coefficients(f, KernelParams(-0.01))
    near = g.radius() <= 2.0
    diff = np.abs(c1.cbar - c0.cbar)[near].max()
    assert diff < 5e-2
