import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sq

from landau_apriori.bounds import Envelope
from landau_apriori.counterexample import (
    BumpProfile,
    SelfSimilarFamily,
    calibrate_profile,
    envelope_failure_time,
    limit_condition_check,
    predicted_failure_time,
    verify_self_similar,
)


@pytest.fixture(scope="module")
def cal2():
    return calibrate_profile(2, 1.0, 1.0)


def finite_difference_laplacian(profile, r, d, h=1e-4):
    # radial Laplacian from central differences; an oracle independent of the closed form
    f = profile.value
    second = (f(r + h) - 2 * f(r) + f(r - h)) / h**2
    first = (f(r + h) - f(r - h)) / (2 * h)
    return second + (d - 1) * first / r


def test_profile_shape():
    phi = BumpProfile(3.0)
    assert phi.value(0.0) == 3.0
    r = np.linspace(0, 1.2, 200)
    v = phi.value(r)
    assert np.all(np.diff(v) <= 0)
    assert np.all(v[r >= 1] == 0)
    with pytest.raises(ValueError):
        BumpProfile(0.0)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_laplacian_matches_finite_differences(d):
    phi = BumpProfile(2.0)
    r = np.array([0.1, 0.4, 0.7, 0.9])
    np.testing.assert_allclose(phi.laplacian(r, d), finite_difference_laplacian(phi, r, d), rtol=1e-5)
    assert BumpProfile.laplacian_ratio(np.array([0.0]), d)[0] == pytest.approx(-2.0 * d)


def test_limit_condition():
    r = np.array([0.9, 0.99, 0.999])
    by_grad, lap, divergent = limit_condition_check(BumpProfile(), r, d=2)
    assert divergent
    assert np.all(np.diff(by_grad) > 0) and np.all(np.diff(lap) > 0)
    assert by_grad[-1] > 1e3 and lap[-1] > 1e3
    b2, l2, _ = limit_condition_check(BumpProfile(2.0), r, d=2)
    np.testing.assert_array_equal(b2, by_grad)
    np.testing.assert_array_equal(l2, lap)
    assert math.isfinite(limit_condition_check(BumpProfile(), [0.0], d=2)[1][0])
    with pytest.raises(ValueError):
        limit_condition_check(BumpProfile(), [0.5, 1.0])


def test_calibration_d2(cal2):
    assert cal2.k >= 1
    assert 0 < cal2.delta_shell < 1
    assert cal2.margin > 0
    # inner check at y = 0: (d/2p) k <= lap(phi)(0) k + k^(1+alpha), lap(phi)(0)/phi(0) = -2d
    k = cal2.k
    assert (2 / 2) * k <= -4 * k + k**2


@pytest.mark.parametrize("d,p,alpha", [(1, 1.0, 2.0), (3, 1.0, 2 / 3), (3, 2.0, 4 / 3), (2, 1.5, 1.5)])
def test_calibration_other_dimensions(d, p, alpha):
    cal = calibrate_profile(d, p, alpha)
    assert cal.margin > 0


def test_below_threshold_rejected():
    with pytest.raises(ValueError, match="2p/d"):
        calibrate_profile(2, 1.0, 0.5)
    with pytest.raises(ValueError, match="2p/d"):
        SelfSimilarFamily(BumpProfile(), 1.0, 0.9, 2)
    # the boundary alpha = 2p/d is admissible
    assert calibrate_profile(2, 2.0, 2.0).margin > 0


def test_uncalibrated_family_rejected():
    with pytest.raises(ValueError, match="calibrated"):
        verify_self_similar(SelfSimilarFamily(BumpProfile(), 1.0, 1.0, 2), [0.5])


def test_self_similar_report(cal2):
    family = SelfSimilarFamily.from_calibration(cal2)
    rep = verify_self_similar(family, [0.1, 0.5, 0.9, 0.99], 10_000, delta_shell=cal2.delta_shell)
    assert rep.max_residual <= 0
    assert rep.lp_deviation < 1e-6
    assert rep.blowup_samples[-1][1] == pytest.approx(cal2.k * 100, rel=1e-12)
    assert family.at_origin(1 - 1e-6) > 1e5 * cal2.k
    data = json.loads(rep.to_json())
    assert set(data) == {"k", "deltaShell", "maxResidual", "lpDeviation", "blowupSamples"}
    assert data["blowupSamples"][0].keys() == {"t", "fAt0"}


def test_residual_against_finite_differences(cal2):
    family = SelfSimilarFamily.from_calibration(cal2)
    t, dt = 0.5, 1e-6
    r = np.array([0.05, 0.3, 0.6])
    ft = (family.value(t + dt, r) - family.value(t - dt, r)) / (2 * dt)
    tau = 1 - t
    prof = BumpProfile(cal2.k)
    lap = tau ** (-family.exponent - 1) * finite_difference_laplacian(prof, r / math.sqrt(tau), 2)
    fd = ft - lap - family.value(t, r) ** 2
    np.testing.assert_allclose(family.residual(t, r), fd, rtol=1e-4)


def test_lp_norm_matches_profile_integral():
    cal = calibrate_profile(2, 2.0, 2.0)
    family = SelfSimilarFamily.from_calibration(cal)
    val, _ = sq.quad(lambda y: float(family.profile.value(np.array([y]))[0]) ** 2 * 2 * math.pi * y, 0, 1, epsrel=1e-13)
    for t in (0.2, 0.7, 0.95):
        assert family.lp_norm(t) == pytest.approx(math.sqrt(val), rel=1e-9)


def test_support_shrinks(cal2):
    family = SelfSimilarFamily.from_calibration(cal2)
    for t in (0.1, 0.5, 0.9):
        edge = math.sqrt(1 - t)
        assert family.value(t, np.array([edge * 1.0001]))[0] == 0.0
        assert family.value(t, np.array([edge * 0.99]))[0] > 0.0


def test_origin_growth_is_inverse_linear(cal2):
    family = SelfSimilarFamily.from_calibration(cal2)
    for t in (0.1, 0.5, 0.9, 0.99):
        assert family.at_origin(t) * (1 - t) == pytest.approx(cal2.k, rel=1e-12)


@given(st.floats(0.5, 1e4), st.floats(-6.0, 3.0))
def test_every_envelope_fails(K, logT):
    family = SelfSimilarFamily.from_calibration(calibrate_profile(2, 1.0, 1.0))
    env = Envelope(K=K, log_T=logT, exponent=family.exponent)
    t_fail = envelope_failure_time(family, env)
    assert 0 < t_fail < 1
    k, e = family.profile.k, family.exponent
    if t_fail > env.T:
        # capped regime: f(t, 0) = k (1-t)^(-d/2p) meets the cap at 1 - (k/cap)^(2p/d)
        assert t_fail == pytest.approx(1 - (k / env.cap) ** (1 / e), rel=1e-12)
    else:
        rho = (K / k) ** (1 / e)
        assert t_fail == pytest.approx(rho / (1 + rho), rel=1e-12)
    after = t_fail + 1e-9 * (1 - t_fail)
    assert family.at_origin(after) > env.value(after)
    if t_fail > 1e-6:
        before = t_fail * (1 - 1e-6)
        assert family.at_origin(before) <= env.value(before) * (1 + 1e-9)


def test_predicted_failure_time(cal2):
    family = SelfSimilarFamily.from_calibration(cal2)
    assert predicted_failure_time(family, 100 * cal2.k) == pytest.approx(0.99, rel=1e-12)
    assert predicted_failure_time(family, cal2.k / 2) == 0.0
    with pytest.raises(ValueError):
        predicted_failure_time(family, 0.0)
