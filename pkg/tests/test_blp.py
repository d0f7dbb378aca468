from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scalesep.blp import blp_scores, oracle_blp, separate
from scalesep.covmodel import DimensionError, Grid
from scalesep.simgen import ScenarioConfig, generate, smooth_basis
from scalesep.spectra import spectrum


def fb_parts(K=20, r=3, lam=(1.0, 0.5, 0.2)):
    eta = smooth_basis("FB", r, Grid.midpoint(K))
    lam = np.asarray(lam[:r])
    return eta, lam, (eta * lam) @ eta.T


def decomp_for(L, R, r):
    return SimpleNamespace(L_spectrum=spectrum(L).leading(r), R_spectrum=spectrum(R))


def test_scores_of_first_eigenfunction_without_noise():
    eta, lam, L = fb_parts()
    xi = blp_scores(eta[:, 0], spectrum(L).leading(3), spectrum(L))
    np.testing.assert_allclose(xi, [1.0, 0.0, 0.0], atol=1e-10)


def test_zero_curve_gives_zero_scores():
    _, _, L = fb_parts()
    R = L + 0.1 * np.eye(20)
    np.testing.assert_array_equal(blp_scores(np.zeros(20), spectrum(L).leading(3), spectrum(R)), 0.0)


@pytest.mark.parametrize("c", [0.05, 0.3, 2.0])
def test_ridge_shrinkage_closed_form(c, rng):
    K = 20
    eta, lam, L = fb_parts(K)
    R = L + c * K * np.eye(K)
    X = eta @ rng.standard_normal(3)
    # compare in the spectrum's own sign convention
    inner = spectrum(L).eigenvectors[:, :3].T @ X / K
    expected = lam / (lam + c) * inner
    np.testing.assert_allclose(blp_scores(X, spectrum(L).leading(3), spectrum(R)), expected, atol=1e-8)


def test_scores_match_direct_formula(rng):
    K = 15
    eta, lam, L = fb_parts(K)
    A = rng.standard_normal((K, K))
    R = L + A @ A.T / K
    X = rng.standard_normal((4, K))
    s = spectrum(L).leading(3)
    direct = (s.eigenvalues[:, None] * (s.eigenvectors.T @ np.linalg.pinv(R) @ X.T)).T
    np.testing.assert_allclose(blp_scores(X, s, spectrum(R)), direct, rtol=1e-8, atol=1e-10)


def test_separate_noiseless_returns_input(rng):
    eta, lam, L = fb_parts()
    X = rng.standard_normal((5, 3)) @ eta.T
    sep = separate(X, decomp_for(L, L, 3))
    np.testing.assert_allclose(sep.Yhat, X, atol=1e-10)
    np.testing.assert_allclose(sep.What, 0.0, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 20), elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_separate_additivity(X):
    eta, lam, L = fb_parts()
    sep = separate(X, decomp_for(L, L + 0.2 * np.eye(20), 3), mean=np.linspace(0, 1, 20))
    # residual definition holds bit for bit; the sum reproduces X up to one rounding
    np.testing.assert_array_equal(sep.What, X - sep.Yhat)
    bound = np.spacing(np.maximum(np.abs(X), np.abs(sep.What)))
    assert np.all(np.abs(sep.Yhat + sep.What - X) <= bound)


def test_separate_prediction_in_smooth_span(rng):
    eta, lam, L = fb_parts()
    X = rng.standard_normal((8, 20))
    sep = separate(X, decomp_for(L, L + 0.3 * np.eye(20), 3))
    resid = sep.Yhat - sep.Yhat @ eta @ eta.T / 20
    assert np.abs(resid).max() < 1e-10
    assert sep.rhat == 3 and sep.scores.shape == (8, 3)


def test_separate_zero_rows_and_dimension_check():
    _, _, L = fb_parts()
    d = decomp_for(L, L, 3)
    sep = separate(np.zeros((0, 20)), d)
    assert sep.Yhat.shape == (0, 20) and sep.What.shape == (0, 20)
    with pytest.raises(DimensionError):
        separate(np.ones((2, 19)), d)


def test_oracle_projection_when_noise_free(rng):
    eta, lam, L = fb_parts()
    X = rng.standard_normal((3, 20))
    np.testing.assert_allclose(oracle_blp(X, L, L), X @ eta @ eta.T / 20, atol=1e-10)


def test_oracle_two_point_orthogonal_case():
    phi = np.array([1.0, 1.0])
    psi = np.array([1.0, -1.0])
    L = np.outer(phi, phi)
    R = L + 0.25 * np.outer(psi, psi)
    X = np.array([3.0, 1.0])
    np.testing.assert_allclose(oracle_blp(X, L, R), (X @ phi / 2) * phi, atol=1e-12)


def test_oracle_beats_other_linear_maps():
    truth = generate(ScenarioConfig.from_scenario("A", combo=3, n=20000, K=30, seed=11))
    X, Y = truth.samples, truth.Ysample
    best = np.mean((oracle_blp(X, truth.Ltrue, truth.Rtrue) - Y) ** 2)
    A = truth.Ltrue @ np.linalg.pinv(truth.Rtrue, hermitian=True)
    rng = np.random.default_rng(0)
    for _ in range(10):
        B = A + 0.05 * rng.standard_normal(A.shape)
        assert best < np.mean((X @ B.T - Y) ** 2)
