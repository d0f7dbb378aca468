import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scalesep.banded import dykstra_project, estimate_banded, project_banded, project_psd
from scalesep.completion import complete_at_rank
from scalesep.covmodel import ScaleSepError, build_band_mask
from scalesep.simgen import ScenarioConfig, generate

from conftest import random_symmetric


def test_project_banded_example():
    M = np.arange(1.0, 10.0).reshape(3, 3)
    np.testing.assert_array_equal(project_banded(M, 1), [[1, 2, 0], [4, 5, 6], [0, 8, 9]])


def test_project_banded_matches_loop(rng):
    M = random_symmetric(rng, 7)
    out = project_banded(M, 2)
    for i in range(7):
        for j in range(7):
            assert out[i, j] == (M[i, j] if abs(i - j) <= 2 else 0.0)
    np.testing.assert_array_equal(project_banded(out, 2), out)


def test_project_banded_rejects_wide_band():
    with pytest.raises(ScaleSepError):
        project_banded(np.eye(3), 3)


def test_project_psd_examples():
    np.testing.assert_allclose(project_psd(np.diag([1.0, -1.0])), np.diag([1.0, 0.0]), atol=1e-15)
    np.testing.assert_allclose(project_psd([[0.0, 1.0], [1.0, 0.0]]), np.full((2, 2), 0.5), atol=1e-15)
    A = np.array([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(project_psd(A), A, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 10))
def test_psd_projection_idempotent_and_nonexpansive(seed, K):
    rng = np.random.default_rng(seed)
    A, B = random_symmetric(rng, K), random_symmetric(rng, K)
    PA, PB = project_psd(A), project_psd(B)
    assert np.linalg.eigvalsh(PA).min() >= -1e-12 * max(1.0, np.abs(A).max())
    np.testing.assert_allclose(project_psd(PA), PA, atol=1e-12)
    assert np.linalg.norm(PA - PB) <= np.linalg.norm(A - B) + 1e-12


def test_dykstra_fixed_point_on_feasible_input():
    K = 8
    A = 2 * np.eye(K) - 0.5 * (np.eye(K, k=1) + np.eye(K, k=-1))
    np.testing.assert_allclose(dykstra_project(A, 1), A, atol=1e-10)


def test_dykstra_diagonal_case_against_grid_search():
    M = np.array([[1.0, 2.0], [2.0, 1.0]])
    out = dykstra_project(M, 0)
    # feasible set for w=0 is nonnegative diagonals; nearest is diag(1,1)
    grid = np.linspace(0, 2, 201)
    best = min(((a - 1) ** 2 + (b - 1) ** 2 + 8, (a, b)) for a in grid for b in grid)[1]
    np.testing.assert_allclose(np.diag(out), best, atol=1e-8)
    np.testing.assert_allclose(out, np.eye(2), atol=1e-8)


def feasible_candidates(rng, K, w, count):
    band = np.abs(np.subtract.outer(np.arange(K), np.arange(K))) <= w
    for _ in range(count):
        C = random_symmetric(rng, K) * band
        # shift into the PSD cone while keeping the band
        lam = np.linalg.eigvalsh(C).min()
        yield C + max(0.0, -lam + rng.uniform(0, 1)) * np.eye(K)


def test_dykstra_beats_feasible_candidates(rng):
    K, w = 8, 2
    M = random_symmetric(rng, K)
    out, state = dykstra_project(M, w, return_state=True)
    assert state.converged
    d = np.linalg.norm(out - M)
    for C in feasible_candidates(rng, K, w, 100):
        assert d <= np.linalg.norm(C - M) + 1e-10


def test_estimate_banded_exact_smooth_recovers_band(population_A40):
    truth = population_A40
    R = truth.Ltrue + truth.Btrue
    Bhat, delta, state = estimate_banded(R, truth.Ltrue, 10)
    assert np.linalg.norm(Bhat - truth.Btrue) <= 1e-8
    np.testing.assert_allclose(delta, truth.Btrue, atol=1e-12)


def test_estimate_banded_equal_inputs_gives_zero(rng):
    R = random_symmetric(rng, 6)
    Bhat, _, _ = estimate_banded(R, R, 2)
    assert np.abs(Bhat).max() < 1e-12


def test_projection_moves_toward_band_truth():
    truth = generate(ScenarioConfig.from_scenario("A", combo=3, n=300, K=100, seed=2))
    Rn = truth.Rsample
    fit = complete_at_rank(Rn, 3, build_band_mask(100, 10))
    Bhat, delta, _ = estimate_banded(Rn, fit.C @ fit.C.T, 10)
    # Btrue is banded PSD, so it is a fixed point of the convex projection
    assert np.linalg.norm(Bhat - truth.Btrue) <= np.linalg.norm(delta - truth.Btrue) + 1e-12


def test_dual_and_dykstra_solvers_agree(rng):
    M = random_symmetric(rng, 10)
    a = dykstra_project(M, 2)
    b = dykstra_project(M, 2, method="dykstra", tol=1e-13, max_iter=100_000)
    assert np.linalg.norm(a - b) < 1e-6
    assert np.linalg.norm(a - M) <= np.linalg.norm(b - M) + 1e-9
