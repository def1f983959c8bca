import numpy as np
import pytest
from conftest import random_channel

from fadingbc.macregion import corner_rates
from fadingbc.wsolver import (
    P3Config,
    coordinate_min,
    kkt_residual,
    order_from_weights,
    p3_objective,
    solve_p3,
    solve_p3_batch,
)

LN2 = np.log(2.0)


def test_order_from_weights():
    # descending weight, 0-indexed users
    np.testing.assert_array_equal(order_from_weights(np.array([0.5, 2.0, 1.0])), [1, 2, 0])
    np.testing.assert_array_equal(order_from_weights(np.array([1.0, 1.0])), [0, 1])
    np.testing.assert_array_equal(order_from_weights(np.zeros(3)), [0, 1, 2])


def test_p3_objective_values():
    h = np.array([[1.0 + 0j]])
    assert p3_objective(h, np.zeros(1), np.array([2.0])) == 0.0
    # q - beta log2(1+q) = 1 - 1*1 = 0
    assert abs(p3_objective(h, np.array([1.0]), np.array([1.0]))) < 1e-12
    assert abs(p3_objective(h, np.array([2.0]), np.array([0.0])) - 2.0) < 1e-12


def test_coordinate_min_scalar_kkt():
    """beta ||h||^2 / (1 + q ||h||^2) = ln 2 has the closed form q = b/ln2 - 1."""
    h = np.array([[1.0 + 0j]])
    q = coordinate_min(h, np.zeros(1), 0, np.array([1.0]))
    assert abs(q - (1.0 / LN2 - 1.0)) < 1e-9

    # d(0) = 0.5 <= ln 2 -> stays at zero
    assert coordinate_min(h, np.zeros(1), 0, np.array([0.5])) == 0.0

    h2 = np.array([[1.0, 0.0]], dtype=complex)
    q2 = coordinate_min(h2, np.zeros(1), 0, np.array([2.0]))
    assert abs(q2 - (2.0 / LN2 - 1.0)) < 1e-9


def test_coordinate_curve_monotone(rng):
    """d(q_m) never increases in q_m (sampled)."""
    h = random_channel(rng, 3, 2)
    beta = rng.uniform(0.2, 2.0, size=3)
    q = rng.uniform(0, 1, size=3)

    # the objective's directional derivative along e_user is 1 - d(q)/ln2;
    # a nondecreasing derivative is exactly d(q) nonincreasing.
    for user in range(3):
        grid = np.linspace(0.0, 4.0, 30)
        eps = 1e-6
        derivs = []
        for g in grid:
            probe = q.copy()
            probe[user] = g
            up = probe.copy()
            up[user] = g + eps
            derivs.append((p3_objective(h, up, beta) - p3_objective(h, probe, beta)) / eps)
        assert np.all(np.diff(derivs) > -1e-6)


def test_solve_p3_zero_weights(rng):
    h = random_channel(rng, 3, 2)
    sol = solve_p3(h, np.zeros(3))
    assert np.all(sol.powers == 0.0)
    assert np.all(sol.rates == 0.0)
    assert sol.objective == 0.0


def test_solve_p3_scalar():
    h = np.array([[1.0 + 0j]])
    sol = solve_p3(h, np.array([1.0]))
    assert abs(sol.powers[0] - 0.4427) < 1e-3
    assert abs(sol.rates[0] - np.log2(1.0 + 1.0 / LN2 - 1.0)) < 1e-6
    assert sol.converged
    assert sol.kkt_residual <= 1e-9


def grid_search_objective(h, beta, grid_step=1e-3, box=10.0):
    """Exhaustive minimum of the weighted objective over a box grid.

    K = 1 or 2 only.  For K = 2 the 2x2 log-dets reduce to closed-form
    scalars, so the 1e8-point grid stays vectorizable in chunks.
    """
    k, m = h.shape
    grid = np.arange(0.0, box + grid_step / 2, grid_step)
    if k == 1:
        a = float(np.linalg.norm(h[0]) ** 2)
        obj = grid - beta[0] * np.log2(1.0 + a * grid)
        return float(obj.min())

    order = order_from_weights(beta)
    last, first = order[0], order[1]
    a = float(np.linalg.norm(h[last]) ** 2)
    b = float(np.linalg.norm(h[first]) ** 2)
    c = abs(np.vdot(h[last], h[first])) ** 2
    best = np.inf
    # det(I + q_l G_l + q_f G_f) = (1+a q_l)(1+b q_f) - c q_l q_f
    for chunk in np.array_split(grid, 32):
        ql = chunk[:, None]
        qf = grid[None, :]
        det = (1.0 + a * ql) * (1.0 + b * qf) - c * ql * qf
        r_first = np.log2(1.0 + b * qf)
        r_last = np.log2(det) - r_first
        obj = ql + qf - beta[last] * r_last - beta[first] * r_first
        best = min(best, float(obj.min()))
    return best


def test_solve_p3_grid_oracle(rng):
    """Objective matches a brute-force grid on one K=2 instance."""
    h = random_channel(rng, 2, 2)
    beta = np.array([1.0, 1.0])
    sol = solve_p3(h, beta)
    ref = grid_search_objective(h, beta)
    assert sol.objective <= ref + 1e-9  # grid point can't beat the solver
    assert abs(sol.objective - ref) < 1e-3


def test_solve_p3_kkt_certificate(rng):
    for _ in range(20):
        k = int(rng.integers(1, 5))
        m = int(rng.integers(1, 4))
        h = random_channel(rng, k, m)
        beta = rng.uniform(0.0, 3.0, size=k)
        sol = solve_p3(h, beta)
        assert sol.converged
        assert kkt_residual(h, sol.powers, beta) <= 1e-9
        # rates are the corner of the solver's decoding order
        np.testing.assert_allclose(
            sol.rates, corner_rates(h, sol.powers, sol.order), atol=1e-12
        )


def test_root_bracket_validity(rng):
    """Optimal coordinate never exceeds beta_user / ln 2."""
    for _ in range(20):
        k = int(rng.integers(1, 4))
        h = random_channel(rng, k, 2)
        beta = rng.uniform(0.0, 3.0, size=k)
        sol = solve_p3(h, beta)
        assert np.all(sol.powers <= beta / LN2 + 1e-9)


def test_perturbation_does_not_improve(rng):
    """Local optimality: random perturbations never beat the solution."""
    h = random_channel(rng, 3, 2)
    beta = np.array([1.5, 1.0, 0.5])
    sol = solve_p3(h, beta)
    for _ in range(50):
        probe = np.maximum(sol.powers + rng.normal(0, 0.05, size=3), 0.0)
        assert p3_objective(h, probe, beta) >= sol.objective - 1e-9


def test_batch_matches_single(rng):
    hs = np.stack([random_channel(rng, 3, 2) for _ in range(6)])
    beta = np.tile(np.array([1.2, 0.8, 0.4]), (6, 1))
    batch = solve_p3_batch(hs, beta)
    for n in range(6):
        single = solve_p3(hs[n], beta[n])
        assert abs(batch.objectives[n] - single.objective) < 1e-7
        np.testing.assert_allclose(batch.powers[n], single.powers, atol=1e-5)


def test_config_validation():
    with pytest.raises(ValueError):
        P3Config(kkt_tol=0.0)
    with pytest.raises(ValueError):
        P3Config(max_sweeps=0)
