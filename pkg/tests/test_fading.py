import numpy as np
import pytest

from fadingbc.errors import DivergenceError
from fadingbc.fading import (
    ChannelSet,
    FadingSpec,
    estimate_rho,
    generate,
    load_channels,
    save_channels,
)


def test_same_seed_bit_identical():
    spec = FadingSpec(1, 1, 3, (1.0,), 7)
    a = generate(spec)
    b = generate(spec)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.probabilities, b.probabilities)


def test_different_seed_differs():
    a = generate(FadingSpec(2, 2, 4, (1.0,), 0))
    b = generate(FadingSpec(2, 2, 4, (1.0,), 1))
    assert not np.array_equal(a.states, b.states)


def test_probabilities_sum_to_one():
    for n in (1, 3, 17, 100):
        cs = generate(FadingSpec(2, 2, n, (1.0,), 0))
        assert abs(cs.probabilities.sum() - 1.0) < 1e-12
        assert np.all(cs.probabilities == cs.probabilities[0])  # equiprobable


def test_entry_second_moment():
    # E|h_{ki}|^2 = c_k; Monte-Carlo mean over 500 states x 4 antennas
    cs = generate(FadingSpec(2, 4, 500, (1.0, 1.0), 1))
    mean_sq = np.mean(np.abs(cs.states) ** 2)
    assert abs(mean_sq - 1.0) < 0.1


def test_row_norm_second_moment():
    # E||h||^2 = M c: M=2, c=2 -> 4, within 2%
    cs = generate(FadingSpec(1, 2, 10_000, (2.0,), 3))
    mean_norm = np.mean(np.sum(np.abs(cs.states[:, 0, :]) ** 2, axis=1))
    assert abs(mean_norm - 4.0) < 0.02 * 4.0


def test_second_moment_three_sigma():
    """Per-user empirical second moment within 3 sigma of M*c_k."""
    m, n = 3, 4000
    variances = (1.0, 2.5)
    cs = generate(FadingSpec(2, m, n, variances, 11))
    for k, c in enumerate(variances):
        norms = np.sum(np.abs(cs.states[:, k, :]) ** 2, axis=1)
        # ||h||^2 / (c/2) ~ chi^2_{2M}: variance of ||h||^2 is M c^2
        sigma = np.sqrt(m * c * c / n)
        assert abs(np.mean(norms) - m * c) < 3.0 * sigma


def test_per_user_variances():
    cs = generate(FadingSpec(2, 2, 5000, (1.0, 4.0), 2))
    p0 = np.mean(np.abs(cs.states[:, 0, :]) ** 2)
    p1 = np.mean(np.abs(cs.states[:, 1, :]) ** 2)
    assert abs(p0 - 1.0) < 0.1
    assert abs(p1 - 4.0) < 0.4


def test_scalar_variance_broadcasts():
    a = generate(FadingSpec(3, 2, 10, (1.5,), 9))
    b = generate(FadingSpec(3, 2, 10, (1.5, 1.5, 1.5), 9))
    assert np.array_equal(a.states, b.states)


def test_spec_validation():
    with pytest.raises(ValueError):
        FadingSpec(0, 1, 1)
    with pytest.raises(ValueError):
        FadingSpec(1, 0, 1)
    with pytest.raises(ValueError):
        FadingSpec(1, 1, 0)
    with pytest.raises(ValueError):
        FadingSpec(1, 1, 1, (-1.0,))
    with pytest.raises(ValueError):
        FadingSpec(2, 1, 1, (1.0, 2.0, 3.0))  # wrong variance count


def test_channelset_properties():
    cs = generate(FadingSpec(3, 2, 7, (1.0,), 0))
    assert cs.num_states == 7
    assert cs.num_users == 3
    assert cs.num_antennas == 2
    assert cs.states.shape == (7, 3, 2)


def test_estimate_rho_m2():
    # E[1/||h||^2] = 1/(c(M-1)) = 1 for M=2, c=1
    rho = estimate_rho(FadingSpec(1, 2, 1, (1.0,), 0), samples=1_000_000)
    assert abs(rho - 1.0) < 0.01


def test_estimate_rho_m4():
    rho = estimate_rho(FadingSpec(1, 4, 1, (1.0,), 0), samples=1_000_000)
    assert abs(rho - 1.0 / 3.0) < 0.01


def test_estimate_rho_diverges_m1():
    with pytest.raises(DivergenceError):
        estimate_rho(FadingSpec(1, 1, 1, (1.0,), 0))


def test_save_load_round_trip(tmp_path):
    cs = generate(FadingSpec(3, 2, 11, (1.0, 0.5, 2.0), 13))
    path = str(tmp_path / "states.txt")
    save_channels(cs, path)
    back = load_channels(path)
    assert np.array_equal(back.states, cs.states)  # bit-for-bit via %.17g
    assert np.array_equal(back.probabilities, cs.probabilities)


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("not a header\n")
    with pytest.raises(ValueError):
        load_channels(str(path))
