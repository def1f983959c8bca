"""Block-fading channel ensembles for a multi-antenna downlink.

A channel state is a complex K x M matrix whose k-th row h_k is the vector
channel of user k.  Entries are circularly-symmetric complex Gaussian,
h_k ~ CN(0, c_k I), i.e. real/imaginary parts are independent
Normal(0, c_k / 2).  An ensemble of N states with state probabilities
stands in for the fading distribution when optimizing long-term averages.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DivergenceError

__all__ = [
    "FadingSpec",
    "ChannelSet",
    "generate",
    "estimate_rho",
    "save_channels",
    "load_channels",
]


@dataclass
class FadingSpec:
    """Parameters of a CSCG block-fading ensemble.

    ``variances`` may be a scalar (shared by all users) or a sequence of K
    per-user values c_k with E[|h_k|^2] = c_k * M.
    """

    num_users: int
    num_antennas: int
    num_states: int
    variances: tuple[float, ...] = field(default=(1.0,))
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_users < 1 or self.num_antennas < 1 or self.num_states < 1:
            raise DimensionError("num_users, num_antennas and num_states must be >= 1")
        v = np.atleast_1d(np.asarray(self.variances, dtype=float))
        if v.size == 1:
            v = np.repeat(v, self.num_users)
        if v.size != self.num_users:
            raise DimensionError(
                f"expected 1 or {self.num_users} variances, got {v.size}"
            )
        if not np.all(v > 0):
            raise ValueError("variances must be positive")
        self.variances = tuple(float(x) for x in v)


@dataclass
class ChannelSet:
    """A finite ensemble of channel states with probabilities.

    ``states`` has shape (N, K, M); ``probabilities`` has shape (N,), is
    nonnegative and sums to one.
    """

    states: np.ndarray
    probabilities: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=complex)
        if self.states.ndim != 3:
            raise DimensionError("states must have shape (N, K, M)")
        if not np.all(np.isfinite(self.states.view(float))):
            raise ValueError("states contain non-finite entries")
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if self.probabilities.shape != (self.states.shape[0],):
            raise DimensionError("probabilities must have shape (N,)")
        if np.any(self.probabilities < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(self.probabilities.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")

    @property
    def num_states(self) -> int:
        return self.states.shape[0]

    @property
    def num_users(self) -> int:
        return self.states.shape[1]

    @property
    def num_antennas(self) -> int:
        return self.states.shape[2]


def _user_streams(spec: FadingSpec) -> list[np.random.Generator]:
    """One counter-based substream per user (plus one spare for estimators).

    Per-user substreams make draws for user k independent of K and of the
    other users, so enlarging the network keeps earlier users' channels.
    """
    children = np.random.SeedSequence(spec.seed).spawn(spec.num_users + 1)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def _draw_cn(rng: np.random.Generator, shape: tuple[int, ...], variance: float) -> np.ndarray:
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def generate(spec: FadingSpec) -> ChannelSet:
    """Draw a seeded ensemble of N equiprobable CSCG channel states."""
    streams = _user_streams(spec)
    states = np.empty((spec.num_states, spec.num_users, spec.num_antennas), dtype=complex)
    for k in range(spec.num_users):
        states[:, k, :] = _draw_cn(
            streams[k], (spec.num_states, spec.num_antennas), spec.variances[k]
        )
    probs = np.full(spec.num_states, 1.0 / spec.num_states)
    return ChannelSet(states=states, probabilities=probs, seed=spec.seed)


def estimate_rho(spec: FadingSpec, samples: int = 100_000) -> float:
    """Monte-Carlo estimate of rho = E[1 / |h|^2] for the first user.

    For h ~ CN(0, c I_M), rho = 1 / (c (M - 1)); at M = 1 the expectation
    diverges, which is rejected rather than returned as a huge number.
    """
    if spec.num_antennas < 2:
        raise DivergenceError("E[1/|h|^2] diverges for a single antenna (M=1)")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = _user_streams(spec)[spec.num_users]
    h = _draw_cn(rng, (samples, spec.num_antennas), spec.variances[0])
    return float(np.mean(1.0 / np.sum(np.abs(h) ** 2, axis=1)))


def save_channels(channels: ChannelSet, path: str) -> None:
    """Write an ensemble as text: header ``K M N``, then N blocks of K lines
    with 2M reals per line (re/im interleaved), then one probabilities line.
    """
    n, k, m = channels.states.shape
    lines = [f"{k} {m} {n}"]
    for state in channels.states:
        for row in state:
            parts = np.empty(2 * m)
            parts[0::2] = row.real
            parts[1::2] = row.imag
            lines.append(" ".join(f"{x:.17g}" for x in parts))
    lines.append(" ".join(f"{p:.17g}" for p in channels.probabilities))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_channels(path: str) -> ChannelSet:
    """Parse the text format written by :func:`save_channels`.

    The trailing probabilities line is optional; when absent the states are
    uniform.  Line counts other than K*N or K*N + 1 after the header are
    rejected.
    """
    with open(path) as fh:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    if not lines:
        raise ValueError(f"{path}: empty channel file")
    header = lines[0].split()
    if len(header) != 3:
        raise ValueError(f"{path}: header must be 'K M N'")
    k, m, n = (int(x) for x in header)
    if k < 1 or m < 1 or n < 1:
        raise DimensionError(f"{path}: K, M, N must be >= 1")
    body = lines[1:]
    if len(body) not in (n * k, n * k + 1):
        raise ValueError(
            f"{path}: expected {n * k} channel lines (+ optional probabilities), "
            f"got {len(body)}"
        )
    states = np.empty((n, k, m), dtype=complex)
    for i in range(n * k):
        vals = np.array([float(x) for x in body[i].split()])
        if vals.size != 2 * m:
            raise ValueError(f"{path}: line {i + 2} must hold {2 * m} reals")
        states[i // k, i % k, :] = vals[0::2] + 1j * vals[1::2]
    if len(body) == n * k + 1:
        probs = np.array([float(x) for x in body[-1].split()])
        if probs.size != n:
            raise ValueError(f"{path}: probabilities line must hold {n} values")
    else:
        probs = np.full(n, 1.0 / n)
    return ChannelSet(states=states, probabilities=probs)
