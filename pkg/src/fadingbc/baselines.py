"""Orthogonalizing baselines: TDMA and zero-forcing SDMA.

Both reduce the vector broadcast channel to parallel single-user scalar
channels and then run the classic per-class power control: water-filling
for average-rate (NDC) targets, channel inversion for per-state (DC)
targets.  They bound the proposed scheduler from above in average power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InfeasibleError
from .scheduler import DC, NDC, _split_profiles


@dataclass
class PrecoderSet:
    """Unit-norm transmit directions and the scalar gains they induce."""

    b_hat: np.ndarray   # (K, M) complex, rows unit norm
    gains: np.ndarray   # (K,) real, |h_k . b_hat_k|^2

    @property
    def degenerate(self) -> np.ndarray:
        """Users whose effective channel vanished (zero or collinear rows)."""
        return self.gains <= 0


def _fallback_direction(m: int) -> np.ndarray:
    e = np.zeros(m, dtype=complex)
    e[0] = 1.0
    return e


def coherent_precoders(channel: np.ndarray) -> PrecoderSet:
    """Match each user's direction to its own channel (maximum-ratio)."""
    h = np.asarray(channel, dtype=complex)
    if h.ndim != 2:
        raise DimensionError("channel must be a (K, M) matrix")
    k, m = h.shape
    norms = np.linalg.norm(h, axis=1)
    b = np.empty_like(h)
    for i in range(k):
        b[i] = np.conj(h[i]) / norms[i] if norms[i] > 0 else _fallback_direction(m)
    return PrecoderSet(b, norms ** 2)


def zf_precoders(channel: np.ndarray) -> PrecoderSet:
    """Steer each user into the null space of all the others.

    Requires K <= M.  A rank-deficient co-channel matrix (e.g. collinear
    users) leaves no useful component for the affected users; they come
    back with zero gain instead of raising.
    """
    h = np.asarray(channel, dtype=complex)
    if h.ndim != 2:
        raise DimensionError("channel must be a (K, M) matrix")
    k, m = h.shape
    if k > m:
        raise DimensionError(f"zero-forcing needs K <= M, got K={k}, M={m}")
    b = np.empty_like(h)
    gains = np.zeros(k)
    eye = np.eye(m, dtype=complex)
    for i in range(k):
        others = np.delete(h, i, axis=0)
        if others.size:
            proj = eye - np.linalg.pinv(others) @ others
        else:
            proj = eye
        v = proj @ np.conj(h[i])
        norm = np.linalg.norm(v)
        if norm <= 1e-12 * max(np.linalg.norm(h[i]), 1.0):
            b[i] = _fallback_direction(m)
            continue
        b[i] = v / norm
        gains[i] = np.abs(h[i] @ b[i]) ** 2
    return PrecoderSet(b, gains)


def waterfill_power(gains: np.ndarray, probs: np.ndarray, r_star: float,
                    time_share: float = 1.0):
    """Cheapest power profile meeting an average-rate target on a scalar channel.

    The user transmits a fraction ``time_share`` of each block with slot
    power p(n) = max(w - 1/g(n), 0); the water level w is bisected until
    the average rate  E[time_share * log2(1 + p g)]  meets ``r_star``.
    Returns (average power, slot powers).
    """
    g = np.asarray(gains, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if not 0 < time_share <= 1:
        raise ValueError("time_share must lie in (0, 1]")
    if r_star < 0:
        raise ValueError("rate target must be nonnegative")
    if r_star == 0:
        return 0.0, np.zeros_like(g)
    usable = g > 0
    if not np.any(usable & (probs > 0)):
        raise InfeasibleError("no positive-gain state to waterfill over")

    def rate(w: float):
        p = np.where(usable, np.maximum(w - 1.0 / np.where(usable, g, 1.0), 0.0), 0.0)
        return float(time_share * probs @ np.log2(1.0 + p * g)), p

    lo, hi = 0.0, float(np.min(1.0 / g[usable])) + 1.0
    r_hi, _ = rate(hi)
    for _ in range(200):
        if r_hi >= r_star:
            break
        hi *= 2.0
        r_hi, _ = rate(hi)
    else:
        raise InfeasibleError("water level diverged before meeting the rate target")
    p = np.zeros_like(g)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r_mid, p = rate(mid)
        if abs(r_mid - r_star) <= 1e-8:
            break
        if r_mid < r_star:
            lo = mid
        else:
            hi = mid
    return float(time_share * probs @ p), p


def inversion_power(gains: np.ndarray, probs: np.ndarray, r_star: float,
                    time_share: float = 1.0) -> float:
    """Average power of holding a constant rate in every state.

    Slot power (2^(r/time_share) - 1)/g(n) keeps the slot rate constant;
    a zero-gain state makes any positive target unreachable.
    """
    g = np.asarray(gains, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if not 0 < time_share <= 1:
        raise ValueError("time_share must lie in (0, 1]")
    if r_star < 0:
        raise ValueError("rate target must be nonnegative")
    if r_star == 0:
        return 0.0
    live = probs > 0
    if np.any(g[live] <= 0):
        raise InfeasibleError("zero-gain state: constant-rate target unreachable")
    slot = (2.0 ** (r_star / time_share) - 1.0) / g[live]
    return float(time_share * probs[live] @ slot)


def _per_user_power(gains: np.ndarray, probs: np.ndarray, traffic: str,
                    target: float, time_share: float) -> float:
    if traffic == NDC:
        avg, _ = waterfill_power(gains, probs, target, time_share)
        return avg
    return inversion_power(gains, probs, target, time_share)


def tdma_power(channels, profiles) -> float:
    """Total average power of equal-slot TDMA with coherent precoding."""
    h = channels.states
    probs = channels.probabilities
    n, k, m = h.shape
    ndc, dc, targets = _split_profiles(profiles, k)
    share = 1.0 / k
    gains = np.linalg.norm(h, axis=2) ** 2          # (N, K) coherent gains
    total = 0.0
    for prof in profiles:
        u = prof.user
        total += _per_user_power(gains[:, u], probs, prof.traffic,
                                 targets[u], share)
    return total


def zf_sdma_power(channels, profiles) -> float:
    """Total average power of zero-forcing SDMA (all users simultaneous)."""
    h = channels.states
    probs = channels.probabilities
    n, k, m = h.shape
    ndc, dc, targets = _split_profiles(profiles, k)
    gains = np.empty((n, k))
    for s in range(n):
        gains[s] = zf_precoders(h[s]).gains
    total = 0.0
    for prof in profiles:
        u = prof.user
        total += _per_user_power(gains[:, u], probs, prof.traffic,
                                 targets[u], 1.0)
    return total
