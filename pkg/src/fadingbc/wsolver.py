"""Per-state weighted power minimization on the dual multiple-access channel.

Solves, for one channel state H and nonnegative user weights beta,

    min_{q >= 0}  sum_k q_k - sum_k (b_k - b_{k+1}) log2 det(I + G_k)

where b_1 >= b_2 >= ... are the weights sorted descending (ties broken by
ascending user index, b_{K+1} = 0) and G_k accumulates q_i h_i^H h_i over the
first k sorted users.  The objective is convex and smooth, so cyclic
coordinate minimization converges to the global minimum.

Each coordinate subproblem reduces, via the Sherman-Morrison identity, to a
scalar root-finding problem for

    d(q) = sum_{k >= rank(m)} w_k * v_k / (1 + q v_k) = ln 2,
    v_k = h_m B_k^{-1} h_m^H,

with d nonincreasing in q; the minimizer is 0 when d(0) <= ln 2 and
otherwise the unique root, which lies in [0, beta_m / ln 2].

`coordinate_min`/`solve_p3` implement the readable single-state path with
plain bisection.  `solve_p3_batch` runs many states in lockstep with a
bracket-safeguarded Newton iteration for the same root and is what the
scheduling loops use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .macregion import corner_rates, logdet2_hermitian

__all__ = [
    "P3Config",
    "P3Solution",
    "order_from_weights",
    "p3_objective",
    "coordinate_min",
    "kkt_residual",
    "solve_p3",
    "BatchP3Solution",
    "solve_p3_batch",
]

_LN2 = float(np.log(2.0))


@dataclass
class P3Config:
    """Tolerances for the per-state solver."""

    bisect_tol: float = 1e-10
    obj_tol: float = 1e-9
    kkt_tol: float = 1e-9
    max_sweeps: int = 500

    def __post_init__(self) -> None:
        if min(self.bisect_tol, self.obj_tol, self.kkt_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


@dataclass
class P3Solution:
    """Solution of the weighted per-state problem for one channel state."""

    powers: np.ndarray
    rates: np.ndarray
    order: np.ndarray
    objective: float
    kkt_residual: float
    sweeps: int
    converged: bool


def _check_inputs(channel: np.ndarray, beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = np.asarray(channel, dtype=complex)
    b = np.asarray(beta, dtype=float)
    if h.ndim != 2:
        raise DimensionError("channel must have shape (K, M)")
    if b.shape != (h.shape[0],):
        raise DimensionError("beta must have shape (K,)")
    if np.any(b < 0):
        raise ValueError("weights must be nonnegative")
    return h, b


def order_from_weights(beta: np.ndarray) -> np.ndarray:
    """Decoding order: descending weight, ties by ascending user index.

    ``order[0]`` (largest weight) is decoded last, interference-free.
    """
    b = np.asarray(beta, dtype=float)
    return np.argsort(-b, kind="stable")


def _sorted_weight_gaps(sorted_beta: np.ndarray) -> np.ndarray:
    """w_k = b_k - b_{k+1} with b_{K+1} = 0, for descending sorted weights."""
    return sorted_beta - np.concatenate([sorted_beta[1:], [0.0]])


def p3_objective(channel: np.ndarray, powers: np.ndarray, beta: np.ndarray) -> float:
    """sum(q) minus the weighted sum of cumulative log-det terms."""
    h, b = _check_inputs(channel, beta)
    q = np.asarray(powers, dtype=float)
    pi = order_from_weights(b)
    w = _sorted_weight_gaps(b[pi])
    m = h.shape[1]
    acc = np.eye(m, dtype=complex)
    total = float(q.sum())
    for j, user in enumerate(pi):
        acc = acc + q[user] * np.outer(h[user].conj(), h[user])
        if w[j] > 0.0:
            total -= w[j] * logdet2_hermitian(acc)
    return total


def _coordinate_curve(channel: np.ndarray, powers: np.ndarray, user: int,
                      beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sherman-Morrison coefficients (w_k, v_k) of d(q) for one coordinate."""
    h, b = _check_inputs(channel, beta)
    q = np.asarray(powers, dtype=float)
    pi = order_from_weights(b)
    pos = int(np.nonzero(pi == user)[0][0])
    w = _sorted_weight_gaps(b[pi])
    m = h.shape[1]
    acc = np.eye(m, dtype=complex)
    for i in range(pos):
        u = pi[i]
        acc = acc + q[u] * np.outer(h[u].conj(), h[u])
    hm = h[user]
    ws, vs = [], []
    for j in range(pos, len(pi)):
        u = pi[j]
        if u != user:
            acc = acc + q[u] * np.outer(h[u].conj(), h[u])
        if w[j] > 0.0:
            ws.append(w[j])
            vs.append(float(np.real(hm @ np.linalg.solve(acc, hm.conj()))))
    return np.asarray(ws), np.asarray(vs)


def coordinate_min(channel: np.ndarray, powers: np.ndarray, user: int,
                   beta: np.ndarray, bisect_tol: float = 1e-10) -> float:
    """Exact minimizer of the objective in coordinate ``user``, others fixed.

    Returns 0 when d(0) <= ln 2, otherwise bisects d(q) = ln 2 on
    [0, beta_user / ln 2]; d is nonincreasing so the root is unique.
    """
    ws, vs = _coordinate_curve(channel, powers, user, beta)
    d0 = float(np.sum(ws * vs))
    if d0 <= _LN2:
        return 0.0

    def d(q: float) -> float:
        return float(np.sum(ws * vs / (1.0 + q * vs)))

    lo, hi = 0.0, float(beta[user]) / _LN2
    width_tol = bisect_tol * (1.0 + hi)
    while hi - lo > width_tol:
        mid = 0.5 * (lo + hi)
        val = d(mid)
        if abs(val - _LN2) < bisect_tol:
            return mid
        if val > _LN2:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def kkt_residual(channel: np.ndarray, powers: np.ndarray, beta: np.ndarray,
                 power_tol: float = 1e-9) -> float:
    """Max stationarity violation over coordinates.

    For q_m > power_tol the optimality condition is d(q_m) = ln 2; at
    q_m = 0 it relaxes to d(0) <= ln 2.
    """
    q = np.asarray(powers, dtype=float)
    worst = 0.0
    for user in range(len(q)):
        ws, vs = _coordinate_curve(channel, q, user, beta)
        val = float(np.sum(ws * vs / (1.0 + q[user] * vs)))
        if q[user] > power_tol:
            worst = max(worst, abs(val - _LN2))
        else:
            worst = max(worst, max(0.0, val - _LN2))
    return worst


def solve_p3(channel: np.ndarray, beta: np.ndarray, config: P3Config | None = None,
             q0: np.ndarray | None = None) -> P3Solution:
    """Cyclic coordinate descent over users until the KKT conditions hold."""
    cfg = config or P3Config()
    h, b = _check_inputs(channel, beta)
    k = h.shape[0]
    q = np.zeros(k) if q0 is None else np.asarray(q0, dtype=float).copy()
    pi = order_from_weights(b)
    obj = p3_objective(h, q, b)
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_sweeps + 1):
        obj_before = obj
        for user in pi:
            q[user] = coordinate_min(h, q, user, b, cfg.bisect_tol)
            new_obj = p3_objective(h, q, b)
            assert new_obj <= obj + 1e-12 * (1.0 + abs(obj)), "objective increased"
            obj = new_obj
        if obj_before - obj < cfg.obj_tol * (1.0 + abs(obj)):
            if kkt_residual(h, q, b) <= cfg.kkt_tol:
                converged = True
                break
    resid = kkt_residual(h, q, b)
    rates = corner_rates(h, q, pi)
    return P3Solution(
        powers=q,
        rates=rates,
        order=pi,
        objective=obj,
        kkt_residual=resid,
        sweeps=sweeps,
        converged=converged or resid <= cfg.kkt_tol,
    )


# --- batched path ----------------------------------------------------------

@dataclass
class BatchP3Solution:
    """Per-state solutions for a stack of channel states."""

    powers: np.ndarray      # (S, K)
    rates: np.ndarray       # (S, K)
    orders: np.ndarray      # (S, K)
    objectives: np.ndarray  # (S,)
    kkt_residuals: np.ndarray  # (S,)
    sweeps: int
    converged: np.ndarray   # (S,) bool

    # log-det values along the decoding order, kept for corner re-splits
    sorted_logdets: np.ndarray = field(default=None, repr=False)  # (S, K)


def _coordinate_vs(hs: np.ndarray, a: np.ndarray, j: int, eye: np.ndarray) -> np.ndarray:
    """v_t = h_j B_t^{-1} h_j^H for t >= j, batched over states.

    ``hs`` is (S, K, M) sorted by decoding order, ``a`` the per-user Gram
    terms q_t h_t^H h_t, and B_t = I + sum_{i <= t} a_i - a_j.
    """
    cum = np.cumsum(a, axis=1)
    b = eye + cum[:, j:] - a[:, j:j + 1]
    rhs = hs[:, j].conj()[:, None, :, None]
    x = np.linalg.solve(b, np.broadcast_to(rhs, b.shape[:2] + rhs.shape[2:]))
    return np.maximum(np.einsum("sm,stm->st", hs[:, j], x[..., 0]).real, 0.0)


def _root_newton(w: np.ndarray, v: np.ndarray, upper: np.ndarray, q_init: np.ndarray,
                 active: np.ndarray, tol: float) -> np.ndarray:
    """Solve d(q) = ln 2 per lane with bracketed Newton on [0, upper].

    d(q) = sum_t w_t v_t / (1 + q v_t) is convex and decreasing, so Newton
    steps that leave the known bracket fall back to bisection.
    """
    s = w.shape[0]
    lo = np.zeros(s)
    hi = upper.copy()
    q = np.clip(q_init, 0.0, upper)
    live = active.copy()
    for _ in range(80):
        if not live.any():
            break
        denom = 1.0 + q[:, None] * v
        f = np.sum(w * v / denom, axis=1) - _LN2
        lo = np.where(live & (f > 0), q, lo)
        hi = np.where(live & (f < 0), q, hi)
        live &= np.abs(f) > tol
        live &= (hi - lo) > 1e-16 * (1.0 + upper)
        if not live.any():
            break
        fp = -np.sum(w * v * v / (denom * denom), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(fp < 0, q - f / fp, np.nan)
        mid = 0.5 * (lo + hi)
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        q = np.where(live, np.where(bad, mid, step), q)
    return np.where(active, q, 0.0)


def _batch_logdet2(mats: np.ndarray) -> np.ndarray:
    chol = np.linalg.cholesky(mats)
    diag = np.real(np.diagonal(chol, axis1=-2, axis2=-1))
    return 2.0 * np.sum(np.log(diag), axis=-1) / _LN2


def _batch_residual(hs: np.ndarray, a: np.ndarray, qs: np.ndarray, w: np.ndarray,
                    eye: np.ndarray, power_tol: float = 1e-9) -> np.ndarray:
    k = hs.shape[1]
    worst = np.zeros(hs.shape[0])
    for j in range(k):
        v = _coordinate_vs(hs, a, j, eye)
        val = np.sum(w[:, j:] * v / (1.0 + qs[:, j, None] * v), axis=1)
        resid = np.where(qs[:, j] > power_tol,
                         np.abs(val - _LN2),
                         np.maximum(0.0, val - _LN2))
        worst = np.maximum(worst, resid)
    return worst


def solve_p3_batch(channels: np.ndarray, beta: np.ndarray,
                   config: P3Config | None = None,
                   q0: np.ndarray | None = None) -> BatchP3Solution:
    """Run the coordinate-descent solver on S states in lockstep.

    ``channels`` is (S, K, M), ``beta`` (S, K); an optional ``q0`` warm
    start (user order) cuts the sweep count dramatically inside the outer
    scheduling loops.
    """
    cfg = config or P3Config()
    h = np.asarray(channels, dtype=complex)
    b = np.asarray(beta, dtype=float)
    if h.ndim != 3 or b.shape != h.shape[:2]:
        raise DimensionError("channels must be (S, K, M) and beta (S, K)")
    if np.any(b < 0):
        raise ValueError("weights must be nonnegative")
    s, k, m = h.shape

    orders = np.argsort(-b, axis=1, kind="stable")
    bs = np.take_along_axis(b, orders, axis=1)
    hs = np.take_along_axis(h, orders[..., None], axis=1)
    w = bs - np.concatenate([bs[:, 1:], np.zeros((s, 1))], axis=1)
    qs = np.zeros((s, k))
    if q0 is not None:
        qs = np.take_along_axis(np.asarray(q0, dtype=float), orders, axis=1).copy()
        qs = np.clip(qs, 0.0, bs / _LN2)

    outer = hs.conj()[..., :, None] * hs[..., None, :]   # (S, K, M, M)
    a = qs[..., None, None] * outer
    eye = np.eye(m, dtype=complex)
    root_tol = min(cfg.kkt_tol * 1e-3, 1e-12)

    sweeps = 0
    converged = np.zeros(s, dtype=bool)
    resid = np.full(s, np.inf)
    dq_gate = None
    for sweeps in range(1, cfg.max_sweeps + 1):
        q_prev = qs.copy()
        for j in range(k):
            v = _coordinate_vs(hs, a, j, eye)
            wj = w[:, j:]
            d0 = np.sum(wj * v, axis=1)
            active = (d0 > _LN2) & (bs[:, j] > 0)
            upper = np.where(bs[:, j] > 0, bs[:, j] / _LN2, 0.0)
            qs[:, j] = _root_newton(wj, v, upper, qs[:, j], active, root_tol)
            a[:, j] = qs[:, j, None, None] * outer[:, j]
        dq = np.max(np.abs(qs - q_prev))
        scale = 1.0 + qs.max(initial=0.0)
        # Residual checks cost a sweep's worth of solves, so gate them on the
        # coordinate movement and tighten the gate if a check comes back red.
        gate = 1e-6 * scale if dq_gate is None else dq_gate
        if dq <= gate:
            resid = _batch_residual(hs, a, qs, w, eye)
            converged = resid <= cfg.kkt_tol
            if converged.all() or dq <= 1e-15 * scale:
                break
            dq_gate = max(dq / 8.0, 1e-15 * scale)
    if np.isinf(resid).any():
        resid = _batch_residual(hs, a, qs, w, eye)
        converged = resid <= cfg.kkt_tol

    mats = eye + np.cumsum(a, axis=1)
    logdets = _batch_logdet2(mats)
    rates_sorted = np.maximum(np.diff(logdets, axis=1, prepend=0.0), 0.0)
    objectives = qs.sum(axis=1) - np.sum(w * logdets, axis=1)

    powers = np.empty_like(qs)
    rates = np.empty_like(rates_sorted)
    np.put_along_axis(powers, orders, qs, axis=1)
    np.put_along_axis(rates, orders, rates_sorted, axis=1)
    return BatchP3Solution(
        powers=powers,
        rates=rates,
        orders=orders,
        objectives=objectives,
        kkt_residuals=resid,
        sweeps=sweeps,
        converged=converged,
        sorted_logdets=logdets,
    )
