"""Two-layer dual scheduling of mixed-deadline traffic on a fading downlink.

The long-term problem couples average-rate guarantees (delay-tolerant,
``NDC``) and per-state rate guarantees (delay-constrained, ``DC``) through
average transmit power.  Its Lagrange dual splits by fading state: each
average constraint gets one multiplier ``mu_k``, each per-state constraint
one ``delta_k(n)``, and for fixed multipliers every state solves the
weighted power minimization of :mod:`fadingbc.wsolver` with weights
``beta_k = mu_k`` (NDC) or ``delta_k(n)`` (DC).

Multipliers follow projected subgradient ascent,
``m' = max(m + step * (target - rate), 0)``.  Offline, the steps adapt per
coordinate (halve on violation sign flips, grow on persistent signs); the
online variant keeps a constant step, matching its stochastic-approximation
role.

Corner-point rate splits jump where two weights cross, so a rate target can
be unreachable by pure corners.  The loops then pin the two weights equal
and time-share the two adjacent decoding orders: at equal weights both
orders share the same optimal powers, so any convex blend of the two corner
rate vectors is achievable.  This resolution is needed per state (a DC
multiplier crossing a fixed NDC weight) and on averages (two NDC users
whose optimal multipliers coincide, e.g. symmetric users with equal
targets).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InfeasibleError
from .macregion import corner_rates
from .wsolver import P3Config, solve_p3, solve_p3_batch

__all__ = [
    "NDC",
    "DC",
    "UserProfile",
    "SolverConfig",
    "DualState",
    "Allocation",
    "OfflineResult",
    "P2Result",
    "mu_update",
    "delta_update",
    "subgradient_certificate",
    "dual_value",
    "solve_p2",
    "solve_p1_offline",
    "OnlineScheduler",
    "PfsScheduler",
]

_LN2 = float(np.log(2.0))

NDC = "NDC"
DC = "DC"


@dataclass
class UserProfile:
    """Traffic class and rate target of one user."""

    user: int
    traffic: str
    target: float

    def __post_init__(self) -> None:
        if self.traffic not in (NDC, DC):
            raise ValueError(f"traffic must be {NDC!r} or {DC!r}")
        if self.target < 0:
            raise ValueError("target rate must be nonnegative")
        if self.user < 0:
            raise ValueError("user index must be nonnegative")


@dataclass
class SolverConfig:
    """Knobs of the dual scheduling loops."""

    step_mu: float = 0.05
    step_delta: float = 0.05
    ewma: float = 0.01
    rate_tol: float = 1e-2
    inner_rate_tol: float | None = None
    persistence: int = 4
    max_outer: int = 600
    max_inner: int = 400
    adapt_steps: bool = True
    multiplier_init: float = 1.0
    power_cap: float = 1e6
    p3: P3Config = field(default_factory=lambda: P3Config(kkt_tol=1e-7))

    def __post_init__(self) -> None:
        if min(self.step_mu, self.step_delta, self.rate_tol, self.multiplier_init) <= 0:
            raise ValueError("steps, rate_tol and multiplier_init must be positive")
        if not 0 < self.ewma < 1:
            raise ValueError("ewma must lie in (0, 1)")
        if self.persistence < 1 or self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration limits must be >= 1")

    @property
    def inner_tol(self) -> float:
        return self.inner_rate_tol if self.inner_rate_tol is not None else 0.5 * self.rate_tol


@dataclass
class DualState:
    """Converged multipliers: mu per user (0 for DC users), delta per
    state and user (0 for NDC users)."""

    mu: np.ndarray
    delta: np.ndarray


@dataclass
class Allocation:
    """Per-state powers/rates plus their ensemble averages."""

    powers: np.ndarray
    rates: np.ndarray
    orders: np.ndarray
    average_power: float
    average_rates: np.ndarray


@dataclass
class OfflineResult:
    allocation: Allocation
    dual: DualState
    dual_value: float
    trace: list
    converged: bool
    outer_iterations: int
    tied_pairs: list = field(default_factory=list)

    @property
    def warm_start(self) -> dict:
        """Keyword arguments that seed :func:`solve_p1_offline` for a nearby
        problem (same ensemble shape, perturbed targets or channels)."""
        return {"mu0": self.dual.mu, "delta0": self.dual.delta,
                "q0": self.allocation.powers, "pairs0": self.tied_pairs}


@dataclass
class P2Result:
    powers: np.ndarray
    rates: np.ndarray
    delta: np.ndarray
    order: np.ndarray
    ok: bool
    iterations: int


def _split_profiles(profiles, num_users: int):
    """Sorted (ndc indices, dc indices, per-user targets) from profiles."""
    if len(profiles) != num_users:
        raise DimensionError(f"expected {num_users} profiles, got {len(profiles)}")
    seen = sorted(p.user for p in profiles)
    if seen != list(range(num_users)):
        raise DimensionError("profiles must cover users 0..K-1 exactly once")
    targets = np.zeros(num_users)
    ndc, dc = [], []
    for p in profiles:
        targets[p.user] = p.target
        (ndc if p.traffic == NDC else dc).append(p.user)
    return np.asarray(sorted(ndc), dtype=int), np.asarray(sorted(dc), dtype=int), targets


def _check_dc_gains(h: np.ndarray, dc: np.ndarray, targets: np.ndarray) -> None:
    """A DC user with a zero channel at any state cannot meet a positive target."""
    for u in dc:
        if targets[u] > 0 and np.any(np.sum(np.abs(h[:, u]) ** 2, axis=-1) == 0):
            raise InfeasibleError(
                f"user {u} has a zero-gain state but a per-state rate target")


def mu_update(mu, targets, avg_rates, step):
    """Projected subgradient step for average-rate multipliers."""
    return np.maximum(np.asarray(mu) + step * (np.asarray(targets) - np.asarray(avg_rates)), 0.0)


def delta_update(delta, targets, rates, step):
    """Projected subgradient step for per-state multipliers."""
    return np.maximum(np.asarray(delta) + step * (np.asarray(targets) - np.asarray(rates)), 0.0)


def subgradient_certificate(mu_a, mu_b, dual_a: float, dual_b: float,
                            avg_rates_a, targets, tol: float = 1e-8) -> bool:
    """Check g(b) <= g(a) + (targets - rates_a) . (b - a) + tol.

    ``targets - avg_rates_a`` is a supergradient of the concave dual at
    ``mu_a``; a violation beyond ``tol`` flags an inexact dual evaluation.
    """
    nu = np.asarray(targets, dtype=float) - np.asarray(avg_rates_a, dtype=float)
    gap = dual_b - dual_a - float(nu @ (np.asarray(mu_b) - np.asarray(mu_a)))
    return gap <= tol


def dual_value(channels, profiles, mu, delta, p3_config: P3Config | None = None) -> float:
    """Lagrange dual value at arbitrary nonnegative multipliers.

    Valid lower bound on the optimal average power for any mu, delta >= 0:
    sum_k mu_k target_k + E_n[P3_min(n) + sum_{k DC} delta_k(n) target_k].
    """
    h = channels.states
    probs = channels.probabilities
    ndc, dc, targets = _split_profiles(profiles, h.shape[1])
    mu = np.asarray(mu, dtype=float)
    delta = np.asarray(delta, dtype=float)
    beta = np.zeros(h.shape[:2])
    beta[:, ndc] = mu[ndc]
    beta[:, dc] = delta[:, dc]
    sol = solve_p3_batch(h, beta, p3_config or P3Config())
    value = float(mu[ndc] @ targets[ndc])
    value += float(probs @ sol.objectives)
    if dc.size:
        value += float(probs @ (delta[:, dc] @ targets[dc]))
    return value


class _AdaptiveSteps:
    """Per-coordinate step sizes: halve on sign flips, grow on streaks."""

    def __init__(self, shape, step0: float, adapt: bool = True,
                 grow: float = 1.7, shrink: float = 0.5, streak_len: int = 3):
        self.step0 = step0
        self.step = np.full(shape, step0, dtype=float)
        self.adapt = adapt
        self.grow = grow
        self.shrink = shrink
        self.streak_len = streak_len
        self.last_sign = np.zeros(shape)
        self.streak = np.zeros(shape, dtype=int)
        self.flips = np.zeros(shape, dtype=int)
        self.s_min = 1e-8 * step0
        self.s_max = 1e4 * step0

    def next(self, viol) -> np.ndarray:
        sign = np.sign(viol)
        flip = sign * self.last_sign < 0
        self.flips += flip
        if self.adapt:
            self.step = np.where(flip, np.maximum(self.step * self.shrink, self.s_min), self.step)
            self.streak = np.where(flip | (sign == 0), 0, self.streak + 1)
            ready = self.streak >= self.streak_len
            self.step = np.where(ready, np.minimum(self.step * self.grow, self.s_max), self.step)
            self.streak[ready] = 0
        self.last_sign = np.where(sign != 0, sign, self.last_sign)
        return self.step

    def boost(self, mask) -> None:
        self.step[mask] = np.maximum(self.step[mask], self.step0)
        self.flips[mask] = 0


# --- inner (per-state) layer ------------------------------------------------

@dataclass
class _InnerResult:
    powers: np.ndarray       # (N, K)
    rates: np.ndarray        # (N, K), blended where a jump was resolved
    delta: np.ndarray        # (N, K)
    orders: np.ndarray       # (N, K)
    objectives: np.ndarray   # (N,) weighted per-state objective values
    blended: np.ndarray      # (N,) states resolved on a tie face
    ok: bool
    iterations: int
    repair_hint: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    # (N,) stalled user per blended state (-1 elsewhere); feeding it back into
    # the next call skips stall detection when the multipliers barely moved
    faces: dict = field(default_factory=dict)
    # state index -> _FaceData, so average-rate blending can re-split a face
    failed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    # (N,) states whose repairs were exhausted; fed back as hints they are
    # written off immediately instead of re-burning the attempt budget


def _group_vertices(h_n: np.ndarray, q: np.ndarray, order: np.ndarray,
                    group: list[int]):
    """Corner rate vectors for every arrangement of ``group`` in the order.

    All group members carry the same weight, so each permutation of their
    decoding positions is optimal at the same powers; every arrangement
    yields one achievable corner of the tie face.
    """
    base = [int(u) for u in order]
    slots = sorted(base.index(g) for g in group)
    vertices, orders = [], []
    for perm in itertools.permutations(group):
        arranged = base.copy()
        for slot, member in zip(slots, perm):
            arranged[slot] = member
        arranged = np.asarray(arranged)
        vertices.append(corner_rates(h_n, q, arranged))
        orders.append(arranged)
    return np.asarray(vertices), orders


def _blend_vertices(vertices: np.ndarray, cols: np.ndarray, want: np.ndarray,
                    tol: float = 1e-7):
    """Convex weights over corner rows matching ``want`` on columns ``cols``.

    Enumerates basic solutions of the equality system (targets plus the
    simplex constraint) in one batched solve; returns (indices, weights) for
    the first feasible basis or None.
    """
    count = len(vertices)
    goal = np.append(want, 1.0)
    a_full = np.vstack([vertices[:, cols].T, np.ones((1, count))])
    size = min(len(cols) + 1, count)
    subs = np.asarray(list(itertools.combinations(range(count), size)))
    a_s = a_full[:, subs].transpose(1, 0, 2)
    lam = np.linalg.pinv(a_s) @ goal
    resid = np.abs(a_s @ lam[..., None] - goal[:, None]).max(axis=(1, 2))
    feas = (lam.min(axis=1) >= -1e-9) & (resid <= tol)
    if not feas.any():
        return None
    i = int(np.argmax(feas))
    lam_i = np.clip(lam[i], 0.0, None)
    return list(subs[i]), lam_i / lam_i.sum()


@dataclass
class _FaceData:
    """A resolved tie face: every achievable corner plus what stays pinned."""

    vertices: np.ndarray   # (P, K) rate vector of each group arrangement
    group: list[int]
    pinned: np.ndarray     # DC members whose targets any blend must keep
    want: np.ndarray       # their target rates
    level: float = 0.0     # common multiplier level of the group
    tol: float = 1e-7      # blend residual slack (loose when the level is
    #                        itself only bisected to finite accuracy)


def _face_extremes(face: _FaceData, user: int):
    """Blends over a tie face with ``user``'s rate extremized.

    Maximizes and minimizes the user's rate over convex vertex weights that
    keep the face's DC targets exact, by enumerating basic solutions of the
    small equality system.  Returns (rates_low, rates_high) full-length rate
    vectors, or None when no feasible basis emerges.
    """
    verts = face.vertices
    count = len(verts)
    m = len(face.pinned) + 1
    a_full = np.vstack([verts[:, face.pinned].T, np.ones((1, count))])
    b = np.append(face.want, 1.0)
    size = min(m, count)
    subs = np.asarray(list(itertools.combinations(range(count), size)))
    a_s = a_full[:, subs].transpose(1, 0, 2)            # (C, m, size)
    lam = np.linalg.pinv(a_s) @ b                        # (C, size)
    resid = np.abs(a_s @ lam[..., None] - b[:, None]).max(axis=(1, 2))
    feas = (lam.min(axis=1) >= -1e-9) & (resid <= face.tol)
    if not feas.any():
        return None
    vals = np.einsum("cs,cs->c", lam, verts[:, user][subs])
    vals = np.where(feas, vals, np.nan)
    i_lo, i_hi = int(np.nanargmin(vals)), int(np.nanargmax(vals))
    lo = np.clip(lam[i_lo], 0.0, None) @ verts[subs[i_lo]]
    hi = np.clip(lam[i_hi], 0.0, None) @ verts[subs[i_hi]]
    return lo, hi


def _settle_other_dc(h_n: np.ndarray, beta: np.ndarray, others: np.ndarray,
                     targets: np.ndarray, cfg: SolverConfig, q: np.ndarray,
                     iters: int = 60):
    """Re-converge non-group DC multipliers with the tie group pinned.

    Mutates ``beta``/``q`` in place and returns the last solve, or None when
    the leftover users will not settle (e.g. they stall on a tie of their
    own, which the caller treats as a failed repair).  Persistent sign flips
    abort early; they mean a leftover user has a jump of its own.
    """
    sol = solve_p3_batch(h_n[None], beta[None], cfg.p3, q0=q)
    q[:] = sol.powers
    if others.size == 0:
        return sol
    steps = _AdaptiveSteps((others.size,), cfg.step_delta)
    for _ in range(iters):
        viol = targets[others] - sol.rates[0, others]
        if np.max(np.abs(viol)) <= 0.5 * cfg.inner_tol:
            return sol
        if np.any(steps.flips >= 10):
            return None
        beta[others] = np.maximum(beta[others] + steps.next(viol) * viol, 0.0)
        sol = solve_p3_batch(h_n[None], beta[None], cfg.p3, q0=q)
        q[:] = sol.powers
    return None


def _attempt_face(h_n: np.ndarray, beta_n: np.ndarray, dc: np.ndarray,
                  targets: np.ndarray, delta_n: np.ndarray, cfg: SolverConfig,
                  q_warm: np.ndarray, level: float, fixed: bool,
                  group: list[int]):
    """Resolve one state on the tie face spanned by ``group``.

    Pins every group member to a common level, settles the remaining DC
    multipliers, and blends the group's decoding arrangements so each
    grouped DC user's rate meets its target.  A free level (``fixed``
    False) is first bisected on the group sum rate.  Returns
    (powers, rates, delta, order, objective, _FaceData) or None.
    """
    tol = cfg.inner_tol
    pinned_dc = np.asarray(sorted(g for g in group if g in dc), dtype=int)
    others = np.asarray([w for w in dc if w not in pinned_dc
                         and targets[w] > 0], dtype=int)

    # settled multipliers/powers carry over between trial levels: adjacent
    # levels perturb the others only slightly, so each settle is a few steps
    warm_beta = beta_n.copy()
    warm_beta[dc] = delta_n[dc]
    warm_q = q_warm[None].copy()

    def face(lv: float):
        beta = warm_beta.copy()
        beta[group] = lv
        q = warm_q.copy()
        sol = _settle_other_dc(h_n, beta, others, targets, cfg, q)
        if sol is None:
            return None
        warm_beta[others] = beta[others]
        warm_q[:] = q
        return beta, q[0], sol

    got = face(level)
    if got is None:
        return None
    if not fixed:
        # slide the common level until the group's sum rate (invariant
        # under in-group reordering) matches the summed targets
        want_sum = targets[pinned_dc].sum()
        lo = hi = level
        flo = fhi = want_sum - got[2].rates[0, pinned_dc].sum()
        width = 0.02 * (1.0 + level)
        for _ in range(30):
            if flo > 0 >= fhi:
                break
            trial_lv = max(lo - width, 1e-6) if flo <= 0 else hi + width
            width *= 2.0
            trial = face(trial_lv)
            if trial is None:
                return None
            miss = want_sum - trial[2].rates[0, pinned_dc].sum()
            if flo <= 0:
                lo, flo = trial_lv, miss
            else:
                hi, fhi = trial_lv, miss
        if not flo > 0 >= fhi:
            return None
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            trial = face(mid)
            if trial is None:
                return None
            miss = want_sum - trial[2].rates[0, pinned_dc].sum()
            got, level = trial, mid
            if abs(miss) <= min(1e-4, 0.05 * tol):
                break
            if miss > 0:
                lo = mid
            else:
                hi = mid
        if abs(want_sum - got[2].rates[0, pinned_dc].sum()) > 0.5 * tol:
            return None

    beta, q, sol = got
    vertices, arrangements = _group_vertices(h_n, q, sol.orders[0], group)
    blend_tol = 1e-7 if fixed else 3e-4
    pick = _blend_vertices(vertices, pinned_dc, targets[pinned_dc], tol=blend_tol)
    if pick is None:
        return None
    sub, lam = pick
    rates = lam @ vertices[sub]
    if np.max(np.abs(targets[pinned_dc] - rates[pinned_dc])) > tol:
        return None
    delta_try = delta_n.copy()
    delta_try[pinned_dc] = level
    delta_try[others] = beta[others]
    order = arrangements[sub[int(np.argmax(lam))]]
    data = _FaceData(vertices, group, pinned_dc, targets[pinned_dc].copy(),
                     level, blend_tol)
    return q, rates, delta_try, order, float(sol.objectives[0]), data


def _attempt_cross_face(h_n: np.ndarray, beta_n: np.ndarray, dc: np.ndarray,
                        targets: np.ndarray, delta_n: np.ndarray,
                        cfg: SolverConfig, q_warm: np.ndarray,
                        pins: dict[int, float]):
    """Resolve one state that sits on two tie planes at once.

    ``pins`` maps each stalled DC user to its own fixed level (the weight of
    a different NDC user).  The face is then the product of the individual
    ties: its corners are the tie-break choices inside each equal-weight
    bucket, and one convex blend across those corners meets every pinned
    target simultaneously.  Returns the same tuple as :func:`_attempt_face`.
    """
    tol = cfg.inner_tol
    pinned_dc = np.asarray(sorted(pins), dtype=int)
    others = np.asarray([w for w in dc if w not in pins and targets[w] > 0],
                        dtype=int)
    beta = beta_n.copy()
    beta[dc] = delta_n[dc]
    for u, lv in pins.items():
        beta[u] = lv
    q = q_warm[None].copy()
    sol = _settle_other_dc(h_n, beta, others, targets, cfg, q)
    if sol is None:
        return None
    base = [int(u) for u in sol.orders[0]]
    buckets = []
    for lv in sorted(set(pins.values()), reverse=True):
        members = [u for u, l in pins.items() if l == lv]
        members += [int(j) for j in np.flatnonzero(np.abs(beta - lv) <= 1e-9)
                    if j not in pins]
        if len(members) >= 2:
            buckets.append(sorted(members))
    if len(buckets) < 2:
        return None
    slot_sets = [sorted(base.index(g) for g in b) for b in buckets]
    pools = [list(itertools.permutations(b)) for b in buckets]
    vertices, arrangements = [], []
    for combo in itertools.islice(itertools.product(*pools), 24):
        arranged = base.copy()
        for slots, perm in zip(slot_sets, combo):
            for slot, member in zip(slots, perm):
                arranged[slot] = member
        arranged = np.asarray(arranged)
        vertices.append(corner_rates(h_n, q[0], arranged))
        arrangements.append(arranged)
    vertices = np.asarray(vertices)
    blend_tol = 1e-7 if others.size == 0 else 3e-4
    pick = _blend_vertices(vertices, pinned_dc, targets[pinned_dc],
                           tol=blend_tol)
    if pick is None:
        return None
    sub, lam = pick
    rates = lam @ vertices[sub]
    if np.max(np.abs(targets[pinned_dc] - rates[pinned_dc])) > tol:
        return None
    delta_try = delta_n.copy()
    for u, lv in pins.items():
        delta_try[u] = lv
    delta_try[others] = beta[others]
    order = arrangements[sub[int(np.argmax(lam))]]
    group = sorted({m for b in buckets for m in b})
    data = _FaceData(vertices, group, pinned_dc, targets[pinned_dc].copy(),
                     max(pins.values()), blend_tol)
    return q[0], rates, delta_try, order, float(sol.objectives[0]), data


def _repair_rate_jump(h_n: np.ndarray, beta_n: np.ndarray, user: int,
                      ndc: np.ndarray, dc: np.ndarray, targets: np.ndarray,
                      delta_n: np.ndarray, cfg: SolverConfig, q_warm: np.ndarray):
    """Resolve one state whose DC user ``user`` stalls across a weight tie.

    The stalled multiplier sits at a crossing with either a fixed NDC weight
    or another DC multiplier.  Both cases pin the whole tie group to one
    common level and time-share the group's decoding arrangements so every
    grouped DC user meets its target exactly.  A group holding an NDC user
    keeps that fixed weight as the level; a pure DC group leaves the level
    free, and it is bisected on the group sum rate, which stays continuous
    in the level even though the individual splits jump.  Returns
    (powers, rates, delta, order, objective) or None when no nearby tie
    face supports the targets.
    """
    tol = cfg.inner_tol
    here = delta_n[user]
    beta_now = beta_n.copy()
    beta_now[dc] = delta_n[dc]
    now = solve_p3_batch(h_n[None], beta_now[None], cfg.p3, q0=q_warm[None].copy())
    unmet = np.abs(targets - now.rates[0]) > 0.5 * tol
    dct = np.asarray([int(w) for w in dc if targets[w] > 0], dtype=int)

    def attempt(level: float, fixed: bool, group: list[int]):
        return _attempt_face(h_n, beta_n, dc, targets, delta_n, cfg, q_warm,
                             level, fixed, group)

    cands: list[tuple[float, float, bool]] = []
    for j in ndc:
        if beta_n[j] > 0:
            cands.append((abs(here - beta_n[j]), float(beta_n[j]), True))
    for w in dc:
        if w != user and delta_n[w] > 0 and targets[w] > 0:
            cands.append((abs(here - delta_n[w]), float(delta_n[w]), False))
    cands.sort()
    seen: list[float] = []

    for _, level, fixed in cands:
        if any(abs(level - s) <= 1e-9 for s in seen):
            continue
        seen.append(level)
        if len(seen) > 2:
            break
        near = 0.05 * (1.0 + level)
        base = [int(user)]
        base += [int(j) for j in ndc if abs(beta_n[j] - level) <= 1e-9]
        prox = base + [int(w) for w in dc if w != user and targets[w] > 0
                       and unmet[w] and abs(delta_n[w] - level) <= near]
        wide = base + [int(w) for w in dc if w != user and targets[w] > 0
                       and unmet[w]]
        # last resort sweeps in nearby DC users even when they currently sit
        # on target: a marginal neighbor can make a trio face infeasible yet
        # keep flipping in and out of the violation set
        grab = base + [int(w) for w in dc if w != user and targets[w] > 0
                       and abs(delta_n[w] - level) <= 2 * near]
        tried = []
        for group in (base, prox, wide, grab):
            if group in tried or len(group) > 4 or len(group) < 2:
                continue
            tried.append(group)
            out = attempt(level, fixed, group)
            if out is None:
                continue
            # the blend nails the group's DC targets; users settled outside
            # the group can still be off, so vet the whole rate vector
            if np.max(np.abs(out[1][dct] - targets[dct])) <= tol:
                return out

    # two DC users can each pin to a different NDC level (a crossing of two
    # tie planes); blend the tie-break corners of both buckets jointly
    snap: dict[int, float] = {}
    for w in dct:
        gaps = [(abs(delta_n[w] - beta_n[j]), float(beta_n[j]))
                for j in ndc if beta_n[j] > 0]
        if gaps:
            gap, lv = min(gaps)
            if gap <= 0.02 * (1.0 + lv):
                snap[int(w)] = lv
    if user in snap and len(snap) >= 2 and len(set(snap.values())) >= 2:
        out = _attempt_cross_face(h_n, beta_n, dc, targets, delta_n, cfg,
                                  q_warm, snap)
        if out is not None and np.max(np.abs(out[1][dct] - targets[dct])) <= tol:
            return out
    return None


def _converge_dc_multipliers(h: np.ndarray, probs: np.ndarray, ndc: np.ndarray,
                             dc: np.ndarray, targets: np.ndarray, mu: np.ndarray,
                             delta: np.ndarray, cfg: SolverConfig,
                             q0: np.ndarray | None = None,
                             hints: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
                             effort: str = "full") -> _InnerResult:
    """Drive every DC user's per-state rate to its target, state by state.

    States run batched and drop out as they converge; stubborn states whose
    multiplier oscillates across a weight tie are resolved on the tie face by
    :func:`_repair_rate_jump`.  ``hints`` (stalled user per state, and the NDC
    multipliers the hint was recorded under) short-circuits stall detection
    for states already known to need a blend, as long as the NDC multipliers
    have not drifted since; the tie group itself is always rebuilt fresh so
    the blend geometry tracks the current multipliers.

    ``effort="loose"`` runs a cheap inexact pass: double tolerance, few
    iterations, no tie repairs.  The outer loop uses it while its own
    multipliers are still far from stationary, where exact per-state
    convergence would be recomputed anyway.
    """
    n, k, _ = h.shape
    beta = np.zeros((n, k))
    beta[:, ndc] = mu[ndc]
    q = np.zeros((n, k)) if q0 is None else np.asarray(q0, dtype=float).copy()
    rates = np.zeros((n, k))
    orders = np.tile(np.arange(k), (n, 1))
    objectives = np.zeros(n)
    blended = np.zeros(n, dtype=bool)
    hint_out = np.full(n, -1, dtype=int)
    delta = np.asarray(delta, dtype=float).copy()

    dc_active = np.asarray([u for u in dc if targets[u] > 0], dtype=int)
    delta[:, [u for u in dc if targets[u] <= 0]] = 0.0

    if dc_active.size == 0:
        if dc.size:
            beta[:, dc] = delta[:, dc]
        sol = solve_p3_batch(h, beta, cfg.p3, q0=q if q0 is not None else None)
        return _InnerResult(sol.powers, sol.rates, delta, sol.orders,
                            sol.objectives, blended, True, 1, hint_out)

    full = effort == "full"
    tol = cfg.inner_tol if full else 2.0 * cfg.inner_tol
    max_inner = cfg.max_inner if full else min(cfg.max_inner, 36)
    steps = _AdaptiveSteps((n, dc_active.size), cfg.step_delta, adapt=True)
    live = np.ones(n, dtype=bool)
    failed = np.zeros(n, dtype=bool)
    attempts = np.zeros(n, dtype=int)
    faces: dict[int, _FaceData] = {}

    def adopt(s_i: int, u: int, fix) -> bool:
        if fix is None:
            return False
        (q[s_i], rates[s_i], delta[s_i], orders[s_i], objectives[s_i],
         faces[s_i]) = fix
        blended[s_i] = True
        hint_out[s_i] = u
        live[s_i] = False
        return True

    def try_repair(s_i: int, u: int) -> bool:
        return adopt(s_i, u, _repair_rate_jump(h[s_i], beta[s_i], u, ndc, dc,
                                               targets, delta[s_i], cfg, q[s_i]))

    it = 0
    for it in range(1, max_inner + 1):
        idx = np.flatnonzero(live)
        if idx.size == 0:
            break
        beta[np.ix_(idx, dc_active)] = delta[np.ix_(idx, dc_active)]
        sol = solve_p3_batch(h[idx], beta[idx], cfg.p3, q0=q[idx])
        q[idx] = sol.powers
        rates[idx] = sol.rates
        orders[idx] = sol.orders
        objectives[idx] = sol.objectives
        viol_full = np.zeros((n, dc_active.size))
        viol_full[idx] = targets[dc_active] - rates[np.ix_(idx, dc_active)]
        done = np.max(np.abs(viol_full[idx]), axis=1) <= tol
        live[idx[done]] = False
        if it == 1 and full and hints is not None:
            hint_user, failed_prev, mu_prev = hints
            if ndc.size:
                drift = float(np.max(np.abs(mu[ndc] - mu_prev[ndc])))
                fresh = drift <= 0.02 * (1.0 + float(np.max(mu[ndc])))
            else:
                fresh = True
            if fresh:
                for s_i in np.flatnonzero(live & (hint_user >= 0)):
                    try_repair(s_i, int(hint_user[s_i]))
                if failed_prev.size:
                    gone = live & failed_prev
                    live[gone] = False
                    failed[gone] = True
        step = steps.next(viol_full)
        rem = np.flatnonzero(live)
        if rem.size == 0:
            break
        delta[np.ix_(rem, dc_active)] = np.maximum(
            delta[np.ix_(rem, dc_active)] + step[rem] * viol_full[rem], 0.0)
        if full and it >= 12:
            flippy = steps.flips >= max(5, min(it // 4, 16))
            settled = (steps.step <= cfg.step_delta / 32.0) | (it >= 40)
            stalled_pair = flippy & settled & (np.abs(viol_full) > tol)
            for s_i in np.flatnonzero(live & stalled_pair.any(axis=1)):
                if attempts[s_i] >= 4:
                    live[s_i] = False
                    failed[s_i] = True
                    continue
                attempts[s_i] += 1
                u = int(dc_active[int(np.argmax(np.abs(viol_full[s_i])))])
                if not try_repair(s_i, u):
                    steps.boost(np.s_[s_i:s_i + 1])
    ok = not live.any() and not failed.any()
    return _InnerResult(q, rates, delta, orders, objectives, blended, ok, it,
                        hint_out, faces, failed)


# --- outer (average-rate) layer ----------------------------------------------

@dataclass
class _TiedPair:
    """Two NDC users sharing one multiplier level, rates split on the tie face."""

    k: int
    j: int
    level: float
    steps: _AdaptiveSteps
    lam: float = 0.5
    saturated: int = 0

    @property
    def step(self) -> float:
        return float(self.steps.step[0])


def _pair_corner_splits(h: np.ndarray, powers: np.ndarray, orders: np.ndarray,
                        k: int, j: int):
    """Rates of tied users (k, j) under both adjacent decoding orders.

    Returns (fav_k, unf_k, fav_j, unf_j, usable) arrays over states, where
    ``fav_k`` is user k's rate when decoded after j and ``usable`` flags
    states where the pair is adjacent in the decoding order.
    """
    n, kk, m = h.shape
    rows = np.arange(n)
    pos_k = np.argmax(orders == k, axis=1)
    pos_j = np.argmax(orders == j, axis=1)
    usable = np.abs(pos_k - pos_j) == 1
    first = np.minimum(pos_k, pos_j)

    hs = np.take_along_axis(h, orders[..., None], axis=1)
    qs = np.take_along_axis(powers, orders, axis=1)
    a = qs[..., None, None] * (hs.conj()[..., :, None] * hs[..., None, :])
    mats = np.eye(m, dtype=complex) + np.cumsum(a, axis=1)

    chol = np.linalg.cholesky(mats)
    ld = 2.0 * np.sum(np.log(np.real(np.diagonal(chol, axis1=-2, axis2=-1))), axis=-1) / _LN2
    ld_before = np.where(first > 0, ld[rows, np.maximum(first - 1, 0)], 0.0)
    ld_both = ld[rows, np.minimum(first + 1, kk - 1)]

    prior = np.where(first[:, None, None] > 0,
                     mats[rows, np.maximum(first - 1, 0)],
                     np.eye(m, dtype=complex)[None])
    outer_k = powers[:, k, None, None] * (h[:, k].conj()[:, :, None] * h[:, k][:, None, :])
    outer_j = powers[:, j, None, None] * (h[:, j].conj()[:, :, None] * h[:, j][:, None, :])

    def _ld2(mats_):
        c = np.linalg.cholesky(mats_)
        return 2.0 * np.sum(np.log(np.real(np.diagonal(c, axis1=-2, axis2=-1))), axis=-1) / _LN2

    ld_pk = _ld2(prior + outer_k)
    ld_pj = _ld2(prior + outer_j)
    pair_sum = ld_both - ld_before
    fav_k = ld_pk - ld_before          # k decoded last of the pair
    unf_j = pair_sum - fav_k
    fav_j = ld_pj - ld_before
    unf_k = pair_sum - fav_j
    return fav_k, unf_k, fav_j, unf_j, usable


def _apply_pair_blend(pair: _TiedPair, h, inner: _InnerResult, probs,
                      targets, rates: np.ndarray) -> None:
    """Choose the time-sharing fraction so user k's average rate meets its
    target, then write the blended pair rates into ``rates``.

    Two kinds of states contribute swing: plain corner states where the pair
    sits adjacent in the decoding order (the two swap orders bracket the
    split), and repaired tie faces containing both users (re-blended between
    the extremes that keep the face's DC targets pinned).
    """
    fav_k, unf_k, fav_j, unf_j, usable = _pair_corner_splits(
        h, inner.powers, inner.orders, pair.k, pair.j)
    blendable = usable & ~inner.blended
    faced: list[tuple[int, np.ndarray, np.ndarray]] = []
    for s, face in inner.faces.items():
        if pair.k in face.group and pair.j in face.group:
            ext = _face_extremes(face, pair.k)
            if ext is not None:
                faced.append((s, ext[0], ext[1]))
    if not blendable.any() and not faced:
        pair.saturated += 1
        return
    moving = blendable.copy()
    for s, _, _ in faced:
        moving[s] = True
    p = probs * blendable
    fixed_k = float((probs * ~moving) @ rates[:, pair.k])
    num = targets[pair.k] - fixed_k - float(p @ unf_k)
    den = float(p @ (fav_k - unf_k))
    for s, lo, hi in faced:
        num -= probs[s] * lo[pair.k]
        den += probs[s] * (hi[pair.k] - lo[pair.k])
    lam = 0.5 if den <= 1e-12 else num / den
    clipped = min(max(lam, 0.0), 1.0)
    pair.saturated = pair.saturated + 1 if lam != clipped else 0
    pair.lam = clipped
    rates[blendable, pair.k] = clipped * fav_k[blendable] + (1 - clipped) * unf_k[blendable]
    rates[blendable, pair.j] = clipped * unf_j[blendable] + (1 - clipped) * fav_j[blendable]
    for s, lo, hi in faced:
        rates[s] = clipped * hi + (1 - clipped) * lo


def solve_p1_offline(channels, profiles, config: SolverConfig | None = None,
                     mu0=None, delta0=None, q0=None, pairs0=None,
                     keep_trace: bool = True) -> OfflineResult:
    """Minimize average power subject to average (NDC) and per-state (DC)
    rate targets over a finite fading ensemble.

    Outer iterations adapt the NDC multipliers against average-rate
    violations; each iteration re-converges the per-state DC multipliers
    (warm-started).  Outer convergence is declared once every violation
    stays within ``rate_tol`` for ``persistence`` consecutive iterations.
    NDC users whose optimal multipliers coincide are detected by their
    crossing oscillations and merged onto a shared level with time-shared
    decoding orders.

    Raises :class:`InfeasibleError` when the average power exceeds
    ``config.power_cap`` while targets are still violated.  Returns the last
    iterate with ``converged=False`` when iterations run out.
    """
    cfg = config or SolverConfig()
    h = channels.states
    probs = channels.probabilities
    n, k, _ = h.shape
    ndc, dc, targets = _split_profiles(profiles, k)
    _check_dc_gains(h, dc, targets)

    if not np.any(targets > 0):
        alloc = Allocation(np.zeros((n, k)), np.zeros((n, k)),
                           np.tile(np.arange(k), (n, 1)), 0.0, np.zeros(k))
        return OfflineResult(alloc, DualState(np.zeros(k), np.zeros((n, k))),
                             0.0, [], True, 0)

    mu = np.zeros(k)
    mu[ndc] = cfg.multiplier_init
    if mu0 is not None:
        mu = np.asarray(mu0, dtype=float).copy()
    mu[targets <= 0] = 0.0
    delta = np.zeros((n, k))
    delta[:, dc] = cfg.multiplier_init
    if delta0 is not None:
        delta = np.asarray(delta0, dtype=float).copy()
    q = None if q0 is None else np.asarray(q0, dtype=float).copy()

    ndc_live = np.asarray([u for u in ndc if targets[u] > 0], dtype=int)
    steps = _AdaptiveSteps((ndc_live.size,), cfg.step_mu, adapt=cfg.adapt_steps)
    pairs: list[_TiedPair] = []
    live_set = set(ndc_live.tolist())
    for ka, kb, level, lam in pairs0 or []:
        if ka in live_set and kb in live_set and level > 0:
            pair_steps = _AdaptiveSteps((1,), cfg.step_mu, adapt=cfg.adapt_steps)
            pairs.append(_TiedPair(int(ka), int(kb), float(level), pair_steps,
                                   lam=float(lam)))
    crossings: dict[tuple[int, int], int] = {}
    prev_diff_sign: dict[tuple[int, int], float] = {}
    cooldown: dict[tuple[int, int], int] = {}
    nearfail: dict[tuple[int, int], int] = {}
    idx_of = {int(u): i for i, u in enumerate(ndc_live)}

    trace: list = []
    persistence = 0
    converged = False
    outer = 0
    inner = None
    hints = None
    full_effort = ndc_live.size == 0
    rates = np.zeros((n, k))
    for outer in range(1, cfg.max_outer + 1):
        for pair in pairs:
            mu[pair.k] = mu[pair.j] = pair.level
        inner = _converge_dc_multipliers(h, probs, ndc, dc, targets, mu, delta,
                                         cfg, q0=q, hints=hints,
                                         effort="full" if full_effort else "loose")
        # every few outers the write-offs get a fresh chance, so a slowly
        # sliding shared level cannot freeze a state out forever
        carry_failed = inner.failed if outer % 5 else np.zeros(n, dtype=bool)
        hints = (inner.repair_hint, carry_failed, mu.copy())
        q = inner.powers
        delta = inner.delta
        rates = inner.rates.copy()
        for pair in pairs:
            _apply_pair_blend(pair, h, inner, probs, targets, rates)
        avg_rates = probs @ rates
        avg_power = float(probs @ inner.powers.sum(axis=1))
        viol = targets - avg_rates

        if keep_trace:
            for u in range(k):
                mult = mu[u] if u in set(ndc.tolist()) else float(probs @ delta[:, u])
                trace.append((outer, u, float(mult), float(avg_rates[u]),
                              float(probs @ inner.powers[:, u])))

        ok_now = inner.ok and (ndc_live.size == 0 or np.max(np.abs(viol[ndc_live])) <= cfg.rate_tol)
        persistence = persistence + 1 if ok_now else 0
        if ndc_live.size == 0:
            converged = inner.ok
            break
        if not full_effort and (np.max(np.abs(viol[ndc_live])) <= 4 * cfg.rate_tol
                                or outer >= min(40, cfg.max_outer)):
            full_effort = True
        if persistence >= cfg.persistence:
            converged = True
            break
        if avg_power > cfg.power_cap and np.any(viol[ndc_live] > cfg.rate_tol):
            raise InfeasibleError(
                f"average power {avg_power:.3g} exceeded cap {cfg.power_cap:.3g} "
                "with rate targets still unmet")

        # multiplier updates for unmerged users
        merged_users = {u for pair in pairs for u in (pair.k, pair.j)}
        free = np.asarray([u for u in ndc_live if u not in merged_users], dtype=int)
        viol_vec = np.zeros(ndc_live.size)
        for i, u in enumerate(ndc_live):
            viol_vec[i] = viol[u] if u not in merged_users else 0.0
        step = steps.next(viol_vec)
        for i, u in enumerate(ndc_live):
            if u in merged_users:
                continue
            mu[u] = max(mu[u] + step[i] * viol[u], 0.0)
        # merged pairs track the pair-sum violation on a shared level
        for pair in pairs:
            v_sum = (targets[pair.k] + targets[pair.j]
                     - avg_rates[pair.k] - avg_rates[pair.j])
            s_pair = float(pair.steps.next(np.asarray([v_sum]))[0])
            pair.level = max(pair.level + s_pair * v_sum, 0.0)

        # tie detection / dissolution: merge on repeated multiplier crossings,
        # or on both steps collapsing under opposite-sign violations (the two
        # multipliers can also approach a shared level in anti-phase, without
        # ever crossing)
        for a_i in range(ndc_live.size):
            for b_i in range(a_i + 1, ndc_live.size):
                ka, kb = int(ndc_live[a_i]), int(ndc_live[b_i])
                if ka in merged_users or kb in merged_users:
                    continue
                key = (ka, kb)
                d = mu[ka] - mu[kb]
                s = np.sign(d)
                if key in prev_diff_sign and s != 0 and prev_diff_sign[key] != 0 \
                        and s != prev_diff_sign[key]:
                    crossings[key] = crossings.get(key, 0) + 1
                prev_diff_sign[key] = s
                near = abs(d) <= 0.05 * (1.0 + 0.5 * (mu[ka] + mu[kb]))
                stuck = viol[ka] * viol[kb] < 0 and max(abs(viol[ka]), abs(viol[kb])) > cfg.rate_tol
                flippy = (min(steps.flips[a_i], steps.flips[b_i]) >= 3
                          and max(steps.step[a_i], steps.step[b_i]) <= 0.5 * cfg.step_mu)
                # a near-tie can also jam the per-state layer: tie groups that
                # should span both users form around only one of two multiplier
                # values split by a hair, and their repairs keep failing
                tight = abs(d) <= 0.01 * (1.0 + 0.5 * (mu[ka] + mu[kb]))
                if tight and full_effort and not inner.ok:
                    nearfail[key] = nearfail.get(key, 0) + 1
                else:
                    nearfail[key] = 0
                if near and outer >= cooldown.get(key, 0) \
                        and (((crossings.get(key, 0) >= 4 or flippy) and stuck)
                             or nearfail.get(key, 0) >= 3):
                    level = 0.5 * (mu[ka] + mu[kb])
                    step0 = max(float(np.mean(step[[a_i, b_i]])), 0.2 * cfg.step_mu)
                    pair_steps = _AdaptiveSteps((1,), step0, adapt=cfg.adapt_steps)
                    pairs.append(_TiedPair(ka, kb, level, pair_steps))
                    crossings[key] = 0
        for pair in list(pairs):
            if pair.saturated >= 6:
                # keep the kick small: a wrongly merged pair usually sits a
                # hair from its separated optimum, and a large kick costs a
                # dozen outer iterations to walk back
                bump = min(max(2 * pair.step, 0.005 * (1.0 + pair.level)),
                           0.02 * (1.0 + pair.level))
                hi, lo = (pair.k, pair.j) if pair.lam >= 1.0 else (pair.j, pair.k)
                mu[hi] = pair.level + bump
                mu[lo] = max(pair.level - bump, 0.0)
                key = (min(pair.k, pair.j), max(pair.k, pair.j))
                crossings[key] = 0
                cooldown[key] = outer + 6
                for u in (pair.k, pair.j):
                    steps.flips[idx_of[u]] = 0
                    steps.step[idx_of[u]] = max(steps.step[idx_of[u]], 0.2 * cfg.step_mu)
                pairs.remove(pair)

    avg_rates = probs @ rates
    avg_power = float(probs @ inner.powers.sum(axis=1))
    alloc = Allocation(inner.powers, rates, inner.orders, avg_power, avg_rates)
    mu_out = np.zeros(k)
    mu_out[ndc] = mu[ndc]
    dval = float(mu_out[ndc] @ targets[ndc]) + float(probs @ inner.objectives)
    if dc.size:
        dval += float(probs @ (delta[:, dc] @ targets[dc]))
    tied = [(pair.k, pair.j, pair.level, pair.lam) for pair in pairs]
    return OfflineResult(alloc, DualState(mu_out, delta), dval, trace,
                         converged, outer, tied)


def solve_p2(channel: np.ndarray, profiles, mu, config: SolverConfig | None = None,
             delta0=None) -> P2Result:
    """Single-state power minimization: fixed NDC weights ``mu``, DC
    multipliers converged so each DC rate meets its target."""
    cfg = config or SolverConfig()
    h = np.asarray(channel, dtype=complex)[None]
    k = h.shape[1]
    ndc, dc, targets = _split_profiles(profiles, k)
    _check_dc_gains(h, dc, targets)
    mu_vec = np.zeros(k)
    mu_vec[ndc] = np.asarray(mu, dtype=float)[ndc]
    delta = np.zeros((1, k))
    delta[:, dc] = cfg.multiplier_init if delta0 is None else np.asarray(delta0, dtype=float)[dc]
    inner = _converge_dc_multipliers(h, np.ones(1), ndc, dc, targets, mu_vec, delta, cfg)
    return P2Result(inner.powers[0], inner.rates[0], inner.delta[0],
                    inner.orders[0], inner.ok, inner.iterations)


# --- online layer -------------------------------------------------------------

class OnlineScheduler:
    """Block-by-block scheduler tracking average-rate targets on the fly.

    Per block t: project the NDC multipliers against the running averages
    (constant step), converge the DC multipliers of the current state only,
    transmit, then fold the realized rates into the exponentially weighted
    averages.  No fading statistics are needed.
    """

    def __init__(self, profiles, config: SolverConfig | None = None):
        self.cfg = config or SolverConfig(step_mu=0.01, step_delta=0.05, ewma=0.01)
        self.profiles = list(profiles)
        k = len(self.profiles)
        self.ndc, self.dc, self.targets = _split_profiles(self.profiles, k)
        self.num_users = k
        self.mu = np.zeros(k)
        self.mu[self.ndc] = self.cfg.multiplier_init
        self.mu[self.targets <= 0] = 0.0
        self.rbar = np.zeros(k)
        self.t = 0
        self.trace: list = []

    def step(self, channel: np.ndarray):
        """Schedule one fading block; returns (rates, powers)."""
        h = np.asarray(channel, dtype=complex)
        if h.shape[0] != self.num_users:
            raise DimensionError("channel has wrong number of users")
        _check_dc_gains(h[None], self.dc, self.targets)
        self.t += 1
        live = self.ndc[self.targets[self.ndc] > 0]
        self.mu[live] = mu_update(self.mu[live], self.targets[live],
                                  self.rbar[live], self.cfg.step_mu)
        delta = np.zeros((1, self.num_users))
        delta[:, self.dc] = self.cfg.multiplier_init
        inner = _converge_dc_multipliers(h[None], np.ones(1), self.ndc, self.dc,
                                         self.targets, self.mu, delta, self.cfg)
        rates, powers = inner.rates[0], inner.powers[0]
        self.rbar = (1.0 - self.cfg.ewma) * self.rbar + self.cfg.ewma * rates
        for u in range(self.num_users):
            self.trace.append((self.t, u, float(self.rbar[u]), float(self.mu[u]),
                               float(rates[u]), float(powers[u])))
        return rates, powers


class PfsScheduler:
    """Proportional-fair scheduling under a per-block sum-power budget.

    Each block maximizes sum_k rate_k / rbar_k subject to
    sum_k q_k <= budget, by scaling the weight vector until the power
    budget is met (total allocated power decreases monotonically in the
    scaling), then updates the running averages.
    """

    def __init__(self, num_users: int, power_budget: float,
                 config: SolverConfig | None = None, weight_floor: float = 1e-6):
        if power_budget <= 0:
            raise ValueError("power budget must be positive")
        self.cfg = config or SolverConfig()
        self.num_users = num_users
        self.budget = power_budget
        self.floor = weight_floor
        self.rbar = np.zeros(num_users)
        self.t = 0
        self._price = 1.0

    def _total_power(self, h, weights, price, q0=None):
        sol = solve_p3(h, weights / price, self.cfg.p3, q0=q0)
        return float(sol.powers.sum()), sol

    def step(self, channel: np.ndarray) -> np.ndarray:
        h = np.asarray(channel, dtype=complex)
        self.t += 1
        w = 1.0 / np.maximum(self.rbar, self.floor)
        lo = hi = self._price
        p, sol = self._total_power(h, w, lo)
        if p > self.budget:
            while p > self.budget:
                lo = hi
                hi *= 4.0
                p, sol = self._total_power(h, w, hi, q0=sol.powers)
        else:
            while p <= self.budget and lo > 1e-300:
                hi = lo
                lo /= 4.0
                p, sol = self._total_power(h, w, lo, q0=sol.powers)
        # invariant: power(lo) > budget >= power(hi)
        best = sol
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            p, sol = self._total_power(h, w, mid, q0=sol.powers)
            if p > self.budget:
                lo = mid
            else:
                hi = mid
                best = sol
            if abs(p - self.budget) <= 1e-6 * self.budget:
                best = sol
                break
        self._price = hi
        rates = best.rates
        self.rbar = (1.0 - self.cfg.ewma) * self.rbar + self.cfg.ewma * rates
        return rates
