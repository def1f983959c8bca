"""Throughput characterization under a long-term power constraint.

Expected throughput C_e fixes the per-user rate shares and maximizes the
sum of average rates; its delay-limited counterpart C_d forces every fading
state to carry the same rates.  Both reduce to bisection on the sum rate
over the power-minimization scheduler, so a single code path serves the
two traffic classes.  The module also exposes the unconstrained sum
capacity (for fairness penalties) and the large-K analytic bound on the
delay-limited throughput.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError
from .scheduler import DC, NDC, SolverConfig, UserProfile, solve_p1_offline
from .wsolver import solve_p3_batch


@dataclass(frozen=True)
class RateProfile:
    """Normalized per-user rate shares."""

    alpha: tuple

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        arr = np.asarray(self.alpha)
        if arr.size == 0 or np.any(arr < 0):
            raise ValueError("rate shares must be nonnegative and nonempty")
        if abs(arr.sum() - 1.0) > 1e-12:
            raise ValueError(f"rate shares must sum to 1, got {arr.sum()!r}")

    @classmethod
    def uniform(cls, k: int) -> "RateProfile":
        return cls(tuple([1.0 / k] * k))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.alpha, dtype=float)

    def __len__(self) -> int:
        return len(self.alpha)


CSV_HEADER = "p_star,alpha,C_e,C_d,delay_penalty,fairness_penalty,theorem_bound"


@dataclass
class ThroughputReport:
    """One operating point of the throughput/delay/fairness characterization."""

    p_star: float
    alpha: RateProfile
    C_e: float
    C_d: float
    sum_capacity: float | None = None
    fairness_penalty: float | None = None
    theorem_bound: float | None = None

    @property
    def delay_penalty(self) -> float:
        return self.C_e - self.C_d

    def csv_row(self) -> str:
        def fmt(x):
            return "" if x is None else f"{x:.6g}"

        shares = ";".join(f"{a:.6g}" for a in self.alpha.alpha)
        return ",".join([f"{self.p_star:.6g}", shares, f"{self.C_e:.6g}",
                         f"{self.C_d:.6g}", f"{self.delay_penalty:.6g}",
                         fmt(self.fairness_penalty), fmt(self.theorem_bound)])


def _as_profile(alpha, k: int) -> RateProfile:
    prof = alpha if isinstance(alpha, RateProfile) else RateProfile(tuple(alpha))
    if len(prof) != k:
        raise ValueError(f"profile has {len(prof)} shares for {k} users")
    return prof


def _class_profiles(alpha: RateProfile, r_sum: float, mode: str):
    return [UserProfile(u, mode, r_sum * a) for u, a in enumerate(alpha.alpha)]


def min_power_for_profile(channels, alpha, r_sum: float, mode: str,
                          config: SolverConfig | None = None) -> float:
    """Minimum average power supporting sum rate ``r_sum`` split by ``alpha``.

    ``mode`` selects the traffic class for every user: average-rate targets
    (NDC) or constant per-state targets (DC).  DC infeasibility (a zero-gain
    state) propagates as :class:`InfeasibleError`.
    """
    if mode not in (NDC, DC):
        raise ValueError(f"mode must be {NDC!r} or {DC!r}")
    if r_sum < 0:
        raise ValueError("sum rate must be nonnegative")
    prof = _as_profile(alpha, channels.states.shape[1])
    if r_sum == 0:
        return 0.0
    res = solve_p1_offline(channels, _class_profiles(prof, r_sum, mode),
                           config, keep_trace=False)
    if not res.converged:
        raise InfeasibleError(f"scheduler did not converge at sum rate {r_sum:.4g}")
    return res.allocation.average_power


def throughput(channels, alpha, p_star: float, mode: str,
               config: SolverConfig | None = None,
               bisect_tol: float = 1e-3) -> float:
    """Largest sum rate whose minimum supporting power stays within ``p_star``.

    Bisection on the sum rate; the bracket's upper end grows geometrically
    until the power minimizer turns infeasible or overshoots the budget.
    Solves warm-start one another along the bracket, which keeps the dual
    variables on a continuous track.
    """
    if p_star <= 0:
        raise ValueError("power budget must be positive")
    if mode not in (NDC, DC):
        raise ValueError(f"mode must be {NDC!r} or {DC!r}")
    prof = _as_profile(alpha, channels.states.shape[1])
    cfg = config or SolverConfig()
    warm: dict = {}

    def power_at(r_sum: float) -> float:
        try:
            res = solve_p1_offline(channels, _class_profiles(prof, r_sum, mode),
                                   cfg, keep_trace=False, **warm)
        except InfeasibleError:
            return np.inf
        if not res.converged:
            return np.inf
        warm.update(res.warm_start)
        return res.allocation.average_power

    lo = 0.0
    hi = 1.0
    for _ in range(40):
        if power_at(hi) > p_star:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise InfeasibleError(
            f"sum rate {hi:.3g} still feasible at p*={p_star:.3g}; "
            "bracket did not close")
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        if power_at(mid) <= p_star:
            lo = mid
        else:
            hi = mid
    return lo


def delay_penalty(channels, alpha, p_star: float,
                  config: SolverConfig | None = None) -> ThroughputReport:
    """Expected minus delay-limited throughput at one operating point."""
    prof = _as_profile(alpha, channels.states.shape[1])
    c_e = throughput(channels, prof, p_star, NDC, config)
    c_d = throughput(channels, prof, p_star, DC, config)
    return ThroughputReport(p_star=p_star, alpha=prof, C_e=c_e, C_d=c_d)


def sum_capacity_profile(channels, p_star: float,
                         config: SolverConfig | None = None):
    """Unconstrained ergodic sum capacity and its realized rate shares.

    With equal rate weights the per-state problem needs only one corner
    solve; the long-term power constraint enters through a scalar power
    price bisected until the average power meets ``p_star``.  Returns
    ``(C_sum, alpha_star)``.
    """
    if p_star <= 0:
        raise ValueError("power budget must be positive")
    cfg = config or SolverConfig()
    h = channels.states
    probs = channels.probabilities
    n, k, _ = h.shape

    def solve_at(price: float):
        beta = np.full((n, k), 1.0 / price)
        sol = solve_p3_batch(h, beta, cfg.p3)
        return float(probs @ sol.powers.sum(axis=1)), sol

    lo = hi = 1.0
    p_lo, _ = solve_at(lo)
    if p_lo < p_star:          # price too high; cheapen until power overshoots
        for _ in range(60):
            lo *= 0.5
            p_lo, _ = solve_at(lo)
            if p_lo >= p_star:
                break
        hi = 2.0 * lo
    else:
        for _ in range(60):
            hi *= 2.0
            p_hi, _ = solve_at(hi)
            if p_hi <= p_star:
                break
        lo = 0.5 * hi
    sol = None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        p_mid, sol = solve_at(mid)
        if abs(p_mid - p_star) <= 1e-6 * max(1.0, p_star):
            break
        if p_mid > p_star:
            lo = mid
        else:
            hi = mid
    avg = probs @ sol.rates
    c_sum = float(avg.sum())
    shares = avg / c_sum if c_sum > 0 else np.full(k, 1.0 / k)
    return c_sum, RateProfile(tuple(shares / shares.sum()))


def fairness_penalty(channels, alpha_e, p_star: float,
                     config: SolverConfig | None = None) -> float:
    """Sum-capacity loss of pinning the rate shares to ``alpha_e``."""
    prof = _as_profile(alpha_e, channels.states.shape[1])
    c_sum, _ = sum_capacity_profile(channels, p_star, config)
    c_e = throughput(channels, prof, p_star, NDC, config)
    return c_sum - c_e


def theorem_bound(p_star: float, k: int, rho: float) -> float:
    """Symmetric-fading ceiling on the delay-limited throughput.

    ``rho`` is the fading ensemble's mean inverse channel power E[1/g];
    the bound K*log2(1 + p*/(K*rho)) tends to p*/(rho*ln 2) as K grows.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if k < 1:
        raise ValueError("k must be >= 1")
    return k * np.log2(1.0 + p_star / (k * rho))
