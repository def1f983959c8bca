"""Rate region of the dual multiple-access channel at one fading state.

With user powers q_k and row channels h_k, the achievable region is the
polymatroid

    sum_{k in J} R_k  <=  log2 det(I + sum_{k in J} q_k h_k^H h_k)   for all J.

Successive decoding achieves its corner points: for a decoding order pi
(``order[0]`` is decoded *last*, hence interference-free) the rate of the
user at position j is the log-det increment when adding its term to the
accumulated Gram matrix of positions 0..j-1.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .errors import DimensionError

__all__ = ["subset_bound", "corner_rates", "in_region"]

_LN2 = float(np.log(2.0))

_MAX_ENUM_USERS = 20


def _check_state(channel: np.ndarray, powers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = np.asarray(channel, dtype=complex)
    q = np.asarray(powers, dtype=float)
    if h.ndim != 2:
        raise DimensionError("channel must have shape (K, M)")
    if q.shape != (h.shape[0],):
        raise DimensionError("powers must have shape (K,)")
    if np.any(q < 0):
        raise ValueError("powers must be nonnegative")
    return h, q


def logdet2_hermitian(a: np.ndarray) -> float:
    """log2 det of a Hermitian positive-definite matrix via Cholesky."""
    chol = np.linalg.cholesky(a)
    return 2.0 * float(np.sum(np.log(np.real(np.diagonal(chol))))) / _LN2


def gram_matrix(channel: np.ndarray, powers: np.ndarray, subset: np.ndarray) -> np.ndarray:
    """I + sum_{k in subset} q_k h_k^H h_k for the given user indices."""
    h, q = _check_state(channel, powers)
    m = h.shape[1]
    sub = h[subset]
    return np.eye(m, dtype=complex) + (sub.conj().T * q[subset]) @ sub


def subset_bound(channel: np.ndarray, powers: np.ndarray, subset) -> float:
    """Sum-rate bound log2 det(I + sum_{k in J} q_k h_k^H h_k) in bits."""
    idx = np.asarray(list(subset), dtype=int)
    if idx.size == 0:
        return 0.0
    if np.unique(idx).size != idx.size:
        raise ValueError("subset contains repeated users")
    return logdet2_hermitian(gram_matrix(channel, powers, idx))


def corner_rates(channel: np.ndarray, powers: np.ndarray, order: np.ndarray) -> np.ndarray:
    """Per-user rates of the successive-decoding corner for ``order``.

    ``order[0]`` is decoded last (sees no interference); ``order[-1]`` is
    decoded first (sees everyone).  Rates come back indexed by user, their
    sum equals the full-set bound for any order.
    """
    h, q = _check_state(channel, powers)
    k, m = h.shape
    pi = np.asarray(order, dtype=int)
    if sorted(pi.tolist()) != list(range(k)):
        raise ValueError("order must be a permutation of range(K)")
    rates = np.zeros(k)
    acc = np.eye(m, dtype=complex)
    prev = 0.0
    for j, user in enumerate(pi):
        acc = acc + q[user] * np.outer(h[user].conj(), h[user])
        cur = logdet2_hermitian(acc)
        rates[user] = cur - prev
        prev = cur
    return np.maximum(rates, 0.0)


def in_region(channel: np.ndarray, powers: np.ndarray, rates: np.ndarray,
              tol: float = 1e-9) -> bool:
    """Whether ``rates`` satisfies every subset bound within slack ``tol``.

    Enumerates all 2^K - 1 nonempty subsets; refuses K > 20.
    """
    h, q = _check_state(channel, powers)
    r = np.asarray(rates, dtype=float)
    k = h.shape[0]
    if r.shape != (k,):
        raise DimensionError("rates must have shape (K,)")
    if k > _MAX_ENUM_USERS:
        raise DimensionError(f"subset enumeration limited to K <= {_MAX_ENUM_USERS}")
    if np.any(r < -tol):
        return False
    for size in range(1, k + 1):
        for subset in combinations(range(k), size):
            idx = np.asarray(subset, dtype=int)
            if float(r[idx].sum()) > subset_bound(h, q, idx) + tol:
                return False
    return True
