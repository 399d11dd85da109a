"""Extreme Nash equilibria of bimatrix games by best-response polytope vertex enumeration.

For a game (A, B) with positive payoffs the best-response polytopes are

    P = {x >= 0 : B^T x <= 1}        Q = {y >= 0 : A y <= 1}

A vertex pair (x, y) != (0, 0) whose tight constraints cover every row and
column label is an extreme equilibrium after normalization. Vertices are
found by solving every square subsystem of tight constraints in numpy
batches, which stays exact in degenerate games where pivoting schemes need
lexicographic care.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._validation import N_STRATEGIES, check_square_payoffs
from .errors import DomainError

FEASIBILITY_TOL = 1e-9
BEST_RESPONSE_TOL = 1e-7
_CHUNK = 8192


@dataclass(frozen=True, eq=False)
class Equilibrium:
    row: np.ndarray
    col: np.ndarray
    value_row: float
    value_col: float
    degenerate_flag: bool = False

    @property
    def welfare(self) -> float:
        return self.value_row + self.value_col

    def key(self, digits: int = 9) -> tuple:
        return tuple(np.round(np.concatenate([self.row, self.col]), digits) + 0.0)


def _as_mask(mask, size: int) -> np.ndarray:
    if mask is None:
        return np.ones(size, dtype=bool)
    if isinstance(mask, (int, np.integer)):
        if size != N_STRATEGIES and mask >> size:
            raise DomainError("integer mask wider than the game")
        return np.array([bool(int(mask) >> i & 1) for i in range(size)])
    arr = np.asarray(mask, dtype=bool).ravel()
    if arr.shape != (size,):
        raise DomainError(f"mask must have {size} entries")
    return arr


def check_mixed_strategy(x, size: int | None = None, tol: float = FEASIBILITY_TOL) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if size is not None and x.shape != (size,):
        raise DomainError(f"strategy must have {size} entries, got {x.shape[0]}")
    if np.any(x < -tol) or abs(x.sum() - 1.0) > tol:
        raise DomainError("a mixed strategy must be non-negative and sum to 1")
    return x


def expected_payoff(A, B, x, y) -> tuple[float, float]:
    """Return ``(x^T A y, x^T B y)``."""
    A = check_square_payoffs(A, "A")
    B = check_square_payoffs(B, "B")
    if A.shape != B.shape:
        raise DomainError("payoff matrices differ in shape")
    x = check_mixed_strategy(x, A.shape[0])
    y = check_mixed_strategy(y, A.shape[1])
    return float(x @ A @ y), float(x @ B @ y)


@lru_cache(maxsize=64)
def _combinations(n: int, k: int) -> np.ndarray:
    if k == 0:
        return np.zeros((1, 0), dtype=np.int64)
    flat = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), k)),
                       dtype=np.int64)
    return flat.reshape(-1, k)


def _unique_rows(Z: np.ndarray, tol: float) -> np.ndarray:
    if len(Z) == 0:
        return Z
    Z = Z[np.lexsort(Z.T[::-1])]
    kept = [Z[0]]
    for z in Z[1:]:
        if np.max(np.abs(np.asarray(kept) - z), axis=1).min() > tol:
            kept.append(z)
    return np.asarray(kept)


def polytope_vertices(G: np.ndarray, h: np.ndarray, tol: float = FEASIBILITY_TOL):
    """Vertices of ``{z : G z <= h}`` with the bitmask of tight rows of each.

    Rows of ``G`` are normalized first so that tolerances are geometric.
    """
    norms = np.linalg.norm(G, axis=1)
    G, h = G / norms[:, None], h / norms
    n_rows, dim = G.shape
    combos = _combinations(n_rows, dim)
    found = []
    for start in range(0, len(combos), _CHUNK):
        idx = combos[start:start + _CHUNK]
        M, rhs = G[idx], h[idx]
        det = np.linalg.det(M)
        ok = np.abs(det) > 1e-10
        if not ok.any():
            continue
        z = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
        feasible = np.all(z @ G.T <= h + tol, axis=1)
        found.append(z[feasible])
    Z = np.concatenate(found) if found else np.zeros((0, dim))
    Z = _unique_rows(Z, 1e-9 * max(1.0, float(np.abs(Z).max(initial=0.0))))
    slack = h - Z @ G.T
    tight = np.abs(slack) <= tol
    labels = (tight * (1 << np.arange(n_rows, dtype=np.int64))).sum(axis=1)
    return Z, labels


def find_nash(A, B, row_mask=None, col_mask=None, tol: float = FEASIBILITY_TOL) -> list[Equilibrium]:
    """All extreme equilibria of the bimatrix game restricted to available strategies.

    Masked-out rows/columns are removed before solving and get probability 0.
    Payoffs are shifted per player to be positive internally; reported values
    are in the original units. Equilibria involving a vertex with more tight
    constraints than its dimension carry ``degenerate_flag``.
    """
    A = check_square_payoffs(A, "A")
    B = check_square_payoffs(B, "B")
    if A.shape != B.shape:
        raise DomainError("payoff matrices differ in shape")
    rows = _as_mask(row_mask, A.shape[0])
    cols = _as_mask(col_mask, A.shape[1])
    if not rows.any() or not cols.any():
        raise DomainError("each player needs at least one available strategy")
    ri, ci = np.flatnonzero(rows), np.flatnonzero(cols)
    return [
        Equilibrium(_embed(x, ri, A.shape[0]), _embed(y, ci, A.shape[1]), *vals, degenerate_flag=deg)
        for x, y, vals, deg in _solve_restricted(A[np.ix_(ri, ci)].tobytes(), B[np.ix_(ri, ci)].tobytes(),
                                                 len(ri), len(ci), tol)
    ]


def _embed(v: np.ndarray, idx: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[idx] = v
    return out


@lru_cache(maxsize=4096)
def _solve_restricted(a_bytes: bytes, b_bytes: bytes, m: int, n: int, tol: float):
    A = np.frombuffer(a_bytes).reshape(m, n)
    B = np.frombuffer(b_bytes).reshape(m, n)
    Ap = A - A.min() + 1.0
    Bp = B - B.min() + 1.0
    # P: labels 0..m-1 are x_i = 0, m..m+n-1 are (B^T x)_j = 1.
    Gp = np.vstack([-np.eye(m), Bp.T])
    hp = np.concatenate([np.zeros(m), np.ones(n)])
    # Q: labels 0..m-1 are (A y)_i = 1, m..m+n-1 are y_j = 0.
    Gq = np.vstack([Ap, -np.eye(n)])
    hq = np.concatenate([np.ones(m), np.zeros(n)])
    X, Lx = polytope_vertices(Gp, hp, tol)
    Y, Ly = polytope_vertices(Gq, hq, tol)
    full = (1 << (m + n)) - 1
    nzx = X.sum(axis=1) > tol
    nzy = Y.sum(axis=1) > tol
    X, Lx = X[nzx], Lx[nzx]
    Y, Ly = Y[nzy], Ly[nzy]
    out = []
    for a in range(len(X)):
        hits = np.flatnonzero((Lx[a] | Ly) == full)
        for b in hits:
            x = X[a] / X[a].sum()
            y = Y[b] / Y[b].sum()
            x = np.maximum(x, 0.0) + 0.0
            y = np.maximum(y, 0.0) + 0.0
            x /= x.sum()
            y /= y.sum()
            deg = bin(int(Lx[a])).count("1") > m or bin(int(Ly[b])).count("1") > n
            out.append((x, y, (float(x @ A @ y), float(x @ B @ y)), deg))
    out.sort(key=lambda e: tuple(np.round(np.concatenate([e[0], e[1]]), 12)))
    return tuple(out)


def best_response_slack(A, B, eq: Equilibrium, row_mask=None, col_mask=None) -> float:
    """Largest gain any player gets from a pure unilateral deviation."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    rows = _as_mask(row_mask, A.shape[0])
    cols = _as_mask(col_mask, A.shape[1])
    row_gain = (A @ eq.col)[rows].max() - eq.row @ A @ eq.col
    col_gain = (eq.row @ B)[cols].max() - eq.row @ B @ eq.col
    return float(max(row_gain, col_gain))


def select_equilibrium(candidates, tol: float = FEASIBILITY_TOL) -> Equilibrium:
    """Highest joint value; ties go to the lexicographically smallest (row, col)."""
    candidates = list(candidates)
    if not candidates:
        raise DomainError("no equilibrium to select from")
    top = max(c.welfare for c in candidates)
    pool = [c for c in candidates if c.welfare >= top - tol]
    return min(pool, key=lambda c: c.key())
