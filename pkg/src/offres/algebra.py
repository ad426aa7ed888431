"""Lie-algebra closure and the alternating-exponential reachability search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import BadDimension, DimensionOverflow, SearchFailed
from .model import LevelSystem
from .propagate import LeakageReport, leakage_of
from .seeding import named_rng

MAX_CLOSURE_DIM = 16
SEARCH_SUCCESS = 1e-6


def _vec(a):
    return np.concatenate([a.real.ravel(), a.imag.ravel()])


def _unvec(v, n):
    return (v[: n * n] + 1j * v[n * n:]).reshape(n, n)


@dataclass
class ClosureResult:
    dimension: int
    basis_matrices: list
    is_full: bool
    generations: int


class _Span:
    """Orthonormal basis of a real subspace of u(N), stored as real vectors."""

    def __init__(self, n, rank_tol):
        self.n = n
        self.rank_tol = rank_tol
        self.rows = np.zeros((0, 2 * n * n))

    def add(self, a, scale=0.0) -> bool:
        """Append ``a`` if independent; ``scale`` is the size it is measured against.

        Commutators of unit basis elements pass ``scale=1`` so that a product
        that cancels to rounding noise is not normalized into a new direction.
        """
        v = _vec(a)
        nv = np.linalg.norm(v)
        if nv <= self.rank_tol * scale or nv == 0:
            return False
        r = v
        for _ in range(2):
            r = r - self.rows.T @ (self.rows @ r)
        nr = np.linalg.norm(r)
        if nr <= self.rank_tol * max(nv, scale):
            return False
        self.rows = np.vstack([self.rows, r / nr])
        return True

    def matrices(self):
        return [_unvec(r, self.n) for r in self.rows]


def lie_closure(h0, hi, rank_tol: float = 1e-8) -> ClosureResult:
    """Real Lie algebra generated by ``i*h0`` and ``i*hi`` under commutation."""
    h0 = np.asarray(h0, dtype=complex)
    hi = np.asarray(hi, dtype=complex)
    n = h0.shape[0]
    if h0.shape != (n, n) or hi.shape != (n, n):
        raise ValueError("generators must be square matrices of equal size")
    if n > MAX_CLOSURE_DIM:
        raise DimensionOverflow(f"closure limited to N <= {MAX_CLOSURE_DIM}, got {n}")
    for h in (h0, hi):
        if np.abs(h - h.conj().T).max() > 1e-12 * max(np.abs(h).max(), 1.0):
            raise ValueError("generators must be Hermitian")
    span = _Span(n, rank_tol)
    span.add(1j * h0)
    span.add(1j * hi)
    frontier = list(range(len(span.rows)))
    generations = 0
    while frontier and len(span.rows) < n * n:
        generations += 1
        start = len(span.rows)
        basis = span.matrices()
        for a_idx in frontier:
            a = basis[a_idx]
            for b_idx in range(len(span.rows)):
                if b_idx == a_idx:
                    continue
                b = basis[b_idx] if b_idx < len(basis) else _unvec(span.rows[b_idx], n)
                span.add(a @ b - b @ a, scale=1.0)
                if len(span.rows) == n * n:
                    break
            if len(span.rows) == n * n:
                break
        frontier = list(range(start, len(span.rows)))
    mats = [(m - m.conj().T) / 2 for m in span.matrices()]
    return ClosureResult(len(mats), mats, len(mats) == n * n, generations)


def constraint_count(n: int) -> int:
    """Real conditions forcing ``U[0:2, 2:]`` to vanish: 4(N-2)."""
    if n < 3:
        raise BadDimension(f"constraint count needs N >= 3, got {n}")
    return 4 * (n - 2)


# ----------------------------------------------------------------------------
# alternating exponentials


@dataclass
class AlternatingSchedule:
    """``U = exp(-i a H_{p[M-1]} t_M) ... exp(-i a H_{p[0]} t_1)``, ``p`` alternating from H0."""

    durations: tuple
    which_generator: tuple
    scale: float
    total_time: float

    def unitary(self, h0, hi):
        return _Factorizer(h0, hi).product(np.array(self.durations), self.scale)


class _Factorizer:
    def __init__(self, h0, hi):
        self.eig = [np.linalg.eigh(np.asarray(h, dtype=complex)) for h in (h0, hi)]
        self.n = self.eig[0][1].shape[0]

    def product(self, durations, scale):
        u = np.eye(self.n, dtype=complex)
        for j, t in enumerate(durations):
            lam, v = self.eig[j % 2]
            u = (v * np.exp(-1j * scale * lam * t)) @ v.conj().T @ u
        return u


def project_simplex(x, total):
    """Euclidean projection of ``x`` onto ``{t >= 0, sum(t) = total}``."""
    x = np.asarray(x, dtype=float)
    srt = np.sort(x)[::-1]
    css = np.cumsum(srt) - total
    idx = np.arange(1, x.size + 1)
    rho = np.nonzero(srt - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    t = np.maximum(x - theta, 0.0)
    return t * (total / t.sum())


def _pattern(m):
    return tuple("H0" if j % 2 == 0 else "HI" for j in range(m))


def alternating_search(system: LevelSystem, hi, total_time: float, seed: int = 42,
                       budget: int = 2000, restarts: int = 20, *, raise_on_failure: bool = True):
    """Nelder-Mead over the N^2+1 durations (on the simplex) and the scale.

    Restarts draw uniform points on the duration simplex from the seeded
    stream and run in order; the first success wins, otherwise the best.
    """
    n = system.n_levels
    if n not in (3, 4):
        raise BadDimension(f"alternating search is a demonstration for N = 3 or 4, got {n}")
    hi = np.asarray(hi, dtype=complex)
    fz = _Factorizer(system.h0(), hi)
    m = n * n + 1
    rng = named_rng(seed, "alternating_search")

    def unpack(x):
        return project_simplex(x[:m], total_time), float(np.exp(np.clip(x[m], -5, 5)))

    def objective(x):
        t, a = unpack(x)
        blk = fz.product(t, a)[:2, 2:]
        return float(np.sum(np.abs(blk) ** 2))

    best = None
    for r in range(restarts):
        x0 = np.concatenate([rng.dirichlet(np.ones(m)) * total_time, [rng.uniform(-0.5, 0.5)]])
        if objective(x0) == 0.0:
            res_x, res_f = x0, 0.0
        else:
            res = minimize(objective, x0, method="Nelder-Mead",
                           options={"maxfev": budget, "xatol": 1e-14, "fatol": 1e-30,
                                    "adaptive": True})
            res_x, res_f = res.x, float(res.fun)
        if best is None or res_f < best[1]:
            best = (res_x, res_f, r)
        if np.sqrt(res_f) < SEARCH_SUCCESS:
            break
    t, a = unpack(best[0])
    schedule = AlternatingSchedule(tuple(float(v) for v in t), _pattern(m), a, total_time)
    leak = leakage_of(fz.product(t, a))
    if leak.residual_norm >= SEARCH_SUCCESS and raise_on_failure:
        raise SearchFailed(
            f"best leakage norm {leak.residual_norm:.3e} after {restarts} restarts", schedule, leak
        )
    return schedule, leak
