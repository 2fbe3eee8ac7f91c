"""Dense symmetric eigensolver by Jacobi rotations.

Two sweep orderings are available. ``"round_robin"`` (the default) visits
the n(n-1)/2 pivot pairs in n-1 rounds of disjoint pairs (chess-tournament
schedule); the rotations of a round commute, so their angles are taken from
the same state and the updates are applied in one cache-friendly pass.
``"cyclic"`` is the textbook row-by-row sweep applying one rotation at a
time. Both inner loops are compiled with numba; both are single-threaded
and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ValidationError


@dataclass
class JacobiResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    sweeps: int
    off_norm: float


def _off(a: np.ndarray) -> float:
    # subtracting the diagonal first avoids cancellation in sum(a^2) - sum(d^2)
    b = a.copy()
    np.fill_diagonal(b, 0.0)
    return float(np.linalg.norm(b))


def round_robin_schedule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Chess-tournament pairing of n indices (n padded to even).

    Returns arrays P, Q of shape (rounds, n_pairs); round r rotates the
    disjoint pairs (P[r, i], Q[r, i]). Pairs involving the padding index are
    marked with -1. Every unordered pair occurs exactly once per sweep.
    """
    m = n + (n % 2)
    players = list(range(m))
    h = m // 2
    P = np.full((max(m - 1, 0), h), -1, dtype=np.int64)
    Q = np.full((max(m - 1, 0), h), -1, dtype=np.int64)
    for r in range(m - 1):
        for i in range(h):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                P[r, i], Q[r, i] = min(a, b), max(a, b)
        players = [players[0]] + [players[-1]] + players[1:-1]
    return P, Q


def _rotation(app, aqq, apq):
    theta = (aqq - app) / (2.0 * apq)
    if abs(theta) > 1e150:
        t = 0.5 / theta
    elif theta == 0.0:
        t = 1.0
    else:
        t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
    c = 1.0 / math.sqrt(t * t + 1.0)
    return c, t * c, t


def _sweep_round_robin_py(a, vt, P, Q, skip):
    n = a.shape[0]
    h = P.shape[1]
    cs = np.zeros(h)
    sn = np.zeros(h)
    tt = np.zeros(h)
    act = np.zeros(h, dtype=np.bool_)
    for r in range(P.shape[0]):
        # angles for all pairs of the round, from the same matrix state
        for i in range(h):
            p = P[r, i]
            q = Q[r, i]
            act[i] = False
            if p < 0:
                continue
            apq = a[p, q]
            if abs(apq) <= skip:
                continue
            c, s, t = _rotation(a[p, p], a[q, q], apq)
            cs[i] = c
            sn[i] = s
            tt[i] = t
            act[i] = True
        # keep the pivot data needed for the exact diagonal update
        app = np.empty(h)
        aqq = np.empty(h)
        apqs = np.empty(h)
        for i in range(h):
            if act[i]:
                app[i] = a[P[r, i], P[r, i]]
                aqq[i] = a[Q[r, i], Q[r, i]]
                apqs[i] = a[P[r, i], Q[r, i]]
        # column rotations, row by row (contiguous access)
        for k in range(n):
            for i in range(h):
                if act[i]:
                    p = P[r, i]
                    q = Q[r, i]
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = cs[i] * akp - sn[i] * akq
                    a[k, q] = sn[i] * akp + cs[i] * akq
        # row rotations
        for i in range(h):
            if act[i]:
                p = P[r, i]
                q = Q[r, i]
                c = cs[i]
                s = sn[i]
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(vt.shape[1]):
                    vpk = vt[p, k]
                    vqk = vt[q, k]
                    vt[p, k] = c * vpk - s * vqk
                    vt[q, k] = s * vpk + c * vqk
        for i in range(h):
            if act[i]:
                p = P[r, i]
                q = Q[r, i]
                a[p, p] = app[i] - tt[i] * apqs[i]
                a[q, q] = aqq[i] + tt[i] * apqs[i]
                a[p, q] = 0.0
                a[q, p] = 0.0


def _sweep_cyclic_py(a, vt, skip):
    n = a.shape[0]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = a[p, q]
            if abs(apq) <= skip:
                continue
            app = a[p, p]
            aqq = a[q, q]
            c, s, t = _rotation(app, aqq, apq)
            # rows p, q are rotated in place; columns follow by symmetry
            for k in range(n):
                apk = a[p, k]
                aqk = a[q, k]
                npk = c * apk - s * aqk
                nqk = s * apk + c * aqk
                a[p, k] = npk
                a[q, k] = nqk
                a[k, p] = npk
                a[k, q] = nqk
            a[p, p] = app - t * apq
            a[q, q] = aqq + t * apq
            a[p, q] = 0.0
            a[q, p] = 0.0
            # eigenvectors are kept as rows of vt, so this update is contiguous
            for k in range(vt.shape[1]):
                vpk = vt[p, k]
                vqk = vt[q, k]
                vt[p, k] = c * vpk - s * vqk
                vt[q, k] = s * vpk + c * vqk


try:  # compiled scalar sweep; the pure-Python body is the same code
    import numba

    _rotation = numba.njit(cache=True)(_rotation)
    _sweep_cyclic = numba.njit(cache=True)(_sweep_cyclic_py)
    _sweep_round_robin = numba.njit(cache=True)(_sweep_round_robin_py)
    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _sweep_cyclic = _sweep_cyclic_py
    _sweep_round_robin = _sweep_round_robin_py
    HAVE_COMPILED = False


def jacobi_eigen(A, tol: float = 1e-12, vectors: bool = False, max_sweeps: int = 100,
                 ordering: str = "round_robin") -> JacobiResult:
    """Eigen-decomposition of a real symmetric matrix.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``tol * ||A||_F``. Eigenvalues are returned ascending, eigenvectors (if
    requested) as matching columns.
    """
    a = np.array(A, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("matrix must be square")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix has non-finite entries")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValidationError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    norm = float(np.linalg.norm(a))
    target = tol * norm
    if ordering not in ("round_robin", "cyclic"):
        raise ValidationError(f"unknown sweep ordering {ordering!r}")
    a = np.ascontiguousarray(a)
    vt = np.eye(n) if vectors else np.zeros((n, 0))
    if ordering == "round_robin":
        P, Q = round_robin_schedule(n)
    off = _off(a)
    # pivots this small cannot affect the stopping test (n^2 of them sum to
    # at most target / 4), so they are skipped
    skip = 0.25 * target / max(n, 1)
    sweeps = 0
    while off > target:
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps (off = {off:.3e})")
        if ordering == "round_robin":
            _sweep_round_robin(a, vt, P, Q, skip)
        else:
            _sweep_cyclic(a, vt, skip)
        sweeps += 1
        off = _off(a)
    v = vt.T if vectors else None
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return JacobiResult(w[order], None if v is None else v[:, order], sweeps, off)


def reconstruction_error(A, res: JacobiResult) -> float:
    """||Q diag(w) Q^T - A||_F / ||A||_F."""
    A = np.asarray(A, dtype=float)
    Q = res.eigenvectors
    R = (Q * res.eigenvalues) @ Q.T - A
    return float(np.linalg.norm(R) / max(np.linalg.norm(A), np.finfo(float).tiny))
