"""Brute-force ground truth: dense truncations of L and H and their spectra.

Points of the truncation are the rank-``r_lo`` cells inside the rank-K ball
around 0 (``r_lo = 0`` on the discrete models, so cells are the points
0..p**K-1). Matrices are written in the orthonormal basis of normalised
cell indicators, so they are symmetric and multiplication operators are
diagonal.

Two tail treatments are offered for the balls strictly containing X_K:

``exact_tail``
    adds lambda_{K+1} (I - Avg_K). Every eigenfunction whose parent ball
    lies inside X_K keeps its exact eigenvalue and constants sit at 0.
``compression``
    the Galerkin compression of the infinite operator onto functions
    supported in X_K. The same eigenvalues are exact, and constants sit at
    mu_K = lambda_{K+1} - sum_{r>K} C_r m(X_K)/m(B_r), which reproduces the
    first two moments of the neglected pole tail. This is the right
    truncation for comparisons of perturbed spectra: min-max applies to it
    and it converges much faster than the exact tail mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RangeError, ValidationError
from .jacobi import JacobiResult, jacobi_eigen, reconstruction_error  # noqa: F401
from .model_core import (BallRef, HierModel, Kind, PAdicPoint, SpectrumReport)

MAX_DIM = 4096
TAIL_MODES = ("exact_tail", "compression")


@dataclass(frozen=True)
class TruncationSpec:
    K: int
    tail_mode: str = "exact_tail"
    resolution: int = 0  # rank of the cells; negative values only on the field

    def __post_init__(self):
        if self.tail_mode not in TAIL_MODES:
            raise ValidationError(f"tail_mode must be one of {TAIL_MODES}")
        if self.K <= self.resolution:
            raise ValidationError("outer rank K must exceed the cell rank")

    def dim(self, model: HierModel) -> int:
        return model.p ** (self.K - self.resolution)

    def check(self, model: HierModel) -> None:
        if self.resolution != 0 and model.kind is not Kind.PADIC_FIELD:
            raise ValidationError("cells finer than points exist only on the p-adic field")
        if self.resolution < 0 and model.kind is Kind.PADIC_FIELD:
            model.check_rank(self.resolution)
        if self.dim(model) > MAX_DIM:
            raise RangeError(f"truncation dimension {self.dim(model)} exceeds cap {MAX_DIM}")


def tail_sums(model: HierModel, K: int) -> tuple[float, float]:
    """(lambda_{K+1}, sum_{r>K} C_r m(B_K)/m(B_r)) in closed form."""
    q = model.kappa / model.p
    s = (1.0 - model.kappa) * model.lam_scale * model.p ** K * q ** (K + 1) / (1.0 - q)
    return model.lam(K + 1), s


def constant_mode(model: HierModel, spec: TruncationSpec) -> float:
    """Eigenvalue carried by the constant vector of the truncated L."""
    if spec.tail_mode == "exact_tail":
        return 0.0
    lam_next, s = tail_sums(model, spec.K)
    return lam_next - s


def _avg_terms(model: HierModel, spec: TruncationSpec) -> np.ndarray:
    """S[i, j] = sum_{r = rank(i^j)}^{K} C_r m(cell)/m(B_r)."""
    n = spec.dim(model)
    idx = np.arange(n)
    S = np.zeros((n, n))
    for r in range(spec.resolution + 1, spec.K + 1):
        b = model.p ** (r - spec.resolution)
        blocks = idx // b
        w = model.coef(r) * model.p ** (spec.resolution - r)
        S += w * (blocks[:, None] == blocks[None, :])
    return S


def build_truncated_L(model: HierModel, spec: TruncationSpec) -> np.ndarray:
    spec.check(model)
    n = spec.dim(model)
    K, r0 = spec.K, spec.resolution
    inner = sum(model.coef(r) for r in range(r0 + 1, K + 1))
    L = -_avg_terms(model, spec)
    lam_next, s = tail_sums(model, K)
    if spec.tail_mode == "exact_tail":
        diag, avg = inner + lam_next, lam_next
    else:
        diag, avg = inner + lam_next, s
    L -= avg / n
    L[np.diag_indices(n)] += diag
    return 0.5 * (L + L.T)


# ---------------------------------------------------------------------------
# potentials on the truncation


def point_index(model: HierModel, spec: TruncationSpec, x) -> int:
    x = model.check_point(x)
    if model.kind is Kind.PADIC_FIELD:
        return x.to_index(model.p, spec.K, spec.resolution)
    if x >= model.p ** spec.K:
        raise RangeError(f"point {x} lies outside the truncation ball")
    return x


def ball_indices(model: HierModel, spec: TruncationSpec, ball: BallRef) -> np.ndarray:
    if ball.rank < spec.resolution:
        raise RangeError("ball is finer than the truncation cells")
    if ball.rank > spec.K:
        raise RangeError("ball is larger than the truncation ball")
    start = point_index(model, spec, ball.anchor)
    size = model.p ** (ball.rank - spec.resolution)
    start -= start % size
    return np.arange(start, start + size)


def potential_diagonal(model: HierModel, spec: TruncationSpec, potential) -> np.ndarray:
    """Diagonal entries added to L for the given potential (sign included).

    Point sites and ball wells act attractively (H = L - V); a Dyson
    sequence is added as given (H = L + V).
    """
    from .dyson import DysonPotential, block_of
    from .neg_counter import BallPotential
    from .resolvent import SiteConfig

    n = spec.dim(model)
    d = np.zeros(n)
    if potential is None:
        return d
    if isinstance(potential, SiteConfig):
        if model.kind is Kind.PADIC_FIELD:
            raise ValidationError("point potentials need a discrete model")
        for a, s in potential.sites:
            d[point_index(model, spec, a)] -= s
        return d
    if isinstance(potential, BallPotential):
        for ball, s in potential.balls:
            d[ball_indices(model, spec, ball)] -= s
        return d
    if isinstance(potential, DysonPotential):
        if model.kind is not Kind.DYSON_DYADIC:
            raise ValidationError("a Dyson potential needs the dyson_dyadic model")
        blocks = block_of(np.arange(n))
        return potential.sigmas(int(blocks.max()) + 1)[blocks]
    raise ValidationError(f"unsupported potential type {type(potential).__name__}")


def build_H(model: HierModel, spec: TruncationSpec, potential=None) -> np.ndarray:
    H = build_truncated_L(model, spec)
    H[np.diag_indices_from(H)] += potential_diagonal(model, spec, potential)
    return H


def oracle_spectrum(model: HierModel, spec: TruncationSpec, potential=None,
                    tol: float = 1e-12, vectors: bool = False) -> JacobiResult:
    return jacobi_eigen(build_H(model, spec, potential), tol=tol, vectors=vectors)


def truncated_resolvent(model: HierModel, spec: TruncationSpec, lam: float,
                        potential=None) -> np.ndarray:
    """Kernel of (H_K - lam)^{-1} with respect to the measure (dense solve)."""
    H = build_H(model, spec, potential)
    n = H.shape[0]
    G = np.linalg.solve(H - lam * np.eye(n), np.eye(n))
    return G / model.measure(spec.resolution)


def analytic_multiset(model: HierModel, spec: TruncationSpec) -> list[tuple[float, int]]:
    """Exact eigenvalues of the truncated L with multiplicities."""
    out = [(constant_mode(model, spec), 1)]
    for k in range(spec.resolution + 1, spec.K + 1):
        out.append((model.lam(k), (model.p - 1) * model.p ** (spec.K - k)))
    return out


def multiplicity_match(eigs: np.ndarray, expected: list[tuple[float, int]],
                       rtol: float = 1e-9) -> dict[float, tuple[int, int]]:
    """Count oracle eigenvalues near each expected value: {value: (found, expected)}."""
    eigs = np.asarray(eigs)
    res = {}
    for val, mult in expected:
        tol = rtol * max(abs(val), 1e-300) + 1e-13
        res[val] = (int(np.sum(np.abs(eigs - val) <= tol)), mult)
    return res


# ---------------------------------------------------------------------------
# Lminus block of a ball well


def zero_mean_basis(idx: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal basis (columns) of vectors supported on idx with zero sum."""
    m = len(idx)
    M = np.zeros((m, m))
    M[:, 0] = 1.0
    M[:, 1:] = np.eye(m)[:, : m - 1]
    Q, _ = np.linalg.qr(M)
    B = np.zeros((n, m - 1))
    B[idx, :] = Q[:, 1:]
    return B


def restricted_block(H: np.ndarray, basis: np.ndarray) -> np.ndarray:
    Hb = basis.T @ H @ basis
    return 0.5 * (Hb + Hb.T)


# ---------------------------------------------------------------------------
# comparison


@dataclass
class GapComparison:
    gap: tuple[float, float]
    analytic: list[float]
    oracle: list[float]
    distances: list[float]
    passed: bool


@dataclass
class ComparisonReport:
    gaps: list[GapComparison]
    neg_analytic: int
    neg_oracle: int
    neg_distances: list[float] = field(default_factory=list)
    passed: bool = True

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "negative": {"analytic": self.neg_analytic, "oracle": self.neg_oracle,
                         "distances": self.neg_distances},
            "gaps": [{"gap": list(g.gap), "analytic": g.analytic, "oracle": g.oracle,
                      "distances": g.distances, "passed": g.passed} for g in self.gaps],
        }


def compare_spectra(analytic: SpectrumReport | list[float], oracle, gap_partition,
                    tol: float = 1e-6, endpoint_rtol: float = 1e-9,
                    neg_threshold: float = 0.0) -> ComparisonReport:
    """Per-gap matching of analytic eigenvalues against an oracle spectrum.

    ``gap_partition`` is a sequence of open intervals (lo, hi). Oracle values
    within ``endpoint_rtol`` of an endpoint are the exact L-eigenvalues and
    are not counted as gap eigenvalues. Negative eigenvalues (below
    ``-neg_threshold``) are compared separately.
    """
    if isinstance(analytic, SpectrumReport):
        vals = np.array([q.value for q in analytic.points
                         if q.origin not in ("L-eigenvalue",)], dtype=float)
    else:
        vals = np.asarray(analytic, dtype=float)
    eigs = np.sort(np.asarray(oracle, dtype=float))
    gaps = []
    ok = True
    for lo, hi in gap_partition:
        pad_lo = endpoint_rtol * abs(lo) + 1e-14
        pad_hi = endpoint_rtol * abs(hi) + 1e-14
        a = np.sort(vals[(vals > lo) & (vals < hi)])
        o = eigs[(eigs > lo + pad_lo) & (eigs < hi - pad_hi)]
        d = [float(abs(x - y)) for x, y in zip(a, o)] if len(a) == len(o) else []
        passed = len(a) == len(o) and all(x < tol for x in d)
        ok &= passed
        gaps.append(GapComparison((float(lo), float(hi)), a.tolist(), o.tolist(), d, passed))
    na = np.sort(vals[vals < -neg_threshold])
    no = eigs[eigs < -neg_threshold]
    nd = [float(abs(x - y)) for x, y in zip(na, no)] if len(na) == len(no) else []
    neg_ok = len(na) == len(no) and all(x < tol for x in nd)
    return ComparisonReport(gaps, int(len(na)), int(len(no)), nd, bool(ok and neg_ok))


def gap_intervals(model: HierModel, gaps) -> list[tuple[float, float]]:
    """Open spectral gaps (lambda_{k+1}, lambda_k) for the requested k."""
    return [(model.lam(k + 1), model.lam(k)) for k in gaps]


def count_negative(eigs, threshold: float = 0.0) -> int:
    return int(np.sum(np.asarray(eigs) < -threshold))


def padic_resolution_for(model: HierModel, sigma: float, ball_rank: int = 0) -> int:
    """Coarsest cell rank resolving every Lminus eigenvalue below sigma.

    Eigenfunctions living on balls below the cell rank have eigenvalue at
    least lambda(r_lo + 1 - 1) = lambda(r_lo); choosing lambda(r_lo) > sigma
    makes the neglected ones non-negative after subtracting the well.
    """
    r = ball_rank
    while model.lam(r) <= sigma * (1 + 1e-12):
        r -= 1
    return min(r, ball_rank)


def cell_point(model: HierModel, spec: TruncationSpec, idx: int):
    if model.kind is Kind.PADIC_FIELD:
        return PAdicPoint.from_index(idx, model.p, spec.K, spec.resolution)
    return idx
