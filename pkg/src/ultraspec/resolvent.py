"""Resolvent series of L, Krein's rank-one formula and finite-rank spectra.

On a discrete model the delta function at a expands into the eigenfunctions
f_{B_k} of the balls B_0 = {a} < B_1 < ..., which gives

    R(lambda, a, a) = sum_{k>=1} A_k / (lambda_k - lambda),
    R(lambda, x, a) = -(1/m_j) / (lambda_j - lambda) + sum_{k>j} A_k / (lambda_k - lambda)

for x != a with meet rank j. A point potential H = L - sum sigma_i delta_{a_i}
has eigenvalues in the gap (lambda_{k+1}, lambda_k) exactly at the zeros of
det(I - R(lambda) Theta), R the site matrix and Theta = diag(sigma).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import (ConsistencyError, DivergenceError, EigenvalueHitError,
                     PoleProximityError, RangeError, ValidationError)
from .kernels import is_transient
from .model_core import HierModel, Kind, SpectralPoint, SpectrumReport

POLE_RTOL = 1e-12
SERIES_RTOL = 1e-16
MAX_RANK = 200_000
ENDPOINT_OFFSET = 1e-9  # fraction of the gap width kept clear of the poles
ROOT_TOL = 1e-12  # bisection tolerance, fraction of the gap width


# ---------------------------------------------------------------------------
# pole series


@dataclass(frozen=True)
class PoleSeries:
    """sum_k weight_k / (pole_k - lambda) for a prefix plus an analytic tail.

    Beyond the stored prefix the poles follow lambda_k = c kappa^k and the
    weights A_k = (p-1) p^{-k} of the model, continued from rank
    ``start + len(poles)``.
    """

    model: HierModel
    start: int
    poles: np.ndarray
    weights: np.ndarray
    head: float = 0.0  # extra local term, used by the off-diagonal series
    head_pole: float | None = None

    def ranks(self) -> np.ndarray:
        return np.arange(self.start, self.start + len(self.poles))

    def __call__(self, lam: float) -> float:
        return _series_value(self.model, self.start, lam, self.head, self.head_pole)


def pole_series(model: HierModel, start: int = 1, n_terms: int = 40) -> PoleSeries:
    if not model.is_discrete and start < model.rank_window[0]:
        raise RangeError("series start lies outside the rank window")
    k = np.arange(start, start + n_terms)
    return PoleSeries(model, start, model.lam(k), model.jump(k))


def _check_pole(model: HierModel, lam: float, k_lo: int) -> None:
    if lam <= 0:
        return
    k = math.log(lam / model.lam_scale) / math.log(model.kappa)
    for kk in (math.floor(k), math.ceil(k)):
        if kk >= k_lo:
            lk = model.lam(kk)
            if abs(lam - lk) < POLE_RTOL * lk:
                raise PoleProximityError(
                    f"lambda = {lam!r} lies within {POLE_RTOL:g} (relative) of the pole lambda_{kk}")


def _suffix_sums(model: HierModel, lam: float, start: int, min_len: int = 1) -> np.ndarray:
    """S[i] = sum_{k >= start+i} A_k / (lambda_k - lam), remainder certified below SERIES_RTOL.

    Terms are generated in chunks until a bound on everything beyond the
    last rank is small against the total: 1/(m |lam|) for lam < 0 (or the
    geometric tail of A_k/lambda_k when transient), 2/(m lam) once
    lambda_k <= lam/2 for lam > 0. At lam = 0 the geometric remainder is
    added exactly.
    """
    transient = is_transient(model)
    if lam == 0.0 and not transient:
        raise DivergenceError("resolvent series diverges at lambda = 0 on a recurrent model")
    q = 1.0 / (model.p * model.kappa)  # ratio of consecutive A_k / lambda_k
    n = max(64, min_len)
    while True:
        ks = np.arange(start, start + n, dtype=float)
        terms = model.jump(ks) / (model.lam(ks) - lam)
        S = np.cumsum(terms[::-1])[::-1]
        last = start + n  # first rank not summed
        l_next = model.lam(last)
        mass = 1.0 / model.measure(last - 1)  # sum_{k >= last} A_k
        if lam == 0.0:
            return S + model.jump(last) / l_next / (1.0 - q)
        bound = math.inf
        if lam < 0:
            bound = mass / -lam
            if transient:
                bound = min(bound, model.jump(last) / l_next / (1.0 - q))
        elif l_next <= 0.5 * lam:
            bound = 2.0 * mass / lam
        if bound <= SERIES_RTOL * max(abs(S[0]), 1e-300):
            return S
        n *= 2
        if n > MAX_RANK:
            raise DivergenceError("resolvent series did not converge within the rank budget")


def _series_value(model: HierModel, start: int, lam: float, head: float = 0.0,
                  head_pole: float | None = None) -> float:
    """sum_{k>=start} A_k/(lambda_k - lam) with a certified remainder, plus a head term."""
    lam = float(lam)
    if not math.isfinite(lam):
        raise ValidationError("spectral parameter must be finite")
    _check_pole(model, lam, start if head_pole is None else start - 1)
    total = head / (head_pole - lam) if head_pole is not None else 0.0
    return total + float(_suffix_sums(model, lam, start)[0])


def diagonal_resolvent(model: HierModel, a, lam: float) -> float:
    """R(lambda, a, a) = sum_{k>=1} A_k / (lambda_k - lambda)."""
    if model.kind is Kind.PADIC_FIELD:
        raise DivergenceError(
            "points of the p-adic field have zero measure; R(lambda, a, a) diverges")
    model.check_point(a)
    return _series_value(model, model.first_pole, lam)


def offdiag_resolvent(model: HierModel, a_i, a_j, lam: float) -> float:
    """R(lambda, a_i, a_j) for distinct points: local term plus superset tail."""
    a_i = model.check_point(a_i)
    a_j = model.check_point(a_j)
    if a_i == a_j:
        raise ValidationError("off-diagonal resolvent needs distinct points")
    j = model.meet_rank(a_i, a_j)
    return _series_value(model, j + 1, lam, head=-1.0 / model.measure(j),
                         head_pole=model.lam(j))


def resolvent_kernel(model: HierModel, x, y, lam: float) -> float:
    x = model.check_point(x)
    y = model.check_point(y)
    if x == y:
        return diagonal_resolvent(model, x, lam)
    return offdiag_resolvent(model, x, y, lam)


def resolvent_zero_diag(model: HierModel) -> float:
    """R(0, a, a) in closed form, (p - 1)/(p - p^alpha) on the lattice."""
    if not model.is_discrete:
        raise DivergenceError("diagonal resolvent diverges on the p-adic field")
    if not is_transient(model):
        raise DivergenceError("R(0, a, a) = +inf on a recurrent model")
    q = 1.0 / (model.p * model.kappa)
    return model.jump(1) / model.lam(1) / (1.0 - q)


# ---------------------------------------------------------------------------
# Krein formula


def _secular(sigma: float, r_aa: float) -> float:
    d = 1.0 - sigma * r_aa
    if abs(d) <= 1e-12 * max(1.0, abs(sigma * r_aa)):
        raise EigenvalueHitError("1 - sigma R(lambda, a, a) vanishes: lambda is an eigenvalue")
    return d


def krein_resolvent(model: HierModel, sigma: float, a, lam: float, x, y) -> float:
    """Resolvent kernel of H = L - sigma delta_a from the rank-one formula."""
    r_xy = resolvent_kernel(model, x, y, lam)
    if sigma == 0:
        return r_xy
    r_aa = diagonal_resolvent(model, a, lam)
    d = _secular(sigma, r_aa)
    return r_xy + sigma * resolvent_kernel(model, x, a, lam) * resolvent_kernel(model, a, y, lam) / d


def _bisect(f, lo: float, hi: float, tol: float) -> float:
    flo = f(lo)
    for _ in range(400):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def secular_root_in_gap(model: HierModel, sigma: float, k: int) -> float:
    """The unique zero of 1 - sigma R(lambda, a, a) in (lambda_{k+1}, lambda_k)."""
    lo, hi = model.lam(k + 1), model.lam(k)
    w = hi - lo
    f = lambda lam: 1.0 - sigma * _series_value(model, model.first_pole, lam)
    a, b = lo + ENDPOINT_OFFSET * w, hi - ENDPOINT_OFFSET * w
    fa, fb = f(a), f(b)
    if (fa > 0) == (fb > 0):
        raise ConsistencyError(f"no sign change of the secular function in gap {k}")
    return _bisect(f, a, b, ROOT_TOL * w)


def negative_root(model: HierModel, sigma: float) -> float | None:
    """Eigenvalue below 0 of L - sigma delta_a, or None when there is none."""
    if sigma <= 0:
        return None
    f = lambda lam: 1.0 - sigma * _series_value(model, model.first_pole, lam)
    lo = -sigma - model.lam(1)
    if is_transient(model):
        if sigma * resolvent_zero_diag(model) <= 1.0:
            return None
        return _bisect(f, lo, 0.0, ROOT_TOL * abs(lo))
    # recurrent: R(lambda) -> +inf as lambda -> 0-, shrink the upper end until f < 0
    hi = -abs(lo) * 1e-3
    while f(hi) > 0:
        hi *= 1e-3
        if hi > -1e-300:
            raise ConsistencyError("negative eigenvalue not bracketed")
    return _bisect(f, lo, hi, ROOT_TOL * abs(hi))


def top_root(model: HierModel, sigma: float) -> float | None:
    """Eigenvalue above lambda_1 of a repulsive point (sigma < 0)."""
    if sigma >= 0:
        return None
    f = lambda lam: 1.0 - sigma * _series_value(model, model.first_pole, lam)
    lo = model.lam(1)
    hi = lo - sigma + 1.0  # H <= L + |sigma|
    w = hi - lo
    return _bisect(f, lo + ENDPOINT_OFFSET * w, hi, ROOT_TOL * w)


def rank_one_spectrum(model: HierModel, sigma: float, a, gap_count: int) -> SpectrumReport:
    """Spectrum of L - sigma delta_a: one root per gap, the retained lambda_k, Xi_-."""
    if model.kind is Kind.PADIC_FIELD:
        raise ValidationError("point potentials need a discrete model")
    model.check_point(a)
    if sigma == 0:
        raise ValidationError("sigma must be nonzero")
    if gap_count < 1:
        raise ValidationError("gap_count must be >= 1")
    pts: list[SpectralPoint] = []
    neg = negative_root(model, sigma)
    if neg is not None:
        pts.append(SpectralPoint(neg, 1, "full", "Xi-"))
    top = top_root(model, sigma)
    if top is not None:
        pts.append(SpectralPoint(top, 1, "full", "gap-root", gap=0))
    for k in range(1, gap_count + 1):
        pts.append(SpectralPoint(secular_root_in_gap(model, sigma, k), 1, "full",
                                 "gap-root", gap=k))
    for k in range(1, gap_count + 2):
        pts.append(SpectralPoint(model.lam(k), "infinite", "compact", "L-eigenvalue"))
    meta = {"sigma": sigma, "transient": is_transient(model)}
    if is_transient(model):
        meta["sigma_threshold"] = 1.0 / resolvent_zero_diag(model)
    return SpectrumReport(tuple(pts), meta)


def eigenfunction_values(model: HierModel, lam: float, a, points: Sequence) -> np.ndarray:
    """psi(x) = R(lambda, x, a) at the requested points (unnormalised)."""
    return np.array([resolvent_kernel(model, x, a, lam) for x in points])


# ---------------------------------------------------------------------------
# finite rank


@dataclass(frozen=True)
class SiteConfig:
    """Point potential sum sigma_i delta_{a_i}; H = L - V."""

    sites: tuple[tuple[Any, float], ...]
    model: HierModel | None = field(default=None, compare=False)

    def __post_init__(self):
        sites = tuple((a, float(s)) for a, s in self.sites)
        if not sites:
            raise ValidationError("site configuration is empty")
        if self.model is not None:
            sites = tuple((self.model.check_point(a), s) for a, s in sites)
        pts = [a for a, _ in sites]
        if len(set(pts)) != len(pts):
            raise ValidationError("sites must be distinct")
        for _, s in sites:
            if not (s > 0 and math.isfinite(s)):
                raise ValidationError("site strengths must be positive and finite")
        object.__setattr__(self, "sites", sites)

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def points(self) -> list:
        return [a for a, _ in self.sites]

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([s for _, s in self.sites])

    def min_meet_rank(self, model: HierModel) -> int | None:
        pts = self.points
        ranks = [model.meet_rank(pts[i], pts[j])
                 for i in range(len(pts)) for j in range(i + 1, len(pts))]
        return min(ranks) if ranks else None

    def min_distance(self, model: HierModel) -> float:
        """delta = min intrinsic distance between sites (inf for one site)."""
        j = self.min_meet_rank(model)
        return math.inf if j is None else 1.0 / model.lam(j)


def site_resolvent_matrix(model: HierModel, cfg: SiteConfig, lam: float) -> np.ndarray:
    """R(lambda, a_i, a_j) for all site pairs from one shared suffix-sum pass."""
    lam = float(lam)
    _check_pole(model, lam, model.first_pole)
    pts = cfg.points
    n = len(pts)
    ranks = {(i, j): model.meet_rank(pts[i], pts[j]) for i in range(n) for j in range(i + 1, n)}
    top = max(ranks.values(), default=0)
    S = _suffix_sums(model, lam, model.first_pole, min_len=top + 1)
    R = np.empty((n, n))
    R[np.diag_indices(n)] = S[0]
    for (i, j), r in ranks.items():
        # local term of the meet ball plus the tail above it
        R[i, j] = R[j, i] = -1.0 / model.measure(r) / (model.lam(r) - lam) + S[r]
    return R


def secular_matrix(model: HierModel, cfg: SiteConfig, lam: float) -> np.ndarray:
    """Theta^{-1} - R(lambda): symmetric, singular exactly at eigenvalues, decreasing in lambda."""
    return np.diag(1.0 / cfg.sigmas) - site_resolvent_matrix(model, cfg, lam)


def a_matrix(model: HierModel, cfg: SiteConfig, lam: float) -> np.ndarray:
    """Diagonal 1/sigma_i, off-diagonal -R(lambda, a_i, a_j); roots where R(lambda,a,a) is an eigenvalue."""
    M = -site_resolvent_matrix(model, cfg, lam)
    M[np.diag_indices_from(M)] = 1.0 / cfg.sigmas
    return M


def _neg_index(M: np.ndarray) -> int:
    return int(np.sum(np.linalg.eigvalsh(M) < 0))


def _det_sign(model, cfg, lam) -> int:
    s, _ = np.linalg.slogdet(secular_matrix(model, cfg, lam))
    return int(s)


def _gap_bounds(model: HierModel, k: int) -> tuple[float, float, float]:
    lo, hi = model.lam(k + 1), model.lam(k)
    w = hi - lo
    return lo + ENDPOINT_OFFSET * w, hi - ENDPOINT_OFFSET * w, w


def _roots_by_inertia(model, cfg, a, b, tol) -> list[float]:
    """Roots of det(Theta^{-1} - R) in (a, b) from the negative index, which rises by one per root."""
    nu_a = _neg_index(secular_matrix(model, cfg, a))
    nu_b = _neg_index(secular_matrix(model, cfg, b))
    roots = []
    for i in range(1, nu_b - nu_a + 1):
        lo, hi = a, b
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if _neg_index(secular_matrix(model, cfg, mid)) >= nu_a + i:
                hi = mid
            else:
                lo = mid
        roots.append(0.5 * (lo + hi))
    return roots


def _roots_by_scan(model, cfg, a, b, tol, n_cap) -> list[float]:
    """Sign-change scan of det on a grid doubled until the root count is stable."""
    sub = 64
    prev = None
    while True:
        grid = np.linspace(a, b, sub + 1)
        signs = np.array([_det_sign(model, cfg, x) for x in grid])
        brackets = [(grid[i], grid[i + 1]) for i in range(sub) if signs[i] * signs[i + 1] < 0]
        if prev is not None and len(brackets) == prev:
            break
        prev = len(brackets)
        sub *= 2
        if sub > 1 << 16:
            break
    if len(brackets) > n_cap:
        raise ConsistencyError(
            f"{len(brackets)} roots found in one gap, more than the rank {n_cap}")
    f = lambda lam: float(_det_sign(model, cfg, lam))
    return [_bisect(f, lo, hi, tol) for lo, hi in brackets]


def finite_rank_gap_eigenvalues(model: HierModel, cfg: SiteConfig, k: int,
                                method: str = "inertia") -> list[float]:
    """Eigenvalues of L - sum sigma_i delta_{a_i} inside the gap (lambda_{k+1}, lambda_k).

    ``method="inertia"`` tracks the number of negative eigenvalues of the
    secular matrix, which is robust when two roots nearly coincide.
    ``method="scan"`` is the determinant sign-change scan, kept as an
    independent route; it cannot see roots of even multiplicity.
    """
    if model.kind is Kind.PADIC_FIELD:
        raise ValidationError("point potentials need a discrete model")
    if k < 1:
        raise RangeError("gap index must be >= 1")
    cfg = SiteConfig(cfg.sites, model)
    a, b, w = _gap_bounds(model, k)
    if method == "inertia":
        roots = _roots_by_inertia(model, cfg, a, b, ROOT_TOL * w)
    elif method == "scan":
        roots = _roots_by_scan(model, cfg, a, b, ROOT_TOL * w, cfg.n)
    else:
        raise ValidationError(f"unknown root method {method!r}")
    if len(roots) > cfg.n:
        raise ConsistencyError(f"{len(roots)} roots in gap {k} exceed the rank {cfg.n}")
    return roots


def finite_rank_negative_eigenvalues(model: HierModel, cfg: SiteConfig) -> list[float]:
    """Eigenvalues below 0, searched on (-sum sigma_i - lambda_1, 0)."""
    cfg = SiteConfig(cfg.sites, model)
    lo = -float(cfg.sigmas.sum()) - model.lam(1)
    if is_transient(model):
        hi = 0.0
    else:
        hi = -abs(lo) * 1e-9
        # push the end towards 0 until the index stops changing
        while True:
            nxt = hi * 1e-3
            if (_neg_index(secular_matrix(model, cfg, nxt))
                    == _neg_index(secular_matrix(model, cfg, hi))) or nxt > -1e-300:
                break
            hi = nxt
    return _roots_by_inertia(model, cfg, lo, hi, ROOT_TOL * abs(lo))


@dataclass
class GershgorinReport:
    epsilon: float
    disjoint: bool
    k_delta: int | None
    centers: list[float]

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "disjoint": self.disjoint,
                "k_delta": self.k_delta, "centers": self.centers}


def _gershgorin_eps(model: HierModel, cfg: SiteConfig, k: int, j: int) -> float:
    if k > j - 2:
        return math.inf
    # |R(lambda, a_i, a_l)| <= 2 m_j^{-1} / (lambda_{k+1} - lambda_j) for lambda in gap k
    return cfg.n * 2.0 / model.measure(j) / (model.lam(k + 1) - model.lam(j))


def gershgorin_separation(model: HierModel, cfg: SiteConfig, k: int) -> GershgorinReport:
    """Disks |s - 1/sigma_i| <= epsilon around the diagonal of the A-matrix.

    epsilon/N bounds every off-diagonal entry uniformly over gap k; the
    bound needs the gap to lie above lambda_{j-1}, j the smallest meet rank
    of two sites. Disjoint disks certify N distinct roots in the gap.
    """
    cfg = SiteConfig(cfg.sites, model)
    centers = sorted(1.0 / cfg.sigmas)
    j = cfg.min_meet_rank(model)
    if j is None:
        return GershgorinReport(0.0, True, None, centers)
    gaps = np.diff(centers)

    def disjoint(eps):
        return bool(np.all(gaps > 2 * eps)) and math.isfinite(eps)

    eps = _gershgorin_eps(model, cfg, k, j)
    k_delta = None
    for kk in range(1, j - 1):
        if disjoint(_gershgorin_eps(model, cfg, kk, j)):
            k_delta = kk
        else:
            break
    return GershgorinReport(eps, disjoint(eps), k_delta, centers)
