"""Dyadic half-line model with an infinite-rank block potential.

Points are 0, 1, 2, ... with dyadic intervals as balls and lambda(rank r) =
kappa^r. The blocks are B_0 = {0, 1} and B_k = {2^k, ..., 2^{k+1} - 1},
and H = L + V with V = sum sigma_k 1_{B_k}.

H splits into the zero-mean functions of each block, where it acts as
L + sigma_k (explicit spectrum), and the span of the block indicators.
On that span the weak equation for psi = sum psi_n 1_{B_n} reads, for
every row n,

    sum_l G[n, l] psi_l = (lambda - sigma_n) |B_n| psi_n,

with G[n, l] = (L 1_{B_l}, 1_{B_n}). Three consecutive rows combine into
A_{n+1} psi_{n+1} + B_n psi_n + C_{n-1} psi_{n-1} = 0, and theta_n =
(lambda - sigma_n) psi_n obeys theta_{n+1} = D_n theta_n + E_{n-1} theta_{n-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import ValidationError
from .model_core import SpectralPoint, SpectrumReport

CLOSURE_TOL = 1e-9
RESCALE = 1e100


# ---------------------------------------------------------------------------
# potentials


def dense_enumeration(a: float, b: float, n: int) -> np.ndarray:
    """a, b, then the midpoint, then quarter points, eighths, ... (odd numerators only)."""
    if not a < b:
        raise ValidationError("dense interval needs a < b")
    out = [a, b]
    level = 1
    while len(out) < n:
        den = 2 ** level
        out.extend(a + (b - a) * j / den for j in range(1, den, 2))
        level += 1
    return np.array(out[:n], dtype=float)


@dataclass(frozen=True)
class DysonPotential:
    """Block depths sigma_0, sigma_1, ...: an explicit prefix then a generator rule.

    ``rule="constant"`` repeats ``value``; ``rule="dense"`` enumerates the
    interval ``interval`` densely (see :func:`dense_enumeration`).
    """

    kappa: float
    prefix: tuple[float, ...] = ()
    rule: str = "constant"
    value: float = 0.0
    interval: tuple[float, float] | None = None
    require_distinct: bool = True

    def __post_init__(self):
        if not 0 < self.kappa < 1:
            raise ValidationError("kappa must lie in (0, 1)")
        object.__setattr__(self, "prefix", tuple(float(s) for s in self.prefix))
        if self.rule not in ("constant", "dense"):
            raise ValidationError("rule must be 'constant' or 'dense'")
        if self.rule == "dense":
            if self.interval is None:
                raise ValidationError("dense rule needs an interval")
            a, b = map(float, self.interval)
            object.__setattr__(self, "interval", (a, b))
            dense_enumeration(a, b, 2)
        vals = list(self.prefix) + [self.value]
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError("block depths must be finite")
        if self.require_distinct:
            s = self.sigmas(2)
            if s[0] == s[1]:
                raise ValidationError("the construction needs sigma_0 != sigma_1")

    def sigmas(self, n: int) -> np.ndarray:
        head = np.array(self.prefix[:n], dtype=float)
        rest = n - len(head)
        if rest <= 0:
            return head
        if self.rule == "constant":
            tail = np.full(rest, float(self.value))
        else:
            tail = dense_enumeration(*self.interval, rest)
        return np.concatenate([head, tail])

    def closure(self) -> tuple[list[float], list[tuple[float, float]]]:
        """(isolated points, intervals) whose union is the closure of {sigma_n}."""
        if self.rule == "constant":
            return sorted(set(self.prefix) | {float(self.value)}), []
        return sorted(set(self.prefix)), [self.interval]

    def distance_to_closure(self, lam: float) -> float:
        pts, ivs = self.closure()
        d = min((abs(lam - s) for s in pts), default=math.inf)
        for a, b in ivs:
            d = min(d, 0.0 if a <= lam <= b else min(abs(lam - a), abs(lam - b)))
        return d

    def to_dict(self) -> dict:
        d = {"kappa": self.kappa, "prefix": list(self.prefix), "rule": self.rule}
        if self.rule == "constant":
            d["value"] = self.value
        else:
            d["interval"] = list(self.interval)
        return d


def block_of(x) -> np.ndarray:
    """Block index of each point: 0 for {0, 1}, k for 2^k <= x < 2^{k+1}."""
    x = np.asarray(x, dtype=np.int64)
    if np.any(x < 0):
        raise ValidationError("points of the half-line are non-negative")
    out = np.array([max(int(v).bit_length() - 1, 0) for v in x.ravel()], dtype=np.int64)
    return out.reshape(x.shape)


def block_rank(k: int) -> int:
    return 1 if k == 0 else k


def block_size(k: int) -> int:
    return 2 ** block_rank(k)


# ---------------------------------------------------------------------------
# the span of block indicators


def gram_L(kappa: float, M: int) -> np.ndarray:
    """G[n, l] = (L 1_{B_l}, 1_{B_n}) for the first M blocks.

    The indicator of B_n is the sum of its own average and the eigenfunctions
    f_T of the balls T above it; expanding both indicators gives
    G[n, n] = w_n kappa^{rho_n+1} - c w_n^2 q^{rho_n+1} and
    G[n, l] = -c w_n w_l q^{max(n,l)+1}, with q = kappa/2, c = (1-kappa)/(1-q),
    w_n = |B_n| and rho_n = rank of B_n.
    """
    q = kappa / 2.0
    c = (1.0 - kappa) / (1.0 - q)
    w = np.array([block_size(k) for k in range(M)], dtype=float)
    rho = np.array([block_rank(k) for k in range(M)], dtype=float)
    idx = np.arange(M)
    top = np.maximum.outer(idx, idx) + 1.0
    G = -c * np.outer(w, w) * q ** top
    G[idx, idx] = w * kappa ** (rho + 1) - c * w ** 2 * q ** (rho + 1)
    return G


def matrix_Hplus(potential: DysonPotential, M: int) -> np.ndarray:
    """H on the span of the first M indicators, orthonormal basis E_{k+1} = |B_k|^{-1/2} 1_{B_k}."""
    if M < 2:
        raise ValidationError("truncation needs M >= 2")
    G = gram_L(potential.kappa, M)
    w = np.array([block_size(k) for k in range(M)], dtype=float)
    s = np.sqrt(w)
    H = G / np.outer(s, s)
    H[np.diag_indices(M)] += potential.sigmas(M)
    return 0.5 * (H + H.T)


def boundary_mode(kappa: float, M: int) -> float:
    """Eigenvalue of the truncated L part carried by the last indicator (V = 0)."""
    q = kappa / 2.0
    return kappa ** (M + 1) - (1 - kappa) * 2.0 ** M * q ** (M + 1) / (1 - q)


def completeness_system(M: int) -> np.ndarray:
    """Solve 2 xi_k = sum_{l<=k} xi_l by forward substitution (forced zero solution)."""
    T = np.tril(np.ones((M, M)))
    T[np.diag_indices(M)] -= 2.0
    xi = np.zeros(M)
    rhs = np.zeros(M)
    for k in range(M):
        xi[k] = (rhs[k] - T[k, :k] @ xi[:k]) / T[k, k]
    return xi


# ---------------------------------------------------------------------------
# three-term recurrences


def coefficients_ABC(lam: float, kappa: float, sigmas, n: int, c0: str = "consistent"):
    """(A_n, B_n, C_n) of A_{n+1} psi_{n+1} + B_n psi_n + C_{n-1} psi_{n-1} = 0.

    C_0 = (1 - kappa) kappa^2 / 2 makes the recurrence agree with the weak
    equation; ``c0="listed"`` returns -(kappa^2/2)(1 + kappa) instead, which
    does not (kept for comparison).
    """
    s = np.asarray(sigmas, dtype=float)
    if n < -1:
        raise ValidationError("index n must be >= -1")
    A = -(lam - s[n]) + kappa ** (n + 1) if n >= 0 else 0.0
    if n == -1:
        return A, 0.0, 0.0
    a = lam - s[n]
    if n == 0:
        B = a - kappa ** 2
        if c0 == "consistent":
            C = (1 - kappa) * kappa ** 2 / 2
        elif c0 == "listed":
            C = -kappa ** 2 / 2 * (1 + kappa)
        else:
            raise ValidationError("c0 must be 'consistent' or 'listed'")
    elif n == 1:
        B = a - kappa ** 2 / 2 * (1 + kappa)
        C = -kappa / 2 * a + kappa ** (n + 2) / 2
    else:
        B = (1 + kappa / 2) * a - (0.5 + kappa) * kappa ** (n + 1)
        C = -kappa / 2 * a + kappa ** (n + 2) / 2
    return A, B, C


def _check_lambda(lam: float, sigmas, upto: int) -> None:
    s = np.asarray(sigmas, dtype=float)[: upto + 1]
    if np.any(np.abs(lam - s) < CLOSURE_TOL):
        raise ValidationError("lambda lies on the closure of the block depths")


def recursion_DE(lam: float, kappa: float, sigmas, n: int) -> tuple[float, float]:
    """(D_n, E_{n-1}) of theta_{n+1} = D_n theta_n + E_{n-1} theta_{n-1}; E_{-1} = 0."""
    dD, dE = recursion_deviations(lam, kappa, sigmas, n)
    if n == 0:
        return dD + 1.0, dE
    return dD + 1.0 + kappa / 2, dE - kappa / 2


def recursion_deviations(lam: float, kappa: float, sigmas, n: int) -> tuple[float, float]:
    """D_n - D_inf and E_{n-1} - E_inf without cancellation (D_inf = 1 + kappa/2, E_inf = -kappa/2).

    For n = 0 the reference values are D_0 -> 1 and E_{-1} = 0.
    """
    s = np.asarray(sigmas, dtype=float)
    if len(s) < n + 2:
        raise ValidationError("need sigma_0 .. sigma_{n+1}")
    _check_lambda(lam, s, n + 1)
    a = lam - s
    A1 = -a[n + 1] + kappa ** (n + 2)
    if abs(A1) < CLOSURE_TOL:
        raise ValidationError("A_{n+1} vanishes: pole of the elimination")
    if n == 0:
        # D_0 = a_1 (a_0 - kappa^2) / ((a_1 - kappa^2) a_0)
        return kappa ** 2 * (a[0] - a[1]) / ((a[1] - kappa ** 2) * a[0]), 0.0
    _, B, _ = coefficients_ABC(lam, kappa, s, n)
    _, _, Cm = coefficients_ABC(lam, kappa, s, n - 1)
    if n == 1:
        D = -a[n + 1] * B / (A1 * a[n])
        E = -a[n + 1] * Cm / (A1 * a[n - 1])
        return D - (1 + kappa / 2), E + kappa / 2
    num_d = a[n + 1] * (0.5 + kappa) * kappa ** (n + 1) - (1 + kappa / 2) * kappa ** (n + 2) * a[n]
    num_e = -a[n + 1] * kappa ** (n + 1) / 2 + (kappa / 2) * kappa ** (n + 2) * a[n - 1]
    return num_d / (A1 * a[n]), num_e / (A1 * a[n - 1])


def _de_arrays(lam: float, kappa: float, s: np.ndarray, N: int):
    D = np.empty(N + 1)
    E = np.empty(N + 1)
    for n in range(N + 1):
        D[n], E[n] = recursion_DE(lam, kappa, s, n)
    return D, E


@dataclass
class RecursionState:
    n: int
    theta_prev: float
    theta_curr: float
    lam: float
    log_scale: float = 0.0


@dataclass
class ThetaSequence:
    """theta_n = mantissa[n] * exp(log_scale[n])."""

    mantissa: np.ndarray
    log_scale: np.ndarray
    lam: float = field(default=0.0)

    @property
    def values(self) -> np.ndarray:
        return self.mantissa * np.exp(self.log_scale)

    def log_abs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.mantissa)) + self.log_scale


def iterate_theta(lam: float, potential: DysonPotential, theta0: float, N: int) -> ThetaSequence:
    """Forward iteration from theta_0 with theta_1 = D_0 theta_0, rescaled on overflow."""
    if N < 1:
        raise ValidationError("N must be >= 1")
    k = potential.kappa
    s = potential.sigmas(N + 2)
    D, E = _de_arrays(lam, k, s, N)
    mant = np.empty(N + 1)
    logs = np.zeros(N + 1)
    st = RecursionState(0, 0.0, float(theta0), lam)
    mant[0] = st.theta_curr
    nxt = D[0] * st.theta_curr
    st = RecursionState(1, st.theta_curr, nxt, lam)
    mant[1] = nxt
    for n in range(1, N):
        nxt = D[n] * st.theta_curr + E[n] * st.theta_prev
        st = RecursionState(n + 1, st.theta_curr, nxt, lam, st.log_scale)
        if abs(nxt) > RESCALE or (0 < abs(nxt) < 1 / RESCALE):
            f = abs(nxt)
            st.theta_prev /= f
            st.theta_curr /= f
            st.log_scale += math.log(f)
        mant[n + 1] = st.theta_curr
        logs[n + 1] = st.log_scale
    return ThetaSequence(mant, logs, lam)


def _backward(lam: float, potential: DysonPotential, N: int):
    """Backward recurrence from theta_{N+1} = 0, theta_N = 1.

    Returns mantissas, per-index log factors (theta_n is proportional to
    mantissa[n] * exp(log_factor[n])) and the D coefficients. The common
    factor is positive, so signs depend continuously on lambda.
    """
    k = potential.kappa
    s = potential.sigmas(N + 2)
    D, E = _de_arrays(lam, k, s, N)
    th = np.zeros(N + 2)
    th[N] = 1.0
    off = np.zeros(N + 2)
    c = 0.0
    for n in range(N, 0, -1):
        th[n - 1] = (th[n + 1] - D[n] * th[n]) / E[n]
        f = abs(th[n - 1])
        if f > RESCALE:
            th[n - 1: n + 2] /= f
            c += math.log(f)
        off[n - 1: n + 2] = c
    return th[: N + 1], off[: N + 1], D


def minimal_log_abs(lam: float, potential: DysonPotential, N: int) -> tuple[np.ndarray, np.ndarray]:
    """(sign, log|theta_n|) of the minimal solution, normalised so that max |theta| = 1 near n = 0."""
    th, off, _ = _backward(lam, potential, N)
    with np.errstate(divide="ignore"):
        la = np.log(np.abs(th)) + off
    la -= np.max(la[:2])
    return np.sign(th), la


def initial_mismatch(lam: float, potential: DysonPotential, N: int = 200) -> float:
    """(theta_1 - D_0 theta_0) / |(theta_0, theta_1)| for the minimal solution.

    Zero exactly when the decaying solution also satisfies the first weak
    row, i.e. when lambda is an eigenvalue of H on the indicator span.
    """
    th, off, D = _backward(lam, potential, N)
    t0, t1 = th[0], th[1] * math.exp(off[1] - off[0])
    return (t1 - D[0] * t0) / math.hypot(t0, t1)


def minimal_psi(lam: float, potential: DysonPotential, N: int) -> np.ndarray:
    """psi_n = theta_n / (lambda - sigma_n) for the minimal solution, psi normalised to max 1."""
    sg, la = minimal_log_abs(lam, potential, N)
    theta = sg * np.exp(la)
    psi = theta / (lam - potential.sigmas(N + 1))
    return psi / np.max(np.abs(psi))


def _fit_slope(n: np.ndarray, y: np.ndarray) -> float:
    A = np.vstack([n, np.ones_like(n)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


def minimal_solution_classify(lam: float, potential: DysonPotential, N: int | None = None,
                              fit_window: tuple[int, int] = (5, 45), tol: float = 0.05) -> dict:
    """Decay exponent of the minimal solution and the resolvent-set test.

    The slope of log|theta_n| over ``fit_window`` is compared with
    ln(kappa/2); within ``tol`` (relative) the point is a resolvent-set
    candidate. ``convergence`` is the largest change of the normalised
    solution on the window when the depth is doubled.
    """
    lo, hi = fit_window
    if hi - lo < 4 or lo < 0:
        raise ValidationError("fit window too short")
    d = potential.distance_to_closure(lam)
    if d < CLOSURE_TOL:
        raise ValidationError("lambda lies on the closure of the block depths")
    if N is None:
        N = max(200, 4 * hi)
    if N < hi + 10:
        raise ValidationError("recurrence depth must exceed the fit window")
    _, la = minimal_log_abs(lam, potential, N)
    _, la2 = minimal_log_abs(lam, potential, 2 * N)
    n = np.arange(lo, hi + 1, dtype=float)
    slope = _fit_slope(n, la[lo: hi + 1])
    target = math.log(potential.kappa / 2)
    conv = float(np.max(np.abs(np.exp(la[lo: hi + 1] - la2[lo: hi + 1]) - 1.0)))
    return {
        "lambda": lam,
        "decay_exponent": slope,
        "target_exponent": target,
        "is_candidate_resolvent_set": bool(abs(slope - target) <= tol * abs(target)),
        "distance_to_closure": d,
        "depth": N,
        "convergence": conv,
        "initial_mismatch": initial_mismatch(lam, potential, N),
    }


def weak_residual(lam: float, potential: DysonPotential, psi: np.ndarray, M: int) -> np.ndarray:
    """Rows of G psi - (lambda - sigma) |B| psi divided by |B_n|, over the first M blocks."""
    psi = np.asarray(psi, dtype=float)[:M]
    if len(psi) < M:
        raise ValidationError("psi shorter than the truncation")
    G = gram_L(potential.kappa, M)
    w = np.array([block_size(k) for k in range(M)], dtype=float)
    return (G @ psi - (lam - potential.sigmas(M)) * w * psi) / w


def hplus_eigenvalues(potential: DysonPotential, lo: float, hi: float, n_grid: int = 400,
                      depth: int = 200) -> list[float]:
    """Eigenvalues of H on the indicator span in [lo, hi] away from the closure of {sigma_n}.

    Sign changes of :func:`initial_mismatch` on a grid, refined by Brent's method.
    """
    grid = np.linspace(lo, hi, n_grid + 1)
    vals = []
    for x in grid:
        try:
            if potential.distance_to_closure(x) < 1e-6:
                raise ValidationError("on the closure")
            vals.append(initial_mismatch(x, potential, depth))
        except ValidationError:
            vals.append(np.nan)  # on the closure or at a pole of the elimination
    roots = []
    for i in range(n_grid):
        f0, f1 = vals[i], vals[i + 1]
        if np.isnan(f0) or np.isnan(f1) or f0 * f1 > 0:
            continue
        # a sign flip through a pole of the mismatch has |f| large on both sides
        r = optimize.brentq(lambda x: initial_mismatch(x, potential, depth), grid[i], grid[i + 1],
                            xtol=1e-14, rtol=1e-14)
        if abs(initial_mismatch(r, potential, depth)) < 1e-8:
            roots.append(float(r))
    return roots


def fit_limits(values: np.ndarray, limit: float, window: tuple[int, int]) -> dict:
    """Geometric fit of |values_n - limit| over the window: rate and the fitted tail value."""
    lo, hi = window
    n = np.arange(lo, hi + 1, dtype=float)
    dev = np.abs(np.asarray(values)[lo: hi + 1])
    slope = _fit_slope(n, np.log(dev))
    return {"rate": math.exp(slope), "last_deviation": float(dev[-1]), "limit": limit}


def deviation_sequences(lam: float, potential: DysonPotential, N: int) -> tuple[np.ndarray, np.ndarray]:
    """D_n - (1 + kappa/2) and E_{n-1} + kappa/2 for n = 0..N (n = 0 against 1 and 0)."""
    s = potential.sigmas(N + 2)
    dd = np.empty(N + 1)
    de = np.empty(N + 1)
    for n in range(N + 1):
        dd[n], de[n] = recursion_deviations(lam, potential.kappa, s, n)
    return dd, de


# ---------------------------------------------------------------------------
# zero-mean part


def spec_Lminus_blocks(potential: DysonPotential, block_count: int) -> SpectrumReport:
    """Union over blocks of kappa^r + sigma_k, r = 1..rank(B_k), multiplicity 2^{rank - r}."""
    if block_count < 1:
        raise ValidationError("block_count must be >= 1")
    k = potential.kappa
    s = potential.sigmas(block_count)
    pts = []
    for b in range(block_count):
        rho = block_rank(b)
        for r in range(1, rho + 1):
            pts.append(SpectralPoint(k ** r + s[b], 2 ** (rho - r), "compact",
                                     "L-eigenvalue", block=b))
    meta = {"block_count": block_count}
    if potential.rule == "dense":
        a, bb = potential.interval
        meta["coverage"] = {f"kappa^{r}": coverage_gap(pts, k ** r + a, k ** r + bb)
                            for r in (1, 2)}
    return SpectrumReport(tuple(pts), meta)


def coverage_gap(points, lo: float, hi: float) -> float:
    """Largest distance from a point of [lo, hi] to the reported values."""
    v = np.sort(np.array([q.value if isinstance(q, SpectralPoint) else q for q in points]))
    v = v[(v >= lo - 1e-12) & (v <= hi + 1e-12)]
    if len(v) == 0:
        return hi - lo
    edges = np.concatenate([[lo], v, [hi]])
    d = np.diff(edges)
    # the ends count fully, interior gaps are halved
    return float(max(d[0], d[-1], (d[1:-1].max() / 2) if len(d) > 2 else 0.0))
