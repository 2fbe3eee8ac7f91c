"""Counting negative eigenvalues of H = L - V for wells V = sum sigma_i 1_{B_i}.

For a single well sigma 1_{B0} the space splits into functions with zero
mean on every ball of the rank of B0 (where H acts as L - sigma on the
eigenfunctions f_T, T strictly inside B0) and its complement (where H
reduces to a rank-one problem on the tree above B0). The first part gives
an exact count, the second contributes at most one eigenvalue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import DivergenceError, ValidationError
from .kernels import is_transient
from .model_core import BallRef, HierModel, Kind

TIE_RTOL = 1e-12


@dataclass(frozen=True)
class BallPotential:
    """Wells sum sigma_i 1_{B_i} with pairwise disjoint balls; H = L - V."""

    balls: tuple[tuple[BallRef, float], ...]

    def __post_init__(self):
        balls = tuple((b, float(s)) for b, s in self.balls)
        for b, s in balls:
            if not isinstance(b, BallRef):
                raise ValidationError("wells must be given as BallRef objects")
            if not (s > 0 and math.isfinite(s)):
                raise ValidationError("well depths must be positive and finite")
        for i in range(len(balls)):
            for j in range(i + 1, len(balls)):
                if not balls[i][0].disjoint(balls[j][0]):
                    raise ValidationError("wells must sit on pairwise disjoint balls")
        object.__setattr__(self, "balls", balls)

    @property
    def model(self) -> HierModel | None:
        return self.balls[0][0].model if self.balls else None

    def phi_integral(self, alpha: float, threshold: float | Sequence[float] | None = None) -> float:
        """sum m(B_i) sigma_i^{1/alpha}, optionally only over sigma_i > threshold_i."""
        total = 0.0
        for i, (b, s) in enumerate(self.balls):
            if threshold is not None:
                th = threshold[i] if isinstance(threshold, (list, tuple, np.ndarray)) else threshold
                if not s > th:
                    continue
            total += b.measure * s ** (1.0 / alpha)
        return total


def single_well(model: HierModel, rank: int, sigma: float, anchor=0) -> BallPotential:
    return BallPotential(((BallRef(model, anchor, rank), sigma),))


# ---------------------------------------------------------------------------
# the exact count on the zero-mean part


def _le(a: float, b: float) -> bool:
    return a <= b or math.isclose(a, b, rel_tol=TIE_RTOL)


def _lt(a: float, b: float) -> bool:
    return a < b and not math.isclose(a, b, rel_tol=TIE_RTOL)


def k_star(model: HierModel, sigma: float, rank: int = 0) -> int | None:
    """Largest k with lambda(rank - k) <= sigma; None when sigma < lambda(rank).

    Equivalently p^k <= sigma^{1/alpha} p^{rank-1} < p^{k+1}; the left end is
    closed, so a tie lambda(rank - k) = sigma belongs to k.
    """
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    if not _le(model.lam(rank), sigma):
        return None
    k = int(math.floor(math.log(sigma / model.lam(rank)) / (model.alpha * math.log(model.p))))
    while not _le(model.lam(rank - k), sigma):
        k -= 1
    while _le(model.lam(rank - k - 1), sigma):
        k += 1
    return k


def lminus_levels(model: HierModel, B0: BallRef, sigma: float) -> list[tuple[int, int, float]]:
    """(rank r, multiplicity, eigenvalue lambda(r) - sigma) of the negative levels.

    The eigenfunctions f_T, T strictly inside B0, with parent of rank r
    number (p - 1) p^{k0 - r} and have eigenvalue lambda(r) - sigma.
    """
    k0 = B0.rank
    lowest = model.first_pole if model.is_discrete else model.rank_window[0] + 1
    out = []
    r = k0
    while r >= lowest and _lt(model.lam(r), sigma):
        out.append((r, (model.p - 1) * model.p ** (k0 - r), model.lam(r) - sigma))
        r -= 1
    return out


def neg_count_Lminus_exact(model: HierModel, B0: BallRef, sigma: float) -> int:
    """(n-1) + n(n-1) + n^2(n-1) + ... over levels with lambda(r) < sigma, n = p."""
    return sum(m for _, m, _ in lminus_levels(model, B0, sigma))


def forward_degree_product(model: HierModel, B0: BallRef, sigma: float) -> int:
    """Product of the forward degrees over the negative levels (p^levels)."""
    return model.p ** len(lminus_levels(model, B0, sigma))


# ---------------------------------------------------------------------------
# the three regions of D^alpha - sigma 1_{Z_p}


def omega_thresholds(p: int, alpha: float) -> tuple[float, float]:
    """(t1, t2): Neg = 0 for sigma <= t1, 1 for t1 < sigma <= t2, more above t2."""
    return (p - p ** alpha) / (p - 1.0), float(p) ** alpha


def _classify(p, alpha, sigma):
    t1, t2 = omega_thresholds(p, alpha)
    if sigma <= t1:
        return "Omega1"
    if sigma <= t2:
        return "Omega2"
    return "Omega3"


def _region_neg(region: str, p: int, alpha: float, sigma: float):
    if region == "Omega1":
        return 0
    if region == "Omega2":
        return 1
    integral = sigma ** (1.0 / alpha)  # m(Z_p) = 1
    return [math.ceil(integral / (2 * p) - 1e-12), math.floor(1.5 * integral + 1e-12)]


def omega_region(p: int, alpha: float, sigma: float) -> dict:
    """Region of (alpha, sigma) and the count of negative eigenvalues it implies.

    Equalities with either threshold (relative 1e-12) are flagged as
    boundary points and not classified; the classification that the
    non-strict inequalities would give is reported under ``verbatim_region``.
    """
    if not (alpha > 0 and sigma > 0):
        raise ValidationError("alpha and sigma must be positive")
    if not isinstance(p, int) or p < 2:
        raise ValidationError("p must be an integer >= 2")
    t1, t2 = omega_thresholds(p, alpha)
    region = _classify(p, alpha, sigma)
    at_edge = (t1 > 0 and math.isclose(sigma, t1, rel_tol=TIE_RTOL)) or math.isclose(
        sigma, t2, rel_tol=TIE_RTOL)
    out = {"p": p, "alpha": alpha, "sigma": sigma, "thresholds": [t1, t2]}
    if at_edge:
        out.update(region=None, boundary=True, neg=None, verbatim_region=region,
                   verbatim_neg=_region_neg(region, p, alpha, sigma))
    else:
        out.update(region=region, boundary=False, neg=_region_neg(region, p, alpha, sigma))
    return out


# ---------------------------------------------------------------------------
# CLR-type bound


def molchanov_vainberg_c(sigma: float) -> float:
    """c(sigma) = e^{-sigma} int_0^inf z/(z + sigma) e^{-z} dz by adaptive quadrature."""
    if sigma < 0:
        raise ValidationError("sigma must be non-negative")
    val, err = integrate.quad(lambda z: z / (z + sigma) * math.exp(-z), 0.0, math.inf,
                              epsabs=1e-13, epsrel=1e-12, limit=200)
    return math.exp(-sigma) * val


def time_integrated_diag(model: HierModel, tau: float) -> float:
    """int_tau^inf p(t, x, x) dt = sum_k A_k exp(-tau lambda_k) / lambda_k."""
    if not is_transient(model):
        raise DivergenceError("int p(t,x,x) dt diverges on a recurrent model")
    if not tau > 0:
        raise ValidationError("lower time limit must be positive")
    q = 1.0 / (model.p * model.kappa)
    if model.kind is Kind.PADIC_FIELD:
        from .kernels import _diag_lower_rank
        k = _diag_lower_rank(model, tau)
    else:
        k = 1
    total = 0.0
    for _ in range(100_000):
        total += model.jump(k) * math.exp(-tau * model.lam(k)) / model.lam(k)
        k += 1
        rest = model.jump(k) / model.lam(k) / (1.0 - q)
        if total > 0 and rest <= 1e-14 * total:
            return total
    raise DivergenceError("time-integrated heat kernel did not converge")


def clr_upper_bound(model: HierModel, potential: BallPotential, sigma_param: float = 2.0) -> float:
    """(1/c(s)) sum_i m(B_i) sigma_i int_{s/sigma_i}^inf p(t,x,x) dt, s = sigma_param."""
    if not is_transient(model):
        raise DivergenceError("the CLR bound needs a transient model")
    if not sigma_param > 0:
        raise ValidationError("sigma_param must be positive")
    c = molchanov_vainberg_c(sigma_param)
    total = 0.0
    for b, s in potential.balls:
        total += b.measure * s * time_integrated_diag(model, sigma_param / s)
    return total / c


def neg_bounds_general(model: HierModel, potential: BallPotential,
                       lambda_star: float | None = None, sigma_param: float = 2.0) -> dict:
    """Lower (1/2p) and upper (3/2) constants times the Phi^{-1} integrals of V.

    The lower integral runs over the wells deeper than lambda_star; by
    default each well uses lambda_star = lambda(B_i), below which it has no
    negative zero-mean level.
    """
    if not potential.balls:
        return {"lower": 0.0, "upper": 0.0, "clr": 0.0}
    if lambda_star is None:
        th = [b.eigenvalue for b, _ in potential.balls]
    else:
        th = lambda_star
    lower = potential.phi_integral(model.alpha, th) / (2.0 * model.p)
    upper = 1.5 * potential.phi_integral(model.alpha)
    out = {"lower": lower, "upper": upper}
    out["clr"] = clr_upper_bound(model, potential, sigma_param) if is_transient(model) else None
    return out
