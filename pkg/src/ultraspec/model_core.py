"""Ultrametric geometry of the supported hierarchical models.

Three model families share one tree-of-balls structure with branching p:

* ``discrete_lattice``: the non-negative integers with p-adic digit blocks
  as balls, m(rank-k ball) = p**k, eigenvalue lambda_k = p**(-alpha*(k-1)).
* ``padic_field``: points are p-adic numbers written as finite digit strings,
  ranks run over all integers (limited to a configurable window for ball
  objects), same measure and eigenvalue maps as the lattice.
* ``dyson_dyadic``: the dyadic half-line lattice, p = 2, counting measure and
  lambda(rank-r ball) = kappa**r = |B|**(-alpha).

Everything downstream reads eigenvalues, measures and jump coefficients
through :class:`HierModel` so the per-family normalisation lives here only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import RangeError, ValidationError

DEFAULT_PADIC_WINDOW = (-64, 64)
# lattice ranks above this are never materialised as ball objects
LATTICE_RANK_CAP = 1000


class Kind(str, Enum):
    DISCRETE_LATTICE = "discrete_lattice"
    PADIC_FIELD = "padic_field"
    DYSON_DYADIC = "dyson_dyadic"


# ---------------------------------------------------------------------------
# points of the p-adic field


@dataclass(frozen=True)
class PAdicPoint:
    """Finite p-adic expansion sum_i digits[i] * p**(valuation + i).

    The representation is normalised: no leading or trailing zero digits, and
    zero is the empty digit string with valuation 0. Digits are checked
    against the base by :meth:`HierModel.check_point`.
    """

    valuation: int = 0
    digits: tuple[int, ...] = ()

    def __post_init__(self):
        digits = tuple(int(d) for d in self.digits)
        v = int(self.valuation)
        if any(d < 0 for d in digits):
            raise ValidationError("p-adic digits must be non-negative")
        start = 0
        while start < len(digits) and digits[start] == 0:
            start += 1
        end = len(digits)
        while end > start and digits[end - 1] == 0:
            end -= 1
        digits = digits[start:end]
        v = v + start if digits else 0
        object.__setattr__(self, "digits", digits)
        object.__setattr__(self, "valuation", v)

    @classmethod
    def from_int(cls, n: int, p: int) -> "PAdicPoint":
        """Representative of n in Q_p / Z_p: base-p digit c_j goes to position -(j+1).

        With this map the integer anchors of the lattice model and the
        rank >= 0 balls of the field line up: ``from_int(n).to_index(p, K, 0) == n``.
        """
        if n < 0:
            raise ValidationError("integer anchor must be non-negative")
        cs = []
        while n:
            n, c = divmod(n, p)
            cs.append(c)
        if not cs:
            return cls()
        return cls(valuation=-len(cs), digits=tuple(reversed(cs)))

    @classmethod
    def from_index(cls, idx: int, p: int, K: int, r_lo: int) -> "PAdicPoint":
        """Inverse of :meth:`to_index` (the cell representative with zero fine digits)."""
        n_dig = K - r_lo
        ds = []
        for _ in range(n_dig):
            idx, c = divmod(idx, p)
            ds.append(c)
        # ds[0] is the digit at position -r_lo-1, ds[-1] at position -K
        return cls(valuation=-K, digits=tuple(reversed(ds)))

    @property
    def is_zero(self) -> bool:
        return not self.digits

    def digit(self, pos: int) -> int:
        i = pos - self.valuation
        if 0 <= i < len(self.digits):
            return self.digits[i]
        return 0

    @property
    def top(self) -> int:
        """One past the highest occupied position."""
        return self.valuation + len(self.digits)

    def first_difference(self, other: "PAdicPoint") -> int | None:
        if self == other:
            return None
        lo = min(self.valuation if self.digits else other.valuation,
                 other.valuation if other.digits else self.valuation)
        hi = max(self.top, other.top)
        for pos in range(lo, hi):
            if self.digit(pos) != other.digit(pos):
                return pos
        return None  # pragma: no cover - unreachable for normalised points

    def truncate_below(self, pos: int) -> "PAdicPoint":
        """Keep the digits at positions < pos."""
        if not self.digits or pos <= self.valuation:
            return PAdicPoint()
        keep = self.digits[: pos - self.valuation]
        return PAdicPoint(self.valuation, keep)

    def with_digit(self, pos: int, d: int) -> "PAdicPoint":
        lo = min(pos, self.valuation) if self.digits else pos
        hi = max(pos + 1, self.top)
        ds = [self.digit(i) for i in range(lo, hi)]
        ds[pos - lo] = d
        return PAdicPoint(lo, tuple(ds))

    def norm(self, p: int) -> float:
        if not self.digits:
            return 0.0
        return float(p) ** (-self.valuation)

    def to_index(self, p: int, K: int, r_lo: int) -> int:
        """Index of the rank-r_lo cell containing the point inside the rank-K ball about 0.

        Digit at position i (with -K <= i < -r_lo) carries weight p**(-r_lo-1-i),
        so integer division by p**(k-r_lo) identifies the rank-k ball.
        """
        if self.digits and self.valuation < -K:
            raise RangeError("point lies outside the truncation ball")
        idx = 0
        for i in range(-K, -r_lo):
            idx = idx * p + self.digit(i)
        return idx

    def to_dict(self) -> dict:
        return {"valuation": self.valuation, "digits": list(self.digits)}


Point = "int | PAdicPoint"


# ---------------------------------------------------------------------------
# the model


@dataclass(frozen=True)
class HierModel:
    """Homogeneous hierarchical Laplacian on one of the three model spaces."""

    p: int
    alpha: float
    kind: Kind = Kind.DISCRETE_LATTICE
    rank_window: tuple[int, int] | None = None

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not isinstance(self.p, (int, np.integer)) or self.p < 2:
            raise ValidationError("branching number p must be an integer >= 2")
        object.__setattr__(self, "p", int(self.p))
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValidationError("alpha must be a positive finite real")
        object.__setattr__(self, "alpha", float(self.alpha))
        if kind is Kind.DYSON_DYADIC and self.p != 2:
            raise ValidationError("the dyadic Dyson model requires p = 2")
        if kind is Kind.PADIC_FIELD:
            win = self.rank_window or DEFAULT_PADIC_WINDOW
            lo, hi = int(win[0]), int(win[1])
            if lo >= hi:
                raise ValidationError("rank window must be a non-empty interval")
            object.__setattr__(self, "rank_window", (lo, hi))
        else:
            if self.rank_window is not None and tuple(self.rank_window)[0] < 0:
                raise ValidationError("discrete models have ranks k >= 0")
            object.__setattr__(self, "rank_window", (0, LATTICE_RANK_CAP))

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_kappa(cls, p: int, kappa: float, kind=Kind.DISCRETE_LATTICE, **kw) -> "HierModel":
        if not 0 < kappa < 1:
            raise ValidationError("kappa must lie in (0, 1)")
        return cls(p=p, alpha=-math.log(kappa) / math.log(p), kind=kind, **kw)

    @classmethod
    def lattice(cls, p: int, alpha: float) -> "HierModel":
        return cls(p, alpha, Kind.DISCRETE_LATTICE)

    @classmethod
    def padic(cls, p: int, alpha: float, window=None) -> "HierModel":
        return cls(p, alpha, Kind.PADIC_FIELD, window)

    @classmethod
    def dyson(cls, kappa: float) -> "HierModel":
        return cls.from_kappa(2, kappa, Kind.DYSON_DYADIC)

    # -- scalar maps --------------------------------------------------------
    @property
    def kappa(self) -> float:
        return float(self.p) ** (-self.alpha)

    @property
    def lam_scale(self) -> float:
        """c in lambda_k = c * kappa**k."""
        return 1.0 if self.kind is Kind.DYSON_DYADIC else float(self.p) ** self.alpha

    @property
    def is_discrete(self) -> bool:
        return self.kind is not Kind.PADIC_FIELD

    @property
    def first_pole(self) -> int | None:
        """Lowest rank whose eigenvalue belongs to Spec(L) (None: unbounded below)."""
        return None if self.kind is Kind.PADIC_FIELD else 1

    def lam(self, k):
        """Eigenvalue attached to rank k (no range check, numpy-vectorised)."""
        k = np.asarray(k, dtype=float)
        if self.kind is Kind.DYSON_DYADIC:
            out = np.power(self.kappa, k)
        else:
            out = np.power(float(self.p), -self.alpha * (k - 1.0))
        return float(out) if out.ndim == 0 else out

    def measure(self, k):
        k = np.asarray(k, dtype=float)
        out = np.power(float(self.p), k)
        return float(out) if out.ndim == 0 else out

    def coef(self, k):
        """C_k = lambda_k - lambda_{k+1}, written without cancellation."""
        return (1.0 - self.kappa) * self.lam(k)

    def jump(self, k):
        """A_k = 1/m(B_{k-1}) - 1/m(B_k) = (p-1) p**(-k)."""
        k = np.asarray(k, dtype=float)
        out = (self.p - 1.0) * np.power(float(self.p), -k)
        return float(out) if out.ndim == 0 else out

    # -- validation ---------------------------------------------------------
    def check_rank(self, k: int) -> int:
        lo, hi = self.rank_window
        if int(k) != k:
            raise RangeError("rank must be an integer")
        k = int(k)
        if k < lo or k > hi:
            raise RangeError(f"rank {k} outside admissible window [{lo}, {hi}]")
        return k

    def check_point(self, x):
        if self.kind is Kind.PADIC_FIELD:
            if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
                x = PAdicPoint.from_int(int(x), self.p)
            if not isinstance(x, PAdicPoint):
                raise ValidationError("p-adic points must be PAdicPoint instances")
            if any(d >= self.p for d in x.digits):
                raise ValidationError(f"digit out of range for base {self.p}")
            return x
        if isinstance(x, bool) or not isinstance(x, (int, np.integer)) or x < 0:
            raise ValidationError("lattice points are non-negative integers")
        return int(x)

    def meet_rank(self, x, y) -> int:
        """Rank of the minimal ball x ^ y (0 for equal lattice points)."""
        x = self.check_point(x)
        y = self.check_point(y)
        if self.kind is Kind.PADIC_FIELD:
            pos = x.first_difference(y)
            if pos is None:
                return self.rank_window[0]
            return self.check_rank(-pos)
        k = 0
        while x != y:
            x //= self.p
            y //= self.p
            k += 1
        return k

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind.value, "p": self.p, "alpha": self.alpha}
        if self.kind is Kind.PADIC_FIELD:
            d["rank_window"] = list(self.rank_window)
        return d


# ---------------------------------------------------------------------------
# balls


@dataclass(frozen=True)
class BallRef:
    """Ball of a given rank, identified by any anchor point it contains."""

    model: HierModel = field(compare=False, repr=False)
    anchor: Any
    rank: int

    def __post_init__(self):
        object.__setattr__(self, "anchor", self.model.check_point(self.anchor))
        object.__setattr__(self, "rank", self.model.check_rank(self.rank))

    @property
    def key(self):
        if self.model.kind is Kind.PADIC_FIELD:
            return self.anchor.truncate_below(-self.rank)
        return self.anchor // self.model.p ** self.rank

    def __eq__(self, other):
        if not isinstance(other, BallRef):
            return NotImplemented
        return (self.model == other.model and self.rank == other.rank
                and self.key == other.key)

    def __hash__(self):
        return hash((self.model, self.rank, self.key))

    @property
    def measure(self) -> float:
        return self.model.measure(self.rank)

    @property
    def eigenvalue(self) -> float:
        return eigenvalue_lambda(self.model, self.rank)

    def contains(self, x) -> bool:
        x = self.model.check_point(x)
        if self.model.kind is Kind.PADIC_FIELD:
            return x.truncate_below(-self.rank) == self.key
        return x // self.model.p ** self.rank == self.key

    def contains_ball(self, other: "BallRef") -> bool:
        return other.rank <= self.rank and self.contains(other.anchor)

    def disjoint(self, other: "BallRef") -> bool:
        return not (self.contains_ball(other) or other.contains_ball(self))

    def parent(self) -> "BallRef":
        return BallRef(self.model, self.anchor, self.rank + 1)

    def children(self) -> list["BallRef"]:
        m = self.model
        if self.rank - 1 < m.rank_window[0]:
            raise RangeError("ball has no children inside the rank window")
        if m.kind is Kind.PADIC_FIELD:
            base = self.key
            return [BallRef(m, base.with_digit(-self.rank, c), self.rank - 1)
                    for c in range(m.p)]
        base = self.key * m.p ** self.rank
        step = m.p ** (self.rank - 1)
        return [BallRef(m, base + c * step, self.rank - 1) for c in range(m.p)]

    def to_dict(self) -> dict:
        a = self.anchor.to_dict() if isinstance(self.anchor, PAdicPoint) else self.anchor
        return {"rank": self.rank, "anchor": a}


def min_ball(model: HierModel, x, y) -> BallRef:
    """Smallest ball containing x and y.

    For equal lattice points this is the singleton (rank 0). For equal p-adic
    points there is no smallest ball; the lowest ball of the rank window is
    returned.
    """
    return BallRef(model, x, model.meet_rank(x, y))


def eigenvalue_lambda(model: HierModel, rank: int) -> float:
    return model.lam(model.check_rank(rank))


def coefficient_C(model: HierModel, rank: int) -> float:
    return model.coef(model.check_rank(rank))


def intrinsic_distance(model: HierModel, x, y) -> float:
    x = model.check_point(x)
    y = model.check_point(y)
    if x == y:
        return 0.0
    return 1.0 / model.lam(model.meet_rank(x, y))


def spectral_dimension(model: HierModel) -> float:
    return 2.0 * math.log(model.p) / math.log(1.0 / model.kappa)


# ---------------------------------------------------------------------------
# step functions N and V


def _level_rank(model: HierModel, tau: np.ndarray) -> np.ndarray:
    """Largest k with tau <= lambda_k, clamped to the lowest rank of discrete models."""
    tau = np.asarray(tau, dtype=float)
    c = model.lam_scale
    lk = math.log(model.kappa)
    k = np.floor(np.log(tau / c) / lk)
    # exact correction of the logarithmic guess
    for _ in range(3):
        up = model.lam(k + 1) >= tau
        k = np.where(up, k + 1, k)
        down = model.lam(k) < tau
        k = np.where(down, k - 1, k)
    if model.is_discrete:
        k = np.maximum(k, 0)
    return k.astype(np.int64)


def _radius_rank(model: HierModel, r: np.ndarray) -> np.ndarray:
    """Largest k with 1/lambda_k <= r (clamped like :func:`_level_rank`)."""
    r = np.asarray(r, dtype=float)
    c = model.lam_scale
    lk = math.log(model.kappa)
    k = np.floor(np.log(1.0 / (r * c)) / lk)
    for _ in range(3):
        up = 1.0 / model.lam(k + 1) <= r
        k = np.where(up, k + 1, k)
        down = 1.0 / model.lam(k) > r
        k = np.where(down, k - 1, k)
    if model.is_discrete:
        k = np.maximum(k, 0)
    return k.astype(np.int64)


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function of the model with analytic tails.

    ``which == "N"``: spectral function, left-continuous, N = 1/m(B_k) on
    (lambda_{k+1}, lambda_k]. ``which == "V"``: volume function,
    V(r) = m(B_k) on [1/lambda_k, 1/lambda_{k+1}).
    """

    model: HierModel
    which: str

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise ValidationError("step functions are defined on (0, inf)")
        if self.which == "N":
            out = 1.0 / self.model.measure(_level_rank(self.model, x))
        else:
            out = self.model.measure(_radius_rank(self.model, x))
        out = np.asarray(out, dtype=float)
        return float(out) if out.ndim == 0 else out

    def rank_at(self, x):
        f = _level_rank if self.which == "N" else _radius_rank
        out = f(self.model, np.asarray(x, dtype=float))
        return int(out) if np.ndim(out) == 0 else out

    def breakpoints(self, ranks: Iterable[int]) -> tuple[np.ndarray, np.ndarray]:
        """Ascending breakpoints and the level just left of each (N) or from it on (V)."""
        ks = np.array(sorted(ranks), dtype=float)
        if self.which == "N":
            ks = ks[::-1]
            return self.model.lam(ks), 1.0 / self.model.measure(ks)
        return 1.0 / self.model.lam(ks), self.model.measure(ks)

    def jumps(self, ranks: Iterable[int]) -> tuple[np.ndarray, np.ndarray]:
        """Jump locations lambda_k and sizes A_k of N (descending in location)."""
        ks = np.array(sorted(ranks), dtype=float)
        return self.model.lam(ks), self.model.jump(ks)


def spectral_and_volume_functions(model: HierModel) -> tuple[StepFunction, StepFunction]:
    return StepFunction(model, "N"), StepFunction(model, "V")


# ---------------------------------------------------------------------------
# spectrum reports

ORIGINS = ("Xi1", "Xi2", "Xi3", "Xi-", "gap-root", "L-eigenvalue")


@dataclass(frozen=True)
class SpectralPoint:
    value: float
    multiplicity: int | str  # positive int or "infinite"
    support: str  # "compact" | "full"
    origin: str
    gap: int | None = None
    block: int | None = None
    accumulation: bool = False

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValidationError(f"unknown origin tag {self.origin!r}")
        if self.support not in ("compact", "full"):
            raise ValidationError("support class must be 'compact' or 'full'")
        if self.multiplicity != "infinite" and not (
                isinstance(self.multiplicity, int) and self.multiplicity > 0):
            raise ValidationError("multiplicity must be a positive int or 'infinite'")

    def to_dict(self) -> dict:
        d = {"value": self.value, "multiplicity": self.multiplicity,
             "support": self.support, "origin": self.origin}
        for name in ("gap", "block"):
            if getattr(self, name) is not None:
                d[name] = getattr(self, name)
        if self.accumulation:
            d["accumulation"] = True
        return d


@dataclass(frozen=True)
class SpectrumReport:
    points: tuple[SpectralPoint, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def values(self, origin: str | None = None) -> np.ndarray:
        return np.array([q.value for q in self.points
                         if origin is None or q.origin == origin], dtype=float)

    def select(self, origin: str) -> list[SpectralPoint]:
        return [q for q in self.points if q.origin == origin]

    def in_interval(self, lo: float, hi: float) -> list[SpectralPoint]:
        return [q for q in self.points if lo < q.value < hi]

    def to_dict(self) -> dict:
        return {"points": [q.to_dict() for q in self.points], **self.meta}


def spectrum_laplacian(model: HierModel, rank_window: Sequence[int]) -> SpectrumReport:
    """Eigenvalues lambda_k of L for k in the closed window, all of infinite multiplicity."""
    lo, hi = int(rank_window[0]), int(rank_window[1])
    if lo > hi:
        raise ValidationError("empty rank window")
    if model.is_discrete and lo < 1:
        raise RangeError("eigenvalues of discrete models start at rank 1")
    pts = [SpectralPoint(eigenvalue_lambda(model, k), "infinite", "compact",
                         "L-eigenvalue") for k in range(lo, hi + 1)]
    if model.kind is Kind.PADIC_FIELD:
        pts.append(SpectralPoint(0.0, "infinite", "compact", "L-eigenvalue",
                                 accumulation=True))
    return SpectrumReport(tuple(pts), {"s_h": spectral_dimension(model)})


# ---------------------------------------------------------------------------
# configuration

_MODEL_KEYS = {"kind", "p", "alpha", "kappa", "rank_window"}


def model_from_dict(d: dict) -> HierModel:
    if not isinstance(d, dict):
        raise ValidationError("model configuration must be a JSON object")
    extra = set(d) - _MODEL_KEYS
    if extra:
        raise ValidationError(f"unknown model keys: {sorted(extra)}")
    if "kind" not in d:
        raise ValidationError("model configuration needs 'kind'")
    try:
        kind = Kind(d["kind"])
    except ValueError:
        raise ValidationError(f"unknown model kind {d['kind']!r}") from None
    if ("alpha" in d) == ("kappa" in d):
        raise ValidationError("exactly one of 'alpha' and 'kappa' must be given")
    p = d.get("p", 2 if kind is Kind.DYSON_DYADIC else None)
    if p is None:
        raise ValidationError("model configuration needs 'p'")
    if isinstance(p, bool) or not isinstance(p, int):
        raise ValidationError("'p' must be an integer")
    win = d.get("rank_window")
    if win is not None and kind is not Kind.PADIC_FIELD:
        raise ValidationError("'rank_window' applies to padic_field only")
    try:
        if "alpha" in d:
            return HierModel(p, float(d["alpha"]), kind, tuple(win) if win else None)
        return HierModel.from_kappa(p, float(d["kappa"]), kind,
                                    rank_window=tuple(win) if win else None)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(str(exc)) from None


def model_from_json(source: str | Path) -> HierModel:
    """Parse a model from a JSON file path or a JSON text."""
    text = str(source)
    if not text.lstrip().startswith("{"):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read model file: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed model JSON: {exc}") from None
    return model_from_dict(data)


def point_from_json(model: HierModel, value):
    """Points in configs: integers, or {"valuation": v, "digits": [...]} for the field."""
    if isinstance(value, dict):
        if model.kind is not Kind.PADIC_FIELD:
            raise ValidationError("digit-string points require a padic_field model")
        extra = set(value) - {"valuation", "digits"}
        if extra:
            raise ValidationError(f"unknown point keys: {sorted(extra)}")
        return model.check_point(PAdicPoint(int(value.get("valuation", 0)),
                                            tuple(value.get("digits", ()))))
    return model.check_point(value)
