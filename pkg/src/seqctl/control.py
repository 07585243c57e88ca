"""Control sets, running costs and the cost-efficiency ratio eta.

eta(u) = (phi(u) + c) / u^2 is the running cost paid per unit of "information
rate" u^2.  Its infimum M over the control set decides the whole solution:
M > 0 gives a genuine stopping problem, M = 0 a zero value and M < 0 a value
of minus infinity.

General measurable control sets are narrowed to finite unions of points and
intervals, which keeps the infimum computable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, DomainError

GRID_POINTS = 4096
PROBE_TERMS = 60
ZERO_TOL = 1e-12


# -- control sets -----------------------------------------------------------


@dataclass(frozen=True)
class Point:
    u: float

    def __post_init__(self):
        if self.u == 0 or not math.isfinite(self.u):
            raise DomainError(f"control point must be finite and nonzero, got {self.u}")

    def contains(self, u: float) -> bool:
        return u == self.u


@dataclass(frozen=True)
class Interval:
    """Interval with optionally closed ends; infinite ends are always open."""

    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self):
        if math.isinf(self.lo) and self.lo_closed or math.isinf(self.hi) and self.hi_closed:
            raise DomainError("infinite interval ends must be open")
        if not self.lo < self.hi and not (self.lo == self.hi and self.lo_closed and self.hi_closed):
            raise DomainError(f"empty interval ({self.lo}, {self.hi})")
        if self.contains(0.0):
            raise DomainError("0 is not an admissible control")

    def contains(self, u: float) -> bool:
        above = u > self.lo or (self.lo_closed and u == self.lo)
        below = u < self.hi or (self.hi_closed and u == self.hi)
        return above and below

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def __str__(self) -> str:
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo:g}, {self.hi:g}{right}"


Piece = Union[Point, Interval]


def _overlap(a: Piece, b: Piece) -> bool:
    if isinstance(a, Point):
        return b.contains(a.u)
    if isinstance(b, Point):
        return a.contains(b.u)
    if a.hi < b.lo or b.hi < a.lo:
        return False
    if a.hi == b.lo:
        return a.hi_closed and b.lo_closed
    if b.hi == a.lo:
        return b.hi_closed and a.lo_closed
    return True


@dataclass(frozen=True)
class ControlSet:
    """Finite union of disjoint points and intervals excluding 0."""

    pieces: tuple[Piece, ...]

    def __post_init__(self):
        if not self.pieces:
            raise DomainError("control set must be non-empty")
        for i, a in enumerate(self.pieces):
            for b in self.pieces[i + 1 :]:
                if _overlap(a, b):
                    raise DomainError(f"control pieces {a} and {b} overlap")

    @classmethod
    def reals(cls) -> "ControlSet":
        """R without 0."""
        return cls((Interval(-math.inf, 0.0), Interval(0.0, math.inf)))

    @classmethod
    def points(cls, *us: float) -> "ControlSet":
        return cls(tuple(Point(float(u)) for u in us))

    @classmethod
    def interval(cls, lo: float, hi: float, lo_closed: bool = False, hi_closed: bool = False) -> "ControlSet":
        return cls((Interval(float(lo), float(hi), lo_closed, hi_closed),))

    def contains(self, u: float) -> bool:
        return any(p.contains(u) for p in self.pieces)

    @property
    def bounded(self) -> bool:
        return all(isinstance(p, Point) or p.bounded for p in self.pieces)

    @property
    def is_punctured_line(self) -> bool:
        """True when the set covers all of R without 0."""
        ivs = sorted((p for p in self.pieces if isinstance(p, Interval)), key=lambda p: p.lo)
        if len(ivs) != 2:
            return False
        a, b = ivs
        return (a.lo, a.hi, b.lo, b.hi) == (-math.inf, 0.0, 0.0, math.inf)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Random members, spread over every piece (heavy tails on infinite ends)."""
        picks = rng.integers(0, len(self.pieces), size=n)
        out = np.empty(n)
        for k, piece in enumerate(self.pieces):
            idx = np.nonzero(picks == k)[0]
            if idx.size == 0:
                continue
            if isinstance(piece, Point):
                out[idx] = piece.u
                continue
            lo, hi = piece.lo, piece.hi
            w = rng.random(idx.size)
            w = np.clip(w, 1e-12, 1 - 1e-12)
            if piece.bounded:
                vals = lo + (hi - lo) * w
            elif math.isfinite(lo):
                vals = lo + np.exp(rng.uniform(-8, 8, idx.size)) * max(1.0, abs(lo))
            elif math.isfinite(hi):
                vals = hi - np.exp(rng.uniform(-8, 8, idx.size)) * max(1.0, abs(hi))
            else:
                vals = np.tan(np.pi * (w - 0.5))
            out[idx] = vals
        bad = [u for u in out if not self.contains(u)]
        if bad:
            raise AssertionError(f"sampler produced points outside the set: {bad[:3]}")
        return out

    def __str__(self) -> str:
        return " U ".join(f"{{{p.u:g}}}" if isinstance(p, Point) else str(p) for p in self.pieces)


# -- running costs ------------------------------------------------------------


@dataclass(frozen=True)
class Quadratic:
    """phi(u) = a u^2 + b u."""

    a: float
    b: float

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return self.a * u * u + self.b * u


@dataclass(frozen=True)
class Power:
    """phi(u) = coef |u|^exponent."""

    coef: float
    exponent: float

    def __call__(self, u):
        return self.coef * np.abs(np.asarray(u, dtype=float)) ** self.exponent


@dataclass(frozen=True)
class Table:
    """phi given pointwise; only usable with a finite control set."""

    values: tuple[tuple[float, float], ...]

    def __call__(self, u):
        lookup = dict(self.values)
        arr = np.asarray(u, dtype=float)
        try:
            out = np.vectorize(lambda x: lookup[float(x)], otypes=[float])(arr)
        except KeyError as exc:
            raise DomainError(f"no tabulated cost for control {exc.args[0]}") from None
        return float(out) if arr.ndim == 0 else out


@dataclass(frozen=True)
class Custom:
    """Arbitrary cost function; evaluated pointwise unless ``vectorized``."""

    fn: Callable[[float], float]
    vectorized: bool = False

    def __call__(self, u):
        arr = np.asarray(u, dtype=float)
        if self.vectorized:
            return np.asarray(self.fn(arr), dtype=float)
        out = np.array([float(self.fn(float(x))) for x in arr.ravel()]).reshape(arr.shape)
        return float(out) if arr.ndim == 0 else out


Phi = Union[Quadratic, Power, Table, Custom]


@dataclass(frozen=True)
class CostModel:
    phi: Phi
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"time cost c must be positive, got {self.c}")


def eta(cost: CostModel, u):
    """(phi(u) + c) / u^2."""
    arr = np.asarray(u, dtype=float)
    if np.any(arr == 0.0):
        raise DomainError("eta is undefined at u = 0")
    val = (np.asarray(cost.phi(arr), dtype=float) + cost.c) / (arr * arr)
    return float(val) if arr.ndim == 0 else val


# -- infimum search -----------------------------------------------------------


class Regime(enum.Enum):
    POSITIVE = "PositiveM"
    ZERO = "ZeroM"
    NEGATIVE = "NegativeM"


def regime_of(M: float, tol: float = ZERO_TOL) -> Regime:
    if abs(M) <= tol:
        return Regime.ZERO
    return Regime.POSITIVE if M > 0 else Regime.NEGATIVE


@dataclass(frozen=True)
class Approach:
    """Minimising sequence u_n -> anchor along ``anchor + direction * span * 2^-n``
    for a finite anchor, or ``direction * span * 2^n`` towards infinity."""

    anchor: float
    direction: float
    span: float

    def term(self, n: int) -> float:
        if math.isinf(self.anchor):
            return self.direction * self.span * 2.0**n
        return self.anchor + self.direction * self.span * 2.0 ** (-n)


@dataclass(frozen=True)
class Infimum:
    value: float
    argmin: Optional[float]
    attained: bool
    approach: Optional[Approach] = None


@dataclass(frozen=True)
class EtaSolution:
    M: float
    attained: bool
    u_star: Optional[float]
    regime: Regime
    approach: Optional[Approach] = None

    def sequence(self, n_terms: int = PROBE_TERMS) -> list[float]:
        """First terms of a minimising sequence (constant when attained)."""
        if self.attained or self.approach is None:
            return [self.u_star] * n_terms
        return [self.approach.term(n) for n in range(1, n_terms + 1)]

    @property
    def bounded_sequence(self) -> bool:
        """Whether some minimising sequence stays bounded."""
        return self.attained or (self.approach is not None and math.isfinite(self.approach.anchor))


def _evaluate(fn, u: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        vals = np.asarray(fn(u), dtype=float)
    return np.where(np.isnan(vals), np.inf, vals)


def _piece_grid(piece: Interval, n: int) -> np.ndarray:
    lo, hi = piece.lo, piece.hi
    if piece.bounded:
        pts = np.linspace(lo, hi, n + 2)
        keep = np.ones(n + 2, bool)
        keep[0], keep[-1] = piece.lo_closed, piece.hi_closed
        pts = pts[keep]
        # open ends bordering 0 need geometric resolution
        extra = []
        for end, inward in ((lo, 1.0), (hi, -1.0)):
            if end == 0.0:
                extra.append(end + inward * (hi - lo) * np.geomspace(1e-9, 1e-3, 64))
        return np.concatenate([pts, *extra]) if extra else pts
    if math.isfinite(lo):
        scale = max(1.0, abs(lo))
        pts = lo + scale * np.geomspace(1e-9, 1e6, n)
        return np.concatenate([[lo], pts]) if piece.lo_closed else pts
    if math.isfinite(hi):
        scale = max(1.0, abs(hi))
        pts = hi - scale * np.geomspace(1e-9, 1e6, n)
        return np.concatenate([[hi], pts]) if piece.hi_closed else pts
    half = np.geomspace(1e-6, 1e6, n // 2)
    return np.concatenate([-half[::-1], half])


def _probes(piece: Interval) -> list[Approach]:
    out = []
    span = min(piece.hi - piece.lo, 1.0) if piece.bounded else 1.0
    if math.isinf(piece.lo):
        out.append(Approach(-math.inf, -1.0, max(1.0, abs(piece.hi)) if math.isfinite(piece.hi) else 1.0))
    elif not piece.lo_closed:
        out.append(Approach(piece.lo, 1.0, span))
    if math.isinf(piece.hi):
        out.append(Approach(math.inf, 1.0, max(1.0, abs(piece.lo)) if math.isfinite(piece.lo) else 1.0))
    elif not piece.hi_closed:
        out.append(Approach(piece.hi, -1.0, span))
    return out


def _diverges(vals: np.ndarray) -> bool:
    """Tail of a probe sequence heading to -inf rather than to a finite limit."""
    if vals[-1] == -np.inf:
        return True
    d1, d2 = vals[-1] - vals[-2], vals[-2] - vals[-3]
    return bool(d1 < 0 and d2 < 0 and abs(d1) >= 0.9 * abs(d2))


def _refine(fn, lo: float, hi: float, x0: float, f0: float) -> tuple[float, float]:
    if not hi > lo:
        return x0, f0
    xatol = max(1e-12, 1e-15 * max(abs(lo), abs(hi)))
    try:
        res = minimize_scalar(
            lambda x: float(_evaluate(fn, np.array([x]))[0]),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": xatol, "maxiter": 500},
        )
    except (ValueError, FloatingPointError):
        return x0, f0
    if res.fun < f0:
        return float(res.x), float(res.fun)
    return x0, f0


def _interval_infimum(fn, piece: Interval, n: int) -> Infimum:
    grid = _piece_grid(piece, n)
    grid = np.unique(grid[[piece.contains(float(x)) for x in grid]])
    vals = _evaluate(fn, grid)
    i = int(np.argmin(vals))
    lo_n = grid[max(i - 1, 0)]
    hi_n = grid[min(i + 1, grid.size - 1)]
    best_u, best_v = _refine(fn, float(lo_n), float(hi_n), float(grid[i]), float(vals[i]))
    best = Infimum(best_v, best_u, True)

    for approach in _probes(piece):
        terms = np.array([approach.term(k) for k in range(1, PROBE_TERMS + 1)])
        terms = terms[[piece.contains(float(x)) for x in terms]]
        if terms.size < 3:
            continue
        pvals = _evaluate(fn, terms)
        j = int(np.argmin(pvals))
        if pvals[-1] <= pvals[j]:
            limit = -math.inf if _diverges(pvals) else float(pvals[-1])
            if limit < best.value:
                best = Infimum(limit, None, False, approach)
        elif pvals[j] < best.value:
            # interior minimum beyond the grid's reach
            u, v = _refine(fn, float(min(terms[j - 1], terms[j + 1])), float(max(terms[j - 1], terms[j + 1])),
                           float(terms[j]), float(pvals[j])) if j > 0 else (float(terms[j]), float(pvals[j]))
            best = Infimum(v, u, True)
    return best


def infimum(fn, uset: ControlSet, grid_n: int = GRID_POINTS) -> Infimum:
    """Infimum of ``fn`` over a control set, with attainment detection.

    Interval pieces are scanned on a grid and the best cell is refined with a
    bounded scalar minimiser; open or infinite ends are probed along a
    geometric sequence and reported as non-attained limits when they win.
    """
    best: Optional[Infimum] = None
    for piece in uset.pieces:
        if isinstance(piece, Point):
            cand = Infimum(float(_evaluate(fn, np.array([piece.u]))[0]), piece.u, True)
        else:
            cand = _interval_infimum(fn, piece, grid_n)
        if best is None or cand.value < best.value or (cand.value == best.value and cand.attained and not best.attained):
            best = cand
    return best


def _quadratic_eta_closed_form(cost: CostModel) -> Infimum:
    # with v = 1/u, eta = a + b v + c v^2 over v != 0
    a, b, c = cost.phi.a, cost.phi.b, cost.c
    if b == 0:
        return Infimum(a, None, False, Approach(math.inf, 1.0, 1.0))
    return Infimum(a - b * b / (4.0 * c), -2.0 * c / b, True)


def minimize_eta(cost: CostModel, uset: ControlSet, grid_n: int = GRID_POINTS, method: str = "auto") -> EtaSolution:
    """M = inf eta over the control set, its attainment and a minimiser.

    ``method="auto"`` uses the closed form for quadratic costs on R without 0
    and the numerical search otherwise; ``method="numeric"`` always searches.
    """
    if isinstance(cost.phi, Table):
        if not all(isinstance(p, Point) for p in uset.pieces):
            raise ConfigError("tabulated costs require a finite control set")
        missing = [p.u for p in uset.pieces if p.u not in dict(cost.phi.values)]
        if missing:
            raise ConfigError(f"no tabulated cost for controls {missing}")
    if method == "auto" and isinstance(cost.phi, Quadratic) and uset.is_punctured_line:
        inf = _quadratic_eta_closed_form(cost)
    elif method in ("auto", "numeric"):
        inf = infimum(lambda u: eta(cost, u), uset, grid_n)
    else:
        raise ValueError(f"unknown method {method!r}")
    M = inf.value
    if not inf.attained and abs(M) <= ZERO_TOL:
        M = 0.0
    return EtaSolution(
        M=M,
        attained=inf.attained,
        u_star=inf.argmin if inf.attained else None,
        regime=regime_of(inf.value),
        approach=inf.approach,
    )


def gap_infimum(cost: CostModel, uset: ControlSet, kappa: float, grid_n: int = GRID_POINTS) -> float:
    """inf over the control set of phi(u) + c - kappa u^2.

    This is the Hamiltonian term of the variational inequality once the
    second derivative of the value function is known:
    kappa = -V''(pi) (pi (1 - pi))^2 / 2.
    """
    if isinstance(cost.phi, Quadratic) and uset.is_punctured_line:
        a, b, c = cost.phi.a - kappa, cost.phi.b, cost.c
        if a > 0:
            return c - b * b / (4.0 * a) if b != 0 else c
        if a == 0 and b == 0:
            return c
        return -math.inf
    return infimum(lambda u: np.asarray(cost.phi(u), dtype=float) + cost.c - kappa * np.asarray(u) ** 2, uset, grid_n).value


def rescale_problem(cost: CostModel, uset: ControlSet, snr: float) -> tuple[CostModel, ControlSet]:
    """Unit-coefficient problem equivalent to signal drift mu and noise sigma.

    With snr = mu / sigma the observation X = mu theta int u + sigma W maps to
    the unit problem under u_tilde = snr * u and phi_tilde(v) = phi(v / snr).
    """
    if snr == 0 or not math.isfinite(snr):
        raise DomainError("signal-to-noise ratio must be finite and nonzero")
    phi = cost.phi
    new_phi = Custom(lambda v: phi(np.asarray(v) / snr), vectorized=not isinstance(phi, Custom))

    def scale(piece: Piece) -> Piece:
        if isinstance(piece, Point):
            return Point(piece.u * snr)
        lo, hi = piece.lo * snr, piece.hi * snr
        if snr > 0:
            return Interval(lo, hi, piece.lo_closed, piece.hi_closed)
        return Interval(hi, lo, piece.hi_closed, piece.lo_closed)

    return CostModel(new_phi, cost.c), ControlSet(tuple(scale(p) for p in uset.pieces))
