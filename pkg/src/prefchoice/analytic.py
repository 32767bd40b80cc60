"""Closed-form objects of the location-choice attachment model.

Everything here is a pure function of a choice vector and the bias alpha:
the rank-choice density on the location space, the critical bias where
condensation becomes possible, the limiting attachment-weight profile psi,
the interval selection kernels bounding the attachment event, the limiting
local degree distribution and its integrated tail, and the saddle-point
approximation of that tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import comb

import numpy as np
from scipy.special import gammaln

from . import constants
from .errors import DomainError, PhaseError, ShapeError

__all__ = [
    "ChoiceVector",
    "Phase",
    "AnalyticModel",
    "PsiSolution",
    "build_model",
    "choice_density",
    "density_slope",
    "density_curvature",
    "density_integral",
    "psi_drift",
    "psi_drift_slope",
    "critical_alpha",
    "classify_phase",
    "solve_psi",
    "psi_curve",
    "psi_inverse_slope",
    "kernel_upper",
    "kernel_lower",
    "limit_proportion_bound",
    "degree_cdf",
    "degree_tail",
    "tail_mass",
    "tail_mass_curve",
    "tail_exponent",
    "saddle_point_tail_mass",
]


@dataclass(frozen=True)
class ChoiceVector:
    """Probability vector over the location ranks of an r-candidate sample."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) < 2:
            raise ValueError("need at least two candidate ranks")
        if any(p < 0.0 for p in probs):
            raise ValueError("rank probabilities must be nonnegative")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError("rank probabilities must sum to 1 within 1e-12")

    @property
    def r(self) -> int:
        return len(self.probs)

    @classmethod
    def uniform(cls, r: int) -> "ChoiceVector":
        return cls((1.0 / r,) * r)

    def cumulative(self) -> tuple[float, ...]:
        out = []
        acc = 0.0
        for p in self.probs:
            acc += p
            out.append(acc)
        out[-1] = 1.0
        return tuple(out)


class Phase(Enum):
    CONDENSATION = "condensation"
    CRITICAL = "critical"
    NO_CONDENSATION = "no_condensation"


@dataclass(frozen=True)
class PsiSolution:
    """Root of the drift balance at one location."""

    x: float
    psi: float
    residual: float


@dataclass(frozen=True)
class AnalyticModel:
    """Choice vector plus bias with the derived closed-form quantities.

    ``f_coeffs[j]`` is the coefficient of ``x**j`` of the rank-choice
    density; ``maximizers`` lists the locations where the density attains
    its global maximum (a constant density reports the interval endpoints).
    """

    choice: ChoiceVector
    alpha: float
    f_coeffs: tuple[float, ...]
    alpha_c: float
    f_max: float
    maximizers: tuple[float, ...]
    _exact_coeffs: tuple[Fraction, ...] = field(repr=False, default=())

    @property
    def phase(self) -> Phase:
        return classify_phase(self.choice, self.alpha, alpha_c=self.alpha_c)


# ---------------------------------------------------------------------------
# the rank-choice density f and its derivatives
# ---------------------------------------------------------------------------

def _density_terms(choice: ChoiceVector):
    """(weight, s) pairs with weight = s * Xi_s * C(r, s), skipping zeros."""
    r = choice.r
    return [
        (s * choice.probs[s - 1] * comb(r, s), s)
        for s in range(1, r + 1)
        if choice.probs[s - 1] != 0.0
    ]


def _density(choice: ChoiceVector, x):
    """Density evaluated in the stable product form; 0**0 == 1 throughout."""
    x = np.asarray(x, dtype=float)
    r = choice.r
    out = np.zeros_like(x)
    for w, s in _density_terms(choice):
        out = out + w * x ** (s - 1) * (1.0 - x) ** (r - s)
    return out


def _density_slope(choice: ChoiceVector, x):
    x = np.asarray(x, dtype=float)
    r = choice.r
    out = np.zeros_like(x)
    for w, s in _density_terms(choice):
        if s >= 2:
            out = out + w * (s - 1) * x ** (s - 2) * (1.0 - x) ** (r - s)
        if r - s >= 1:
            out = out - w * (r - s) * x ** (s - 1) * (1.0 - x) ** (r - s - 1)
    return out


def _density_curvature(choice: ChoiceVector, x):
    x = np.asarray(x, dtype=float)
    r = choice.r
    out = np.zeros_like(x)
    for w, s in _density_terms(choice):
        if s >= 3:
            out = out + w * (s - 1) * (s - 2) * x ** (s - 3) * (1.0 - x) ** (r - s)
        if s >= 2 and r - s >= 1:
            out = out - 2.0 * w * (s - 1) * (r - s) * x ** (s - 2) * (1.0 - x) ** (r - s - 1)
        if r - s >= 2:
            out = out + w * (r - s) * (r - s - 1) * x ** (s - 1) * (1.0 - x) ** (r - s - 2)
    return out


def _scalar(values):
    arr = np.asarray(values)
    return float(arr) if arr.ndim == 0 else arr


def choice_density(model: AnalyticModel, x):
    """Density of attaching to location x; integrates to one over [0, 1]."""
    return _scalar(_density(model.choice, x))


def density_slope(model: AnalyticModel, x):
    return _scalar(_density_slope(model.choice, x))


def density_curvature(model: AnalyticModel, x):
    return _scalar(_density_curvature(model.choice, x))


def _exact_monomial_coeffs(choice: ChoiceVector) -> tuple[Fraction, ...]:
    """Monomial coefficients of the density as exact rationals.

    The rank probabilities enter as exact binary rationals (every float is
    one), so the antiderivative of these coefficients is free of rounding.
    """
    r = choice.r
    coeffs = [Fraction(0)] * r
    for s in range(1, r + 1):
        p = choice.probs[s - 1]
        if p == 0.0:
            continue
        pref = Fraction(p) * (s * comb(r, s))
        for m in range(r - s + 1):
            coeffs[s - 1 + m] += pref * comb(r - s, m) * (-1) ** m
    return tuple(coeffs)


def density_integral(model: AnalyticModel) -> float:
    """Integral of the density over [0, 1] via the exact antiderivative."""
    coeffs = model._exact_coeffs or _exact_monomial_coeffs(model.choice)
    return float(sum(c / (j + 1) for j, c in enumerate(coeffs)))


# ---------------------------------------------------------------------------
# critical bias and phase classification
# ---------------------------------------------------------------------------

def _refine_slope_root(choice: ChoiceVector, lo: float, hi: float,
                       slo: float) -> float:
    """Bisect a sign change of the density slope down to interval 1e-12."""
    while hi - lo > constants.BISECTION_TOLERANCE:
        mid = 0.5 * (lo + hi)
        sm = float(_density_slope(choice, mid))
        if sm == 0.0:
            return mid
        if (sm > 0.0) == (slo > 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def critical_alpha(choice: ChoiceVector,
                   grid_points: int = constants.CRITICAL_GRID_POINTS):
    """Critical bias and the global maximizers of the density.

    The slope is sampled on a uniform grid, each sign change is refined by
    bisection, and the surviving candidates are compared against the
    endpoints.  A constant density (uniform choice vector) attains its
    maximum everywhere; the endpoints stand in for the whole interval.
    """
    xs = np.linspace(0.0, 1.0, grid_points)
    slopes = _density_slope(choice, xs)
    candidates = [0.0, 1.0]
    if np.max(np.abs(slopes)) > 1e-11:
        for i in range(grid_points - 1):
            a, b = slopes[i], slopes[i + 1]
            if a == 0.0:
                candidates.append(float(xs[i]))
            elif a * b < 0.0:
                candidates.append(
                    _refine_slope_root(choice, float(xs[i]), float(xs[i + 1]), float(a)))
        if slopes[-1] == 0.0:
            candidates.append(1.0)
    values = [float(_density(choice, c)) for c in candidates]
    f_max = max(values)
    tol = constants.MAXIMIZER_VALUE_TOLERANCE * max(1.0, abs(f_max))
    maximizers = sorted(c for c, v in zip(candidates, values) if v >= f_max - tol)
    deduped = []
    for c in maximizers:
        if not deduped or c - deduped[-1] > 1e-9:
            deduped.append(c)
    return f_max - 2.0, tuple(deduped)


def classify_phase(choice: ChoiceVector, alpha: float, *,
                   alpha_c: float | None = None,
                   tol: float = constants.PHASE_TOLERANCE) -> Phase:
    if alpha <= -1.0:
        raise DomainError("alpha must exceed -1")
    if alpha_c is None:
        alpha_c, _ = critical_alpha(choice)
    if alpha > alpha_c + tol:
        return Phase.NO_CONDENSATION
    if abs(alpha - alpha_c) <= tol:
        return Phase.CRITICAL
    return Phase.CONDENSATION


def build_model(choice: ChoiceVector, alpha: float,
                grid_points: int = constants.CRITICAL_GRID_POINTS) -> AnalyticModel:
    if alpha <= -1.0:
        raise DomainError("alpha must exceed -1")
    exact = _exact_monomial_coeffs(choice)
    alpha_c, maximizers = critical_alpha(choice, grid_points)
    return AnalyticModel(
        choice=choice,
        alpha=float(alpha),
        f_coeffs=tuple(float(c) for c in exact),
        alpha_c=alpha_c,
        f_max=alpha_c + 2.0,
        maximizers=maximizers,
        _exact_coeffs=exact,
    )


# ---------------------------------------------------------------------------
# the drift balance F1 and its root psi
# ---------------------------------------------------------------------------

def psi_drift(model: AnalyticModel, y, x):
    """Mean-field drift of the weight profile at value y and location x.

    x(a+1) - (2+a)y + sum_i C(r,i) y^i (1-y)^(r-i) XiCum_i, where XiCum_i
    accumulates the rank probabilities up to i (the double rank sum grouped
    by i).  Nonincreasing in y whenever alpha >= alpha_c.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    r = model.choice.r
    cum = model.choice.cumulative()
    tail = np.zeros_like(y * x)
    for i in range(1, r + 1):
        if cum[i - 1] == 0.0:
            continue
        tail = tail + cum[i - 1] * comb(r, i) * y ** i * (1.0 - y) ** (r - i)
    return _scalar(x * (model.alpha + 1.0) - (2.0 + model.alpha) * y + tail)


def psi_drift_slope(model: AnalyticModel, y):
    """d/dy of the drift: density minus (2 + alpha)."""
    return _scalar(_density(model.choice, y) - (2.0 + model.alpha))


def _require_solvable_phase(model: AnalyticModel, what: str, *, strict: bool):
    phase = model.phase
    if phase is Phase.CONDENSATION or (strict and phase is Phase.CRITICAL):
        raise PhaseError(
            f"{what} needs alpha {'>' if strict else '>='} alpha_c "
            f"(alpha={model.alpha}, alpha_c={model.alpha_c}, phase={phase.value})")


def psi_curve(model: AnalyticModel, xs) -> np.ndarray:
    """Vectorized psi over an array of locations (bisection on all at once)."""
    _require_solvable_phase(model, "psi solve", strict=False)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any((xs < 0.0) | (xs > 1.0)):
        raise DomainError("locations must lie in [0, 1]")
    lo = np.zeros_like(xs)
    hi = np.ones_like(xs)
    for _ in range(45):
        mid = 0.5 * (lo + hi)
        pos = np.asarray(psi_drift(model, mid, xs)) > 0.0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    y = 0.5 * (lo + hi)
    # the boundary roots are exact
    y = np.where(xs == 0.0, 0.0, y)
    y = np.where(xs == 1.0, 1.0, y)
    return y


def solve_psi(model: AnalyticModel, x: float) -> PsiSolution:
    """Unique root of the drift balance at location x.

    Bisection on [0, 1]; the drift is nonincreasing in y outside the
    condensation phase, where this solver refuses to guess between roots.
    """
    y = float(psi_curve(model, x)[0])
    residual = abs(float(psi_drift(model, y, x)))
    return PsiSolution(x=float(x), psi=y, residual=residual)


def psi_inverse_slope(model: AnalyticModel, y) -> float:
    """Derivative of the location as a function of the psi value."""
    return _scalar((2.0 + model.alpha - _density(model.choice, y)) / (model.alpha + 1.0))


# ---------------------------------------------------------------------------
# interval selection kernels
# ---------------------------------------------------------------------------

def _check_interval(y1: float, y2: float):
    if not (0.0 <= y1 <= y2 <= 1.0):
        raise DomainError("need 0 <= y1 <= y2 <= 1")


def kernel_upper(choice: ChoiceVector, y1: float, y2: float) -> float:
    """Upper selection kernel over the weight interval (y1, y2].

    Bounds the probability that the chosen candidate carries weight rank
    inside the interval, ignoring the ordering of candidates within it.
    Converges to the density as y2 drops to y1.  0**0 == 1 throughout.
    """
    _check_interval(y1, y2)
    r = choice.r
    d = y2 - y1
    c = 1.0 - y2
    total = 0.0
    for s in range(1, r + 1):
        p = choice.probs[s - 1]
        if p == 0.0:
            continue
        inner = 0.0
        for j in range(s):
            for i in range(s, r + 1):
                inner += comb(r, i) * comb(i, j) * y1 ** j * d ** (i - j - 1) * c ** (r - i)
        total += p * inner
    return total


def kernel_lower(choice: ChoiceVector, y1: float, y2: float,
                 corrected: bool = True) -> float:
    """Lower selection kernel: exactly one candidate inside the interval.

    ``corrected=True`` multiplies the rank-s term by s, which is the form
    whose shrinking-interval limit equals the density; ``corrected=False``
    keeps the uncorrected term (retained for comparison, its limit is
    smaller than the density whenever the choice vector is non-degenerate).
    """
    _check_interval(y1, y2)
    r = choice.r
    total = 0.0
    for s in range(1, r + 1):
        p = choice.probs[s - 1]
        if p == 0.0:
            continue
        factor = s if corrected else 1
        total += p * factor * comb(r, s) * y1 ** (s - 1) * (1.0 - y2) ** (r - s)
    return total


# ---------------------------------------------------------------------------
# limiting degree distribution
# ---------------------------------------------------------------------------

def _gamma_ratio_log(a: float, b: float) -> float:
    """log(Gamma(a) / Gamma(b)) without overflow."""
    return float(gammaln(a) - gammaln(b))


def _shape_ratio(alpha: float, k: float, c: float) -> float:
    """Gamma(a1+c)Gamma(a1+k) / (Gamma(a1)Gamma(a1+k+c)) with a1 = alpha+1."""
    a1 = alpha + 1.0
    return math.exp(
        _gamma_ratio_log(a1 + c, a1) + _gamma_ratio_log(a1 + k, a1 + k + c))


def limit_proportion_bound(model: AnalyticModel, k: int, x1: float, x2: float,
                           side: str) -> float:
    """Limiting bound on the share of vertices with degree <= k in [x1, x2].

    ``side='lower'`` uses the upper selection kernel (faster degree churn,
    fewer small-degree vertices survive) and ``side='upper'`` the corrected
    lower kernel, so lower <= upper pointwise.  A vanishing kernel
    degenerates the bound to the bare interval length.
    """
    if x1 >= x2:
        raise DomainError("need x1 < x2")
    if not (0.0 <= x1 and x2 <= 1.0):
        raise DomainError("interval must lie inside [0, 1]")
    if k < 0:
        raise DomainError("k must be nonnegative")
    if side not in ("lower", "upper"):
        raise ValueError("side must be 'lower' or 'upper'")
    _require_solvable_phase(model, "limiting proportion bound", strict=True)
    y1 = solve_psi(model, x1).psi
    y2 = solve_psi(model, x2).psi
    if side == "lower":
        kernel = kernel_upper(model.choice, y1, y2)
    else:
        kernel = kernel_lower(model.choice, y1, y2, corrected=True)
    width = x2 - x1
    if kernel == 0.0:
        return width
    c = (2.0 + model.alpha) / kernel
    return width * (1.0 - _shape_ratio(model.alpha, k, c))


def _tail_shape(model: AnalyticModel, x) -> np.ndarray:
    """Exponent c(x) = (2+alpha) / f(psi(x)) of the local degree tail."""
    y = psi_curve(model, x)
    fy = _density(model.choice, y)
    if np.any(fy == 0.0):
        raise DomainError(
            "density vanishes at psi(x); local degree mass degenerates there")
    return (2.0 + model.alpha) / fy


def degree_cdf(model: AnalyticModel, k: int, x: float) -> float:
    """Limiting probability that a vertex at location x has degree <= k."""
    _require_solvable_phase(model, "local degree distribution", strict=True)
    if not (0.0 < x < 1.0):
        raise DomainError("location must lie in (0, 1)")
    if k < 0:
        raise DomainError("k must be nonnegative")
    c = float(_tail_shape(model, x)[0])
    return 1.0 - _shape_ratio(model.alpha, k, c)


def degree_tail(model: AnalyticModel, k: int, x: float) -> float:
    """Limiting probability that a vertex at location x has degree >= k."""
    if k < 1:
        raise DomainError("k must be at least 1")
    return 1.0 - degree_cdf(model, k - 1, x)


def _simpson_nodes(panels: int):
    if panels < 64 or panels % 2:
        raise DomainError("panels must be an even number >= 64")
    h = 1.0 / panels
    nodes = np.linspace(0.0, 1.0, panels + 1)
    # endpoint limits taken one half-panel in: the integrand extends
    # continuously to the endpoints where the density may vanish
    nodes[0] = 0.5 * h
    nodes[-1] = 1.0 - 0.5 * h
    weights = np.full(panels + 1, 2.0)
    weights[1::2] = 4.0
    weights[0] = weights[-1] = 1.0
    weights *= h / 3.0
    return nodes, weights


def tail_mass_curve(model: AnalyticModel, ks,
                    panels: int = constants.DEFAULT_PANELS) -> np.ndarray:
    """Integrated degree-tail mass for several k sharing one psi grid."""
    _require_solvable_phase(model, "integrated tail mass", strict=True)
    nodes, weights = _simpson_nodes(panels)
    c = _tail_shape(model, nodes)
    a1 = model.alpha + 1.0
    out = np.empty(len(ks))
    base = gammaln(a1 + c) - gammaln(a1)
    for i, k in enumerate(ks):
        if k < 1:
            raise DomainError("k must be at least 1")
        tail = np.exp(base + gammaln(a1 + k - 1) - gammaln(a1 + k - 1 + c))
        out[i] = float(np.dot(weights, tail))
    return out


def tail_mass(model: AnalyticModel, k: int,
              panels: int = constants.DEFAULT_PANELS) -> float:
    """Asymptotic fraction of vertices with degree >= k (Simpson quadrature)."""
    return float(tail_mass_curve(model, [k], panels)[0])


def tail_exponent(choice: ChoiceVector, alpha: float) -> float:
    """Power-law exponent (2 + alpha) / (2 + alpha_c) of the tail mass."""
    alpha_c, _ = critical_alpha(choice)
    if classify_phase(choice, alpha, alpha_c=alpha_c) is Phase.CONDENSATION:
        raise PhaseError(
            f"tail exponent undefined below alpha_c ({alpha} < {alpha_c})")
    return (2.0 + alpha) / (2.0 + alpha_c)


def saddle_point_tail_mass(model: AnalyticModel, k: int) -> float:
    """Leading-order tail mass from the Laplace method at the density peak.

    Valid only for a unique interior global maximizer with strictly
    negative curvature; the constant combines the inverse-psi slope, the
    Gamma prefactor at the peak, and the curvature of (2+alpha)/f there.
    """
    _require_solvable_phase(model, "saddle-point tail mass", strict=True)
    if len(model.maximizers) != 1:
        raise ShapeError(
            f"density has {len(model.maximizers)} global maximizers; "
            "single-peak approximation invalid")
    x0 = model.maximizers[0]
    if not (1e-9 < x0 < 1.0 - 1e-9):
        raise ShapeError(f"maximizer {x0} lies on the boundary; "
                         "single-peak approximation invalid")
    fpp = float(_density_curvature(model.choice, x0))
    if fpp >= 0.0:
        raise ShapeError("density peak has nonnegative curvature; "
                         "single-peak approximation invalid")
    if k + model.alpha <= 1.0:
        raise DomainError("k + alpha must exceed 1")
    a1 = model.alpha + 1.0
    f_max = model.f_max
    tau = (2.0 + model.alpha) / f_max
    curvature = -(2.0 + model.alpha) * fpp / f_max ** 2
    g0 = math.exp(_gamma_ratio_log(a1 + (2.0 + model.alpha) / f_max, a1))
    c0 = psi_inverse_slope(model, x0) * g0 / math.sqrt(curvature)
    log_k = math.log(k + model.alpha)
    return c0 * math.sqrt(2.0 * math.pi / log_k) * math.exp(-tau * log_k)
