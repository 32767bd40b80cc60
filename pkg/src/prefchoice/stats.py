"""Empirical measurement on growth snapshots and comparison against theory."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import constants
from .analytic import AnalyticModel, kernel_lower, kernel_upper
from .errors import DomainError, RangeError

__all__ = [
    "SnapshotStats",
    "LocalDegreeGrid",
    "PowerLawFit",
    "SaeDiagnostic",
    "psi_empirical",
    "proportion_below",
    "local_degree_grid",
    "degree_ccdf",
    "fit_power_law",
    "default_fit_k_max",
    "condensation_diagnostic",
    "sae_diagnostic",
]


@dataclass(frozen=True)
class SnapshotStats:
    """Frozen measurements of one tree state, sorted by location.

    ``weight_cumsum[i]`` accumulates degree + alpha over the first i + 1
    locations, which makes the empirical weight profile a binary search.
    """

    n: int
    n0: int
    alpha: float
    locations: np.ndarray
    degrees: np.ndarray
    weight_cumsum: np.ndarray
    degree_hist: np.ndarray
    max_degree: int

    @property
    def vertex_count(self) -> int:
        return self.n + self.n0

    @property
    def total_weight(self) -> float:
        return (self.vertex_count - 1) * (2.0 + self.alpha) + self.alpha


def psi_empirical(snap: SnapshotStats, x):
    """Empirical attachment-weight share of locations at most x."""
    x = np.asarray(x, dtype=float)
    idx = np.searchsorted(snap.locations, x, side="right")
    cum = np.concatenate(([0.0], snap.weight_cumsum))
    out = cum[idx] / snap.total_weight
    return float(out) if out.ndim == 0 else out


def proportion_below(snap: SnapshotStats, k: int, x1: float, x2: float) -> float:
    """Share of all vertices with degree <= k and location in [x1, x2]."""
    if x1 >= x2:
        raise DomainError("need x1 < x2")
    if k < 0:
        return 0.0
    i1 = np.searchsorted(snap.locations, x1, side="left")
    i2 = np.searchsorted(snap.locations, x2, side="right")
    inside = int(np.count_nonzero(snap.degrees[i1:i2] <= k))
    return inside / snap.vertex_count


@dataclass(frozen=True)
class LocalDegreeGrid:
    """Conditional degree CDF per location bin.

    ``fractions[b, j]`` is the share of bin-b vertices with degree at most
    ``k_list[j]``; empty bins carry NaN there (flagged, never imputed).
    """

    bin_edges: np.ndarray
    centers: np.ndarray
    counts: np.ndarray
    k_list: tuple[int, ...]
    cum_counts: np.ndarray
    fractions: np.ndarray


def local_degree_grid(snap: SnapshotStats, bins: int,
                      k_list: Sequence[int]) -> LocalDegreeGrid:
    if bins < 1:
        raise DomainError("need at least one bin")
    k_list = tuple(int(k) for k in k_list)
    if any(k < 0 for k in k_list):
        raise DomainError("degree thresholds must be nonnegative")
    bin_idx = np.minimum((snap.locations * bins).astype(np.int64), bins - 1)
    counts = np.bincount(bin_idx, minlength=bins)
    kmax = max(k_list)
    capped = np.minimum(snap.degrees, kmax + 1)
    table = np.zeros((bins, kmax + 2), dtype=np.int64)
    np.add.at(table, (bin_idx, capped), 1)
    running = np.cumsum(table, axis=1)
    cum_counts = running[:, list(k_list)]
    with np.errstate(invalid="ignore"):
        fractions = cum_counts / counts[:, None]
    fractions[counts == 0, :] = np.nan
    edges = np.linspace(0.0, 1.0, bins + 1)
    return LocalDegreeGrid(
        bin_edges=edges,
        centers=0.5 * (edges[:-1] + edges[1:]),
        counts=counts,
        k_list=k_list,
        cum_counts=cum_counts,
        fractions=fractions,
    )


def degree_ccdf(snap: SnapshotStats):
    """(k, share of vertices with degree >= k, that count) for k = 1..max."""
    hist = snap.degree_hist
    counts_ge = np.cumsum(hist[::-1])[::-1]
    ks = np.arange(1, len(hist))
    counts = counts_ge[1:]
    return ks, counts / snap.vertex_count, counts


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares exponent of the log-corrected tail model.

    Model: mass(k) = amplitude * sqrt(2 pi / log(k + alpha)) * (k + alpha)**(-tau).
    """

    tau_hat: float
    amplitude: float
    k_min: int
    k_max: int
    residual_rms: float
    n_points: int


def default_fit_k_max(ks: np.ndarray, counts: np.ndarray) -> int:
    """Largest k whose tail still holds FIT_MIN_TAIL_COUNT vertices."""
    usable = ks[counts >= constants.FIT_MIN_TAIL_COUNT]
    if len(usable) == 0:
        raise RangeError("no degree threshold retains enough tail vertices")
    return int(usable.max())


def fit_power_law(ks, values, alpha: float,
                  k_min: int = constants.DEFAULT_FIT_K_MIN,
                  k_max: int | None = None) -> PowerLawFit:
    """Fit the tail exponent with the logarithmic correction term.

    Regresses log(value) + log(log(k + alpha)) / 2 on -tau log(k + alpha)
    plus a constant over k_min <= k <= k_max, using only strictly positive
    values (and k + alpha > 1 so the correction is defined).
    """
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    if k_max is None:
        k_max = int(ks.max()) if len(ks) else 0
    keep = (ks >= k_min) & (ks <= k_max) & (values > 0.0) & (ks + alpha > 1.0)
    if int(keep.sum()) < constants.MIN_FIT_POINTS:
        raise RangeError(
            f"need at least {constants.MIN_FIT_POINTS} usable points in "
            f"[{k_min}, {k_max}], found {int(keep.sum())}")
    x = np.log(ks[keep] + alpha)
    y = np.log(values[keep]) + 0.5 * np.log(x)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return PowerLawFit(
        tau_hat=float(-slope),
        amplitude=float(np.exp(intercept) / np.sqrt(2.0 * np.pi)),
        k_min=int(k_min),
        k_max=int(k_max),
        residual_rms=float(np.sqrt(np.mean(resid ** 2))),
        n_points=int(keep.sum()),
    )


def condensation_diagnostic(snapshots: Sequence[SnapshotStats]) -> np.ndarray:
    """Max degree as a share of the vertex count, per snapshot.

    Heuristic only: the series trends to zero without condensation and to
    a positive level with it.
    """
    if len(snapshots) < 1:
        raise DomainError("need at least one snapshot")
    return np.array([s.max_degree / s.vertex_count for s in snapshots])


class SaeDiagnostic(NamedTuple):
    a_upper_kernel: float   # drives the lower proportion bound
    k_upper_kernel: float
    a_lower_kernel: float   # corrected lower kernel, upper proportion bound
    k_lower_kernel: float


def sae_diagnostic(snap: SnapshotStats, model: AnalyticModel, k: int,
                   x1: float, x2: float) -> SaeDiagnostic:
    """Stochastic-approximation drive and damping terms from one snapshot.

    For each selection kernel: A = ((k + alpha) / (2 + alpha)) * kernel *
    P(k - 1) + (x2 - x1) and K = 1 + ((k + alpha) / (2 + alpha)) * kernel,
    evaluated with the empirical weight profile.  Late snapshots should
    bracket the observed proportion by A/K on either side.
    """
    if x1 >= x2:
        raise DomainError("need x1 < x2")
    alpha = model.alpha
    psi1 = float(psi_empirical(snap, x1))
    psi2 = float(psi_empirical(snap, x2))
    p_prev = proportion_below(snap, k - 1, x1, x2)
    scale = (k + alpha) / (2.0 + alpha)
    width = x2 - x1
    f_up = kernel_upper(model.choice, psi1, psi2)
    f_lo = kernel_lower(model.choice, psi1, psi2, corrected=True)
    return SaeDiagnostic(
        a_upper_kernel=scale * f_up * p_prev + width,
        k_upper_kernel=1.0 + scale * f_up,
        a_lower_kernel=scale * f_lo * p_prev + width,
        k_lower_kernel=1.0 + scale * f_lo,
    )
