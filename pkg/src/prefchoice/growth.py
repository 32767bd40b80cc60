"""Sequential growth of the random tree with degree-biased candidate choice.

Each step samples r candidate vertices with replacement, weight degree
plus alpha, orders them by location, picks a rank from the choice vector,
and attaches a fresh uniformly-located vertex to the picked candidate.

The weight index is a two-level prefix-sum structure: a Fenwick tree over
block sums on top of a contiguous per-vertex array holding interleaved
(weight, location) pairs, so one lookup touches one tree path plus one
short contiguous scan; updates and lookups are O(log V).  Weights are held
as floating reals, so the index total is checked against the closed-form
total after every step and the whole index is rebuilt from the degrees
(recovered by rounding weight - alpha) when the drift tolerance is
exceeded.
"""

from __future__ import annotations

import ctypes
import math
import random
import sys
from array import array
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import constants
from .analytic import ChoiceVector
from .errors import DomainError, SizeError
from .stats import SnapshotStats

__all__ = [
    "BLOCK",
    "ModelParams",
    "GrowthState",
    "init",
    "sample_candidate",
    "grow_step",
    "run_steps",
    "run",
    "snapshot",
    "exact_attachment_distribution",
    "attachment_frequencies",
]

BLOCK = 64  # vertices per index block; scans stay inside a few cache lines

INITIAL_TREES = ("random_recursive", "path")

_MADV_HUGEPAGE = 14
_PAGE = 4096


def _advise_hugepages(buf: array) -> None:
    """Back a large buffer with huge pages where the kernel allows it.

    Purely a TLB optimization for multi-megabyte runs; any failure is
    ignored.
    """
    if not sys.platform.startswith("linux"):
        return
    try:
        addr, count = buf.buffer_info()
        nbytes = count * buf.itemsize
        if nbytes < 1 << 22:
            return
        start = addr & ~(_PAGE - 1)
        libc = ctypes.CDLL(None, use_errno=True)
        libc.madvise(ctypes.c_void_p(start),
                     ctypes.c_size_t(nbytes + (addr - start)),
                     ctypes.c_int(_MADV_HUGEPAGE))
    except Exception:
        pass


@dataclass(frozen=True)
class ModelParams:
    """One full experiment configuration."""

    choice: ChoiceVector
    alpha: float
    n0: int
    steps: int
    seed: int
    initial_tree: str = "random_recursive"

    def __post_init__(self):
        if self.alpha <= -1.0:
            raise DomainError("alpha must exceed -1")
        if self.n0 < 2:
            raise DomainError("initial tree needs at least two vertices")
        if self.steps < 0:
            raise DomainError("step count must be nonnegative")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must fit in 64 bits")
        if self.initial_tree not in INITIAL_TREES:
            raise DomainError(f"initial_tree must be one of {INITIAL_TREES}")


@dataclass
class GrowthState:
    """Mutable state of one growing tree (single-owner, stepped sequentially).

    ``_hot[2i]`` is vertex i's sampling weight (degree + alpha) and
    ``_hot[2i + 1]`` its location; keeping both in one contiguous array lets
    a candidate lookup resolve weight and location in a single pass.
    """

    params: ModelParams
    rng: random.Random
    n: int = 0                # growth steps elapsed
    rebuilds: int = 0         # weight-index rebuilds forced by drift
    _hot: array = field(default_factory=lambda: array("d"))
    _parents: array = field(default_factory=lambda: array("q"))
    _tree: array = field(default_factory=lambda: array("d"))
    _active: int = 1          # current top power-of-two of the block tree
    _cap: int = 0             # preallocated vertex capacity of _hot/_parents

    @property
    def vertex_count(self) -> int:
        return self.n + self.params.n0

    @property
    def edge_count(self) -> int:
        return self.vertex_count - 1

    def total_weight(self) -> float:
        """Closed-form total weight: (V - 1)(2 + alpha) + alpha."""
        return (self.vertex_count - 1) * (2.0 + self.params.alpha) + self.params.alpha

    def index_total(self) -> float:
        """Total weight as accumulated inside the prefix-sum index."""
        tree = self._tree
        total = 0.0
        j = (self.vertex_count + BLOCK - 1) // BLOCK
        while j:
            total += tree[j]
            j &= j - 1
        return total

    @property
    def weights(self) -> np.ndarray:
        nv = self.vertex_count
        return np.frombuffer(self._hot, dtype=np.float64)[:2 * nv:2].copy()

    @property
    def locations(self) -> np.ndarray:
        nv = self.vertex_count
        return np.frombuffer(self._hot, dtype=np.float64)[1:2 * nv:2].copy()

    @property
    def degrees(self) -> np.ndarray:
        """Integer degrees recovered from the weights (drift is << 1/2)."""
        return np.rint(self.weights - self.params.alpha).astype(np.int64)

    @property
    def parents(self) -> np.ndarray:
        nv = self.vertex_count
        return np.frombuffer(self._parents, dtype=np.int64)[:nv].copy()

    def clone(self) -> "GrowthState":
        twin = GrowthState(params=self.params, rng=random.Random())
        twin.rng.setstate(self.rng.getstate())
        twin.n = self.n
        twin.rebuilds = self.rebuilds
        twin._hot = array("d", self._hot)
        twin._parents = array("q", self._parents)
        twin._tree = array("d", self._tree)
        twin._active = self._active
        twin._cap = self._cap
        return twin

    def _grow_capacity(self, need: int) -> None:
        new_cap = max(need, 2 * self._cap)
        self._hot.extend([0.0] * (2 * (new_cap - self._cap)))
        self._parents.extend([-1] * (new_cap - self._cap))
        self._cap = new_cap
        _advise_hugepages(self._hot)


def _rebuild_index(state: GrowthState) -> None:
    """Snap weights back to degree + alpha and recompute every block sum."""
    alpha = state.params.alpha
    nvert = state.vertex_count
    hot = state._hot
    for i in range(nvert):
        hot[2 * i] = round(hot[2 * i] - alpha) + alpha
    nblocks = (nvert + BLOCK - 1) // BLOCK
    active = state._active
    while active < nblocks:
        active <<= 1
    tree = state._tree
    if len(tree) < active + 1:
        tree.extend([0.0] * (active + 1 - len(tree)))
    for j in range(1, active + 1):
        tree[j] = 0.0
    for b in range(nblocks):
        lo = 2 * b * BLOCK
        hi = min(lo + 2 * BLOCK, 2 * nvert)
        tree[b + 1] = math.fsum(hot[lo:hi:2])
    for j in range(1, active + 1):
        p = j + (j & (-j))
        if p <= active:
            tree[p] += tree[j]
    state._active = active


def init(params: ModelParams) -> GrowthState:
    """Seeded initial tree with i.i.d. uniform locations.

    Draw order: n0 locations first, then (for the random recursive tree)
    one parent draw per vertex from index 2 up; vertex 1 always joins
    vertex 0.  The path policy consumes no parent draws.
    """
    state = GrowthState(params=params, rng=random.Random(params.seed))
    rng = state.rng
    n0 = params.n0
    alpha = params.alpha
    capacity = n0 + params.steps
    hot = array("d", bytes(16 * capacity))
    for i in range(n0):
        hot[2 * i + 1] = rng.random()
    parents = array("q", [-1] * capacity)
    degrees = [1] * n0
    if params.initial_tree == "path":
        for i in range(1, n0):
            parents[i] = i - 1
        for i in range(1, n0 - 1):
            degrees[i] = 2
    else:
        parents[1] = 0
        for i in range(2, n0):
            p = rng.randrange(i)
            parents[i] = p
            degrees[p] += 1
    for i in range(n0):
        hot[2 * i] = degrees[i] + alpha
    state._hot = hot
    state._parents = parents
    state._cap = capacity
    _advise_hugepages(hot)
    nblocks = (n0 + BLOCK - 1) // BLOCK
    state._active = 1 << max(0, (nblocks - 1).bit_length())
    planned_blocks = (capacity + BLOCK - 1) // BLOCK
    cap = max(1 << max(0, (planned_blocks - 1).bit_length()), state._active)
    state._tree = array("d", bytes(8 * (cap + 1)))
    _rebuild_index(state)
    state.rebuilds = 0
    return state


def _find(tree, active, hot, nvert, rem):
    """Index of the vertex whose weight bracket contains ``rem``."""
    pos = 0
    j = active
    while j:
        k = pos + j
        t = tree[k]
        if t <= rem:
            rem -= t
            pos = k
        j >>= 1
    j2 = 2 * pos * BLOCK
    hi = min(j2 + 2 * BLOCK, 2 * nvert) - 2
    while j2 < hi:
        w = hot[j2]
        if w > rem:
            break
        rem -= w
        j2 += 2
    i = j2 >> 1
    return i if i < nvert else nvert - 1


def sample_candidate(state: GrowthState, rng: random.Random | None = None) -> int:
    """One preferential draw: vertex i with probability (deg_i + alpha) / W."""
    rng = state.rng if rng is None else rng
    rem = rng.random() * state.total_weight()
    return _find(state._tree, state._active, state._hot,
                 state.vertex_count, rem)


def _run_batch(state: GrowthState, nsteps: int,
               rng: random.Random | None = None) -> tuple[int, int]:
    """Advance ``nsteps`` steps; returns (target, rank) of the last step.

    Per-step draw order: r candidate draws, one rank draw, one location
    draw.  This is the reproducibility contract tied to the seed.
    """
    if nsteps <= 0:
        raise ValueError("need at least one step")
    if state.vertex_count + nsteps > state._cap:
        state._grow_capacity(state.vertex_count + nsteps)
    rnd = (state.rng if rng is None else rng).random
    params = state.params
    alpha = params.alpha
    two_plus = 2.0 + alpha
    one_plus = 1.0 + alpha
    r = params.choice.r
    xi_cum = params.choice.cumulative()
    hot = state._hot
    parents = state._parents
    tree = state._tree
    active = state._active
    nvert = state.vertex_count
    rebuilds = 0
    drift_tol = constants.WEIGHT_DRIFT_TOLERANCE
    target = -1
    rank = 0
    for _ in range(nsteps):
        total = (nvert - 1) * two_plus + alpha
        nv2 = 2 * nvert
        cand = []
        for _c in range(r):
            rem = rnd() * total
            pos = 0
            j = active
            while j:
                k = pos + j
                t = tree[k]
                if t <= rem:
                    rem -= t
                    pos = k
                j >>= 1
            j2 = 2 * pos * BLOCK
            hi = min(j2 + 2 * BLOCK, nv2) - 2
            while j2 < hi:
                w = hot[j2]
                if w > rem:
                    break
                rem -= w
                j2 += 2
            if j2 >= nv2:
                j2 = nv2 - 2
            cand.append((hot[j2 + 1], j2 >> 1))
        cand.sort()
        u = rnd()
        rank = 1
        while rank < r and u >= xi_cum[rank - 1]:
            rank += 1
        target = cand[rank - 1][1]
        # attach the new vertex to the chosen candidate
        hot[2 * target] += 1.0
        j = (target // BLOCK) + 1
        while j <= active:
            tree[j] += 1.0
            j += j & (-j)
        newblock = nvert // BLOCK
        if newblock + 1 > active:
            active <<= 1
            if len(tree) < active + 1:
                tree.extend([0.0] * (active + 1 - len(tree)))
            tree[active] = total + 1.0
        j = newblock + 1
        while j <= active:
            tree[j] += one_plus
            j += j & (-j)
        hot[nv2] = one_plus
        hot[nv2 + 1] = rnd()
        parents[nvert] = target
        nvert += 1
        # drift check: index total must match the closed-form total
        ft = 0.0
        j = (nvert + BLOCK - 1) // BLOCK
        while j:
            ft += tree[j]
            j &= j - 1
        if abs(ft - (nvert - 1) * two_plus - alpha) > drift_tol:
            state._active = active
            state.n = nvert - params.n0
            _rebuild_index(state)
            active = state._active
            rebuilds += 1
    state._active = active
    state.n = nvert - params.n0
    state.rebuilds += rebuilds
    return target, rank


def grow_step(state: GrowthState,
              rng: random.Random | None = None) -> tuple[int, int]:
    """One growth step; returns (attached vertex index, chosen rank)."""
    return _run_batch(state, 1, rng)


def run_steps(state: GrowthState, nsteps: int) -> None:
    """Advance the state by ``nsteps`` growth steps."""
    if nsteps > 0:
        _run_batch(state, nsteps)


def snapshot(state: GrowthState) -> SnapshotStats:
    """Frozen measurements of the current tree, sorted by location."""
    locs = state.locations
    degs = state.degrees
    order = np.argsort(locs, kind="stable")
    locs = locs[order]
    degs = degs[order]
    hist = np.bincount(degs)
    return SnapshotStats(
        n=state.n,
        n0=state.params.n0,
        alpha=state.params.alpha,
        locations=locs,
        degrees=degs,
        weight_cumsum=np.cumsum(degs + state.params.alpha),
        degree_hist=hist,
        max_degree=int(degs.max()),
    )


def run(params: ModelParams,
        snapshot_schedule: list[int] | None = None) -> list[SnapshotStats]:
    """Run the full growth process, snapshotting at the scheduled steps.

    An empty schedule means a single snapshot of the final state.  The
    schedule must be sorted and lie within the configured step count; the
    process always runs to ``params.steps`` regardless of the last
    snapshot.  Identical params and schedule reproduce identical output.
    """
    schedule = list(snapshot_schedule) if snapshot_schedule else [params.steps]
    if schedule != sorted(schedule):
        raise DomainError("snapshot schedule must be sorted")
    if schedule[0] < 0 or schedule[-1] > params.steps:
        raise DomainError("snapshot schedule must lie within the step count")
    state = init(params)
    snaps = []
    done = 0
    for t in schedule:
        run_steps(state, t - done)
        done = t
        snaps.append(snapshot(state))
    run_steps(state, params.steps - done)
    return snaps


def exact_attachment_distribution(state: GrowthState) -> np.ndarray:
    """Exact attachment law of the next step by enumerating all samples.

    Walks every r-tuple of candidate draws, weighting each by the product
    of its preferential probabilities, orders it by (location, index), and
    credits the rank probabilities.  Only viable for tiny states.
    """
    nvert = state.vertex_count
    r = state.params.choice.r
    if nvert > 12 or r > 4:
        raise SizeError("exact law limited to at most 12 vertices and r <= 4")
    total = state.total_weight()
    locs = state.locations
    weights = state.weights
    pick = [(locs[i], i) for i in range(nvert)]
    prob = [weights[i] / total for i in range(nvert)]
    xi = state.params.choice.probs
    out = np.zeros(nvert)
    for tup in product(range(nvert), repeat=r):
        p = 1.0
        for i in tup:
            p *= prob[i]
        ordered = sorted(pick[i] for i in tup)
        for s in range(r):
            out[ordered[s][1]] += p * xi[s]
    return out


def attachment_frequencies(state: GrowthState, trials: int,
                           rng: random.Random) -> np.ndarray:
    """Monte-Carlo attachment counts over replicated single steps.

    Each trial replays one growth step from a clone of ``state`` with the
    shared ``rng`` driving the draws, so the counts exercise the exact
    step implementation without disturbing the original state.
    """
    counts = np.zeros(state.vertex_count, dtype=np.int64)
    for _ in range(trials):
        trial = state.clone()
        target, _rank = grow_step(trial, rng)
        counts[target] += 1
    return counts
