"""Sequential spanning-tree ensemble sampler with an enumeration oracle.

Plans are built one district at a time. Each split draws random spanning
trees of the remaining region (Wilson's loop-erased walk, with same-county
edges upweighted) and cuts a tree edge whose subtree lands in the population
window. The importance weight divides out the exact probability that a
(tree, cut) proposal produces a given district, which is available in closed
form through the matrix-tree theorem:

    P(carve D from region R) is proportional to
        T(D) * T(R without D) * w(cut(D, R without D)) / T(R)

where T is the weighted spanning-tree count and w(cut) the total weight of
crossing edges. Dividing by these factors, by the number of candidate cuts
actually seen, and finally by the number of feasible carving orders of the
finished plan makes the weighted ensemble target the uniform distribution
over valid plans when rho = 0, and an exp(-rho * boundary) tilt otherwise.
That claim is testable: see the total-variation checks against
enumerate_plans in the acceptance suite.

Determinism: every random decision comes from a counter-based Philox stream
keyed by (seed, stage, particle slot), so results are bit-identical across
runs and across worker counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    Criteria,
    Ensemble,
    EnsembleMeta,
    Plan,
    PrecinctGraph,
    canonicalize,
    is_contiguous,
    max_pop_deviation,
)
from .errors import InfeasibleCriteriaError

__all__ = [
    "SamplerParams",
    "Particle",
    "SplitResult",
    "sample_ensemble",
    "draw_balanced_split",
    "effective_sample_size",
    "resample",
    "enumerate_plans",
]

ENUMERATION_GUARD = 24

# Reserved slot for stage-level draws (resampling, final subsample).
_STAGE_SLOT = 0xFFFFFFFF
_MASK32 = 0xFFFFFFFF
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class SamplerParams:
    """Tuning surface of the sampler."""

    n_plans: int
    n_particles: int | None = None
    ess_threshold: float = 0.5
    rho: float = 0.0
    county_multiplier: float = 1.0
    max_split_retries: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_plans < 1:
            raise ValueError("n_plans must be >= 1")
        if self.n_particles is not None and self.n_particles < self.n_plans:
            raise ValueError("n_particles must be >= n_plans")
        if not (0 < self.ess_threshold <= 1):
            raise ValueError("ess_threshold must be in (0, 1]")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.county_multiplier < 1:
            raise ValueError("county_multiplier must be >= 1")
        if self.max_split_retries < 1:
            raise ValueError("max_split_retries must be >= 1")

    @property
    def particles(self) -> int:
        return self.n_particles if self.n_particles is not None else self.n_plans


@dataclass(frozen=True)
class Particle:
    """Partial plan under construction: 0 marks unassigned precincts."""

    assignment: tuple[int, ...]
    log_weight: float


@dataclass(frozen=True)
class SplitResult:
    """Successful balanced split of a region."""

    carved: frozenset[int]
    remainder: frozenset[int]
    n_candidates: int
    cut_weight: float


def _stream(seed: int, stage: int, slot: int) -> np.random.Generator:
    """Counter-based RNG stream keyed by (seed, stage, slot)."""
    key = np.array(
        [seed & _MASK64, ((stage & _MASK32) << 32) | (slot & _MASK32)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def effective_sample_size(weights) -> float:
    """Particle-degeneracy diagnostic (sum w)^2 / sum(w^2), in [1, N]."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise ValueError("effective_sample_size of empty weights")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    return float(w.sum() ** 2 / np.square(w).sum())


def _systematic_counts(weights: np.ndarray, n_out: int, u: float) -> np.ndarray:
    """Copy counts per particle under systematic resampling with offset u."""
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    points = (u + np.arange(n_out)) / n_out
    idx = np.searchsorted(cum, points, side="right")
    return np.bincount(idx, minlength=weights.size)


def resample(particles, rng: np.random.Generator, n_out: int | None = None) -> list[Particle]:
    """Systematic resampling: copy counts proportional to weight in expectation.

    Weights are read from the particles' log_weights and normalized here;
    the returned particles all carry log_weight 0.
    """
    particles = list(particles)
    if not particles:
        raise ValueError("cannot resample zero particles")
    if n_out is None:
        n_out = len(particles)
    logw = np.array([p.log_weight for p in particles], dtype=float)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    counts = _systematic_counts(w, n_out, float(rng.random()))
    out: list[Particle] = []
    for p, c in zip(particles, counts):
        out.extend(replace(p, log_weight=0.0) for _ in range(c))
    return out


# ---------------------------------------------------------------------------
# Region machinery


class _Region:
    """Induced subgraph with local indices, county-weighted adjacency."""

    __slots__ = ("nodes", "n", "pops", "total_pop", "nbrs", "cumw", "wsum", "edges", "uniform", "tau_cache")

    def __init__(self, graph: PrecinctGraph, mask: np.ndarray, edge_w: np.ndarray):
        nodes = np.flatnonzero(mask)
        self.nodes = nodes
        self.n = int(nodes.size)
        loc = np.full(graph.n, -1, dtype=np.int64)
        loc[nodes] = np.arange(self.n)
        pops = graph.populations[nodes]
        self.pops = pops.tolist()
        self.total_pop = float(pops.sum())
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        wts: list[list[float]] = [[] for _ in range(self.n)]
        edges: list[tuple[int, int, float]] = []
        uniform = True
        for (a, b), w in zip(graph.edge_array, edge_w):
            if mask[a] and mask[b]:
                la, lb = int(loc[a]), int(loc[b])
                w = float(w)
                uniform = uniform and w == 1.0
                nbrs[la].append(lb)
                wts[la].append(w)
                nbrs[lb].append(la)
                wts[lb].append(w)
                edges.append((la, lb, w))
        self.nbrs = nbrs
        self.edges = edges
        self.uniform = uniform
        cumw: list[list[float]] = []
        wsum: list[float] = []
        for ws in wts:
            acc, c = 0.0, []
            for w in ws:
                acc += w
                c.append(acc)
            cumw.append(c)
            wsum.append(acc)
        self.cumw = cumw
        self.wsum = wsum
        # Tree counts keyed by side node tuple; shared regions amortize this.
        self.tau_cache: dict[tuple[int, ...], float] = {}

    def log_tau_side(self, side: list[int], graph: PrecinctGraph, edge_w: np.ndarray) -> float:
        key = tuple(sorted(side))
        got = self.tau_cache.get(key)
        if got is None:
            got = _log_tree_count(graph, self.nodes[list(key)], edge_w)
            self.tau_cache[key] = got
        return got


class _Floats:
    """Blocked stream of uniform floats from a Generator (cuts call overhead)."""

    __slots__ = ("rng", "buf", "i", "size")

    def __init__(self, rng: np.random.Generator, block: int = 512):
        self.rng = rng
        self.size = block
        self.buf = rng.random(block)
        self.i = 0

    def take(self) -> float:
        if self.i >= self.size:
            self.buf = self.rng.random(self.size)
            self.i = 0
        v = self.buf[self.i]
        self.i += 1
        return float(v)


def _wilson_tree(region: _Region, floats: _Floats) -> list[int]:
    """Spanning tree via Wilson's loop-erased random walk, rooted at local 0.

    Returns parent pointers toward the root (parent[0] == -1). Trees are
    drawn with probability proportional to the product of their edge weights.
    """
    n = region.n
    parent = [-1] * n
    in_tree = bytearray(n)
    in_tree[0] = 1
    nbrs = region.nbrs
    take = floats.take
    if region.uniform:
        for start in range(1, n):
            u = start
            while not in_tree[u]:
                ns = nbrs[u]
                v = ns[0] if len(ns) == 1 else ns[int(take() * len(ns))]
                parent[u] = v
                u = v
            u = start
            while not in_tree[u]:
                in_tree[u] = 1
                u = parent[u]
        return parent
    cumw = region.cumw
    wsum = region.wsum
    for start in range(1, n):
        u = start
        while not in_tree[u]:
            cw = cumw[u]
            if len(cw) == 1:
                v = nbrs[u][0]
            else:
                r = take() * wsum[u]
                lo, hi = 0, len(cw) - 1
                while lo < hi:
                    mid = (lo + hi) // 2
                    if cw[mid] > r:
                        hi = mid
                    else:
                        lo = mid + 1
                v = nbrs[u][lo]
            parent[u] = v
            u = v
        u = start
        while not in_tree[u]:
            in_tree[u] = 1
            u = parent[u]
    return parent


def _subtree_pops(region: _Region, parent: list[int]) -> tuple[list[float], list[list[int]], list[int]]:
    """Subtree populations for each node, plus children lists and a root-first order."""
    n = region.n
    children: list[list[int]] = [[] for _ in range(n)]
    for u in range(1, n):
        children[parent[u]].append(u)
    order: list[int] = [0]
    for u in order:
        order.extend(children[u])
    pops = region.pops
    sub = [0.0] * n
    for u in reversed(order):
        s = pops[u]
        for c in children[u]:
            s += sub[c]
        sub[u] = s
    return sub, children, order


def _cut_candidates(
    region: _Region,
    sub: list[float],
    carve_lo: float,
    carve_hi: float,
    remain_lo: float,
    remain_hi: float,
) -> list[tuple[int, bool]]:
    """Valid (node, carve_complement) cut pairs of one tree.

    Cutting above node u splits the region into the subtree of u and its
    complement; either side may be the carved district when both windows
    allow it.
    """
    total = region.total_pop
    out: list[tuple[int, bool]] = []
    for u in range(1, region.n):
        a = sub[u]
        b = total - a
        if carve_lo <= a <= carve_hi and remain_lo <= b <= remain_hi:
            out.append((u, False))
        if carve_lo <= b <= carve_hi and remain_lo <= a <= remain_hi:
            out.append((u, True))
    return out


def _collect_subtree(children: list[list[int]], u: int) -> list[int]:
    nodes = [u]
    for v in nodes:
        nodes.extend(children[v])
    return nodes


def _cut_weight(region: _Region, carved_mask: bytearray) -> float:
    return sum(w for a, b, w in region.edges if carved_mask[a] != carved_mask[b])


def _log_tree_count(graph: PrecinctGraph, nodes: np.ndarray, edge_w: np.ndarray) -> float:
    """Log weighted spanning-tree count of the induced subgraph (matrix-tree)."""
    m = int(nodes.size)
    if m <= 1:
        return 0.0
    loc = {int(g): i for i, g in enumerate(nodes)}
    lap = np.zeros((m, m))
    for (a, b), w in zip(graph.edge_array, edge_w):
        ia = loc.get(int(a))
        if ia is None:
            continue
        ib = loc.get(int(b))
        if ib is None:
            continue
        lap[ia, ia] += w
        lap[ib, ib] += w
        lap[ia, ib] -= w
        lap[ib, ia] -= w
    sign, logdet = np.linalg.slogdet(lap[1:, 1:])
    if sign <= 0:
        raise RuntimeError("tree count of a disconnected district")
    return float(logdet)


def _boundary_edges(graph: PrecinctGraph, carved_mask: np.ndarray) -> int:
    ea = graph.edge_array
    if ea.size == 0:
        return 0
    return int(np.sum(carved_mask[ea[:, 0]] != carved_mask[ea[:, 1]]))


def _district_adjacency(graph: PrecinctGraph, assignment: np.ndarray, k: int) -> np.ndarray:
    adj = np.zeros((k, k), dtype=bool)
    ea = graph.edge_array
    da = assignment[ea[:, 0]] - 1
    db = assignment[ea[:, 1]] - 1
    adj[da, db] = True
    adj[db, da] = True
    np.fill_diagonal(adj, False)
    return adj


def _carving_order_count(adj: np.ndarray) -> int:
    """Number of district carving orders whose every intermediate remainder
    is connected; used to correct for the many orders producing one plan."""
    k = adj.shape[0]
    if k == 1:
        return 1
    masks = []
    for i in range(k):
        m = 0
        for j in range(k):
            if adj[i, j]:
                m |= 1 << j
        masks.append(m)

    def connected(s: int) -> bool:
        first = (s & -s).bit_length() - 1
        seen = 1 << first
        stack = [first]
        while stack:
            u = stack.pop()
            new = masks[u] & s & ~seen
            while new:
                v = (new & -new).bit_length() - 1
                seen |= 1 << v
                stack.append(v)
                new &= new - 1
        return seen == s

    full = (1 << k) - 1
    counts = {full: 1}
    for size in range(k, 1, -1):
        next_counts: dict[int, int] = {}
        for s, c in counts.items():
            rem = s
            while rem:
                d = (rem & -rem).bit_length() - 1
                rem &= rem - 1
                s2 = s & ~(1 << d)
                if s2.bit_count() == 1 or connected(s2):
                    next_counts[s2] = next_counts.get(s2, 0) + c
        counts = next_counts
    return sum(counts.values())


# ---------------------------------------------------------------------------
# Split step


@dataclass
class _SplitDraw:
    """One carved district plus the weight bookkeeping of its proposal."""

    carved: list[int]  # local node indices
    remainder: list[int]
    n_candidates: int
    cut_weight: float
    log_sum_inv: float  # log sum over candidates of 1 / (T(A) T(B) w(cut))
    log_tau_remainder: float


def _attempt_split(
    region: _Region,
    graph: PrecinctGraph,
    edge_w: np.ndarray,
    floats: _Floats,
    n_trees: int,
    carve_lo: float,
    carve_hi: float,
    remain_lo: float,
    remain_hi: float,
) -> _SplitDraw | None:
    """Pool cut candidates over ``n_trees`` tree draws and pick one.

    Candidates are chosen with probability inversely proportional to the
    measure T(A) T(B) w(cut) under which tree cutting proposes them, which
    flattens the proposal over distinct splits and keeps importance weights
    tight. The weight contribution of the draw is the log of the summed
    inverse measures minus log n_trees; the caller adds back the remainder
    tree count on every stage but the last so the per-region normalizer
    telescopes away. Returns None when no drawn tree admits a valid cut.
    """
    # Per candidate edge: (sides as local node lists, shared log measure).
    edges: list[tuple[list[int], list[int], float, float, float]] = []
    cand_edge: list[int] = []
    cand_complement: list[bool] = []
    for _ in range(n_trees):
        parent = _wilson_tree(region, floats)
        sub, children, _ = _subtree_pops(region, parent)
        pairs = _cut_candidates(region, sub, carve_lo, carve_hi, remain_lo, remain_hi)
        done: dict[int, int] = {}
        for u, complement in pairs:
            e = done.get(u)
            if e is None:
                side_a = _collect_subtree(children, u)
                mask = bytearray(region.n)
                for v in side_a:
                    mask[v] = 1
                side_b = [v for v in range(region.n) if not mask[v]]
                cutw = _cut_weight(region, mask)
                lt_a = region.log_tau_side(side_a, graph, edge_w)
                lt_b = region.log_tau_side(side_b, graph, edge_w)
                e = len(edges)
                edges.append((side_a, side_b, cutw, lt_a, lt_b))
                done[u] = e
            cand_edge.append(e)
            cand_complement.append(complement)
    n_pool = len(cand_edge)
    if n_pool == 0:
        return None

    log_measure = np.array(
        [edges[e][3] + edges[e][4] + math.log(edges[e][2]) for e in cand_edge]
    )
    neg = -log_measure
    shift = neg.max()
    probs = np.exp(neg - shift)
    total = probs.sum()
    log_sum_inv = float(shift + math.log(total))
    target = floats.take() * total
    pick = int(np.searchsorted(np.cumsum(probs), target, side="right"))
    if pick >= n_pool:
        pick = n_pool - 1

    side_a, side_b, cutw, lt_a, lt_b = edges[cand_edge[pick]]
    if cand_complement[pick]:
        carved, remainder = side_b, side_a
        log_tau_rem = lt_a
    else:
        carved, remainder = side_a, side_b
        log_tau_rem = lt_b
    return _SplitDraw(carved, remainder, n_pool, cutw, log_sum_inv, log_tau_rem)


def draw_balanced_split(
    graph: PrecinctGraph,
    region,
    pop_window: tuple[float, float],
    rng: np.random.Generator,
    remainder_window: tuple[float, float] | None = None,
    county_multiplier: float = 1.0,
) -> SplitResult | None:
    """One spanning-tree split attempt over ``region`` (an iterable of precinct ids).

    Draws a single tree; returns None when the tree has no edge whose removal
    yields an in-window side. n_candidates counts valid (edge, side) pairs,
    which downstream weighting needs.
    """
    mask = np.zeros(graph.n, dtype=bool)
    mask[list(region)] = True
    edge_w = _edge_weights(graph, county_multiplier)
    reg = _Region(graph, mask, edge_w)
    lo, hi = pop_window
    if remainder_window is None:
        rlo, rhi = 0.0, math.inf
    else:
        rlo, rhi = remainder_window
    got = _attempt_split(reg, graph, edge_w, _Floats(rng), 1, lo, hi, rlo, rhi)
    if got is None:
        return None
    carved = frozenset(int(reg.nodes[v]) for v in got.carved)
    remainder = frozenset(int(reg.nodes[v]) for v in got.remainder)
    return SplitResult(carved, remainder, got.n_candidates, got.cut_weight)


def _edge_weights(graph: PrecinctGraph, county_multiplier: float) -> np.ndarray:
    ea = graph.edge_array
    if county_multiplier == 1.0 or ea.size == 0:
        return np.ones(len(ea))
    counties = graph.counties
    return np.array(
        [county_multiplier if counties[a] == counties[b] else 1.0 for a, b in ea],
        dtype=float,
    )


# ---------------------------------------------------------------------------
# Ensemble sampling


def sample_ensemble(
    graph: PrecinctGraph,
    criteria: Criteria,
    params: SamplerParams,
    cycle: str = "",
    workers: int = 1,
    check: bool = True,
) -> Ensemble:
    """Draw a weighted ensemble of valid plans.

    Deterministic given (seed, params): every particle advances on its own
    keyed stream, so the worker count never changes the result. With k = 1
    the single all-in-one plan is returned with weight 1.

    Raises InfeasibleCriteriaError when fewer than n_plans particles survive,
    e.g. when the population windows admit no valid split.
    """
    n = graph.n
    k = criteria.n_districts
    if k > n:
        raise ValueError(f"cannot draw {k} districts from {n} precincts")
    meta = EnsembleMeta(seed=params.seed, cycle=cycle, criteria=criteria, params=params)
    if k == 1:
        return Ensemble((Plan((1,) * n),), (1.0,), meta)

    total_pop = float(graph.populations.sum())
    ideal = total_pop / k
    tol = criteria.pop_tolerance
    carve_lo, carve_hi = ideal * (1 - tol), ideal * (1 + tol)
    edge_w = _edge_weights(graph, params.county_multiplier)

    n_particles = params.particles
    assignment = np.zeros((n_particles, n), dtype=np.int16)
    log_w = np.zeros(n_particles)
    alive = np.ones(n_particles, dtype=bool)
    seed = params.seed
    n_trees = params.max_split_retries
    rho = params.rho

    shared_region_stage1 = _Region(graph, np.ones(n, dtype=bool), edge_w)

    def advance(stage: int, i: int) -> None:
        """Carve district ``stage`` for particle ``i``; kills it on failure."""
        rng = _stream(seed, stage, i)
        floats = _Floats(rng)
        if stage == 1:
            region = shared_region_stage1
        else:
            region = _Region(graph, assignment[i] == 0, edge_w)
        remain = k - stage
        got = _attempt_split(
            region, graph, edge_w, floats, n_trees, carve_lo, carve_hi, remain * carve_lo, remain * carve_hi
        )
        if got is None:
            alive[i] = False
            return
        carved_global = region.nodes[got.carved]
        dlw = got.log_sum_inv - math.log(n_trees)
        if stage < k - 1:
            dlw += got.log_tau_remainder
        if rho:
            cmask = np.zeros(n, dtype=bool)
            cmask[carved_global] = True
            dlw -= rho * _boundary_edges(graph, cmask)
        log_w[i] += dlw
        assignment[i, carved_global] = stage

    def run_stage(stage: int) -> None:
        todo = np.flatnonzero(alive)
        if workers <= 1 or todo.size < 2:
            for i in todo:
                advance(stage, int(i))
        else:
            chunks = np.array_split(todo, workers * 4)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(lambda ch: [advance(stage, int(i)) for i in ch], chunks))

    for stage in range(1, k):
        run_stage(stage)
        if not alive.any():
            raise InfeasibleCriteriaError(
                f"all {n_particles} particles failed after {params.max_split_retries} "
                f"tree draws at stage {stage} of {k - 1}"
            )
        if stage < k - 1:
            w = np.exp(log_w[alive] - log_w[alive].max())
            if effective_sample_size(w) < params.ess_threshold * n_particles:
                _resample_arrays(assignment, log_w, alive, _stream(seed, stage, _STAGE_SLOT))

    # Close out: label the remainder and divide by the number of carving
    # orders that could have produced each finished plan.
    idx_alive = np.flatnonzero(alive)
    for i in idx_alive:
        row = assignment[i]
        row[row == 0] = k
        adj = _district_adjacency(graph, row.astype(np.int64), k)
        log_w[i] -= math.log(_carving_order_count(adj))

    # Weights that would underflow exp() carry no usable mass; treat as dead.
    alive &= log_w > (log_w[alive].max() - 700.0 if idx_alive.size else 0.0)
    idx_alive = np.flatnonzero(alive)

    if idx_alive.size < params.n_plans:
        raise InfeasibleCriteriaError(
            f"only {idx_alive.size} of {n_particles} particles survived; "
            f"{params.n_plans} plans requested"
        )

    if idx_alive.size > params.n_plans:
        # Final draw: systematic weighted selection down to n_plans slots with
        # equal output weights. Expectation-preserving, so the ensemble law is
        # unchanged; effectively without replacement while weights stay small.
        lw = log_w[idx_alive]
        wsel = np.exp(lw - lw.max())
        wsel /= wsel.sum()
        counts = _systematic_counts(wsel, params.n_plans, float(_stream(seed, k, _STAGE_SLOT).random()))
        idx_alive = np.repeat(idx_alive, counts)
        w = [1.0 / params.n_plans] * params.n_plans
    else:
        lw = log_w[idx_alive]
        wraw = np.exp(lw - lw.max())
        total = math.fsum(wraw.tolist())
        w = [float(x) / total for x in wraw]
    plans = tuple(canonicalize(assignment[i].tolist()) for i in idx_alive)

    if check:
        for plan in plans:
            if not is_contiguous(graph, plan) or max_pop_deviation(graph, plan) > tol * (1 + 1e-9) + 1e-12:
                raise AssertionError("sampler emitted an invalid plan")

    return Ensemble(plans, tuple(w), meta)


def _resample_arrays(
    assignment: np.ndarray, log_w: np.ndarray, alive: np.ndarray, rng: np.random.Generator
) -> None:
    """In-place systematic resample of the particle system (dead slots drop out)."""
    n = alive.size
    w = np.where(alive, np.exp(log_w - log_w[alive].max()), 0.0)
    w /= w.sum()
    counts = _systematic_counts(w, n, float(rng.random()))
    src = np.repeat(np.arange(n), counts)
    assignment[:] = assignment[src]
    log_w[:] = 0.0
    alive[:] = True


# ---------------------------------------------------------------------------
# Enumeration oracle


def enumerate_plans(graph: PrecinctGraph, criteria: Criteria) -> list[Plan]:
    """All valid plans, canonically labeled, by exhaustive anchored search.

    A district is grown around the lowest-index unassigned precinct, which
    yields each partition exactly once already in canonical label order.
    Guarded to ENUMERATION_GUARD precincts.
    """
    n = graph.n
    if n > ENUMERATION_GUARD:
        raise ValueError(f"enumeration guarded to {ENUMERATION_GUARD} precincts, got {n}")
    k = criteria.n_districts
    if k > n:
        return []
    pops = graph.populations
    ideal = pops.sum() / k
    slack = criteria.pop_tolerance * ideal + 1e-9
    lo, hi = ideal - slack, ideal + slack
    if k == 1:
        return [Plan((1,) * n)] if lo <= pops.sum() <= hi else []

    nbrs = [set(int(v) for v in a) for a in graph.neighbors]
    assignment = [0] * n
    plans: list[Plan] = []

    def components(nodes: set[int]) -> list[set[int]]:
        out = []
        left = set(nodes)
        while left:
            start = next(iter(left))
            comp = {start}
            stack = [start]
            while stack:
                u = stack.pop()
                for v in nbrs[u]:
                    if v in left and v not in comp:
                        comp.add(v)
                        stack.append(v)
            out.append(comp)
            left -= comp
        return out

    def remainder_feasible(nodes: set[int], districts_left: int) -> bool:
        """Each leftover component must host a whole number of in-window districts."""
        min_total = 0
        max_total = 0
        for comp in components(nodes):
            cpop = float(pops[list(comp)].sum())
            if cpop < lo - 1e-12 or len(comp) < 1:
                return False
            c_min = max(1, math.ceil((cpop - 1e-9) / hi))
            c_max = math.floor((cpop + 1e-9) / lo) if lo > 0 else districts_left
            c_max = min(c_max, len(comp))
            if c_min > c_max:
                return False
            min_total += c_min
            max_total += c_max
        return min_total <= districts_left <= max_total

    def connected_supersets(anchor: int, allowed: set[int]):
        """Every connected subset of ``allowed`` containing ``anchor``, once each."""

        def rec(current: set[int], cur_pop: float, forbidden: set[int]):
            if lo <= cur_pop <= hi:
                yield set(current)
            boundary = sorted(
                v
                for u in current
                for v in nbrs[u]
                if v in allowed and v not in current and v not in forbidden
            )
            seen: set[int] = set()
            newly_forbidden = set(forbidden)
            for v in boundary:
                if v in seen:
                    continue
                seen.add(v)
                if cur_pop + pops[v] <= hi:
                    current.add(v)
                    yield from rec(current, cur_pop + float(pops[v]), newly_forbidden)
                    current.remove(v)
                newly_forbidden.add(v)

        if pops[anchor] <= hi:
            yield from rec({anchor}, float(pops[anchor]), set())

    def rec_district(unassigned: set[int], label: int) -> None:
        left = k - label + 1
        if left == 1:
            cpop = float(pops[list(unassigned)].sum())
            if lo <= cpop <= hi and len(components(unassigned)) == 1:
                for u in unassigned:
                    assignment[u] = label
                plans.append(Plan(tuple(assignment)))
                for u in unassigned:
                    assignment[u] = 0
            return
        anchor = min(unassigned)
        for district in connected_supersets(anchor, unassigned):
            rest = unassigned - district
            if remainder_feasible(rest, left - 1):
                for u in district:
                    assignment[u] = label
                rec_district(rest, label + 1)
                for u in district:
                    assignment[u] = 0

    rec_district(set(range(n)), 1)
    return plans
