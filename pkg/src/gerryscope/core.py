"""Domain types for precinct geography, districting plans, and plan ensembles.

Everything here is immutable after construction and all operations are pure
functions, so the types are safe to share across threads or processes.
District labels run 1..k and are kept canonical: district 1 is the one
containing the lowest-index precinct, district 2 the one containing the
lowest-index precinct not in district 1, and so on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Precinct",
    "PrecinctGraph",
    "Criteria",
    "Plan",
    "Ensemble",
    "EnsembleMeta",
    "DistrictProfile",
    "Violation",
    "ValidationReport",
    "validate_dataset",
    "district_profile",
    "district_shares",
    "district_urbanities",
    "is_contiguous",
    "max_pop_deviation",
    "county_splits",
    "canonicalize",
]


@dataclass(frozen=True)
class Precinct:
    """One precinct record: population, two-party votes, and urban voters."""

    id: str
    county: str
    population: float
    turnout: float
    dem_votes: float
    urban_voters: float


@dataclass(frozen=True)
class PrecinctGraph:
    """Adjacency graph over precincts.

    ``edges`` holds unordered index pairs (i, j) with i < j, indexing into
    ``precincts``. Derived numpy arrays are cached lazily and never mutated.
    """

    precincts: tuple[Precinct, ...]
    edges: frozenset[tuple[int, int]]

    @staticmethod
    def build(precincts: Sequence[Precinct], edges: Iterable[tuple[int, int]]) -> "PrecinctGraph":
        norm = frozenset((min(a, b), max(a, b)) for a, b in edges)
        return PrecinctGraph(tuple(precincts), norm)

    @property
    def n(self) -> int:
        return len(self.precincts)

    @cached_property
    def populations(self) -> np.ndarray:
        return np.array([p.population for p in self.precincts], dtype=float)

    @cached_property
    def turnouts(self) -> np.ndarray:
        return np.array([p.turnout for p in self.precincts], dtype=float)

    @cached_property
    def dem_votes(self) -> np.ndarray:
        return np.array([p.dem_votes for p in self.precincts], dtype=float)

    @cached_property
    def urban_voters(self) -> np.ndarray:
        return np.array([p.urban_voters for p in self.precincts], dtype=float)

    @cached_property
    def counties(self) -> tuple[str, ...]:
        return tuple(p.county for p in self.precincts)

    @cached_property
    def edge_array(self) -> np.ndarray:
        """Edges as a (m, 2) int array, sorted for reproducible iteration."""
        if not self.edges:
            return np.empty((0, 2), dtype=np.int64)
        return np.array(sorted(self.edges), dtype=np.int64)

    @cached_property
    def neighbors(self) -> tuple[np.ndarray, ...]:
        """Neighbor index arrays per precinct, ascending."""
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in self.edge_array:
            adj[a].append(int(b))
            adj[b].append(int(a))
        return tuple(np.array(sorted(ns), dtype=np.int64) for ns in adj)

    def replace_dem_votes(self, dem_votes: np.ndarray) -> "PrecinctGraph":
        """New graph with precinct dem_votes swapped out, all else unchanged."""
        new = tuple(
            Precinct(p.id, p.county, p.population, p.turnout, float(v), p.urban_voters)
            for p, v in zip(self.precincts, dem_votes)
        )
        return PrecinctGraph(new, self.edges)


@dataclass(frozen=True)
class Criteria:
    """Legal criteria a plan must satisfy, plus soft scoring weights."""

    n_districts: int
    pop_tolerance: float = 0.005
    compactness_weight: float = 0.0
    county_weight: float = 0.0

    def __post_init__(self) -> None:
        if self.n_districts < 1:
            raise ValueError("n_districts must be >= 1")
        if not (0 <= self.pop_tolerance < 1):
            raise ValueError("pop_tolerance must be in [0, 1)")
        if self.compactness_weight < 0 or self.county_weight < 0:
            raise ValueError("weights must be >= 0")


@dataclass(frozen=True)
class Plan:
    """Assignment of each precinct to a district label in 1..k."""

    assignment: tuple[int, ...]

    @property
    def n_districts(self) -> int:
        return max(self.assignment)

    def as_array(self) -> np.ndarray:
        return np.array(self.assignment, dtype=np.int64)


@dataclass(frozen=True)
class EnsembleMeta:
    seed: int
    cycle: str
    criteria: Criteria
    params: "object" = None  # SamplerParams; untyped to avoid an import cycle


@dataclass(frozen=True)
class Ensemble:
    """Weighted collection of plans produced by one sampler run."""

    plans: tuple[Plan, ...]
    weights: tuple[float, ...]
    meta: EnsembleMeta

    def __post_init__(self) -> None:
        if len(self.plans) != len(self.weights):
            raise ValueError("plans and weights must have equal length")
        if self.plans:
            if any(w <= 0 for w in self.weights):
                raise ValueError("ensemble weights must be positive")
            if abs(math.fsum(self.weights) - 1.0) > 1e-12:
                raise ValueError("ensemble weights must sum to 1")

    def weight_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)


@dataclass(frozen=True)
class DistrictProfile:
    """Aggregated population, votes, and urbanity for one district."""

    district: int
    population: float
    turnout: float
    dem_share: float
    urbanity: float


@dataclass(frozen=True)
class Violation:
    rule: str
    subject: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    """Hard invariant breaches plus advisory flags for a dataset."""

    violations: tuple[Violation, ...] = ()
    warnings: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_dataset(graph: PrecinctGraph) -> ValidationReport:
    """Check every graph and precinct invariant; violations are data, not errors.

    Zero-turnout precincts are legal but reported as warnings because any
    district made only of them falls back to the 0.5 share / 0.0 urbanity
    convention.
    """
    violations: list[Violation] = []
    warnings: list[Violation] = []

    seen: set[str] = set()
    for p in graph.precincts:
        if p.id in seen:
            violations.append(Violation("duplicate_id", p.id, f"precinct id {p.id!r} appears more than once"))
        seen.add(p.id)
        for fname in ("population", "turnout", "dem_votes", "urban_voters"):
            v = getattr(p, fname)
            if v < 0 or not np.isfinite(v):
                violations.append(Violation("negative_field", p.id, f"{fname}={v} must be a finite value >= 0"))
        if p.dem_votes > p.turnout:
            violations.append(
                Violation("votes_exceed_turnout", p.id, f"dem_votes {p.dem_votes} exceeds turnout {p.turnout}")
            )
        if p.urban_voters > p.turnout:
            violations.append(
                Violation("urban_exceed_turnout", p.id, f"urban_voters {p.urban_voters} exceeds turnout {p.turnout}")
            )
        if p.turnout == 0:
            warnings.append(Violation("zero_turnout", p.id, "precinct has zero turnout"))

    n = graph.n
    for a, b in sorted(graph.edges):
        if a == b:
            violations.append(Violation("self_loop", str(a), f"edge ({a}, {b}) is a self-loop"))
        if not (0 <= a < n) or not (0 <= b < n):
            violations.append(Violation("unknown_endpoint", f"{a},{b}", f"edge ({a}, {b}) references a missing precinct"))

    if n > 0 and not violations:
        if not _connected(graph, range(n)):
            violations.append(Violation("disconnected", "<graph>", "graph is not connected"))

    return ValidationReport(tuple(violations), tuple(warnings))


def _connected(graph: PrecinctGraph, nodes: Iterable[int]) -> bool:
    """BFS connectivity of the subgraph induced by ``nodes``."""
    node_set = set(int(v) for v in nodes)
    if not node_set:
        return True
    start = next(iter(node_set))
    stack = [start]
    seen = {start}
    nbrs = graph.neighbors
    while stack:
        u = stack.pop()
        for v in nbrs[u]:
            v = int(v)
            if v in node_set and v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == len(node_set)


def _check_plan_shape(graph: PrecinctGraph, plan: Plan) -> None:
    if len(plan.assignment) != graph.n:
        raise ValueError(f"plan covers {len(plan.assignment)} precincts, graph has {graph.n}")


def district_profile(graph: PrecinctGraph, plan: Plan, district: int) -> DistrictProfile:
    """Turnout-weighted aggregates for one district of a plan.

    dem_share is total Democratic votes over total two-party turnout, which
    equals the turnout-weighted mean of precinct shares. A district with zero
    turnout gets share 0.5 and urbanity 0.0.
    """
    _check_plan_shape(graph, plan)
    members = plan.as_array() == district
    if not members.any():
        raise ValueError(f"district label {district} not present in plan")
    pop = float(graph.populations[members].sum())
    turnout = float(graph.turnouts[members].sum())
    if turnout > 0:
        share = float(graph.dem_votes[members].sum()) / turnout
        urbanity = float(graph.urban_voters[members].sum()) / turnout
    else:
        share, urbanity = 0.5, 0.0
    return DistrictProfile(district, pop, turnout, share, urbanity)


def _district_sums(values: np.ndarray, assignment: np.ndarray, k: int) -> np.ndarray:
    return np.bincount(assignment - 1, weights=values, minlength=k)


def district_shares(graph: PrecinctGraph, plan: Plan) -> np.ndarray:
    """Vector of dem_share for districts 1..k (0.5 where turnout is zero)."""
    _check_plan_shape(graph, plan)
    a = plan.as_array()
    k = plan.n_districts
    turnout = _district_sums(graph.turnouts, a, k)
    dem = _district_sums(graph.dem_votes, a, k)
    with np.errstate(invalid="ignore", divide="ignore"):
        shares = np.where(turnout > 0, dem / np.where(turnout > 0, turnout, 1.0), 0.5)
    return shares


def district_urbanities(graph: PrecinctGraph, plan: Plan) -> np.ndarray:
    """Vector of urbanity for districts 1..k (0.0 where turnout is zero)."""
    _check_plan_shape(graph, plan)
    a = plan.as_array()
    k = plan.n_districts
    turnout = _district_sums(graph.turnouts, a, k)
    urban = _district_sums(graph.urban_voters, a, k)
    return np.where(turnout > 0, urban / np.where(turnout > 0, turnout, 1.0), 0.0)


def is_contiguous(graph: PrecinctGraph, plan: Plan) -> bool:
    """True iff every district induces a connected subgraph."""
    _check_plan_shape(graph, plan)
    a = plan.assignment
    by_district: dict[int, list[int]] = {}
    for i, d in enumerate(a):
        by_district.setdefault(d, []).append(i)
    return all(_connected(graph, nodes) for nodes in by_district.values())


def max_pop_deviation(graph: PrecinctGraph, plan: Plan) -> float:
    """Max over districts of |pop - ideal| / ideal with ideal = total / k."""
    _check_plan_shape(graph, plan)
    a = plan.as_array()
    k = plan.n_districts
    pops = _district_sums(graph.populations, a, k)
    ideal = graph.populations.sum() / k
    if ideal == 0:
        return 0.0
    return float(np.abs(pops - ideal).max() / ideal)


def county_splits(graph: PrecinctGraph, plan: Plan) -> int:
    """Sum over counties of (number of districts touched - 1)."""
    _check_plan_shape(graph, plan)
    touched: dict[str, set[int]] = {}
    for p, d in zip(graph.precincts, plan.assignment):
        touched.setdefault(p.county, set()).add(d)
    return sum(len(ds) - 1 for ds in touched.values())


def canonicalize(assignment: Sequence[int]) -> Plan:
    """Relabel districts so they are numbered by first appearance in index order."""
    mapping: dict[int, int] = {}
    out: list[int] = []
    for lab in assignment:
        if lab not in mapping:
            mapping[lab] = len(mapping) + 1
        out.append(mapping[lab])
    return Plan(tuple(out))
