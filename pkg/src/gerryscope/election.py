"""Stochastic uniform-partisan-swing election model.

Baseline precinct votes are shifted on the logit scale so the national
two-party share hits a chosen target, which makes election cycles with
different raw national environments directly comparable. Win probabilities
then come from a normal national swing shared across districts plus an
independent normal district swing, both on the logit scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PrecinctGraph

__all__ = [
    "SwingModel",
    "ShiftResult",
    "SHARE_CLAMP",
    "national_share",
    "rebaseline",
    "win_probability",
    "win_probabilities",
    "expected_seats",
    "simulate_elections",
]

# Unanimous precincts exist in real data; clamping keeps logits finite.
SHARE_CLAMP = 1e-6

_BISECT_LO = -20.0
_BISECT_HI = 20.0
_BISECT_MAX_ITER = 200
_SHARE_TOL = 1e-8


@dataclass(frozen=True)
class SwingModel:
    """Swing dispersions (logit units) and the target national share.

    The default sigmas are placeholders for desk-scale work; analyses that
    depend on them should set both explicitly.
    """

    sigma_national: float = 0.12
    sigma_district: float = 0.08
    target_share: float = 0.5

    def __post_init__(self) -> None:
        if self.sigma_national < 0 or self.sigma_district < 0:
            raise ValueError("swing sigmas must be >= 0")
        if not (0 < self.target_share < 1):
            raise ValueError("target_share must be in (0, 1)")

    @property
    def total_sigma(self) -> float:
        return math.hypot(self.sigma_national, self.sigma_district)


@dataclass(frozen=True)
class ShiftResult:
    """Outcome of one rebaselining: the logit shift applied and where it landed."""

    delta: float
    achieved_share: float
    n_clamped: int = 0


def _logit(p: np.ndarray | float):
    return np.log(p) - np.log1p(-p)


def _inv_logit(x: np.ndarray | float):
    return 1.0 / (1.0 + np.exp(-x))


def _clamp_shares(shares: np.ndarray) -> tuple[np.ndarray, int]:
    clamped = np.clip(shares, SHARE_CLAMP, 1.0 - SHARE_CLAMP)
    return clamped, int(np.sum(clamped != shares))


def national_share(graph: PrecinctGraph) -> float:
    """Turnout-weighted national two-party Democratic share."""
    total = graph.turnouts.sum()
    if total <= 0:
        raise ValueError("national share undefined: total turnout is zero")
    return float(graph.dem_votes.sum() / total)


def rebaseline(graph: PrecinctGraph, target: float) -> tuple[PrecinctGraph, ShiftResult]:
    """Shift every precinct share by one logit-scale delta to hit ``target``.

    The shift is order-preserving, so precinct share ranks are unchanged.
    Turnout, population, county, and urban-voter counts are untouched; only
    dem_votes moves. Zero-turnout precincts carry no votes and stay at zero.
    Delta is found by bisection on a monotone objective; non-convergence
    after the iteration cap signals pathological data and raises.
    """
    if not (0 < target < 1):
        raise ValueError("target share must be in (0, 1)")
    turnout = graph.turnouts
    total = turnout.sum()
    if total <= 0:
        raise ValueError("rebaseline undefined: total turnout is zero")

    voting = turnout > 0
    raw = np.full(graph.n, 0.5)
    raw[voting] = graph.dem_votes[voting] / turnout[voting]
    shares, n_clamped = _clamp_shares(raw)
    logits = _logit(shares)

    def achieved(delta: float) -> float:
        return float(np.sum(turnout * _inv_logit(logits + delta)) / total)

    lo, hi = _BISECT_LO, _BISECT_HI
    delta = 0.0
    for _ in range(_BISECT_MAX_ITER):
        delta = 0.5 * (lo + hi)
        got = achieved(delta)
        if abs(got - target) <= _SHARE_TOL * 0.1:
            break
        if got < target:
            lo = delta
        else:
            hi = delta
    got = achieved(delta)
    if abs(got - target) > _SHARE_TOL:
        raise RuntimeError(f"rebaseline did not converge: reached {got:.12f} for target {target}")

    new_dem = turnout * _inv_logit(logits + delta)
    new_dem[~voting] = 0.0
    return graph.replace_dem_votes(new_dem), ShiftResult(delta, got, n_clamped)


def win_probability(dem_share: float, model: SwingModel) -> float:
    """Probability the district's Democratic share exceeds 0.5 under the model.

    Closed form: Phi(logit(share) / total_sigma). Shares above 0.5 are
    evaluated by reflection so wp(s) + wp(1 - s) == 1 holds exactly.
    With both sigmas zero this degenerates to a step at 0.5.
    """
    s = min(max(dem_share, SHARE_CLAMP), 1.0 - SHARE_CLAMP)
    if s > 0.5:
        return 1.0 - win_probability(1.0 - s, model)
    if s == 0.5:
        return 0.5
    sigma = model.total_sigma
    if sigma == 0:
        return 0.0
    z = float(_logit(s)) / sigma
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def win_probabilities(dem_shares, model: SwingModel) -> np.ndarray:
    """Vector form of win_probability."""
    return np.array([win_probability(float(s), model) for s in np.asarray(dem_shares, dtype=float)])


def expected_seats(district_shares, model: SwingModel) -> float:
    """Sum of district win probabilities; additive over district subsets."""
    shares = np.asarray(district_shares, dtype=float)
    if shares.size == 0:
        return 0.0
    return float(win_probabilities(shares, model).sum())


def simulate_elections(district_shares, model: SwingModel, n_draws: int, seed: int) -> np.ndarray:
    """Monte Carlo seat counts under the swing model; the oracle for expected_seats.

    Each draw adds one shared national swing and independent district swings
    on the logit scale; a district is won when its shifted share is above 0.5,
    i.e. when its shifted logit is positive.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    shares = np.clip(np.asarray(district_shares, dtype=float), SHARE_CLAMP, 1.0 - SHARE_CLAMP)
    logits = _logit(shares)
    rng = np.random.default_rng(seed)
    if model.sigma_national > 0:
        national = rng.normal(0.0, model.sigma_national, size=(n_draws, 1))
    else:
        national = np.zeros((n_draws, 1))
    district = (
        rng.normal(0.0, model.sigma_district, size=(n_draws, logits.size)) if model.sigma_district > 0 else 0.0
    )
    shifted = logits[None, :] + national + district
    return (shifted > 0).sum(axis=1).astype(np.int64)
