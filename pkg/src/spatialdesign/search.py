"""Stochastic coordinate exchange over discrete candidate designs.

Within each sweep, every design coordinate is exchanged against all
unused candidates; the best proposal then faces the incumbent in a
stochastic acceptance test on fresh utility draws. Two acceptance
criteria are available: the rank-based one-sided Wilcoxon test (which
makes no normality assumption about the utility draws) and the pooled
t-statistic used by approximate coordinate exchange. Multiple random
starts run independently; the final ranking re-estimates every start's
best design with a larger draw budget.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.base import BaseEstimator

from .exceptions import SearchError
from .problems import prepare_design
from .utility import UtilitySample, estimate_utility
from .utils import as_generator


# -- acceptance statistics ------------------------------------------------------

def _midranks(pooled: np.ndarray) -> np.ndarray:
    order = np.argsort(pooled, kind="mergesort")
    ranks = np.empty(len(pooled))
    sorted_vals = pooled[order]
    i = 0
    while i < len(pooled):
        j = i
        while j + 1 < len(pooled) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _ranksum_tail_counts(n: int, k: int) -> np.ndarray:
    """counts[s] = number of k-subsets of {1..n} with rank sum s."""
    max_sum = n * (n + 1) // 2
    counts = np.zeros((k + 1, max_sum + 1), dtype=object)
    counts[0][0] = 1
    for item in range(1, n + 1):
        for kk in range(min(item, k), 0, -1):
            counts[kk][item:] = counts[kk][item:] + counts[kk - 1][:-item]
    return counts[k]


def wilcoxon_p(x, y) -> float:
    """One-sided Wilcoxon rank-sum p-value for H1: x shifted right of y.

    Tie-free samples with at most 20 values use exact enumeration of the
    rank-sum null distribution, with the upper tail capped at
    1 - 1/C(n, n1) so the p-value never degenerates to 1. Larger or tied
    samples use the normal approximation with tie-corrected variance and
    a continuity correction (mid-ranks for ties).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 1 or len(y) < 1:
        raise SearchError("wilcoxon_p needs non-empty samples")
    n1, n2 = len(x), len(y)
    n = n1 + n2
    pooled = np.concatenate([x, y])
    has_ties = len(np.unique(pooled)) < n

    if n <= 20 and not has_ties:
        ranks = np.argsort(np.argsort(pooled)) + 1
        w_obs = int(ranks[:n1].sum())
        counts = _ranksum_tail_counts(n, n1)
        total = int(math.comb(n, n1))
        tail = int(sum(counts[w_obs:]))
        return min(tail / total, 1.0 - 1.0 / total)

    ranks = _midranks(pooled)
    u = float(ranks[:n1].sum()) - n1 * (n1 + 1) / 2.0
    mu = n1 * n2 / 2.0
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_sum = float(np.sum(tie_counts.astype(float) ** 3 - tie_counts))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_sum / (n * (n - 1)))
    if var <= 0:
        return 0.5
    z = (u - mu - 0.5) / math.sqrt(var)
    return float(stats.norm.sf(z))


def ace_p(x, y) -> float:
    """Acceptance probability of the t-statistic criterion.

    Both samples must hold the same number B >= 2 of utility draws; the
    statistic compares the sample means against the pooled per-draw
    variance on 2B-2 degrees of freedom. Returns 0.5 when the means are
    equal, and saturates at 0/1 when the pooled variance vanishes with
    unequal means.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise SearchError("ace_p needs equally sized samples")
    b = len(x)
    if b < 2:
        raise SearchError("ace_p needs at least B=2 draws per design")
    vb = (np.sum((x - x.mean()) ** 2) + np.sum((y - y.mean()) ** 2)) / (2 * b - 2)
    diff = b * (x.mean() - y.mean())
    if vb == 0:
        return 0.5 if diff == 0 else (1.0 if diff > 0 else 0.0)
    t = diff / math.sqrt(2 * b * vb)
    return float(stats.t.cdf(t, df=2 * b - 2))


# -- design container and evaluation --------------------------------------------

@dataclass(frozen=True)
class Design:
    """Ordered design coordinates plus, optionally, the utility draws that
    produced its summary."""

    coords: tuple
    utility_sample: UtilitySample | None = None

    @property
    def summary(self) -> float | None:
        return None if self.utility_sample is None else self.utility_sample.summary


class UtilityEvaluator:
    """Median/mean utility of candidate designs, with optional common
    random numbers.

    With ``crn_seed`` set, every evaluation of a design re-uses the same
    utility draw streams, so the summary becomes a deterministic function
    of the design (and results are memoised); otherwise draws come from
    the caller's stream.
    """

    def __init__(
        self,
        model=None,
        domain=None,
        summary: str = "median",
        fixed: tuple = (),
        mz: int = 50,
        crn_seed: int | None = None,
        n_jobs: int = 1,
        draw_fn=None,
    ):
        if draw_fn is None and (model is None or domain is None):
            raise SearchError("need either a model and domain or an explicit draw_fn")
        self.model = model
        self.domain = domain
        self.summary_mode = summary
        self.fixed = tuple(fixed)
        self.mz = mz
        self.crn_seed = crn_seed
        self.n_jobs = n_jobs
        self.draw_fn = draw_fn
        self._prepared: dict = {}
        self._memo: dict = {}

    def _key(self, coords) -> tuple:
        return tuple(sorted(coords))

    def _prepare(self, coords):
        key = self._key(coords)
        if key not in self._prepared:
            self._prepared[key] = prepare_design(
                self.model, self.domain, key + self.fixed
            )
        return self._prepared[key]

    def sample(self, coords, n_draws: int, rng=None) -> UtilitySample:
        if self.crn_seed is not None:
            memo_key = (self._key(coords), n_draws)
            if memo_key in self._memo:
                return self._memo[memo_key]
            stream = np.random.default_rng(self.crn_seed)
        else:
            if rng is None:
                raise SearchError("need a random stream when common random numbers are off")
            stream = rng
        if self.draw_fn is not None:
            draws = np.asarray(self.draw_fn(self._key(coords), n_draws, stream), dtype=float)
            sample = UtilitySample(draws, tuple(coords), self.summary_mode)
        else:
            _, sample = estimate_utility(
                self._prepare(coords),
                n_draws,
                mode=self.summary_mode,
                rng=stream,
                mz=self.mz,
                n_jobs=self.n_jobs,
            )
        if self.crn_seed is not None:
            self._memo[memo_key] = sample
        return sample

    def summary(self, coords, n_draws: int, rng=None) -> float:
        return self.sample(coords, n_draws, rng).summary


def exhaustive_oracle(
    model,
    domain,
    candidates,
    gamma: int,
    m_draws: int,
    seed: int,
    summary: str = "median",
    fixed: tuple = (),
    mz: int = 50,
    budget: int = 10_000,
    draw_fn=None,
) -> Design:
    """Evaluate every gamma-subset with common random numbers and return
    the argmax (validation oracle for small instances)."""
    candidates = sorted(set(candidates))
    n_subsets = math.comb(len(candidates), gamma)
    if n_subsets > budget:
        raise SearchError(f"{n_subsets} subsets exceed the oracle budget {budget}")
    evaluator = UtilityEvaluator(
        model, domain, summary=summary, fixed=fixed, mz=mz, crn_seed=seed,
        draw_fn=draw_fn,
    )
    best, best_sample, best_val = None, None, -np.inf
    for combo in itertools.combinations(candidates, gamma):
        sample = evaluator.sample(combo, m_draws)
        val = sample.summary
        if val > best_val or (val == best_val and combo < best):
            best, best_sample, best_val = combo, sample, val
    return Design(best, best_sample)


# -- the exchange loop -----------------------------------------------------------

@dataclass(frozen=True)
class TraceRecord:
    start: int
    sweep: int
    coord: int
    incumbent_u: float
    proposal_u: float
    p_accept: float
    accepted: bool


@dataclass
class StartResult:
    start: int
    design: Design
    trace: list[TraceRecord] = field(default_factory=list)


class CoordinateExchange(BaseEstimator):
    """Stochastic coordinate-exchange design search.

    Parameters
    ----------
    model : ModelSpec
        Likelihood family, fixed effects and priors.
    domain : StreamNetwork or ReefDomain
        Spatial domain the candidate coordinates live on.
    design_size : int
        Number of exchangeable design coordinates (gamma).
    n_starts, n_sweeps : int
        Random restarts (K) and outer sweeps per start (T).
    draws_proposal, draws_accept, draws_final : int
        Utility draws per exchange evaluation (M), per acceptance test
        side (B) and for the final ranking of the per-start bests (B_final).
    acceptance : {"wilcoxon", "ace"}
        Acceptance statistic; both map better proposals to probabilities
        near 1.
    summary : {"median", "mean"}
        Central tendency of the utility draws.
    threshold_accept : bool
        Accept deterministically when the acceptance probability exceeds
        0.5, instead of accepting with that probability (ablation flag).
    crn_seed : int or None
        Common random numbers for all utility evaluations; makes the
        utility a deterministic function of the design.
    fixed : tuple
        Design coordinates always present but never exchanged.
    random_state : int or None
        Seed for start initialisation and acceptance randomisation.
    utility_fn : callable or None
        Override ``(coords, n_draws, rng) -> draws`` replacing the model
        utility; for ablations and synthetic landscapes.
    evaluator : UtilityEvaluator or None
        Pre-built evaluator to reuse (e.g. to share memoised
        common-random-number draws across several searches).

    Attributes
    ----------
    best_design_ : Design
    per_start_ : list of StartResult
    trace_ : list of TraceRecord
    """

    def __init__(
        self,
        model=None,
        domain=None,
        design_size: int = 1,
        n_starts: int = 5,
        n_sweeps: int = 15,
        draws_proposal: int = 20,
        draws_accept: int = 40,
        draws_final: int = 100,
        acceptance: str = "wilcoxon",
        summary: str = "median",
        threshold_accept: bool = False,
        crn_seed: int | None = None,
        fixed: tuple = (),
        mz: int = 50,
        n_jobs: int = 1,
        random_state: int | None = None,
        utility_fn=None,
        evaluator: UtilityEvaluator | None = None,
    ):
        self.model = model
        self.domain = domain
        self.design_size = design_size
        self.n_starts = n_starts
        self.n_sweeps = n_sweeps
        self.draws_proposal = draws_proposal
        self.draws_accept = draws_accept
        self.draws_final = draws_final
        self.acceptance = acceptance
        self.summary = summary
        self.threshold_accept = threshold_accept
        self.crn_seed = crn_seed
        self.fixed = fixed
        self.mz = mz
        self.n_jobs = n_jobs
        self.random_state = random_state
        self.utility_fn = utility_fn
        self.evaluator = evaluator

    # -- internals -------------------------------------------------------------

    def _check_config(self, candidates):
        if self.design_size < 1:
            raise SearchError("design_size must be >= 1")
        if len(set(candidates)) != len(candidates):
            raise SearchError("candidate coordinates must be distinct")
        if self.design_size > len(candidates):
            raise SearchError(
                f"design_size {self.design_size} exceeds {len(candidates)} candidates"
            )
        if set(self.fixed) & set(candidates):
            raise SearchError("fixed coordinates must not appear among the candidates")
        if self.acceptance not in ("wilcoxon", "ace"):
            raise SearchError(f"unknown acceptance criterion {self.acceptance!r}")
        if self.draws_accept < 2:
            raise SearchError("draws_accept must be >= 2")
        if self.draws_final < self.draws_accept:
            raise SearchError("draws_final must be >= draws_accept")
        if min(self.n_starts, self.n_sweeps, self.draws_proposal) < 1:
            raise SearchError("n_starts, n_sweeps and draws_proposal must be >= 1")

    def _p_accept(self, proposal_draws, incumbent_draws) -> float:
        if self.acceptance == "wilcoxon":
            return 1.0 - wilcoxon_p(proposal_draws, incumbent_draws)
        if len(proposal_draws) != len(incumbent_draws):
            m = min(len(proposal_draws), len(incumbent_draws))
            proposal_draws, incumbent_draws = proposal_draws[:m], incumbent_draws[:m]
        return ace_p(proposal_draws, incumbent_draws)

    def _run_start(self, k: int, evaluator, candidates, rng) -> StartResult:
        gamma = self.design_size
        idx = rng.choice(len(candidates), size=gamma, replace=False)
        design = tuple(candidates[i] for i in idx)
        incumbent_u = evaluator.summary(design, self.draws_proposal, rng.spawn(1)[0])
        trace: list[TraceRecord] = []

        for sweep in range(1, self.n_sweeps + 1):
            for j in range(gamma):
                pool = [c for c in candidates if c not in design]
                if not pool:
                    continue
                best_prop, best_u = None, -np.inf
                for c in pool:
                    proposal = design[:j] + (c,) + design[j + 1 :]
                    u = evaluator.summary(proposal, self.draws_proposal, rng.spawn(1)[0])
                    if u > best_u or (u == best_u and (best_prop is None or c < best_prop[j])):
                        best_prop, best_u = proposal, u
                prop_draws = evaluator.sample(
                    best_prop, self.draws_accept, rng.spawn(1)[0]
                ).draws
                inc_draws = evaluator.sample(
                    design, self.draws_accept, rng.spawn(1)[0]
                ).draws
                p = self._p_accept(prop_draws, inc_draws)
                if self.threshold_accept:
                    accepted = p > 0.5
                else:
                    accepted = bool(rng.uniform() < p)
                trace.append(
                    TraceRecord(k, sweep, j, incumbent_u, best_u, p, accepted)
                )
                if accepted:
                    design, incumbent_u = best_prop, best_u

        return StartResult(k, Design(design), trace)

    # -- estimator API -----------------------------------------------------------

    def fit(self, candidates, y=None):
        """Run the search over ``candidates`` (site ids or coordinate
        tuples); sets ``best_design_``, ``per_start_`` and ``trace_``."""
        candidates = list(candidates)
        self._check_config(candidates)
        rng = as_generator(self.random_state)
        evaluator = self.evaluator
        if evaluator is None:
            evaluator = UtilityEvaluator(
                self.model,
                self.domain,
                summary=self.summary,
                fixed=tuple(self.fixed),
                mz=self.mz,
                crn_seed=self.crn_seed,
                n_jobs=self.n_jobs,
                draw_fn=self.utility_fn,
            )
        start_streams = rng.spawn(self.n_starts)
        results = [
            self._run_start(k, evaluator, candidates, start_streams[k])
            for k in range(self.n_starts)
        ]

        final_stream = rng.spawn(1)[0]
        best = None
        for res in results:
            sample = evaluator.sample(
                res.design.coords, self.draws_final, final_stream.spawn(1)[0]
            )
            res.design = Design(res.design.coords, sample)
            if (
                best is None
                or res.design.summary > best.summary
                or (res.design.summary == best.summary and res.design.coords < best.coords)
            ):
                best = res.design

        self.evaluator_ = evaluator
        self.per_start_ = results
        self.trace_ = [rec for res in results for rec in res.trace]
        self.best_design_ = best
        return self


# -- artifact export -------------------------------------------------------------

def trace_frame(trace: list[TraceRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "start": r.start,
                "sweep": r.sweep,
                "coord": r.coord,
                "incumbent_u": r.incumbent_u,
                "proposal_u": r.proposal_u,
                "p_accept": r.p_accept,
                "accepted": r.accepted,
            }
            for r in trace
        ],
        columns=[
            "start",
            "sweep",
            "coord",
            "incumbent_u",
            "proposal_u",
            "p_accept",
            "accepted",
        ],
    )


def save_trace(trace: list[TraceRecord], path):
    trace_frame(trace).to_csv(path, index=False)
