"""Monte Carlo search for steering revealed by random local filters."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import csv
import math
import os

import numpy as np

from steerfilter.filters import FilterEnsemble, apply_all
from steerfilter.qcore import StateParams, concurrence, validate_state
from steerfilter.steering import SolverConfig, SolverError, analytic_predicates, steering_radius

BRANCHES = ((1, 1), (1, 2), (2, 1), (2, 2))


@dataclass(frozen=True)
class SearchConfig:
    n_samples: int = 1000
    rng_seed: int = 0
    min_branch_prob: float = 1e-3
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(outer_seeds=8))
    verify_solver: SolverConfig = field(default_factory=SolverConfig)
    verify_top: int = 10
    threads: int = 1

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if not 0.0 < self.min_branch_prob <= 0.25:
            raise ValueError("min_branch_prob must lie in (0, 0.25]")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


@dataclass
class SampleRecord:
    index: int
    ensemble: FilterEnsemble
    probabilities: list
    r_ab: list  # NaN for skipped branches
    r_ba: list
    failures: int = 0


@dataclass
class SearchReport:
    params: StateParams
    concurrence: float
    max_radius_ab: float
    max_radius_ba: float
    argmax_ab: dict
    argmax_ba: dict
    samples_evaluated: int
    branches_skipped: int
    failures: int
    records: list = field(default_factory=list, repr=False)

    def summary(self):
        return {
            "params": None if self.params is None else {"theta": self.params.theta, "eta": self.params.eta},
            "concurrence": self.concurrence,
            "max_radius_ab": self.max_radius_ab,
            "max_radius_ba": self.max_radius_ba,
            "argmax_ab": self.argmax_ab,
            "argmax_ba": self.argmax_ba,
            "samples_evaluated": self.samples_evaluated,
            "branches_skipped": self.branches_skipped,
            "failures": self.failures,
        }


def sample_ensemble(rng):
    """Diagonal amplitudes drawn independently and uniformly from [0.01, 1]."""
    a = rng.uniform(0.01, 1.0, size=4)
    return FilterEnsemble(*map(float, a))


def _branch_rng(seed, index, branch):
    return np.random.default_rng(np.random.SeedSequence([seed, index, branch]))


def _evaluate_sample(rho, index, ens, cfg):
    outcomes = apply_all(rho, ens)
    rec = SampleRecord(index, ens, [o.probability for o in outcomes], [math.nan] * 4, [math.nan] * 4)
    for b, out in enumerate(outcomes):
        if out.degenerate or out.probability < cfg.min_branch_prob:
            continue
        try:
            rec.r_ab[b] = steering_radius(out.state, "A→B", cfg.solver, _branch_rng(cfg.rng_seed, index, 2 * b))[0]
            rec.r_ba[b] = steering_radius(out.state, "B→A", cfg.solver, _branch_rng(cfg.rng_seed, index, 2 * b + 1))[0]
        except SolverError:
            rec.failures += 1
            rec.r_ab[b] = rec.r_ba[b] = math.nan
    return rec


def _reverify(rho, records, cfg):
    """Re-run the strongest branches with the full outer-search budget."""
    cands = []
    for rec in records:
        for b in range(4):
            if not math.isnan(rec.r_ab[b]):
                cands.append((-max(rec.r_ab[b], rec.r_ba[b]), rec.index, b))
    cands.sort()
    by_index = {rec.index: rec for rec in records}
    for _, index, b in cands[:cfg.verify_top]:
        rec = by_index[index]
        state = apply_all(rho, rec.ensemble)[b].state
        try:
            r_ab = steering_radius(state, "A→B", cfg.verify_solver, _branch_rng(cfg.rng_seed, index, 8 + 2 * b))[0]
            r_ba = steering_radius(state, "B→A", cfg.verify_solver, _branch_rng(cfg.rng_seed, index, 9 + 2 * b))[0]
        except SolverError:
            rec.failures += 1
            continue
        # both searches return attained radii, so the larger value stands
        rec.r_ab[b] = max(rec.r_ab[b], r_ab)
        rec.r_ba[b] = max(rec.r_ba[b], r_ba)


def hidden_search(rho, cfg=SearchConfig(), params=None, progress=None):
    """Largest branch steering radii over ``cfg.n_samples`` random filter ensembles."""
    rho = validate_state(rho, (4,))
    rng = np.random.default_rng(cfg.rng_seed)
    ensembles = [sample_ensemble(rng) for _ in range(cfg.n_samples)]
    if cfg.threads > 1:
        # the compiled kernel releases the GIL; map keeps sample order
        with ThreadPoolExecutor(cfg.threads) as pool:
            records = list(pool.map(lambda ie: _evaluate_sample(rho, ie[0], ie[1], cfg), enumerate(ensembles)))
    else:
        records = []
        for i, ens in enumerate(ensembles):
            records.append(_evaluate_sample(rho, i, ens, cfg))
            if progress is not None:
                progress(i + 1, cfg.n_samples)
    _reverify(rho, records, cfg)
    best = {"ab": (-math.inf, None), "ba": (-math.inf, None)}
    evaluated = skipped = failures = 0
    for rec in records:
        failures += rec.failures
        for b in range(4):
            if math.isnan(rec.r_ab[b]):
                skipped += 1
                continue
            evaluated += 1
            for key, val in (("ab", rec.r_ab[b]), ("ba", rec.r_ba[b])):
                if val > best[key][0]:
                    best[key] = (val, {"sample": rec.index, "branch": list(BRANCHES[b]), "ensemble": rec.ensemble.to_json()})
    skipped -= failures
    return SearchReport(
        params, concurrence(rho),
        max(best["ab"][0], 0.0), max(best["ba"][0], 0.0),
        best["ab"][1], best["ba"][1], evaluated, skipped, failures, records)


def write_search_csv(report, dest):
    """One row per sample; ``dest`` is a path or an open text stream."""
    cols = ["sample", "a1", "a2", "b1", "b2"]
    cols += [f"p{i}{j}" for i, j in BRANCHES]
    cols += [f"r_ab_{i}{j}" for i, j in BRANCHES] + [f"r_ba_{i}{j}" for i, j in BRANCHES]
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="") as fh:
            write_search_csv(report, fh)
        return
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(cols)
    for rec in report.records:
        e = rec.ensemble
        w.writerow([rec.index, e.a1, e.a2, e.b1, e.b2, *rec.probabilities, *rec.r_ab, *rec.r_ba])


REGION_COLORS = {"two-way": "pink", "one-way-A→B": "blue", "two-way-unsteerable": "yellow"}


def sweep_state_map(theta_grid, eta_grid):
    """Region label of every grid point from the closed-form predicates."""
    theta_grid = list(theta_grid)
    eta_grid = list(eta_grid)
    if not theta_grid or not eta_grid:
        raise ValueError("grids must be non-empty")
    rows = []
    for eta in eta_grid:
        for theta in theta_grid:
            pred = analytic_predicates(StateParams(theta, eta))
            if not pred["ab_steerable_3set"]:
                region = "two-way-unsteerable"
            elif pred["oneway_window"]:
                region = "one-way-A→B"
            else:
                region = "two-way"
            rows.append({"theta": theta, "eta": eta, "region": region,
                         "color": REGION_COLORS[region], **pred})
    return rows


def with_threads(cfg, threads):
    return replace(cfg, threads=threads)
