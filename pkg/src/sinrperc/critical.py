"""Monte Carlo sweeps and noisy bisection for critical density / critical gamma.

A replicate "percolates" for a component type when the largest component of
that type holds at least `theta_frac` of the nodes. The critical point is where
the replicate frequency of that event crosses `target` (0.5 by default).
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import isotonic_regression
from scipy.stats import binomtest

from .components import TYPES, giant_stats
from .graph import build_directed
from .model import AttenuationModel, ModelError, PowerDistribution, SinrParams
from .sampling import HARD_BOX, Region, sample_configuration

DENSITY = "density"
GAMMA = "gamma"


@dataclass(frozen=True)
class Setup:
    """Everything fixed across a sweep except the swept value."""

    law: PowerDistribution
    params: SinrParams
    model: AttenuationModel | None = None
    density: float | None = None  # required when sweeping gamma
    boundary: str = HARD_BOX
    mode: str = "fixed_n"


def replicate_fractions(setup: Setup, parameter: str, value: float, n: int, seed: int, key: tuple) -> np.ndarray:
    """Largest in/out/weak/strong fractions for one sampled graph."""
    if parameter == DENSITY:
        density, params = value, setup.params
    else:
        density, params = setup.density, setup.params.with_gamma(value)
    region = Region.square_for(n, density, setup.boundary)
    config = sample_configuration(density, region, setup.law, n, seed, mode=setup.mode, spawn_key=key)
    stats = giant_stats(build_directed(config, params, setup.model))
    return np.array([stats.fraction(t) for t in TYPES])


class BudgetExceeded(RuntimeError):
    """Wall-clock deadline passed before the requested graphs were built."""


def _run_one(args):
    return replicate_fractions(*args)


def _check_deadline(deadline):
    if deadline is not None and time.monotonic() > deadline:
        raise BudgetExceeded("runtime budget exceeded")


def _map(fn, jobs, workers, deadline=None):
    if workers and workers > 1 and len(jobs) > 1:
        out = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            step = 4 * workers
            for i in range(0, len(jobs), step):
                _check_deadline(deadline)
                out.extend(pool.map(fn, jobs[i:i + step]))
        return out
    out = []
    for j in jobs:
        _check_deadline(deadline)
        out.append(fn(j))
    return out


def value_key(x: float) -> int:
    """Stable integer key of a float, used to derive replicate seeds."""
    return int.from_bytes(struct.pack("<d", float(x)), "little")


def wilson(successes: int, trials: int, level: float = 0.95):
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(successes, trials).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


# --- sweeps ----------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    grid: tuple
    setup: Setup
    n: int = 4000
    replications: int = 40
    base_seed: int = 0
    theta_frac: float = 0.1

    def __post_init__(self):
        if self.parameter not in (DENSITY, GAMMA):
            raise ModelError(f"unknown swept parameter {self.parameter!r}")
        grid = tuple(float(x) for x in self.grid)
        if not grid:
            raise ModelError("sweep grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ModelError("sweep grid must be strictly increasing")
        if self.replications < 1 or self.n < 1:
            raise ModelError("replications and n must be >= 1")
        if self.parameter == GAMMA and self.setup.density is None:
            raise ModelError("gamma sweep needs a fixed density")
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True, eq=False)
class SweepResult:
    spec: SweepSpec
    fractions: np.ndarray  # (points, replications, 4)

    @property
    def percolated(self) -> np.ndarray:
        return self.fractions >= self.spec.theta_frac

    def mean_fraction(self) -> np.ndarray:
        return self.fractions.mean(axis=1)

    def frequency(self) -> np.ndarray:
        return self.percolated.mean(axis=1)

    def rows(self):
        perc = self.percolated
        reps = self.spec.replications
        for p, x in enumerate(self.spec.grid):
            for t, kind in enumerate(TYPES):
                k = int(perc[p, :, t].sum())
                lo, hi = wilson(k, reps)
                yield {
                    self.spec.parameter: x,
                    "type": kind,
                    "mean_fraction": float(self.fractions[p, :, t].mean()),
                    "frequency": k / reps,
                    "ci_half_width": (hi - lo) / 2.0,
                    "replications": reps,
                }

    def to_csv(self, path, provenance: dict | None = None) -> None:
        rows = list(self.rows())
        with open(path, "w", newline="") as fh:
            if provenance is not None:
                fh.write("# " + json.dumps(provenance, sort_keys=True) + "\n")
            fh.write("# columns: " + ",".join(rows[0]) + "\n")
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def run_sweep(spec: SweepSpec, workers: int = 1, deadline: float | None = None) -> SweepResult:
    jobs = [
        (spec.setup, spec.parameter, x, spec.n, spec.base_seed, (p, r))
        for p, x in enumerate(spec.grid)
        for r in range(spec.replications)
    ]
    out = np.array(_map(_run_one, jobs, workers, deadline))
    return SweepResult(spec, out.reshape(len(spec.grid), spec.replications, len(TYPES)))


# --- bisection ---------------------------------------------------------------


class Evaluator:
    """Cached replicate fractions keyed by (swept value, replicate index).

    Sharing one evaluator across component types gives common random numbers.
    """

    def __init__(self, fn: Callable[[float, int], np.ndarray], workers: int = 1, batch_fn=None):
        self.fn = fn
        self.batch_fn = batch_fn
        self.workers = workers
        self.cache: dict = {}

    @classmethod
    def for_setup(cls, setup: Setup, parameter: str, n: int, base_seed: int, workers: int = 1,
                  deadline: float | None = None):
        def batch(value, reps):
            jobs = [(setup, parameter, value, n, base_seed, (value_key(value), r)) for r in reps]
            return _map(_run_one, jobs, workers, deadline)

        return cls(None, workers, batch_fn=batch)

    @property
    def graphs(self) -> int:
        return len(self.cache)

    def fractions(self, value: float, reps) -> np.ndarray:
        todo = [r for r in reps if (value, r) not in self.cache]
        if todo:
            if self.batch_fn is not None:
                res = self.batch_fn(value, todo)
            else:
                res = [self.fn(value, r) for r in todo]
            for r, f in zip(todo, res):
                self.cache[(value, r)] = np.asarray(f, dtype=float)
        return np.array([self.cache[(value, r)] for r in reps])


@dataclass
class CriticalEstimate:
    kind: str
    parameter: str
    estimate: float
    interval: tuple
    status: str  # ok | budget_exhausted | no_transition
    method: str = "bisection"
    replications: int = 0
    graphs_used: int = 0
    theta_frac: float = 0.1
    target: float = 0.5
    observations: list = field(default_factory=list)  # (value, successes, trials)
    provenance: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.status != "no_transition"

    def contains(self, lo: float, hi: float) -> bool:
        return self.found and lo < self.interval[0] and self.interval[1] < hi

    def to_dict(self):
        d = asdict(self)
        d["interval"] = list(self.interval)
        return d

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n")


class _Bisection:
    def __init__(self, evaluator, kind_index, increasing, theta, target, replications, budget):
        self.ev = evaluator
        self.t = kind_index
        self.increasing = increasing
        self.theta = theta
        self.target = target
        self.reps = replications
        self.budget = budget
        self.obs: dict = {}  # value -> [successes, trials]
        self.used = 0

    def measure(self, x):
        s, n = self.obs.get(x, (0, 0))
        reps = range(n, n + self.reps)
        fr = self.ev.fractions(x, reps)
        self.used += self.reps
        s += int(np.count_nonzero(fr[:, self.t] >= self.theta))
        n += self.reps
        self.obs[x] = (s, n)
        return s, n

    def side(self, x, retry=True):
        """'sub' / 'super' when the 95% interval excludes target, else 'unclear'."""
        s, n = self.measure(x)
        lo, hi = wilson(s, n)
        if hi < self.target:
            return "sub"
        if lo > self.target:
            return "super"
        if retry and self.used + self.reps <= self.budget:
            return self.side(x, retry=False)
        return "unclear"

    def left_is(self):
        # side expected at the low end of the parameter range
        return "sub" if self.increasing else "super"

    def run(self, lo, hi, resolution):
        left, right = self.left_is(), ("super" if self.increasing else "sub")
        if self.side(lo) != left or self.side(hi) != right:
            return lo, hi, "no_transition"
        centre = None
        while hi - lo > resolution:
            if self.used + self.reps > self.budget:
                return lo, hi, "budget_exhausted"
            m = 0.5 * (lo + hi) if centre is None else None
            if m is not None:
                s = self.side(m)
                if s == left:
                    lo = m
                elif s == right:
                    hi = m
                else:
                    centre = m
                continue
            # an unclear midpoint: tighten from both sides towards it
            moved = False
            for end in ("lo", "hi"):
                if hi - lo <= resolution or self.used + self.reps > self.budget:
                    break
                x = 0.5 * ((lo if end == "lo" else hi) + centre)
                if abs(x - centre) < 0.25 * resolution:
                    continue
                s = self.side(x)
                if end == "lo" and s == left:
                    lo, moved = x, True
                elif end == "hi" and s == right:
                    hi, moved = x, True
            if not moved:
                break
        return lo, hi, "ok"

    def crossing(self, lo, hi):
        xs = np.array(sorted(self.obs))
        s = np.array([self.obs[x][0] for x in xs], dtype=float)
        n = np.array([self.obs[x][1] for x in xs], dtype=float)
        fit = isotonic_regression(s / n, weights=n, increasing=self.increasing).x
        inside = (xs >= lo) & (xs <= hi)
        xs, fit = xs[inside], fit[inside]
        for a, b, fa, fb in zip(xs, xs[1:], fit, fit[1:]):
            if (fa - self.target) * (fb - self.target) <= 0 and fa != fb:
                return float(a + (self.target - fa) * (b - a) / (fb - fa))
        return 0.5 * (lo + hi)


def bisect_critical(evaluator: Evaluator, kind: str, lo: float, hi: float, *, parameter: str = DENSITY,
                    increasing: bool = True, theta_frac: float = 0.1, target: float = 0.5,
                    replications: int = 40, resolution: float = 0.01, budget: int = 2000) -> CriticalEstimate:
    """Noisy bisection for the point where the percolation frequency crosses `target`."""
    if not lo < hi:
        raise ModelError("bisection needs lo < hi")
    b = _Bisection(evaluator, TYPES.index(kind), increasing, theta_frac, target, replications, budget)
    a, z, status = b.run(lo, hi, resolution)
    est = b.crossing(a, z) if status != "no_transition" else math.nan
    obs = [(float(x), int(s), int(n)) for x, (s, n) in sorted(b.obs.items())]
    return CriticalEstimate(kind, parameter, est, (float(a), float(z)), status, replications=replications,
                            graphs_used=b.used, theta_frac=theta_frac, target=target, observations=obs)


def estimate_critical_density(setup: Setup, kind: str = "strong", lo: float = 0.1, hi: float = 3.0, *,
                              n: int = 4000, replications: int = 40, base_seed: int = 0,
                              theta_frac: float = 0.1, resolution: float = 0.01, budget: int = 2000,
                              workers: int = 1, evaluator: Evaluator | None = None) -> CriticalEstimate:
    if setup.params.gamma != 0 and setup.model is None:
        raise ModelError("gamma > 0 needs an attenuation model")
    ev = evaluator or Evaluator.for_setup(setup, DENSITY, n, base_seed, workers)
    est = bisect_critical(ev, kind, lo, hi, parameter=DENSITY, increasing=True, theta_frac=theta_frac,
                          replications=replications, resolution=resolution, budget=budget)
    est.provenance = {"n": n, "base_seed": base_seed, "range": [lo, hi], "resolution": resolution,
                      "budget": budget, "setup": repr(setup)}
    return est


def estimate_critical_gamma(setup: Setup, kind: str = "strong", hi: float = 1.0, *, lo: float = 0.0,
                            n: int = 4000, replications: int = 40, base_seed: int = 0,
                            theta_frac: float = 0.1, resolution: float = 0.002, budget: int = 2000,
                            workers: int = 1, evaluator: Evaluator | None = None) -> CriticalEstimate:
    """Largest gamma that still percolates at the fixed density in `setup`."""
    if setup.density is None or setup.model is None:
        raise ModelError("critical gamma needs a fixed density and an attenuation model")
    ev = evaluator or Evaluator.for_setup(setup, GAMMA, n, base_seed, workers)
    est = bisect_critical(ev, kind, lo, hi, parameter=GAMMA, increasing=False, theta_frac=theta_frac,
                          replications=replications, resolution=resolution, budget=budget)
    if est.status == "no_transition":
        frac = est.observations[0][1] / est.observations[0][2] if est.observations else 0.0
        est.status = "never_percolates" if frac < 0.5 else "no_transition"
    est.provenance = {"n": n, "base_seed": base_seed, "density": setup.density, "range": [lo, hi],
                      "resolution": resolution, "budget": budget, "setup": repr(setup)}
    return est


@dataclass
class CoincidenceReport:
    estimates: dict  # kind -> CriticalEstimate
    max_gap: float
    relative_gap: float
    overlaps: dict  # "a/b" -> bool

    @property
    def all_overlap(self) -> bool:
        return all(self.overlaps.values())

    def to_dict(self):
        return {
            "estimates": {k: v.to_dict() for k, v in self.estimates.items()},
            "max_gap": self.max_gap,
            "relative_gap": self.relative_gap,
            "overlaps": self.overlaps,
        }


def coincidence_report(estimates: dict) -> CoincidenceReport:
    vals = [e.estimate for e in estimates.values()]
    if not all(math.isfinite(v) for v in vals):
        gap = rel = math.inf  # some type has no transition in range
    else:
        gap = max(vals) - min(vals)
        mean = float(np.mean(vals))
        rel = gap / mean if mean else math.inf
    overlaps = {}
    for a, b in itertools.combinations(estimates, 2):
        ia, ib = estimates[a].interval, estimates[b].interval
        ok = estimates[a].found and estimates[b].found
        overlaps[f"{a}/{b}"] = bool(ok and ia[0] <= ib[1] and ib[0] <= ia[1])
    return CoincidenceReport(estimates, float(gap), float(rel), overlaps)


def coincidence_check(setup: Setup, lo: float = 0.1, hi: float = 3.0, *, evaluator: Evaluator | None = None,
                      parameter: str = DENSITY, **kw) -> CoincidenceReport:
    """Critical estimates for all four component types on shared replicate graphs."""
    n = kw.pop("n", 4000)
    base_seed = kw.pop("base_seed", 0)
    workers = kw.pop("workers", 1)
    ev = evaluator or Evaluator.for_setup(setup, parameter, n, base_seed, workers)
    ests = {}
    for kind in TYPES:
        if parameter == DENSITY:
            ests[kind] = bisect_critical(ev, kind, lo, hi, parameter=DENSITY, increasing=True, **kw)
        else:
            ests[kind] = bisect_critical(ev, kind, lo, hi, parameter=GAMMA, increasing=False, **kw)
        ests[kind].provenance = {"n": n, "base_seed": base_seed, "shared_graphs": True}
    return coincidence_report(ests)


def two_size_crossing(spec: SweepSpec, kind: str = "strong", factor: int = 4, workers: int = 1):
    """Crossing of the percolation-frequency curves at n and factor * n.

    Returns (crossing or nan, small-n result, large-n result).
    """
    small = run_sweep(spec, workers)
    large = run_sweep(replace(spec, n=spec.n * factor), workers)
    t = TYPES.index(kind)
    diff = large.frequency()[:, t] - small.frequency()[:, t]
    grid = np.array(spec.grid)
    for i in range(len(grid) - 1):
        if diff[i] == 0:
            return float(grid[i]), small, large
        if diff[i] * diff[i + 1] < 0:
            x = grid[i] + diff[i] * (grid[i + 1] - grid[i]) / (diff[i] - diff[i + 1])
            return float(x), small, large
    return math.nan, small, large
