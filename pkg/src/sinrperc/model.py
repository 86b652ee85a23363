"""Physical model: SINR parameters, power/radius laws and attenuation functions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq


class ModelError(ValueError):
    """Raised for out-of-domain model inputs (negative distances, unreachable gains...)."""


@dataclass(frozen=True)
class SinrParams:
    beta: float
    n0: float
    gamma: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ModelError(f"beta must be > 0, got {self.beta}")
        if not self.n0 >= 0:
            raise ModelError(f"n0 must be >= 0, got {self.n0}")
        if not self.gamma >= 0:
            raise ModelError(f"gamma must be >= 0, got {self.gamma}")

    @property
    def noise_threshold(self) -> float:
        """Received power needed to decode with no interference (N0 * beta)."""
        return self.n0 * self.beta

    def with_gamma(self, gamma: float) -> "SinrParams":
        return SinrParams(self.beta, self.n0, gamma)


# --- attenuation ----------------------------------------------------------


@dataclass(frozen=True)
class ShiftedPowerLaw:
    """L(d) = (d + shift) ** -exponent."""

    exponent: float = 3.0
    shift: float = 1.0

    def __post_init__(self):
        if not self.exponent > 0 or not self.shift >= 0:
            raise ModelError("shifted power law needs exponent > 0 and shift >= 0")

    @classmethod
    def from_noise(cls, params: SinrParams, exponent: float = 3.0) -> "ShiftedPowerLaw":
        # shift = (2 N0 beta)^(-1/exponent) gives L(0) = 2 N0 beta
        return cls(exponent, (2.0 * params.noise_threshold) ** (-1.0 / exponent))

    def __call__(self, d):
        u = np.asarray(d, dtype=float) + self.shift
        with np.errstate(divide="ignore"):
            if self.exponent == 3.0:
                return 1.0 / (u * u * u)
            return np.power(u, -self.exponent)

    def derivative(self, d):
        d = np.asarray(d, dtype=float)
        return -self.exponent * np.power(d + self.shift, -self.exponent - 1.0)

    def at_zero(self) -> float:
        return math.inf if self.shift == 0 else self.shift ** -self.exponent

    def inverse(self, y):
        return np.power(np.asarray(y, dtype=float), -1.0 / self.exponent) - self.shift


@dataclass(frozen=True)
class TableAttenuation:
    """Attenuation sampled on a distance grid.

    Interpolated with a monotone cubic (PCHIP) in log-gain; beyond the last
    sample the curve continues as a power law fitted to the last two samples.
    """

    distances: tuple
    gains: tuple
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float)
        g = np.asarray(self.gains, dtype=float)
        if d.ndim != 1 or d.shape != g.shape or d.size < 2:
            raise ModelError("attenuation table needs two equal-length columns with >= 2 rows")
        if d[0] != 0.0:
            raise ModelError("attenuation table must start at distance 0")
        if np.any(np.diff(d) <= 0):
            raise ModelError("attenuation table distances must be strictly increasing")
        if np.any(g <= 0) or np.any(np.diff(g) >= 0):
            raise ModelError("attenuation table gains must be positive and strictly decreasing")
        object.__setattr__(self, "distances", tuple(d.tolist()))
        object.__setattr__(self, "gains", tuple(g.tolist()))
        object.__setattr__(self, "_interp", PchipInterpolator(d, np.log(g)))

    @classmethod
    def from_csv(cls, path) -> "TableAttenuation":
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if rows:
                        raise
                    continue  # header line
        d, g = zip(*rows)
        return cls(d, g)

    @classmethod
    def sample(cls, model, distances) -> "TableAttenuation":
        distances = np.asarray(distances, dtype=float)
        return cls(tuple(distances), tuple(model(distances)))

    @property
    def _tail(self):
        d = self.distances
        g = self.gains
        slope = math.log(g[-1] / g[-2]) / math.log(d[-1] / d[-2]) if d[-2] > 0 else -3.0
        return d[-1], g[-1], slope

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        d_last, g_last, slope = self._tail
        inside = np.exp(self._interp(np.minimum(d, d_last)))
        outside = g_last * np.power(np.maximum(d, d_last) / d_last, slope)
        return np.where(d <= d_last, inside, outside)

    def derivative(self, d):
        d = np.asarray(d, dtype=float)
        d_last, g_last, slope = self._tail
        inside = self._interp.derivative()(np.minimum(d, d_last)) * self(np.minimum(d, d_last))
        dd = np.maximum(d, d_last)
        outside = slope * g_last * np.power(dd / d_last, slope) / dd
        return np.where(d <= d_last, inside, outside)

    def at_zero(self) -> float:
        return self.gains[0]

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        out = np.array([_bisect_inverse(self, float(v)) for v in y.ravel()])
        return out.reshape(y.shape)


AttenuationModel = Union[ShiftedPowerLaw, TableAttenuation]


def _bisect_inverse(model, y: float) -> float:
    if y == model.at_zero():
        return 0.0
    hi = 1.0
    while model(hi) > y:
        hi *= 2.0
        if hi > 1e15:
            raise ModelError(f"no finite distance with gain {y}")
    return brentq(lambda d: float(model(d)) - y, 0.0, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)


def attenuation_eval(model: AttenuationModel, d):
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < 0) or np.any(np.isnan(d_arr)):
        raise ModelError("distance must be >= 0")
    out = model(d_arr)
    return float(out) if np.ndim(out) == 0 else out


def attenuation_inverse(model: AttenuationModel, y):
    """Distance d with L(d) = y; y must lie in (0, L(0)]."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr <= 0) or np.any(y_arr > model.at_zero()):
        raise ModelError(f"gain {y} outside (0, L(0)={model.at_zero()}]: no finite radius")
    out = np.maximum(model.inverse(y_arr), 0.0)
    return float(out) if np.ndim(out) == 0 else out


# --- power and radius laws -------------------------------------------------


@dataclass(frozen=True)
class ConstantPower:
    p: float
    specifies_radius = False

    def __post_init__(self):
        _check_support(self.p, self.p)

    @property
    def support(self):
        return (self.p, self.p)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, float(self.p))


@dataclass(frozen=True)
class BinaryPower:
    p_a: float
    p_b: float
    weight_a: float = 0.5
    specifies_radius = False

    def __post_init__(self):
        _check_support(min(self.p_a, self.p_b), max(self.p_a, self.p_b))
        _check_weight(self.weight_a)

    @property
    def support(self):
        return (min(self.p_a, self.p_b), max(self.p_a, self.p_b))

    def sample(self, rng, size):
        return np.where(rng.random(size) < self.weight_a, float(self.p_a), float(self.p_b))


@dataclass(frozen=True)
class UniformPower:
    p_min: float
    p_max: float
    specifies_radius = False

    def __post_init__(self):
        _check_support(self.p_min, self.p_max)

    @property
    def support(self):
        return (self.p_min, self.p_max)

    def sample(self, rng, size):
        return rng.uniform(self.p_min, self.p_max, size)

    def cdf(self, p):
        if self.p_max == self.p_min:
            return np.where(np.asarray(p) >= self.p_min, 1.0, 0.0)
        return np.clip((np.asarray(p, dtype=float) - self.p_min) / (self.p_max - self.p_min), 0.0, 1.0)

    def pdf(self, p):
        p = np.asarray(p, dtype=float)
        inside = (p >= self.p_min) & (p <= self.p_max)
        return np.where(inside, 1.0 / (self.p_max - self.p_min), 0.0)


# Radius-specified laws: the gamma = 0 experiments are parameterised by the
# transmission radius itself, so these sample radii and skip L^-1 entirely.


@dataclass(frozen=True)
class ConstantRadius:
    r: float
    specifies_radius = True

    def __post_init__(self):
        _check_support(self.r, self.r, what="radius")

    @property
    def support(self):
        return (self.r, self.r)

    def sample(self, rng, size):
        return np.full(size, float(self.r))


@dataclass(frozen=True)
class BinaryRadius:
    a: float
    b: float
    weight_a: float = 0.5
    specifies_radius = True

    def __post_init__(self):
        if not 0 < self.a <= self.b < math.inf:
            raise ModelError(f"binary radii need 0 < a <= b, got a={self.a}, b={self.b}")
        _check_weight(self.weight_a)

    @property
    def support(self):
        return (self.a, self.b)

    def sample(self, rng, size):
        return np.where(rng.random(size) < self.weight_a, float(self.a), float(self.b))


@dataclass(frozen=True)
class PowerLawRadius:
    """Radius density c * r**-alpha on [r_lo, r_hi]."""

    alpha: float = 3.0
    r_lo: float = 1.0
    r_hi: float = 2.0
    specifies_radius = True

    def __post_init__(self):
        _check_support(self.r_lo, self.r_hi, what="radius")

    @property
    def support(self):
        return (self.r_lo, self.r_hi)

    @property
    def norm(self) -> float:
        a, lo, hi = self.alpha, self.r_lo, self.r_hi
        if hi == lo:
            return math.inf
        if a == 1.0:
            return 1.0 / math.log(hi / lo)
        return (1.0 - a) / (hi ** (1.0 - a) - lo ** (1.0 - a))

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        inside = (r >= self.r_lo) & (r <= self.r_hi)
        return np.where(inside, self.norm * np.power(r, -self.alpha), 0.0)

    def cdf(self, r):
        r = np.clip(np.asarray(r, dtype=float), self.r_lo, self.r_hi)
        a = self.alpha
        if a == 1.0:
            return self.norm * np.log(r / self.r_lo)
        return self.norm * (np.power(r, 1.0 - a) - self.r_lo ** (1.0 - a)) / (1.0 - a)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        a = self.alpha
        if self.r_hi == self.r_lo:
            return np.full_like(u, self.r_lo)
        if a == 1.0:
            return self.r_lo * np.exp(u / self.norm)
        return np.power(self.r_lo ** (1.0 - a) + u * (1.0 - a) / self.norm, 1.0 / (1.0 - a))

    def sample(self, rng, size):
        return self.ppf(rng.random(size))


PowerDistribution = Union[
    ConstantPower, BinaryPower, UniformPower, ConstantRadius, BinaryRadius, PowerLawRadius
]


def _check_support(lo, hi, what="power"):
    if not (0 < lo <= hi < math.inf):
        raise ModelError(f"{what} support needs 0 < min <= max < inf, got [{lo}, {hi}]")


def _check_weight(w):
    if not 0.0 <= w <= 1.0:
        raise ModelError(f"binary weight must lie in [0, 1], got {w}")


# --- derived quantities -----------------------------------------------------


def radius_of(power, params: SinrParams, model: AttenuationModel):
    """Noise-limited transmission radius L^-1(N0 beta / P)."""
    p = np.asarray(power, dtype=float)
    return attenuation_inverse(model, params.noise_threshold / p)


def power_of_radius(radius, params: SinrParams, model: AttenuationModel):
    """Power whose noise-limited radius is `radius` (inverse of radius_of)."""
    return params.noise_threshold / model(np.asarray(radius, dtype=float))


def radius_bounds(power: PowerDistribution, params: SinrParams, model: AttenuationModel):
    lo, hi = power.support
    if power.specifies_radius:
        return float(lo), float(hi)
    return float(radius_of(lo, params, model)), float(radius_of(hi, params, model))


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    witness: float
    note: str = ""


@dataclass(frozen=True)
class ModelValidationReport:
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def format(self) -> str:
        lines = []
        for c in self.checks:
            flag = "ok  " if c.passed else "FAIL"
            lines.append(f"{flag} {c.name:<20} witness={c.witness:.6g} {c.note}".rstrip())
        return "\n".join(lines)


def tail_integral(model: AttenuationModel, y: float, tol=1e-10, max_doublings=40):
    """Integrate L(x) x over [y, 2^k y] until a doubling adds less than tol.

    Returns (integral, converged, k).
    """
    y = y if y > 0 else 1.0
    total = 0.0
    a = y
    for k in range(1, max_doublings + 1):
        b = 2.0 * a
        inc, _ = quad(lambda x: float(model(x)) * x, a, b, epsabs=tol * 1e-3, limit=200)
        total += inc
        if abs(inc) < tol:
            return total, True, k
        a = b
    return total, False, max_doublings


def validate_model(power: PowerDistribution, params: SinrParams, model: AttenuationModel) -> ModelValidationReport:
    checks = []
    lo, hi = power.support
    checks.append(Check("support", bool(0 < lo <= hi < math.inf), float(lo)))

    grid = np.concatenate(([0.0], np.geomspace(1e-6, 1e6, 400)))
    vals = np.asarray(model(grid), dtype=float)
    positive = grid > 0
    finite = np.all(np.isfinite(vals[positive]))
    max_gain = float(np.max(vals[positive])) if finite else math.inf
    checks.append(Check("gain_below_one", finite and max_gain < 1.0, max_gain, "L(x) < 1 for x > 0"))

    steps = np.diff(vals)
    mono = bool(np.all(np.isfinite(steps[1:])) and np.all(steps[1:] < 0) and vals[0] >= vals[1])
    checks.append(Check("strictly_decreasing", mono, float(np.max(steps[1:])) if steps.size > 1 else 0.0))

    if power.specifies_radius:
        checks.append(Check("radius_law", True, float(lo), "radii given directly; power checks skipped"))
        y_tail = hi
    else:
        floor = params.noise_threshold
        checks.append(Check("p_min_margin", lo >= floor, lo - floor, "p_min >= beta N0"))
        l0 = model.at_zero()
        need = floor / lo
        checks.append(Check("L0_margin", l0 > need, l0 - need, "L(0) > beta N0 / p_min"))
        try:
            y_tail = radius_of(hi, params, model)
        except ModelError:
            y_tail = 1.0
    total, converged, k = tail_integral(model, float(y_tail))
    checks.append(Check("shot_noise_tail", converged, total, f"doublings={k}"))
    return ModelValidationReport(tuple(checks))


def load_attenuation_table(path: str | Path) -> TableAttenuation:
    return TableAttenuation.from_csv(path)
