"""Analytic bounds on the critical density and critical inverse processing gain.

Cluster coefficients are computed for the max-rule graph: given radii r_i,
r_j, r_k, node i sits uniformly in the disk of radius max(r_i, r_k) around k,
node j in the disk of radius max(r_j, r_k), and i, j are linked when their
distance is at most max(r_i, r_j).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, stats

from .model import (
    AttenuationModel,
    BinaryPower,
    BinaryRadius,
    ConstantPower,
    ConstantRadius,
    ModelError,
    PowerDistribution,
    PowerLawRadius,
    SinrParams,
    UniformPower,
    radius_bounds,
    radius_of,
)

# cluster coefficient of the equal-radius random geometric graph
C_EQUAL = 1.0 - 3.0 * math.sqrt(3.0) / (4.0 * math.pi)
SITE_THRESHOLD = 0.5  # site percolation on the triangular lattice
FLOWER_PHI = math.asin(0.25)
FLOWER_K = math.pi - 6.0 * FLOWER_PHI - 3.0 * math.sqrt(3.0) * (math.sqrt(5.0) - 1.0) / 8.0

QUAD_TOL = 1e-10


class QuadratureError(RuntimeError):
    def __init__(self, what, residual, tol):
        super().__init__(f"{what}: quadrature residual {residual:.3g} exceeds tolerance {tol:.3g}")
        self.residual = residual


def _quad(f, a, b, what, tol=QUAD_TOL, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        pts = None
        if points is not None:
            pts = sorted(p for p in points if a < p < b) or None
        val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=tol, limit=400, points=pts)
    if not err <= max(tol, 1e3 * tol * abs(val)) * 10:
        raise QuadratureError(what, err, tol)
    return val


# --- lens geometry ---------------------------------------------------------


def _acos(x):
    return math.acos(min(1.0, max(-1.0, x)))


def lens_area(h: float, r_small: float, r_big: float) -> float:
    """Area of the intersection of disks (radius r_small, r_big) whose centres are h apart."""
    if h < 0 or r_small < 0 or r_big < 0:
        raise ModelError("lens geometry needs non-negative inputs")
    if r_small > r_big:
        r_small, r_big = r_big, r_small
    if h >= r_small + r_big:
        return 0.0
    if h <= r_big - r_small or h * r_small == 0.0:
        # the second test catches underflow for subnormal h, where the lens is the small disk
        return math.pi * r_small * r_small
    phi = _acos((h * h + r_small * r_small - r_big * r_big) / (2.0 * h * r_small))
    theta = _acos((h * h + r_big * r_big - r_small * r_small) / (2.0 * h * r_big))
    return max(0.0, phi * r_small ** 2 + theta * r_big ** 2 - h * r_small * math.sin(phi))


def lens_fraction(h: float, r_small: float, r_big: float) -> float:
    """Intersection area divided by the area of the larger disk."""
    if r_small > r_big:
        raise ModelError("lens_fraction expects r_small <= r_big")
    if r_big == 0:
        return 0.0
    return lens_area(h, r_small, r_big) / (math.pi * r_big * r_big)


@lru_cache(maxsize=1 << 16)
def same_disk_coefficient(s: float) -> float:
    """P(|X - Y| <= s) for X, Y uniform in the unit disk, 0 < s <= 1."""
    if s <= 0:
        return 0.0
    s = min(s, 1.0)
    return 2.0 * _quad(lambda h: lens_fraction(h, s, 1.0) * h, 0.0, 1.0, "same-disk", points=[1.0 - s])


@lru_cache(maxsize=1 << 16)
def nested_coefficient(s: float) -> float:
    """P(|X - Y| <= 1) for X uniform in the disk of radius s <= 1, Y in the unit disk."""
    if s <= 0:
        return 1.0
    s = min(s, 1.0)
    inner = _quad(lambda h: lens_fraction(h, s, 1.0) * h, 0.0, 1.0, "nested", points=[1.0 - s])
    return 2.0 * inner / (s * s)


def case_coefficient(case: int, r_i: float, r_j: float, r_k: float) -> float:
    """Conditional coefficient for one radius ordering (assumes r_j >= r_i).

    case 1: r_k >= r_j >= r_i, both points in the disk of r_k, link at r_j.
    case 2: r_j >= r_k >= r_i, i in the disk of r_k, j in the disk of r_j.
    case 3: r_j >= r_i >= r_k, i in the disk of r_i, j in the disk of r_j.
    Only the ratios of radii matter.
    """
    if case == 1:
        return same_disk_coefficient(r_j / r_k)
    if case == 2:
        return nested_coefficient(r_k / r_j)
    if case == 3:
        return nested_coefficient(r_i / r_j)
    raise ValueError(f"unknown case {case}")


def conditional_coefficient(r_i: float, r_j: float, r_k: float) -> float:
    if r_i > r_j:
        r_i, r_j = r_j, r_i
    if r_k >= r_j:
        return case_coefficient(1, r_i, r_j, r_k)
    if r_k >= r_i:
        return case_coefficient(2, r_i, r_j, r_k)
    return case_coefficient(3, r_i, r_j, r_k)


# --- radius distributions --------------------------------------------------


@dataclass(frozen=True)
class RadiusDistribution:
    """Transmission-radius law on [lo, hi]: either atoms or a density."""

    lo: float
    hi: float
    atoms: tuple = ()  # ((radius, weight), ...)
    pdf: object = None
    cdf: object = None

    @property
    def discrete(self) -> bool:
        return bool(self.atoms)

    @classmethod
    def from_law(cls, law: PowerDistribution, params: SinrParams | None = None,
                 model: AttenuationModel | None = None) -> "RadiusDistribution":
        if isinstance(law, ConstantRadius):
            return cls(law.r, law.r, ((law.r, 1.0),))
        if isinstance(law, BinaryRadius):
            return cls(law.a, law.b, _merge_atoms([(law.a, law.weight_a), (law.b, 1.0 - law.weight_a)]))
        if isinstance(law, PowerLawRadius):
            return cls(law.r_lo, law.r_hi, pdf=law.pdf, cdf=law.cdf)
        if params is None or model is None:
            raise ModelError("power-specified law needs params and model to induce radii")
        if isinstance(law, ConstantPower):
            r = float(radius_of(law.p, params, model))
            return cls(r, r, ((r, 1.0),))
        if isinstance(law, BinaryPower):
            ra = float(radius_of(law.p_a, params, model))
            rb = float(radius_of(law.p_b, params, model))
            return cls(min(ra, rb), max(ra, rb), _merge_atoms([(ra, law.weight_a), (rb, 1.0 - law.weight_a)]))
        if isinstance(law, UniformPower):
            lo, hi = radius_bounds(law, params, model)
            if lo == hi:
                return cls(lo, lo, ((lo, 1.0),))
            nb = params.noise_threshold

            def pdf(r):
                # f_R(r) = -f_P(N0 b / L(r)) * N0 b / L(r)^2 * L'(r)
                lr = model(r)
                return -law.pdf(nb / lr) * nb / lr ** 2 * model.derivative(r)

            def cdf(r):
                return law.cdf(nb / model(np.clip(r, lo, hi)))

            return cls(lo, hi, pdf=pdf, cdf=cdf)
        raise ModelError(f"no radius distribution for {law!r}")

    def F(self, r: float) -> float:
        if self.discrete:
            return float(sum(w for a, w in self.atoms if a <= r))
        if r <= self.lo:
            return 0.0
        if r >= self.hi:
            return 1.0
        return float(self.cdf(r))

    def total_mass(self) -> float:
        if self.discrete:
            return float(sum(w for _, w in self.atoms))
        return _quad(lambda r: float(self.pdf(r)), self.lo, self.hi, "density mass")

    def g(self, r: float) -> float:
        """r^2 + 2 * integral_r^hi r' (1 - F(r')) dr'."""
        if r >= self.hi:
            return r * r
        pts = [a for a, _ in self.atoms] if self.discrete else None
        tail = _quad(lambda x: x * (1.0 - self.F(x)), r, self.hi, "g(r)", points=pts)
        return r * r + 2.0 * tail

    def mean_degree_integral(self) -> float:
        """integral of g(r) f_R(r) dr (mean degree of the max-rule graph / (lambda pi))."""
        if self.discrete:
            return float(sum(w * self.g(a) for a, w in self.atoms))
        return _quad(lambda r: self.g(r) * float(self.pdf(r)), self.lo, self.hi, "mean degree", tol=1e-9)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.discrete:
            vals = np.array([a for a, _ in self.atoms])
            w = np.array([w for _, w in self.atoms])
            return rng.choice(vals, size=size, p=w / w.sum())
        # inverse-cdf on a fine grid; only used by Monte Carlo checks
        grid = np.linspace(self.lo, self.hi, 4097)
        cdf = np.array([self.F(x) for x in grid])
        return np.interp(rng.random(size), cdf, grid)


def _merge_atoms(atoms):
    merged = {}
    for r, w in atoms:
        if w > 0:
            merged[float(r)] = merged.get(float(r), 0.0) + float(w)
    return tuple(sorted(merged.items()))


# --- cluster coefficients --------------------------------------------------


def cluster_coeff_c3(dist: RadiusDistribution, tol: float = 1e-8) -> float:
    """Third-order cluster coefficient of the max-rule graph.

    Atoms are summed exactly over all radius triples. For a density, the
    innermost radius of each ordered case is integrated out through F, which
    leaves 2 * iint_{a<=b} [c1(a/b) + 2 c2(a/b)] F(a) f(a) f(b) da db.
    """
    if dist.discrete:
        total = 0.0
        for ri, wi in dist.atoms:
            for rj, wj in dist.atoms:
                for rk, wk in dist.atoms:
                    total += wi * wj * wk * conditional_coefficient(ri, rj, rk)
        return total
    lo, hi = dist.lo, dist.hi

    def inner(b):
        fb = float(dist.pdf(b))
        if fb == 0.0:
            return 0.0
        return fb * _quad(
            lambda a: (same_disk_coefficient(a / b) + 2.0 * nested_coefficient(a / b))
            * dist.F(a) * float(dist.pdf(a)),
            lo, b, "cluster coefficient (inner)", tol=tol,
        )

    return 2.0 * _quad(inner, lo, hi, "cluster coefficient (outer)", tol=tol)


def cluster_coeff_binary(a: float, b: float, p_a: float, p_b: float) -> float:
    """Cluster coefficient for radii a (prob p_a) and b (prob p_b), 0 < a <= b.

    Triples with two b's (or all equal) give the equal-radius value; the
    three triples with two a's and one b contribute one same-disk term
    (k has radius b) and two nested terms (k has radius a).
    """
    if not 0 < a <= b:
        raise ModelError(f"binary radii need 0 < a <= b, got {a}, {b}")
    if p_a < 0 or p_b < 0 or abs(p_a + p_b - 1.0) > 1e-12:
        raise ModelError(f"weights must be non-negative and sum to 1, got {p_a} + {p_b}")
    s = a / b
    mixed = same_disk_coefficient(s) + 2.0 * nested_coefficient(s)
    return (p_b ** 3 + p_a ** 3 + 3.0 * p_b ** 2 * p_a) * C_EQUAL + p_b * p_a ** 2 * mixed


def binary_coefficient_as_printed(a: float, b: float, p_a: float, p_b: float) -> float:
    """The closed binary expression in its combined single-integrand form (diagnostic; disagrees with MC)."""

    def integrand(h):
        if h == 0:
            return 0.0
        phi = _acos((h * h + a * a - b * b) / (2.0 * a * h))
        theta = _acos((h * h + b * b - a * a) / (2.0 * b * h))
        return ((phi + theta) * (a * a + b * b) + h * math.sin(theta) * (a + b)) * h

    tail = _quad(integrand, 0.0, b, "printed binary form", points=[b - a, a])
    return (p_b ** 3 + p_a ** 3 + 3.0 * p_b ** 2 * p_a) * C_EQUAL + p_b * p_a ** 2 * 2.0 / (math.pi * b ** 4) * tail


def cluster_coeff_monte_carlo(dist: RadiusDistribution, samples: int, seed: int = 0, chunk: int = 1_000_000):
    """Direct simulation of the conditional adjacency probability.

    Returns (estimate, standard error).
    """
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        ri, rj, rk = (dist.sample(rng, m) for _ in range(3))
        xi = _uniform_disk(rng, m, np.maximum(ri, rk))
        xj = _uniform_disk(rng, m, np.maximum(rj, rk))
        d = np.hypot(*(xi - xj).T)
        hits += int(np.count_nonzero(d <= np.maximum(ri, rj)))
        done += m
    p = hits / samples
    return p, math.sqrt(p * (1.0 - p) / samples)


def _uniform_disk(rng, m, radius):
    rho = radius * np.sqrt(rng.random(m))
    ang = rng.random(m) * 2.0 * math.pi
    return np.column_stack((rho * np.cos(ang), rho * np.sin(ang)))


# --- density bounds --------------------------------------------------------


def lambda_lower_bound(dist: RadiusDistribution, coeff: float) -> float:
    """Cluster-coefficient lower bound 1 / ((1 - C) pi integral g f)."""
    if not 0.0 < coeff < 1.0:
        raise ModelError(f"cluster coefficient must lie in (0, 1), got {coeff}")
    if not dist.hi > 0:
        raise ModelError("degenerate radius support")
    return 1.0 / ((1.0 - coeff) * math.pi * dist.mean_degree_integral())


def binary_lower_bound(b: float, coeff: float) -> float:
    """Binary-radius lower bound 1 / (pi (1 - C) b^2)."""
    if not 0.0 < coeff < 1.0 or not b > 0:
        raise ModelError("need 0 < coeff < 1 and b > 0")
    return 1.0 / (math.pi * (1.0 - coeff) * b * b)


def flower_area(r_under: float) -> float:
    return 0.25 * FLOWER_K * r_under * r_under


def lambda_upper_bound(r_under: float):
    """Triangular-lattice upper bound. Returns (bound, flower area)."""
    if not r_under > 0:
        raise ModelError("r_under must be > 0")
    s_f = flower_area(r_under)
    return -math.log(1.0 - SITE_THRESHOLD) / s_f, s_f


# --- gamma bound -----------------------------------------------------------


@dataclass(frozen=True)
class GammaBound:
    available: bool
    gamma_upper: float = math.nan
    d: float = math.nan
    expected_count: float = math.nan  # E[N(H_a)]
    theta: float = math.nan
    c2: float = math.nan
    c2_prime: float = math.nan
    n_prime: int = -1  # at gamma slightly above gamma_upper
    p_open: float = math.nan
    lambda_prime_c: float = math.nan
    lambda_prime_source: str = ""
    reason: str = ""

    def to_dict(self):
        return asdict(self)


def hexagon_count(density: float, d: float) -> float:
    return density * 1.5 * math.sqrt(3.0) * d * d


def theta_for(d: float, lambda_prime_c: float) -> float:
    return math.sqrt(10.0) / (d * 27.0 ** 0.25 * math.sqrt(lambda_prime_c))


def n_prime(gamma: float, d: float, p_min: float, p_max: float, params: SinrParams, model: AttenuationModel) -> int:
    """Hexagon occupancy above which every node in it is isolated."""
    if not gamma > 0:
        raise ModelError("N' needs gamma > 0")
    nb = params.noise_threshold
    return int(math.ceil((p_max - nb) / (gamma * params.beta * p_min * float(model(2.0 * d))))) + 2


def open_probability(count_threshold: int, expected_count: float) -> float:
    return float(stats.poisson.cdf(count_threshold, expected_count))


def path_survival_bound(m: int, p_o: float) -> float:
    """Union bound on an open lattice path of length m: (6/5)(5 p_o)^m, capped at 1."""
    if m < 1 or not 0.0 <= p_o <= 1.0:
        raise ModelError("need m >= 1 and p_o in [0, 1]")
    return min(1.0, 1.2 * (5.0 * p_o) ** m)


def _gamma_at(density, d, p_min, p_max, params, model, lambda_prime_c):
    nb = params.noise_threshold
    e = hexagon_count(density, d)
    th = theta_for(d, lambda_prime_c)
    slack = (1.0 - th) * e - 3.0
    l2d = float(model(2.0 * d))
    if slack <= 0:
        return None, e, th, l2d
    return (p_max - nb) / (params.beta * p_min * l2d * slack), e, th, l2d


def gamma_upper_bound(density: float, power: PowerDistribution, params: SinrParams, model: AttenuationModel,
                      lambda_prime_c: float, d: float | str = "auto", *, source: str = "user",
                      d_grid: int = 400) -> GammaBound:
    """Hexagonal-lattice upper bound gamma_2 on the critical inverse processing gain."""
    if power.specifies_radius:
        raise ModelError("gamma bound needs a power-specified law")
    p_min, p_max = power.support
    nb = params.noise_threshold
    common = dict(lambda_prime_c=lambda_prime_c, lambda_prime_source=source)
    if not density > lambda_prime_c:
        return GammaBound(False, reason=f"density {density} <= lambda'_c {lambda_prime_c}", **common)
    if not p_max > nb:
        return GammaBound(False, reason="p_max <= beta N0", **common)
    r_bar = float(radius_of(p_max, params, model))

    if d == "auto":
        best = None
        for cand in np.geomspace(r_bar * (1 + 1e-9), r_bar * 200.0, d_grid):
            g2 = _gamma_at(density, cand, p_min, p_max, params, model, lambda_prime_c)[0]
            if g2 is not None and (best is None or g2 < best[0]):
                best = (g2, float(cand))
        if best is None:
            return GammaBound(False, reason="no admissible hexagon edge: (1-theta)E[N]-3 <= 0 on the grid", **common)
        d = best[1]
    d = float(d)
    if not d > r_bar:
        return GammaBound(False, d=d, reason=f"hexagon edge {d} <= r_bar {r_bar}", **common)
    g2, e, th, l2d = _gamma_at(density, d, p_min, p_max, params, model, lambda_prime_c)
    if g2 is None:
        return GammaBound(False, d=d, expected_count=e, theta=th,
                          reason="(1-theta)E[N(H_a)] - 3 <= 0", **common)
    c2 = 2.0 * math.sqrt(3.0) * (p_max - nb) / (9.0 * (1.0 - th) * params.beta * p_min * l2d * d * d)
    c2p = 2.0 * math.sqrt(3.0) / (3.0 * (1.0 - th) * d * d)
    npr = n_prime(g2 * (1.0 + 1e-9), d, p_min, p_max, params, model)
    return GammaBound(True, g2, d, e, th, c2, c2p, npr, open_probability(npr, e), **common)


# --- reports ---------------------------------------------------------------


@dataclass(frozen=True)
class BoundsReport:
    lambda_lower: float
    lambda_upper: float
    cluster_coefficient: float
    coefficient_method: str
    flower_area: float
    r_under: float
    r_bar: float
    printed_coefficient: float = math.nan
    gamma: GammaBound | None = None

    def to_dict(self):
        out = asdict(self)
        return out


def density_bounds(law: PowerDistribution, params: SinrParams | None = None,
                   model: AttenuationModel | None = None) -> BoundsReport:
    dist = RadiusDistribution.from_law(law, params, model)
    if len(dist.atoms) == 2:
        (a, pa), (b, pb) = dist.atoms
        coeff = cluster_coeff_binary(a, b, pa, pb)
        printed = binary_coefficient_as_printed(a, b, pa, pb)
        method = "binary closed form"
        lower = binary_lower_bound(b, coeff)
    else:
        coeff = cluster_coeff_c3(dist)
        printed = math.nan
        method = "atom sum" if dist.discrete else "quadrature"
        lower = lambda_lower_bound(dist, coeff)
    upper, s_f = lambda_upper_bound(dist.lo)
    return BoundsReport(lower, upper, coeff, method, s_f, dist.lo, dist.hi, printed)


def binary_bounds_table(b_values, a: float = 1.0, p_a: float = 0.5):
    """Rows of (b, coefficient, lower, upper, printed coefficient) for binary radii (a, b)."""
    rows = []
    for b in b_values:
        b = float(b)
        if b == a:
            coeff, printed = C_EQUAL, C_EQUAL
        else:
            coeff = cluster_coeff_binary(a, b, p_a, 1.0 - p_a)
            printed = binary_coefficient_as_printed(a, b, p_a, 1.0 - p_a)
        rows.append({
            "b": b,
            "coefficient": coeff,
            "lower": binary_lower_bound(b, coeff),
            "upper": lambda_upper_bound(a)[0],
            "printed_coefficient": printed,
        })
    return rows
