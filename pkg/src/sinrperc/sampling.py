"""Uniform / Poisson node placement with reproducible, per-purpose RNG streams."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import (
    AttenuationModel,
    ModelError,
    PowerDistribution,
    SinrParams,
    power_of_radius,
    radius_of,
)

HARD_BOX = "hard_box"
TORUS = "torus"


@dataclass(frozen=True)
class Region:
    width: float
    height: float
    boundary: str = HARD_BOX

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0) or not (
            math.isfinite(self.width) and math.isfinite(self.height)
        ):
            raise ModelError(f"region needs finite positive sides, got {self.width} x {self.height}")
        if self.boundary not in (HARD_BOX, TORUS):
            raise ModelError(f"unknown boundary {self.boundary!r}")

    @classmethod
    def square_for(cls, n: int, density: float, boundary: str = HARD_BOX) -> "Region":
        """The box [0, sqrt(n / density)]^2 holding n nodes at the given density."""
        side = math.sqrt(n / density)
        return cls(side, side, boundary)

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def torus(self) -> bool:
        return self.boundary == TORUS


@dataclass(frozen=True, eq=False)
class Configuration:
    """Node positions plus per-node power (or radius, for radius-specified laws)."""

    positions: np.ndarray
    powers: np.ndarray | None
    region: Region
    density: float
    seed: int
    radii: np.ndarray | None = None
    mode: str = "fixed_n"

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "positions", pos)
        for name in ("powers", "radii"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != (pos.shape[0],):
                    raise ModelError(f"{name} length {arr.shape} does not match {pos.shape[0]} positions")
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        if self.powers is None and self.radii is None:
            raise ModelError("configuration needs powers or radii")
        pos.setflags(write=False)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def node_radii(self, params: SinrParams | None = None, model: AttenuationModel | None = None) -> np.ndarray:
        if self.radii is not None:
            return self.radii
        if params is None or model is None:
            raise ModelError("power-specified configuration needs params and model to get radii")
        return np.atleast_1d(radius_of(self.powers, params, model)) if self.n else np.zeros(0)

    def node_powers(self, params: SinrParams | None = None, model: AttenuationModel | None = None) -> np.ndarray:
        if self.powers is not None:
            return self.powers
        if params is None or model is None:
            raise ModelError("radius-specified configuration needs params and model to get powers")
        return np.asarray(power_of_radius(self.radii, params, model), dtype=float).reshape(-1)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.positions).tobytes())
        for arr in (self.powers, self.radii):
            h.update(b"-" if arr is None else np.ascontiguousarray(arr).tobytes())
        h.update(repr((self.region, self.density, self.seed)).encode())
        return h.hexdigest()[:16]

    def header(self) -> dict:
        return {
            "width": self.region.width,
            "height": self.region.height,
            "boundary": self.region.boundary,
            "density": self.density,
            "seed": self.seed,
            "mode": self.mode,
        }

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(self.header(), sort_keys=True) + "\n")
            w = csv.writer(fh)
            w.writerow(["x", "y", "power", "radius"])
            for i in range(self.n):
                w.writerow([
                    repr(float(self.positions[i, 0])),
                    repr(float(self.positions[i, 1])),
                    "" if self.powers is None else repr(float(self.powers[i])),
                    "" if self.radii is None else repr(float(self.radii[i])),
                ])

    @classmethod
    def from_csv(cls, path: str | Path) -> "Configuration":
        with open(path, newline="") as fh:
            first = fh.readline()
            if not first.startswith("#"):
                raise ModelError(f"{path}: missing configuration header line")
            meta = json.loads(first[1:])
            rows = list(csv.DictReader(fh))
        pos = np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2)
        powers = None if not rows or rows[0]["power"] == "" else np.array([float(r["power"]) for r in rows])
        radii = None if not rows or rows[0]["radius"] == "" else np.array([float(r["radius"]) for r in rows])
        region = Region(meta["width"], meta["height"], meta["boundary"])
        if powers is None and radii is None:
            powers = np.zeros(0)
        return cls(pos, powers, region, meta["density"], meta["seed"], radii, meta.get("mode", "fixed_n"))


def streams(seed, *spawn_key: int) -> dict[str, np.random.Generator]:
    """Independent counter-based (Philox) generators for each sampling purpose."""
    root = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in spawn_key))
    count_ss, pos_ss, mark_ss = root.spawn(3)
    return {
        "count": np.random.Generator(np.random.Philox(count_ss)),
        "positions": np.random.Generator(np.random.Philox(pos_ss)),
        "marks": np.random.Generator(np.random.Philox(mark_ss)),
    }


def sample_configuration(
    density: float,
    region: Region,
    power: PowerDistribution,
    n: int | None = None,
    seed: int = 0,
    *,
    mode: str = "fixed_n",
    spawn_key: tuple = (),
) -> Configuration:
    """Place nodes uniformly in `region`.

    mode="fixed_n" places exactly n nodes; mode="poisson_count" draws the count
    from Poisson(density * area) first.
    """
    if not density > 0 or not math.isfinite(density):
        raise ModelError(f"density must be positive and finite, got {density}")
    rng = streams(seed, *spawn_key)
    if mode == "fixed_n":
        if n is None or n < 1:
            raise ModelError("fixed_n mode needs n >= 1")
        count = int(n)
    elif mode == "poisson_count":
        mean = density * region.area
        if not math.isfinite(mean) or mean > 1e12:
            raise ModelError(f"expected node count {mean} too large")
        count = int(rng["count"].poisson(mean))
    else:
        raise ModelError(f"unknown sampling mode {mode!r}")

    pos = rng["positions"].random((count, 2)) * np.array([region.width, region.height])
    marks = power.sample(rng["marks"], count)
    if power.specifies_radius:
        return Configuration(pos, None, region, density, seed, radii=marks, mode=mode)
    return Configuration(pos, marks, region, density, seed, mode=mode)
