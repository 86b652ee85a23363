"""Config-driven experiment runner.

    sinrperc run <config.ini> [--set section.key=value ...]
    sinrperc validate <config.ini>
    sinrperc replay <output-file>

Exit codes: 0 ok, 1 replay mismatch, 2 parse error, 3 model validation
failure, 4 runtime budget exceeded. Every output file starts with a
``# {json}`` provenance line (resolved config, its hash, seeds, version);
CSV files follow it with a ``# columns:`` line.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import binary_bounds_table, density_bounds, gamma_upper_bound
from .components import (IN_ONLY, OUT_ONLY, STRONG, TYPES, _check_root, component_labels,
                         component_report, giant_stats)
from .critical import (DENSITY, GAMMA, BudgetExceeded, Evaluator, Setup, SweepSpec, bisect_critical,
                       coincidence_check, run_sweep)
from .graph import SinrGraph, build_directed
from .model import (BinaryPower, BinaryRadius, ConstantPower, ConstantRadius, ModelError, PowerLawRadius,
                    ShiftedPowerLaw, SinrParams, UniformPower, load_attenuation_table, validate_model)
from .sampling import Configuration, Region, sample_configuration

OUTPUT_ROOT_ENV = "SINRPERC_OUTPUT_ROOT"
KINDS = ("snapshot", "sweep", "critical", "coincidence", "bounds", "gamma_bounds")
EXIT_OK, EXIT_MISMATCH, EXIT_PARSE, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2, 3, 4

_ROOT_KEY = 0x726F6F74  # spawn key of the root-choice stream, apart from replicate keys


class ConfigError(Exception):
    """Malformed config: missing key, bad number, empty grid..."""


# --- config ------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    name: str
    sections: dict = field(repr=False)  # resolved {section: {key: str}}
    base_dir: str = "."

    @property
    def echo(self) -> dict:
        """Sections as recorded in outputs; the worker count never changes results, so it is left out."""
        out = {k: dict(v) for k, v in self.sections.items()}
        out.get("run", {}).pop("workers", None)
        return out

    @property
    def digest(self) -> str:
        blob = json.dumps(self.echo, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section, key) -> str:
        v = self.get(section, key)
        if v is None or v.strip() == "":
            raise ConfigError(f"missing required key {section}.{key}")
        return v

    def number(self, section, key, default=None, cast=float):
        raw = self.get(section, key)
        if raw is None or raw.strip() == "":
            if default is None:
                raise ConfigError(f"missing required key {section}.{key}")
            return default
        try:
            return cast(raw)
        except ValueError:
            raise ConfigError(f"{section}.{key}: cannot parse {raw!r} as {cast.__name__}") from None

    def numbers(self, section, key, cast=float) -> tuple:
        raw = self.get(section, key)
        if raw is None:
            raise ConfigError(f"missing required key {section}.{key}")
        parts = [p for p in raw.replace(",", " ").split() if p]
        if not parts:
            raise ConfigError(f"{section}.{key}: grid is empty")
        try:
            vals = tuple(cast(p) for p in parts)
        except ValueError:
            raise ConfigError(f"{section}.{key}: cannot parse {raw!r} as a list of numbers") from None
        return vals

    def seeds(self, section="run", key="seeds") -> tuple:
        """'0-19' or '3, 5, 8' or a single integer."""
        raw = self.get(section, key, "0").strip()
        if "-" in raw and "," not in raw:
            a, _, b = raw.partition("-")
            try:
                lo, hi = int(a), int(b)
            except ValueError:
                raise ConfigError(f"{section}.{key}: bad seed range {raw!r}") from None
            if hi < lo:
                raise ConfigError(f"{section}.{key}: empty seed range {raw!r}")
            return tuple(range(lo, hi + 1))
        return self.numbers(section, key, int)

    def workers(self) -> int:
        raw = self.get("run", "workers", "auto")
        return os.cpu_count() or 1 if raw == "auto" else self.number("run", "workers", cast=int)

    def output_dir(self) -> Path:
        root = os.environ.get(OUTPUT_ROOT_ENV) or self.get("run", "output_root", "results")
        return Path(root) / self.name


def load_config(path, overrides=()) -> ExperimentConfig:
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (configparser.Error, UnicodeDecodeError) as e:
        raise ConfigError(f"{path}: {e}") from None
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from None
    return _resolve(parser, overrides, str(path.resolve().parent))


def config_from_sections(sections: dict, overrides=(), base_dir=".") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_dict(sections)
    return _resolve(parser, overrides, base_dir)


def _resolve(parser, overrides, base_dir) -> ExperimentConfig:
    for item in overrides:
        key, eq, value = item.partition("=")
        section, dot, opt = key.partition(".")
        if not eq or not dot or not opt:
            raise ConfigError(f"override {item!r} is not section.key=value")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, opt.strip(), value.strip())
    sections = {s: dict(parser.items(s)) for s in parser.sections()}
    table = sections.get("model", {}).get("table")
    if table:
        p = Path(table)
        sections["model"]["table"] = str(p if p.is_absolute() else (Path(base_dir) / p).resolve())
    kind = sections.get("experiment", {}).get("kind", "")
    if kind not in KINDS:
        raise ConfigError(f"experiment.kind must be one of {', '.join(KINDS)}; got {kind!r}")
    name = sections["experiment"].get("name") or kind
    return ExperimentConfig(kind, name, sections, base_dir)


def build_model(cfg: ExperimentConfig):
    """(law, params, attenuation) from the [model] section. Raises ModelError on invalid values."""
    params = SinrParams(cfg.number("model", "beta"), cfg.number("model", "n0"),
                        cfg.number("model", "gamma", 0.0))
    law_name = cfg.require("model", "law")
    num = lambda key, default=None: cfg.number("model", key, default)  # noqa: E731
    laws = {
        "constant_power": lambda: ConstantPower(num("p")),
        "binary_power": lambda: BinaryPower(num("p_a"), num("p_b"), num("weight_a", 0.5)),
        "uniform_power": lambda: UniformPower(num("p_min"), num("p_max")),
        "constant_radius": lambda: ConstantRadius(num("r")),
        "binary_radius": lambda: BinaryRadius(num("a"), num("b"), num("weight_a", 0.5)),
        "power_law_radius": lambda: PowerLawRadius(num("alpha", 3.0), num("r_lo", 1.0), num("r_hi", 2.0)),
    }
    if law_name not in laws:
        raise ConfigError(f"model.law must be one of {', '.join(laws)}; got {law_name!r}")
    law = laws[law_name]()

    att = cfg.get("model", "attenuation", "shifted_power")
    if att == "shifted_power":
        exponent = num("exponent", 3.0)
        shift = cfg.get("model", "shift", "auto")
        if shift == "auto":
            model = ShiftedPowerLaw.from_noise(params, exponent)
        else:
            model = ShiftedPowerLaw(exponent, num("shift"))
    elif att == "table":
        try:
            model = load_attenuation_table(cfg.require("model", "table"))
        except OSError as e:
            raise ConfigError(f"model.table: {e.strerror}: {e.filename}") from None
    else:
        raise ConfigError(f"model.attenuation must be shifted_power or table; got {att!r}")
    return law, params, model


def _setup(cfg, law, params, model, density=None) -> Setup:
    return Setup(law, params, model, density,
                 boundary=cfg.get("model", "boundary", "hard_box"),
                 mode=cfg.get("model", "mode", "fixed_n"))


# --- snapshots -------------------------------------------------------------

LABEL_NAMES = {0: "unrelated", STRONG: "strong", IN_ONLY: "in_only", OUT_ONLY: "out_only"}


@dataclass(frozen=True, eq=False)
class Snapshot:
    config: Configuration
    labels: tuple  # label name per node; the root is "root"
    root: int
    root_fractions: dict
    largest_fractions: dict

    def rows(self):
        cfg = self.config
        for i in range(cfg.n):
            yield {
                "node": i,
                "x": repr(float(cfg.positions[i, 0])),
                "y": repr(float(cfg.positions[i, 1])),
                "power": "" if cfg.powers is None else repr(float(cfg.powers[i])),
                "radius": "" if cfg.radii is None else repr(float(cfg.radii[i])),
                "label": self.labels[i],
            }

    def to_csv(self, path, provenance: dict) -> None:
        head = dict(provenance, root=self.root, root_fractions=self.root_fractions,
                    largest_fractions=self.largest_fractions)
        _write_csv(path, head, ["node", "x", "y", "power", "radius", "label"], self.rows())


def emit_snapshot(g: SinrGraph, config: Configuration, root="random", *, seed: int = 0) -> Snapshot:
    """Per-node component labels relative to a root (random from `seed`, or an explicit id)."""
    if isinstance(root, str):
        if root != "random":
            raise ModelError(f"root must be 'random' or a node id, got {root!r}")
        if g.n == 0:
            raise ModelError("cannot pick a root in an empty graph")
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(_ROOT_KEY,))))
        root = int(rng.integers(g.n))
    root = _check_root(g, root)
    codes = component_labels(g, root)
    labels = [LABEL_NAMES[int(c)] for c in codes]
    labels[root] = "root"
    rep = component_report(g, root)
    stats = giant_stats(g)
    return Snapshot(config, tuple(labels), root, rep.fractions(), stats.fractions())


# --- pipelines -----------------------------------------------------------------


def _provenance(cfg: ExperimentConfig, **extra) -> dict:
    return dict({"tool": "sinrperc", "version": __version__, "kind": cfg.kind,
                 "config_sha256": cfg.digest, "config": cfg.echo}, **extra)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, dict):
        return json.dumps(v, sort_keys=True)
    return v


def _write_csv(path, provenance: dict, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(provenance, sort_keys=True) + "\n")
        fh.write("# columns: " + ",".join(columns) + "\n")
        w = csv.DictWriter(fh, fieldnames=list(columns))
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def _write_json(path, provenance: dict, result) -> None:
    payload = {"provenance": provenance, "result": result}
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(repr(o))


def _say(stage, msg):
    print(f"[{stage}] {msg}", flush=True)


def _run_snapshot(cfg, out: Path, law, params, model, deadline):
    density = cfg.number("run", "density")
    n = cfg.number("run", "n", 4000, int)
    root_raw = cfg.get("run", "root", "random")
    try:
        root = root_raw if root_raw == "random" else int(root_raw)
    except ValueError:
        raise ConfigError(f"run.root: expected 'random' or an integer, got {root_raw!r}") from None
    boundary = cfg.get("model", "boundary", "hard_box")
    mode = cfg.get("model", "mode", "fixed_n")
    summary = []
    files = []
    for seed in cfg.seeds():
        if deadline is not None and time.monotonic() > deadline:
            raise BudgetExceeded("runtime budget exceeded")
        region = Region.square_for(n, density, boundary)
        conf = sample_configuration(density, region, law, n, seed, mode=mode)
        g = build_directed(conf, params, model)
        snap = emit_snapshot(g, conf, root, seed=seed)
        path = out / f"snapshot_seed{seed}.csv"
        snap.to_csv(path, _provenance(cfg, seed=seed, config_digest=conf.digest()))
        files.append(path)
        summary.append(dict({"seed": seed, "root": snap.root},
                            **{f"largest_{t}": snap.largest_fractions[t] for t in TYPES},
                            **{f"root_{t}": snap.root_fractions[t] for t in TYPES}))
        _say("snapshot", f"seed={seed} root={snap.root} largest_strong={snap.largest_fractions['strong']:.4f}")
    path = out / "snapshot_summary.csv"
    _write_csv(path, _provenance(cfg, seeds=list(cfg.seeds())), list(summary[0]), summary)
    return files + [path]


def _run_sweep(cfg, out, law, params, model, deadline, workers):
    parameter = cfg.get("run", "parameter", DENSITY)
    density = cfg.number("run", "density") if parameter == GAMMA else None
    grid = cfg.numbers("run", "grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("run.grid: values must be strictly increasing")
    reps = cfg.number("run", "replications", 40, int)
    if reps < 1:
        raise ConfigError("run.replications: must be >= 1")
    spec = SweepSpec(parameter, grid, _setup(cfg, law, params, model, density),
                     n=cfg.number("run", "n", 4000, int), replications=reps,
                     base_seed=cfg.number("run", "base_seed", 0, int),
                     theta_frac=cfg.number("run", "theta_frac", 0.1))
    res = run_sweep(spec, workers, deadline)
    for row in res.rows():
        if row["type"] == "strong":
            _say("sweep", f"{parameter}={row[parameter]:g} strong frequency={row['frequency']:.3f}")
    path = out / "sweep.csv"
    rows = list(res.rows())
    _write_csv(path, _provenance(cfg, base_seed=spec.base_seed), list(rows[0]), rows)
    return [path]


def _critical_common(cfg, law, params, model, deadline, workers):
    parameter = cfg.get("run", "parameter", DENSITY)
    if parameter not in (DENSITY, GAMMA):
        raise ConfigError(f"run.parameter must be density or gamma; got {parameter!r}")
    density = cfg.number("run", "density") if parameter == GAMMA else None
    setup = _setup(cfg, law, params, model, density)
    n = cfg.number("run", "n", 4000, int)
    seed = cfg.number("run", "base_seed", 0, int)
    ev = Evaluator.for_setup(setup, parameter, n, seed, workers, deadline)
    lo_default, hi_default = (0.1, 3.0) if parameter == DENSITY else (0.0, 1.0)
    kw = dict(
        theta_frac=cfg.number("run", "theta_frac", 0.1),
        replications=cfg.number("run", "replications", 40, int),
        resolution=cfg.number("run", "resolution", 0.01 if parameter == DENSITY else 0.002),
        budget=cfg.number("run", "budget", 2000, int),
    )
    lo = cfg.number("run", "lo", lo_default)
    hi = cfg.number("run", "hi", hi_default)
    if not lo < hi:
        raise ConfigError(f"run.lo must be below run.hi (got {lo}, {hi})")
    return parameter, ev, lo, hi, kw, n, seed


def _run_critical(cfg, out, law, params, model, deadline, workers):
    parameter, ev, lo, hi, kw, n, seed = _critical_common(cfg, law, params, model, deadline, workers)
    kind = cfg.get("run", "component", "strong")
    if kind not in TYPES:
        raise ConfigError(f"run.component must be one of {', '.join(TYPES)}; got {kind!r}")
    est = bisect_critical(ev, kind, lo, hi, parameter=parameter, increasing=parameter == DENSITY, **kw)
    if parameter == GAMMA and est.status == "no_transition" and est.observations:
        first = est.observations[0]
        if first[1] / first[2] < 0.5:
            est.status = "never_percolates"
    est.provenance = {"n": n, "base_seed": seed, "range": [lo, hi]}
    _say("critical", f"{kind} {parameter}_c = {est.estimate:.5g} in [{est.interval[0]:.5g}, "
                     f"{est.interval[1]:.5g}] ({est.status}, {est.graphs_used} graphs)")
    path = out / "critical.json"
    _write_json(path, _provenance(cfg, base_seed=seed), est.to_dict())
    return [path]


def _run_coincidence(cfg, out, law, params, model, deadline, workers):
    parameter, ev, lo, hi, kw, n, seed = _critical_common(cfg, law, params, model, deadline, workers)
    rep = coincidence_check(_setup(cfg, law, params, model), lo, hi, evaluator=ev,
                            parameter=parameter, n=n, base_seed=seed, **kw)
    for kind, est in rep.estimates.items():
        _say("coincidence", f"{kind:>6}: {est.estimate:.5g} [{est.interval[0]:.5g}, {est.interval[1]:.5g}]")
    _say("coincidence", f"relative gap {rep.relative_gap:.4f}, pairwise overlap {rep.all_overlap}")
    path = out / "coincidence.json"
    _write_json(path, _provenance(cfg, base_seed=seed), rep.to_dict())
    return [path]


def _run_bounds(cfg, out, law, params, model, deadline, workers):
    files = []
    if cfg.get("run", "b_values") is not None:
        a = cfg.number("run", "a", 1.0)
        p_a = cfg.number("run", "weight_a", 0.5)
        rows = binary_bounds_table(cfg.numbers("run", "b_values"), a=a, p_a=p_a)
        path = out / "bounds_table.csv"
        _write_csv(path, _provenance(cfg), list(rows[0]), rows)
        for r in rows:
            _say("bounds", f"b={r['b']:g} coefficient={r['coefficient']:.6f} "
                           f"lower={r['lower']:.6f} upper={r['upper']:.6f}")
        files.append(path)
    rep = density_bounds(law, params, model)
    _say("bounds", f"model law: lower={rep.lambda_lower:.6f} upper={rep.lambda_upper:.6f} "
                   f"coefficient={rep.cluster_coefficient:.6f} ({rep.coefficient_method})")
    path = out / "bounds.json"
    _write_json(path, _provenance(cfg), rep.to_dict())
    return files + [path]


def _run_gamma_bounds(cfg, out, law, params, model, deadline, workers):
    lam_c = cfg.number("run", "lambda_prime_c")
    source = cfg.get("run", "lambda_prime_source", "user")
    d_raw = cfg.get("run", "d", "auto")
    try:
        d = d_raw if d_raw == "auto" else float(d_raw)
    except ValueError:
        raise ConfigError(f"run.d: expected 'auto' or a number, got {d_raw!r}") from None
    rows = []
    for lam in cfg.numbers("run", "densities"):
        gb = gamma_upper_bound(lam, law, params, model, lam_c, d, source=source)
        rows.append(dict({"density": lam}, **gb.to_dict()))
        msg = f"gamma_2={gb.gamma_upper:.6g} at d={gb.d:.4g}" if gb.available else f"unavailable: {gb.reason}"
        _say("gamma_bounds", f"density={lam:g} {msg}")
    path = out / "gamma_bounds.csv"
    _write_csv(path, _provenance(cfg), list(rows[0]), rows)
    return [path]


PIPELINES = {
    "snapshot": _run_snapshot,
    "sweep": _run_sweep,
    "critical": _run_critical,
    "coincidence": _run_coincidence,
    "bounds": _run_bounds,
    "gamma_bounds": _run_gamma_bounds,
}


def validate(cfg: ExperimentConfig):
    """Model construction + validate_model. Returns (law, params, model, report)."""
    law, params, model = build_model(cfg)
    return law, params, model, validate_model(law, params, model)


def execute(cfg: ExperimentConfig, out_dir: Path | None = None) -> list:
    """Run a resolved config; raises ConfigError / ModelError / BudgetExceeded."""
    law, params, model, report = validate(cfg)
    if not report.ok:
        raise _ValidationFailed(report)
    _say("validate", f"ok ({len(report.checks)} checks)")
    out = Path(out_dir) if out_dir is not None else cfg.output_dir()
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"output directory {out}: {e.strerror}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    max_seconds = cfg.number("run", "max_seconds", math.inf)
    deadline = None if math.isinf(max_seconds) else time.monotonic() + max_seconds
    if cfg.kind == "snapshot":
        files = _run_snapshot(cfg, out, law, params, model, deadline)
    else:
        files = PIPELINES[cfg.kind](cfg, out, law, params, model, deadline, cfg.workers())
    for f in files:
        _say("write", str(f))
    return files


class _ValidationFailed(Exception):
    def __init__(self, report):
        super().__init__(report.format())
        self.report = report


def _guarded(fn):
    try:
        return fn()
    except ConfigError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except _ValidationFailed as e:
        print("model validation failed:\n" + e.report.format(), file=sys.stderr)
        return EXIT_INVALID
    except ModelError as e:
        print(f"model validation failed: {e}", file=sys.stderr)
        return EXIT_INVALID
    except BudgetExceeded as e:
        print(f"{e}", file=sys.stderr)
        return EXIT_BUDGET


def _cmd_run(args):
    def go():
        execute(load_config(args.config, args.set))
        return EXIT_OK
    return _guarded(go)


def _cmd_validate(args):
    def go():
        cfg = load_config(args.config, args.set)
        *_, report = validate(cfg)
        print(report.format())
        return EXIT_OK if report.ok else EXIT_INVALID
    return _guarded(go)


def read_provenance(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return json.loads(text)["provenance"]
    first = text.split("\n", 1)[0]
    if not first.startswith("# "):
        raise ConfigError(f"{path}: no provenance header")
    return json.loads(first[2:])


def _cmd_replay(args):
    def go():
        try:
            prov = read_provenance(args.output)
        except (OSError, ValueError, KeyError) as e:
            raise ConfigError(f"{args.output}: unreadable provenance ({e})") from None
        if prov.get("version") != __version__:
            print(f"note: recorded version {prov.get('version')} differs from {__version__}", file=sys.stderr)
        cfg = config_from_sections(prov["config"])
        if cfg.digest != prov["config_sha256"]:
            raise ConfigError("recorded config does not match its hash")
        with tempfile.TemporaryDirectory() as tmp:
            execute(cfg, Path(tmp))
            fresh = Path(tmp) / Path(args.output).name
            if not fresh.exists():
                print(f"replay produced no {fresh.name}", file=sys.stderr)
                return EXIT_MISMATCH
            same = fresh.read_bytes() == Path(args.output).read_bytes()
        print("replay: identical" if same else "replay: DIFFERENT")
        return EXIT_OK if same else EXIT_MISMATCH
    return _guarded(go)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sinrperc", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, arg in (("run", _cmd_run, "config"), ("validate", _cmd_validate, "config"),
                          ("replay", _cmd_replay, "output")):
        sp = sub.add_parser(name)
        sp.add_argument(arg)
        if arg == "config":
            sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                            help="override a config key (repeatable)")
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_PARSE if e.code else EXIT_OK
    return args.func(args)
