"""Campaign driver: ``fbgp-al run | report | validate | list-simulators``.

A campaign is a grid of simulators x criteria x runs. Every cell writes one
self-describing JSON record; reports are computed from those records alone.

Exit codes: 0 success, 1 configuration error, 2 partial failure,
3 validation failure.
"""

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, simulators, validation
from .acquisition import Criterion
from .active_loop import ExperimentConfig, LearningCurve, PoolConfig, run_experiment
from .errors import ConfigError, FBGPError
from .evaluation import CurveSet, Metric, summarize
from .mcmc import PriorSpec, SamplerConfig

log = logging.getLogger("fbgp_al")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_VALIDATION = 0, 1, 2, 3
SCHEMA_VERSION = 1

DEFAULT_SIMULATORS = ("gramacy1d", "higdon", "gramacy2d", "branin", "ishigami", "hartmann", "motorcycle")
DEFAULT_CRITERIA = ("alm", "b_alm", "bald", "b_qbc", "qb_mgp")

PRESETS = {
    "full": {},
    "desk": {
        "campaign": {"runs": 5, "iterations": 30},
        "sampler": {"chains": 2, "samples_per_chain": 200, "warmup": 100},
    },
}

_CAMPAIGN_KEYS = {"name", "preset", "simulators", "criteria", "runs", "iterations", "seed", "out"}
_EXPERIMENT_KEYS = {"initial_points", "test_points", "lhs_candidates"}
_SAMPLER_KEYS = {f.name for f in dataclasses.fields(SamplerConfig)} - {"seed"}
_PRIOR_KEYS = {f.name for f in dataclasses.fields(PriorSpec)}
_POOL_KEYS = {f.name for f in dataclasses.fields(PoolConfig)}
_SECTIONS = {"campaign": _CAMPAIGN_KEYS, "experiment": _EXPERIMENT_KEYS,
             "sampler": _SAMPLER_KEYS, "prior": _PRIOR_KEYS, "pool": _POOL_KEYS}


@dataclass(frozen=True)
class CampaignConfig:
    simulators: tuple = DEFAULT_SIMULATORS
    criteria: tuple = DEFAULT_CRITERIA
    runs: int = 10
    iterations: int = 100
    seed: int = 0
    out: str = "results"
    name: str = ""
    preset: str = "full"
    experiment: dict = field(default_factory=dict)
    sampler: dict = field(default_factory=dict)
    prior: dict = field(default_factory=dict)
    pool: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.simulators or not self.criteria:
            raise ConfigError("simulators and criteria must be non-empty")
        if self.runs < 1 or self.iterations < 1:
            raise ConfigError("runs and iterations must be >= 1")
        for s in self.simulators:
            try:
                simulators.get_simulator(s)
            except FBGPError as exc:
                raise ConfigError(str(exc)) from None
        for c in self.criteria:
            try:
                Criterion.parse(c)
            except FBGPError as exc:
                raise ConfigError(str(exc)) from None
        try:
            self.sampler_config(0)
            self.experiment_config(self.simulators[0], self.criteria[0], 0)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def snapshot(self):
        d = dataclasses.asdict(self)
        d.pop("out")
        d["simulators"] = list(self.simulators)
        d["criteria"] = list(self.criteria)
        return d

    @property
    def campaign_id(self):
        if self.name:
            return self.name
        blob = json.dumps(self.snapshot(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def sampler_config(self, seed):
        return SamplerConfig(seed=seed, **self.sampler)

    def experiment_config(self, simulator, criterion, run):
        return ExperimentConfig(
            simulator=simulator,
            criterion=Criterion.parse(criterion).value,
            iterations=self.iterations,
            sampler=self.sampler_config(0),
            prior=PriorSpec(**self.prior),
            pool=PoolConfig(**self.pool),
            seed=derive_seed(self.seed, simulator, Criterion.parse(criterion).value, run),
            design_seed=derive_seed(self.seed, simulator, "design", run),
            **self.experiment,
        )


def derive_seed(master, *parts):
    """Stable 63-bit seed from a master seed and cell coordinates.

    Depends only on the named coordinates, so growing the grid leaves
    existing cells' seeds unchanged.
    """
    key = "/".join([str(int(master))] + [str(p) for p in parts]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


def _merge(base, extra):
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in base.items()}
    for k, v in extra.items():
        if isinstance(v, dict):
            out.setdefault(k, {}).update(v)
        else:
            out[k] = v
    return out


def load_config(path=None, overrides=None):
    """Read a TOML campaign file, apply its preset, then ``overrides``."""
    raw = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    for section, values in raw.items():
        if section not in _SECTIONS or not isinstance(values, dict):
            raise ConfigError(f"unknown config section [{section}]")
        unknown = set(values) - _SECTIONS[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    overrides = overrides or {}
    preset = overrides.get("preset", raw.get("campaign", {}).get("preset", "full"))
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    merged = _merge(PRESETS[preset], raw)
    merged = _merge(merged, {"campaign": overrides})
    camp = merged.get("campaign", {})
    kwargs = {k: v for k, v in camp.items() if k in _CAMPAIGN_KEYS}
    for key in ("simulators", "criteria"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    try:
        return CampaignConfig(
            **kwargs,
            experiment=merged.get("experiment", {}),
            sampler=merged.get("sampler", {}),
            prior=merged.get("prior", {}),
            pool=merged.get("pool", {}),
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def record_path(root, simulator, criterion, run):
    return Path(root) / simulator / criterion / f"run_{run:03d}.json"


def write_atomic(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp_", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_cell(cfg, simulator, criterion, run, root):
    """Execute one run and persist its record; returns ``(cell, complete, error)``."""
    exp = cfg.experiment_config(simulator, criterion, run)
    started = _now()
    curve = run_experiment(exp)
    record = {
        "schema_version": SCHEMA_VERSION,
        "campaign_id": cfg.campaign_id,
        "simulator": simulator,
        "criterion": exp.criterion,
        "run": run,
        "seed": exp.seed,
        "design_seed": exp.design_seed,
        "config": cfg.snapshot(),
        "software_version": __version__,
        "started": started,
        "finished": _now(),
        "wall_times": [r.wall_time for r in curve.records],
        "curve": curve.payload(),
    }
    write_atomic(record_path(root, simulator, exp.criterion, run),
                 json.dumps(record, indent=1, sort_keys=True))
    return (simulator, exp.criterion, run), curve.complete, curve.failure


def _cells(cfg):
    for s in cfg.simulators:
        for c in cfg.criteria:
            for r in range(cfg.runs):
                yield s, Criterion.parse(c).value, r


def cmd_run(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    cfg = load_config(args.config, overrides)
    root = Path(cfg.out) / cfg.campaign_id
    todo = [c for c in _cells(cfg) if args.force or not record_path(root, *c).exists()]
    print(f"campaign {cfg.campaign_id}: {len(todo)} of {cfg.runs * len(cfg.simulators) * len(cfg.criteria)} "
          f"cells to run -> {root}")
    failures = []

    def done(cell, complete, failure):
        status = "ok" if complete else f"incomplete ({failure})"
        print(f"  {cell[0]}/{cell[1]}/run {cell[2]}: {status}", flush=True)
        if not complete:
            failures.append(cell)

    if args.workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            futures = {pool.submit(run_cell, cfg, *c, root): c for c in todo}
            for fut in as_completed(futures):
                try:
                    done(*fut.result())
                except Exception as exc:  # a crashed cell must not sink the campaign
                    done(futures[fut], False, repr(exc))
    else:
        for c in todo:
            try:
                done(*run_cell(cfg, *c, root))
            except Exception as exc:
                done(c, False, repr(exc))
    if failures:
        print(f"{len(failures)} cell(s) failed or are incomplete", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def load_records(root):
    records = []
    for path in sorted(Path(root).glob("*/*/run_*.json")):
        with open(path) as fh:
            records.append(json.load(fh))
    return records


def curve_sets(records, metric):
    """Complete runs grouped into ``CurveSet`` per (simulator, criterion)."""
    metric = Metric.parse(metric)
    grouped = {}
    for rec in sorted(records, key=lambda r: (r["simulator"], r["criterion"], r["run"])):
        curve = LearningCurve.from_payload(rec["curve"])
        if not curve.complete or not curve.records:
            continue
        values = curve.nlml if metric is Metric.NLML else curve.rmse
        grouped.setdefault((rec["simulator"], rec["criterion"]), []).append(values)
    sets = {}
    for key, rows in grouped.items():
        T = min(len(r) for r in rows)
        sets[key] = CurveSet(metric, np.array([r[:T] for r in rows]), key[1])
    return sets


def cmd_report(args):
    root = Path(args.campaign)
    if not root.is_dir():
        print(f"no campaign directory {root}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        metric = Metric.parse(args.metric)
        baseline = Criterion.parse(args.baseline).value
    except FBGPError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    sets = curve_sets(load_records(root), metric)
    if not sets:
        print(f"no complete records under {root}", file=sys.stderr)
        return EXIT_PARTIAL
    summary = summarize(sets, metric, baseline)
    out = Path(args.out) if args.out else root
    out.mkdir(parents=True, exist_ok=True)
    text = summary.to_text()
    (out / f"report_{metric.value}.txt").write_text(text)
    (out / f"report_{metric.value}.json").write_text(json.dumps(summary.to_dict(), indent=1, sort_keys=True))
    with open(out / f"curves_{metric.value}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["simulator", "criterion", "iteration", "mean", "std", "runs"])
        for (s, c), cs in sorted(sets.items()):
            mean, std = cs.curves.mean(axis=0), cs.curves.std(axis=0)
            for t in range(cs.iterations):
                w.writerow([s, c, t, repr(float(mean[t])), repr(float(std[t])), cs.runs])
    print(text, end="")
    return EXIT_OK


def cmd_validate(args):
    if args.suite != "all" and args.suite not in validation.SUITES:
        print(f"unknown suite {args.suite!r}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    checks = validation.run_suite(args.suite, seed=args.seed)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed in {time.perf_counter() - t0:.1f} s")
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_list_simulators(args):
    for name in sorted(simulators.REGISTRY):
        sim = simulators.REGISTRY[name]
        box = " x ".join(f"[{lo:g}, {hi:g}]" for lo, hi in sim.domain)
        noise = "heteroscedastic" if sim.heteroscedastic else f"noise std {sim.noise_std:g}"
        print(f"{name:<12} d={sim.dim}  {box}  {noise}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="fbgp-al", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a campaign")
    r.add_argument("--config", help="TOML campaign file (defaults reproduce the full protocol)")
    r.add_argument("--seed", type=int, help="override the master seed")
    r.add_argument("--workers", type=int, default=1, help="parallel runs")
    r.add_argument("--force", action="store_true", help="rerun cells that already have records")
    r.add_argument("--out", help="results root directory")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="RD-AUC table and curve data from records")
    rep.add_argument("campaign", help="campaign directory (results root / campaign id)")
    rep.add_argument("--metric", choices=[m.value for m in Metric], default="rmse")
    rep.add_argument("--baseline", default="alm")
    rep.add_argument("--out", help="directory for report files (default: campaign dir)")
    rep.set_defaults(func=cmd_report)

    v = sub.add_parser("validate", help="run oracle and property checks")
    v.add_argument("suite", nargs="?", default="all", help=f"one of: all, {', '.join(validation.SUITES)}")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_validate)

    ls = sub.add_parser("list-simulators", help="show registered simulators")
    ls.set_defaults(func=cmd_list_simulators)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
