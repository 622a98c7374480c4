"""Stochastic benchmark simulators and experimental-design helpers.

Closed forms follow the Virtual Library of Simulation Experiments
(Surjanovic & Bingham, https://www.sfu.ca/~ssurjano/):

* ``gramacy1d``  -- grlee12: sin(10 pi x) / (2x) + (x - 1)^4
* ``higdon``     -- hig02grlee08: sin(pi x/5) + cos(4 pi x/5)/5 for x < 10, x/10 - 1 otherwise
* ``gramacy2d``  -- grlee08: x1 exp(-x1^2 - x2^2)
* ``branin``     -- branin with a=1, b=5.1/(4 pi^2), c=5/pi, r=6, s=10, t=1/(8 pi)
* ``ishigami``   -- ishigami with a=7, b=0.1
* ``hartmann``   -- hart6, four-term exponential sum on [0, 1]^6

``motorcycle`` is a heteroscedastic table simulator: mean and noise std are
linearly interpolated between 101 equidistant knots on [0, 1].
"""

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import pdist

from . import _motorcycle
from .errors import ConfigError, InvalidArgumentError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass(frozen=True)
class SimulatorSpec:
    """A noisy ground-truth function on an axis-aligned box.

    ``mean_fn`` maps an (n, dim) array in natural units to n outputs. Exactly
    one of ``noise_std`` (homoscedastic) and ``noise_std_fn`` (heteroscedastic,
    same calling convention as ``mean_fn``) must be given.
    """

    name: str
    dim: int
    domain: tuple
    mean_fn: Callable
    noise_std: Optional[float] = None
    noise_std_fn: Optional[Callable] = None
    source: str = ""
    knots: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        domain = tuple((float(lo), float(hi)) for lo, hi in self.domain)
        if len(domain) != self.dim:
            raise InvalidArgumentError(f"{self.name}: {len(domain)} intervals for dim={self.dim}")
        if any(not lo < hi for lo, hi in domain):
            raise InvalidArgumentError(f"{self.name}: empty domain interval")
        if (self.noise_std is None) == (self.noise_std_fn is None):
            raise InvalidArgumentError(f"{self.name}: give exactly one noise specification")
        if self.noise_std is not None and self.noise_std < 0:
            raise InvalidArgumentError(f"{self.name}: noise_std must be >= 0")
        object.__setattr__(self, "domain", domain)

    @property
    def lower(self):
        return np.array([lo for lo, _ in self.domain])

    @property
    def upper(self):
        return np.array([hi for _, hi in self.domain])

    @property
    def heteroscedastic(self):
        return self.noise_std_fn is not None

    def to_unit(self, X):
        return (np.asarray(X, dtype=float) - self.lower) / (self.upper - self.lower)

    def from_unit(self, U):
        X = self.lower + np.asarray(U, dtype=float) * (self.upper - self.lower)
        # round-off must not push points outside the box
        return np.clip(X, self.lower, self.upper)


def _as_points(sim, x):
    X = np.asarray(x, dtype=float)
    single = X.ndim <= 1
    X = X.reshape(1, -1) if single else X
    if X.shape[1] != sim.dim:
        raise InvalidArgumentError(f"{sim.name} expects {sim.dim} inputs, got {X.shape[1]}")
    return X, single


def _check_domain(sim, X):
    tol = 1e-9 * (sim.upper - sim.lower)
    if np.any(X < sim.lower - tol) or np.any(X > sim.upper + tol) or not np.all(np.isfinite(X)):
        raise InvalidArgumentError(f"input outside the {sim.name} domain {sim.domain}")


def mean_oracle(sim, x):
    """Noise-free simulator output; scalar for a single point."""
    X, single = _as_points(sim, x)
    y = np.asarray(sim.mean_fn(X), dtype=float)
    return float(y[0]) if single else y


def noise_std_at(sim, x):
    X, single = _as_points(sim, x)
    if sim.noise_std_fn is None:
        s = np.full(X.shape[0], sim.noise_std)
    else:
        s = np.asarray(sim.noise_std_fn(X), dtype=float)
    return float(s[0]) if single else s


def evaluate(sim, x, rng):
    """One noisy observation per input point: ``mean(x) + N(0, std(x)^2)``."""
    X, single = _as_points(sim, x)
    _check_domain(sim, X)
    mu = np.asarray(sim.mean_fn(X), dtype=float)
    std = noise_std_at(sim, X)
    y = mu + std * rng.standard_normal(X.shape[0])
    return float(y[0]) if single else y


# -- closed-form mean functions ---------------------------------------------

def gramacy1d(X):
    x = X[:, 0]
    return np.sin(10.0 * np.pi * x) / (2.0 * x) + (x - 1.0) ** 4


def higdon(X):
    x = X[:, 0]
    smooth = np.sin(np.pi * x / 5.0) + 0.2 * np.cos(4.0 * np.pi * x / 5.0)
    return np.where(x < 10.0, smooth, x / 10.0 - 1.0)


def gramacy2d(X):
    x1, x2 = X[:, 0], X[:, 1]
    return x1 * np.exp(-x1**2 - x2**2)


def branin(X):
    x1, x2 = X[:, 0], X[:, 1]
    b = 5.1 / (4.0 * np.pi**2)
    c = 5.0 / np.pi
    t = 1.0 / (8.0 * np.pi)
    return (x2 - b * x1**2 + c * x1 - 6.0) ** 2 + 10.0 * (1.0 - t) * np.cos(x1) + 10.0


def ishigami(X, a=7.0, b=0.1):
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    return np.sin(x1) + a * np.sin(x2) ** 2 + b * x3**4 * np.sin(x1)


HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HARTMANN_A = np.array([
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
])
HARTMANN_P = 1e-4 * np.array([
    [1312, 1696, 5569, 124, 8283, 5886],
    [2329, 4135, 8307, 3736, 1004, 9991],
    [2348, 1451, 3522, 2883, 3047, 6650],
    [4047, 8828, 8732, 5743, 1091, 381],
])
HARTMANN_ARGMIN = np.array([0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573])
HARTMANN_MIN = -3.32237


def hartmann6(X):
    inner = np.einsum("ij,nij->ni", HARTMANN_A, (X[:, None, :] - HARTMANN_P[None]) ** 2)
    return -np.exp(-inner) @ HARTMANN_ALPHA


# -- table simulators ------------------------------------------------------------

def table_simulator(name, mean, stddev, domain=(0.0, 1.0), source=""):
    """1-D simulator interpolating ``mean``/``stddev`` on equidistant knots."""
    mean = np.asarray(mean, dtype=float)
    stddev = np.asarray(stddev, dtype=float)
    if mean.ndim != 1 or mean.shape != stddev.shape or mean.size < 2:
        raise InvalidArgumentError("mean and stddev must be equal-length vectors (>= 2 knots)")
    if np.any(stddev < 0) or not (np.all(np.isfinite(mean)) and np.all(np.isfinite(stddev))):
        raise InvalidArgumentError("stddev must be finite and non-negative")
    lo, hi = float(domain[0]), float(domain[1])
    knots = np.linspace(lo, hi, mean.size)
    knots.setflags(write=False)

    def mean_fn(X):
        return np.interp(X[:, 0], knots, mean)

    def std_fn(X):
        return np.interp(X[:, 0], knots, stddev)

    return SimulatorSpec(name, 1, ((lo, hi),), mean_fn, noise_std_fn=std_fn,
                         source=source, knots=knots)


def load_table_simulator(path):
    """Read a table simulator from a TOML or JSON file.

    Keys: ``name``, ``mean`` and ``stddev`` (equal-length lists), and an
    optional two-element ``domain`` (default ``[0, 1]``).
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        if os.fspath(path).endswith(".json"):
            spec = json.loads(raw)
        else:
            spec = tomllib.loads(raw.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse simulator table {path}: {exc}") from exc
    missing = {"name", "mean", "stddev"} - set(spec)
    if missing:
        raise ConfigError(f"simulator table {path} lacks {sorted(missing)}")
    return table_simulator(spec["name"], spec["mean"], spec["stddev"],
                           spec.get("domain", (0.0, 1.0)), source=os.fspath(path))


MOTORCYCLE = table_simulator("motorcycle", _motorcycle.MEAN, _motorcycle.STDDEV,
                             source="variational GP fit to the motorcycle accident data")

_SFU = "https://www.sfu.ca/~ssurjano/"
REGISTRY = {
    sim.name: sim
    for sim in (
        SimulatorSpec("gramacy1d", 1, ((0.5, 2.5),), gramacy1d, 0.1, source=_SFU + "grlee12.html"),
        SimulatorSpec("higdon", 1, ((0.0, 20.0),), higdon, 0.1, source=_SFU + "hig02grlee08.html"),
        SimulatorSpec("gramacy2d", 2, ((-2.0, 6.0),) * 2, gramacy2d, 0.05,
                      source=_SFU + "grlee08.html"),
        SimulatorSpec("branin", 2, ((-5.0, 10.0), (0.0, 15.0)), branin, 11.32,
                      source=_SFU + "branin.html"),
        SimulatorSpec("ishigami", 3, ((-math.pi, math.pi),) * 3, ishigami, 0.187,
                      source=_SFU + "ishigami.html"),
        SimulatorSpec("hartmann", 6, ((0.0, 1.0),) * 6, hartmann6, 0.0192,
                      source=_SFU + "hart6.html"),
        MOTORCYCLE,
    )
}


def register(sim):
    REGISTRY[sim.name] = sim
    return sim


def get_simulator(name):
    if isinstance(name, SimulatorSpec):
        return name
    try:
        return REGISTRY[str(name).lower()]
    except KeyError:
        if os.path.isfile(str(name)):
            return load_table_simulator(name)
        raise InvalidArgumentError(
            f"unknown simulator {name!r}; known: {', '.join(sorted(REGISTRY))}"
        ) from None


# -- designs ---------------------------------------------------------------------

def latin_hypercube(n, d, rng):
    """One random LHS in [0, 1]^d: a uniform draw inside each stratum per axis."""
    strata = np.column_stack([rng.permutation(n) for _ in range(d)])
    return (strata + rng.random((n, d))) / n


def maximin_lhs(n, d, rng, candidates=100):
    """Best of ``candidates`` random LHS designs by minimum pairwise distance."""
    if n < 1 or d < 1:
        raise InvalidArgumentError("need n >= 1 and d >= 1")
    if n < 2:
        return latin_hypercube(n, d, rng)
    best, best_score = None, -np.inf
    for _ in range(max(1, candidates)):
        design = latin_hypercube(n, d, rng)
        score = pdist(design).min()
        if score > best_score:
            best, best_score = design, score
    return best


def grid_pool(sim, rng, per_axis=100, cap=10000):
    """Candidate pool in natural units: the full grid, or a random cap-sized subset.

    Each axis is discretized into ``per_axis`` equidistant points including
    both endpoints. Subsets are drawn without replacement.
    """
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in sim.domain]
    total = per_axis ** sim.dim
    if total <= cap:
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])
    if total <= 50 * cap:
        flat = rng.choice(total, size=cap, replace=False)
        idx = np.column_stack(np.unravel_index(flat, (per_axis,) * sim.dim))
    else:
        # the grid is too large to enumerate; reject duplicate multi-indices
        seen = set()
        rows = []
        while len(rows) < cap:
            for row in rng.integers(0, per_axis, size=(cap - len(rows), sim.dim)):
                key = row.tobytes()
                if key not in seen:
                    seen.add(key)
                    rows.append(row)
        idx = np.array(rows)
    return np.column_stack([axes[k][idx[:, k]] for k in range(sim.dim)])
