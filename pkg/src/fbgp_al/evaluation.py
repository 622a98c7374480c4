"""Learning-curve aggregation and the relative decrease in AUC (RD-AUC).

RD-AUC compares a candidate criterion against a baseline as a ratio of
expectations. For every ordered pair of baseline run ``b`` and candidate run
``c`` it forms a numerator ``AUC_b - AUC_c`` and a denominator
``AUC_b - AUC_best``. The mean is ``mu_n / mu_d``. The variance follows the
first-order ratio estimator

    (1/R) * (s_n / mu_d^2 + mu_n^2 s_d / mu_d^4 - 2 mu_n s_nd / mu_d^3)

with population moments over the ``R^2`` pairs and ``R`` runs per criterion.
Positive means favor the candidate.
"""

import enum
import math
import statistics
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError


class Metric(str, enum.Enum):
    NLML = "nlml"
    RMSE = "rmse"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise InvalidArgumentError(f"unknown metric {name!r}") from None


@dataclass(frozen=True)
class CurveSet:
    """``R`` runs by ``T`` iterations of one metric for one criterion."""

    metric: Metric
    curves: np.ndarray
    criterion: str = ""

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.curves, dtype=float))
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise InvalidArgumentError("curves must be a non-empty runs x iterations matrix")
        if not np.all(np.isfinite(c)):
            raise InvalidArgumentError("curves must be finite")
        object.__setattr__(self, "curves", c)
        object.__setattr__(self, "metric", Metric.parse(self.metric))

    @property
    def runs(self):
        return self.curves.shape[0]

    @property
    def iterations(self):
        return self.curves.shape[1]

    def aucs(self):
        return np.array([auc(c) for c in self.curves])


@dataclass(frozen=True)
class RDAUCResult:
    mean: float
    variance: float
    lower_bound_used: float
    baseline: str = ""
    criterion: str = ""

    @property
    def std(self):
        return math.sqrt(self.variance)


def auc(curve):
    """Trapezoidal area over the iteration index."""
    c = np.asarray(curve, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise InvalidArgumentError("curve must be a non-empty vector")
    return float(np.sum(0.5 * (c[:-1] + c[1:])))


def lower_bound(metric, curve_sets):
    """0 for RMSE; for NLML the smallest value on any curve of any criterion."""
    metric = Metric.parse(metric)
    if metric is Metric.RMSE:
        return 0.0
    values = [np.min(cs.curves if isinstance(cs, CurveSet) else np.asarray(cs, dtype=float))
              for cs in curve_sets]
    if not values:
        raise InvalidArgumentError("no curves supplied")
    return float(min(values))


def rd_auc(baseline, candidate, bound):
    """Mean and variance of the relative decrease in AUC of ``candidate`` vs ``baseline``."""
    if baseline.iterations != candidate.iterations:
        raise InvalidArgumentError("curve sets must share the number of iterations")
    R = baseline.runs
    if candidate.runs != R:
        raise InvalidArgumentError("curve sets must share the number of runs")
    auc_best = float(bound) * (baseline.iterations - 1)
    auc_b = baseline.aucs()
    auc_c = candidate.aucs()
    n = (auc_b[:, None] - auc_c[None, :]).ravel()
    d = np.repeat(auc_b - auc_best, R)
    # pair means reduce to differences of run means; this form makes a
    # self-comparison exactly zero rather than zero up to summation order
    mu_n = float(auc_b.mean() - auc_c.mean())
    mu_d = float(auc_b.mean() - auc_best)
    if not mu_d > 0:
        raise InvalidArgumentError("baseline AUC does not exceed the lower bound")
    var_n = float(np.mean((n - mu_n) ** 2))
    var_d = float(np.mean((d - mu_d) ** 2))
    cov_nd = float(np.mean((n - mu_n) * (d - mu_d)))
    var = (var_n / mu_d**2 + mu_n**2 * var_d / mu_d**4 - 2.0 * mu_n * cov_nd / mu_d**3) / R
    return RDAUCResult(
        mean=mu_n / mu_d,
        # the expression is a quadratic form in (n, d) and cannot go negative
        # beyond rounding
        variance=max(var, 0.0),
        lower_bound_used=float(bound),
        baseline=baseline.criterion,
        criterion=candidate.criterion,
    )


@dataclass
class Summary:
    """RD-AUC table: ``cells[(simulator, criterion)] -> RDAUCResult | None``."""

    metric: Metric
    baseline: str
    simulators: list
    criteria: list
    cells: dict = field(default_factory=dict)
    overall_mean: dict = field(default_factory=dict)
    overall_median: dict = field(default_factory=dict)

    def to_dict(self):
        def cell(r):
            if r is None:
                return None
            return {"mean_percent": 100.0 * r.mean, "std_percent": 100.0 * r.std,
                    "lower_bound": r.lower_bound_used}
        return {
            "metric": self.metric.value,
            "baseline": self.baseline,
            "simulators": list(self.simulators),
            "criteria": list(self.criteria),
            "cells": {f"{s}/{c}": cell(self.cells.get((s, c)))
                      for s in self.simulators for c in self.criteria},
            "overall_mean_percent": {c: _pct(v) for c, v in self.overall_mean.items()},
            "overall_median_percent": {c: _pct(v) for c, v in self.overall_median.items()},
        }

    def to_text(self):
        head = ["criterion"] + list(self.simulators) + ["mean", "median"]
        rows = [head]
        for c in self.criteria:
            row = [c]
            for s in self.simulators:
                r = self.cells.get((s, c))
                row.append("--" if r is None else f"{100 * r.mean:.1f} ±{100 * r.std:.1f}")
            for agg in (self.overall_mean, self.overall_median):
                v = agg.get(c)
                row.append("--" if v is None else f"{100 * v:.1f}")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        lines = ["  ".join(cell.rjust(w) if i else cell.ljust(w)
                           for i, (cell, w) in enumerate(zip(r, widths))) for r in rows]
        title = f"RD-AUC (%) of {self.metric.value.upper()} vs {self.baseline}"
        return "\n".join([title] + lines) + "\n"


def _pct(v):
    return None if v is None else 100.0 * v


def summarize(curves, metric, baseline="alm"):
    """Build the RD-AUC table from ``curves[(simulator, criterion)] -> CurveSet``.

    The NLML bound of a simulator is shared by every criterion run on it.
    Cells whose baseline or candidate curves are missing, or whose RD-AUC
    is undefined, are left as ``None``.
    """
    metric = Metric.parse(metric)
    simulators = sorted({s for s, _ in curves})
    criteria = sorted({c for _, c in curves}, key=lambda c: (c != baseline, c))
    summary = Summary(metric, baseline, simulators, criteria)
    for s in simulators:
        sets = [cs for (sim, _), cs in curves.items() if sim == s]
        bound = lower_bound(metric, sets)
        base = curves.get((s, baseline))
        for c in criteria:
            cand = curves.get((s, c))
            if base is None or cand is None:
                summary.cells[(s, c)] = None
                continue
            try:
                summary.cells[(s, c)] = rd_auc(base, cand, bound)
            except InvalidArgumentError:
                summary.cells[(s, c)] = None
    for c in criteria:
        means = [summary.cells[(s, c)].mean for s in simulators
                 if summary.cells.get((s, c)) is not None]
        summary.overall_mean[c] = statistics.fmean(means) if means else None
        summary.overall_median[c] = statistics.median(means) if means else None
    return summary
