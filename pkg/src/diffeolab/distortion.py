"""Total variation of log-derivatives and the asymptotic-distortion trend."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .diffeo import Diffeo, compose_all, power
from .errors import WordLengthError

MIN_CELL = 1e-10
# increments of log D below this are rounding noise; their sign changes are
# not turning points and are not refined
NOISE_FLOOR = 1e-11
MAX_PARTITION = 2**21
# asinh(chart coordinate) range seeded when a chart is supplied (|x| < 1.5e3)
CHART_SEED_SPAN = 8.0
# cells are split at this fraction rather than at 1/2: exact halving keeps a
# corner of log D at the same rational position in every generation of cells
SPLIT = 0.5 + (math.sqrt(2.0) - 1.0) / 16.0


@dataclass(frozen=True)
class VariationEstimate:
    value: float
    partition_size: int
    refinement_history: tuple[tuple[int, float], ...]
    converged: bool = True
    skipped_cells: int = 0
    points: np.ndarray | None = field(default=None, repr=False, compare=False)


def _log_der(d: Diffeo, x: np.ndarray):
    der = np.asarray(d.derivative(x), dtype=float)
    with np.errstate(divide="ignore"):
        out = np.log(der)
    return out


def _tv(logd: np.ndarray) -> tuple[float, np.ndarray, int]:
    diffs = np.diff(logd)
    ok = np.isfinite(diffs)
    return math.fsum(np.abs(diffs[ok])), diffs, int((~ok).sum())


def _hidden_turns(sgn: np.ndarray, max_run: int = 2) -> np.ndarray:
    """Short runs of negligible increments between increments of opposite sign.

    A cell straddling a corner of log D can have equal values at both ends;
    its increment then reads as zero and hides the turn from its neighbours.
    Longer runs are flat stretches and are left alone.
    """
    n = sgn.size
    idx = np.arange(n)
    nz = sgn != 0
    prev = np.maximum.accumulate(np.where(nz, idx, -1))
    nxt = np.minimum.accumulate(np.where(nz, idx, n)[::-1])[::-1]
    out = ~nz & (prev >= 0) & (nxt < n)
    out &= (nxt - prev - 1) <= max_run
    out[out] &= sgn[prev[out]] * sgn[nxt[out]] < 0
    return out


def var_log_derivative(d: Diffeo, initial_partition: int = 256, tol: float = 1e-4,
                       max_rounds: int = 40, refine_fraction: float = 0.1,
                       domain: tuple[float, float] | None = None,
                       chart=None, extra_points=None) -> VariationEstimate:
    """sum |log Dd(x_{k+1}) - log Dd(x_k)| over an adaptively refined partition.

    Cells next to a sign change of the increments (where log D turns) and the
    cells carrying the largest increments are split until the sum moves by
    less than ``tol`` relatively; a split of every cell must then also move it
    by less than ``tol``, which catches bumps hidden inside one cell.  Cells
    where D under- or overflows are skipped and counted.  Refinement stops
    unconverged once the partition would exceed ``MAX_PARTITION`` cells.  With
    a ``chart`` the starting partition also gets points evenly spaced in
    ``asinh`` of the chart coordinate, which resolves features whose width is
    of order one chart unit far from the basepoint.
    ``extra_points`` are added to the starting partition as well.
    """
    if initial_partition < 16:
        raise ValueError("initial_partition must be at least 16")
    if domain is None:
        if not d.cached_support or not d.word:
            return VariationEstimate(0.0, 0, ((0, 0.0),), points=np.empty(0))
        lo = min(a for a, _ in d.cached_support)
        hi = max(b for _, b in d.cached_support)
    else:
        lo, hi = domain
    x = np.linspace(lo, hi, initial_partition + 1)
    if chart is not None:
        seeds = chart.phi(np.sinh(np.linspace(-CHART_SEED_SPAN, CHART_SEED_SPAN, 4 * initial_partition)))
        x = np.unique(np.concatenate([x, seeds[(seeds > lo) & (seeds < hi)]]))
    if extra_points is not None:
        extra = np.asarray(extra_points, dtype=float).ravel()
        x = np.unique(np.concatenate([x, extra[(extra > lo) & (extra < hi)]]))
    logd = _log_der(d, x)
    value, diffs, skipped = _tv(logd)
    history = [(x.size - 1, value)]
    best = value
    converged = False
    checking = False  # next round splits every cell to confirm convergence
    for _ in range(max_rounds):
        widths = np.diff(x)
        if checking:
            pick = np.ones(diffs.size, dtype=bool)
        else:
            absd = np.abs(np.where(np.isfinite(diffs), diffs, 0.0))
            pick = np.zeros(diffs.size, dtype=bool)
            sgn = np.where(absd > NOISE_FLOOR, np.sign(diffs), 0.0)
            turn = sgn[1:] * sgn[:-1] < 0
            pick[:-1] |= turn
            pick[1:] |= turn
            pick |= _hidden_turns(sgn)
            k = max(1, int(refine_fraction * diffs.size))
            pick[np.argpartition(absd, -k)[-k:]] = True
        pick &= widths > 2 * MIN_CELL
        if x.size + pick.sum() > MAX_PARTITION:
            break
        if not pick.any():
            converged = True
            break
        mids = x[:-1][pick] + SPLIT * widths[pick]
        mid_log = _log_der(d, mids)
        order = np.argsort(np.concatenate([x, mids]), kind="stable")
        x = np.concatenate([x, mids])[order]
        logd = np.concatenate([logd, mid_log])[order]
        new_value, diffs, skipped = _tv(logd)
        history.append((x.size - 1, new_value))
        change = abs(new_value - value) / max(abs(new_value), 1e-300)
        value = new_value
        best = max(best, value)
        if new_value == 0.0 or (checking and change < tol):
            converged = True
            break
        checking = change < tol
    return VariationEstimate(best, x.size - 1, tuple(history), converged, skipped, x)


@dataclass(frozen=True)
class ProductVariation:
    """var(log D) of a product and of its factors on matched partitions."""
    product: VariationEstimate
    factors: tuple[VariationEstimate, ...]

    @property
    def excess(self) -> float:
        """var(product) - sum of var(factor); at most rounding when matched."""
        return self.product.value - math.fsum(f.value for f in self.factors)


def product_variation(factors, initial_partition: int = 256, tol: float = 1e-4,
                      chart=None) -> ProductVariation:
    """Estimate var(log D) for ``factors[0] o ... o factors[-1]`` and each factor.

    Each estimate is a partition sum, so a lower bound for the true variation.
    Comparing lower bounds of different quality says nothing about the
    inequality var(ab) <= var(a) + var(b), so every factor's partition is
    seeded with the product's partition pushed through the factors that act
    before it.  On those partitions the inequality holds term by term, and
    the refinement of each factor can only raise its estimate.
    """
    factors = list(factors)
    if not factors:
        raise ValueError("need at least one factor")
    prod = compose_all(factors)
    pe = var_log_derivative(prod, initial_partition, tol, chart=chart)
    pts = pe.points if pe.points is not None else np.empty(0)
    out = [None] * len(factors)
    moved = pts
    for k in range(len(factors) - 1, -1, -1):
        out[k] = var_log_derivative(factors[k], initial_partition, tol, chart=chart,
                                    domain=_domain_or_none(factors[k]), extra_points=moved)
        if moved.size:
            moved = factors[k].evaluate(moved)
    return ProductVariation(pe, tuple(out))


def _domain_or_none(d: Diffeo):
    if not d.cached_support or not d.word:
        return None
    return (min(a for a, _ in d.cached_support), max(b for _, b in d.cached_support))


@dataclass(frozen=True)
class AsymptoticDistortionEstimate:
    per_n: dict
    partition_sizes: dict = field(default_factory=dict)
    achieved_n: int = 0
    truncated: bool = False

    @property
    def trend(self) -> dict:
        return {n: v / n for n, v in self.per_n.items()}

    @property
    def upper_estimate(self) -> float:
        return min(self.trend.values()) if self.per_n else 0.0

    def subadditivity_violations(self, tol: float = 1e-4) -> list[tuple[int, int, float]]:
        """Computed pairs (m, n) with per(m+n) > per(m) + per(n) + 2 tol."""
        bad = []
        ns = sorted(self.per_n)
        for m in ns:
            for n in ns:
                if m <= n and m + n in self.per_n:
                    excess = self.per_n[m + n] - self.per_n[m] - self.per_n[n]
                    if excess > 2 * tol:
                        bad.append((m, n, excess))
        return bad

    def csv_rows(self) -> list[list]:
        return [[n, f"{v:.12g}", f"{v / n:.12g}", self.partition_sizes.get(n, 0)]
                for n, v in sorted(self.per_n.items())]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "var", "var_over_n", "partition_size"])
        w.writerows(self.csv_rows())
        return buf.getvalue()


def power_schedule(n_max: int) -> list[int]:
    ns, n = [], 1
    while n <= n_max:
        ns.append(n)
        n *= 2
    return ns


def asymptotic_distortion(d: Diffeo, n_max: int = 64, initial_partition: int = 256,
                          tol: float = 1e-4, ns=None, chart=None) -> AsymptoticDistortionEstimate:
    """var(log D d^n) for n = 1, 2, 4, ..., n_max (or the given ``ns``)."""
    if n_max < 8 and ns is None:
        raise ValueError("n_max must be at least 8")
    per_n, sizes, achieved, truncated = {}, {}, 0, False
    for n in (ns or power_schedule(n_max)):
        try:
            est = var_log_derivative(power(d, n), initial_partition, tol, chart=chart)
        except WordLengthError:
            truncated = True
            break
        per_n[n] = est.value
        sizes[n] = est.partition_size
        achieved = n
    return AsymptoticDistortionEstimate(per_n, sizes, achieved, truncated)
