"""The named maps of the construction and the exact marker-index bookkeeping.

Markers are the points ``x_q = phi(q)`` for rational ``q``; ``f`` shifts the
index by one and ``fhat`` doubles it, so supports of conjugates can be tracked
in exact rational arithmetic before any float is formed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Optional, Sequence, Union

import numpy as np
import sympy

from . import _chartmath as cm
from .chart import Chart
from .diffeo import (AMBIENT, BlockAffine, BlockFlow, ChartAffine, Diffeo, IDENTITY,
                     compose_all, invert, merge_intervals, monotone_hermite, power,
                     sup_distance)
from .errors import ConstructionError, ScheduleRangeError
from .words import GENERATORS, GeneratorWord

# ---------------------------------------------------------------------------
# markers


@dataclass(frozen=True, order=True)
class MarkerIndex:
    """Exact index ``q`` of the point ``x_q = phi(q)``."""

    q: Fraction

    def __init__(self, q):
        object.__setattr__(self, "q", Fraction(q))

    def shift(self, k: int = 1) -> "MarkerIndex":
        """Image under f^k."""
        return MarkerIndex(self.q + k)

    def scale(self, k: int = 1) -> "MarkerIndex":
        """Image under fhat^k."""
        return MarkerIndex(self.q * Fraction(2) ** k)

    def point(self, chart: Chart) -> float:
        return float(chart.phi(float(self.q)))

    def __repr__(self) -> str:
        return f"x[{self.q}]"


# ---------------------------------------------------------------------------
# schedule

EllSpec = Union[str, Sequence[int], Callable[[int], int]]


@dataclass(frozen=True)
class Schedule:
    """Block times: on block n with 2^(i-1) <= n < 2^i, i even, the flows run for
    ``s_n = log2(1 - 1/sqrt(l))`` (dilation) and ``t_n = 1/sqrt(l)`` (translation),
    ``l = ell(i/2)``; every other block is left alone.

    ``ell`` is ``"j_plus_1"`` or an explicit list ``[l_1, l_2, ...]``.  A zero
    entry switches its level off; an empty list switches every level off.
    """

    ell_spec: EllSpec = "j_plus_1"

    def ell(self, j: int) -> int:
        if j < 1:
            raise ScheduleRangeError(f"ell is indexed from 1, got {j}")
        spec = self.ell_spec
        if spec == "j_plus_1":
            return j + 1
        if callable(spec):
            return int(spec(j))
        if isinstance(spec, str):
            raise ConstructionError(f"unknown ell spec {spec!r}")
        if len(spec) == 0:
            return 0
        if j > len(spec):
            raise ScheduleRangeError(f"ell list has {len(spec)} entries, level {j} requested")
        return int(spec[j - 1])

    @property
    def is_empty(self) -> bool:
        return not callable(self.ell_spec) and not isinstance(self.ell_spec, str) \
            and len(self.ell_spec) == 0

    def level_of(self, n: int) -> Optional[int]:
        """The even i with 2^(i-1) <= n < 2^i, or None."""
        if n < 2:
            return None
        i = int(n).bit_length()
        return i if i % 2 == 0 else None

    def level_ell(self, i: int) -> int:
        """ell_{i/2} for even i >= 2, validated (0 means the level is off)."""
        if i < 2 or i % 2:
            raise ConstructionError(f"levels are positive even integers, got {i}")
        val = self.ell(i // 2)
        if val == 1:
            raise ConstructionError("ell = 1 would need a dilation by 0; active levels need ell >= 2")
        if val < 0:
            raise ConstructionError(f"ell must be a nonnegative integer, got {val}")
        return val

    def s(self, n: int) -> float:
        i = self.level_of(n)
        if i is None:
            return 0.0
        ell = self.level_ell(i)
        return 0.0 if ell == 0 else math.log2(1.0 - 1.0 / math.sqrt(ell))

    def t(self, n: int) -> float:
        i = self.level_of(n)
        if i is None:
            return 0.0
        ell = self.level_ell(i)
        return 0.0 if ell == 0 else 1.0 / math.sqrt(ell)

    def check_range(self, i_max: int) -> None:
        if self.is_empty:
            return
        for i in range(2, i_max + 1, 2):
            self.level_ell(i)

    def describe(self):
        spec = self.ell_spec
        return spec if isinstance(spec, str) else (list(spec) if not callable(spec) else "callable")


# ---------------------------------------------------------------------------
# the kit


@dataclass(frozen=True)
class ConstructionKit:
    chart: Chart
    schedule: Schedule
    i_max: int
    generators: dict = field(compare=False)
    h_focus: Optional[int] = None

    @property
    def fhat(self) -> Diffeo:
        return self.generators["fhat"]

    @property
    def f(self) -> Diffeo:
        return self.generators["f"]

    @property
    def g(self) -> Diffeo:
        return self.generators["g"]

    @property
    def hhat(self) -> Diffeo:
        return self.generators["hhat"]

    @property
    def h(self) -> Diffeo:
        return self.generators["h"]

    @property
    def psi(self) -> Diffeo:
        return self.generators["psi"]

    @cached_property
    def fbar(self) -> Diffeo:
        return compose_all([self.f, self.g], name="fbar")

    def x(self, q) -> float:
        return MarkerIndex(q).point(self.chart)

    def active_blocks(self) -> list[int]:
        """Indices n of the blocks [x_n, x_{n+1}] where h and hhat move points."""
        if self.schedule.is_empty:
            return []
        out = []
        for n in range(2, 2 ** self.i_max):
            if self.schedule.t(n) != 0.0:
                out.append(n)
        return out

    def summary(self) -> dict:
        markers = {str(q): self.x(q) for q in
                   (Fraction(-4), Fraction(-3, 4), Fraction(-1, 2), 0, Fraction(1, 2), 1, 2, 64)}
        return {
            "chart": {"field": self.chart.field_name, "basepoint": self.chart.basepoint},
            "ell": self.schedule.describe(),
            "i_max": self.i_max,
            "markers": markers,
            "generators": {k: {"primitives": len(v.word),
                               "support": [list(iv) for iv in v.cached_support]}
                           for k, v in self.generators.items()},
        }


def _block_tables(chart: Chart, schedule: Schedule, i_max: int):
    c = chart.offset
    n_first, n_last = 2, 2 ** i_max
    h_rows, hh_rows = [], []
    for n in range(n_first, n_last):
        t, s = schedule.t(n), schedule.s(n)
        h_rows.append((1.0, t))
        lam = 2.0 ** s
        hh_rows.append((lam, c * (1.0 - lam)))
    return n_first, tuple(h_rows), tuple(hh_rows)


def build_kit(chart: Chart, schedule: Schedule | None = None, i_max: int = 6,
              h_focus: Optional[int] = None) -> ConstructionKit:
    """Build the six generators over ``chart``.

    h and hhat are materialised on the blocks 2 <= n < 2^i_max only; beyond
    that they are the identity.
    """
    schedule = schedule or Schedule()
    if i_max < 2 or i_max % 2:
        raise ConstructionError(f"i_max must be even and >= 2, got {i_max}")
    schedule.check_range(i_max)
    c = chart.offset
    x0, x1 = (float(v) for v in chart.phi(np.array([0.0, 1.0])))
    xm12, xm34 = (float(v) for v in chart.phi(np.array([-0.5, -0.75])))

    gens = {
        "fhat": Diffeo.from_primitive(ChartAffine(2.0, -c), "fhat"),
        "f": Diffeo.from_primitive(ChartAffine(1.0, 1.0), "f"),
        "g": Diffeo.from_primitive(BlockAffine(x0, x1, 1.0, 1.0), "g"),
    }
    n_first, h_rows, hh_rows = _block_tables(chart, schedule, i_max)
    if schedule.is_empty or all(r == (1.0, 0.0) for r in h_rows):
        gens["hhat"] = Diffeo((), (), "hhat")
        gens["h"] = Diffeo((), (), "h")
    else:
        gens["hhat"] = Diffeo.from_primitive(BlockFlow(x0, x1, c, n_first, hh_rows), "hhat")
        gens["h"] = Diffeo.from_primitive(BlockFlow(x0, x1, c, n_first, h_rows), "h")
    psi = monotone_hermite(
        [AMBIENT[0], xm34, xm12, x0, x1, AMBIENT[1]],
        [AMBIENT[0], 0.0, xm12, x0, 1.0, AMBIENT[1]],
        clamp={2: 1.0, 3: 1.0},
    )
    gens["psi"] = Diffeo.from_primitive(psi, "psi")
    return ConstructionKit(chart, schedule, i_max, gens, h_focus)


# ---------------------------------------------------------------------------
# words realised as maps


def realize(kit: ConstructionKit, word: GeneratorWord, name: str = "",
            track_support: bool = True) -> Diffeo:
    """The map of a generator word, letter powers expanded into primitives."""
    parts = [power(kit.generators[g], e) for g, e in word.letters]
    d = compose_all(parts, name=name or str(word))
    if track_support:
        sup = support_of(kit, word)
        d = Diffeo(d.word, sup.as_floats(kit.chart), d.name)
    return d


def h_n_word(n: int) -> GeneratorWord:
    """(f^-n g f^n)(f^-(n-1) g f^(n-1)) ... (f^-1 g f)."""
    w = GeneratorWord()
    for m in range(n, 0, -1):
        w = w * GeneratorWord.of(("f", -m), ("g", 1), ("f", m))
    return w


def h_n_map(kit: ConstructionKit, n: int) -> Diffeo:
    if n < 0:
        raise ValueError("h_n needs n >= 0")
    if n == 0:
        return IDENTITY
    return realize(kit, h_n_word(n), name=f"h_{n}")


def h_n_via_fbar_word(n: int) -> GeneratorWord:
    """f^-n f^-1 fbar^n f with fbar = f g."""
    fbar_n = GeneratorWord.of(("f", 1), ("g", 1)) ** n
    return GeneratorWord.gen("f", -n - 1) * fbar_n * GeneratorWord.gen("f", 1)


def commutator_words(i: int, f_power: Optional[GeneratorWord] = None):
    """Words for a_n, b_n, c_n with n = 2^i; ``f_power`` replaces f^n if given."""
    n = 2 ** i
    fn = f_power if f_power is not None else GeneratorWord.gen("f", n)
    fh = GeneratorWord.gen("fhat", i)
    conj = fh.inverse() * fn.inverse()
    a = conj * GeneratorWord.gen("h") * conj.inverse()
    b = GeneratorWord.gen("psi") * conj * GeneratorWord.gen("hhat") * conj.inverse() \
        * GeneratorWord.gen("psi", -1)
    c = a * b * a.inverse() * b.inverse()
    return a, b, c


def _check_level(kit: ConstructionKit, i: int) -> None:
    if i < 2 or i % 2 or i > kit.i_max:
        raise ConstructionError(f"level i must be even with 2 <= i <= {kit.i_max}, got {i}")


def commutator_chain(kit: ConstructionKit, i: int):
    """(a_n, b_n, c_n) as maps, n = 2^i."""
    _check_level(kit, i)
    a, b, c = commutator_words(i)
    n = 2 ** i
    return (realize(kit, a, f"a_{n}"), realize(kit, b, f"b_{n}"), realize(kit, c, f"c_{n}"))


def key_word(i: int, ell: int, f_power: Optional[GeneratorWord] = None) -> GeneratorWord:
    """(fhat^i c_n fhat^-i)^ell."""
    _, _, c = commutator_words(i, f_power)
    fh = GeneratorWord.gen("fhat", i)
    return (fh * c * fh.inverse()) ** ell


# ---------------------------------------------------------------------------
# exact supports

# endpoint = (rank, q): ambient -1, 0 carry ranks 0, 1; markers rank 2; ambient 1, 2 ranks 3, 4
_AMB = {-1: (0, Fraction(0)), 0: (1, Fraction(0)), 1: (3, Fraction(0)), 2: (4, Fraction(0))}
Endpoint = tuple


def amb(v: int) -> Endpoint:
    return _AMB[v]


def mk(q) -> Endpoint:
    return (2, Fraction(q))


def endpoint_value(e: Endpoint, chart: Chart) -> float:
    rank, q = e
    if rank == 2:
        return float(chart.phi(float(q)))
    return {0: -1.0, 1: 0.0, 3: 1.0, 4: 2.0}[rank]


def endpoint_label(e: Endpoint) -> str:
    rank, q = e
    return f"x_{q}" if rank == 2 else str({0: -1, 1: 0, 3: 1, 4: 2}[rank])


@dataclass(frozen=True)
class SupportSet:
    """Union of closed intervals with endpoints in the marker lattice.

    ``exact`` is False once some endpoint had to be widened to a bracket.
    """

    intervals: tuple[tuple[Endpoint, Endpoint], ...]
    exact: bool = True

    def as_floats(self, chart: Chart) -> tuple[tuple[float, float], ...]:
        return merge_intervals((endpoint_value(a, chart), endpoint_value(b, chart))
                               for a, b in self.intervals)

    def labels(self) -> list[tuple[str, str]]:
        return [(endpoint_label(a), endpoint_label(b)) for a, b in self.intervals]

    def contains_interval(self, lo: Endpoint, hi: Endpoint) -> bool:
        return any(a <= lo and hi <= b for a, b in self.intervals)


def _merge(intervals) -> tuple:
    out: list[list] = []
    for a, b in sorted(iv for iv in intervals if iv[0] < iv[1]):
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return tuple((a, b) for a, b in out)


def _block_intervals(blocks: Sequence[int]):
    return _merge((mk(n), mk(n + 1)) for n in blocks)


def _h_blocks(kit: ConstructionKit):
    if kit.h_focus is None:
        return _block_intervals(kit.active_blocks())
    i = kit.h_focus
    return _merge([(amb(0), mk(2 ** (i - 2))), (mk(2 ** (i - 1)), mk(2 ** i)),
                   (mk(2 ** (i + 1)), amb(1))])


def _base_support(kit: ConstructionKit, gen: str):
    if gen in ("f", "fhat"):
        return ((amb(0), amb(1)),)
    if gen == "g":
        return ((mk(0), mk(1)),)
    if gen in ("h", "hhat"):
        return _h_blocks(kit)
    if gen == "psi":
        return ((amb(-1), mk(Fraction(-1, 2))), (mk(0), amb(2)))
    raise ValueError(gen)


def _psi_point(e: Endpoint, sign: int):
    """Bracket (lo, hi, exact) for psi^sign of the point e."""
    rank, q = e
    if rank in (0, 4):
        return e, e, True
    if sign > 0:
        if rank == 1:
            return amb(-1), amb(0), False
        if rank == 3:
            return amb(1), amb(2), False
        if q < Fraction(-3, 4):
            return amb(-1), amb(0), False
        if q == Fraction(-3, 4):
            return amb(0), amb(0), True
        if q < Fraction(-1, 2):
            return amb(0), mk(Fraction(-1, 2)), False
        if q <= 0:
            return e, e, True
        if q < 1:
            return mk(0), amb(1), False
        if q == 1:
            return amb(1), amb(1), True
        return amb(1), amb(2), False
    # psi^-1
    if rank == 1:
        return mk(Fraction(-3, 4)), mk(Fraction(-3, 4)), True
    if rank == 3:
        return mk(1), mk(1), True
    if q < Fraction(-1, 2):
        return mk(Fraction(-3, 4)), mk(Fraction(-1, 2)), False
    if q <= 0:
        return e, e, True
    return mk(0), mk(1), False


def _letter_point(kit: ConstructionKit, gen: str, sign: int, e: Endpoint):
    rank, q = e
    if gen == "psi":
        return _psi_point(e, sign)
    if rank != 2:
        return e, e, True
    if gen == "f":
        return mk(q + sign), mk(q + sign), True
    if gen == "fhat":
        p = q * 2 if sign > 0 else q / 2
        return mk(p), mk(p), True
    if gen == "g":
        if 0 < q < 1:
            return mk(0), mk(1), False
        return e, e, True
    # h, hhat preserve each block
    for lo, hi in _base_support(kit, gen):
        if lo < e < hi:
            return lo, hi, False
    return e, e, True


def _image(kit, gen, sign, intervals):
    out, exact = [], True
    for a, b in intervals:
        lo, _, ex1 = _letter_point(kit, gen, sign, a)
        _, hi, ex2 = _letter_point(kit, gen, sign, b)
        exact = exact and ex1 and ex2
        out.append((lo, hi))
    return _merge(out), exact


def support_of(kit: ConstructionKit, word: GeneratorWord) -> SupportSet:
    """A union of marker intervals containing the support of ``word``.

    Conjugates ``x S x^-1`` are recognised letter by letter and handled as
    ``x(supp S)``; everything else falls back to the union of the pieces.
    """
    letters = list(word.expanded())
    intervals, exact = _support_rec(kit, letters, 0, len(letters))
    return SupportSet(intervals, exact)


def _support_rec(kit, letters, lo, hi):
    result, exact = (), True
    k = lo
    while k < hi:
        gen, sign = letters[k]
        bal, j = sign, k + 1
        while j < hi:
            if letters[j][0] == gen:
                bal += letters[j][1]
                if bal == 0:
                    break
            j += 1
        if j < hi:
            # letters[k] S letters[j] with letters[j] = inverse letter
            inner, ex = _support_rec(kit, letters, k + 1, j)
            img, ex2 = _image(kit, gen, sign, inner)
            result = _merge(result + img)
            exact = exact and ex and ex2
            k = j + 1
        else:
            result = _merge(result + tuple(_base_support(kit, gen)))
            k += 1
    return result, exact


# ---------------------------------------------------------------------------
# the key identity


@dataclass(frozen=True)
class KeyIdentityResult:
    i: int
    ell: int
    residual: float
    r_exact: str
    r_exact_ok: bool
    r_measured_max_error: float
    grid_points: int

    def passed(self, tol: float = 1e-7) -> bool:
        return self.residual < tol and self.r_exact_ok


def exact_flow_time(ell: int):
    """(1 - 2^s) t with s = log2(1 - 1/sqrt(ell)), t = 1/sqrt(ell), simplified exactly."""
    L = sympy.Integer(ell)
    s = sympy.log(1 - 1 / sympy.sqrt(L), 2)
    t = 1 / sympy.sqrt(L)
    return sympy.nsimplify(sympy.simplify((1 - sympy.Integer(2) ** s) * t))


def refined_grid(kit: ConstructionKit, lo_q: float, hi_q: float, per_block: int = 400,
                 uniform: int = 10**4) -> np.ndarray:
    """Uniform ambient grid plus points dense in every block of [x_lo, x_hi]."""
    pts = [np.linspace(AMBIENT[0], AMBIENT[1], uniform)]
    qs = np.linspace(lo_q, hi_q, int(round(hi_q - lo_q)) * per_block + 1)
    pts.append(kit.chart.phi(qs))
    y_lo, y_hi = kit.chart.phi(np.array([lo_q, hi_q]))
    pts.append(np.linspace(y_lo, y_hi, uniform))
    return np.unique(np.concatenate(pts))


def key_identity_check(kit: ConstructionKit, i: int, per_block: int = 400) -> KeyIdentityResult:
    _check_level(kit, i)
    n = 2 ** i
    ell = kit.schedule.level_ell(i)
    if ell == 0:
        raise ConstructionError(f"level {i} is switched off; nothing to check")
    lhs = h_n_map(kit, n // 2)
    rhs = realize(kit, key_word(i, ell), track_support=False)
    grid = refined_grid(kit, -(n // 2), 0.0, per_block)
    residual = sup_distance(lhs, rhs, grid)

    r = exact_flow_time(ell)
    r_ok = bool(sympy.simplify(r - sympy.Rational(1, ell)) == 0)

    # one commutator step read in the block's own chart time
    step = realize(kit, key_word(i, 1), track_support=False)
    worst = 0.0
    x0, x1 = kit.x(0), kit.x(1)
    p = np.linspace(0.3, 0.7, 12)
    t_before = cm.T_of_y(p)
    for k in range(-(n // 2), 0):
        y = cm.chart_affine(x0 + p * (x1 - x0), 1.0, float(k))[0]
        back = cm.chart_affine(step.evaluate(y), 1.0, float(-k))[0]
        t_after = cm.T_of_y((back - x0) / (x1 - x0))
        worst = max(worst, float(np.max(np.abs(t_after - t_before - 1.0 / ell))))
    return KeyIdentityResult(i, ell, residual, str(r), r_ok, worst, grid.size)


def endpoint_c1_profile(kit: ConstructionKit, gen: str = "h", samples: int = 200):
    """max |D gen - 1| over each active level's blocks, listed by level."""
    d = kit.generators[gen]
    out = []
    for i in range(2, kit.i_max + 1, 2):
        ell = kit.schedule.level_ell(i) if not kit.schedule.is_empty else 0
        if ell == 0:
            continue
        qs = np.linspace(2 ** (i - 1), 2 ** i, (2 ** (i - 1)) * samples + 1)
        der = d.derivative(kit.chart.phi(qs))
        out.append((i, float(np.max(np.abs(der - 1.0)))))
    return out


def marker_transport_errors(kit: ConstructionKit, qs=(-4, Fraction(-3, 4), Fraction(-1, 2), 0,
                                                      Fraction(1, 2), 1, 2)):
    """Rows (q, |f(x_q) - x_{q+1}|, |fhat(x_q) - x_{2q}|)."""
    rows = []
    for q in qs:
        m = MarkerIndex(q)
        xq = m.point(kit.chart)
        ef = abs(kit.f.evaluate(xq) - m.shift().point(kit.chart))
        eh = abs(kit.fhat.evaluate(xq) - m.scale().point(kit.chart))
        rows.append((m.q, ef, eh))
    return rows


__all__ = [
    "MarkerIndex", "Schedule", "ConstructionKit", "build_kit", "realize", "h_n_word", "h_n_map",
    "h_n_via_fbar_word", "commutator_words", "commutator_chain", "key_word", "support_of",
    "SupportSet", "key_identity_check", "KeyIdentityResult", "exact_flow_time", "refined_grid",
    "endpoint_c1_profile", "marker_transport_errors", "mk", "amb", "GENERATORS", "invert",
]
