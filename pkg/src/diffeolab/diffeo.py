"""Diffeomorphisms of the ambient interval [-1, 2] stored as lazy words.

A :class:`Diffeo` keeps its word of primitive maps; nothing is ever resampled.
Evaluation encodes the word once into the flat opcode layout read by
:mod:`diffeolab.kernels` and pushes every point through it, accumulating the
chain-rule derivative on the way.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _chartmath as cm
from . import kernels
from ._pykernels import (OP_BLOCK_AFFINE, OP_BLOCK_FLOW, OP_CHART_AFFINE, OP_HERMITE,
                         OP_HERMITE_INV)
from .errors import ConstructionError, WordLengthError

AMBIENT = (-1.0, 2.0)
MAX_WORD_LENGTH = 10**6
EQUALITY_TOL = 1e-8
EQUALITY_GRID = 10**4

Interval = tuple[float, float]


def merge_intervals(intervals: Iterable[Interval]) -> tuple[Interval, ...]:
    """Sorted union of closed intervals, touching pieces merged."""
    pieces = sorted((float(a), float(b)) for a, b in intervals if b > a)
    out: list[list[float]] = []
    for a, b in pieces:
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return tuple((a, b) for a, b in out)


# ---------------------------------------------------------------------------
# primitives


class Primitive:
    """Base for the building blocks.  Subclasses are frozen dataclasses."""

    kind = "identity"

    def encode(self, exponent: int) -> tuple[int, list[float]]:
        raise NotImplementedError

    @property
    def support(self) -> tuple[Interval, ...]:
        return ()

    def params(self) -> dict:
        return {}

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.params()}


@dataclass(frozen=True)
class Identity(Primitive):
    kind = "identity"

    def encode(self, exponent):
        return 0, []


@dataclass(frozen=True)
class ChartAffine(Primitive):
    """The map acting as ``T -> a*T + b`` on the raw chart time ``T`` of (0, 1).

    With ``a = 1`` this is the time-``b`` map of the translation field; with
    ``b = c*(1 - a)`` it is a dilation about the chart point of raw time ``c``.
    """

    a: float
    b: float
    kind = "chart_affine"

    def __post_init__(self):
        if not self.a > 0.0:
            raise ConstructionError(f"chart-affine slope must be positive, got {self.a}")

    def inverse_params(self):
        return 1.0 / self.a, -self.b / self.a

    def encode(self, exponent):
        a, b = (self.a, self.b) if exponent > 0 else self.inverse_params()
        return OP_CHART_AFFINE, [a, b]

    @property
    def support(self):
        return () if (self.a == 1.0 and self.b == 0.0) else ((0.0, 1.0),)

    def params(self):
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True)
class BlockAffine(Primitive):
    """``ChartAffine(a, b)`` conjugated by the affine map [lo, hi] -> [0, 1]."""

    lo: float
    hi: float
    a: float
    b: float
    kind = "block_affine"

    def __post_init__(self):
        if not (self.hi > self.lo and self.a > 0.0):
            raise ConstructionError("block-affine needs lo < hi and a > 0")

    def encode(self, exponent):
        a, b = (self.a, self.b) if exponent > 0 else (1.0 / self.a, -self.b / self.a)
        return OP_BLOCK_AFFINE, [self.lo, self.hi, a, b]

    @property
    def support(self):
        return () if (self.a == 1.0 and self.b == 0.0) else ((self.lo, self.hi),)

    def params(self):
        return {"lo": self.lo, "hi": self.hi, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class BlockFlow(Primitive):
    """Independent block maps on the translates of one fundamental domain.

    On the block of chart indices ``[n, n+1]`` (raw time ``c + n`` to
    ``c + n + 1``) the map is the unit translation to the power ``n``
    conjugating ``BlockAffine(lo, hi, a_n, b_n)``, where ``[lo, hi]`` is the
    block of index 0.  ``table[k]`` holds ``(a, b)`` for ``n = n_first + k``.
    """

    lo: float
    hi: float
    c: float
    n_first: int
    table: tuple[tuple[float, float], ...]
    kind = "block_flow"

    def encode(self, exponent):
        rows = self.table if exponent > 0 else tuple((1.0 / a, -b / a) for a, b in self.table)
        data = [self.lo, self.hi, self.c, float(self.n_first), float(len(rows))]
        for a, b in rows:
            data.extend((a, b))
        return OP_BLOCK_FLOW, data

    def block_edges(self, n: int) -> Interval:
        lo, hi = cm.y_of_T(np.array([self.c + n, self.c + n + 1.0]))
        return float(lo), float(hi)

    @property
    def support(self):
        return merge_intervals(
            self.block_edges(self.n_first + k)
            for k, (a, b) in enumerate(self.table) if not (a == 1.0 and b == 0.0)
        )

    def params(self):
        return {"lo": self.lo, "hi": self.hi, "c": self.c, "n_first": self.n_first,
                "table": [list(r) for r in self.table]}


@dataclass(frozen=True)
class Hermite(Primitive):
    """Monotone piecewise-cubic C1 map through the given knots; identity outside."""

    knots: tuple[float, ...]
    values: tuple[float, ...]
    slopes: tuple[float, ...]
    kind = "hermite"

    def __post_init__(self):
        k, v, m = map(np.asarray, (self.knots, self.values, self.slopes))
        if not (len(k) == len(v) == len(m) >= 2):
            raise ConstructionError("hermite needs matching knot, value and slope lists")
        if np.any(np.diff(k) <= 0) or np.any(np.diff(v) <= 0) or np.any(m <= 0):
            raise ConstructionError("hermite data must be strictly increasing with positive slopes")
        if k[0] != v[0] or k[-1] != v[-1]:
            raise ConstructionError("hermite map must fix its outer knots")

    def encode(self, exponent):
        data = [float(len(self.knots)), *self.knots, *self.values, *self.slopes]
        return (OP_HERMITE if exponent > 0 else OP_HERMITE_INV), data

    @property
    def support(self):
        k, v, m = self.knots, self.values, self.slopes
        moving = []
        for j in range(len(k) - 1):
            still = (k[j] == v[j] and k[j + 1] == v[j + 1] and m[j] == 1.0 and m[j + 1] == 1.0)
            if not still:
                moving.append((k[j], k[j + 1]))
        return merge_intervals(moving)

    def params(self):
        return {"knots": list(self.knots), "values": list(self.values), "slopes": list(self.slopes)}


def monotone_hermite(knots: Sequence[float], values: Sequence[float],
                     clamp: dict[int, float] | None = None) -> Hermite:
    """Hermite map with harmonic-mean slopes, optionally clamped at given knot indices.

    Raises if a clamped slope breaks the Fritsch-Carlson monotonicity region.
    """
    k = np.asarray(knots, dtype=float)
    v = np.asarray(values, dtype=float)
    sec = np.diff(v) / np.diff(k)
    m = np.empty_like(k)
    m[0], m[-1] = sec[0], sec[-1]
    m[1:-1] = 2.0 / (1.0 / sec[:-1] + 1.0 / sec[1:])
    for idx, val in (clamp or {}).items():
        m[idx] = val
    alpha, beta = m[:-1] / sec, m[1:] / sec
    if np.any(alpha ** 2 + beta ** 2 > 9.0 + 1e-12):
        raise ConstructionError("clamped slopes leave the monotone region")
    return Hermite(tuple(k), tuple(v), tuple(m))


_KINDS = {cls.kind: cls for cls in (Identity, ChartAffine, BlockAffine, BlockFlow, Hermite)}


def primitive_from_json(obj: dict) -> Primitive:
    obj = dict(obj)
    kind = obj.pop("kind")
    if kind == "block_flow":
        obj["table"] = tuple(tuple(r) for r in obj["table"])
    if kind == "hermite":
        obj = {key: tuple(val) for key, val in obj.items()}
    return _KINDS[kind](**obj)


# ---------------------------------------------------------------------------
# words


@dataclass(frozen=True)
class Diffeo:
    """A diffeomorphism of [-1, 2] given by a word of primitives.

    The word reads left to right as a product, so ``word[-1]`` acts first.
    ``cached_support`` is a union of intervals containing the true support.
    """

    word: tuple[tuple[Primitive, int], ...] = ()
    cached_support: tuple[Interval, ...] = ()
    name: str = field(default="", compare=False)

    @staticmethod
    def from_primitive(prim: Primitive, name: str = "") -> "Diffeo":
        if isinstance(prim, Identity):
            return Diffeo((), (), name)
        return Diffeo(((prim, 1),), prim.support, name)

    def __len__(self) -> int:
        return len(self.word)

    @property
    def is_identity_word(self) -> bool:
        return not self.word

    @cached_property
    def _encoded(self):
        if len(self.word) > MAX_WORD_LENGTH:
            raise WordLengthError(
                f"word has {len(self.word)} primitives, guard is {MAX_WORD_LENGTH}")
        ops, offs, data, seen = [], [], [], {}
        for prim, e in self.word:
            key = (prim, e)
            if key not in seen:
                op, payload = prim.encode(e)
                seen[key] = (op, len(data))
                data.extend(payload)
            op, off = seen[key]
            if op:
                ops.append(op)
                offs.append(off)
        return (np.asarray(ops, dtype=np.int32), np.asarray(offs, dtype=np.int64),
                np.asarray(data, dtype=np.float64))

    def evaluate_with_derivative(self, x):
        scalar = np.ndim(x) == 0
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        ops, offs, data = self._encoded
        if ops.size == 0:
            y, d = xa.copy(), np.ones_like(xa)
        else:
            y, d = kernels.eval_word(ops, offs, data, xa)
        if scalar:
            return float(y[0]), float(d[0])
        return y, d

    def evaluate(self, x):
        return self.evaluate_with_derivative(x)[0]

    def derivative(self, x):
        return self.evaluate_with_derivative(x)[1]

    __call__ = evaluate

    def inverse(self) -> "Diffeo":
        return invert(self)

    # group notation
    def __matmul__(self, other: "Diffeo") -> "Diffeo":
        return compose(self, other)

    def __pow__(self, n: int) -> "Diffeo":
        return power(self, n)

    def to_json(self) -> dict:
        prims, index, letters = [], {}, []
        for prim, e in self.word:
            if prim not in index:
                index[prim] = len(prims)
                prims.append(prim.to_json())
            letters.append([index[prim], e])
        return {"name": self.name, "primitives": prims, "word": letters,
                "support": [list(iv) for iv in self.cached_support]}

    @staticmethod
    def from_json(obj: dict | str) -> "Diffeo":
        if isinstance(obj, str):
            obj = json.loads(obj)
        prims = [primitive_from_json(p) for p in obj["primitives"]]
        word = tuple((prims[i], int(e)) for i, e in obj["word"])
        support = tuple(tuple(iv) for iv in obj["support"])
        return Diffeo(word, support, obj.get("name", ""))


IDENTITY = Diffeo((), (), "id")


def compose(a: Diffeo, b: Diffeo, name: str = "") -> Diffeo:
    """The map ``a o b`` (``b`` acts first)."""
    return Diffeo(a.word + b.word, merge_intervals(a.cached_support + b.cached_support), name)


def compose_all(maps: Sequence[Diffeo], name: str = "") -> Diffeo:
    word: list = []
    support: list = []
    for m in maps:
        word.extend(m.word)
        support.extend(m.cached_support)
    return Diffeo(tuple(word), merge_intervals(support), name)


def invert(a: Diffeo, name: str = "") -> Diffeo:
    word = tuple((p, -e) for p, e in reversed(a.word))
    return Diffeo(word, a.cached_support, name or (a.name + "^-1" if a.name else ""))


def image_of_support(by: Diffeo, support: tuple[Interval, ...]) -> tuple[Interval, ...]:
    if not support:
        return ()
    ends = np.asarray(support, dtype=float).ravel()
    img = np.asarray(by.evaluate(ends)).reshape(-1, 2)
    return merge_intervals((float(lo), float(hi)) for lo, hi in img)


def conjugate(a: Diffeo, by: Diffeo, name: str = "") -> Diffeo:
    """``by o a o by^-1``; its support is ``by(supp a)``."""
    word = by.word + a.word + invert(by).word
    return Diffeo(word, image_of_support(by, a.cached_support), name)


def power(a: Diffeo, n: int, name: str = "") -> Diffeo:
    n = int(n)
    if n == 0 or not a.word:
        return Diffeo((), (), name or "id")
    base = a if n > 0 else invert(a)
    return Diffeo(base.word * abs(n), a.cached_support, name)


def _grid(grid) -> np.ndarray:
    if np.ndim(grid) == 0:
        n = int(grid)
        if n < 2:
            raise ValueError("grid needs at least two points")
        return np.linspace(AMBIENT[0], AMBIENT[1], n)
    return np.asarray(grid, dtype=float)


def sup_distance(a: Diffeo, b: Diffeo, grid=EQUALITY_GRID) -> float:
    """max |a(x) - b(x)| over a uniform grid of [-1, 2] (or the given points)."""
    x = _grid(grid)
    return float(np.max(np.abs(a.evaluate(x) - b.evaluate(x))))


def c1_distance(a: Diffeo, b: Diffeo, grid=EQUALITY_GRID) -> float:
    x = _grid(grid)
    ya, da = a.evaluate_with_derivative(x)
    yb, db = b.evaluate_with_derivative(x)
    return float(np.max(np.abs(ya - yb)) + np.max(np.abs(da - db)))


def numerically_equal(a: Diffeo, b: Diffeo, tol: float = EQUALITY_TOL,
                      grid=EQUALITY_GRID) -> bool:
    """Equality convention: grid sup-distance plus both ambient endpoints."""
    x = np.concatenate([_grid(grid), np.asarray(AMBIENT)])
    return sup_distance(a, b, x) < tol
