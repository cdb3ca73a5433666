"""Word-length certificates: explicit upper words and derivative-growth lower bounds.

Upper bounds come from writing an element as an explicit generator word and
checking numerically that the word evaluates to it.  Lower bounds use the
fact that a word of length m has derivative at most C^m, where C bounds the
derivatives of the generators and their inverses.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .construction import (ConstructionKit, commutator_words, key_word, realize, refined_grid)
from .diffeo import (AMBIENT, BlockAffine, ChartAffine, Diffeo, compose_all, invert, power,
                     sup_distance)
from .errors import ConstructionError, TrivialElementError
from .words import GeneratorWord

CERT_RESIDUAL_TOL = 1e-7


# ---------------------------------------------------------------------------
# powers of f from the Baumslag-Solitar relation


def bs_power_word(n: int) -> GeneratorWord:
    """A word in {fhat, f} for f^n, by Horner's rule on the binary digits of n.

    f^(2m+b) = fhat f^m fhat^-1 f^b, so the length is
    2*floor(log2 n) + popcount(n).
    """
    if n < 1:
        raise ValueError("bs_power_word needs n >= 1")
    word = GeneratorWord()
    for bit in bin(n)[2:]:
        if word.letters:
            word = GeneratorWord.gen("fhat") * word * GeneratorWord.gen("fhat", -1)
        if bit == "1":
            word = word * GeneratorWord.gen("f")
    return word


def bs_length_formula(n: int) -> int:
    return 2 * (n.bit_length() - 1) + bin(n).count("1")


def bs_length_bound(n: int) -> int:
    """The looser bound 2 floor(log2 n) + popcount(n) (2 floor(log2 n) + 1)."""
    k = n.bit_length() - 1
    return 2 * k + bin(n).count("1") * (2 * k + 1)


# ---------------------------------------------------------------------------
# generator derivative bounds


def _refined_max(d: Diffeo, x: np.ndarray, values: np.ndarray, passes: int = 1,
                 points: int = 2001) -> tuple[float, float]:
    best = int(np.argmax(values))
    top, where = float(values[best]), float(x[best])
    for _ in range(passes):
        lo = x[max(best - 1, 0)]
        hi = x[min(best + 1, x.size - 1)]
        xs = np.linspace(lo, hi, points)
        vals = np.asarray(d.derivative(xs))
        k = int(np.argmax(vals))
        if vals[k] > top:
            top, where = float(vals[k]), float(xs[k])
        x, best = xs, k
    return top, where


def sup_derivative(d: Diffeo, grid: int = 10**4, chart=None) -> tuple[float, float]:
    """(grid max of Dd, location), with one refinement pass around the maximum."""
    x = np.linspace(AMBIENT[0], AMBIENT[1], grid)
    if chart is not None:
        x = np.unique(np.concatenate([x, chart.phi(np.sinh(np.linspace(-8, 8, grid)))]))
    vals = np.asarray(d.derivative(x))
    return _refined_max(d, x, vals)


def generator_constant(gens: Sequence[Diffeo], grid: int = 10**4, chart=None) -> dict:
    """C = max over gens and their inverses of sup D, with per-map detail."""
    detail = {}
    for k, g in enumerate(gens):
        label = g.name or f"gen{k}"
        for sign, m in (("+", g), ("-", invert(g))):
            val, where = sup_derivative(m, grid, chart) if m.word else (1.0, 0.0)
            detail[f"{label}{sign}"] = {"sup": val, "at": where}
    C = max(v["sup"] for v in detail.values())
    return {"C": C, "grid": grid, "detail": detail}


# ---------------------------------------------------------------------------
# lower bounds


@dataclass(frozen=True)
class LowerBoundResult:
    C: float
    rows: tuple[tuple[int, float, float], ...]   # (n, max D d^n, log(max)/log C)
    witnesses: tuple[tuple[int, float, float], ...]  # (n, x, D d^n(x)) with D >= n
    grid: int

    def bound(self, n: int) -> float:
        for k, _, b in self.rows:
            if k == n:
                return b
        raise KeyError(n)


def orbit_derivatives(d: Diffeo, x: np.ndarray, n_max: int):
    """D d^k(x) for k = 1..n_max by the chain rule along orbits; shape (n_max, len(x))."""
    y = np.asarray(x, dtype=float).copy()
    acc = np.ones_like(y)
    out = np.empty((n_max, y.size))
    for k in range(n_max):
        y, der = d.evaluate_with_derivative(y)
        acc = acc * der
        out[k] = acc
    return out


def derivative_growth_lower_bound(d: Diffeo, gens: Sequence[Diffeo], n_list: Sequence[int],
                                  grid: int = 10**4, chart=None,
                                  C: Optional[float] = None) -> LowerBoundResult:
    """log(max_x D d^n(x)) / log C for each n, plus all witnesses D d^n(x) >= n."""
    x = np.linspace(AMBIENT[0], AMBIENT[1], grid)
    if chart is not None:
        x = np.unique(np.concatenate([x, chart.phi(np.sinh(np.linspace(-8, 8, grid)))]))
    if not d.word or float(np.max(np.abs(d.evaluate(x) - x))) < 1e-12:
        raise TrivialElementError("trivial element has no lower bound")
    if C is None:
        C = generator_constant(gens, grid, chart)["C"]
    if C <= 1.0:
        raise ConstructionError(f"generator constant C = {C} gives no bound")
    n_max = max(n_list)
    ders = orbit_derivatives(d, x, n_max)
    rows = []
    for n in n_list:
        row = ders[n - 1]
        best = int(np.argmax(row))
        m_n = float(row[best])
        # refine around the best grid point
        lo, hi = x[max(best - 1, 0)], x[min(best + 1, x.size - 1)]
        fine = np.linspace(lo, hi, 2001)
        m_n = max(m_n, float(np.max(power(d, n).derivative(fine))))
        rows.append((int(n), m_n, math.log(m_n) / math.log(C)))
    witnesses = []
    for k in range(1, n_max + 1):
        hit = np.nonzero(ders[k - 1] >= k)[0]
        if hit.size:
            j = hit[np.argmax(ders[k - 1][hit])]
            witnesses.append((k, float(x[j]), float(ders[k - 1][j])))
    return LowerBoundResult(C, tuple(rows), tuple(witnesses), int(x.size))


# ---------------------------------------------------------------------------
# upper words for fbar^(n/2)


@dataclass
class Certificate:
    target: str
    power: int
    i: int
    ell: int
    word: GeneratorWord
    residual: float
    lower: float
    paper_budget: int
    length_bound: int
    accounting: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    residual_tol: float = CERT_RESIDUAL_TOL

    @property
    def upper_length(self) -> int:
        return self.word.length

    @property
    def consistent(self) -> bool:
        return self.lower <= self.upper_length

    @property
    def passed(self) -> bool:
        return (self.residual < self.residual_tol and self.consistent
                and self.upper_length <= self.length_bound
                and self.accounting.get("chain_holds", True))

    def to_json(self) -> dict:
        return {
            "target": self.target, "power": self.power, "i": self.i, "ell": self.ell,
            "word": self.word.to_json(), "upper_length": self.upper_length,
            "residual": self.residual, "lower": self.lower, "consistent": self.consistent,
            "paper_budget": self.paper_budget, "length_bound": self.length_bound,
            "accounting": self.accounting, "grid": self.grid, "residual_tol": self.residual_tol,
        }

    @classmethod
    def from_json(cls, obj) -> "Certificate":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(obj["target"], obj["power"], obj["i"], obj["ell"],
                   GeneratorWord.from_json(obj["word"]), obj["residual"], obj["lower"],
                   obj["paper_budget"], obj["length_bound"], obj.get("accounting", {}),
                   obj.get("grid", {}), obj.get("residual_tol", CERT_RESIDUAL_TOL))


def fbar_word(n: int) -> GeneratorWord:
    return GeneratorWord.of(("f", 1), ("g", 1)) ** n


def h_half_word(i: int, ell: int) -> GeneratorWord:
    """(fhat^i c_n fhat^-i)^ell with f^n written as its BS word, n = 2^i."""
    return key_word(i, ell, bs_power_word(2 ** i))


def certificate_grid(kit: ConstructionKit, m: int) -> np.ndarray:
    return refined_grid(kit, -float(m + 1), float(m + 1), per_block=40)


def fbar_power_certificate(kit: ConstructionKit, i: int, lower: Optional[LowerBoundResult] = None,
                           grid: Optional[np.ndarray] = None) -> Certificate:
    """Certificate for fbar^(n/2), n = 2^i, via fbar^m = f f^m h_m f^-1."""
    if i < 2 or i % 2 or i > kit.i_max:
        raise ConstructionError(f"i must be a positive even integer <= {kit.i_max}, got {i}")
    n, m = 2 ** i, 2 ** (i - 1)
    ell = kit.schedule.level_ell(i)
    if ell == 0:
        raise ConstructionError(f"level {i} is switched off; no certificate")
    fn = bs_power_word(n)
    fm = bs_power_word(m)
    a, b, c = commutator_words(i, fn)
    fh = GeneratorWord.gen("fhat", i)
    step = fh * c * fh.inverse()
    h_word = step ** ell
    word = GeneratorWord.gen("f") * fm * h_word * GeneratorWord.gen("f", -1)

    len_fn = fn.length
    budget = 2 * ell * (5 * i + 4 + 4 * len_fn)
    chain = {
        "len_f_n": len_fn, "len_a": a.length, "len_b": b.length, "len_c": c.length,
        "len_step": step.length, "len_h": h_word.length,
        "a_bound": 2 * i + 1 + 2 * len_fn, "b_bound": 2 * i + 3 + 2 * len_fn,
        "step_bound": 2 * i + c.length, "h_bound_step": ell * step.length,
        "h_bound_ab": 2 * ell * (i + a.length + b.length), "h_budget": budget,
    }
    chain["chain_holds"] = bool(
        a.length <= chain["a_bound"] and b.length <= chain["b_bound"]
        and c.length <= 2 * (a.length + b.length)
        and step.length <= chain["step_bound"]
        and h_word.length <= chain["h_bound_step"] <= ell * (2 * i + c.length)
        <= chain["h_bound_ab"] <= budget
    )
    bound = budget + fm.length + 2

    target = power(kit.fbar, m)
    pts = grid if grid is not None else certificate_grid(kit, m)
    residual = sup_distance(realize(kit, word, track_support=False), target, pts)
    low = 0.0
    if lower is not None:
        try:
            low = lower.bound(m)
        except KeyError:
            low = 0.0
    return Certificate(f"fbar^{m}", m, i, ell, word, residual, low, budget, bound, chain,
                       {"points": int(np.size(pts))})


def replay_certificate(kit: ConstructionKit, cert: Certificate, grid=None) -> float:
    """Residual of a (deserialised) certificate's word against fbar^power."""
    pts = grid if grid is not None else certificate_grid(kit, cert.power)
    return sup_distance(realize(kit, cert.word, track_support=False),
                        power(kit.fbar, cert.power), pts)


def interpolated_upper_bounds(certified: dict[int, int], n_max: int) -> dict[int, int]:
    """Upper bounds on |fbar^m| for m = 1..n_max from certified powers.

    Word length is subadditive, |fbar^(a+b)| <= |fbar^a| + |fbar^b|, so the
    bound for m is the cheapest way of writing m as a sum of certified powers
    (unbounded knapsack).  fbar = f g itself has length 2.
    """
    known = {1: 2}
    known.update({int(p): int(v) for p, v in certified.items() if 1 <= p <= n_max})
    best = [0] + [math.inf] * n_max
    for m in range(1, n_max + 1):
        best[m] = min(best[m - p] + v for p, v in known.items() if p <= m)
    return {m: int(best[m]) for m in range(1, n_max + 1)}


# ---------------------------------------------------------------------------
# Lipschitz chain


@dataclass(frozen=True)
class LipschitzChain:
    L: float
    word_length: int
    bound: float          # word_length * log L
    measured: float       # log Lip of the composed map
    n: Optional[int] = None

    @property
    def holds(self) -> bool:
        return self.measured <= self.bound + 1e-6

    @property
    def entropy_surrogate(self) -> Optional[float]:
        """dimension * word_length * log L / n (dimension 1)."""
        return None if not self.n else self.bound / self.n


def lipschitz_chain_check(kit: ConstructionKit, word: GeneratorWord, gens: Sequence[str] = None,
                          n: Optional[int] = None, grid: int = 10**4,
                          L: Optional[float] = None) -> LipschitzChain:
    """log Lip(word) <= |word| log L with L the largest generator Lipschitz constant."""
    if not word.letters:
        raise ValueError("lipschitz_chain_check needs a nonempty word")
    names = gens if gens is not None else sorted({g for g, _ in word.letters})
    if L is None:
        L = generator_constant([kit.generators[g] for g in names], grid, kit.chart)["C"]
    measured, _ = sup_derivative(realize(kit, word, track_support=False), grid, kit.chart)
    return LipschitzChain(L, word.length, word.length * math.log(L), math.log(measured), n)


# ---------------------------------------------------------------------------
# Kopell-type C1 extension test


@dataclass(frozen=True)
class KopellRow:
    n: int
    tau: float
    e_n: float            # max |Dg - 1| on the n-th fundamental interval
    eps_n: float          # max |Dg_n - 1| on the reference interval
    max_log_ratio: float  # max |log(Df^n(z_n) / Df^n(y_n))| over samples
    bound: float          # C * eps_n * e^C
    chain_rule_residual: float


@dataclass(frozen=True)
class KopellResult:
    C: float
    rows: tuple[KopellRow, ...]
    threshold: float

    @property
    def e(self) -> dict:
        return {r.n: r.e_n for r in self.rows}

    def decreasing_from(self, n0: int) -> bool:
        es = [r.e_n for r in self.rows if r.n >= n0]
        return all(b < a for a, b in zip(es, es[1:]))

    @property
    def bound_holds(self) -> bool:
        return all(r.max_log_ratio <= r.bound + 1e-12 for r in self.rows)

    @property
    def verdict_c1(self) -> bool:
        return self.decreasing_from(min(4, self.rows[-1].n)) and self.rows[-1].e_n < self.threshold

    def floor(self, n0: int = 1) -> float:
        return min(r.e_n for r in self.rows if r.n >= n0)


def kopell_check(kit: ConstructionKit, tau: Callable[[int], float], n_max: int = 32,
                 samples: int = 400, threshold: float = 0.05) -> KopellResult:
    """Build g blockwise from translations of time tau(n) and measure C1 convergence.

    The contracting map is kit f^-1 on [0, x_0], so its n-th fundamental
    interval [x_{n+1}, x_n] in the lemma's indexing is [x_{-n-1}, x_{-n}] here,
    and g_n acts on the reference interval [x_{-1}, x_0].
    """
    chart = kit.chart
    x0, xm1 = kit.x(0), kit.x(-1)
    contract = invert(kit.f)
    # flatness makes the map numerically the identity near 0, so strict
    # contraction is tested on the part of (0, x_0) the check visits
    probe = np.linspace(kit.x(-n_max - 1), x0, 2001)[:-1]
    if np.any(contract.evaluate(probe) >= probe):
        raise ConstructionError("the contracting map has a fixed point inside (0, x_0)")

    # Lipschitz constant of log D(contract) on [0, x_0]
    xs = np.linspace(0.0, x0, 200001)
    logd = np.log(contract.derivative(xs))
    C = float(np.max(np.abs(np.diff(logd)) / np.diff(xs)))

    q_ref = np.linspace(-1.0, 0.0, samples + 1)[1:-1]
    y_ref = np.unique(np.concatenate([chart.phi(q_ref), np.linspace(xm1, x0, samples)[1:-1]]))
    rows = []
    for n in range(1, n_max + 1):
        t = float(tau(n))
        g_n = Diffeo.from_primitive(BlockAffine(xm1, x0, 1.0, t))
        eps = float(np.max(np.abs(g_n.derivative(y_ref) - 1.0)))
        shift = Diffeo.from_primitive(ChartAffine(1.0, float(n)))  # lemma f^-n
        g = compose_all([invert(shift), g_n, shift])
        y = invert(shift).evaluate(y_ref)          # points of [x_{-n-1}, x_{-n}]
        dg = g.derivative(y)
        e_n = float(np.max(np.abs(dg - 1.0)))
        # chain-rule identity Dg(y) = Df^n(z_n)/Df^n(y_n) * Dg_n(y_n) with f^n = kit f^-n
        y_n = y_ref
        z_n, dgn = g_n.evaluate_with_derivative(y_n)
        fn = invert(shift)
        ratio = fn.derivative(z_n) / fn.derivative(y_n)
        resid = float(np.max(np.abs(ratio * dgn - dg)))
        log_ratio = float(np.max(np.abs(np.log(ratio))))
        rows.append(KopellRow(n, t, e_n, eps, log_ratio, C * eps * math.exp(C), resid))
    return KopellResult(C, tuple(rows), threshold)


__all__ = [
    "bs_power_word", "bs_length_formula", "bs_length_bound", "generator_constant",
    "sup_derivative", "derivative_growth_lower_bound", "LowerBoundResult", "Certificate",
    "fbar_power_certificate", "replay_certificate", "fbar_word", "h_half_word",
    "interpolated_upper_bounds",
    "lipschitz_chain_check", "LipschitzChain", "kopell_check", "KopellResult", "KopellRow",
    "orbit_derivatives",
]
