"""Check suites run by the command line.

Each suite returns a :class:`Report` of records.  A record's status is
``pass``, ``fail``, ``error`` (the check itself raised) or ``skipped``.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import certifiers as cert
from . import construction as con
from . import distortion as dist
from .chart import (X_FIELD, XHAT_FIELD, Chart, flatness_probe, flow, flow_derivative,
                    make_chart, pushforward)
from .config import ExperimentConfig
from .diffeo import (AMBIENT, ChartAffine, Diffeo, IDENTITY, compose, conjugate,
                     invert, power, sup_distance)
from .errors import ConstructionError, TrivialElementError
from .words import GENERATORS, GeneratorWord


@dataclass
class Record:
    name: str
    status: str
    measured: object
    threshold: object
    provenance: str
    op: str
    config_hash: str
    note: str = ""


@dataclass
class Report:
    suite: str
    records: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seconds: float = 0.0
    csv: dict = field(default_factory=dict)      # file name -> body
    artifacts: dict = field(default_factory=dict)  # file name -> JSON-able object

    @property
    def failed(self) -> bool:
        return any(r.status == "fail" for r in self.records)

    @property
    def errored(self) -> bool:
        return any(r.status == "error" for r in self.records)

    def to_json(self) -> dict:
        return {"suite": self.suite, "seconds": round(self.seconds, 3),
                "records": [asdict(r) for r in self.records]}


def _num(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


class Context:
    """Objects shared by the suites, built once up front."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.hash = cfg.digest()
        self.chart: Chart = make_chart(cfg.field, cfg.basepoint)
        self.schedule = con.Schedule(cfg.ell if isinstance(cfg.ell, str) else tuple(cfg.ell))
        self.kit = con.build_kit(self.chart, self.schedule, cfg.i_max)
        self.gens = [self.kit.generators[g] for g in GENERATORS]

    def levels(self) -> list[int]:
        out = []
        for i in range(2, self.cfg.i_max + 1, 2):
            if not self.schedule.is_empty and self.schedule.level_ell(i) != 0:
                out.append(i)
        return out

    def random_word(self, rng, max_len: int) -> GeneratorWord:
        n = int(rng.integers(1, max_len + 1))
        letters = [(GENERATORS[int(rng.integers(0, 6))], int(rng.choice((-1, 1))))
                   for _ in range(n)]
        return GeneratorWord(tuple(letters))


class Suite:
    def __init__(self, name: str, ctx: Context):
        self.report = Report(name, config=ctx.cfg.to_dict())
        self.ctx = ctx

    def add(self, name, ok, measured, threshold, provenance, op, note=""):
        status = "pass" if ok else "fail"
        self.report.records.append(Record(name, status, _num(measured), _num(threshold),
                                          provenance, op, self.ctx.hash, note))

    def skip(self, name, op, note):
        self.report.records.append(Record(name, "skipped", None, None, "TRIVIAL", op,
                                          self.ctx.hash, note))

    def run(self, name, op, provenance, fn: Callable[[], tuple]):
        """fn returns (ok, measured, threshold[, note])."""
        try:
            out = fn()
        except Exception as exc:  # recorded, the suite carries on
            self.report.records.append(Record(name, "error", None, None, provenance, op,
                                              self.ctx.hash, f"{type(exc).__name__}: {exc}"))
            return
        self.add(name, *out[:3], provenance, op, *(out[3:] or ("",)))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v) -> str:
    return f"{v:.10g}"


# ---------------------------------------------------------------------------


def chart_suite(ctx: Context) -> Report:
    s = Suite("probe-chart", ctx)
    c, cfg = ctx.chart, ctx.cfg
    tol = cfg.tol("flow")
    s.run("phi(0) = basepoint", "make_chart", "TRIVIAL",
          lambda: (abs(c.phi(0.0) - c.basepoint) < 1e-15, abs(float(c.phi(0.0)) - c.basepoint), 1e-15))
    s.run("phi(1) = time-1 Y flow of the basepoint", "make_chart", "TRIVIAL",
          lambda: _le(abs(float(c.phi(1.0)) - flow(c.field_Y, 1.0, c.basepoint)), tol))
    flat_rows = []
    for which in ("Y", "Yhat"):
        for end in ("left", "right"):
            def probe(which=which, end=end):
                p = flatness_probe(c, which, end=end)
                for r, k in enumerate(p.ks):
                    flat_rows.extend([which, end, k, _fmt(y), _fmt(v)] for y, v in zip(p.ys, p.loglog[r]))
                return (p.monotone and p.below(1e-6), float(np.min(p.loglog)), math.log(-math.log(1e-6)),
                        "min over samples of log(-log(V(y)/y^k)); larger is flatter")
            s.run(f"flatness of {which} at the {end} end (k = 1..8)", "make_chart", "DERIVED", probe)
    x = np.linspace(-50, 50, 101)
    s.run("flow(X, 1, x) = x + 1", "flow", "PAPER",
          lambda: _le(float(np.max(np.abs(flow(X_FIELD, 1.0, x) - (x + 1)))), 0.0, strict=False))
    s.run("flow(Xhat, 1, x) = 2x", "flow", "PAPER",
          lambda: _le(float(np.max(np.abs(flow(XHAT_FIELD, 1.0, x) - 2 * x))), 0.0, strict=False))
    s.run("D flow(Xhat, 1) = 2", "flow_derivative", "PAPER",
          lambda: _le(float(np.max(np.abs(flow_derivative(XHAT_FIELD, 1.0, x) - 2))), 0.0, strict=False))
    s.run("flow(V, 0, y) = y", "flow", "TRIVIAL",
          lambda: _le(float(np.max(np.abs(flow(c.field_Y, 0.0, np.linspace(0, 1, 101))
                                          - np.linspace(0, 1, 101)))), 0.0, strict=False))
    rng = np.random.default_rng(cfg.seed)
    ys = rng.uniform(0.05, 0.95, 200)
    st = rng.uniform(-3, 3, (2, 200))

    def group_law():
        worst = 0.0
        for fld in (c.field_Y, c.field_Yhat):
            for a, b, y in zip(st[0], st[1], ys):
                worst = max(worst, abs(flow(fld, a + b, y) - flow(fld, a, flow(fld, b, y))))
        return worst < tol, worst, tol
    s.run("flow group law on 200 samples", "flow", "DERIVED", group_law)
    s.report.csv["flatness.csv"] = _csv(["field", "end", "k", "distance", "loglog"], flat_rows)

    def cocycle():
        y1 = flow(c.field_Y, 1.0, 0.5)
        v = flow_derivative(c.field_Y, 1.0, 0.5) * flow_derivative(c.field_Y, -1.0, y1)
        return abs(v - 1) < 1e-12, abs(v - 1), 1e-12
    s.run("inverse-flow cocycle at 1/2", "flow_derivative", "TRIVIAL", cocycle)

    def fd():
        worst = 0.0
        yy = np.linspace(0.2, 0.8, 301)
        for fld in (c.field_Y, c.field_Yhat):
            for t in (0.5, 1.0, -1.0):
                h = 1e-6
                num = (flow(fld, t, yy + h) - flow(fld, t, yy - h)) / (2 * h)
                worst = max(worst, float(np.max(np.abs(num / flow_derivative(fld, t, yy) - 1))))
        return worst < 1e-6, worst, 1e-6
    s.run("flow derivative vs centred differences", "flow_derivative", "DERIVED", fd)

    def conj():
        qs = sorted({Fraction(p, d) for d in (1, 2, 3, 4) for p in range(-8 * d, 8 * d + 1)})
        q = np.array([float(v) for v in qs])
        err = float(np.max(np.abs(c.phi(q + 1) - flow(c.field_Y, 1.0, c.phi(q)))))
        return err < 1e-12, err, 1e-12
    s.run("phi(q+1) = Y-flow of phi(q), q in [-8, 8], denominators <= 4", "make_chart", "DERIVED", conj)

    pushed = pushforward(X_FIELD, c.as_map(), "push(X)")
    # the chart is invertible in double precision on roughly [0.13, 0.87]
    grid = np.linspace(0.15, 0.85, 1000)
    s.run("pushforward(X, phi) = Y", "pushforward", "PAPER",
          lambda: _le(float(np.max(np.abs(pushed(grid) - c.Y(grid)) / c.Y(grid))), 1e-12))
    s.run("pushforward(X, translation) = X", "pushforward", "TRIVIAL",
          lambda: _le(float(np.max(np.abs(pushforward(X_FIELD, _Translation(2.5))(x) - 1))), 0.0,
                      strict=False))

    def push_flow():
        worst = 0.0
        for base, exact in ((X_FIELD, c.field_Y), (XHAT_FIELD, c.field_Yhat)):
            fld = pushforward(base, c.as_map())
            for t in (1.0, -0.5):
                worst = max(worst, float(np.max(np.abs(flow(fld, t, grid) - flow(exact, t, grid)))))
        return worst < tol, worst, tol, "quadrature route vs closed-form conjugated flow, 10^3 samples"
    s.run("flow of pushforward = conjugated flow", "pushforward", "DERIVED", push_flow)
    return s.report


@dataclass(frozen=True)
class _Translation:
    c: float

    def evaluate(self, x):
        return np.asarray(x) + self.c

    def derivative(self, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def inverse(self):
        return _Translation(-self.c)


def _le(measured, threshold, strict=True):
    ok = measured < threshold if strict else measured <= threshold
    return ok, measured, threshold


# ---------------------------------------------------------------------------


def construction_suite(ctx: Context) -> Report:
    s = Suite("verify-construction", ctx)
    kit, cfg = ctx.kit, ctx.cfg
    eq = cfg.tol("equality")
    grid = np.linspace(AMBIENT[0], AMBIENT[1], cfg.grid)
    rng = np.random.default_rng(cfg.seed + 1)

    def axioms():
        worst = 0.0
        pts = np.linspace(*AMBIENT, 1000)
        for _ in range(20):
            a, b, c = (con.realize(kit, ctx.random_word(rng, 8)) for _ in range(3))
            worst = max(worst, sup_distance(compose(compose(a, b), c), compose(a, compose(b, c)), pts),
                        sup_distance(compose(a, invert(a)), IDENTITY, pts))
        return worst < cfg.tol("group_axioms"), worst, cfg.tol("group_axioms")
    s.run("group axioms on random words", "compose/invert", "DERIVED", axioms)

    def monotone_and_support():
        bad_mono, worst_off = 0, 0.0
        for _ in range(20):
            w = ctx.random_word(rng, 8)
            d = con.realize(kit, w)
            y = d.evaluate(grid)
            bad_mono += int(np.sum(np.diff(y) <= 0))
            off = np.ones_like(grid, dtype=bool)
            for lo, hi in d.cached_support:
                off &= ~((grid >= lo) & (grid <= hi))
            if off.any():
                worst_off = max(worst_off, float(np.max(np.abs(y[off] - grid[off]))))
        return bad_mono == 0 and worst_off < 1e-12, worst_off, 1e-12, f"{bad_mono} order violations"
    s.run("monotone, identity off the tracked support", "evaluate", "DERIVED", monotone_and_support)

    def fd():
        x = np.linspace(0.02, 0.98, 1000)
        h = 1e-6
        num = (kit.fbar.evaluate(x + h) - kit.fbar.evaluate(x - h)) / (2 * h)
        err = float(np.max(np.abs(num / kit.fbar.derivative(x) - 1)))
        return err < 1e-6, err, 1e-6
    s.run("derivative of fbar vs finite differences", "derivative", "DERIVED", fd)

    for i in (1, 2, 3, 4):
        def bs(i=i):
            w = con.realize(kit, GeneratorWord.of(("fhat", i), ("f", 1), ("fhat", -i)))
            return _le(sup_distance(w, power(kit.f, 2 ** i), grid), eq)
        s.run(f"fhat^{i} f fhat^-{i} = f^{2 ** i}", "build_kit", "PAPER", bs)

    def markers():
        rows = con.marker_transport_errors(kit)
        worst = max(max(a, b) for _, a, b in rows)
        return worst < cfg.tol("marker"), worst, cfg.tol("marker")
    s.run("marker transport by f and fhat", "evaluate", "PAPER", markers)

    def g_check():
        x0, x1 = kit.x(0), kit.x(1)
        fixed = max(abs(kit.g.evaluate(x0) - x0), abs(kit.g.evaluate(x1) - x1))
        moved = float(np.max(np.abs(kit.g.evaluate(np.linspace(x0, x1, 101)) - np.linspace(x0, x1, 101))))
        return fixed < 1e-15 and moved > 1e-3, fixed, 1e-15, f"max displacement {moved:.3g}"
    s.run("g fixes x_0, x_1 and moves the inside", "build_kit", "PAPER", g_check)

    def psi_check():
        err = max(abs(kit.psi.evaluate(kit.x(-0.75))), abs(kit.psi.evaluate(kit.x(1)) - 1))
        mid = np.linspace(kit.x(-0.5), kit.x(0), 1001)
        ident = float(np.max(np.abs(kit.psi.evaluate(mid) - mid)))
        return max(err, ident) < 1e-9, max(err, ident), 1e-9
    s.run("psi(x_-3/4) = 0, psi(x_1) = 1, psi = id on [x_-1/2, x_0]", "build_kit", "PAPER", psi_check)

    def conj_support():
        sup = con.support_of(kit, GeneratorWord.of(("f", -1), ("g", 1), ("f", 1)))
        d = conjugate(kit.g, invert(kit.f))
        want = (kit.x(-1), kit.x(0))
        err = max(abs(d.cached_support[0][0] - want[0]), abs(d.cached_support[0][1] - want[1]))
        return sup.labels() == [("x_-1", "x_0")] and err < 1e-15, err, 1e-15
    s.run("supp(f^-1 g f) = [x_-1, x_0]", "conjugate", "PAPER", conj_support)

    if not ctx.levels():
        s.run("empty schedule gives h = hhat = id", "build_kit", "TRIVIAL",
              lambda: _le(max(sup_distance(kit.h, IDENTITY, grid), sup_distance(kit.hhat, IDENTITY, grid)),
                          0.0, strict=False))
        s.skip("key identity", "key_identity_check", "every level is switched off; nothing to check")
    for i in ctx.levels():
        n = 2 ** i

        def chain(i=i, n=n):
            w = GeneratorWord.gen("psi") * con.commutator_words(i)[0] * GeneratorWord.gen("psi", -1)
            d = con.realize(kit, w)
            pts = np.concatenate([np.linspace(1e-9, kit.x(-0.5), 5000, endpoint=False)[1:],
                                  np.linspace(kit.x(0), 1 - 1e-9, 5000)[1:]])
            return _le(float(np.max(np.abs(d.evaluate(pts) - pts))), cfg.tol("support"))
        s.run(f"support chain of psi a_{n} psi^-1 (i = {i})", "support_of", "PAPER", chain)

        def c_trivial(i=i, n=n):
            a, b, c = con.commutator_chain(kit, i)
            outside = np.concatenate([np.linspace(-1, 0, 2001), np.linspace(1, 2, 2001),
                                      np.linspace(0, kit.x(-0.5), 2001), np.linspace(kit.x(0), 1, 2001)])
            err = float(np.max(np.abs(c.evaluate(outside) - outside)))
            fh, fn = GeneratorWord.gen("fhat", i), GeneratorWord.gen("f", n)
            inner = GeneratorWord.of(("h", 1), ("hhat", 1), ("h", -1), ("hhat", -1))
            other = con.realize(kit, fh.inverse() * fn.inverse() * inner * fn * fh, track_support=False)
            mid = np.linspace(kit.x(-0.5), kit.x(0), 5001)
            err2 = float(np.max(np.abs(c.evaluate(mid) - other.evaluate(mid))))
            return max(err, err2) < eq, max(err, err2), eq
        s.run(f"c_{n} trivial off [x_-1/2, x_0] and equal to the inner commutator on it",
              "commutator_chain", "PAPER", c_trivial)

        def key(i=i):
            r = con.key_identity_check(kit, i, per_block=200 if i > 4 else 400)
            ok = r.passed(cfg.tol("key_identity")) and r.r_measured_max_error < 1e-6
            return ok, r.residual, cfg.tol("key_identity"), f"r = {r.r_exact} exactly; per-block r error {r.r_measured_max_error:.2g}"
        s.run(f"h_{n // 2} = (fhat^{i} c_{n} fhat^-{i})^ell (i = {i})", "key_identity_check", "DERIVED", key)

    def support_example():
        k2 = con.build_kit(ctx.chart, ctx.schedule, cfg.i_max, h_focus=4)
        got = con.support_of(k2, con.commutator_words(4)[0]).labels()
        want = [("0", "x_-3/4"), ("x_-1/2", "x_0"), ("x_1", "1")]
        return got == want, str(got), str(want)
    s.run("exact support of fhat^-i f^-n h f^n fhat^i (i = 4)", "support_of", "PAPER", support_example)

    for n in (1, 2, 4):
        def hn(n=n):
            return _le(sup_distance(con.h_n_map(kit, n), con.realize(kit, con.h_n_via_fbar_word(n)), grid), eq)
        s.run(f"h_{n} = f^-{n} f^-1 fbar^{n} f", "h_n_map", "DERIVED", hn)

    def limit():
        vals = [max(abs(ctx.schedule.s(2 ** (i - 1))), abs(ctx.schedule.t(2 ** (i - 1))))
                for i in ctx.levels()]
        ok = all(b < a for a, b in zip(vals, vals[1:]))
        return ok, vals[-1] if vals else 0.0, None, "max(|s_n|, |t_n|) per level: " + ", ".join(_fmt(v) for v in vals)
    if isinstance(cfg.ell, str):
        s.run("schedule times shrink level by level", "build_kit", "DERIVED", limit)

    def c1():
        prof = con.endpoint_c1_profile(kit, "h") + con.endpoint_c1_profile(kit, "hhat")
        h_vals = [v for _, v in con.endpoint_c1_profile(kit, "h")]
        hh_vals = [v for _, v in con.endpoint_c1_profile(kit, "hhat")]
        ok = all(b < a for a, b in zip(h_vals, h_vals[1:])) and all(b < a for a, b in zip(hh_vals, hh_vals[1:]))
        return ok, h_vals[-1] if h_vals else 0.0, None, str(prof)
    if ctx.levels():
        s.run("max |Dh - 1| shrinks toward the endpoint", "build_kit", "DERIVED", c1)

    def rejects_one():
        try:
            con.build_kit(ctx.chart, con.Schedule((1,) * (cfg.i_max // 2)), cfg.i_max)
        except ConstructionError:
            return True, "rejected", "rejected"
        return False, "accepted", "rejected"
    s.run("ell = 1 on an active level is rejected", "key_identity_check", "TRIVIAL", rejects_one)
    s.report.artifacts["kit.json"] = kit.summary()
    return s.report


# ---------------------------------------------------------------------------


def distortion_suite(ctx: Context) -> Report:
    s = Suite("distortion", ctx)
    kit, cfg, chart = ctx.kit, ctx.cfg, ctx.chart
    vtol = cfg.tol("variation")

    def var(d):
        return dist.var_log_derivative(d, tol=vtol, chart=chart).value

    s.run("var(log D id) = 0", "var_log_derivative", "TRIVIAL", lambda: _le(var(IDENTITY), 0.0, strict=False))
    s.run("var(log D fhat) > 0", "var_log_derivative", "DERIVED",
          lambda: (var(kit.fhat) > 0, var(kit.fhat), 0.0))

    est_f = dist.asymptotic_distortion(kit.f, cfg.n_max, chart=chart)
    est_b = dist.asymptotic_distortion(kit.fbar, cfg.n_max, chart=chart)
    s.report.csv["distortion_f.csv"] = est_f.to_csv()
    s.report.csv["distortion_fbar.csv"] = est_b.to_csv()

    def f_trend():
        tr = est_f.trend
        return (tr[cfg.n_max] < tr[8], tr[cfg.n_max], tr[8],
                "var/n at n_max vs at n = 8; numerical evidence of vanishing, not a proof")
    s.run("f: var(log D f^n)/n decays", "asymptotic_distortion", "DERIVED", f_trend)
    s.run("f: estimate at n_max below n = 1", "asymptotic_distortion", "DERIVED",
          lambda: (est_f.upper_estimate < est_f.per_n[1], est_f.upper_estimate, est_f.per_n[1]))

    def fbar_level():
        tr = est_b.trend
        ns = [n for n in (16, 32, 64) if n in tr]
        vals = [tr[n] for n in ns]
        ratio = max(vals) / min(vals)
        ref = cfg.reference["fbar_distortion_level"]
        level = min(vals)
        ok = ratio < 2 and level > 0 and abs(level - ref) / ref < 0.02
        return ok, level, ref, (f"spread max/min = {ratio:.4f} over n = {ns}; regression window 2%; "
                          "numerical evidence of a positive level, not a proof")
    s.run("fbar: var(log D fbar^n)/n holds a positive level", "asymptotic_distortion", "DERIVED", fbar_level)

    def sub_trend():
        bad = est_f.subadditivity_violations(vtol) + est_b.subadditivity_violations(vtol)
        return not bad, len(bad), 0
    s.run("per-n values subadditive", "asymptotic_distortion", "PAPER", sub_trend)

    rng = np.random.default_rng(cfg.seed + 2)
    pairs = [(ctx.random_word(rng, cfg.random_word_length), ctx.random_word(rng, cfg.random_word_length))
             for _ in range(cfg.random_pairs)]

    def subadd():
        worst, rows = -np.inf, []
        for wa, wb in pairs:
            a, b = con.realize(kit, wa), con.realize(kit, wb)
            pv = dist.product_variation([a, b], tol=vtol, chart=chart)
            worst = max(worst, pv.excess)
            rows.append([str(wa), str(wb), _fmt(pv.factors[0].value), _fmt(pv.factors[1].value),
                         _fmt(pv.product.value)])
        s.report.csv["subadditivity.csv"] = _csv(["a", "b", "var_a", "var_b", "var_ab"], rows)
        return worst <= vtol, worst, vtol, f"{len(pairs)} random pairs, factors on matched partitions"
    s.run("var(log D ab) <= var(log D a) + var(log D b)", "var_log_derivative", "PAPER", subadd)

    def conj_cmp():
        worst = -np.inf
        for wa, wu in pairs[:10]:
            a, u = con.realize(kit, wa), con.realize(kit, wu)
            worst = max(worst, dist.product_variation([u, a, invert(u)], tol=vtol, chart=chart).excess)
        return worst <= vtol, worst, vtol, "var(u a u^-1) - var(u) - var(a) - var(u^-1)"
    s.run("var of a conjugate within the factor sum", "var_log_derivative", "DERIVED", conj_cmp)

    def refinement():
        est = dist.var_log_derivative(power(kit.fbar, 16), chart=chart)
        vals = [v for _, v in est.refinement_history]
        return all(b >= a for a, b in zip(vals, vals[1:])), len(vals), None
    s.run("refinement history nondecreasing", "var_log_derivative", "DERIVED", refinement)

    def flows():
        notes, ok = [], True
        for t in (0.5, 1.0, 2.0):
            d = Diffeo.from_primitive(ChartAffine(1.0, t))
            tr = dist.asymptotic_distortion(d, cfg.n_max, chart=chart).trend
            vals = [tr[n] for n in sorted(tr)]
            ok &= all(b < a for a, b in zip(vals[2:], vals[3:]))
            notes.append(f"t={t}: {_fmt(vals[-1])}")
        return ok, None, None, "; ".join(notes)
    s.run("flow maps: var/n decays along n = 4..n_max", "asymptotic_distortion", "DERIVED", flows)
    return s.report


# ---------------------------------------------------------------------------


def certify_suite(ctx: Context) -> Report:
    s = Suite("certify", ctx)
    kit, cfg = ctx.kit, ctx.cfg
    grid = np.linspace(*AMBIENT, cfg.grid)
    eq = cfg.tol("equality")

    for n in (1, 3, 8, 20):
        def bsw(n=n):
            w = cert.bs_power_word(n)
            res = sup_distance(con.realize(kit, w, track_support=False), power(kit.f, n), grid)
            return res < eq and w.length == cert.bs_length_formula(n), res, eq, f"{w} (length {w.length})"
        s.run(f"BS word for f^{n}", "bs_power_word", "DERIVED", bsw)
    s.run("BS word lengths within the stated bound, n <= 1000", "bs_power_word", "DERIVED",
          lambda: (all(cert.bs_power_word(n).length <= cert.bs_length_bound(n) for n in range(1, 1001)),
                   None, None))

    gc = cert.generator_constant(ctx.gens, cfg.grid, ctx.chart)
    C = gc["C"]
    levels = ctx.levels()
    lower = None

    def lower_bounds():
        nonlocal lower
        lower = cert.derivative_growth_lower_bound(kit.fbar, ctx.gens, list(range(1, cfg.n_max + 1)),
                                                   cfg.grid, ctx.chart, C)
        return C > 1, C, 1.0, f"C = max over generators of sup|D|, {len(lower.rows)} values of n"
    s.run("measured generator constant C > 1", "derivative_growth_lower_bound", "PAPER", lower_bounds)

    def identity_rejected():
        try:
            cert.derivative_growth_lower_bound(IDENTITY, ctx.gens, [2], 100, C=C)
        except TrivialElementError:
            return True, "error raised", "error raised"
        return False, "no error", "error raised"
    s.run("identity has no lower bound", "derivative_growth_lower_bound", "TRIVIAL", identity_rejected)

    if lower is not None:
        s.run("witness D fbar^n(x) >= n for some n <= n_max", "derivative_growth_lower_bound", "PAPER",
              lambda: (any(k >= 2 for k, _, _ in lower.witnesses),
                       max((k for k, _, _ in lower.witnesses), default=0), 2,
                       f"{len(lower.witnesses)} witnessing n; largest n listed as measured"))

    certs, rows = [], []
    for i in levels:
        def one(i=i):
            c = cert.fbar_power_certificate(kit, i, lower)
            certs.append(c)
            rows.append([c.power, c.upper_length, _fmt(c.lower), c.paper_budget])
            return c.passed, c.residual, c.residual_tol, (
                f"length {c.upper_length} <= {c.length_bound}; h word {c.accounting['len_h']} "
                f"<= budget {c.paper_budget}; lower {c.lower:.4g}")
        s.run(f"certificate for fbar^{2 ** (i - 1)} (i = {i})", "fbar_power_certificate", "DERIVED", one)

    def replay():
        worst = 0.0
        for c in certs:
            back = cert.Certificate.from_json(c.to_json())
            worst = max(worst, cert.replay_certificate(kit, back))
        return worst < cert.CERT_RESIDUAL_TOL, worst, cert.CERT_RESIDUAL_TOL
    if certs:
        s.run("certificates replay from JSON", "fbar_power_certificate", "DERIVED", replay)
        s.run("lower <= upper for every certificate", "derivative_growth_lower_bound", "DERIVED",
              lambda: (all(c.consistent for c in certs), max(c.lower / c.upper_length for c in certs), 1.0))

        def growth():
            per = [c.upper_length / c.power for c in certs]
            return all(b < a for a, b in zip(per, per[1:])), per[-1], None, ", ".join(_fmt(v) for v in per)
        s.run("certified upper(n)/n strictly decreasing", "fbar_power_certificate", "DERIVED", growth)

        def interpolate():
            n_top = max(c.power for c in certs)
            bounds = cert.interpolated_upper_bounds({c.power: c.upper_length for c in certs}, n_top)
            s.report.csv["upper_bounds.csv"] = _csv(["m", "upper_len"], sorted(bounds.items()))
            lows = {r[0]: r[2] for r in lower.rows} if lower else {}
            ok = all(lows.get(m, 0.0) <= b for m, b in bounds.items())
            return ok, bounds[n_top], None, f"subadditive bounds for m = 1..{n_top}; lower <= upper where measured"
        s.run("upper bounds for every m by subadditivity", "interpolated_upper_bounds", "DERIVED", interpolate)

    def rejects_zero():
        try:
            cert.fbar_power_certificate(kit, 0)
        except ConstructionError:
            return True, "rejected", "rejected"
        return False, "accepted", "rejected"
    s.run("i = 0 rejected", "fbar_power_certificate", "TRIVIAL", rejects_zero)

    lip_rows = []

    def lipschitz():
        L = cert.generator_constant([kit.fhat, kit.f], cfg.grid, ctx.chart)["C"]
        ok, surr = True, []
        for i in range(1, int(math.log2(cfg.n_max)) + 1):
            n = 2 ** i
            r = cert.lipschitz_chain_check(kit, cert.bs_power_word(n), ["fhat", "f"], n, cfg.grid, L)
            ok &= r.measured <= r.bound + cfg.tol("lipschitz")
            surr.append(r.entropy_surrogate)
            lip_rows.append([n, r.word_length, _fmt(r.measured), _fmt(r.bound), _fmt(r.entropy_surrogate)])
        dec = all(b < a for a, b in zip(surr, surr[1:]))
        return ok and dec, surr[-1], None, "entropy surrogate: " + ", ".join(_fmt(v) for v in surr)
    s.run("log Lip(f^n) <= len * log L, surrogate decreasing", "lipschitz_chain_check", "PAPER", lipschitz)

    def single_gen():
        r = cert.lipschitz_chain_check(kit, GeneratorWord.gen("fhat", 3), ["fhat"], None, cfg.grid)
        return r.holds, r.measured, r.bound
    s.run("Lip(fhat^3) <= Lip(fhat)^3", "lipschitz_chain_check", "TRIVIAL", single_gen)

    s.report.csv["certificates.csv"] = _csv(["n", "upper_len", "lower", "paper_budget"], rows)
    s.report.csv["lipschitz.csv"] = _csv(["n", "word_length", "log_lip", "bound", "surrogate"], lip_rows)
    s.report.artifacts["certificates.json"] = {
        "C": C, "C_detail": gc["detail"], "grid": cfg.grid,
        "lower": [list(r) for r in lower.rows] if lower else [],
        "witnesses": [list(w) for w in lower.witnesses] if lower else [],
        "certificates": [c.to_json() for c in certs],
    }
    return s.report


# ---------------------------------------------------------------------------


def kopell_suite(ctx: Context) -> Report:
    s = Suite("kopell", ctx)
    kit, cfg = ctx.kit, ctx.cfg
    rows = []
    results = {}

    def run_case(label, tau):
        res = cert.kopell_check(kit, tau, n_max=32, threshold=cfg.tol("kopell_c1"))
        results[label] = res
        for r in res.rows:
            rows.append([label, r.n, _fmt(r.tau), _fmt(r.e_n), _fmt(r.eps_n),
                         _fmt(r.max_log_ratio), _fmt(r.bound)])
        return res

    def zero():
        res = run_case("tau=0", lambda n: 0.0)
        worst = max(r.e_n for r in res.rows)
        return worst < 1e-12, worst, 1e-12, "zero up to rounding in the block conjugation"
    s.run("tau_n = 0 gives g = id", "kopell_check", "TRIVIAL", zero)

    def decay():
        res = run_case("tau=1/n", lambda n: 1.0 / n)
        ok = res.decreasing_from(4) and res.e[32] < cfg.tol("kopell_c1")
        return ok, res.e[32], cfg.tol("kopell_c1"), "e_n strictly decreasing for 4 <= n <= 32"
    s.run("tau_n = 1/n: C1 extension", "kopell_check", "DERIVED", decay)

    def floor():
        res = run_case("tau=1", lambda n: 1.0)
        ref = cfg.reference["kopell_tau1_floor"]
        fl = res.floor(1)
        return fl > 0.5 * ref and abs(fl - ref) / ref < 0.02, fl, ref, "floor of e_n; regression window 2%"
    s.run("tau_n = 1: e_n stays above a floor", "kopell_check", "DERIVED", floor)

    def bound():
        if not results:
            raise RuntimeError("no Kopell runs")
        ok = all(r.bound_holds for r in results.values())
        worst = max(r.chain_rule_residual for res in results.values() for r in res.rows)
        return ok and worst < 1e-9, worst, 1e-9, "quantitative bound at every sample; chain-rule residual measured"
    s.run("|log Df^n(z_n)/Df^n(y_n)| <= C eps e^C", "kopell_check", "PAPER", bound)
    s.report.csv["kopell.csv"] = _csv(["case", "n", "tau", "e_n", "eps_n", "log_ratio", "bound"], rows)
    return s.report


SUITES = {
    "probe-chart": chart_suite,
    "verify-construction": construction_suite,
    "distortion": distortion_suite,
    "certify": certify_suite,
    "kopell": kopell_suite,
}


def run_suite(name: str, ctx: Context) -> Report:
    t0 = time.perf_counter()
    rep = SUITES[name](ctx)
    rep.seconds = time.perf_counter() - t0
    return rep
