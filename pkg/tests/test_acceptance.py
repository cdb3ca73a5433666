"""Acceptance criteria 1-10, one PASS/FAIL line each.

The lines are printed in the terminal summary of a pytest run; running this
file directly prints them as they are computed.
"""
import math
from fractions import Fraction

import numpy as np
import pytest

from diffeolab import certifiers as cert
from diffeolab import construction as con
from diffeolab import distortion as dist
from diffeolab.config import DEFAULT_REFERENCE, ExperimentConfig
from diffeolab.diffeo import power, sup_distance
from diffeolab.suites import Context
from diffeolab.words import GENERATORS, GeneratorWord

from conftest import ACCEPTANCE_LINES


def report(k: int, ok: bool, text: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {text}"
    ACCEPTANCE_LINES[k] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def gens(kit):
    return [kit.generators[g] for g in GENERATORS]


@pytest.fixture(scope="module")
def lower(kit, chart, gens):
    C = cert.generator_constant(gens, 10**4, chart)["C"]
    return cert.derivative_growth_lower_bound(kit.fbar, gens, list(range(1, 65)), 10**4, chart, C)


@pytest.fixture(scope="module")
def certificates(kit, lower):
    return [cert.fbar_power_certificate(kit, i, lower) for i in (2, 4, 6)]


def test_criterion_01_bs_relation(kit):
    grid = np.linspace(-1, 2, 10**4)
    worst = max(
        sup_distance(con.realize(kit, GeneratorWord.of(("fhat", i), ("f", 1), ("fhat", -i))),
                     power(kit.f, 2 ** i), grid)
        for i in (1, 2, 3, 4))
    report(1, worst < 1e-8, f"max sup-distance fhat^i f fhat^-i vs f^(2^i), i=1..4: {worst:.2e} < 1e-8")


def test_criterion_02_markers(kit):
    qs = (-4, Fraction(-3, 4), Fraction(-1, 2), 0, Fraction(1, 2), 1, 2)
    rows = con.marker_transport_errors(kit, qs)
    worst = max(max(a, b) for _, a, b in rows)
    report(2, worst < 1e-9, f"max marker transport error over {len(qs)} markers: {worst:.2e} < 1e-9")


def test_criterion_03_support_chain(kit):
    # uniform samples plus samples accumulating at 0, x_-1/2, x_0 and 1
    d = np.logspace(-12, -1, 400)
    worst = 0.0
    for i in (2, 4):
        w = GeneratorWord.gen("psi") * con.commutator_words(i)[0] * GeneratorWord.gen("psi", -1)
        m = con.realize(kit, w, track_support=False)
        a, b = kit.x(-0.5), kit.x(0)
        pts = np.concatenate([np.linspace(0, a, 20001)[1:-1], np.linspace(b, 1, 20001)[1:-1],
                              d, a - d * a, b + d * (1 - b), 1 - d])
        pts = pts[((pts > 0) & (pts < a)) | ((pts > b) & (pts < 1))]
        worst = max(worst, float(np.max(np.abs(m.evaluate(pts) - pts))))
    report(3, worst < 1e-8, f"max displacement on (0, x_-1/2) u (x_0, 1), i in {{2, 4}}: {worst:.2e} < 1e-8")


def test_criterion_04_key_identity(kit):
    res = [con.key_identity_check(kit, i) for i in (2, 4)]
    worst = max(r.residual for r in res)
    exact = all(r.r_exact_ok and Fraction(r.r_exact) == Fraction(1, r.ell) for r in res)
    text = ", ".join(f"i={r.i}: {r.residual:.2e} (r = {r.r_exact})" for r in res)
    report(4, worst < 1e-7 and exact, f"key identity sup-distance {text} < 1e-7; r = 1/ell exact")


def test_criterion_05_word_budget(certificates):
    ok = True
    parts = []
    for c in certificates:
        budget = 2 * c.ell * (5 * c.i + 4 + 4 * cert.bs_power_word(2 ** c.i).length)
        ok &= c.accounting["len_h"] <= budget == c.paper_budget and c.residual < 1e-7
        parts.append(f"i={c.i}: {c.accounting['len_h']} <= {budget}")
    per = [c.upper_length / c.power for c in certificates]
    dec = all(b < a for a, b in zip(per, per[1:]))
    report(5, ok and dec, "h word lengths " + ", ".join(parts)
           + "; upper(n)/n = " + ", ".join(f"{v:.3f}" for v in per) + " strictly decreasing")


def test_criterion_06_lower_bound(certificates, lower):
    ok = all(c.lower <= c.upper_length for c in certificates)
    wit = [w for w in lower.witnesses if w[0] >= 2]
    text = ", ".join(f"n={c.power}: {c.lower:.3f} <= {c.upper_length}" for c in certificates)
    report(6, ok and bool(wit), f"C = {lower.C:.3f}; {text}; {len(wit)} witnesses Dfbar^n(x) >= n "
           f"(largest n = {max((w[0] for w in wit), default=0)})")


def test_criterion_07_distortion_trends(kit, chart):
    est_f = dist.asymptotic_distortion(kit.f, 64, chart=chart)
    est_b = dist.asymptotic_distortion(kit.fbar, 64, chart=chart)
    tf, tb = est_f.trend, est_b.trend
    vals = [tb[n] for n in (16, 32, 64)]
    kappa = DEFAULT_REFERENCE["fbar_distortion_level"]
    spread = max(vals) / min(vals)
    ok = tf[64] < tf[8] and spread < 2 and min(vals) > 0 and abs(tb[64] - kappa) / kappa < 0.02
    report(7, ok, f"f: var/n {tf[8]:.4f} (n=8) -> {tf[64]:.4f} (n=64); fbar: var/n over 16,32,64 = "
           + ", ".join(f"{v:.4f}" for v in vals) + f", spread {spread:.3f} < 2, level {tb[64]:.4f} vs kappa {kappa}")


def test_criterion_08_kopell(kit):
    dec = cert.kopell_check(kit, lambda n: 1.0 / n, n_max=32)
    const = cert.kopell_check(kit, lambda n: 1.0, n_max=32)
    floor_ref = DEFAULT_REFERENCE["kopell_tau1_floor"]
    ok = (dec.decreasing_from(4) and dec.e[32] < 0.05 and abs(const.floor(1) - floor_ref) / floor_ref < 0.02
          and dec.bound_holds and const.bound_holds)
    report(8, ok, f"tau=1/n: e_32 = {dec.e[32]:.4f} < 0.05, decreasing on 4..32; tau=1: floor "
           f"{const.floor(1):.4f} (reference {floor_ref}); bound C eps e^C holds, C = {dec.C:.3f}")


def test_criterion_09_lipschitz(kit, chart):
    L = cert.generator_constant([kit.fhat, kit.f], 10**4, chart)["C"]
    rows = [cert.lipschitz_chain_check(kit, cert.bs_power_word(2 ** i), ["fhat", "f"], 2 ** i, 10**4, L)
            for i in range(1, 7)]
    ok = all(r.measured <= r.bound + 1e-6 for r in rows)
    surr = [r.entropy_surrogate for r in rows]
    dec = all(b < a for a, b in zip(surr, surr[1:]))
    report(9, ok and dec, f"log Lip(f^n) <= len log L for n = 2..64 (L = {L:.4f}); surrogate "
           + ", ".join(f"{v:.3f}" for v in surr) + " decreasing")


def test_criterion_10_subadditivity(kit, chart):
    ctx = Context(ExperimentConfig())
    rng = np.random.default_rng(ctx.cfg.seed + 2)
    worst = -math.inf
    for _ in range(50):
        wa, wb = ctx.random_word(rng, 8), ctx.random_word(rng, 8)
        a, b = con.realize(kit, wa), con.realize(kit, wb)
        worst = max(worst, dist.product_variation([a, b], chart=chart).excess)
    report(10, worst <= 1e-4, f"max var(ab) - var(a) - var(b) over 50 random pairs: {worst:.4g} <= 1e-4")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
