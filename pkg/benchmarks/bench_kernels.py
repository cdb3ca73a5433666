"""Compiled vs numpy word evaluation.

    python3 benchmarks/bench_kernels.py [--points N] [--repeat R]

Times both backends on a few representative words and checks they agree.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from diffeolab import kernels
from diffeolab.certifiers import fbar_word, h_half_word
from diffeolab.chart import make_chart
from diffeolab.construction import build_kit, realize
from diffeolab.diffeo import power


def cases(kit):
    yield "f^64 (64 chart affines)", power(kit.f, 64)
    yield "fbar^32", power(kit.fbar, 32)
    yield "certificate h word (i = 4)", realize(kit, h_half_word(4, 3), track_support=False)
    yield "fbar^8 as generator word", realize(kit, fbar_word(8), track_support=False)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = kernels.available()
    if "cython" not in backends:
        print("compiled kernel not built; only the numpy backend is timed")
    kit = build_kit(make_chart())
    x = np.linspace(-1.0, 2.0, args.points)

    print(f"{'word':32s} {'len':>5s} " + " ".join(f"{b:>10s}" for b in backends) + "   speedup  max|dy|  max rel dD")
    for label, d in cases(kit):
        ops, offs, data = d._encoded
        times, outs = {}, {}
        for b in backends:
            outs[b] = kernels.eval_word_with(b, ops, offs, data, x)
            times[b] = min(timeit.repeat(lambda: kernels.eval_word_with(b, ops, offs, data, x),
                                         number=1, repeat=args.repeat))
        line = f"{label:32s} {len(d):5d} " + " ".join(f"{times[b] * 1e3:8.1f}ms" for b in backends)
        if len(backends) == 2:
            dy = float(np.max(np.abs(outs["cython"][0] - outs["python"][0])))
            dc, dp = outs["cython"][1], outs["python"][1]
            pos = dp > 0  # both underflow to 0 near the endpoints
            dd = float(np.max(np.abs(dc[pos] / dp[pos] - 1)))
            if np.any(dc[~pos] != 0):
                dd = float("inf")
            line += f"   {times['python'] / times['cython']:6.1f}x  {dy:.1e}  {dd:.1e}"
        print(line)


if __name__ == "__main__":
    main()
