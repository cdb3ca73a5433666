import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffeolab import kernels
from diffeolab.chart import make_chart
from diffeolab.construction import build_kit, realize
from diffeolab.words import GENERATORS, GeneratorWord

compiled = pytest.mark.skipif("cython" not in kernels.available(), reason="extension not built")

_KIT = build_kit(make_chart())
letters = st.tuples(st.sampled_from(GENERATORS), st.sampled_from([-3, -1, 1, 2]))
words = st.lists(letters, min_size=1, max_size=8).map(lambda ls: GeneratorWord(tuple(ls)))
X = np.concatenate([np.linspace(-1, 2, 3001), _KIT.chart.phi(np.sinh(np.linspace(-6, 6, 1001)))])


@compiled
@settings(max_examples=60, deadline=None)
@given(words)
def test_backends_agree(w):
    ops, offs, data = realize(_KIT, w)._encoded
    y_c, d_c = kernels.eval_word_with("cython", ops, offs, data, X)
    y_p, d_p = kernels.eval_word_with("python", ops, offs, data, X)
    assert np.max(np.abs(y_c - y_p)) < 1e-12
    ok = d_p > 1e-250
    assert np.allclose(d_c[ok], d_p[ok], rtol=1e-9, atol=0)


def test_python_backend_is_always_there():
    assert "python" in kernels.available()
    assert kernels.BACKEND in kernels.available()


def test_use_backend_switches_and_validates():
    before = kernels.BACKEND
    try:
        kernels.use_backend("python")
        assert kernels.BACKEND == "python"
        y = _KIT.f(np.array([0.5]))
        assert y[0] == pytest.approx(float(_KIT.x(1)), abs=1e-15)
    finally:
        kernels.use_backend(before)
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def _import_with(value):
    env = dict(os.environ, DIFFEOLAB_BACKEND=value)
    return subprocess.run([sys.executable, "-c", "from diffeolab import kernels; print(kernels.BACKEND)"],
                          capture_output=True, text=True, env=env, timeout=120)


def test_environment_forces_fallback():
    proc = _import_with("python")
    assert proc.returncode == 0 and proc.stdout.strip() == "python"


def test_environment_rejects_unknown_backend():
    proc = _import_with("fortran")
    assert proc.returncode != 0 and "ImportError" in proc.stderr
