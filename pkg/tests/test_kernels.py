import os
import subprocess
import sys

import numpy as np
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from c2approx import _kernels as K
from c2approx.polynomial import total_degree_exponents

finite = st.floats(-1, 1, allow_nan=False)


@given(arrays(float, st.integers(1, 20), elements=st.floats(-3, 3)), arrays(float, 30, elements=finite))
def test_clenshaw_paths_agree(coef, x):
    assert np.allclose(K.clenshaw(coef, x), K.clenshaw_np(coef, x), atol=1e-12)
    assert np.allclose(K.clenshaw_np(coef, x), np.polynomial.chebyshev.chebval(x, coef), atol=1e-11)


@given(arrays(float, 25, elements=finite), st.integers(0, 12))
def test_chebvander_paths_agree(x, deg):
    assert np.allclose(K.chebvander(x, deg), np.polynomial.chebyshev.chebvander(x, deg), atol=1e-12)


@given(arrays(float, (15, 2), elements=finite), st.integers(0, 8))
def test_total_vander_paths_agree(xs, n):
    exps = total_degree_exponents(n, 2)
    assert np.allclose(K.total_vander(xs, exps), K.total_vander_np(xs, exps), atol=1e-12)


@given(st.sampled_from([0.5, 1.0, 2.0, 3.0, np.inf]), st.integers(0, 10_000))
def test_segment_power_sum_paths_agree(q, seed):
    rng = np.random.default_rng(seed)
    v, w = rng.standard_normal(200), rng.random(200)
    starts = np.unique(np.concatenate([[0], rng.integers(0, 200, 15), [200]]))
    a1, w1 = K.segment_power_sum(v, w, starts, q)
    a2, w2 = K.segment_power_sum_np(v, w, starts, q)
    assert np.allclose(a1, a2, rtol=1e-12) and np.allclose(w1, w2, rtol=1e-12)


def test_fallback_flag_disables_numba():
    env = dict(os.environ, C2APPROX_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "import c2approx._kernels as k; print(k.USING_NUMBA)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
