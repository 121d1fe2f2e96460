import os
import subprocess
import sys

import numpy as np
import pytest

from imcflab import _kernels_py, kernels


def _inputs(m=200, d=2, seed=1):
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.5, 8.0, m)
    p = rng.normal(scale=0.3, size=(m, d))
    R = rng.normal(scale=0.3, size=(m, d, d))
    R = 0.5 * (R + np.swapaxes(R, -1, -2))
    return r, p, R


@pytest.mark.parametrize("d", [1, 2, 3])
def test_backends_agree(d):
    if kernels.BACKEND != "cython":
        pytest.skip("compiled extension not built")
    from imcflab import _kernels

    r, p, R = _inputs(d=d)
    a = _kernels_py.imcf_speed(r, p, R, d + 1)
    b = _kernels.imcf_speed(r, p, R, d + 1)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-13, atol=1e-15)


def test_sphere_speed_value():
    r = np.array([1.0, 2.0])
    p = np.zeros((2, 2))
    R = np.zeros((2, 2, 2))
    speed, hm = kernels.imcf_speed(r, p, R, 3)
    H = 2 / np.tanh(r)
    assert np.allclose(speed, 1 / H, rtol=1e-14)
    assert np.allclose(hm, H - 2, rtol=1e-12)


def test_pure_python_switch():
    env = dict(os.environ, IMCFLAB_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from imcflab import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
