"""NumPy implementation of the pointwise flow kernels."""

import numpy as np


def imcf_speed(r, p, R, n):
    """Radial speed v/H of the flow and H - (n-1) at every node.

    Parameters
    ----------
    r : (N,) array
    p : (N, d) array, sigma-frame gradient of r
    R : (N, d, d) array, sigma-frame Hessian of r
    n : int

    Returns
    -------
    speed, Hm : (N,) arrays
    """
    sh = np.sinh(r)
    ct = 1.0 / np.tanh(r)
    ct_m1 = 2.0 / np.expm1(2.0 * r)
    p2 = np.einsum("ni,ni->n", p, p)
    pRp = np.einsum("ni,nij,nj->n", p, R, p)
    trR = np.einsum("nii->n", R)
    q = p2 / sh**2
    v = np.sqrt(1.0 + q)
    w = 1.0 / v
    trB = trR - ct * p2
    pBp = pRp - ct * p2 * p2
    trS = trB / sh - pBp / (sh**3 * v * v)
    Hm = (n - 1) * (ct_m1 * w - q / (v * (1.0 + v))) - trS * w / sh
    H = Hm + (n - 1)
    return v / H, Hm
