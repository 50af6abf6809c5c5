"""Pure numpy reference implementation of the block kernel.

Every arithmetic expression is written in the same order as the compiled
kernel so that both produce identical bits.
"""
from __future__ import annotations

import numpy as np


def hermite_eval(x, a: float, h: float, y: np.ndarray, hd: np.ndarray):
    """Cubic Hermite interpolant on the uniform grid ``a + h*j``.

    ``hd`` holds ``h`` times the tabulated derivative.
    """
    x = np.asarray(x, dtype=float)
    s = (x - a) / h
    j = np.floor(s)
    j = np.minimum(np.maximum(j, 0.0), float(y.size - 2))
    t = s - j
    ji = j.astype(np.intp)
    t2 = t * t
    t3 = t2 * t
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    h10 = t3 - 2.0 * t2 + t
    h01 = -2.0 * t3 + 3.0 * t2
    h11 = t3 - t2
    return h00 * y[ji] + h10 * hd[ji] + h01 * y[ji + 1] + h11 * hd[ji + 1]


def advance(chi, status, exit_step, incr, n_steps, step0,
            tab_a, tab_h, tab_y, tab_hd, c_drift, sigma, dt, lo, hi,
            rec, rec_every):
    """Euler-Maruyama for ``dχ = c L(χ) dt + σ dW`` over one block.

    Paths with ``status != 0`` are frozen.  A path leaving ``(lo, hi)`` is
    clamped to the bound it crossed, gets ``status = -1`` or ``+1`` and
    ``exit_step`` set to the global step count.  ``rec[:, r]`` receives χ
    after every ``rec_every`` steps.
    """
    idx = np.nonzero(status == 0)[0]
    x = chi[idx]
    for k in range(n_steps):
        if idx.size:
            L = hermite_eval(x, tab_a, tab_h, tab_y, tab_hd)
            x = x + c_drift * L * dt + sigma * incr[idx, k]
            low = x <= lo
            high = x >= hi
            gone = low | high
            if gone.any():
                x[low] = lo
                x[high] = hi
                chi[idx] = x
                status[idx[low]] = -1
                status[idx[high]] = 1
                exit_step[idx[gone]] = step0 + k + 1
                keep = ~gone
                idx = idx[keep]
                x = x[keep]
        if (k + 1) % rec_every == 0:
            chi[idx] = x
            rec[:, (k + 1) // rec_every - 1] = chi
    chi[idx] = x
