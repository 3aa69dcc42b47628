"""Integrals of tabulated data against exponential/oscillatory factors.

The spectrum pipelines integrate grid-tabulated correlation data against
exp(-(i w + Gamma) tau).  Plain trapezoid applied to the full integrand
would put (w dt)^2 errors on every point; here the tabulated factor is
taken piecewise linear on its grid and the exponential factor is
integrated exactly per interval, which keeps the error second order in
the propagated data alone.
"""

import numpy as np


def _phi01(x):
    """phi0 = int_0^1 e^(-x u) du and phi1 = int_0^1 u e^(-x u) du.

    Stable for small |x| via series (unit interval; scale by dt outside).
    """
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)  # avoid 0/0 in the exact branch
    ex = np.exp(-xs)
    phi0_exact = (1.0 - ex) / xs
    phi1_exact = (1.0 - (1.0 + xs) * ex) / xs ** 2
    phi0_series = 1.0 - x / 2.0 + x ** 2 / 6.0 - x ** 3 / 24.0 + x ** 4 / 120.0
    phi1_series = 0.5 - x / 3.0 + x ** 2 / 8.0 - x ** 3 / 30.0 + x ** 4 / 144.0
    return np.where(small, phi0_series, phi0_exact), np.where(small, phi1_series, phi1_exact)


def exp_weights(n, dt, s):
    """Quadrature weights w (len(s) x n) with w @ f = int f(tau) e^(-s tau) dtau.

    f is piecewise linear through n uniform samples at tau = k dt,
    integrated over [0, (n-1) dt]; s may be complex (decay + oscillation).
    """
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    phi0, phi1 = _phi01(s * dt)
    phi0, phi1 = dt * phi0, dt * phi1
    base = np.exp(-np.multiply.outer(s, dt * np.arange(n - 1)))
    w = np.zeros((s.size, n), dtype=complex)
    w[:, :-1] += base * (phi0 - phi1)[:, None]
    w[:, 1:] += base * phi1[:, None]
    return w


def exp_weighted_integral(samples, dt, s, chunk=65536):
    """int f(tau) e^(-s tau) dtau for long tabulated f, chunked in memory.

    Equivalent to ``exp_weights(len(samples), dt, s) @ samples`` without
    materializing the full weight matrix.
    """
    samples = np.asarray(samples, dtype=complex)
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    n = samples.size
    phi0, phi1 = _phi01(s * dt)
    phi0, phi1 = dt * phi0, dt * phi1
    f0 = np.zeros(s.size, dtype=complex)
    f1 = np.zeros(s.size, dtype=complex)
    for start in range(0, n - 1, chunk):
        stop = min(start + chunk, n - 1)
        k = np.arange(start, stop)
        base = np.exp(-np.multiply.outer(s, dt * k))
        f0 += base @ samples[start:stop]
        f1 += base @ samples[start + 1:stop + 1]
    return (phi0 - phi1) * f0 + phi1 * f1


def trapezoid_window(x, y, lo, hi):
    """Trapezoid of tabulated y(x) over [lo, hi] with interpolated endpoints."""
    if lo < x[0] - 1e-12 or hi > x[-1] + 1e-12:
        raise ValueError(f"window [{lo}, {hi}] not covered by grid [{x[0]}, {x[-1]}]")
    inside = (x > lo) & (x < hi)
    xs = np.concatenate(([lo], x[inside], [hi]))
    ys = np.concatenate(([np.interp(lo, x, y.real) + 1j * np.interp(lo, x, y.imag)],
                         y[inside],
                         [np.interp(hi, x, y.real) + 1j * np.interp(hi, x, y.imag)]))
    return np.trapezoid(ys, xs)
