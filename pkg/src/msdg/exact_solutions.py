"""Closed-form reference solutions used by the convergence and long-time
presets.  Each factory returns plain callables of (x, t) or x, ready to feed
to the projection and error routines."""

import numpy as np
from scipy import special

from .errors import InvalidConfigError


def exp_sine_wave():
    """Left-moving profile exp(sin(x + t)) of the linear second-order wave
    equation on a 2*pi-periodic domain.

    Returns (u0, ut0, exact) with exact(x, t).
    """

    def exact(x, t):
        return np.exp(np.sin(x + t))

    def u0(x):
        return np.exp(np.sin(x))

    def ut0(x):
        return np.cos(x) * np.exp(np.sin(x))

    return u0, ut0, exact


def standing_composite_wave():
    """Equal-weight superposition of left- and right-moving sin(cos(.))
    profiles; starts at rest, so both characteristics stay active."""

    def exact(x, t):
        return 0.5 * (np.sin(np.cos(x + t)) + np.sin(np.cos(x - t)))

    def u0(x):
        return np.sin(np.cos(x))

    def ut0(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    return u0, ut0, exact


def bbm_soliton(c, x0, sigma):
    """Solitary wave 3c sech^2((x - x0 - ct) / (2 sqrt(sigma))) of the
    regularized long-wave equation u_t - sigma u_xxt + u u_x = 0."""
    if sigma <= 0:
        raise InvalidConfigError("soliton needs sigma > 0")
    width = 2.0 * np.sqrt(sigma)

    def exact(x, t):
        arg = (np.asarray(x, dtype=float) - x0 - c * t) / width
        return 3.0 * c / np.cosh(arg) ** 2

    return exact


def bbm_cnoidal(m, sigma, x0=0.0):
    """Periodic cnoidal wave of the regularized long-wave equation.

    The wave speed c = (2m - 1) / (3m) normalizes the crest amplitude to 1;
    the natural spatial period is 4 K(m) sqrt((2m - 1) sigma).

    Returns (exact, c, period).
    """
    if not 0.5 < m < 1.0:
        raise InvalidConfigError("cnoidal parameter m must be in (1/2, 1)")
    if sigma <= 0:
        raise InvalidConfigError("cnoidal wave needs sigma > 0")
    c = (2.0 * m - 1.0) / (3.0 * m)
    width = np.sqrt(4.0 * (2.0 * m - 1.0) * sigma)
    period = 4.0 * special.ellipk(m) * np.sqrt((2.0 * m - 1.0) * sigma)
    amplitude = 3.0 * m * c / (2.0 * m - 1.0)

    def exact(x, t):
        arg = (np.asarray(x, dtype=float) - c * t - x0) / width
        _, cn, _, _ = special.ellipj(arg, m)
        return amplitude * cn ** 2

    return exact, c, period


def ch_periodic_peakon(period, c, x0):
    """Spatially periodic peaked traveling wave of the Camassa-Holm equation:
    a cosh profile wrapped to the period, crest height |c|, corner at the
    crest.  Negative c gives the mirror-image antipeakon."""
    if period <= 0:
        raise InvalidConfigError("peakon period must be positive")
    scale = c / np.cosh(0.5 * period)

    def exact(x, t):
        xi = np.asarray(x, dtype=float) - x0 - c * t
        wrapped = xi - period * np.floor(xi / period + 0.5)
        return scale * np.cosh(wrapped)

    return exact


def ch_manufactured_solution():
    """Forced Camassa-Holm reference: u = sin(x + t) solves the equation with
    the mean-free source g = 2 cos(x + t) + 3 sin(2(x + t)).

    Returns (exact, source, source_rate) with exact(x, t), source(t, x),
    source_rate(t, x) -- note the argument orders match the downstream
    consumers (error evaluation vs. scheme forcing).
    """

    def exact(x, t):
        return np.sin(x + t)

    def source(t, x):
        return 2.0 * np.cos(x + t) + 3.0 * np.sin(2.0 * (x + t))

    def source_rate(t, x):
        return -2.0 * np.sin(x + t) + 6.0 * np.cos(2.0 * (x + t))

    return exact, source, source_rate
