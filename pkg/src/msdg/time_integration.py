"""Fixed-step explicit time integrators and the modal stabilization filter.

All steppers share the signature ``step(rhs, t, y, dt, filt=None)`` where
``rhs(t, y)`` returns the state derivative and ``filt`` is an optional
``(y, dt) -> y`` map.  The strong-stability-preserving third-order scheme
applies the filter after every stage (the usual convention for filtered SSP
marching); every other scheme applies it once per completed step.
"""

import numpy as np

from .errors import BlowUpError, InvalidConfigError


def _apply(filt, y, dt):
    return y if filt is None else filt(y, dt)


def euler_step(rhs, t, y, dt, filt=None):
    return _apply(filt, y + dt * rhs(t, y), dt)


def heun_step(rhs, t, y, dt, filt=None):
    k1 = rhs(t, y)
    k2 = rhs(t + dt, y + dt * k1)
    return _apply(filt, y + 0.5 * dt * (k1 + k2), dt)


def ssprk3_step(rhs, t, y, dt, filt=None):
    # Shu-Osher convex form
    y1 = _apply(filt, y + dt * rhs(t, y), dt)
    y2 = _apply(filt, 0.75 * y + 0.25 * (y1 + dt * rhs(t + dt, y1)), dt)
    return _apply(filt, y / 3.0 + (2.0 / 3.0) * (y2 + dt * rhs(t + 0.5 * dt, y2)), dt)


def rk4_step(rhs, t, y, dt, filt=None):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return _apply(filt, y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), dt)


# Dormand-Prince coefficients; only the fifth-order weights are used since
# stepping is fixed-size (no embedded error control).
_DP_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0)
_DP_A = (
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0),
)
_DP_B = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0,
         -2187.0 / 6784.0, 11.0 / 84.0)


def rk5_step(rhs, t, y, dt, filt=None):
    ks = [rhs(t, y)]
    for row, c in zip(_DP_A, _DP_C[1:]):
        yi = y + dt * sum(a * k for a, k in zip(row, ks))
        ks.append(rhs(t + c * dt, yi))
    out = y + dt * sum(b * k for b, k in zip(_DP_B, ks) if b != 0.0)
    return _apply(filt, out, dt)


INTEGRATORS = {
    "euler": euler_step,
    "heun": heun_step,
    "ssprk3": ssprk3_step,
    "rk4": rk4_step,
    "rk5": rk5_step,
}


class StabilizationFilter:
    """Exponential damping of high polynomial modes, applied in modal
    coordinates: mode i of degree-k data is scaled by
    exp(-strength * (i / k)**exponent * dt).

    Mode 0 is always untouched (cell means are preserved exactly) and
    ``exponent`` should be even and fairly large so only the top modes feel
    the damping.
    """

    def __init__(self, scheme, strength=1000.0, exponent=8):
        if strength < 0:
            raise InvalidConfigError("filter strength must be >= 0")
        if exponent <= 0:
            raise InvalidConfigError("filter exponent must be positive")
        self._shape = scheme.state_shape
        k = self._shape[-1] - 1
        modes = np.arange(k + 1, dtype=float) / max(k, 1)
        self._profile = strength * modes ** exponent

    def __call__(self, y, dt):
        damp = np.exp(-self._profile * dt)
        return (y.reshape(self._shape) * damp).reshape(-1)


def integrate(rhs, y0, t_final, dt, method="rk4", t0=0.0, filt=None,
              callback=None):
    """March ``y' = rhs(t, y)`` from t0 to exactly t_final with fixed steps of
    size dt (the last step shrinks to land on t_final).

    ``callback(step_index, t, y)`` is invoked with the initial state and after
    every accepted step.  Raises BlowUpError as soon as the state stops being
    finite.  Returns the final state.
    """
    if dt <= 0:
        raise InvalidConfigError("time step must be positive")
    try:
        step = INTEGRATORS[method]
    except KeyError:
        raise InvalidConfigError(
            f"unknown integrator {method!r}; choose from "
            f"{sorted(INTEGRATORS)}") from None
    span = t_final - t0
    if span < 0:
        raise InvalidConfigError("t_final must not precede t0")

    n_full = int(np.floor(span / dt + 1e-9))
    tail = span - n_full * dt
    if tail < 1e-9 * dt:
        tail = 0.0

    y = np.asarray(y0, dtype=float).copy()
    if callback is not None:
        callback(0, t0, y)
    index = 0
    for i in range(n_full):
        y = step(rhs, t0 + i * dt, y, dt, filt)
        index += 1
        t_now = t0 + index * dt
        if not np.all(np.isfinite(y)):
            raise BlowUpError(
                f"state became non-finite at step {index} (t = {t_now:.6g})",
                step=index, time=t_now)
        if callback is not None:
            callback(index, t_now, y)
    if tail > 0.0:
        y = step(rhs, t0 + n_full * dt, y, tail, filt)
        index += 1
        if not np.all(np.isfinite(y)):
            raise BlowUpError(
                f"state became non-finite at step {index} (t = {t_final:.6g})",
                step=index, time=t_final)
        if callback is not None:
            callback(index, t_final, y)
    return y
