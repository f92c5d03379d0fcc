"""Plot builders over the harness CSV schemas.

Input contracts (matching what the solver harness writes):

  history CSV   t,E_h,delta_E_h[,charge]   or   t,l2_error
  snapshot CSV  x,u[,<aux>]   with the sample time tagged in the file
                name as ``..._snapshot_t<time>.csv``

Everything here reads CSVs, never writes them, and renders with a
pinned style so output bytes are reproducible run to run.
"""

import os
import re

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

__all__ = [
    "SchemaError",
    "examples_dir",
    "plot_contour",
    "plot_history",
    "plot_snapshot",
    "read_history",
    "read_snapshot",
]

# smallest magnitude shown on the log-|drift| axis; exact zeros are
# clamped here so a perfectly conserved series still draws as a line
FLOOR = 1e-17

_TIME_TAG = re.compile(r"_snapshot_t([-+0-9.eE]+)\.csv$")

# fixed style; svg.hashsalt pins the element ids so repeated renders
# of the same data are byte-identical
_RC = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 110,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "svg.hashsalt": "dgplots",
}


class SchemaError(ValueError):
    """A CSV does not match the harness output schema."""


def examples_dir():
    """Directory holding the example CSVs shipped with the package."""
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), "examples")


def _read_csv(path):
    try:
        return pd.read_csv(path)
    except FileNotFoundError:
        raise
    except Exception as exc:  # malformed text, empty file, ...
        raise SchemaError(f"{path}: not a readable CSV ({exc})")


def read_history(path):
    """Load a history CSV; returns (kind, frame) with kind in
    {'energy', 'error'}."""
    frame = _read_csv(path)
    cols = set(frame.columns)
    if {"t", "E_h", "delta_E_h"} <= cols:
        return "energy", frame
    if {"t", "l2_error"} <= cols:
        return "error", frame
    raise SchemaError(
        f"{path}: columns {sorted(cols)} match neither history schema"
    )


def read_snapshot(path):
    """Load a snapshot CSV; returns (time_or_None, frame).

    The sample time is recovered from the ``_snapshot_t<time>.csv``
    file-name tag when present.
    """
    frame = _read_csv(path)
    cols = list(frame.columns)
    if len(cols) < 2 or cols[0] != "x" or cols[1] != "u":
        raise SchemaError(
            f"{path}: columns {cols} do not match the snapshot schema x,u[,aux]"
        )
    m = _TIME_TAG.search(os.path.basename(path))
    t = float(m.group(1)) if m else None
    return t, frame


def _save(fig, out):
    root, ext = os.path.splitext(out)
    if not ext:
        out = root + ".svg"
        ext = ".svg"
    if ext == ".svg":
        # the SVG writer stamps the creation date unless told not to
        fig.savefig(out, metadata={"Date": None})
    else:
        fig.savefig(out)
    plt.close(fig)
    return out


def plot_history(path, out, floor=FLOOR):
    """Time-history figure from an energy or error CSV.

    Energy drift (and charge drift, when the column is present) is
    shown as |value| on a log axis, clamped at ``floor`` so an exactly
    conserved quantity draws as a flat line on the floor marker.
    Error histories are drawn directly on a log-y axis.
    """
    kind, frame = read_history(path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        t = frame["t"].to_numpy()
        if kind == "energy":
            drift = np.maximum(np.abs(frame["delta_E_h"].to_numpy()), floor)
            ax.semilogy(t, drift, label=r"$|E_h(t) - E_h(0)|$")
            if "charge" in frame.columns:
                q = frame["charge"].to_numpy()
                ax.semilogy(
                    t,
                    np.maximum(np.abs(q - q[0]), floor),
                    "--",
                    label="|charge drift|",
                )
            ax.axhline(floor, color="0.6", linestyle=":", linewidth=1.0)
            ax.set_ylabel("conservation drift")
            ax.legend(loc="best")
        else:
            ax.semilogy(t, frame["l2_error"].to_numpy(), color="tab:red")
            ax.set_ylabel(r"$L^2$ error")
        ax.set_xlabel("t")
        return _save(fig, out)


def plot_snapshot(path, out, reference=None):
    """Solution profile from one snapshot CSV.

    ``reference`` is an optional second snapshot CSV (e.g. a sampled
    exact solution or a resolved run) drawn dotted on top; the largest
    pointwise gap between the two u-curves is annotated.
    """
    t, frame = read_snapshot(path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        x = frame["x"].to_numpy()
        u = frame["u"].to_numpy()
        ax.plot(x, u, label="u")
        for aux in frame.columns[2:]:
            ax.plot(x, frame[aux].to_numpy(), "--", alpha=0.8, label=aux)
        if reference is not None:
            _, ref = read_snapshot(reference)
            xr = ref["x"].to_numpy()
            ur = ref["u"].to_numpy()
            ax.plot(xr, ur, "k:", label="reference")
            gap = float(np.max(np.abs(u - np.interp(x, xr, ur))))
            ax.annotate(
                f"max gap = {gap:.2e}",
                xy=(0.02, 0.02),
                xycoords="axes fraction",
                fontsize=9,
            )
        ax.set_xlabel("x")
        ax.set_ylabel("u")
        if t is not None:
            ax.set_title(f"t = {t:g}")
        ax.legend(loc="best")
        return _save(fig, out)


def plot_contour(paths, out, style="contour", levels=40):
    """Space-time view assembled from a series of snapshot CSVs.

    Needs at least two snapshots, each carrying its time tag and all
    sampled on the same x grid.  ``style`` is "contour" (filled x-t
    contour with colorbar) or "waterfall" (time-offset profiles).
    """
    if style not in ("contour", "waterfall"):
        raise SchemaError(f"unknown contour style {style!r}")
    series = []
    for p in paths:
        t, frame = read_snapshot(p)
        if t is None:
            raise SchemaError(
                f"{p}: no _snapshot_t<time>.csv tag; cannot place it in time"
            )
        series.append((t, frame))
    if len({t for t, _ in series}) < 2:
        raise SchemaError("contour needs snapshots from at least two times")
    series.sort(key=lambda item: item[0])
    x = series[0][1]["x"].to_numpy()
    rows = []
    for t, frame in series:
        xi = frame["x"].to_numpy()
        if xi.shape != x.shape or not np.allclose(xi, x):
            raise SchemaError("snapshots are not sampled on a common x grid")
        rows.append(frame["u"].to_numpy())
    times = np.array([t for t, _ in series])
    u_xt = np.vstack(rows)

    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        if style == "contour":
            filled = ax.contourf(x, times, u_xt, levels=levels, cmap="viridis")
            fig.colorbar(filled, ax=ax, label="u")
            ax.set_ylabel("t")
        else:
            # stack profiles with a vertical offset proportional to time
            span = float(np.max(u_xt) - np.min(u_xt)) or 1.0
            step = 0.8 * span * (times[-1] - times[0]) / max(len(times) - 1, 1)
            for t, u in zip(times, u_xt):
                ax.plot(x, u + t / (times[-1] - times[0]) * step * len(times),
                        color="tab:blue", linewidth=1.0)
            ax.set_yticks([])
            ax.set_ylabel("profiles, increasing t")
        ax.set_xlabel("x")
        return _save(fig, out)
