"""Figure generation for solver CSV output.

Turns the CSV files written by the ``msdg`` harness (energy/error
histories, solution snapshots) into publication-style figures: time
histories with a log-|drift| axis, single-time solution profiles with
an optional reference overlay, and space-time contour or waterfall
views built from a snapshot series.  Strictly read-only over its
inputs, and deterministic: the same CSVs and options produce the same
bytes.
"""

from .plots import (
    SchemaError,
    examples_dir,
    plot_contour,
    plot_history,
    plot_snapshot,
    read_history,
    read_snapshot,
)

__all__ = [
    "SchemaError",
    "examples_dir",
    "plot_contour",
    "plot_history",
    "plot_snapshot",
    "read_history",
    "read_snapshot",
]
