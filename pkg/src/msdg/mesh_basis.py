"""Meshes, reference-element basis, quadrature, evaluation, projection, norms.

The discrete space is piecewise polynomials of degree <= k on a periodic 1D
mesh.  On each cell the basis is the L2-orthonormal scaling of Legendre
polynomials,

    phi_i(x) = sqrt((2i+1)/h_j) * P_i(2(x - x_j)/h_j),   i = 0..k,

so that the element mass matrix is the identity and projections reduce to
moment evaluations.  All objects are immutable after construction.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence, Union

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import InvalidConfigError

__all__ = [
    "QuadratureRule",
    "Mesh1D",
    "DgFunction",
    "gauss_legendre",
    "build_mesh",
    "mesh_from_edges",
    "default_quadrature",
    "project",
    "project_values",
    "project_product",
    "l2_error",
    "l2_norm",
    "integral",
    "mean",
]


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


class QuadratureRule:
    """Gauss-Legendre nodes/weights on the reference interval [-1, 1]."""

    __slots__ = ("nodes", "weights", "n")

    def __init__(self, nodes, weights):
        self.nodes = _freeze(nodes)
        self.weights = _freeze(weights)
        self.n = len(self.nodes)

    def __repr__(self):
        return f"QuadratureRule(n={self.n})"


def gauss_legendre(n: int) -> QuadratureRule:
    """Return the n-point Gauss-Legendre rule on [-1, 1] (1 <= n <= 32)."""
    if not 1 <= n <= 32:
        raise InvalidConfigError(f"quadrature point count out of range: {n}")
    nodes, weights = npleg.leggauss(n)
    return QuadratureRule(nodes, weights)


class Mesh1D:
    """A periodic partition of an interval into N cells.

    Attributes
    ----------
    domain : (float, float)
        Left and right endpoints.
    edges : ndarray, shape (N+1,)
        Strictly increasing cell edges; edges[0] = left, edges[N] = right.
        The first and last edge are identified by periodicity.
    widths : ndarray, shape (N,)
        Cell widths h_j > 0.
    centers : ndarray, shape (N,)
        Cell midpoints.
    pattern : str
        "uniform", "two_one_alternating", or "explicit".
    """

    __slots__ = ("domain", "edges", "widths", "centers", "n_cells", "pattern")

    def __init__(self, edges, pattern="explicit"):
        edges = np.asarray(edges, dtype=float)
        if edges.ndim != 1 or len(edges) < 3:
            raise InvalidConfigError("mesh needs at least 2 cells")
        widths = np.diff(edges)
        if np.any(widths <= 0):
            raise InvalidConfigError("cell edges must be strictly increasing")
        self.domain = (float(edges[0]), float(edges[-1]))
        self.edges = _freeze(edges)
        self.widths = _freeze(widths)
        self.centers = _freeze(0.5 * (edges[:-1] + edges[1:]))
        self.n_cells = len(widths)
        self.pattern = pattern

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    def __repr__(self):
        a, b = self.domain
        return f"Mesh1D(N={self.n_cells}, domain=({a:g}, {b:g}), pattern={self.pattern!r})"


def build_mesh(domain, n_cells: int, pattern: str = "uniform") -> Mesh1D:
    """Build a periodic mesh on ``domain`` with ``n_cells`` cells.

    pattern "uniform": equal cell widths.
    pattern "two_one_alternating": widths alternate 2h, h, 2h, h, ...
    (for an odd cell count the last cell is a wide one).
    """
    a, b = float(domain[0]), float(domain[1])
    if not b > a:
        raise InvalidConfigError("domain must have positive length")
    if n_cells < 2:
        raise InvalidConfigError("mesh needs at least 2 cells")
    if pattern == "uniform":
        edges = np.linspace(a, b, n_cells + 1)
    elif pattern == "two_one_alternating":
        n_wide = (n_cells + 1) // 2
        n_narrow = n_cells // 2
        unit = (b - a) / (2 * n_wide + n_narrow)
        widths = np.empty(n_cells)
        widths[0::2] = 2.0 * unit
        widths[1::2] = unit
        edges = np.concatenate(([a], a + np.cumsum(widths)))
        edges[-1] = b
    else:
        raise InvalidConfigError(f"unknown mesh pattern: {pattern!r}")
    return Mesh1D(edges, pattern=pattern)


def mesh_from_edges(edges) -> Mesh1D:
    """Build a mesh from an explicit edge list."""
    return Mesh1D(edges, pattern="explicit")


def default_quadrature(k: int) -> QuadratureRule:
    """Default rule: exact for cubic products of degree-k polynomials."""
    return gauss_legendre(max(k + 2, math.ceil((3 * k + 1) / 2)))


def _legendre_values(k: int, nodes: np.ndarray) -> np.ndarray:
    """P_i(nodes) for i = 0..k, shape (k+1, len(nodes))."""
    return npleg.legval(nodes, np.eye(k + 1))


class DgFunction:
    """Piecewise polynomial of degree k: modal coefficients per cell.

    coeffs has shape (N, k+1); coeffs[j, i] multiplies the i-th orthonormal
    Legendre mode on cell j.
    """

    __slots__ = ("mesh", "degree", "coeffs")

    def __init__(self, mesh: Mesh1D, degree: int, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (mesh.n_cells, degree + 1):
            raise InvalidConfigError(
                f"coefficient array has shape {coeffs.shape}, "
                f"expected {(mesh.n_cells, degree + 1)}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise InvalidConfigError("non-finite coefficients")
        self.mesh = mesh
        self.degree = degree
        self.coeffs = _freeze(coeffs)

    @classmethod
    def zero(cls, mesh: Mesh1D, degree: int) -> "DgFunction":
        return cls(mesh, degree, np.zeros((mesh.n_cells, degree + 1)))

    # -- basic algebra ------------------------------------------------

    def _check_compatible(self, other: "DgFunction"):
        if self.mesh is not other.mesh and not np.array_equal(
            self.mesh.edges, other.mesh.edges
        ):
            raise InvalidConfigError("mesh mismatch")
        if self.degree != other.degree:
            raise InvalidConfigError("degree mismatch")

    def __add__(self, other):
        self._check_compatible(other)
        return DgFunction(self.mesh, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return DgFunction(self.mesh, self.degree, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return DgFunction(self.mesh, self.degree, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return DgFunction(self.mesh, self.degree, -self.coeffs)

    # -- evaluation ---------------------------------------------------

    def _scale(self) -> np.ndarray:
        """Orthonormalization factors sqrt((2i+1)/h_j), shape (N, k+1)."""
        i = np.arange(self.degree + 1)
        return np.sqrt((2.0 * i + 1.0)[None, :] / self.mesh.widths[:, None])

    def values_at_reference(self, ref_nodes) -> np.ndarray:
        """Evaluate on every cell at the given reference nodes; shape (N, nq)."""
        ref_nodes = np.asarray(ref_nodes, dtype=float)
        basis = _legendre_values(self.degree, ref_nodes)  # (k+1, nq)
        return (self.coeffs * self._scale()) @ basis

    def values_at_quadrature(self, quad: QuadratureRule) -> np.ndarray:
        return self.values_at_reference(quad.nodes)

    def quadrature_points(self, quad: QuadratureRule) -> np.ndarray:
        """Physical coordinates of the quadrature nodes, shape (N, nq)."""
        return (
            self.mesh.centers[:, None]
            + 0.5 * self.mesh.widths[:, None] * quad.nodes[None, :]
        )

    def evaluate(self, x, side: str | None = None) -> np.ndarray:
        """Point evaluation.  ``side`` ("left" or "right") picks the cell when
        x lands on an interior or periodic cell edge; without it an edge hit
        raises, since the value there is double-valued."""
        mesh = self.mesh
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xf = np.atleast_1d(x)
        if np.any(xf < mesh.domain[0] - 1e-12) or np.any(xf > mesh.domain[1] + 1e-12):
            raise InvalidConfigError("evaluation point outside the domain")
        tol = 1e-12 * max(1.0, abs(mesh.domain[0]), abs(mesh.domain[1]))
        # nearest edge and whether we are on it
        idx = np.searchsorted(mesh.edges, xf, side="right") - 1
        idx = np.clip(idx, 0, mesh.n_cells - 1)
        near_left = np.abs(xf - mesh.edges[idx]) <= tol
        near_right = np.abs(xf - mesh.edges[idx + 1]) <= tol
        on_edge = near_left | near_right
        if np.any(on_edge):
            if side is None:
                raise InvalidConfigError(
                    "evaluation at a cell interface requires side='left' or side='right'"
                )
            if side not in ("left", "right"):
                raise InvalidConfigError(f"unknown side flag: {side!r}")
            if side == "left":
                # take the limit from the left: cell whose right edge is hit
                idx = np.where(near_left, (idx - 1) % mesh.n_cells, idx)
            else:
                idx = np.where(near_right, (idx + 1) % mesh.n_cells, idx)
        xi = 2.0 * (xf - mesh.centers[idx]) / mesh.widths[idx]
        xi = np.clip(xi, -1.0, 1.0)
        basis = _legendre_values(self.degree, xi)  # (k+1, npts)
        vals = np.einsum("ji,ij->j", self.coeffs[idx] * self._scale()[idx], basis)
        return vals[0] if scalar else vals

    # -- interface traces ---------------------------------------------

    def minus_traces(self) -> np.ndarray:
        """Trace from the left cell at interface e (right edge of cell e),
        e = 0..N-1; interface N-1 is the periodic wrap edge."""
        return self.coeffs @ (
            np.sqrt(2.0 * np.arange(self.degree + 1) + 1.0)
        ) / np.sqrt(self.mesh.widths)

    def plus_traces(self) -> np.ndarray:
        """Trace from the right cell at interface e (left edge of cell e+1)."""
        i = np.arange(self.degree + 1)
        signed = self.coeffs @ (((-1.0) ** i) * np.sqrt(2.0 * i + 1.0))
        return np.roll(signed / np.sqrt(self.mesh.widths), -1)

    def jumps(self) -> np.ndarray:
        """[u] = u+ - u- at every interface."""
        return self.plus_traces() - self.minus_traces()

    def averages(self) -> np.ndarray:
        """{u} = (u+ + u-)/2 at every interface."""
        return 0.5 * (self.plus_traces() + self.minus_traces())

    def sample(self, points_per_cell: int = 10):
        """Equispaced interior samples for plotting; returns (x, values)."""
        if points_per_cell < 2:
            raise InvalidConfigError("need at least 2 sample points per cell")
        ref = np.linspace(-1.0, 1.0, points_per_cell + 2)[1:-1]
        vals = self.values_at_reference(ref)
        xs = (
            self.mesh.centers[:, None]
            + 0.5 * self.mesh.widths[:, None] * ref[None, :]
        )
        return xs.ravel(), vals.ravel()

    def __repr__(self):
        return f"DgFunction(N={self.mesh.n_cells}, k={self.degree})"


Factor = Union[DgFunction, Callable[[np.ndarray], np.ndarray]]


def project_values(values, mesh: Mesh1D, k: int, quad: QuadratureRule) -> DgFunction:
    """L2-project nodal data given at quadrature points; values shape (N, nq)."""
    basis = _legendre_values(k, quad.nodes)  # (k+1, nq)
    weighted = values * quad.weights[None, :]  # (N, nq)
    moments = weighted @ basis.T  # (N, k+1), missing the h/2 and scale factors
    i = np.arange(k + 1)
    scale = np.sqrt((2.0 * i + 1.0)[None, :] / mesh.widths[:, None])
    coeffs = 0.5 * mesh.widths[:, None] * moments * scale
    return DgFunction(mesh, k, coeffs)


def project(
    f: Callable[[np.ndarray], np.ndarray],
    mesh: Mesh1D,
    k: int,
    quad: QuadratureRule | None = None,
) -> DgFunction:
    """Elementwise L2 projection of a pointwise function onto degree-k space."""
    if quad is None:
        quad = default_quadrature(k)
    xq = (
        mesh.centers[:, None] + 0.5 * mesh.widths[:, None] * quad.nodes[None, :]
    )
    values = np.asarray(f(xq), dtype=float)
    if values.shape != xq.shape:
        values = np.broadcast_to(values, xq.shape)
    return project_values(values, mesh, k, quad)


def project_product(
    factors: Sequence[Factor],
    mesh: Mesh1D | None = None,
    k: int | None = None,
    quad: QuadratureRule | None = None,
) -> DgFunction:
    """Project the pointwise product of the factors (DG fields and/or
    pointwise functions) onto degree-k space."""
    if len(factors) == 0:
        raise InvalidConfigError("need at least one factor")
    for fac in factors:
        if isinstance(fac, DgFunction):
            if mesh is None:
                mesh, k = fac.mesh, fac.degree
            elif fac.mesh is not mesh and not np.array_equal(
                fac.mesh.edges, mesh.edges
            ):
                raise InvalidConfigError("mesh mismatch among factors")
    if mesh is None or k is None:
        raise InvalidConfigError(
            "mesh and degree required when no DG factor is present"
        )
    if quad is None:
        quad = default_quadrature(k)
    xq = (
        mesh.centers[:, None] + 0.5 * mesh.widths[:, None] * quad.nodes[None, :]
    )
    values = np.ones_like(xq)
    for fac in factors:
        if isinstance(fac, DgFunction):
            values = values * fac.values_at_quadrature(quad)
        else:
            values = values * np.asarray(fac(xq), dtype=float)
    return project_values(values, mesh, k, quad)


def l2_norm(u: DgFunction) -> float:
    """Global L2 norm; exact thanks to the orthonormal basis."""
    return float(np.linalg.norm(u.coeffs))


def l2_error(
    u: DgFunction,
    f_exact: Callable[[np.ndarray], np.ndarray],
    quad: QuadratureRule | None = None,
) -> float:
    """Over-integrated L2 distance between u and a pointwise function."""
    if quad is None:
        quad = gauss_legendre(min(u.degree + 3, 32))
    xq = u.quadrature_points(quad)
    diff = u.values_at_quadrature(quad) - np.asarray(f_exact(xq), dtype=float)
    cellwise = 0.5 * u.mesh.widths * ((diff * diff) @ quad.weights)
    return float(np.sqrt(np.sum(cellwise)))


def integral(u: DgFunction) -> float:
    """Integral over the domain: only mode 0 contributes."""
    return float(u.coeffs[:, 0] @ np.sqrt(u.mesh.widths))


def mean(u: DgFunction) -> float:
    return integral(u) / u.mesh.length
