"""Block-banded periodic operators on modal DG coefficients.

A ``BlockOperator`` couples cells of a periodic mesh through (k+1)x(k+1)
blocks at integer cell offsets.  The two building blocks of every scheme are

* ``derivative_operator`` -- the weak derivative with averaged interface
  values plus an ``alpha``-weighted jump penalty, and
* ``jump_operator`` -- the pure interface-jump pairing.

Both are assembled analytically in the orthonormal Legendre basis, where the
element mass matrix is the identity, so operators act directly on coefficient
arrays of shape (N, k+1).
"""

from __future__ import annotations

import math
import warnings

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import InvalidConfigError, SingularOperatorError, InconsistentRhsError
from .mesh_basis import Mesh1D

__all__ = [
    "BlockOperator",
    "derivative_operator",
    "jump_operator",
    "factorize",
    "FactorizedOperator",
    "zero_mean_inverse",
    "ZeroMeanSolver",
    "antiderivative_projection",
    "AntiderivativeProjection",
]

_PIVOT_TOL = 1e-12


class BlockOperator:
    """Banded block-circulant-structured operator on (N, b) coefficient arrays.

    ``blocks[i][j]`` maps the coefficients of cell ``(j + offsets[i]) % N``
    into the residual of cell ``j``.  Offsets are canonicalized modulo N and
    congruent offsets are summed, so the representation stays well defined on
    very small meshes where e.g. -1 and +1 alias.
    """

    __slots__ = ("n_cells", "block_size", "offsets", "blocks")

    def __init__(self, n_cells: int, block_size: int, offsets, blocks):
        n_cells = int(n_cells)
        block_size = int(block_size)
        if n_cells < 1 or block_size < 1:
            raise InvalidConfigError("empty operator")
        merged: dict[int, np.ndarray] = {}
        for off, blk in zip(offsets, blocks):
            blk = np.asarray(blk, dtype=float)
            if blk.shape != (n_cells, block_size, block_size):
                raise InvalidConfigError(
                    f"block group has shape {blk.shape}, expected "
                    f"{(n_cells, block_size, block_size)}"
                )
            key = int(off) % n_cells
            if key in merged:
                merged[key] = merged[key] + blk
            else:
                merged[key] = blk.copy()
        keys = sorted(merged)
        self.n_cells = n_cells
        self.block_size = block_size
        self.offsets = tuple(keys)
        stack = np.stack([merged[key] for key in keys], axis=0)
        stack.setflags(write=False)
        self.blocks = stack

    # -- construction helpers ------------------------------------------

    @classmethod
    def identity(cls, n_cells: int, block_size: int) -> "BlockOperator":
        eye = np.broadcast_to(
            np.eye(block_size), (n_cells, block_size, block_size)
        ).copy()
        return cls(n_cells, block_size, [0], [eye])

    @classmethod
    def from_dense(cls, dense, n_cells: int, block_size: int) -> "BlockOperator":
        """Wrap a dense (N*b, N*b) matrix; keeps every nonzero offset."""
        dense = np.asarray(dense, dtype=float)
        n = n_cells * block_size
        if dense.shape != (n, n):
            raise InvalidConfigError(f"dense matrix has shape {dense.shape}, expected {(n, n)}")
        offsets, blocks = [], []
        for off in range(n_cells):
            grp = np.empty((n_cells, block_size, block_size))
            for j in range(n_cells):
                c = (j + off) % n_cells
                grp[j] = dense[
                    j * block_size : (j + 1) * block_size,
                    c * block_size : (c + 1) * block_size,
                ]
            if off == 0 or np.any(grp != 0.0):
                offsets.append(off)
                blocks.append(grp)
        return cls(n_cells, block_size, offsets, blocks)

    # -- action ----------------------------------------------------------

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Apply to a coefficient array of shape (N, b)."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_cells, self.block_size):
            raise InvalidConfigError(
                f"operand has shape {u.shape}, expected "
                f"{(self.n_cells, self.block_size)}"
            )
        out = np.zeros_like(u)
        for i, off in enumerate(self.offsets):
            shifted = np.roll(u, -off, axis=0) if off else u
            out += np.einsum("jab,jb->ja", self.blocks[i], shifted)
        return out

    def to_dense(self) -> np.ndarray:
        N, b = self.n_cells, self.block_size
        dense = np.zeros((N * b, N * b))
        for i, off in enumerate(self.offsets):
            for j in range(N):
                c = (j + off) % N
                dense[j * b : (j + 1) * b, c * b : (c + 1) * b] += self.blocks[i][j]
        return dense

    # -- algebra -----------------------------------------------------------

    def _check_shape(self, other: "BlockOperator"):
        if self.n_cells != other.n_cells or self.block_size != other.block_size:
            raise InvalidConfigError("operator shape mismatch")

    def __add__(self, other: "BlockOperator") -> "BlockOperator":
        self._check_shape(other)
        return BlockOperator(
            self.n_cells,
            self.block_size,
            list(self.offsets) + list(other.offsets),
            list(self.blocks) + list(other.blocks),
        )

    def __sub__(self, other: "BlockOperator") -> "BlockOperator":
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> "BlockOperator":
        return BlockOperator(
            self.n_cells,
            self.block_size,
            self.offsets,
            [float(scalar) * blk for blk in self.blocks],
        )

    __rmul__ = __mul__

    def __neg__(self) -> "BlockOperator":
        return (-1.0) * self

    def compose(self, other: "BlockOperator") -> "BlockOperator":
        """self @ other (apply ``other`` first)."""
        self._check_shape(other)
        N = self.n_cells
        offsets, blocks = [], []
        for ia, oa in enumerate(self.offsets):
            for ib, ob in enumerate(other.offsets):
                # row cell j of the product couples to cell (j + oa + ob) % N;
                # the right factor is evaluated at cell (j + oa) % N
                right = np.roll(other.blocks[ib], -oa, axis=0) if oa else other.blocks[ib]
                offsets.append(oa + ob)
                blocks.append(np.einsum("jab,jbc->jac", self.blocks[ia], right))
        return BlockOperator(N, self.block_size, offsets, blocks)

    __matmul__ = compose

    def transpose(self) -> "BlockOperator":
        offsets, blocks = [], []
        for i, off in enumerate(self.offsets):
            blocks.append(np.roll(self.blocks[i].transpose(0, 2, 1), off, axis=0))
            offsets.append(-off)
        return BlockOperator(self.n_cells, self.block_size, offsets, blocks)

    def shift_identity(self, scalar: float) -> "BlockOperator":
        """self + scalar * I."""
        return self + float(scalar) * BlockOperator.identity(
            self.n_cells, self.block_size
        )

    def __repr__(self):
        return (
            f"BlockOperator(N={self.n_cells}, b={self.block_size}, "
            f"offsets={self.offsets})"
        )


def _edge_traces(mesh: Mesh1D, k: int):
    """Right/left edge traces of the orthonormal basis, each (N, k+1)."""
    i = np.arange(k + 1)
    sq = np.sqrt(2.0 * i + 1.0)
    t_right = sq[None, :] / np.sqrt(mesh.widths)[:, None]
    t_left = ((-1.0) ** i)[None, :] * t_right
    return t_right, t_left


def _stiffness_core(k: int) -> np.ndarray:
    """Integral of (basis_i) d(basis_l)/dx over a cell, times h (shape (k+1, k+1))."""
    l = np.arange(k + 1)[:, None]
    i = np.arange(k + 1)[None, :]
    mask = (l > i) & ((l + i) % 2 == 1)
    return 2.0 * np.sqrt((2.0 * l + 1.0) * (2.0 * i + 1.0)) * mask


def derivative_operator(mesh: Mesh1D, k: int, alpha: float = 0.0) -> BlockOperator:
    """Weak derivative with interface value {u} + alpha [u].

    alpha = 0 is the central choice; alpha = +-1/2 are the fully one-sided
    choices.  The operators satisfy D_alpha = D_0 + alpha * (jump operator)
    and the adjoint relation transpose(D_alpha) = -D_{-alpha}.
    """
    alpha = float(alpha)
    t_right, t_left = _edge_traces(mesh, k)
    stiff = _stiffness_core(k)[None, :, :] / mesh.widths[:, None, None]
    diag = (
        -stiff
        + (0.5 - alpha) * np.einsum("jl,ji->jli", t_right, t_right)
        - (0.5 + alpha) * np.einsum("jl,ji->jli", t_left, t_left)
    )
    plus = (0.5 + alpha) * np.einsum(
        "jl,ji->jli", t_right, np.roll(t_left, -1, axis=0)
    )
    minus = -(0.5 - alpha) * np.einsum(
        "jl,ji->jli", t_left, np.roll(t_right, 1, axis=0)
    )
    return BlockOperator(mesh.n_cells, k + 1, [-1, 0, 1], [minus, diag, plus])


def jump_operator(mesh: Mesh1D, k: int) -> BlockOperator:
    """Interface-jump pairing: (Lu, v) = sum_e [u]_e [v]_e over interfaces.

    Symmetric and negative semi-definite; (Lu, u) = -sum_e [u]_e^2.
    """
    t_right, t_left = _edge_traces(mesh, k)
    diag = -np.einsum("jl,ji->jli", t_right, t_right) - np.einsum(
        "jl,ji->jli", t_left, t_left
    )
    plus = np.einsum("jl,ji->jli", t_right, np.roll(t_left, -1, axis=0))
    minus = np.einsum("jl,ji->jli", t_left, np.roll(t_right, 1, axis=0))
    return BlockOperator(mesh.n_cells, k + 1, [-1, 0, 1], [minus, diag, plus])


# ---------------------------------------------------------------------------
# factorization
# ---------------------------------------------------------------------------


class FactorizedOperator:
    """LU factorization with a relative pivot check; solve() per RHS."""

    def __init__(self, op: BlockOperator, dense_threshold: int = 1200):
        self.n_cells = op.n_cells
        self.block_size = op.block_size
        n = op.n_cells * op.block_size
        dense = op.to_dense()
        if n <= dense_threshold:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu, piv = scipy.linalg.lu_factor(dense, check_finite=False)
            pivots = np.abs(np.diag(lu))
            self._check_pivots(pivots)
            self._solve = lambda r: scipy.linalg.lu_solve((lu, piv), r, check_finite=False)
        else:
            try:
                splu = scipy.sparse.linalg.splu(scipy.sparse.csc_matrix(dense))
            except RuntimeError as exc:  # exactly singular
                raise SingularOperatorError(str(exc), pivot=0.0) from exc
            pivots = np.abs(splu.U.diagonal())
            self._check_pivots(pivots)
            self._solve = splu.solve

    @staticmethod
    def _check_pivots(pivots: np.ndarray):
        top = pivots.max() if len(pivots) else 0.0
        low = pivots.min() if len(pivots) else 0.0
        if top == 0.0 or low / top < _PIVOT_TOL:
            raise SingularOperatorError(
                f"factorization hit a negligible pivot ({low:.3e} vs {top:.3e})",
                pivot=float(low),
            )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        shape = (self.n_cells, self.block_size)
        if rhs.shape != shape:
            raise InvalidConfigError(f"rhs has shape {rhs.shape}, expected {shape}")
        return self._solve(rhs.ravel()).reshape(shape)


def factorize(op: BlockOperator, dense_threshold: int = 1200) -> FactorizedOperator:
    return FactorizedOperator(op, dense_threshold=dense_threshold)


# ---------------------------------------------------------------------------
# zero-mean solves (kernel = constants)
# ---------------------------------------------------------------------------


class ZeroMeanSolver:
    """Inverse of an operator whose kernel contains the constants.

    The generic path deflates the singular system: one mode-0 degree of
    freedom is eliminated through the zero-mean constraint and the matching
    equation is dropped.  That requires the kernel to be exactly the
    constants; when it is larger the deflated matrix is still singular and a
    ``SingularOperatorError`` is raised -- unless ``allow_rank_deficient``
    is set, in which case the solve falls back to a minimum-norm
    least-squares inverse (the solution component along any extra kernel
    directions is dropped, and the zero-mean gauge is enforced).

    solve() rejects right-hand sides with a non-negligible mean, which
    signals a formulation error upstream.  On the least-squares path a
    residual check (``residual_rtol``) guards against right-hand sides
    outside the operator's range; pass ``residual_rtol=None`` to project
    such data onto the range instead, which is the documented behaviour for
    schemes that only ever use the inverse inside a composition that
    quotients out the kernel.
    """

    _MEAN_TOL = 1e-10

    def __init__(
        self,
        op: BlockOperator,
        mesh: Mesh1D,
        allow_rank_deficient: bool = False,
        residual_rtol: float | None = 1e-8,
    ):
        if op.n_cells != mesh.n_cells:
            raise InvalidConfigError("operator/mesh cell count mismatch")
        N, b = op.n_cells, op.block_size
        n = N * b
        sqrt_h = np.sqrt(mesh.widths)
        self._sqrt_h = sqrt_h
        self._volume = mesh.length
        self.n_cells = N
        self.block_size = b
        self._residual_rtol = residual_rtol
        drop = (N - 1) * b  # flat index of the eliminated DOF (cell N-1, mode 0)
        keep = np.array([d for d in range(n) if d != drop])
        # embedding of the reduced unknowns into the zero-mean subspace
        embed = np.zeros((n, n - 1))
        embed[keep, np.arange(n - 1)] = 1.0
        for j in range(N - 1):
            embed[drop, np.searchsorted(keep, j * b)] = -sqrt_h[j] / sqrt_h[-1]
        dense = op.to_dense()
        reduced = (dense @ embed)[keep]
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu, piv = scipy.linalg.lu_factor(reduced, check_finite=False)
            pivots = np.abs(np.diag(lu))
            FactorizedOperator._check_pivots(pivots)
        except SingularOperatorError:
            if not allow_rank_deficient:
                raise
            # Minimum-norm least-squares inverse; exact on the range of the
            # operator, annihilates the surplus cokernel directions.
            self._pinv = np.linalg.pinv(dense, rcond=1e-12)
            self._dense = dense
            self._lu_piv = None
        else:
            self._lu_piv = (lu, piv)
            self._embed = embed
            self._keep = keep
            self._pinv = None

    def _check_mean(self, rhs: np.ndarray, scale: float):
        rhs_mean = float(rhs[:, 0] @ self._sqrt_h) / self._volume
        if scale > 0.0 and abs(rhs_mean) > self._MEAN_TOL * scale:
            raise InconsistentRhsError(
                f"right-hand side has mean {rhs_mean:.3e} (norm {scale:.3e}); "
                "a zero-mean solve requires a mean-free right-hand side"
            )

    def _degauge(self, x: np.ndarray) -> np.ndarray:
        """Remove the constant-function component so the result has zero mean."""
        x_mean = float(x[:, 0] @ self._sqrt_h) / self._volume
        if x_mean != 0.0:
            x = x.copy()
            x[:, 0] -= x_mean * self._sqrt_h
        return x

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        shape = (self.n_cells, self.block_size)
        if rhs.shape != shape:
            raise InvalidConfigError(f"rhs has shape {rhs.shape}, expected {shape}")
        scale = float(np.linalg.norm(rhs))
        self._check_mean(rhs, scale)
        if self._pinv is None:
            y = scipy.linalg.lu_solve(
                self._lu_piv, rhs.ravel()[self._keep], check_finite=False
            )
            return (self._embed @ y).reshape(shape)
        x = (self._pinv @ rhs.ravel()).reshape(shape)
        if self._residual_rtol is not None and scale > 0.0:
            resid = float(np.linalg.norm(self._dense @ x.ravel() - rhs.ravel()))
            if resid > self._residual_rtol * scale:
                raise InconsistentRhsError(
                    f"right-hand side lies outside the operator range "
                    f"(residual {resid:.3e} vs norm {scale:.3e})"
                )
        return self._degauge(x)

    def as_dense(self) -> np.ndarray:
        """Dense matrix of the solve map (RHS coefficients -> solution)."""
        n = self.n_cells * self.block_size
        if self._pinv is None:
            rightinv = scipy.linalg.lu_solve(
                self._lu_piv, np.eye(n - 1), check_finite=False
            )
            selector = np.zeros((n - 1, n))
            selector[np.arange(n - 1), self._keep] = 1.0
            return self._embed @ rightinv @ selector
        # subtract the mean functional so the map lands in the zero-mean space
        ones_coeff = np.zeros(n)
        ones_coeff[:: self.block_size] = self._sqrt_h
        mean_row = np.zeros(n)
        mean_row[:: self.block_size] = self._sqrt_h / self._volume
        return (np.eye(n) - np.outer(ones_coeff, mean_row)) @ self._pinv


def zero_mean_inverse(
    op: BlockOperator,
    mesh: Mesh1D,
    allow_rank_deficient: bool = False,
    residual_rtol: float | None = 1e-8,
) -> ZeroMeanSolver:
    return ZeroMeanSolver(
        op,
        mesh,
        allow_rank_deficient=allow_rank_deficient,
        residual_rtol=residual_rtol,
    )


# ---------------------------------------------------------------------------
# primitive through exact integration
# ---------------------------------------------------------------------------


class AntiderivativeProjection:
    """Zero-mean primitive built by exact cellwise integration.

    Integrates a mean-free coefficient field exactly inside each cell (the
    antiderivative of a degree-k Legendre expansion is closed form), glues
    the pieces continuously around the periodic ring with a prefix sum of
    cell integrals, projects the resulting degree-(k+1) continuous function
    back onto degree k, and removes the global mean.

    This produces the same primitive as ``zero_mean_inverse`` applied to the
    central weak derivative whenever that solve is well posed, up to the
    projection truncation.  The difference matters at odd degree, where the
    central derivative has a grid-scale sawtooth in its kernel and the
    deflated/least-squares inverse returns a primitive whose interface jumps
    do not shrink under refinement; the integrated primitive's jumps are
    pure projection error, so jump penalties applied to it stay consistent.

    ``solve`` mirrors the ``ZeroMeanSolver`` calling convention: it takes
    and returns (N, k+1) coefficient arrays and rejects right-hand sides
    with a non-negligible mean.
    """

    _MEAN_TOL = 1e-10

    def __init__(self, mesh: Mesh1D, k: int):
        if k < 0:
            raise InvalidConfigError(f"negative polynomial degree: {k}")
        self.n_cells = mesh.n_cells
        self.block_size = k + 1
        self._sqrt_h = np.sqrt(mesh.widths)
        self._widths = mesh.widths
        self._volume = mesh.length
        # Reference moments S[i, m] = integral of (antiderivative of the
        # orthonormal mode m, taken from the left edge) against mode i, on a
        # unit-width cell; cell j scales this by h_j.  Only the first sub-
        # and superdiagonal survive, plus the running-ramp entry S[0, 0].
        s = np.zeros((k + 1, k + 1))
        s[0, 0] = 0.5
        for m in range(k):
            s[m + 1, m] = 0.5 / math.sqrt((2 * m + 1) * (2 * m + 3))
        for m in range(1, k + 1):
            s[m - 1, m] = -0.5 / math.sqrt((2 * m - 1) * (2 * m + 1))
        self._s = s

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        shape = (self.n_cells, self.block_size)
        if rhs.shape != shape:
            raise InvalidConfigError(f"rhs has shape {rhs.shape}, expected {shape}")
        scale = float(np.linalg.norm(rhs))
        rhs_mean = float(rhs[:, 0] @ self._sqrt_h) / self._volume
        if scale > 0.0 and abs(rhs_mean) > self._MEAN_TOL * scale:
            raise InconsistentRhsError(
                f"right-hand side has mean {rhs_mean:.3e} (norm {scale:.3e}); "
                "the integrated primitive needs a mean-free right-hand side"
            )
        cell_integrals = rhs[:, 0] * self._sqrt_h
        left_values = np.concatenate(([0.0], np.cumsum(cell_integrals[:-1])))
        out = self._widths[:, None] * (rhs @ self._s.T)
        out[:, 0] += left_values * self._sqrt_h
        out_mean = float(out[:, 0] @ self._sqrt_h) / self._volume
        out[:, 0] -= out_mean * self._sqrt_h
        return out

    def as_dense(self) -> np.ndarray:
        """Dense matrix of the map (coefficients in -> primitive out)."""
        n = self.n_cells * self.block_size
        cols = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            rhs = e.reshape(self.n_cells, self.block_size)
            mean = float(rhs[:, 0] @ self._sqrt_h) / self._volume
            rhs = rhs.copy()
            rhs[:, 0] -= mean * self._sqrt_h
            cols[:, j] = self.solve(rhs).ravel()
        return cols


def antiderivative_projection(mesh: Mesh1D, k: int) -> AntiderivativeProjection:
    return AntiderivativeProjection(mesh, k)
