"""Reduced marching forms of the semi-discrete field systems.

Each scheme advances a minimal set of coefficient fields and recovers the
remaining components of the first-order system algebraically.  The common
surface is:

* ``rhs(t, y)`` - time derivative of the flat marched state,
* ``jvp(t, y, dy)`` - exact directional derivative of ``rhs`` in ``dy``,
* ``j2vp(t, y, da, db)`` - second directional derivative of ``rhs``,
* ``reconstruct(t, y)`` - every component of the system as coefficient
  arrays, keyed by component name,
* ``reconstruct_tangent(t, y, dy[, dydot])`` - directional derivative of
  the reconstruction map; ``dydot`` defaults to ``jvp(t, y, dy)``, which is
  the right slot value both for frozen-time perturbations and for tangent
  fields that solve the linearized equations,
* ``reconstruct_tangent_rate(t, y, dy[, dydot])`` - time derivative of the
  reconstructed tangent along the flow,
* ``reconstruct_velocity(t, y)`` - time derivative of the reconstruction
  along the flow,
* ``initial_state(...)`` - projection of initial data into the flat state.

Primitive-type components (antiderivatives of marched fields) are fixed to
zero mean.  Where the central-derivative operator has spurious kernel
directions beyond the constants (even cell counts, or odd polynomial
degree), those solves fall back to a range-projecting least-squares inverse;
the marched dynamics themselves are never affected by that choice unless a
jump-coupling weight ties the primitive back into the flow, in which case
the projection perturbs the coupling at discretization-error level.
"""

import numpy as np

from .errors import InvalidConfigError
from .mesh_basis import (
    DgFunction,
    default_quadrature,
    gauss_legendre,
    project,
    project_values,
)
from .operators import (
    BlockOperator,
    antiderivative_projection,
    derivative_operator,
    factorize,
    jump_operator,
    zero_mean_inverse,
)


class ReducedScheme:
    """Shared plumbing: state layout, projections, velocity reconstruction."""

    marched = ()

    def __init__(self, model, mesh, k, flux=None, quad=None):
        self.model = model
        self.mesh = mesh
        self.k = int(k)
        if self.k < 1:
            raise InvalidConfigError("polynomial degree must be at least 1")
        self.flux = model.normalize_flux(flux)
        self.quad = quad if quad is not None else self._default_quadrature()
        self.n_fields = len(self.marched)
        self.state_shape = (self.n_fields, mesh.n_cells, self.k + 1)
        self.n_dof = self.n_fields * mesh.n_cells * (self.k + 1)
        self._sqrt_h = np.sqrt(mesh.widths)
        ones = np.zeros((mesh.n_cells, self.k + 1))
        ones[:, 0] = self._sqrt_h
        self._ones = ones
        self._xq = (
            mesh.centers[:, None]
            + 0.5 * mesh.widths[:, None] * self.quad.nodes[None, :]
        )

    def _default_quadrature(self):
        return default_quadrature(self.k)

    # ----- state layout -----

    def pack(self, *fields):
        if len(fields) != self.n_fields:
            raise InvalidConfigError(
                f"{self.model.name}: expected {self.n_fields} fields")
        shape = self.state_shape[1:]
        arrs = []
        for f in fields:
            f = np.asarray(f, dtype=float)
            if f.shape != shape:
                raise InvalidConfigError(
                    f"field has shape {f.shape}, expected {shape}")
            arrs.append(f)
        return np.stack(arrs).ravel()

    def unpack(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n_dof,):
            raise InvalidConfigError(
                f"state has shape {y.shape}, expected ({self.n_dof},)")
        return y.reshape(self.state_shape)

    # ----- small helpers -----

    def _values(self, coeffs):
        return DgFunction(self.mesh, self.k, coeffs).values_at_quadrature(
            self.quad)

    def _project(self, values):
        return project_values(values, self.mesh, self.k, self.quad).coeffs

    def _project_fn(self, f, t):
        return self._project(np.asarray(f(t, self._xq), dtype=float))

    def _integral(self, coeffs):
        return float(coeffs[:, 0] @ self._sqrt_h)

    def _quad_integral(self, values):
        return float(
            np.sum(0.5 * self.mesh.widths * (values @ self.quad.weights)))

    def _mean_free(self, coeffs):
        m = self._integral(coeffs) / self.mesh.length
        return coeffs - m * self._ones

    # ----- generic derived operations -----

    def time_partial(self, t, y):
        """Explicit time derivative of ``rhs`` at frozen state."""
        return np.zeros(self.n_dof)

    def reconstruct_velocity(self, t, y):
        ydot = self.rhs(t, y)
        yddot = self.jvp(t, y, ydot) + self.time_partial(t, y)
        return self.reconstruct_tangent(t, y, ydot, yddot)

    # ----- subclass responsibilities -----

    def rhs(self, t, y):
        raise NotImplementedError

    def jvp(self, t, y, dy):
        raise NotImplementedError

    def j2vp(self, t, y, da, db):
        raise NotImplementedError

    def reconstruct(self, t, y):
        raise NotImplementedError

    def reconstruct_tangent(self, t, y, dy, dydot=None):
        raise NotImplementedError

    def reconstruct_tangent_rate(self, t, y, dy, dydot=None):
        raise NotImplementedError

    def __repr__(self):
        return (f"{type(self).__name__}(N={self.mesh.n_cells}, k={self.k}, "
                f"flux={self.flux})")


# ---------------------------------------------------------------------------
# wave
# ---------------------------------------------------------------------------


class WaveScheme(ReducedScheme):
    """Marches (u, v); the strain component w is a cellwise linear solve."""

    marched = ("u", "v")

    def __init__(self, model, mesh, k, flux=None, quad=None):
        super().__init__(model, mesh, k, flux, quad)
        a13, a33 = self.flux["alpha13"], self.flux["alpha33"]
        beta = self.flux["beta"]
        self._a11 = self.flux["alpha11"]
        self._d_plus = derivative_operator(mesh, self.k, a13)
        self._d_minus = derivative_operator(mesh, self.k, -a13)
        self._jump = jump_operator(mesh, self.k)
        if beta:
            self._beta_op = (beta * self._jump).shift_identity(1.0)
            self._beta_solve = factorize(self._beta_op)
        else:
            self._beta_op = None
            self._beta_solve = None
        self._aux_solve = (
            factorize((a33 * self._jump).shift_identity(1.0)) if a33 else None)
        vp = model.params["V"].deriv()
        self._has_potential = bool(np.any(vp.coef))
        self._has_curvature = bool(np.any(vp.deriv().deriv().coef))

    def _solve_beta(self, x):
        return self._beta_solve.solve(x) if self._beta_solve is not None else x

    def _aux_field(self, u):
        du = self._d_minus.apply(u)
        return self._aux_solve.solve(du) if self._aux_solve is not None else du

    def rhs(self, t, y):
        u, v = self.unpack(y)
        acc = self._d_plus.apply(self._aux_field(u))
        if self._a11:
            acc = acc + self._a11 * self._jump.apply(u)
        if self._has_potential:
            acc = acc + self._project(self.model.v_prime(self._values(u)))
        return self.pack(self._solve_beta(v), self._solve_beta(acc))

    def jvp(self, t, y, dy):
        du, dv = self.unpack(dy)
        acc = self._d_plus.apply(self._aux_field(du))
        if self._a11:
            acc = acc + self._a11 * self._jump.apply(du)
        if self._has_potential:
            u = self.unpack(y)[0]
            acc = acc + self._project(
                self.model.v_second(self._values(u)) * self._values(du))
        return self.pack(self._solve_beta(dv), self._solve_beta(acc))

    def j2vp(self, t, y, da, db):
        u = self.unpack(y)[0]
        zero = np.zeros_like(u)
        if not self._has_curvature:
            return self.pack(zero, zero)
        ua, ub = self.unpack(da)[0], self.unpack(db)[0]
        curv = self._project(
            self.model.v_third(self._values(u))
            * self._values(ua) * self._values(ub))
        return self.pack(zero, self._solve_beta(curv))

    def reconstruct(self, t, y):
        u, v = self.unpack(y)
        return {"u": u, "v": v, "w": self._aux_field(u)}

    def reconstruct_tangent(self, t, y, dy, dydot=None):
        du, dv = self.unpack(dy)
        return {"u": du, "v": dv, "w": self._aux_field(du)}

    def reconstruct_tangent_rate(self, t, y, dy, dydot=None):
        if dydot is None:
            dydot = self.jvp(t, y, dy)
        return self.reconstruct_tangent(t, y, dydot)

    def initial_state(self, u0, ut0):
        u = project(u0, self.mesh, self.k, self.quad).coeffs
        v = project(ut0, self.mesh, self.k, self.quad).coeffs
        if self._beta_op is not None:
            v = self._beta_op.apply(v)
        return self.pack(u, v)


# ---------------------------------------------------------------------------
# kdv
# ---------------------------------------------------------------------------


class KdvScheme(ReducedScheme):
    """Marches u; phi and w are zero-mean primitives, v a derivative."""

    marched = ("u",)

    def __init__(self, model, mesh, k, flux=None, quad=None):
        super().__init__(model, mesh, k, flux, quad)
        if self.flux["alpha1"] != 0.0:
            raise InvalidConfigError(
                "kdv: the marching form needs alpha1 = 0 (the alpha1 jumps "
                "couple the two primitive components implicitly)")
        a2 = self.flux["alpha2"]
        self._eta, self._eps = model.eta, model.eps
        self._d0 = derivative_operator(mesh, self.k, 0.0)
        self._d_a2 = derivative_operator(mesh, self.k, a2)
        d_m2 = derivative_operator(mesh, self.k, -a2)
        self._linear = (-self._eps ** 2) * (self._d0 @ d_m2 @ self._d_a2)
        self._primitive = zero_mean_inverse(
            self._d0, mesh, allow_rank_deficient=True, residual_rtol=None)

    def rhs(self, t, y):
        u = self.unpack(y)[0]
        uv = self._values(u)
        return (self._linear.apply(u)
                - 0.5 * self._eta * self._d0.apply(self._project(uv * uv))
                ).ravel()

    def jvp(self, t, y, dy):
        u = self.unpack(y)[0]
        du = self.unpack(dy)[0]
        mixed = self._project(self._values(u) * self._values(du))
        return (self._linear.apply(du)
                - self._eta * self._d0.apply(mixed)).ravel()

    def j2vp(self, t, y, da, db):
        ua, ub = self.unpack(da)[0], self.unpack(db)[0]
        prod = self._project(self._values(ua) * self._values(ub))
        return (-self._eta * self._d0.apply(prod)).ravel()

    def reconstruct(self, t, y):
        u = self.unpack(y)[0]
        udot = self.unpack(self.rhs(t, y))[0]
        uv = self._values(u)
        wbar = 0.5 * self._eta * self._quad_integral(uv * uv) / self.mesh.length
        return {
            "phi": self._primitive.solve(self._mean_free(u)),
            "u": u,
            "v": self._eps * self._d_a2.apply(u),
            "w": self._primitive.solve(self._mean_free(-0.5 * udot))
                 + wbar * self._ones,
        }

    def reconstruct_tangent(self, t, y, dy, dydot=None):
        if dydot is None:
            dydot = self.jvp(t, y, dy)
        u = self.unpack(y)[0]
        du = self.unpack(dy)[0]
        dudot = self.unpack(dydot)[0]
        dwbar = (self._eta
                 * self._quad_integral(self._values(u) * self._values(du))
                 / self.mesh.length)
        return {
            "phi": self._primitive.solve(self._mean_free(du)),
            "u": du,
            "v": self._eps * self._d_a2.apply(du),
            "w": self._primitive.solve(self._mean_free(-0.5 * dudot))
                 + dwbar * self._ones,
        }

    def reconstruct_tangent_rate(self, t, y, dy, dydot=None):
        if dydot is None:
            dydot = self.jvp(t, y, dy)
        ydot = self.rhs(t, y)
        ddydot = self.j2vp(t, y, ydot, dy) + self.jvp(t, y, dydot)
        u = self.unpack(y)[0]
        udot = self.unpack(ydot)[0]
        du = self.unpack(dy)[0]
        dudot = self.unpack(dydot)[0]
        ddudot = self.unpack(ddydot)[0]
        bar_rate = (self._eta / self.mesh.length) * (
            self._quad_integral(self._values(udot) * self._values(du))
            + self._quad_integral(self._values(u) * self._values(dudot)))
        return {
            "phi": self._primitive.solve(self._mean_free(dudot)),
            "u": dudot,
            "v": self._eps * self._d_a2.apply(dudot),
            "w": self._primitive.solve(self._mean_free(-0.5 * ddudot))
                 + bar_rate * self._ones,
        }

    def initial_state(self, u0):
        return project(u0, self.mesh, self.k, self.quad).coeffs.ravel()


# ---------------------------------------------------------------------------
# bbm
# ---------------------------------------------------------------------------


class BbmScheme(ReducedScheme):
    """Marches u through a screened (I - sigma d_xx type) solve.

    Two marching branches: with the primitive-pair jump weight (alpha1) the
    update operator couples u to its own zero-mean primitive and is built
    densely; otherwise the operator is the screened Laplacian and the
    alpha0 jump coupling (if any) enters the right-hand side.  The alpha2
    weight cancels from the marching algebra entirely and only affects the
    reconstructed derivative component v.
    """

    marched = ("u",)

    def __init__(self, model, mesh, k, flux=None, quad=None):
        super().__init__(model, mesh, k, flux, quad)
        a1 = self.flux["alpha1"]
        self._a0 = self.flux["alpha0"]
        sigma = model.sigma
        self._d0 = derivative_operator(mesh, self.k, 0.0)
        self._d_a2 = derivative_operator(mesh, self.k, self.flux["alpha2"])
        self._jump = jump_operator(mesh, self.k) if self._a0 else None
        self._pair = a1 != 0.0
        if self._pair:
            if self.k % 2 != 0 or mesh.n_cells % 2 == 0:
                raise InvalidConfigError(
                    "bbm: the alpha1 flux weight needs an even polynomial "
                    "degree and an odd cell count; otherwise the primitive "
                    "solve behind it is singular")
            d_a1 = derivative_operator(mesh, self.k, a1)
            self._d_m1 = derivative_operator(mesh, self.k, -a1)
            self._phi_inv = zero_mean_inverse(d_a1, mesh)
            n = mesh.n_cells * (self.k + 1)
            march_dense = (
                0.5 * (np.eye(n)
                       + self._d_m1.to_dense() @ self._phi_inv.as_dense())
                - sigma * (self._d_m1 @ self._d0).to_dense())
            self._march = zero_mean_inverse(
                BlockOperator.from_dense(march_dense, mesh.n_cells, self.k + 1),
                mesh)
        else:
            self._d_m1 = self._d0
            self._phi_inv = None  # built on first use
            self._march = factorize(
                ((-sigma) * (self._d0 @ self._d0)).shift_identity(1.0))

    @property
    def _phi_solver(self):
        if self._phi_inv is None:
            # At odd degree the central derivative carries a grid-scale
            # sawtooth in its kernel, and the least-squares inverse returns
            # a primitive whose jumps stay O(1) under refinement -- fatal
            # once the alpha0 coupling applies a jump penalty to it.  The
            # integrated primitive keeps those jumps at projection size.
            if self.k % 2 == 1:
                self._phi_inv = antiderivative_projection(self.mesh, self.k)
            else:
                self._phi_inv = zero_mean_inverse(
                    self._d0, self.mesh,
                    allow_rank_deficient=True, residual_rtol=None)
        return self._phi_inv

    def _march_force(self, u, gradient):
        """Common right-hand side: gradient is the projected V'(u)-type term."""
        force = -self._d_m1.apply(gradient)
        if self._a0:
            phi = self._phi_solver.solve(self._mean_free(u))
            force = force - self._a0 * (
                self._d0.apply(self._jump.apply(phi)) - self._jump.apply(u))
        return force

    def rhs(self, t, y):
        u = self.unpack(y)[0]
        grad = self._project(self.model.v_prime(self._values(u)))
        return self._march.solve(self._march_force(u, grad)).ravel()

    def jvp(self, t, y, dy):
        u = self.unpack(y)[0]
        du = self.unpack(dy)[0]
        grad = self._project(
            self.model.v_second(self._values(u)) * self._values(du))
        return self._march.solve(self._march_force(du, grad)).ravel()

    def j2vp(self, t, y, da, db):
        ua, ub = self.unpack(da)[0], self.unpack(db)[0]
        curv = self._project(
            6.0 * self.model.Vcubic * self._values(ua) * self._values(ub))
        return self._march.solve(-self._d_m1.apply(curv)).ravel()

    def _phi_of(self, u):
        if self._pair:
            return self._phi_inv.solve(self._mean_free(u))
        return self._phi_solver.solve(self._mean_free(u))

    def reconstruct(self, t, y):
        u = self.unpack(y)[0]
        udot = self.unpack(self.rhs(t, y))[0]
        phi = self._phi_of(u)
        p = (0.5 * self._phi_of(udot)
             - self.model.sigma * self._d0.apply(udot)
             + self._project(self.model.v_prime(self._values(u))))
        if self._a0:
            p = p + self._a0 * self._jump.apply(phi)
        return {"phi": phi, "u": u, "v": self._d_a2.apply(u),
                "w": udot, "p": p}

    def reconstruct_tangent(self, t, y, dy, dydot=None):
        if dydot is None:
            dydot = self.jvp(t, y, dy)
        u = self.unpack(y)[0]
        du = self.unpack(dy)[0]
        dudot = self.unpack(dydot)[0]
        dphi = self._phi_of(du)
        dp = (0.5 * self._phi_of(dudot)
              - self.model.sigma * self._d0.apply(dudot)
              + self._project(
                  self.model.v_second(self._values(u)) * self._values(du)))
        if self._a0:
            dp = dp + self._a0 * self._jump.apply(dphi)
        return {"phi": dphi, "u": du, "v": self._d_a2.apply(du),
                "w": dudot, "p": dp}

    def reconstruct_tangent_rate(self, t, y, dy, dydot=None):
        if dydot is None:
            dydot = self.jvp(t, y, dy)
        ydot = self.rhs(t, y)
        ddydot = self.j2vp(t, y, ydot, dy) + self.jvp(t, y, dydot)
        u = self.unpack(y)[0]
        udot = self.unpack(ydot)[0]
        du = self.unpack(dy)[0]
        dudot = self.unpack(dydot)[0]
        ddudot = self.unpack(ddydot)[0]
        dphi_rate = self._phi_of(dudot)
        mixed = self._project(
            self.model.v_second(self._values(u)) * self._values(dudot)
            + 6.0 * self.model.Vcubic * self._values(udot) * self._values(du))
        dp_rate = (0.5 * self._phi_of(ddudot)
                   - self.model.sigma * self._d0.apply(ddudot) + mixed)
        if self._a0:
            dp_rate = dp_rate + self._a0 * self._jump.apply(dphi_rate)
        return {"phi": dphi_rate, "u": dudot, "v": self._d_a2.apply(dudot),
                "w": ddudot, "p": dp_rate}

    def initial_state(self, u0):
        return project(u0, self.mesh, self.k, self.quad).coeffs.ravel()


# ---------------------------------------------------------------------------
# ch
# ---------------------------------------------------------------------------


class ChScheme(ReducedScheme):
    """Marches u through the (I - d_xx type) screened solve.

    ``source`` is an optional forcing callable ``g(t, x)`` added to the
    momentum balance (it enters the variational structure through the
    primitive component, so the reconstruction formulas are unchanged);
    ``source_rate`` is its time derivative, needed only by the velocity
    reconstruction.
    """

    marched = ("u",)

    def __init__(self, model, mesh, k, flux=None, quad=None,
                 source=None, source_rate=None):
        super().__init__(model, mesh, k, flux, quad)
        self._a0 = self.flux["alpha0"]
        self._d0 = derivative_operator(mesh, self.k, 0.0)
        self._jump = jump_operator(mesh, self.k) if self._a0 else None
        self._march = factorize(
            ((-1.0) * (self._d0 @ self._d0)).shift_identity(1.0))
        # same parity split as the bbm primitive: odd degree gets the
        # integrated primitive so the alpha0 jump coupling stays consistent
        if self.k % 2 == 1:
            self._primitive = antiderivative_projection(mesh, self.k)
        else:
            self._primitive = zero_mean_inverse(
                self._d0, mesh, allow_rank_deficient=True, residual_rtol=None)
        self.source = source
        self.source_rate = source_rate

    def rhs(self, t, y):
        u = self.unpack(y)[0]
        rho = self._d0.apply(u)
        uv, rv = self._values(u), self._values(rho)
        flux_part = self._d0.apply(self._project(uv * rv))
        force = self._d0.apply(
            flux_part - self._project(1.5 * uv * uv + 0.5 * rv * rv))
        if self._a0:
            phi = self._primitive.solve(self._mean_free(u))
            force = force - self._a0 * (
                self._d0.apply(self._jump.apply(phi)) - self._jump.apply(u))
        if self.source is not None:
            force = force + self._project_fn(self.source, t)
        return self._march.solve(force).ravel()

    def jvp(self, t, y, dy):
        u = self.unpack(y)[0]
        du = self.unpack(dy)[0]
        rho, drho = self._d0.apply(u), self._d0.apply(du)
        uv, rv = self._values(u), self._values(rho)
        duv, drv = self._values(du), self._values(drho)
        flux_part = self._d0.apply(self._project(duv * rv + uv * drv))
        force = self._d0.apply(
            flux_part - self._project(3.0 * uv * duv + rv * drv))
        if self._a0:
            dphi = self._primitive.solve(self._mean_free(du))
            force = force - self._a0 * (
                self._d0.apply(self._jump.apply(dphi)) - self._jump.apply(du))
        return self._march.solve(force).ravel()

    def j2vp(self, t, y, da, db):
        ua, ub = self.unpack(da)[0], self.unpack(db)[0]
        ra, rb = self._d0.apply(ua), self._d0.apply(ub)
        uav, rav = self._values(ua), self._values(ra)
        ubv, rbv = self._values(ub), self._values(rb)
        flux_part = self._d0.apply(self._project(uav * rbv + ubv * rav))
        force = self._d0.apply(
            flux_part - self._project(3.0 * uav * ubv + rav * rbv))
        return self._march.solve(force).ravel()

    def time_partial(self, t, y):
        if self.source is None:
            return np.zeros(self.n_dof)
        if self.source_rate is None:
            raise InvalidConfigError(
                "ch: velocity reconstruction with a time-dependent source "
                "needs source_rate")
        return self._march.solve(self._project_fn(self.source_rate, t)).ravel()

    def reconstruct(self, t, y):
        u = self.unpack(y)[0]
        udot = self.unpack(self.rhs(t, y))[0]
        rho = self._d0.apply(u)
        uv, rv = self._values(u), self._values(rho)
        v = 0.5 * udot + self._project(uv * rv)
        phi = self._primitive.solve(self._mean_free(u))
        phidot = self._primitive.solve(self._mean_free(udot))
        w = (-0.5 * (phidot - self._d0.apply(udot)) + self._d0.apply(v)
             - self._project(1.5 * uv * uv + 0.5 * rv * rv))
        if self._a0:
            w = w - self._a0 * self._jump.apply(phi)
        return {"u": u, "phi": phi, "rho": rho, "v": v, "w": w}

    def reconstruct_tangent(self, t, y, dy, dydot=None):
        if dydot is None:
            dydot = self.jvp(t, y, dy)
        u = self.unpack(y)[0]
        du = self.unpack(dy)[0]
        dudot = self.unpack(dydot)[0]
        rho, drho = self._d0.apply(u), self._d0.apply(du)
        uv, rv = self._values(u), self._values(rho)
        duv, drv = self._values(du), self._values(drho)
        dv = 0.5 * dudot + self._project(duv * rv + uv * drv)
        dphi = self._primitive.solve(self._mean_free(du))
        dphidot = self._primitive.solve(self._mean_free(dudot))
        dw = (-0.5 * (dphidot - self._d0.apply(dudot)) + self._d0.apply(dv)
              - self._project(3.0 * uv * duv + rv * drv))
        if self._a0:
            dw = dw - self._a0 * self._jump.apply(dphi)
        return {"u": du, "phi": dphi, "rho": drho, "v": dv, "w": dw}

    def reconstruct_tangent_rate(self, t, y, dy, dydot=None):
        if dydot is None:
            dydot = self.jvp(t, y, dy)
        ydot = self.rhs(t, y)
        ddydot = self.j2vp(t, y, ydot, dy) + self.jvp(t, y, dydot)
        u = self.unpack(y)[0]
        udot = self.unpack(ydot)[0]
        du = self.unpack(dy)[0]
        dudot = self.unpack(dydot)[0]
        ddudot = self.unpack(ddydot)[0]
        rho, rhodot = self._d0.apply(u), self._d0.apply(udot)
        drho, drhodot = self._d0.apply(du), self._d0.apply(dudot)
        uv, rv = self._values(u), self._values(rho)
        udv, rdv = self._values(udot), self._values(rhodot)
        duv, drv = self._values(du), self._values(drho)
        dudv, drdv = self._values(dudot), self._values(drhodot)
        dv_rate = 0.5 * ddudot + self._project(
            dudv * rv + duv * rdv + udv * drv + uv * drdv)
        dphi_rate = self._primitive.solve(self._mean_free(dudot))
        dphidot_rate = self._primitive.solve(self._mean_free(ddudot))
        dw_rate = (-0.5 * (dphidot_rate - self._d0.apply(ddudot))
                   + self._d0.apply(dv_rate)
                   - self._project(3.0 * (udv * duv + uv * dudv)
                                   + rdv * drv + rv * drdv))
        if self._a0:
            dw_rate = dw_rate - self._a0 * self._jump.apply(dphi_rate)
        return {"u": dudot, "phi": dphi_rate, "rho": drhodot,
                "v": dv_rate, "w": dw_rate}

    def initial_state(self, u0):
        return project(u0, self.mesh, self.k, self.quad).coeffs.ravel()


# ---------------------------------------------------------------------------
# nls
# ---------------------------------------------------------------------------


class NlsScheme(ReducedScheme):
    """Marches the real pair (p, q); v and w are one-sided derivatives."""

    marched = ("p", "q")

    def _default_quadrature(self):
        # the quartic potential needs one extra order of exactness so that
        # projected cubic terms pair exactly with the conserved functionals
        n = max(len(default_quadrature(self.k).nodes), 2 * self.k + 1)
        return gauss_legendre(n)

    def __init__(self, model, mesh, k, flux=None, quad=None):
        super().__init__(model, mesh, k, flux, quad)
        self._alpha = model.alpha
        self._d_a = derivative_operator(mesh, self.k, self.flux["a"])
        d_ma = derivative_operator(mesh, self.k, -self.flux["a"])
        self._lap = d_ma @ self._d_a

    def rhs(self, t, y):
        p, q = self.unpack(y)
        pv, qv = self._values(p), self._values(q)
        r = pv * pv + qv * qv
        pdot = -self._lap.apply(q) - self._alpha * self._project(r * qv)
        qdot = self._lap.apply(p) + self._alpha * self._project(r * pv)
        return self.pack(pdot, qdot)

    def jvp(self, t, y, dy):
        p, q = self.unpack(y)
        dp, dq = self.unpack(dy)
        pv, qv = self._values(p), self._values(q)
        dpv, dqv = self._values(dp), self._values(dq)
        r = pv * pv + qv * qv
        s = 2.0 * (pv * dpv + qv * dqv)
        pdot = (-self._lap.apply(dq)
                - self._alpha * self._project(s * qv + r * dqv))
        qdot = (self._lap.apply(dp)
                + self._alpha * self._project(s * pv + r * dpv))
        return self.pack(pdot, qdot)

    def j2vp(self, t, y, da, db):
        p, q = self.unpack(y)
        pa, qa = self.unpack(da)
        pb, qb = self.unpack(db)
        pv, qv = self._values(p), self._values(q)
        pav, qav = self._values(pa), self._values(qa)
        pbv, qbv = self._values(pb), self._values(qb)
        cross = pav * qbv + qav * pbv
        d2p = 6.0 * pv * pav * pbv + 2.0 * qv * cross + 2.0 * pv * qav * qbv
        d2q = 2.0 * qv * pav * pbv + 2.0 * pv * cross + 6.0 * qv * qav * qbv
        return self.pack(-self._alpha * self._project(d2q),
                         self._alpha * self._project(d2p))

    def reconstruct(self, t, y):
        p, q = self.unpack(y)
        return {"p": p, "q": q,
                "v": self._d_a.apply(p), "w": self._d_a.apply(q)}

    def reconstruct_tangent(self, t, y, dy, dydot=None):
        dp, dq = self.unpack(dy)
        return {"p": dp, "q": dq,
                "v": self._d_a.apply(dp), "w": self._d_a.apply(dq)}

    def reconstruct_tangent_rate(self, t, y, dy, dydot=None):
        if dydot is None:
            dydot = self.jvp(t, y, dy)
        return self.reconstruct_tangent(t, y, dydot)

    def initial_state(self, p0, q0):
        p = project(p0, self.mesh, self.k, self.quad).coeffs
        q = project(q0, self.mesh, self.k, self.quad).coeffs
        return self.pack(p, q)


# ---------------------------------------------------------------------------
# bbm_kdv
# ---------------------------------------------------------------------------


class BbmKdvScheme(ReducedScheme):
    """Marches u; central fluxes only."""

    marched = ("u",)

    def __init__(self, model, mesh, k, flux=None, quad=None):
        super().__init__(model, mesh, k, flux, quad)
        sigma = model.sigma
        self._nu = model.nu
        self._d0 = derivative_operator(mesh, self.k, 0.0)
        self._d3 = self._d0 @ self._d0 @ self._d0
        self._march = factorize(
            ((-sigma) * (self._d0 @ self._d0)).shift_identity(1.0))
        self._primitive = zero_mean_inverse(
            self._d0, mesh, allow_rank_deficient=True, residual_rtol=None)

    def rhs(self, t, y):
        u = self.unpack(y)[0]
        grad = self._project(self.model.v_prime(self._values(u)))
        return self._march.solve(
            self._nu * self._d3.apply(u) + self._d0.apply(grad)).ravel()

    def jvp(self, t, y, dy):
        u = self.unpack(y)[0]
        du = self.unpack(dy)[0]
        grad = self._project(
            self.model.v_second(self._values(u)) * self._values(du))
        return self._march.solve(
            self._nu * self._d3.apply(du) + self._d0.apply(grad)).ravel()

    def j2vp(self, t, y, da, db):
        ua, ub = self.unpack(da)[0], self.unpack(db)[0]
        curv = self._project(
            6.0 * self.model.Vcubic * self._values(ua) * self._values(ub))
        return self._march.solve(self._d0.apply(curv)).ravel()

    def reconstruct(self, t, y):
        u = self.unpack(y)[0]
        udot = self.unpack(self.rhs(t, y))[0]
        theta = self._d0.apply(u)
        phidot = self._primitive.solve(self._mean_free(udot))
        w = (self.model.sigma * self._d0.apply(udot) - 0.5 * phidot
             + self._nu * self._d0.apply(theta)
             + self._project(self.model.v_prime(self._values(u))))
        return {"u": u, "theta": theta,
                "phi": self._primitive.solve(self._mean_free(u)),
                "w": w, "rho": udot, "v": theta}

    def reconstruct_tangent(self, t, y, dy, dydot=None):
        if dydot is None:
            dydot = self.jvp(t, y, dy)
        u = self.unpack(y)[0]
        du = self.unpack(dy)[0]
        dudot = self.unpack(dydot)[0]
        dtheta = self._d0.apply(du)
        dw = (self.model.sigma * self._d0.apply(dudot)
              - 0.5 * self._primitive.solve(self._mean_free(dudot))
              + self._nu * self._d0.apply(dtheta)
              + self._project(
                  self.model.v_second(self._values(u)) * self._values(du)))
        return {"u": du, "theta": dtheta,
                "phi": self._primitive.solve(self._mean_free(du)),
                "w": dw, "rho": dudot, "v": dtheta}

    def reconstruct_tangent_rate(self, t, y, dy, dydot=None):
        if dydot is None:
            dydot = self.jvp(t, y, dy)
        ydot = self.rhs(t, y)
        ddydot = self.j2vp(t, y, ydot, dy) + self.jvp(t, y, dydot)
        u = self.unpack(y)[0]
        udot = self.unpack(ydot)[0]
        du = self.unpack(dy)[0]
        dudot = self.unpack(dydot)[0]
        ddudot = self.unpack(ddydot)[0]
        dtheta_rate = self._d0.apply(dudot)
        mixed = self._project(
            self.model.v_second(self._values(u)) * self._values(dudot)
            + 6.0 * self.model.Vcubic * self._values(udot) * self._values(du))
        dw_rate = (self.model.sigma * self._d0.apply(ddudot)
                   - 0.5 * self._primitive.solve(self._mean_free(ddudot))
                   + self._nu * self._d0.apply(dtheta_rate) + mixed)
        return {"u": dudot, "theta": dtheta_rate,
                "phi": self._primitive.solve(self._mean_free(dudot)),
                "w": dw_rate, "rho": ddudot, "v": dtheta_rate}

    def initial_state(self, u0):
        return project(u0, self.mesh, self.k, self.quad).coeffs.ravel()


SCHEME_CLASSES = {
    "wave": WaveScheme,
    "kdv": KdvScheme,
    "bbm": BbmScheme,
    "ch": ChScheme,
    "nls": NlsScheme,
    "bbm_kdv": BbmKdvScheme,
}


def build_reduced_scheme(model, mesh, k, flux=None, quad=None, **options):
    """Build the marching scheme matching a model descriptor."""
    try:
        cls = SCHEME_CLASSES[model.name]
    except KeyError:
        raise InvalidConfigError(
            f"no marching form registered for model {model.name!r}") from None
    try:
        return cls(model, mesh, k, flux, quad=quad, **options)
    except TypeError as exc:
        raise InvalidConfigError(
            f"{model.name}: bad scheme options: {exc}") from None
