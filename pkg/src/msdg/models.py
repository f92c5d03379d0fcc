"""Catalog of first-order Hamiltonian field-system descriptors.

Each descriptor packages one model's anti-symmetric structure matrices
(the time-coupling matrix M and the space-coupling matrix K of
M z_t + K z_x = grad S(z)), the potential density S with its first two
derivatives, a rotation-block pairing of K used by the simplified energy
formulas, and the construction of the interface jump matrices (A, B)
from the model's named flux weights.

Value convention: a state ``z`` is an array of shape ``(m, ...)`` whose
leading axis runs over the components listed in ``component_names``.
``potential`` maps it to shape ``(...)``, ``potential_gradient`` to
``(m, ...)`` and ``potential_hessian`` to ``(m, m, ...)``.
"""

import warnings

import numpy as np
from numpy.polynomial import Polynomial

from .errors import InvalidConfigError
from .flux_family import KDecomposition


def _as_potential(spec):
    """Turn a potential spec into a Polynomial: "zero", "cubic" or coefficients."""
    if isinstance(spec, str):
        if spec == "zero":
            return Polynomial([0.0])
        if spec == "cubic":
            return Polynomial([0.0, 0.0, 0.0, 1.0])
        raise InvalidConfigError(f"unknown potential spec {spec!r}")
    if isinstance(spec, Polynomial):
        return spec
    coeffs = np.atleast_1d(np.asarray(spec, dtype=float))
    if coeffs.ndim != 1:
        raise InvalidConfigError("potential coefficients must be a 1D sequence")
    return Polynomial(coeffs)


class ModelDescriptor:
    """Structure matrices, potential and flux-weight layout of one model."""

    def __init__(self, name, component_names, time_matrix, space_matrix,
                 decomposition, flux_names, params):
        self.name = name
        self.component_names = tuple(component_names)
        self.m = len(self.component_names)
        self.time_matrix = np.asarray(time_matrix, dtype=float)
        self.space_matrix = np.asarray(space_matrix, dtype=float)
        self.decomposition = decomposition
        self.flux_names = tuple(flux_names)
        self.params = dict(params)
        M, K = self.time_matrix, self.space_matrix
        if M.shape != (self.m, self.m) or K.shape != (self.m, self.m):
            raise InvalidConfigError(f"{name}: structure matrices must be m x m")
        if not np.allclose(M, -M.T, atol=1e-14):
            raise InvalidConfigError(f"{name}: time matrix must be anti-symmetric")
        if not np.allclose(K, -K.T, atol=1e-14):
            raise InvalidConfigError(f"{name}: space matrix must be anti-symmetric")
        decomposition.verify(K)

    def index(self, component):
        return self.component_names.index(component)

    # ----- potential (overridden per model) -----

    def potential(self, z):
        raise NotImplementedError

    def potential_gradient(self, z):
        raise NotImplementedError

    def potential_hessian(self, z):
        raise NotImplementedError

    # ----- flux weights -----

    def normalize_flux(self, flux):
        """Fill defaults (0) and validate the model's flux-weight dict."""
        flux = dict(flux or {})
        unknown = sorted(set(flux) - set(self.flux_names))
        if unknown:
            raise InvalidConfigError(
                f"{self.name}: unknown flux weights {unknown}; "
                f"expected subset of {list(self.flux_names)}")
        out = {n: float(flux.get(n, 0.0)) for n in self.flux_names}
        self._validate_flux(out)
        return out

    def _validate_flux(self, flux):
        pass

    def jump_matrices(self, flux):
        """Return (A, B): the symmetric and anti-symmetric jump matrices."""
        raise NotImplementedError

    def __repr__(self):
        return f"ModelDescriptor({self.name!r}, m={self.m})"


# ---------------------------------------------------------------------------
# wave: u_tt - u_xx = V'(u), components z = (u, v, w) with v ~ u_t, w ~ u_x
# ---------------------------------------------------------------------------

class WaveModel(ModelDescriptor):

    def __init__(self, V="zero"):
        self._V = _as_potential(V)
        self._Vp = self._V.deriv()
        self._Vpp = self._Vp.deriv()
        self._Vppp = self._Vpp.deriv()
        M = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
        K = [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]
        dec = KDecomposition(np.eye(3), np.array([[-1.0]]))
        super().__init__("wave", ("u", "v", "w"), M, K, dec,
                         ("alpha11", "alpha13", "alpha33", "beta"),
                         {"V": self._V})

    def v_value(self, u):
        return self._V(u)

    def v_prime(self, u):
        return self._Vp(u)

    def v_second(self, u):
        return self._Vpp(u)

    def v_third(self, u):
        return self._Vppp(u)

    def potential(self, z):
        u, v, w = z
        return 0.5 * (v * v - w * w) - self._V(u)

    def potential_gradient(self, z):
        u, v, w = z
        return np.stack([-self._Vp(u), v, -w])

    def potential_hessian(self, z):
        u = np.asarray(z[0], dtype=float)
        H = np.zeros((3, 3) + u.shape)
        H[0, 0] = -self._Vpp(u)
        H[1, 1] = 1.0
        H[2, 2] = -1.0
        return H

    def jump_matrices(self, flux):
        a11, a13, a33 = flux["alpha11"], flux["alpha13"], flux["alpha33"]
        A = np.array([[a11, 0.0, a13], [0.0, 0.0, 0.0], [a13, 0.0, a33]])
        B = flux["beta"] * self.time_matrix
        return A, B


# ---------------------------------------------------------------------------
# kdv: u_t + eta u u_x + eps^2 u_xxx = 0, components z = (phi, u, v, w)
# ---------------------------------------------------------------------------

class KdvModel(ModelDescriptor):

    def __init__(self, eta=1.0, eps=1.0):
        eta, eps = float(eta), float(eps)
        if eps == 0.0:
            raise InvalidConfigError("kdv: eps must be nonzero")
        self.eta, self.eps = eta, eps
        M = [[0.0, 0.5, 0.0, 0.0], [-0.5, 0.0, 0.0, 0.0],
             [0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]]
        K = [[0.0, 0.0, 0.0, 1.0], [0.0, 0.0, -eps, 0.0],
             [0.0, eps, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0]]
        dec = KDecomposition(np.eye(4), np.array([[0.0, eps], [-1.0, 0.0]]))
        super().__init__("kdv", ("phi", "u", "v", "w"), M, K, dec,
                         ("alpha1", "alpha2"), {"eta": eta, "eps": eps})

    def potential(self, z):
        _, u, v, w = z
        return 0.5 * v * v - u * w + (self.eta / 6.0) * u ** 3

    def potential_gradient(self, z):
        phi, u, v, w = z
        zero = np.zeros_like(np.asarray(phi, dtype=float))
        return np.stack([zero, -w + 0.5 * self.eta * u * u, v, -u])

    def potential_hessian(self, z):
        u = np.asarray(z[1], dtype=float)
        H = np.zeros((4, 4) + u.shape)
        H[1, 1] = self.eta * u
        H[1, 3] = H[3, 1] = -1.0
        H[2, 2] = 1.0
        return H

    def jump_matrices(self, flux):
        a1, a2 = flux["alpha1"], flux["alpha2"]
        e = self.eps
        A = np.array([[0.0, 0.0, 0.0, a1], [0.0, 0.0, e * a2, 0.0],
                      [0.0, e * a2, 0.0, 0.0], [a1, 0.0, 0.0, 0.0]])
        return A, np.zeros((4, 4))


# ---------------------------------------------------------------------------
# bbm: u_t - sigma u_xxt + 3 Vcubic (u^2)_x = 0, z = (phi, u, v, w, p).
# The default Vcubic = 1/6 gives the classical u_t + u u_x - sigma u_xxt = 0.
# ---------------------------------------------------------------------------

class BbmModel(ModelDescriptor):

    def __init__(self, sigma=1.0, Vcubic=1.0 / 6.0):
        sigma, Vcubic = float(sigma), float(Vcubic)
        if sigma <= 0.0:
            raise InvalidConfigError("bbm: sigma must be positive")
        self.sigma, self.Vcubic = sigma, Vcubic
        s2 = 0.5 * sigma
        M = [[0.0, -0.5, 0.0, 0.0, 0.0], [0.5, 0.0, -s2, 0.0, 0.0],
             [0.0, s2, 0.0, 0.0, 0.0], [0.0] * 5, [0.0] * 5]
        K = [[0.0, 0.0, 0.0, 0.0, -1.0], [0.0, 0.0, 0.0, -s2, 0.0],
             [0.0] * 5, [0.0, s2, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0, 0.0]]
        # rotate (phi, u | v | w, p) -> pairs (phi, p) and (u, w); v is unpaired
        Q = np.zeros((5, 5))
        Q[0, 0] = Q[1, 1] = Q[2, 2] = 1.0
        Q[3, 4] = Q[4, 3] = 1.0
        dec = KDecomposition(Q, np.diag([1.0, s2]))
        super().__init__("bbm", ("phi", "u", "v", "w", "p"), M, K, dec,
                         ("alpha0", "alpha1", "alpha2"),
                         {"sigma": sigma, "Vcubic": Vcubic})

    def v_prime(self, u):
        return 3.0 * self.Vcubic * u * u

    def v_second(self, u):
        return 6.0 * self.Vcubic * u

    def v_third(self, u):
        return 6.0 * self.Vcubic * np.ones_like(np.asarray(u, dtype=float))

    def potential(self, z):
        _, u, v, w, p = z
        return u * p - self.Vcubic * u ** 3 + 0.5 * self.sigma * v * w

    def potential_gradient(self, z):
        phi, u, v, w, p = z
        zero = np.zeros_like(np.asarray(phi, dtype=float))
        s2 = 0.5 * self.sigma
        return np.stack([zero, p - self.v_prime(u), s2 * w, s2 * v, u])

    def potential_hessian(self, z):
        u = np.asarray(z[1], dtype=float)
        H = np.zeros((5, 5) + u.shape)
        H[1, 1] = -self.v_second(u)
        H[1, 4] = H[4, 1] = 1.0
        H[2, 3] = H[3, 2] = 0.5 * self.sigma
        return H

    def _validate_flux(self, flux):
        if flux["alpha0"] != 0.0 and flux["alpha1"] != 0.0:
            raise InvalidConfigError(
                "bbm: alpha0 and alpha1 cannot both be nonzero")
        if flux["alpha0"] < 0.0:
            warnings.warn("bbm: negative alpha0 is known to be unstable",
                          stacklevel=3)

    def jump_matrices(self, flux):
        a0, a1, a2 = flux["alpha0"], flux["alpha1"], flux["alpha2"]
        s2 = 0.5 * self.sigma
        A = np.zeros((5, 5))
        A[0, 1] = A[1, 0] = a0
        A[0, 4] = A[4, 0] = a1
        A[1, 3] = A[3, 1] = s2 * a2
        return A, np.zeros((5, 5))


# ---------------------------------------------------------------------------
# ch: u_t - u_xxt + 3 u u_x = 2 u_x u_xx + u u_xxx, z = (u, phi, rho, v, w)
# ---------------------------------------------------------------------------

class ChModel(ModelDescriptor):

    def __init__(self):
        M = [[0.0, 0.5, -0.5, 0.0, 0.0], [-0.5, 0.0, 0.0, 0.0, 0.0],
             [0.5, 0.0, 0.0, 0.0, 0.0], [0.0] * 5, [0.0] * 5]
        K = [[0.0, 0.0, 0.0, -1.0, 0.0], [0.0, 0.0, 0.0, 0.0, 1.0],
             [0.0] * 5, [1.0, 0.0, 0.0, 0.0, 0.0], [0.0, -1.0, 0.0, 0.0, 0.0]]
        dec = KDecomposition(np.eye(5), np.diag([1.0, -1.0]))
        super().__init__("ch", ("u", "phi", "rho", "v", "w"), M, K, dec,
                         ("alpha0",), {})

    def potential(self, z):
        u, _, rho, v, w = z
        return -w * u - 0.5 * u ** 3 - 0.5 * u * rho * rho + rho * v

    def potential_gradient(self, z):
        u, phi, rho, v, w = z
        zero = np.zeros_like(np.asarray(phi, dtype=float))
        return np.stack([-w - 1.5 * u * u - 0.5 * rho * rho, zero,
                         -u * rho + v, rho, -u])

    def potential_hessian(self, z):
        u = np.asarray(z[0], dtype=float)
        rho = np.asarray(z[2], dtype=float)
        H = np.zeros((5, 5) + u.shape)
        H[0, 0] = -3.0 * u
        H[0, 2] = H[2, 0] = -rho
        H[0, 4] = H[4, 0] = -1.0
        H[2, 2] = -u
        H[2, 3] = H[3, 2] = 1.0
        return H

    def jump_matrices(self, flux):
        A = np.zeros((5, 5))
        A[0, 1] = A[1, 0] = flux["alpha0"]
        return A, np.zeros((5, 5))


# ---------------------------------------------------------------------------
# nls: i psi_t + psi_xx + alpha |psi|^2 psi = 0 with psi = p + i q,
# components z = (p, q, v, w)
# ---------------------------------------------------------------------------

class NlsModel(ModelDescriptor):

    def __init__(self, alpha=1.0):
        self.alpha = float(alpha)
        M = [[0.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0],
             [0.0] * 4, [0.0] * 4]
        K = [[0.0, 0.0, -1.0, 0.0], [0.0, 0.0, 0.0, -1.0],
             [1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]
        dec = KDecomposition(np.eye(4), np.eye(2))
        super().__init__("nls", ("p", "q", "v", "w"), M, K, dec,
                         ("a",), {"alpha": self.alpha})

    def potential(self, z):
        p, q, v, w = z
        r = p * p + q * q
        return 0.5 * (v * v + w * w) + 0.25 * self.alpha * r * r

    def potential_gradient(self, z):
        p, q, v, w = z
        r = p * p + q * q
        al = self.alpha
        return np.stack([al * r * p, al * r * q, v, w])

    def potential_hessian(self, z):
        p = np.asarray(z[0], dtype=float)
        q = np.asarray(z[1], dtype=float)
        r = p * p + q * q
        al = self.alpha
        H = np.zeros((4, 4) + p.shape)
        H[0, 0] = al * (r + 2.0 * p * p)
        H[0, 1] = H[1, 0] = 2.0 * al * p * q
        H[1, 1] = al * (r + 2.0 * q * q)
        H[2, 2] = 1.0
        H[3, 3] = 1.0
        return H

    def _validate_flux(self, flux):
        if not -0.5 <= flux["a"] <= 0.5:
            raise InvalidConfigError("nls: flux weight a must lie in [-1/2, 1/2]")

    def jump_matrices(self, flux):
        a = flux["a"]
        A = np.zeros((4, 4))
        A[0, 2] = A[2, 0] = a
        A[1, 3] = A[3, 1] = a
        return A, np.zeros((4, 4))


# ---------------------------------------------------------------------------
# bbm_kdv: u_t - sigma u_xxt = V'(u)_x + nu u_xxx,
# components z = (u, theta, phi, w, rho, v).  Vcubic = -1/6 recovers the
# classical BBM nonlinearity at nu = 0; sigma -> 0, nu = -eps^2,
# Vcubic = -eta/6 recovers kdv.
# ---------------------------------------------------------------------------

class BbmKdvModel(ModelDescriptor):

    def __init__(self, sigma=1.0, nu=1.0, Vcubic=-1.0 / 6.0):
        sigma, nu, Vcubic = float(sigma), float(nu), float(Vcubic)
        if sigma <= 0.0:
            raise InvalidConfigError("bbm_kdv: sigma must be positive")
        self.sigma, self.nu, self.Vcubic = sigma, nu, Vcubic
        s2 = 0.5 * sigma
        M = [[0.0, s2, -0.5, 0.0, 0.0, 0.0], [-s2, 0.0, 0.0, 0.0, 0.0, 0.0],
             [0.5, 0.0, 0.0, 0.0, 0.0, 0.0], [0.0] * 6, [0.0] * 6, [0.0] * 6]
        K = np.zeros((6, 6))
        K[0, 4], K[0, 5] = s2, nu
        K[2, 3] = -1.0
        K[3, 2] = 1.0
        K[4, 0], K[5, 0] = -s2, -nu
        scale = float(np.hypot(s2, nu))
        # rotate so u pairs with the (rho, v) combination K couples it to,
        # phi pairs with w, and theta sits in the kernel of K
        b = np.zeros(6)
        b[4], b[5] = -s2 / scale, -nu / scale
        c = np.zeros(6)
        c[4], c[5] = -nu / scale, s2 / scale
        Q = np.zeros((6, 6))
        Q[0, 0] = 1.0
        Q[1, 2] = 1.0
        Q[2, 1] = 1.0
        Q[3] = b
        Q[4, 3] = 1.0
        Q[5] = c
        dec = KDecomposition(Q, np.diag([scale, 1.0, 0.0]))
        super().__init__("bbm_kdv", ("u", "theta", "phi", "w", "rho", "v"),
                         M, K, dec, (),
                         {"sigma": sigma, "nu": nu, "Vcubic": Vcubic})

    def v_prime(self, u):
        return 3.0 * self.Vcubic * u * u

    def v_second(self, u):
        return 6.0 * self.Vcubic * u

    def v_third(self, u):
        return 6.0 * self.Vcubic * np.ones_like(np.asarray(u, dtype=float))

    def potential(self, z):
        u, theta, phi, w, rho, v = z
        return (u * w - self.Vcubic * u ** 3 - 0.5 * self.nu * v * v
                - 0.5 * self.sigma * theta * rho)

    def potential_gradient(self, z):
        u, theta, phi, w, rho, v = z
        zero = np.zeros_like(np.asarray(phi, dtype=float))
        s2 = 0.5 * self.sigma
        return np.stack([w - self.v_prime(u), -s2 * rho, zero, u,
                         -s2 * theta, -self.nu * v])

    def potential_hessian(self, z):
        u = np.asarray(z[0], dtype=float)
        H = np.zeros((6, 6) + u.shape)
        H[0, 0] = -self.v_second(u)
        H[0, 3] = H[3, 0] = 1.0
        H[1, 4] = H[4, 1] = -0.5 * self.sigma
        H[5, 5] = -self.nu
        return H

    def jump_matrices(self, flux):
        return np.zeros((6, 6)), np.zeros((6, 6))


MODEL_BUILDERS = {
    "wave": WaveModel,
    "kdv": KdvModel,
    "bbm": BbmModel,
    "ch": ChModel,
    "nls": NlsModel,
    "bbm_kdv": BbmKdvModel,
}

MODEL_IDS = tuple(MODEL_BUILDERS)


def make_model(model_id, **params):
    """Build a model descriptor by id with keyword model parameters."""
    try:
        builder = MODEL_BUILDERS[model_id]
    except KeyError:
        raise InvalidConfigError(
            f"unknown model {model_id!r}; expected one of {sorted(MODEL_BUILDERS)}"
        ) from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise InvalidConfigError(f"{model_id}: bad model parameters: {exc}") from None
