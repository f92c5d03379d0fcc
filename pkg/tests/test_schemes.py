"""Scheme-level tests: every reduced marching form is checked against the
unreduced block system (assembled independently in oracles.py), and every
linearization against finite differences."""

import numpy as np
import pytest

from msdg import (
    InconsistentRhsError,
    InvalidConfigError,
    build_mesh,
    build_reduced_scheme,
    make_model,
)
from msdg import DgFunction
from msdg.operators import derivative_operator
from msdg.schemes import SCHEME_CLASSES

import oracles
from oracles import full_system_residual

RESIDUAL_TOL = 1e-9


def source_fn(t, x):
    return 2.0 * np.cos(x + t) + 3.0 * np.sin(2.0 * (x + t))


def source_rate_fn(t, x):
    return -2.0 * np.sin(x + t) + 6.0 * np.cos(2.0 * (x + t))


def random_state(scheme, rng, mean_free_fields=()):
    """Random marched state with O(1) coefficients; selected fields are made
    mean-free (required whenever a primitive of that field is reconstructed)."""
    fields = []
    for name in scheme.marched:
        c = rng.normal(size=scheme.state_shape[1:]) * 0.4
        if name in mean_free_fields:
            c = scheme._mean_free(c)
        fields.append(c)
    return scheme.pack(*fields)


def in_range_state(scheme, rng):
    """State in the range of the central derivative (admissible at any mesh
    parity, where plain mean-free draws are not)."""
    d0 = derivative_operator(scheme.mesh, scheme.k, 0.0)
    psi = rng.normal(size=scheme.state_shape[1:])
    u = d0.apply(psi)
    return scheme.pack(u / max(1.0, np.linalg.norm(u)))


def make_scheme(model_id, n_cells, k, flux=None, pattern="uniform", **kw):
    params = {
        "wave": {"V": "cubic"},
        "kdv": {"eta": 6.0, "eps": 0.7},
        "bbm": {"sigma": 0.8, "Vcubic": 1.0 / 6.0},
        "ch": {},
        "nls": {"alpha": 2.0},
        "bbm_kdv": {"sigma": 0.5, "nu": 0.3, "Vcubic": -1.0 / 6.0},
    }[model_id]
    model = make_model(model_id, **params)
    mesh = build_mesh((0.0, 2.0 * np.pi), n_cells, pattern=pattern)
    return build_reduced_scheme(model, mesh, k, flux, **kw)


WAVE_FLUXES = [
    {},
    {"alpha13": 0.5},
    {"alpha11": 1.0, "alpha33": -1.0},
    {"alpha13": 0.125},
    {"beta": 1.0},
]


# ---------------------------------------------------------------------------
# the central check: reduced marching forms satisfy the unreduced system
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("flux", WAVE_FLUXES)
@pytest.mark.parametrize("n_cells,k", [(4, 1), (5, 2)])
def test_wave_solves_full_system(n_cells, k, flux):
    scheme = make_scheme("wave", n_cells, k, flux)
    rng = np.random.default_rng(11)
    for _ in range(2):
        y = random_state(scheme, rng)
        assert full_system_residual(scheme, 0.0, y) < RESIDUAL_TOL


def test_wave_solves_full_system_nonuniform():
    scheme = make_scheme("wave", 5, 2, {"alpha13": 0.5},
                         pattern="two_one_alternating")
    rng = np.random.default_rng(12)
    y = random_state(scheme, rng)
    assert full_system_residual(scheme, 0.0, y) < RESIDUAL_TOL


@pytest.mark.parametrize("alpha2", [0.0, 0.5, -0.5])
@pytest.mark.parametrize("n_cells,k", [(5, 2), (9, 2)])
def test_kdv_solves_full_system(n_cells, k, alpha2):
    scheme = make_scheme("kdv", n_cells, k, {"alpha2": alpha2})
    rng = np.random.default_rng(21)
    for _ in range(2):
        y = random_state(scheme, rng, mean_free_fields=("u",))
        assert full_system_residual(scheme, 0.0, y) < RESIDUAL_TOL


def test_kdv_central_any_parity_holds_up_to_primitive_gauge():
    # at an even cell count the central derivative has a second kernel
    # direction; for states in its range the marching and every non-primitive
    # row still hold exactly, while the primitive-rate row is only determined
    # up to that kernel -- so its residual must be annihilated by the
    # derivative.  (The verification sweeps avoid these parities entirely.)
    scheme = make_scheme("kdv", 4, 1, {})
    rng = np.random.default_rng(22)
    y = in_range_state(scheme, rng)
    model, mesh, k = scheme.model, scheme.mesh, scheme.k
    names = model.component_names
    z = scheme.reconstruct(0.0, y)
    zdot = scheme.reconstruct_velocity(0.0, y)
    zf = np.stack([z[n].ravel() for n in names])
    zdf = np.stack([zdot[n].ravel() for n in names])
    d0 = oracles.weak_derivative_dense(mesh, k, 0.0)
    vals = np.stack([
        DgFunction(mesh, k, z[n]).values_at_quadrature(scheme.quad)
        for n in names])
    grad = np.asarray(model.potential_gradient(vals), dtype=float)
    res = (model.time_matrix @ zdf + (model.space_matrix @ zf) @ d0.T
           - np.stack([oracles.legendre_projection(
               grad[i], mesh, k, scheme.quad).ravel() for i in range(4)]))
    for i, name in enumerate(names):
        if name == "u":
            assert np.max(np.abs(d0 @ res[i])) < RESIDUAL_TOL
            assert np.max(np.abs(res[i])) > 1e-3  # the gauge gap is real
        else:
            assert np.max(np.abs(res[i])) < RESIDUAL_TOL, name


@pytest.mark.parametrize("flux", [{}, {"alpha0": 0.25}, {"alpha1": 0.5}])
@pytest.mark.parametrize("n_cells,k", [(5, 2), (9, 2)])
def test_bbm_solves_full_system(n_cells, k, flux):
    scheme = make_scheme("bbm", n_cells, k, flux)
    rng = np.random.default_rng(31)
    for _ in range(2):
        y = random_state(scheme, rng, mean_free_fields=("u",))
        assert full_system_residual(scheme, 0.0, y) < RESIDUAL_TOL


@pytest.mark.parametrize("alpha0", [0.0, 3.0])
@pytest.mark.parametrize("n_cells,k", [(5, 2), (9, 2)])
def test_ch_solves_full_system(n_cells, k, alpha0):
    scheme = make_scheme("ch", n_cells, k, {"alpha0": alpha0})
    rng = np.random.default_rng(41)
    for _ in range(2):
        y = random_state(scheme, rng, mean_free_fields=("u",))
        assert full_system_residual(scheme, 0.0, y) < RESIDUAL_TOL


@pytest.mark.parametrize("alpha0", [0.0, 3.0])
def test_ch_with_source_solves_full_system(alpha0):
    scheme = make_scheme("ch", 5, 2, {"alpha0": alpha0},
                         source=source_fn, source_rate=source_rate_fn)
    rng = np.random.default_rng(42)
    y = random_state(scheme, rng, mean_free_fields=("u",))
    assert full_system_residual(scheme, 0.3, y) < RESIDUAL_TOL


@pytest.mark.parametrize("a", [0.0, 0.5, -0.5])
@pytest.mark.parametrize("n_cells,k", [(4, 1), (5, 2)])
def test_nls_solves_full_system(n_cells, k, a):
    scheme = make_scheme("nls", n_cells, k, {"a": a})
    rng = np.random.default_rng(51)
    for _ in range(2):
        y = random_state(scheme, rng)
        assert full_system_residual(scheme, 0.0, y) < RESIDUAL_TOL


@pytest.mark.parametrize("n_cells,k", [(5, 2), (9, 2)])
def test_bbm_kdv_solves_full_system(n_cells, k):
    scheme = make_scheme("bbm_kdv", n_cells, k)
    rng = np.random.default_rng(61)
    for _ in range(2):
        y = random_state(scheme, rng, mean_free_fields=("u",))
        assert full_system_residual(scheme, 0.0, y) < RESIDUAL_TOL


# ---------------------------------------------------------------------------
# linearizations against finite differences
# ---------------------------------------------------------------------------

ALL_SCHEMES = [
    ("wave", {"alpha11": 1.0, "alpha33": -1.0}, {}),
    ("wave", {"beta": 1.0}, {}),
    ("kdv", {"alpha2": 0.5}, {}),
    ("bbm", {"alpha0": 0.25}, {}),
    ("bbm", {"alpha1": 0.5}, {}),
    ("ch", {"alpha0": 3.0}, {}),
    ("ch", {}, {"source": source_fn, "source_rate": source_rate_fn}),
    ("nls", {"a": 0.5}, {}),
    ("bbm_kdv", {}, {}),
]


def relerr(got, want):
    scale = max(1.0, float(np.linalg.norm(want)))
    return float(np.linalg.norm(got - want)) / scale


@pytest.mark.parametrize("model_id,flux,kw", ALL_SCHEMES)
def test_jvp_matches_finite_differences(model_id, flux, kw):
    scheme = make_scheme(model_id, 5, 2, flux, **kw)
    rng = np.random.default_rng(71)
    y = random_state(scheme, rng)
    dy = random_state(scheme, rng)
    t, eps = 0.3, 1e-6
    fd = (scheme.rhs(t, y + eps * dy) - scheme.rhs(t, y - eps * dy)) / (2 * eps)
    assert relerr(scheme.jvp(t, y, dy), fd) < 1e-6


@pytest.mark.parametrize("model_id,flux,kw", ALL_SCHEMES)
def test_j2vp_matches_finite_differences(model_id, flux, kw):
    scheme = make_scheme(model_id, 5, 2, flux, **kw)
    rng = np.random.default_rng(72)
    y = random_state(scheme, rng)
    da = random_state(scheme, rng)
    db = random_state(scheme, rng)
    t, eps = 0.3, 1e-6
    fd = (scheme.jvp(t, y + eps * db, da)
          - scheme.jvp(t, y - eps * db, da)) / (2 * eps)
    assert relerr(scheme.j2vp(t, y, da, db), fd) < 1e-6


@pytest.mark.parametrize("model_id,flux,kw", ALL_SCHEMES)
def test_reconstruct_tangent_matches_finite_differences(model_id, flux, kw):
    # frozen-time perturbation of the reconstruction map; the default dydot
    # (= jvp) is exactly the derivative of the embedded rhs evaluation
    scheme = make_scheme(model_id, 5, 2, flux, **kw)
    rng = np.random.default_rng(73)
    y = random_state(scheme, rng)
    dy = random_state(scheme, rng)
    t, eps = 0.3, 1e-6
    plus = scheme.reconstruct(t, y + eps * dy)
    minus = scheme.reconstruct(t, y - eps * dy)
    tangent = scheme.reconstruct_tangent(t, y, dy)
    for name in scheme.model.component_names:
        fd = (plus[name] - minus[name]) / (2 * eps)
        assert relerr(tangent[name], fd) < 1e-5, name


@pytest.mark.parametrize("model_id,flux,kw", ALL_SCHEMES)
def test_reconstruct_velocity_matches_flow_differences(model_id, flux, kw):
    scheme = make_scheme(model_id, 5, 2, flux, **kw)
    rng = np.random.default_rng(74)
    y = random_state(scheme, rng)
    t, eps = 0.3, 1e-6
    ydot = scheme.rhs(t, y)
    plus = scheme.reconstruct(t + eps, y + eps * ydot)
    minus = scheme.reconstruct(t - eps, y - eps * ydot)
    vel = scheme.reconstruct_velocity(t, y)
    for name in scheme.model.component_names:
        fd = (plus[name] - minus[name]) / (2 * eps)
        assert relerr(vel[name], fd) < 1e-5, name


@pytest.mark.parametrize("model_id,flux,kw", ALL_SCHEMES)
def test_reconstruct_tangent_rate_matches_flow_differences(model_id, flux, kw):
    # move the state along the flow and the tangent along the linearized
    # flow; the reported rate must match the path derivative of the tangent
    scheme = make_scheme(model_id, 5, 2, flux, **kw)
    rng = np.random.default_rng(75)
    y = random_state(scheme, rng)
    dy = random_state(scheme, rng)
    t, eps = 0.3, 1e-6
    ydot = scheme.rhs(t, y)
    dydot = scheme.jvp(t, y, dy)
    ddydot = scheme.j2vp(t, y, ydot, dy) + scheme.jvp(t, y, dydot)
    plus = scheme.reconstruct_tangent(
        t + eps, y + eps * ydot, dy + eps * dydot, dydot + eps * ddydot)
    minus = scheme.reconstruct_tangent(
        t - eps, y - eps * ydot, dy - eps * dydot, dydot - eps * ddydot)
    rate = scheme.reconstruct_tangent_rate(t, y, dy)
    for name in scheme.model.component_names:
        fd = (plus[name] - minus[name]) / (2 * eps)
        assert relerr(rate[name], fd) < 1e-5, name


def test_second_time_derivative_of_reconstruction():
    # the tangent rate along (ydot, yddot) is the second time derivative of
    # the reconstruction; checked against a flow finite difference of the
    # reconstructed velocity for the one family that needs it (time jumps)
    scheme = make_scheme("wave", 5, 2, {"beta": 1.0})
    rng = np.random.default_rng(76)
    y = random_state(scheme, rng)
    t, eps = 0.0, 1e-6
    ydot = scheme.rhs(t, y)
    yddot = scheme.jvp(t, y, ydot)
    plus = scheme.reconstruct_velocity(t + eps, y + eps * ydot)
    minus = scheme.reconstruct_velocity(t - eps, y - eps * ydot)
    acc = scheme.reconstruct_tangent_rate(t, y, ydot, yddot)
    for name in scheme.model.component_names:
        fd = (plus[name] - minus[name]) / (2 * eps)
        assert relerr(acc[name], fd) < 1e-5, name


# ---------------------------------------------------------------------------
# structural facts and validation
# ---------------------------------------------------------------------------


def test_wave_constant_state_accelerates_by_potential_gradient():
    scheme = make_scheme("wave", 4, 1, {})
    c = 0.7
    u = np.zeros(scheme.state_shape[1:])
    u[:, 0] = c * scheme._sqrt_h
    y = scheme.pack(u, np.zeros_like(u))
    udot, vdot = scheme.unpack(scheme.rhs(0.0, y))
    assert np.allclose(udot, 0.0, atol=1e-13)
    expected = np.zeros_like(u)
    expected[:, 0] = 3.0 * c * c * scheme._sqrt_h  # gradient of the cubic
    assert np.allclose(vdot, expected, atol=1e-12)


def test_wave_initial_state_reproduces_initial_velocity():
    scheme = make_scheme("wave", 6, 2, {"beta": 0.5})
    y0 = scheme.initial_state(np.sin, np.cos)
    udot = scheme.unpack(scheme.rhs(0.0, y0))[0]
    from msdg import project
    want = project(np.cos, scheme.mesh, scheme.k, scheme.quad).coeffs
    assert np.allclose(udot, want, atol=1e-11)


@pytest.mark.parametrize("model_id,flux,kw", [
    ("kdv", {"alpha2": 0.5}, {}),
    ("bbm", {"alpha0": 0.25}, {}),
    ("bbm", {"alpha1": 0.5}, {}),
    ("ch", {"alpha0": 3.0}, {}),
    ("ch", {}, {"source": source_fn, "source_rate": source_rate_fn}),
    ("bbm_kdv", {}, {}),
])
def test_marched_field_mean_is_conserved(model_id, flux, kw):
    scheme = make_scheme(model_id, 5, 2, flux, **kw)
    rng = np.random.default_rng(81)
    y = random_state(scheme, rng)
    udot = scheme.unpack(scheme.rhs(0.4, y))[0]
    assert abs(scheme._integral(udot)) < 1e-11


def test_nls_charge_rate_vanishes():
    scheme = make_scheme("nls", 5, 2, {"a": 0.5})
    rng = np.random.default_rng(82)
    y = random_state(scheme, rng)
    p, q = scheme.unpack(y)
    pdot, qdot = scheme.unpack(scheme.rhs(0.0, y))
    rate = 2.0 * (np.sum(p * pdot) + np.sum(q * qdot))
    assert abs(rate) < 1e-12


def test_kdv_rejects_primitive_jump_weight():
    with pytest.raises(InvalidConfigError):
        make_scheme("kdv", 6, 2, {"alpha1": 0.5})


@pytest.mark.parametrize("n_cells,k", [(6, 2), (5, 1)])
def test_bbm_pair_branch_needs_even_degree_odd_cells(n_cells, k):
    with pytest.raises(InvalidConfigError):
        make_scheme("bbm", n_cells, k, {"alpha1": 0.5})


def test_ch_velocity_needs_source_rate():
    scheme = make_scheme("ch", 5, 2, {}, source=source_fn)
    rng = np.random.default_rng(83)
    y = random_state(scheme, rng)
    assert np.all(np.isfinite(scheme.rhs(0.0, y)))  # marching itself is fine
    with pytest.raises(InvalidConfigError):
        scheme.reconstruct_velocity(0.0, y)


def test_source_option_is_rejected_for_other_models():
    with pytest.raises(InvalidConfigError):
        make_scheme("kdv", 5, 2, {}, source=source_fn)


def test_degree_zero_is_rejected():
    with pytest.raises(InvalidConfigError):
        make_scheme("wave", 6, 0)


def test_pack_validates_shapes():
    scheme = make_scheme("wave", 4, 1, {})
    with pytest.raises(InvalidConfigError):
        scheme.pack(np.zeros((4, 2)))  # wrong field count
    with pytest.raises(InvalidConfigError):
        scheme.pack(np.zeros((4, 3)), np.zeros((4, 3)))
    with pytest.raises(InvalidConfigError):
        scheme.unpack(np.zeros(7))


def test_registry_matches_model_catalog():
    from msdg.models import MODEL_IDS
    assert set(SCHEME_CLASSES) == set(MODEL_IDS)
