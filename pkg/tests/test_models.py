"""Tests for the model descriptor catalog.

The potential derivatives are checked against finite differences, the
structure matrices against hand-written literals, and every model's jump
matrices against the per-component interface-value formulas written out
longhand.
"""

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from msdg.errors import InvalidConfigError
from msdg.flux_family import check_structure, flux_matrix, interface_flux
from msdg.models import MODEL_IDS, make_model


def sample_models():
    return [
        make_model("wave", V="cubic"),
        make_model("kdv", eta=6.0, eps=2.0),
        make_model("bbm", sigma=2.0, Vcubic=0.5),
        make_model("ch"),
        make_model("nls", alpha=2.0),
        make_model("bbm_kdv", sigma=2.0, nu=3.0, Vcubic=-0.5),
    ]


def fd_gradient(f, z, eps=1e-6):
    g = np.zeros_like(z)
    for i in range(z.shape[0]):
        zp = z.copy()
        zm = z.copy()
        zp[i] += eps
        zm[i] -= eps
        g[i] = (f(zp) - f(zm)) / (2.0 * eps)
    return g


# ---------------------------------------------------------------------------
# potential and derivatives
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("model", sample_models(), ids=lambda m: m.name)
def test_gradient_matches_finite_differences(model):
    rng = np.random.default_rng(7)
    z = rng.uniform(-1.0, 1.0, size=(model.m, 11))
    grad = model.potential_gradient(z)
    assert grad.shape == z.shape
    ref = fd_gradient(model.potential, z)
    assert np.allclose(grad, ref, rtol=1e-6, atol=1e-7)


@pytest.mark.parametrize("model", sample_models(), ids=lambda m: m.name)
def test_hessian_matches_finite_differences(model):
    rng = np.random.default_rng(11)
    z = rng.uniform(-1.0, 1.0, size=(model.m, 6))
    hess = model.potential_hessian(z)
    assert hess.shape == (model.m,) + z.shape
    eps = 1e-6
    for i in range(model.m):
        zp = z.copy()
        zm = z.copy()
        zp[i] += eps
        zm[i] -= eps
        col = (model.potential_gradient(zp) - model.potential_gradient(zm))
        assert np.allclose(hess[:, i], col / (2.0 * eps), atol=1e-6)
    # symmetry in the first two axes
    assert np.allclose(hess, np.swapaxes(hess, 0, 1))


def test_potential_spot_values():
    wave, kdv, bbm, ch, nls, bbm_kdv = sample_models()
    assert np.isclose(wave.potential(np.array([1.0, 2.0, 3.0])), -3.5)
    assert np.isclose(kdv.potential(np.array([7.0, 2.0, 3.0, 4.0])), 4.5)
    assert np.isclose(bbm.potential(np.array([7.0, 2.0, 3.0, 4.0, 5.0])), 18.0)
    assert np.isclose(ch.potential(np.array([2.0, 7.0, 3.0, 4.0, 5.0])), -11.0)
    assert np.isclose(nls.potential(np.array([1.0, 2.0, 3.0, 4.0])), 25.0)
    assert np.isclose(
        bbm_kdv.potential(np.array([2.0, 7.0, 1.0, 4.0, 5.0, 6.0])), -77.0)


def test_potential_broadcasts_over_trailing_axes():
    model = make_model("nls", alpha=0.7)
    rng = np.random.default_rng(3)
    z = rng.normal(size=(4, 3, 5))
    assert model.potential(z).shape == (3, 5)
    assert model.potential_gradient(z).shape == (4, 3, 5)
    assert model.potential_hessian(z).shape == (4, 4, 3, 5)


def test_wave_potential_specs():
    u = np.array([0.7])
    base = make_model("wave")  # default V = 0
    cubic = make_model("wave", V="cubic")
    quad = make_model("wave", V=[0.0, 0.0, 3.0])
    poly = make_model("wave", V=Polynomial([0.0, 0.0, 3.0]))
    z = np.array([u[0], 0.0, 0.0])
    assert np.isclose(base.potential(z), 0.0)
    assert np.isclose(cubic.potential(z), -0.7 ** 3)
    assert np.isclose(quad.potential(z), -3 * 0.7 ** 2)
    assert np.isclose(poly.potential(z), quad.potential(z))
    with pytest.raises(InvalidConfigError):
        make_model("wave", V="quartic")


# ---------------------------------------------------------------------------
# structure matrices and the pairing
# ---------------------------------------------------------------------------


def test_structure_matrices_frozen():
    wave, kdv, bbm, ch, nls, bbm_kdv = sample_models()
    assert np.array_equal(
        wave.time_matrix, [[0, -1, 0], [1, 0, 0], [0, 0, 0]])
    assert np.array_equal(
        wave.space_matrix, [[0, 0, 1], [0, 0, 0], [-1, 0, 0]])

    assert np.array_equal(
        kdv.time_matrix,
        [[0, 0.5, 0, 0], [-0.5, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
    assert np.array_equal(
        kdv.space_matrix,
        [[0, 0, 0, 1], [0, 0, -2, 0], [0, 2, 0, 0], [-1, 0, 0, 0]])

    assert np.array_equal(
        bbm.time_matrix,
        [[0, -0.5, 0, 0, 0], [0.5, 0, -1, 0, 0], [0, 1, 0, 0, 0],
         [0, 0, 0, 0, 0], [0, 0, 0, 0, 0]])
    assert np.array_equal(
        bbm.space_matrix,
        [[0, 0, 0, 0, -1], [0, 0, 0, -1, 0], [0, 0, 0, 0, 0],
         [0, 1, 0, 0, 0], [1, 0, 0, 0, 0]])

    assert np.array_equal(
        ch.time_matrix,
        [[0, 0.5, -0.5, 0, 0], [-0.5, 0, 0, 0, 0], [0.5, 0, 0, 0, 0],
         [0, 0, 0, 0, 0], [0, 0, 0, 0, 0]])
    assert np.array_equal(
        ch.space_matrix,
        [[0, 0, 0, -1, 0], [0, 0, 0, 0, 1], [0, 0, 0, 0, 0],
         [1, 0, 0, 0, 0], [0, -1, 0, 0, 0]])

    assert np.array_equal(
        nls.time_matrix,
        [[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
    assert np.array_equal(
        nls.space_matrix,
        [[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]])

    assert np.array_equal(
        bbm_kdv.time_matrix,
        [[0, 1, -0.5, 0, 0, 0], [-1, 0, 0, 0, 0, 0], [0.5, 0, 0, 0, 0, 0],
         [0, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 0]])
    assert np.array_equal(
        bbm_kdv.space_matrix,
        [[0, 0, 0, 0, 1, 3], [0, 0, 0, 0, 0, 0], [0, 0, 0, -1, 0, 0],
         [0, 0, 1, 0, 0, 0], [-1, 0, 0, 0, 0, 0], [-3, 0, 0, 0, 0, 0]])


@pytest.mark.parametrize("model", sample_models(), ids=lambda m: m.name)
def test_pairing_reconstructs_space_matrix(model):
    dec = model.decomposition
    assert np.allclose(dec.reconstruct(), model.space_matrix, atol=1e-13)
    Q = dec.q_matrix
    assert np.allclose(Q @ Q.T, np.eye(model.m), atol=1e-13)


@pytest.mark.parametrize("model", sample_models(), ids=lambda m: m.name)
def test_trailing_pair_directions_decouple_from_time_matrix(model):
    # the columns of Q^T belonging to the trailing half of each pair must be
    # annihilated by the time matrix; the simplified conserved-energy formula
    # rests on this
    q = model.m // 2
    cols = model.decomposition.q_matrix.T[:, model.m - q:]
    assert np.abs(model.time_matrix @ cols).max() == 0.0


# ---------------------------------------------------------------------------
# jump matrices
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("model", sample_models(), ids=lambda m: m.name)
def test_jump_matrices_have_required_symmetry(model):
    weights = {n: 0.25 for n in model.flux_names}
    if model.name == "bbm":
        weights["alpha1"] = 0.0  # cannot combine with alpha0
    A, B = model.jump_matrices(model.normalize_flux(weights))
    check_structure(M=model.time_matrix, K=model.space_matrix, A=A, B=B)


def _traces(model, seed):
    rng = np.random.default_rng(seed)
    zm = rng.normal(size=(model.m, 5))
    zp = rng.normal(size=(model.m, 5))
    return zm, zp, 0.5 * (zm + zp), zp - zm


def test_wave_flux_components():
    model = make_model("wave", V="cubic")
    a11, a13, a33, beta = 0.8, -0.3, 0.6, 0.4
    flux = model.normalize_flux(
        {"alpha11": a11, "alpha13": a13, "alpha33": a33, "beta": beta})
    A, B = model.jump_matrices(flux)
    zm, zp, avg, jmp = _traces(model, 17)
    rng = np.random.default_rng(23)
    dzm = rng.normal(size=zm.shape)
    dzp = rng.normal(size=zm.shape)
    djmp = dzp - dzm
    out = interface_flux(model.space_matrix, A, B, zm, zp, dzm, dzp)
    u, v, w = 0, 1, 2
    assert np.allclose(out[u], avg[w] + a11 * jmp[u] + a13 * jmp[w]
                       - beta * djmp[v])
    assert np.allclose(out[v], beta * djmp[u])
    assert np.allclose(out[w], -(avg[u] - a13 * jmp[u] - a33 * jmp[w]))


def test_kdv_flux_components():
    eps = 2.0
    model = make_model("kdv", eta=6.0, eps=eps)
    a1, a2 = 0.7, -0.4
    A, B = model.jump_matrices(model.normalize_flux(
        {"alpha1": a1, "alpha2": a2}))
    zm, zp, avg, jmp = _traces(model, 5)
    out = interface_flux(model.space_matrix, A, B, zm, zp)
    phi, u, v, w = 0, 1, 2, 3
    assert np.allclose(out[phi], avg[w] + a1 * jmp[w])
    assert np.allclose(out[u], -eps * (avg[v] - a2 * jmp[v]))
    assert np.allclose(out[v], eps * (avg[u] + a2 * jmp[u]))
    assert np.allclose(out[w], -(avg[phi] - a1 * jmp[phi]))


def test_bbm_flux_components():
    sigma = 2.0
    model = make_model("bbm", sigma=sigma, Vcubic=0.5)
    a0, a2 = 0.25, 0.3
    A, B = model.jump_matrices(model.normalize_flux(
        {"alpha0": a0, "alpha2": a2}))
    zm, zp, avg, jmp = _traces(model, 29)
    out = interface_flux(model.space_matrix, A, B, zm, zp)
    phi, u, v, w, p = range(5)
    s2 = 0.5 * sigma
    assert np.allclose(out[phi], -(avg[p] - a0 * jmp[u]))
    assert np.allclose(out[u], -s2 * (avg[w] - a2 * jmp[w])
                       + a0 * jmp[phi])
    assert np.allclose(out[v], 0.0)
    assert np.allclose(out[w], s2 * (avg[u] + a2 * jmp[u]))
    assert np.allclose(out[p], avg[phi])

    # the alpha1 variant pairs phi with p instead
    a1 = 0.5
    A1, _ = model.jump_matrices(model.normalize_flux(
        {"alpha1": a1, "alpha2": a2}))
    out1 = interface_flux(model.space_matrix, A1, None, zm, zp)
    assert np.allclose(out1[phi], -(avg[p] - a1 * jmp[p]))
    assert np.allclose(out1[p], avg[phi] + a1 * jmp[phi])


def test_ch_flux_components():
    model = make_model("ch")
    a0 = 3.0
    A, B = model.jump_matrices(model.normalize_flux({"alpha0": a0}))
    zm, zp, avg, jmp = _traces(model, 31)
    out = interface_flux(model.space_matrix, A, B, zm, zp)
    u, phi, rho, v, w = range(5)
    assert np.allclose(out[u], -(avg[v] - a0 * jmp[phi]))
    assert np.allclose(out[phi], avg[w] + a0 * jmp[u])
    assert np.allclose(out[rho], 0.0)
    assert np.allclose(out[v], avg[u])
    assert np.allclose(out[w], -avg[phi])


def test_nls_flux_components():
    model = make_model("nls", alpha=2.0)
    a = 0.5
    A, B = model.jump_matrices(model.normalize_flux({"a": a}))
    zm, zp, avg, jmp = _traces(model, 37)
    out = interface_flux(model.space_matrix, A, B, zm, zp)
    p, q, v, w = range(4)
    assert np.allclose(out[p], -(avg[v] - a * jmp[v]))
    assert np.allclose(out[q], -(avg[w] - a * jmp[w]))
    assert np.allclose(out[v], avg[p] + a * jmp[p])
    assert np.allclose(out[w], avg[q] + a * jmp[q])
    # the one-parameter family built from the pairing is exactly this matrix
    assert np.allclose(A, flux_matrix(model.decomposition, a))


def test_bbm_kdv_central_only():
    model = make_model("bbm_kdv", sigma=2.0, nu=3.0)
    A, B = model.jump_matrices(model.normalize_flux({}))
    assert not A.any() and not B.any()
    with pytest.raises(InvalidConfigError):
        model.normalize_flux({"alpha0": 0.1})


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def test_flux_weight_validation():
    bbm = make_model("bbm", sigma=1.0)
    with pytest.raises(InvalidConfigError):
        bbm.normalize_flux({"alpha0": 0.25, "alpha1": 0.5})
    with pytest.warns(UserWarning):
        bbm.normalize_flux({"alpha0": -0.25})
    nls = make_model("nls")
    with pytest.raises(InvalidConfigError):
        nls.normalize_flux({"a": 0.6})
    wave = make_model("wave")
    with pytest.raises(InvalidConfigError):
        wave.normalize_flux({"alpha12": 1.0})
    # defaults fill in zero for anything unspecified
    assert wave.normalize_flux(None) == {
        "alpha11": 0.0, "alpha13": 0.0, "alpha33": 0.0, "beta": 0.0}


def test_model_parameter_validation():
    with pytest.raises(InvalidConfigError):
        make_model("kdv", eta=1.0, eps=0.0)
    with pytest.raises(InvalidConfigError):
        make_model("bbm", sigma=0.0)
    with pytest.raises(InvalidConfigError):
        make_model("bbm_kdv", sigma=-1.0)
    with pytest.raises(InvalidConfigError):
        make_model("spam")
    with pytest.raises(InvalidConfigError):
        make_model("kdv", cubic=True)


def test_registry_covers_all_models():
    assert set(MODEL_IDS) == {"wave", "kdv", "bbm", "ch", "nls", "bbm_kdv"}
    for mid in MODEL_IDS:
        model = make_model(mid)
        assert model.name == mid
        assert model.m == len(model.component_names)
