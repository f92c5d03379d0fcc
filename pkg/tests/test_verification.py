"""Cellwise conservation-law tests: the discrete two-form and energy
balances must close to rounding for every model and shipped flux preset on
their validity domain (full-rank derivative parity, mean-free marched field
where a primitive is reconstructed), fail visibly outside it, and assemble
to the same global quantities the energy module computes independently."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msdg import (
    InvalidConfigError,
    build_mesh,
    build_reduced_scheme,
    make_model,
    project,
)
from msdg.energy import general_energy
from msdg.presets import DEFAULT_MODEL_PARAMS, FLUX_PRESETS, flux_preset
from msdg.time_integration import integrate
from msdg.verification import (
    MEAN_FREE_FIELDS,
    TangentPair,
    corollary_hypotheses_hold,
    energy_jump_matrix,
    global_energy_audit,
    local_energy_residual,
    multisymplectic_residual,
    random_flat_state,
    run_sweep,
    sweep_cases,
    tangent_rhs,
)

from test_schemes import make_scheme, source_fn, source_rate_fn

TOL = 1e-10

# every shipped (model, preset) pair
ALL_PRESETS = [
    (model_id, name)
    for model_id in FLUX_PRESETS
    for name in FLUX_PRESETS[model_id]
]


def preset_scheme(model_id, flux_name, n_cells, k, **kw):
    model = make_model(model_id, **DEFAULT_MODEL_PARAMS[model_id])
    mesh = build_mesh((0.0, 2.0 * np.pi), n_cells)
    return build_reduced_scheme(
        model, mesh, k, flux=flux_preset(model_id, flux_name), **kw)


def good_size(model_id):
    # wave/nls march every reconstructed component; the rest reconstruct a
    # primitive and need an invertible central derivative (even k, odd N)
    return (8, 2) if model_id in ("wave", "nls") else (9, 2)


def draw_state(scheme, rng):
    return random_flat_state(
        scheme, rng, MEAN_FREE_FIELDS.get(scheme.model.name, ()))


# ---------------------------------------------------------------------------
# linearized velocity field
# ---------------------------------------------------------------------------


def test_tangent_rhs_is_linear_in_the_direction():
    scheme = preset_scheme("wave", "penalized", 5, 2)
    rng = np.random.default_rng(11)
    y = draw_state(scheme, rng)
    d1, d2 = draw_state(scheme, rng), draw_state(scheme, rng)
    lhs = tangent_rhs(scheme, 0.0, y, 2.5 * d1 - 0.75 * d2)
    rhs = 2.5 * tangent_rhs(scheme, 0.0, y, d1) \
        - 0.75 * tangent_rhs(scheme, 0.0, y, d2)
    assert np.allclose(lhs, rhs, rtol=0.0, atol=1e-11)


@pytest.mark.parametrize("model_id,kw", [
    ("wave", {}),
    ("ch", {"source": source_fn, "source_rate": source_rate_fn}),
])
def test_tangent_rhs_matches_finite_differences(model_id, kw):
    n, k = good_size(model_id)
    scheme = preset_scheme(model_id, "central", n, k, **kw)
    rng = np.random.default_rng(4)
    y = draw_state(scheme, rng)
    d = draw_state(scheme, rng)
    eps = 1e-5
    fd = (scheme.rhs(0.3, y + eps * d) - scheme.rhs(0.3, y - eps * d)) \
        / (2.0 * eps)
    exact = tangent_rhs(scheme, 0.3, y, d)
    scale = max(1.0, np.abs(exact).max())
    assert np.abs(fd - exact).max() <= 1e-6 * scale


# ---------------------------------------------------------------------------
# cellwise two-form balance
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("model_id,flux_name", ALL_PRESETS)
def test_two_form_balance_closes(model_id, flux_name):
    n, k = good_size(model_id)
    scheme = preset_scheme(model_id, flux_name, n, k)
    rng = np.random.default_rng(hash((model_id, flux_name)) % 2**32)
    y = draw_state(scheme, rng)
    pair = TangentPair(draw_state(scheme, rng), draw_state(scheme, rng))
    report = multisymplectic_residual(scheme, 0.3, y, pair)
    assert report.max_residual <= TOL
    # interface brackets telescope around the periodic mesh
    assert abs(report.flux_difference.sum()) <= 1e-12 * report.scale
    assert report.residuals.shape == (n,)


def test_two_form_accepts_plain_tuples():
    scheme = preset_scheme("wave", "central", 4, 1)
    rng = np.random.default_rng(0)
    y = draw_state(scheme, rng)
    da, db = draw_state(scheme, rng), draw_state(scheme, rng)
    a = multisymplectic_residual(scheme, 0.0, y, (da, db))
    b = multisymplectic_residual(scheme, 0.0, y, TangentPair(da, db))
    assert np.array_equal(a.residuals, b.residuals)


def test_two_form_is_antisymmetric_in_the_pair():
    # exercised with an active time-jump term so the face pieces flip too
    scheme = preset_scheme("wave", "time-flux", 4, 2)
    rng = np.random.default_rng(21)
    y = draw_state(scheme, rng)
    da, db = draw_state(scheme, rng), draw_state(scheme, rng)
    fwd = multisymplectic_residual(scheme, 0.0, y, (da, db))
    rev = multisymplectic_residual(scheme, 0.0, y, (db, da))
    assert np.allclose(fwd.cell_quantities, -rev.cell_quantities,
                       rtol=0.0, atol=1e-13 * fwd.scale)


def test_two_form_zero_tangents_give_exact_zero():
    scheme = preset_scheme("kdv", "alternating-plus", 9, 2)
    rng = np.random.default_rng(3)
    y = draw_state(scheme, rng)
    zero = np.zeros(scheme.n_dof)
    report = multisymplectic_residual(scheme, 0.0, y, (zero, zero))
    assert report.max_residual == 0.0
    assert report.scale == 1.0


def test_two_form_detects_rank_deficient_parity():
    # even degree + even cell count leaves the central derivative singular;
    # the primitive reconstruction then violates the cellwise law
    scheme = preset_scheme("kdv", "central", 8, 2)
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(4):
        y = draw_state(scheme, rng)
        pair = TangentPair(draw_state(scheme, rng), draw_state(scheme, rng))
        worst = max(worst,
                    multisymplectic_residual(scheme, 0.0, y, pair).max_residual)
    assert worst > 1e-5


def test_two_form_detects_non_mean_free_tangents():
    scheme = preset_scheme("kdv", "central", 9, 2)
    rng = np.random.default_rng(6)
    y = draw_state(scheme, rng)
    # raw draws carry a mean component, which sits in the kernel of the
    # central derivative and breaks the per-cell (not the global) law
    pair = TangentPair(0.3 * rng.standard_normal(scheme.n_dof),
                       0.3 * rng.standard_normal(scheme.n_dof))
    report = multisymplectic_residual(scheme, 0.0, y, pair)
    assert report.max_residual > 1e-5


# ---------------------------------------------------------------------------
# cellwise energy balance
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("model_id,flux_name", ALL_PRESETS)
def test_energy_balance_closes(model_id, flux_name):
    n, k = good_size(model_id)
    scheme = preset_scheme(model_id, flux_name, n, k)
    rng = np.random.default_rng(hash((flux_name, model_id)) % 2**32)
    y = draw_state(scheme, rng)
    report = local_energy_residual(scheme, 0.0, y)
    assert report.max_residual <= TOL
    # the cell energies assemble to the flux-family global functional
    total = report.cell_quantities.sum()
    reference = general_energy(scheme, 0.0, y)
    assert abs(total - reference) <= 1e-11 * max(1.0, abs(reference))


def test_energy_assembly_identity_holds_even_where_the_law_fails():
    # bad parity: the balance breaks, the assembly identity cannot
    scheme = preset_scheme("kdv", "central", 8, 2)
    rng = np.random.default_rng(12)
    y = 0.3 * rng.standard_normal(scheme.n_dof)
    report = local_energy_residual(scheme, 0.0, y)
    assert report.max_residual > 1e-6
    total = report.cell_quantities.sum()
    reference = general_energy(scheme, 0.0, y)
    assert abs(total - reference) <= 1e-11 * max(1.0, abs(reference))


def test_energy_zero_state_is_exact():
    scheme = preset_scheme("wave", "penalized", 8, 2)
    report = local_energy_residual(scheme, 0.0, np.zeros(scheme.n_dof))
    assert report.max_residual == 0.0


@pytest.mark.parametrize("flux_name", ["central", "coupled-jumps"])
def test_energy_balance_with_forcing(flux_name):
    scheme = preset_scheme("ch", flux_name, 9, 2,
                           source=source_fn, source_rate=source_rate_fn)
    rng = np.random.default_rng(9)
    y = draw_state(scheme, rng)
    report = local_energy_residual(scheme, 0.4, y)
    assert report.max_residual <= TOL
    # and from rest, where the motion is driven purely by the forcing
    rest = local_energy_residual(scheme, 0.0, np.zeros(scheme.n_dof))
    assert rest.max_residual <= 1e-12


# ---------------------------------------------------------------------------
# closed-form hypotheses and the rotated jump matrix
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("model_id,flux_name", ALL_PRESETS)
def test_closed_form_hypotheses_hold_for_all_shipped_presets(
        model_id, flux_name):
    model = make_model(model_id, **DEFAULT_MODEL_PARAMS[model_id])
    assert corollary_hypotheses_hold(model, flux_preset(model_id, flux_name))


@pytest.mark.parametrize("model_id,flux_name", [
    ("wave", "alternating"),
    ("wave", "alternating-weak"),
    ("kdv", "alternating-plus"),
    ("kdv", "alternating-minus"),
    ("bbm", "alternating-pair"),
    ("nls", "alternating-plus"),
    ("nls", "alternating-minus"),
])
def test_alternating_presets_leave_no_energy_jump(model_id, flux_name):
    model = make_model(model_id, **DEFAULT_MODEL_PARAMS[model_id])
    rotated = energy_jump_matrix(model, flux_preset(model_id, flux_name))
    assert np.abs(rotated + rotated.T).max() <= 1e-14


def test_energy_jump_matrix_wave_penalty():
    model = make_model("wave", **DEFAULT_MODEL_PARAMS["wave"])
    rotated = energy_jump_matrix(model, {"alpha11": 1.0, "alpha33": -1.0})
    assert np.allclose(rotated, np.diag([1.0, 0.0, 1.0]), atol=1e-14)


@pytest.mark.parametrize("model_id,weight", [("bbm", 0.25), ("ch", 3.0)])
def test_energy_jump_matrix_coupled_presets(model_id, weight):
    # the surviving symmetric part couples exactly the first two components
    model = make_model(model_id, **DEFAULT_MODEL_PARAMS[model_id])
    rotated = energy_jump_matrix(model, {"alpha0": weight})
    rng = np.random.default_rng(2)
    for _ in range(5):
        j = rng.standard_normal(model.m)
        quad = 0.5 * j @ rotated @ j
        assert abs(quad - weight * j[0] * j[1]) <= 1e-13


def test_energy_jump_matrix_central_is_zero():
    model = make_model("kdv", **DEFAULT_MODEL_PARAMS["kdv"])
    assert np.abs(energy_jump_matrix(model, {})).max() == 0.0


# ---------------------------------------------------------------------------
# trajectory audit
# ---------------------------------------------------------------------------


def test_audit_constant_trajectory_has_zero_drift():
    scheme = preset_scheme("wave", "central", 4, 2)
    rng = np.random.default_rng(13)
    y = draw_state(scheme, rng)
    series = global_energy_audit(scheme, [(0.0, y), (1.0, y), (2.0, y)])
    assert np.array_equal(series.delta, np.zeros(3))
    assert series.general is not None        # identity route for this model
    assert series.max_route_gap <= 1e-11
    assert series.charge is None


def test_audit_rejects_empty_trajectory():
    scheme = preset_scheme("wave", "central", 4, 1)
    with pytest.raises(InvalidConfigError):
        global_energy_audit(scheme, [])


def march_samples(scheme, y0, t_final, dt, method="rk5"):
    samples = []
    integrate(scheme.rhs, y0, t_final, dt, method=method,
              callback=lambda i, t, y: samples.append((t, y.copy())))
    return samples


def test_audit_wave_march_conserves_energy():
    scheme = preset_scheme("wave", "penalized", 8, 2)
    u0 = project(np.sin, scheme.mesh, scheme.k).coeffs
    v0 = project(np.cos, scheme.mesh, scheme.k).coeffs
    y0 = scheme.pack(np.array(u0), np.array(v0))
    dt = 0.01 * scheme.mesh.widths.min()
    series = global_energy_audit(scheme, march_samples(scheme, y0, 0.5, dt))
    assert np.abs(series.delta).max() <= 1e-11
    assert series.max_route_gap <= 1e-10


def test_audit_nls_reports_charge():
    scheme = preset_scheme("nls", "central", 8, 1)
    p0 = project(np.sin, scheme.mesh, scheme.k).coeffs
    q0 = project(np.cos, scheme.mesh, scheme.k).coeffs
    y0 = scheme.pack(np.array(p0), np.array(q0))
    dt = 0.005 * scheme.mesh.widths.min()
    series = global_energy_audit(scheme, march_samples(scheme, y0, 0.2, dt))
    assert series.charge is not None
    assert np.abs(series.charge - series.charge[0]).max() <= 1e-10
    assert np.abs(series.delta).max() <= 1e-9


def test_audit_primitive_models_skip_route_check_by_default():
    scheme = preset_scheme("bbm", "central", 5, 2)
    rng = np.random.default_rng(17)
    y = draw_state(scheme, rng)
    series = global_energy_audit(scheme, [(0.0, y)])
    assert series.general is None
    assert series.max_route_gap is None
    # forcing the cross-check works on the validity domain (mean-free
    # marched field, invertible central derivative)
    forced = global_energy_audit(scheme, [(0.0, y)], check_general=True)
    assert forced.max_route_gap <= 1e-11


# ---------------------------------------------------------------------------
# randomized sweep
# ---------------------------------------------------------------------------


def test_sweep_case_grid():
    cases = sweep_cases()
    assert len(cases) == 50
    assert ("wave", "central", 4, 1) in cases
    assert ("kdv", "central", 5, 2) in cases
    # primitive-bearing models only run at full-rank parities
    assert not any(m == "kdv" and (n, k) == (4, 1)
                   for m, _, n, k in cases)


def test_run_sweep_everything_below_tolerance():
    rows = run_sweep(n_draws=2, seed=3)
    assert len(rows) == 100
    assert set(rows[0]) == {
        "model", "flux", "N", "k", "seed", "residual_ms", "residual_energy"}
    worst_ms = max(r["residual_ms"] for r in rows)
    worst_en = max(r["residual_energy"] for r in rows)
    assert worst_ms <= TOL
    assert worst_en <= TOL


def test_run_sweep_is_deterministic():
    a = run_sweep(n_draws=1, seed=5, models=("wave",))
    b = run_sweep(n_draws=1, seed=5, models=("wave",))
    assert len(a) == 20                       # five presets, four sizes
    assert a == b


# ---------------------------------------------------------------------------
# property test: the laws hold across the whole admissible weight box
# ---------------------------------------------------------------------------

finite = dict(allow_nan=False, allow_infinity=False)


@settings(max_examples=25, deadline=None)
@given(
    a11=st.floats(min_value=-1.0, max_value=1.0, **finite),
    a13=st.floats(min_value=-0.5, max_value=0.5, **finite),
    a33=st.floats(min_value=-1.0, max_value=1.0, **finite),
    beta=st.floats(min_value=-1.0, max_value=1.0, **finite),
)
def test_wave_laws_hold_for_arbitrary_weights(a11, a13, a33, beta):
    scheme = make_scheme("wave", 4, 1,
                         {"alpha11": a11, "alpha13": a13,
                          "alpha33": a33, "beta": beta})
    rng = np.random.default_rng(8)
    y = draw_state(scheme, rng)
    pair = TangentPair(draw_state(scheme, rng), draw_state(scheme, rng))
    ms = multisymplectic_residual(scheme, 0.0, y, pair)
    en = local_energy_residual(scheme, 0.0, y)
    assert ms.max_residual <= 1e-9
    assert en.max_residual <= 1e-9
