"""Config-driven experiment front end: convergence studies, long-time
simulations with energy/error observers, and structural verification sweeps,
all emitting CSV.

Output schemas (consumed by the plotting package):
  energy CSV       t,E_h,delta_E_h[,charge]
  error CSV        t,l2_error
  snapshot CSV     x,u[,aux]          (>= 10 sample points per cell)
  convergence CSV  N,err_u,order_u,err_aux,order_aux
  verification CSV model,flux,N,k,seed,residual_ms,residual_energy
"""

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .energy import charge as nls_charge
from .energy import scheme_energy
from .errors import BlowUpError, InvalidConfigError
from .exact_solutions import (
    bbm_cnoidal,
    bbm_soliton,
    ch_manufactured_solution,
    ch_periodic_peakon,
    exp_sine_wave,
    standing_composite_wave,
)
from .mesh_basis import DgFunction, build_mesh, l2_error, mean, project
from .models import MODEL_IDS, make_model
from .operators import derivative_operator, zero_mean_inverse
from .presets import FLUX_PRESETS, flux_preset
from .schemes import build_reduced_scheme
from .time_integration import INTEGRATORS, StabilizationFilter, integrate
from .verification import THEOREM_TOL, run_sweep

_TWO_PI = 2.0 * math.pi

# marched field holding the physical solution, per model
PRIMARY_FIELD = {
    "wave": "u", "kdv": "u", "bbm": "u",
    "ch": "u", "nls": "p", "bbm_kdv": "u",
}

# auxiliary quantity recorded next to u in tables/snapshots:
#   "w"  -> the reconstructed derivative-type component (wave)
#   "du" -> the central broken derivative of u_h (primitive models)
AUX_KIND = {
    "wave": "w", "kdv": "du", "bbm": "du",
    "ch": "du", "nls": None, "bbm_kdv": "du",
}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """One experiment, fully described; JSON round-trips via to/from_dict."""

    name: str
    kind: str                      # "convergence" | "simulation"
    model: str
    model_params: dict = field(default_factory=dict)
    domain: tuple = (0.0, _TWO_PI)
    n_cells: int = 0               # simulation runs
    n_list: tuple = ()             # convergence refinement sequence
    mesh_pattern: str = "uniform"
    degree: int = 1
    flux: object = field(default_factory=dict)   # weight dict or preset name
    integrator: str = "rk4"
    dt_ratio: float = 0.0          # dt = dt_ratio * smallest cell width
    dt_absolute: float = 0.0       # overrides dt_ratio when positive
    final_time: float = 1.0
    initial: dict = field(default_factory=dict)  # {"kind": ..., params...}
    energy_stride: int = 0         # steps between energy samples, 0 = off
    error_stride: int = 0
    snapshot_times: tuple = ()
    snapshot_points_per_cell: int = 12
    stage_filter: dict = None      # {"strength": s, "exponent": p} or None
    initial_projection: str = "l2"  # or "derivative_matched"
    output_dir: str = "."
    seed: int = 0

    def __post_init__(self):
        self.domain = tuple(float(v) for v in self.domain)
        self.n_list = tuple(int(n) for n in self.n_list)
        self.snapshot_times = tuple(float(t) for t in self.snapshot_times)
        self.model_params = dict(self.model_params)
        self.initial = dict(self.initial)
        if isinstance(self.flux, dict):
            self.flux = dict(self.flux)

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["domain"] = list(self.domain)
        out["n_list"] = list(self.n_list)
        out["snapshot_times"] = list(self.snapshot_times)
        return out

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise InvalidConfigError("experiment config must be a mapping")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidConfigError(
                f"unknown config fields: {sorted(unknown)}")
        missing = {"name", "kind", "model"} - set(data)
        if missing:
            raise InvalidConfigError(
                f"config is missing required fields: {sorted(missing)}")
        config = cls(**data)
        config.validate()
        return config

    def validate(self):
        if self.kind not in ("convergence", "simulation"):
            raise InvalidConfigError(
                f"unknown experiment kind {self.kind!r}")
        if self.model not in MODEL_IDS:
            raise InvalidConfigError(
                f"unknown model {self.model!r}; choose from {sorted(MODEL_IDS)}")
        if isinstance(self.flux, str):
            flux_preset(self.model, self.flux)     # existence check
        elif not isinstance(self.flux, dict):
            raise InvalidConfigError(
                "flux must be a weight dictionary or a preset name")
        if self.integrator not in INTEGRATORS:
            raise InvalidConfigError(
                f"unknown integrator {self.integrator!r}; "
                f"choose from {sorted(INTEGRATORS)}")
        if self.mesh_pattern not in ("uniform", "two_one_alternating"):
            raise InvalidConfigError(
                f"unknown mesh pattern {self.mesh_pattern!r}")
        if self.degree < 0:
            raise InvalidConfigError("degree must be >= 0")
        if not self.domain[1] > self.domain[0]:
            raise InvalidConfigError("domain must have positive length")
        if self.dt_absolute <= 0.0 and self.dt_ratio <= 0.0:
            raise InvalidConfigError(
                "set dt_ratio (dt = ratio * smallest cell) or dt_absolute")
        if self.dt_absolute > 0.0 and self.dt_ratio > 0.0:
            raise InvalidConfigError(
                "dt_ratio and dt_absolute are mutually exclusive")
        if self.final_time <= 0.0:
            raise InvalidConfigError("final_time must be positive")
        if self.initial.get("kind") not in INITIAL_CONDITIONS:
            raise InvalidConfigError(
                f"unknown initial condition {self.initial.get('kind')!r}; "
                f"choose from {sorted(INITIAL_CONDITIONS)}")
        if self.kind == "convergence":
            _check_refinement_sequence(self.n_list)
        else:
            if self.n_cells <= 0:
                raise InvalidConfigError(
                    "simulation configs need n_cells > 0")
        for t in self.snapshot_times:
            if t < 0.0 or t > self.final_time + 1e-12:
                raise InvalidConfigError(
                    f"snapshot time {t:g} outside [0, final_time]")
        if self.stage_filter is not None and not isinstance(
                self.stage_filter, dict):
            raise InvalidConfigError(
                "stage_filter must be a dict of filter options")
        if self.initial_projection not in ("l2", "derivative_matched"):
            raise InvalidConfigError(
                f"unknown initial projection {self.initial_projection!r}")


def _check_refinement_sequence(n_list):
    if len(n_list) < 2:
        raise InvalidConfigError(
            "convergence needs at least two mesh sizes")
    for a, b in zip(n_list, n_list[1:]):
        if a <= 0 or b <= 0:
            raise InvalidConfigError("mesh sizes must be positive")
        # doubling sequence, tolerating the odd-N variants (41, 81, 161, ...)
        if abs(b - 2 * a) > 1:
            raise InvalidConfigError(
                f"refinement sequence must roughly double: {a} -> {b}")


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"malformed config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def save_config(config, path):
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# initial conditions
# ---------------------------------------------------------------------------


@dataclass
class InitialData:
    fields: dict                 # marched-field name -> f(x)
    exact: object = None         # exact(x, t) of the primary field
    exact_dx: object = None      # its spatial derivative
    source: object = None        # forcing g(t, x) (Camassa-Holm only)
    source_rate: object = None


def _initial_exp_sine(params, model_params, domain):
    u0, ut0, exact = exp_sine_wave()

    def exact_dx(x, t):
        return np.cos(x + t) * np.exp(np.sin(x + t))

    return InitialData({"u": u0, "v": ut0}, exact, exact_dx)


def _initial_standing_composite(params, model_params, domain):
    u0, ut0, exact = standing_composite_wave()

    def exact_dx(x, t):
        return -0.5 * (np.cos(np.cos(x + t)) * np.sin(x + t)
                       + np.cos(np.cos(x - t)) * np.sin(x - t))

    return InitialData({"u": u0, "v": ut0}, exact, exact_dx)


def _initial_bbm_cnoidal(params, model_params, domain):
    m = float(params.get("m", 0.9))
    x0 = float(params.get("x0", 0.0))
    if "sigma" not in model_params:
        raise InvalidConfigError("cnoidal data needs model_params['sigma']")
    sigma = float(model_params["sigma"])
    exact, c, _period = bbm_cnoidal(m, sigma, x0)
    width = math.sqrt(4.0 * (2.0 * m - 1.0) * sigma)
    amplitude = 3.0 * m * c / (2.0 * m - 1.0)

    def exact_dx(x, t):
        arg = (np.asarray(x, dtype=float) - c * t - x0) / width
        sn, cn, dn, _ = special.ellipj(arg, m)
        return -2.0 * amplitude * cn * sn * dn / width

    return InitialData({"u": lambda x: exact(x, 0.0)}, exact, exact_dx)


def _initial_bbm_solitons(params, model_params, domain):
    waves = params.get("waves")
    if not waves:
        raise InvalidConfigError("soliton data needs a non-empty 'waves' list")
    if "sigma" not in model_params:
        raise InvalidConfigError("soliton data needs model_params['sigma']")
    sigma = float(model_params["sigma"])
    profiles = [bbm_soliton(float(c), float(x0), sigma) for c, x0 in waves]

    def u0(x):
        return sum(p(x, 0.0) for p in profiles)

    if len(profiles) > 1:
        return InitialData({"u": u0})     # no closed form through collisions
    (c, x0), = ((float(c), float(x0)) for c, x0 in waves)
    width = 2.0 * math.sqrt(sigma)

    def exact_dx(x, t):
        arg = (np.asarray(x, dtype=float) - x0 - c * t) / width
        return -6.0 * c * np.tanh(arg) / np.cosh(arg) ** 2 / width

    return InitialData({"u": u0}, profiles[0], exact_dx)


def _initial_ch_peakons(params, model_params, domain):
    waves = params.get("waves")
    if not waves:
        raise InvalidConfigError("peakon data needs a non-empty 'waves' list")
    period = domain[1] - domain[0]
    profiles = [
        ch_periodic_peakon(period, float(c), float(x0)) for c, x0 in waves]

    def u0(x):
        return sum(p(x, 0.0) for p in profiles)

    exact = profiles[0] if len(profiles) == 1 else None
    return InitialData({"u": u0}, exact)   # corner profile: no derivative


def _initial_ch_manufactured(params, model_params, domain):
    exact, source, source_rate = ch_manufactured_solution()
    return InitialData(
        {"u": lambda x: exact(x, 0.0)},
        exact,
        exact_dx=lambda x, t: np.cos(x + t),
        source=source,
        source_rate=source_rate,
    )


def _initial_nls_plane_wave(params, model_params, domain):
    omega = float(model_params.get("alpha", 1.0)) - 1.0

    def exact(x, t):
        return np.sin(x - omega * t)

    def exact_dx(x, t):
        return np.cos(x - omega * t)

    return InitialData(
        {"p": lambda x: np.sin(x), "q": lambda x: np.cos(x)},
        exact, exact_dx)


INITIAL_CONDITIONS = {
    "exp_sine": _initial_exp_sine,
    "standing_composite": _initial_standing_composite,
    "bbm_cnoidal": _initial_bbm_cnoidal,
    "bbm_solitons": _initial_bbm_solitons,
    "ch_peakons": _initial_ch_peakons,
    "ch_manufactured": _initial_ch_manufactured,
    "nls_plane_wave": _initial_nls_plane_wave,
}


def build_initial(config):
    params = dict(config.initial)
    kind = params.pop("kind", None)
    try:
        builder = INITIAL_CONDITIONS[kind]
    except KeyError:
        raise InvalidConfigError(
            f"unknown initial condition {kind!r}") from None
    return builder(params, config.model_params, config.domain)


# ---------------------------------------------------------------------------
# run assembly
# ---------------------------------------------------------------------------


def resolve_flux(config):
    if isinstance(config.flux, str):
        return flux_preset(config.model, config.flux)
    return dict(config.flux)


def build_run(config, n_cells):
    """Scheme, packed initial state and initial-data bundle for one mesh."""
    model = make_model(config.model, **config.model_params)
    mesh = build_mesh(config.domain, n_cells, pattern=config.mesh_pattern)
    init = build_initial(config)
    options = {}
    if init.source is not None:
        options["source"] = init.source
        options["source_rate"] = init.source_rate
    scheme = build_reduced_scheme(
        model, mesh, config.degree, flux=resolve_flux(config), **options)
    coeffs = []
    for name in scheme.marched:
        try:
            f = init.fields[name]
        except KeyError:
            raise InvalidConfigError(
                f"initial condition {config.initial.get('kind')!r} does not "
                f"provide marched field {name!r} of model {config.model!r}"
            ) from None
        coeffs.append(np.array(project(f, mesh, config.degree, scheme.quad).coeffs))
    if config.initial_projection == "derivative_matched":
        coeffs[0] = _derivative_matched_projection(config, scheme, init)
    return scheme, scheme.pack(*coeffs), init


def _derivative_matched_projection(config, scheme, init):
    """Initialize the primary field so its one-sided broken derivative starts
    at the projection of the exact derivative (keeps the reconstructed
    derivative-type component at optimal order from t = 0)."""
    if config.model != "wave":
        raise InvalidConfigError(
            "derivative-matched projection is implemented for the wave "
            "model only")
    if init.exact_dx is None:
        raise InvalidConfigError(
            "derivative-matched projection needs an initial condition with "
            "a known spatial derivative")
    alpha = scheme.flux.get("alpha13", 0.0)
    if alpha == 0.0:
        raise InvalidConfigError(
            "derivative-matched projection needs a nonzero alternating "
            "weight (the central broken derivative is not invertible)")
    mesh, k = scheme.mesh, scheme.k
    op = derivative_operator(mesh, k, -alpha)
    solver = zero_mean_inverse(op, mesh)
    target = np.array(
        project(lambda x: init.exact_dx(x, 0.0), mesh, k, scheme.quad).coeffs)
    u0 = project(init.fields[scheme.marched[0]], mesh, k, scheme.quad)
    return solver.solve(target) + mean(u0) * scheme._ones


def time_step(config, mesh):
    if config.dt_absolute > 0.0:
        return float(config.dt_absolute)
    return float(config.dt_ratio * mesh.widths.min())


def _aux_function(scheme, y, t, model_id):
    """DgFunction of the recorded auxiliary quantity, or None."""
    kind = AUX_KIND[model_id]
    if kind is None:
        return None
    if kind == "w":
        coeffs = scheme.reconstruct(t, y)["w"]
    else:
        u = scheme.unpack(y)[0]
        d0 = derivative_operator(scheme.mesh, scheme.k, 0.0)
        coeffs = d0.apply(u)
    return DgFunction(scheme.mesh, scheme.k, coeffs)


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------


def compute_order(errors, ns):
    """Observed orders log(e_{i-1}/e_i) / log(N_i/N_{i-1})."""
    errors = np.asarray(errors, dtype=float)
    ns = np.asarray(ns, dtype=float)
    if errors.shape != ns.shape or errors.ndim != 1 or len(errors) < 2:
        raise InvalidConfigError(
            "compute_order needs matching 1D sequences of length >= 2")
    if np.any(errors <= 0.0):
        raise InvalidConfigError("errors must be positive")
    return np.log(errors[:-1] / errors[1:]) / np.log(ns[1:] / ns[:-1])


@dataclass
class ConvergenceRow:
    n_cells: int
    err_u: float = math.nan
    err_aux: float = math.nan
    order_u: float = None
    order_aux: float = None
    diverged: bool = False


@dataclass
class ConvergenceTable:
    config: ExperimentConfig
    rows: list

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["N", "err_u", "order_u", "err_aux", "order_aux"])
            for row in self.rows:
                writer.writerow([
                    row.n_cells,
                    _fmt_err(row.err_u),
                    _fmt_order(row.order_u),
                    _fmt_err(row.err_aux),
                    _fmt_order(row.order_aux),
                ])
        return path


def _fmt_err(v):
    return "nan" if not math.isfinite(v) else f"{v:.16e}"


def _fmt_order(v):
    return "" if v is None else f"{v:.4f}"


def run_convergence(config):
    """March every mesh in the refinement sequence and tabulate L2 errors of
    the primary field and the per-model auxiliary.  A blow-up marks its row
    diverged and the study continues."""
    config.validate()
    if config.kind != "convergence":
        raise InvalidConfigError(
            f"config {config.name!r} is not a convergence study")
    init_probe = build_initial(config)
    if init_probe.exact is None:
        raise InvalidConfigError(
            "convergence study needs an initial condition with an exact "
            "solution")
    rows = []
    for n_cells in config.n_list:
        scheme, y0, init = build_run(config, n_cells)
        dt = time_step(config, scheme.mesh)
        filt = (StabilizationFilter(scheme, **config.stage_filter)
                if config.stage_filter else None)
        row = ConvergenceRow(n_cells=n_cells)
        try:
            y = integrate(scheme.rhs, y0, config.final_time, dt,
                          method=config.integrator, filt=filt)
        except BlowUpError:
            row.diverged = True
            rows.append(row)
            continue
        T = config.final_time
        u = DgFunction(scheme.mesh, scheme.k, scheme.unpack(y)[0])
        row.err_u = l2_error(u, lambda x: init.exact(x, T))
        aux = _aux_function(scheme, y, T, config.model)
        if aux is not None and init.exact_dx is not None:
            row.err_aux = l2_error(aux, lambda x: init.exact_dx(x, T))
        rows.append(row)
    for prev, row in zip(rows, rows[1:]):
        ratio = math.log(row.n_cells / prev.n_cells)
        if math.isfinite(prev.err_u) and math.isfinite(row.err_u):
            row.order_u = math.log(prev.err_u / row.err_u) / ratio
        if math.isfinite(prev.err_aux) and math.isfinite(row.err_aux):
            row.order_aux = math.log(prev.err_aux / row.err_aux) / ratio
    return ConvergenceTable(config=config, rows=rows)


# ---------------------------------------------------------------------------
# simulations
# ---------------------------------------------------------------------------


@dataclass
class SimulationResult:
    config: ExperimentConfig
    files: dict                   # label -> written path
    t: np.ndarray                 # energy sample times
    energy: np.ndarray
    delta: np.ndarray
    charge: np.ndarray = None
    error_t: np.ndarray = None
    error: np.ndarray = None
    final_state: np.ndarray = None
    final_time: float = 0.0
    scheme: object = None


def run_simulation(config):
    """March one configured run, recording energy/error series and solution
    snapshots.  On blow-up the partial series are flushed to disk before the
    error propagates (the command line maps it to the divergence exit code)."""
    config.validate()
    if config.kind != "simulation":
        raise InvalidConfigError(
            f"config {config.name!r} is not a simulation")
    scheme, y0, init = build_run(config, config.n_cells)
    dt = time_step(config, scheme.mesh)
    filt = (StabilizationFilter(scheme, **config.stage_filter)
            if config.stage_filter else None)
    os.makedirs(config.output_dir, exist_ok=True)

    is_nls = config.model == "nls"
    energy_rows = []      # (t, E, [charge])
    error_rows = []       # (t, err)
    files = {}

    def sample(t, y):
        if config.energy_stride:
            values = [t, scheme_energy(scheme, t, y)]
            if is_nls:
                values.append(nls_charge(scheme, y))
            energy_rows.append(values)
        if config.error_stride and init.exact is not None:
            u = DgFunction(scheme.mesh, scheme.k, scheme.unpack(y)[0])
            error_rows.append((t, l2_error(u, lambda x: init.exact(x, t))))

    def snapshot(t, y):
        u = DgFunction(scheme.mesh, scheme.k, scheme.unpack(y)[0])
        xs, uvals = u.sample(config.snapshot_points_per_cell)
        columns = [("x", xs), ("u", uvals)]
        aux = _aux_function(scheme, y, t, config.model)
        if aux is not None:
            columns.append((AUX_KIND[config.model], aux.sample(
                config.snapshot_points_per_cell)[1]))
        path = os.path.join(
            config.output_dir, f"{config.name}_snapshot_t{t:g}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([name for name, _ in columns])
            for values in zip(*(vals for _, vals in columns)):
                writer.writerow([f"{v:.16e}" for v in values])
        files[f"snapshot_t{t:g}"] = path

    stride = max(config.energy_stride, 1)
    err_stride = max(config.error_stride, 1)
    state = {"step": 0, "last_sampled": None, "y": y0}

    def callback(i, t, y):
        if i == 0 and state["last_sampled"] is not None:
            return                      # segment restart: already sampled
        step = state["step"]
        if i > 0:
            step += 1
            state["step"] = step
        due = (config.energy_stride and step % stride == 0) or (
            config.error_stride and step % err_stride == 0)
        if due or step == 0:
            sample(t, y)
            state["last_sampled"] = t
        state["y"] = y

    # integrate segment by segment so snapshots land on their exact times
    marks = sorted({round(t, 12) for t in config.snapshot_times})
    if marks and abs(marks[0]) < 1e-12:
        snapshot(0.0, y0)
        marks = marks[1:]
    segments = marks + ([config.final_time]
                        if not marks or marks[-1] < config.final_time - 1e-12
                        else [])
    diverged = None
    t_now, y = 0.0, y0
    for t_end in segments:
        try:
            y = integrate(scheme.rhs, y, t_end, dt,
                          method=config.integrator, t0=t_now,
                          filt=filt, callback=callback)
        except BlowUpError as exc:
            diverged = exc
            break
        t_now = t_end
        if any(abs(t_now - m) < 1e-12 for m in marks):
            snapshot(t_now, y)

    # final sample at the exact end point, if the stride missed it
    if diverged is None and state["last_sampled"] != t_now:
        sample(t_now, y)

    if config.energy_stride and energy_rows:
        path = os.path.join(config.output_dir, f"{config.name}_energy.csv")
        header = ["t", "E_h", "delta_E_h"] + (["charge"] if is_nls else [])
        e0 = energy_rows[0][1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for values in energy_rows:
                out = [f"{values[0]:.12g}", f"{values[1]:.16e}",
                       f"{values[1] - e0:.16e}"]
                if is_nls:
                    out.append(f"{values[2]:.16e}")
                writer.writerow(out)
        files["energy"] = path
    if config.error_stride and error_rows:
        path = os.path.join(config.output_dir, f"{config.name}_error.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "l2_error"])
            for t, err in error_rows:
                writer.writerow([f"{t:.12g}", f"{err:.16e}"])
        files["error"] = path

    if diverged is not None:
        raise diverged

    e_arr = np.asarray([row[1] for row in energy_rows])
    return SimulationResult(
        config=config,
        files=files,
        t=np.asarray([row[0] for row in energy_rows]),
        energy=e_arr,
        delta=e_arr - e_arr[0] if len(e_arr) else e_arr,
        charge=(np.asarray([row[2] for row in energy_rows])
                if is_nls and config.energy_stride else None),
        error_t=np.asarray([t for t, _ in error_rows]),
        error=np.asarray([err for _, err in error_rows]),
        final_state=y,
        final_time=t_now,
        scheme=scheme,
    )


# ---------------------------------------------------------------------------
# verification sweep front end
# ---------------------------------------------------------------------------


def run_verification(models=None, tol=THEOREM_TOL, n_draws=20, seed=0,
                     output=None):
    """Randomized structural sweep; returns (rows, failures)."""
    if tol <= 0.0:
        raise InvalidConfigError("tolerance must be positive")
    if models is not None:
        unknown = set(models) - set(MODEL_IDS)
        if unknown:
            raise InvalidConfigError(f"unknown models: {sorted(unknown)}")
    rows = run_sweep(n_draws=n_draws, seed=seed, models=models)
    if output:
        with open(output, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", "flux", "N", "k", "seed",
                             "residual_ms", "residual_energy"])
            for r in rows:
                writer.writerow([
                    r["model"], r["flux"], r["N"], r["k"], r["seed"],
                    f"{r['residual_ms']:.16e}",
                    f"{r['residual_energy']:.16e}",
                ])
    failures = [r for r in rows
                if r["residual_ms"] > tol or r["residual_energy"] > tol]
    return rows, failures


# ---------------------------------------------------------------------------
# shipped experiment presets
# ---------------------------------------------------------------------------


_RK_BY_DEGREE = {0: "euler", 1: "heun", 2: "ssprk3", 3: "rk4", 4: "rk5"}

_CNOIDAL_M = 0.9
_CNOIDAL_SIGMA = 1e-2
_, _, _CNOIDAL_PERIOD = bbm_cnoidal(_CNOIDAL_M, _CNOIDAL_SIGMA)
_SOLITON_SIGMA = (11.0 / 100.0) ** 2


def _wave_table1(k, pattern="uniform"):
    tag = "" if pattern == "uniform" else "-nonuniform"
    return ExperimentConfig(
        name=f"wave-table1-k{k}{tag}",
        kind="convergence",
        model="wave",
        model_params={"V": "zero"},
        n_list=(40, 80, 160),
        mesh_pattern=pattern,
        degree=k,
        flux={},
        integrator=_RK_BY_DEGREE[k],
        dt_ratio=0.01,
        final_time=0.5,
        initial={"kind": "exp_sine"},
    )


def _wave_table2(tag, flux, k=1, pattern="uniform", projection="l2"):
    return ExperimentConfig(
        name=f"wave-table2-{tag}",
        kind="convergence",
        model="wave",
        model_params={"V": "zero"},
        n_list=(40, 80, 160, 320),
        mesh_pattern=pattern,
        degree=k,
        flux=flux,
        integrator=_RK_BY_DEGREE[k],
        dt_ratio=0.01,
        final_time=0.5,
        initial={"kind": "exp_sine"},
        initial_projection=projection,
    )


def _bbm_table3(tag, flux, k, n_list, pattern="uniform"):
    return ExperimentConfig(
        name=f"bbm-table3-{tag}",
        kind="convergence",
        model="bbm",
        model_params={"sigma": _CNOIDAL_SIGMA, "Vcubic": 1.0 / 6.0},
        domain=(0.0, _CNOIDAL_PERIOD),
        n_list=n_list,
        mesh_pattern=pattern,
        degree=k,
        flux=flux,
        integrator=_RK_BY_DEGREE[k],
        dt_ratio=0.5,
        final_time=1.0,
        initial={"kind": "bbm_cnoidal", "m": _CNOIDAL_M},
    )


def _ch_table4(tag, flux, k):
    return ExperimentConfig(
        name=f"ch-table4-{tag}",
        kind="convergence",
        model="ch",
        n_list=(40, 80, 160, 320),
        degree=k,
        flux=flux,
        integrator=_RK_BY_DEGREE[k],
        dt_ratio=0.01,
        final_time=1.0,
        initial={"kind": "ch_manufactured"},
    )


def _bbm_scenario(tag, waves, final_time, domain, n_cells, snapshots):
    return ExperimentConfig(
        name=f"bbm-{tag}",
        kind="simulation",
        model="bbm",
        model_params={"sigma": _SOLITON_SIGMA, "Vcubic": 1.0 / 6.0},
        domain=domain,
        n_cells=n_cells,
        degree=4,
        flux={},
        integrator="rk5",
        dt_ratio=0.05,
        final_time=final_time,
        initial={"kind": "bbm_solitons", "waves": waves},
        energy_stride=100,
        snapshot_times=snapshots,
    )


def _ch_scenario(tag, waves, final_time, snapshots):
    return ExperimentConfig(
        name=f"ch-{tag}",
        kind="simulation",
        model="ch",
        domain=(0.0, 30.0),
        n_cells=400,
        degree=4,
        flux={},
        integrator="ssprk3",
        dt_ratio=0.01,
        final_time=final_time,
        initial={"kind": "ch_peakons", "waves": waves},
        energy_stride=200,
        snapshot_times=snapshots,
        stage_filter={"strength": 1000.0, "exponent": 8},
    )


def _spread(final_time, count):
    return tuple(round(final_time * i / count, 10) for i in range(count + 1))


EXPERIMENT_PRESETS = {}


def _register(config):
    EXPERIMENT_PRESETS[config.name] = config
    return config


# Tables 1-2: second-order wave equation with the exp(sin) traveling profile
for _k in (1, 2, 3):
    _register(_wave_table1(_k))
_register(_wave_table1(2, pattern="two_one_alternating"))
_register(_wave_table2("penalized-k1", {"alpha11": 1.0, "alpha33": -1.0}))
_register(_wave_table2("alternating-weak-k1", {"alpha13": 0.125},
                          projection="derivative_matched"))
_register(_wave_table2("dissipative-k1", {"alpha11": 1.0}))
_register(_wave_table2("antidissipative-k1", {"alpha33": -1.0}))
_register(_wave_table2("time-flux-k1", {"beta": 1.0}))

# Table 3: BBM cnoidal wave on one spatial period
_register(_bbm_table3("central-k2", {}, 2, (40, 80, 160, 320)))
_register(_bbm_table3("central-k2-nonuniform", {}, 2, (40, 80, 160, 320),
                      pattern="two_one_alternating"))
_register(_bbm_table3("pair-k2-odd", {"alpha1": 0.5}, 2, (41, 81, 161, 321)))
_register(_bbm_table3("coupled-k1", {"alpha0": 0.25}, 1,
                      (40, 80, 160, 320, 640)))
_register(_bbm_table3("coupled-k2", {"alpha0": 0.25}, 2,
                      (40, 80, 160, 320, 640)))

# Table 4: forced Camassa-Holm with the sin(x+t) reference
_register(_ch_table4("central-k2", {}, 2))
_register(_ch_table4("coupled-k1", {"alpha0": 3.0}, 1))
_register(_ch_table4("coupled-k2", {"alpha0": 3.0}, 2))

# long-time energy audits
_register(ExperimentConfig(
    name="wave-longtime",
    kind="simulation",
    model="wave",
    model_params={"V": "zero"},
    n_cells=100,
    degree=3,
    flux={},
    integrator="rk5",
    dt_ratio=0.01,
    final_time=200.0 * math.pi,
    initial={"kind": "standing_composite"},
    energy_stride=200,
    error_stride=200,
))
_register(ExperimentConfig(
    name="bbm-energy-longtime",
    kind="simulation",
    model="bbm",
    model_params={"sigma": _CNOIDAL_SIGMA, "Vcubic": 1.0 / 6.0},
    domain=(0.0, _CNOIDAL_PERIOD),
    n_cells=10,
    degree=2,
    flux={},
    integrator="rk5",
    dt_ratio=0.01,
    final_time=5000.0,
    initial={"kind": "bbm_cnoidal", "m": _CNOIDAL_M},
    energy_stride=1000,
    error_stride=1000,
    snapshot_times=(200.0, 1000.0, 3000.0, 5000.0),
))
_register(ExperimentConfig(
    name="nls-charge",
    kind="simulation",
    model="nls",
    model_params={"alpha": 2.0},
    n_cells=32,
    degree=2,
    flux={},
    integrator="rk4",
    dt_ratio=0.001,
    final_time=1.0,
    initial={"kind": "nls_plane_wave"},
    energy_stride=50,
    error_stride=50,
))

# Table 5: BBM soliton scenarios (resolution chosen to resolve the
# 2 sqrt(sigma) = 0.22 soliton width; the reference setups leave it open)
_register(_bbm_scenario(
    "single-soliton", [[0.2, -2.0]], 20.0, (-5.0, 5.0), 128, _spread(20, 20)))
_register(_bbm_scenario(
    "two-soliton", [[0.75, -12.0], [0.25, -6.0]], 30.0, (-15.0, 15.0), 384,
    _spread(30, 15)))
_register(_bbm_scenario(
    "four-soliton", [[0.25, -1.0], [0.5, -3.0], [0.75, -5.0], [1.25, -13.0]],
    20.0, (-15.0, 15.0), 384, _spread(20, 10)))

# Table 6: Camassa-Holm peakon scenarios
_register(_ch_scenario("single-peakon", [[1.0, -10.0]], 20.0, _spread(20, 10)))
_register(_ch_scenario("two-peakon", [[2.0, -5.0], [1.0, 5.0]], 18.0,
                       _spread(18, 9)))
_register(_ch_scenario("three-peakon", [[2.0, -5.0], [1.0, -3.0], [0.8, -1.0]],
                       6.0, _spread(6, 6)))
_register(_ch_scenario("peakon-antipeakon", [[1.0, -2.0], [-1.0, 2.0]], 10.0,
                       _spread(10, 10)))


def experiment_preset(name):
    """A fresh copy of a shipped experiment config."""
    try:
        template = EXPERIMENT_PRESETS[name]
    except KeyError:
        raise InvalidConfigError(
            f"unknown experiment preset {name!r}; see `msdg list-presets`"
        ) from None
    return ExperimentConfig.from_dict(template.to_dict())
