"""Command-line front end.

    msdg convergence <config>   refinement study -> convergence CSV
    msdg simulate <config>      time marching -> energy/error/snapshot CSVs
    msdg verify                 randomized structural checks -> report CSV
    msdg list-presets           shipped experiment configurations

<config> is either a JSON file path or the name of a shipped preset.
Exit codes: 0 success, 2 bad configuration, 3 divergence, 4 verification
failure.
"""

import argparse
import os
import sys

from .errors import BlowUpError, InvalidConfigError
from .harness import (
    EXPERIMENT_PRESETS,
    ExperimentConfig,
    experiment_preset,
    load_config,
    run_convergence,
    run_simulation,
    run_verification,
)
from .models import MODEL_IDS
from .presets import FLUX_PRESETS
from .verification import THEOREM_TOL

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_VERIFY = 4


def _resolve_config(ref, output_dir=None):
    if ref in EXPERIMENT_PRESETS:
        config = experiment_preset(ref)
    elif os.path.exists(ref):
        config = load_config(ref)
    else:
        raise InvalidConfigError(
            f"{ref!r} is neither a config file nor a preset name "
            "(see `msdg list-presets`)")
    if output_dir is not None:
        config.output_dir = output_dir
    return config


def _cmd_convergence(args):
    config = _resolve_config(args.config, args.output_dir)
    table = run_convergence(config)
    os.makedirs(config.output_dir, exist_ok=True)
    path = os.path.join(config.output_dir, f"{config.name}_convergence.csv")
    table.write_csv(path)
    print(f"# {config.name}: model={config.model} k={config.degree} "
          f"flux={config.flux}")
    print(f"{'N':>6} {'err_u':>13} {'order':>6} {'err_aux':>13} {'order':>6}")
    for row in table.rows:
        if row.diverged:
            print(f"{row.n_cells:>6} {'diverged':>13}")
            continue
        ou = "" if row.order_u is None else f"{row.order_u:.2f}"
        oa = "" if row.order_aux is None else f"{row.order_aux:.2f}"
        ea = "" if row.err_aux != row.err_aux else f"{row.err_aux:.4e}"
        print(f"{row.n_cells:>6} {row.err_u:>13.4e} {ou:>6} {ea:>13} {oa:>6}")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_simulate(args):
    config = _resolve_config(args.config, args.output_dir)
    try:
        result = run_simulation(config)
    except BlowUpError as exc:
        print(f"run diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    for label in sorted(result.files):
        print(f"wrote {result.files[label]}")
    if len(result.energy):
        drift = abs(result.delta).max()
        print(f"energy drift over [0, {result.final_time:g}]: "
              f"max|E_h - E_h(0)| = {drift:.3e}")
    if result.error is not None and len(result.error):
        print(f"final L2 error: {result.error[-1]:.6e}")
    return EXIT_OK


def _cmd_verify(args):
    models = (args.model,) if args.model else None
    rows, failures = run_verification(
        models=models, tol=args.tol, n_draws=args.draws, seed=args.seed,
        output=args.output)
    worst_ms = max(r["residual_ms"] for r in rows)
    worst_en = max(r["residual_energy"] for r in rows)
    print(f"{len(rows)} cases: max conservation-law residual "
          f"{worst_ms:.3e} (local 2-form), {worst_en:.3e} (local energy); "
          f"tolerance {args.tol:g}")
    if args.output:
        print(f"wrote {args.output}")
    if failures:
        print(f"{len(failures)} case(s) exceed tolerance:", file=sys.stderr)
        for r in failures[:20]:
            print(f"  {r['model']}/{r['flux']} N={r['N']} k={r['k']} "
                  f"seed={r['seed']}: ms={r['residual_ms']:.3e} "
                  f"energy={r['residual_energy']:.3e}", file=sys.stderr)
        return EXIT_VERIFY
    print("all residuals within tolerance")
    return EXIT_OK


def _cmd_list_presets(args):
    print("experiment presets (use with `msdg convergence|simulate <name>`):")
    width = max(len(name) for name in EXPERIMENT_PRESETS)
    for name, cfg in EXPERIMENT_PRESETS.items():
        print(f"  {name:<{width}}  {cfg.kind:<12} model={cfg.model} "
              f"k={cfg.degree} T={cfg.final_time:g}")
    print("\nflux presets (per model, for the 'flux' config field):")
    for model in sorted(FLUX_PRESETS):
        print(f"  {model}: {', '.join(sorted(FLUX_PRESETS[model]))}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="msdg",
        description="Multi-symplectic discontinuous-Galerkin experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convergence", help="run a mesh-refinement study")
    p.add_argument("config", help="JSON config path or preset name")
    p.add_argument("-o", "--output-dir", default=None,
                   help="override the config's output directory")
    p.set_defaults(func=_cmd_convergence)

    p = sub.add_parser("simulate", help="run a single time-marching study")
    p.add_argument("config", help="JSON config path or preset name")
    p.add_argument("-o", "--output-dir", default=None,
                   help="override the config's output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify",
                       help="randomized conservation-law residual sweep")
    p.add_argument("--model", default=None, choices=sorted(MODEL_IDS),
                   help="restrict the sweep to one model")
    p.add_argument("--tol", type=float, default=THEOREM_TOL,
                   help="residual tolerance (default %(default)g)")
    p.add_argument("--draws", type=int, default=20,
                   help="random states per case (default %(default)s)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None, help="write the report CSV here")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("list-presets", help="list shipped configurations")
    p.set_defaults(func=_cmd_list_presets)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"run diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
