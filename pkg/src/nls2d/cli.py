"""Command-line front end.

Subcommands: ``generate`` (write a random datum snapshot), ``run`` (single
solver run), ``reference`` (build/cache a reference solution), ``converge``
(full convergence study from a config file), ``diagnose`` (space-time norm
estimate probes), ``fit`` (convergence order from a records CSV).

Exit codes: 0 success, 2 invalid configuration or parameters, 3 numerical
blowup, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bourgain, harness, snapshot
from .roughdata import RoughDataSpec, generate
from .spectral import l2_norm
from .splitting import BlowupError, SchemeParams, evolve, snapshot_observer

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BLOWUP = 3
EXIT_IO = 4


def _datum_args(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--s", type=float, required=required, help="smoothness dial of the datum")
    p.add_argument("--seed", type=int, required=required, help="datum seed")
    p.add_argument("--eps", type=float, default=0.01, help="extra decay margin")
    p.add_argument("--target-l2", type=float, default=0.1, help="L2 norm of the datum")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nls2d", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random datum snapshot")
    _datum_args(p, required=True)
    p.add_argument("--grid", type=int, required=True, help="lattice size N")
    p.add_argument("--out", type=Path, required=True, help="snapshot file to write")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("run", help="one solver run, writing the final snapshot")
    _datum_args(p, required=False)
    p.add_argument("--in", dest="datum_in", type=Path, help="datum snapshot (instead of --s/--seed)")
    p.add_argument("--tau", type=harness.parse_dyadic, required=True, help="time step (accepts 2^-10)")
    p.add_argument("--grid", type=int, required=True, help="lattice size N")
    p.add_argument("--T", type=harness.parse_dyadic, required=True, help="final time")
    p.add_argument("--mu", type=int, default=-1, choices=(-1, 1), help="nonlinearity sign")
    p.add_argument("--theta-override", type=harness.parse_dyadic, default=None,
                   help="filter parameter (default max(tau, 4/N^2))")
    p.add_argument("--out", type=Path, required=True, help="final snapshot file")
    p.add_argument("--snapshots", type=Path, default=None, help="directory for trajectory dumps")
    p.add_argument("--snapshot-every", type=int, default=1, help="dump stride")
    p.add_argument("--run-id", default="run", help="file name stem for trajectory dumps")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("reference", help="build and cache a reference solution")
    _datum_args(p, required=True)
    p.add_argument("--K", dest="grid_reference", type=int, required=True,
                   help="reference lattice size")
    p.add_argument("--tau-ref", type=harness.parse_dyadic, required=True, help="reference step")
    p.add_argument("--T", type=harness.parse_dyadic, required=True, help="final time")
    p.add_argument("--mu", type=int, default=-1, choices=(-1, 1))
    p.add_argument("--cache", type=Path, required=True, help="cache directory")
    p.set_defaults(func=_cmd_reference)

    p = sub.add_parser("converge", help="run a convergence study from a config file")
    p.add_argument("--config", type=Path, required=True, help="key = value config file")
    p.add_argument("--out", type=Path, default=None, help="override output_dir")
    p.add_argument("--reference-sensitivity", default=None, metavar="K:TAU[,K:TAU...]",
                   help="redo the sweep against alternative references")
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("diagnose", help="estimate probes over trajectory ensembles")
    p.add_argument("--estimate", choices=(*bourgain.ESTIMATE_IDS, "all"), default="all")
    p.add_argument("--tau", type=harness.parse_dyadic, action="append", required=True,
                   help="trajectory step; repeat for a sweep")
    p.add_argument("--trajectories", type=int, default=100, help="ensemble size per tau")
    p.add_argument("--window", type=int, default=16, help="snapshots per trajectory")
    p.add_argument("--grid", type=int, default=16, help="lattice size of the ensemble")
    p.add_argument("--seed", type=int, default=0, help="ensemble seed")
    p.add_argument("--s", type=float, default=1.0, help="smoothness exponent of the probes")
    p.add_argument("--b", type=float, default=0.6, help="time exponent, in (1/2, 1)")
    p.add_argument("--out", type=Path, required=True, help="probe report CSV")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("fit", help="convergence order from a records CSV")
    p.add_argument("--records", type=Path, required=True)
    p.add_argument("--s", type=float, default=None, help="select one smoothness value")
    p.set_defaults(func=_cmd_fit)

    return parser


def _cmd_generate(args: argparse.Namespace) -> int:
    spec = RoughDataSpec(s=args.s, seed=args.seed, n_modes=args.grid,
                         eps=args.eps, target_l2=args.target_l2)
    field = generate(spec)
    snapshot.save_field(field, args.out)
    print(f"wrote {args.out} (N={field.n_modes}, l2={l2_norm(field):.6g})")
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    if args.datum_in is not None:
        u0 = snapshot.load_field(args.datum_in)
        if u0.n_modes != args.grid:
            raise ValueError(
                f"snapshot lattice {u0.n_modes} does not match --grid {args.grid}"
            )
    else:
        if args.s is None or args.seed is None:
            raise ValueError("run needs either --in or both --s and --seed")
        u0 = generate(RoughDataSpec(s=args.s, seed=args.seed, n_modes=args.grid,
                                    eps=args.eps, target_l2=args.target_l2))
    params = SchemeParams(tau=args.tau, n_modes=args.grid, mu=args.mu,
                          t_final=args.T, theta=args.theta_override)
    observer = None
    if args.snapshots is not None:
        args.snapshots.mkdir(parents=True, exist_ok=True)
        observer = snapshot_observer(args.snapshots, args.run_id)
    final = evolve(u0, params, observer=observer, observer_every=args.snapshot_every)
    snapshot.save_field(final, args.out)
    print(f"wrote {args.out} (steps={params.n_steps}, theta={params.theta:.6g}, "
          f"l2={l2_norm(final):.6g})")
    return EXIT_OK


def _cmd_reference(args: argparse.Namespace) -> int:
    spec = RoughDataSpec(s=args.s, seed=args.seed, n_modes=args.grid_reference,
                         eps=args.eps, target_l2=args.target_l2)
    field = harness.compute_reference(spec, args.tau_ref, args.T, args.mu, args.cache)
    theta = 4.0 / (args.grid_reference**2)
    key = harness._reference_key(spec, args.tau_ref, args.T, args.mu, theta, None)
    path = harness.reference_cache_path(args.cache, key)
    print(f"reference cached at {path} (l2={l2_norm(field):.6g})")
    return EXIT_OK


def _parse_alternates(text: str) -> list[harness.ReferenceSpec]:
    out = []
    for part in text.split(","):
        k, _, tau = part.partition(":")
        if not tau:
            raise ValueError(f"expected K:TAU, got {part!r}")
        out.append(harness.ReferenceSpec(int(k), harness.parse_dyadic(tau)))
    return out


def _cmd_converge(args: argparse.Namespace) -> int:
    cfg = harness.parse_config_file(args.config)
    if args.out is not None:
        import dataclasses

        cfg = dataclasses.replace(cfg, output_dir=args.out)
    records = harness.run_study(cfg)
    print(f"{len(records)} records in {cfg.output_dir / 'records.csv'}")
    for s in cfg.s_values:
        try:
            fit = harness.fit_order(records, s=s)
        except ValueError as exc:
            print(f"s={s:g}: no fit ({exc})")
            continue
        print(f"s={s:g}: slope={fit.slope:.4f} intercept={fit.intercept:.4f} "
              f"residual={fit.residual:.4f} points={fit.n_points}")
    if args.reference_sensitivity:
        for ref, recs in harness.run_reference_sensitivity(
            cfg, _parse_alternates(args.reference_sensitivity)
        ).items():
            for s in cfg.s_values:
                try:
                    fit = harness.fit_order(recs, s=s)
                except ValueError as exc:
                    print(f"ref K={ref.n_modes} tau={ref.tau:g} s={s:g}: no fit ({exc})")
                    continue
                print(f"ref K={ref.n_modes} tau={ref.tau:g} s={s:g}: slope={fit.slope:.4f}")
    return EXIT_OK


def _cmd_diagnose(args: argparse.Namespace) -> int:
    estimates = bourgain.ESTIMATE_IDS if args.estimate == "all" else (args.estimate,)
    results = []
    for estimate_id in estimates:
        for tau in args.tau:
            ensemble = bourgain.probe_ensemble(
                args.trajectories, tau, args.grid, args.window, seed0=args.seed
            )
            result = bourgain.estimate_probe(ensemble, estimate_id, s=args.s, b=args.b)
            results.append(result)
            print(f"{estimate_id} tau={tau:g}: max_ratio={result.max_ratio:.6g} "
                  f"over {len(result.rows)} trajectories")
    bourgain.write_probe_report(results, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_fit(args: argparse.Namespace) -> int:
    records = harness.read_records(args.records)
    fit = harness.fit_order(records, s=args.s)
    print(f"slope={fit.slope!r} intercept={fit.intercept!r} "
          f"residual={fit.residual!r} points={fit.n_points}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BlowupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
