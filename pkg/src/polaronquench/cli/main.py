"""``polaronquench`` command line: ground, quench, sweep, verify, oracle-check.

Exit status: 0 on success, 1 when a scientific check fails (or a run aborts
on a numerical error), 2 for usage and configuration errors.
"""

import argparse
import logging
import os
import sys
import time

from .. import chebyshev
from ..hamiltonian import dump_sector
from . import output, runner
from .config import PARSERS, WORKERS_ENV, ConfigError, load_config

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

VERBS = {
    "ground": "ground-state scan over K sectors, optional flux sweep and transition search",
    "quench": "evolve the bare state after the interaction quench and record observables",
    "sweep": "formation time over a grid of k0 and/or flux values",
    "verify": "oracle comparison plus unitarity, identity, entropy and Hermiticity checks",
    "oracle-check": "sector machinery against the dense real-space reference",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polaronquench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    for verb, text in VERBS.items():
        p = sub.add_parser(verb, help=text, description=text)
        p.add_argument("--config", "-c", help="flat key = value configuration file")
        group = p.add_argument_group("configuration overrides")
        for key in PARSERS:
            group.add_argument(f"--{key}", dest=f"cfg_{key}", metavar="VALUE")
    parser.epilog = f"The worker count can be overridden with ${WORKERS_ENV}."
    return parser


def _output_path(cfg, verb, suffix):
    name = cfg.output_name or verb
    return os.path.join(cfg.output_dir, f"{name}.{suffix}")


def _print_table(rows, stream=None):
    stream = stream or sys.stdout
    width = max((len(r[0]) for r in rows), default=10)
    for name, value, tol, ok in rows:
        stream.write(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {value:.3e}  (tol {tol:.0e})\n")


def _cmd_ground(cfg):
    res = runner.run_ground(cfg)
    path = output.write_json(_output_path(cfg, "ground", "json"), cfg, "ground", res)
    pt = res["point"]
    print(f"K_gs/pi = {pt['k_gs_over_pi']:.6g}  E/t0 = {pt['energy_over_t0']:.10g}  "
          f"N_ph = {pt['nbar_ph']:.6g}  Z = {pt['residue']:.6g}  lambda_eff = {pt['lambda_eff']:.6g}")
    if "transition" in res:
        tr = res["transition"]
        print(f"switch at phi_dc/pi = {tr['phi_dc_over_pi']:.7f}, lambda_eff = {tr['lambda_eff']:.5f}")
    print(f"wrote {path}")
    return path


def _cmd_quench(cfg):
    q = runner.run_quench(cfg)
    paths = []
    if "csv" in cfg.formats:
        paths.append(output.write_text(_output_path(cfg, "quench", "csv"),
                                       output.timeseries_text(cfg, q.records, q.metadata)))
    if "json" in cfg.formats:
        rows = [dict(zip(q.records[0].COLUMNS, r.row())) for r in q.records]
        paths.append(output.write_json(_output_path(cfg, "quench", "json"), cfg, "quench",
                                       {"metadata": q.metadata, "rows": rows}))
    if cfg.matrix_cache:
        from ..fockspace import enumerate_basis
        from ..hamiltonian import build_sector

        basis = enumerate_basis(cfg.n_sites, cfg.max_phonons)
        h = build_sector(runner.model(cfg), runner.quench_sector(cfg, basis))
        mpath = _output_path(cfg, "quench", "sector.bin")
        os.makedirs(os.path.dirname(os.path.abspath(mpath)), exist_ok=True)
        dump_sector(h, mpath)
        paths.append(mpath)
    tau_sp = q.metadata.get("tau_sp_over_tau_ec")
    print(f"tau_sp/tau_ec = {tau_sp}  max |norm-1| = {q.metadata['max_norm_drift']:.2e}  "
          f"N_C = {q.metadata['n_cheb']}")
    for p in paths:
        print(f"wrote {p}")
    return paths


def _cmd_sweep(cfg):
    rows = runner.run_sweep(cfg)
    meta = output.header(cfg, "sweep")
    text = output.csv_text(meta, runner.SWEEP_COLUMNS, ([r[c] for c in runner.SWEEP_COLUMNS] for r in rows))
    path = output.write_text(_output_path(cfg, "sweep", "csv"), text)
    failed = [r for r in rows if r["error"] and r["error"] != "not_reached"]
    print(f"{len(rows)} points, {len(failed)} failed; wrote {path}")
    return path


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    try:
        cfg = load_config(args.config, overrides)
        cfg.effective_workers
    except ConfigError as exc:
        sys.stderr.write(f"polaronquench: {exc}\n")
        return EXIT_USAGE

    started = time.time()
    try:
        if args.verb == "ground":
            path = _cmd_ground(cfg)
        elif args.verb == "quench":
            path = _cmd_quench(cfg)[0]
        elif args.verb == "sweep":
            path = _cmd_sweep(cfg)
        else:
            rows = runner.run_verify(cfg) if args.verb == "verify" else runner.run_oracle_check(cfg)
            _print_table(rows)
            failed = sum(not r[3] for r in rows)
            print(f"{len(rows) - failed}/{len(rows)} checks passed")
            return EXIT_FAIL if failed else EXIT_OK
    except chebyshev.UnitarityViolation as exc:
        sys.stderr.write(f"polaronquench: aborted: {exc}\n")
        return EXIT_FAIL
    except (runner.ScientificFailure, ArithmeticError, RuntimeError) as exc:
        sys.stderr.write(f"polaronquench: {type(exc).__name__}: {exc}\n")
        return EXIT_FAIL
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"polaronquench: {exc}\n")
        return EXIT_USAGE
    output.write_sidecar(path, started)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
