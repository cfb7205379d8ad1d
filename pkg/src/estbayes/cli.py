"""Command-line driver.

    estbayes run <experiment_id> [--config PATH] [--seed N] [--set key=value ...] [--out DIR]

Exit codes: 0 success (even when checks fail; see ``summary.txt``), 1 unknown
experiment id, 2 malformed configuration, 3 unwritable output directory.
Pass ``--strict`` to exit with 4 when any check fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import report
from .config import ConfigError, RunConfig
from .experiments import EXPERIMENTS, streams
from .plotting import gnuplot_script, render_png

EXIT_UNKNOWN_ID = 1
EXIT_BAD_CONFIG = 2
EXIT_UNWRITABLE = 3
EXIT_CHECKS_FAILED = 4

log = logging.getLogger("estbayes")


class OutputError(OSError):
    pass


def _prepare_out(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OutputError(f"cannot write to {path}: {exc}") from exc


def write_outputs(cfg: RunConfig, result, out_dir: Path, runtime_s: float, plots: bool = True) -> list[str]:
    """Write every artifact of a finished experiment; returns file names."""
    written = []

    def path(name):
        written.append(name)
        return out_dir / name

    path("manifest.ini").write_text(cfg.manifest_text())
    files = {}
    for name, table in result.tables.items():
        files[name] = f"{name}.csv"
        report.write_table(path(files[name]), table.header, table.rows)
    for name, values in result.reports.items():
        report.write_report(path(f"{name}_report.txt"), values, title=f"{cfg.experiment} {name}")
    for name, writer in result.files.items():
        writer(path(name))
    for plot in result.plots:
        path(f"{plot.name}.gp").write_text(gnuplot_script(plot, result.tables, files))
        if plots and render_png(plot, result.tables, out_dir / f"{plot.name}.png"):
            written.append(f"{plot.name}.png")
    path("summary.txt").write_text(summary_text(cfg, result, runtime_s))
    return written


def summary_text(cfg: RunConfig, result, runtime_s: float) -> str:
    lines = [f"experiment={cfg.experiment}", f"seed={cfg.seed}", f"runtime_s={runtime_s:.2f}"]
    for c in result.checks:
        lines.append(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    n_fail = sum(not c.passed for c in result.checks)
    lines.append(f"result={'PASS' if n_fail == 0 else 'FAIL'} ({len(result.checks) - n_fail}/{len(result.checks)} checks)")
    return "\n".join(lines) + "\n"


def run(experiment: str, config_path=None, overrides=(), seed=None, out_dir=None, plots: bool = True):
    """Run one experiment and write its artifacts.

    Returns (exit_code, result). Raises nothing for the documented failure
    modes; they map to exit codes instead.
    """
    if experiment not in EXPERIMENTS:
        log.error("unknown experiment id %r; choose from %s", experiment, ", ".join(EXPERIMENTS))
        return EXIT_UNKNOWN_ID, None
    try:
        cfg = RunConfig.build(experiment, config_path, overrides, seed, out_dir)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_BAD_CONFIG, None
    out = Path(out_dir) if out_dir is not None else Path("runs") / experiment
    try:
        _prepare_out(out)
    except OutputError as exc:
        log.error("%s", exc)
        return EXIT_UNWRITABLE, None

    section = experiment
    limit = None
    if cfg.parser.has_option(section, "max_runtime_s"):
        limit = cfg.get_float(section, "max_runtime_s")
    t0 = time.perf_counter()
    try:
        result = EXPERIMENTS[experiment](cfg, streams(cfg.seed))
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_BAD_CONFIG, None
    runtime = time.perf_counter() - t0
    if limit is not None:
        result.check("runtime", runtime < limit, f"{runtime:.1f} s, limit {limit:g} s")
    try:
        write_outputs(cfg, result, out, runtime, plots)
    except OSError as exc:
        log.error("cannot write output: %s", exc)
        return EXIT_UNWRITABLE, result
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    print(f"wrote {out}")
    return 0, result


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="estbayes", description="Reproduce the estimator and qubit experiments in simulation.")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("experiment_id", help="one of: " + ", ".join(EXPERIMENTS))
    r.add_argument("--config", help="INI file layered over the shipped defaults")
    r.add_argument("--seed", type=int, help="64-bit unsigned seed (overrides run.seed)")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    r.add_argument("--out", help="output directory (default runs/<experiment_id>)")
    r.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
    r.add_argument("--strict", action="store_true", help="exit 4 if any check fails")
    sub.add_parser("list", help="list experiment ids")
    sub.add_parser("defaults", help="print the default configuration")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print("\n".join(EXPERIMENTS))
        return 0
    if args.command == "defaults":
        from .config import defaults_text

        sys.stdout.write(defaults_text())
        return 0
    code, result = run(args.experiment_id, args.config, args.overrides, args.seed, args.out, not args.no_plots)
    if code == 0 and args.strict and any(not c.passed for c in result.checks):
        return EXIT_CHECKS_FAILED
    return code


if __name__ == "__main__":
    sys.exit(main())
