"""Command-line front end.

Usage: ``heatsource <command> [--config PATH] [--key value ...]`` with
commands ``forward``, ``invert``, ``sweep``, ``sensitivity``.  Configuration
is a flat key=value text file with '#' comments; command-line flags use the
same key names and override file values.  Every run writes a machine-
readable key=value summary (results plus a ``config.``-prefixed echo of the
effective configuration) and per-command CSV artifacts.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import DivergenceError, HeatSourceError
from .harness import (ErrorReport, SweepCell, emit_sensitivity_data,
                      get_case, invert_case, sensitivity_demo_geometry,
                      sweep)
from .kernels import TruncationPolicy
from .model import MeasurementMesh, PolyParams, sensitivity_tables
from .objective import ObjectiveConfig
from .output import OutputError, write_csv, write_key_values
from .solver import IterationTrace, SolverConfig

__all__ = [
    "RunConfig",
    "ConfigError",
    "ConfigFileMissingError",
    "ConfigParseError",
    "ConfigValueError",
    "parse_config",
    "parse_config_text",
    "config_echo",
    "dispatch",
    "main",
    "EXIT_OK",
    "EXIT_ERROR",
    "EXIT_INVALID_CONFIG",
    "EXIT_MISSING_FILE",
    "EXIT_PARSE_ERROR",
    "EXIT_NOT_CONVERGED",
    "EXIT_DIVERGED",
    "EXIT_IO_FAILURE",
]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID_CONFIG = 2
EXIT_MISSING_FILE = 3
EXIT_PARSE_ERROR = 4
EXIT_NOT_CONVERGED = 5
EXIT_DIVERGED = 6
EXIT_IO_FAILURE = 7

COMMANDS = ("forward", "invert", "sweep", "sensitivity")


class ConfigError(HeatSourceError):
    exit_code = EXIT_INVALID_CONFIG


class ConfigFileMissingError(ConfigError):
    exit_code = EXIT_MISSING_FILE


class ConfigParseError(ConfigError):
    exit_code = EXIT_PARSE_ERROR


class ConfigValueError(ConfigError):
    exit_code = EXIT_INVALID_CONFIG


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run configuration with all defaults resolved."""

    command: str
    case: str = "example1"
    n_x: int = 12
    n_t: int = 9
    alpha: float = 1e-6
    epsilon: float = 1e-3
    max_iters: int = 10_000
    restart_period: int | None = None
    noise_level: float = 0.0
    seed: int = 42
    i_x: int = 100
    i_t: int = 100
    x_star: float | None = None
    trunc_tol: float = 1e-12
    max_terms: int = 10_000
    outdir: str = ""  # resolved to HEATSOURCE_OUTDIR, then "."
    run_id: str = ""
    phi: tuple = ()
    theta: tuple = ()
    jobs: int = 1
    sweep_n: str = "6x5,12x9"
    sweep_xstar: str = "-1.34,-0.17,0.99,2.15,2.97"
    sweep_alpha: str = ""


def _parse_int(raw, key):
    try:
        return int(raw)
    except ValueError:
        raise ConfigValueError(f"{key}={raw!r}: expected an integer") from None


def _parse_float(raw, key):
    try:
        return float(raw)
    except ValueError:
        raise ConfigValueError(f"{key}={raw!r}: expected a number") from None


def _parse_optional_int(raw, key):
    if raw.strip().lower() in ("", "none"):
        return None
    return _parse_int(raw, key)


def _parse_optional_float(raw, key):
    if raw.strip().lower() in ("", "none"):
        return None
    return _parse_float(raw, key)


def _parse_floats(raw, key):
    raw = raw.strip()
    if not raw:
        return ()
    try:
        return tuple(float(part) for part in raw.split(","))
    except ValueError:
        raise ConfigValueError(
            f"{key}={raw!r}: expected comma-separated numbers") from None


_PARSERS = {
    "command": lambda raw, key: raw.strip(),
    "case": lambda raw, key: raw.strip(),
    "n_x": _parse_int,
    "n_t": _parse_int,
    "alpha": _parse_float,
    "epsilon": _parse_float,
    "max_iters": _parse_int,
    "restart_period": _parse_optional_int,
    "noise_level": _parse_float,
    "seed": _parse_int,
    "i_x": _parse_int,
    "i_t": _parse_int,
    "x_star": _parse_optional_float,
    "trunc_tol": _parse_float,
    "max_terms": _parse_int,
    "outdir": lambda raw, key: raw.strip(),
    "run_id": lambda raw, key: raw.strip(),
    "phi": _parse_floats,
    "theta": _parse_floats,
    "jobs": _parse_int,
    "sweep_n": lambda raw, key: raw.strip(),
    "sweep_xstar": lambda raw, key: raw.strip(),
    "sweep_alpha": lambda raw, key: raw.strip(),
}

# Range checks with the accepted range echoed in every message.
_RANGES = {
    "n_x": (lambda v: v >= 1, "n_x must be an integer >= 1"),
    "n_t": (lambda v: v >= 1, "n_t must be an integer >= 1"),
    "alpha": (lambda v: v >= 0.0, "alpha must be >= 0"),
    "epsilon": (lambda v: v > 0.0, "epsilon must be > 0"),
    "max_iters": (lambda v: v >= 0, "max_iters must be >= 0"),
    "restart_period": (lambda v: v is None or v >= 1,
                       "restart_period must be >= 1 or none"),
    "noise_level": (lambda v: v >= 0.0, "noise_level must be >= 0"),
    "i_x": (lambda v: v >= 1, "i_x must be an integer >= 1"),
    "i_t": (lambda v: v >= 1, "i_t must be an integer >= 1"),
    "trunc_tol": (lambda v: v > 0.0, "trunc_tol must be > 0"),
    "max_terms": (lambda v: v >= 1, "max_terms must be an integer >= 1"),
    "jobs": (lambda v: v >= 1, "jobs must be an integer >= 1"),
}


def read_config_file(path) -> dict:
    """Read a flat key=value file; '#' starts a comment, blanks ignored."""
    path = Path(path)
    if not path.exists():
        raise ConfigFileMissingError(f"config file not found: {path}")
    values = {}
    for lineno, raw_line in enumerate(path.read_text().splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(
                f"{path}:{lineno}: expected key=value, got {raw_line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def parse_config_text(text: str) -> RunConfig:
    """Parse configuration from in-memory key=value text."""
    values = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(
                f"line {lineno}: expected key=value, got {raw_line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return _build_config(values)


def parse_config(path=None, overrides=None) -> RunConfig:
    """Build a validated RunConfig from an optional file plus overrides.

    Precedence: built-in defaults, then file values, then overrides.
    """
    values = {}
    if path is not None:
        values.update(read_config_file(path))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return _build_config(values)


def _build_config(raw_values: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw_values) - known)
    if unknown:
        raise ConfigValueError(
            f"unknown config keys: {', '.join(unknown)}; "
            f"known keys: {', '.join(sorted(known))}")
    if "command" not in raw_values:
        raise ConfigValueError(
            f"missing required key 'command' (one of {', '.join(COMMANDS)})")
    parsed = {}
    for key, raw in raw_values.items():
        parsed[key] = _PARSERS[key](str(raw), key)

    command = parsed["command"]
    if command not in COMMANDS:
        raise ConfigValueError(
            f"command={command!r}: must be one of {', '.join(COMMANDS)}")
    # The sensitivity command defaults to the demo curve counts.
    if command == "sensitivity":
        parsed.setdefault("n_x", 6)
        parsed.setdefault("n_t", 5)
    cfg = replace(RunConfig(command=command),
                  **{k: v for k, v in parsed.items() if k != "command"})

    for key, (check, message) in _RANGES.items():
        value = getattr(cfg, key)
        if not check(value):
            raise ConfigValueError(f"{key}={value}: {message}")

    try:
        case = get_case(cfg.case)
    except KeyError as exc:
        raise ConfigValueError(str(exc)) from None
    if cfg.x_star is not None:
        geom = case.geometry
        lo, hi = geom.offset, geom.offset + geom.length
        if not lo < cfg.x_star < hi:
            raise ConfigValueError(
                f"x_star={cfg.x_star}: must lie strictly inside "
                f"({lo:g}, {hi:g}) for case {cfg.case!r}")

    if not cfg.outdir:
        cfg = replace(cfg, outdir=os.environ.get("HEATSOURCE_OUTDIR", "."))
    if not cfg.run_id:
        cfg = replace(cfg, run_id=f"{cfg.command}_{cfg.case}")
    _parse_sweep_cells(cfg)  # validate sweep grids even if unused
    return cfg


def config_echo(cfg: RunConfig):
    """The effective configuration as (key, value-string) pairs; feeding the
    values back through the parser reproduces an equivalent RunConfig."""
    pairs = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if value is None:
            text = "none"
        elif isinstance(value, tuple):
            text = ",".join(repr(v) for v in value)
        else:
            text = str(value)
        pairs.append((f.name, text))
    return pairs


def _parse_sweep_cells(cfg: RunConfig):
    cells = []
    alphas = ([float(a) for a in cfg.sweep_alpha.split(",") if a.strip()]
              if cfg.sweep_alpha.strip() else [cfg.alpha])
    for pair in cfg.sweep_n.split(","):
        pair = pair.strip()
        if not pair:
            continue
        if "x" not in pair:
            raise ConfigValueError(
                f"sweep_n entry {pair!r}: expected N_XxN_T like 12x9")
        left, _, right = pair.partition("x")
        n_x = _parse_int(left, "sweep_n")
        n_t = _parse_int(right, "sweep_n")
        for xs in cfg.sweep_xstar.split(","):
            xs = xs.strip()
            if not xs:
                continue
            x_star = _parse_float(xs, "sweep_xstar")
            for alpha in alphas:
                cells.append(SweepCell(n_x=n_x, n_t=n_t, x_star=x_star,
                                       alpha=alpha))
    if not cells:
        raise ConfigValueError("sweep grid is empty")
    return cells


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _solver_config(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(epsilon=cfg.epsilon, max_iters=cfg.max_iters,
                        restart_period=cfg.restart_period)


def _trunc(cfg: RunConfig) -> TruncationPolicy:
    return TruncationPolicy(tol=cfg.trunc_tol, max_terms=cfg.max_terms)


def _case_for(cfg: RunConfig):
    case = get_case(cfg.case)
    if cfg.x_star is not None:
        case = case.with_sensor(cfg.x_star)
    return case


def _summary_path(cfg: RunConfig) -> Path:
    return Path(cfg.outdir) / f"{cfg.run_id}_summary.txt"


def _write_summary(cfg: RunConfig, result_pairs) -> Path:
    pairs = list(result_pairs)
    pairs.extend((f"config.{key}", value) for key, value in config_echo(cfg))
    return write_key_values(_summary_path(cfg), pairs)


def _run_invert(cfg: RunConfig) -> int:
    case = _case_for(cfg)
    result = invert_case(case, cfg.n_x, cfg.n_t,
                         ObjectiveConfig(alpha=cfg.alpha),
                         _solver_config(cfg), i_x=cfg.i_x, i_t=cfg.i_t,
                         noise_level=cfg.noise_level, seed=cfg.seed,
                         trunc=_trunc(cfg))
    outdir = Path(cfg.outdir)
    write_csv(outdir / f"{cfg.run_id}_trace.csv", IterationTrace.HEADER,
              result.trace.rows())
    ts = result.mesh.t_nodes
    write_csv(outdir / f"{cfg.run_id}_source.csv",
              ["t", "exact", "reconstructed"],
              np.column_stack([ts, case.exact_F(ts),
                               result.params.source_values(ts)]))
    xs = result.mesh.x_nodes
    x_phys = case.geometry.to_physical(xs)
    write_csv(outdir / f"{cfg.run_id}_initial.csv",
              ["x", "exact", "reconstructed"],
              np.column_stack([x_phys, case.exact_u0(x_phys),
                               result.params.initial_values(xs)]))
    rep = result.report
    stat = rep.stationarity
    _write_summary(cfg, [
        ("status", rep.status),
        ("converged", rep.converged),
        ("iterations", rep.iterations),
        ("final_cost", rep.final_cost),
        ("grad_phi_norm", rep.grad_phi_norm),
        ("grad_theta_norm", rep.grad_theta_norm),
        ("e_f", result.errors.e_f),
        ("e_u0", result.errors.e_u0),
        ("fit_residual_f", result.errors.fit_residual_f),
        ("fit_residual_u0", result.errors.fit_residual_u0),
        ("stationarity_holds_mixed", stat.holds_mixed),
        ("stationarity_holds_symmetric", stat.holds_symmetric),
        ("stationarity_worst_margin_mixed", stat.worst_margin_mixed),
        ("stationarity_worst_margin_symmetric", stat.worst_margin_symmetric),
    ])
    print(f"{cfg.run_id}: {rep.status} after {rep.iterations} iterations, "
          f"cost {rep.final_cost:.6e}, E_F {result.errors.e_f:.6e}, "
          f"E_u0 {result.errors.e_u0:.6e}")
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def _run_forward(cfg: RunConfig) -> int:
    case = _case_for(cfg)
    geom = case.geometry
    mesh = MeasurementMesh.regular(geom, cfg.i_x, cfg.i_t)
    phi = np.asarray(cfg.phi if cfg.phi else np.zeros(cfg.n_t))
    theta = np.asarray(cfg.theta if cfg.theta else np.zeros(cfg.n_x))
    params = PolyParams(phi=phi, theta=theta)
    tables = sensitivity_tables(geom, mesh, params.n_x, params.n_t,
                                _trunc(cfg))
    u_final, u_sensor = tables.predict(params)
    outdir = Path(cfg.outdir)
    write_csv(outdir / f"{cfg.run_id}_final_profile.csv", ["x", "u"],
              np.column_stack([geom.to_physical(mesh.x_interior), u_final]))
    write_csv(outdir / f"{cfg.run_id}_sensor_history.csv", ["t", "u"],
              np.column_stack([mesh.t_interior, u_sensor]))
    _write_summary(cfg, [
        ("status", "ok"),
        ("max_abs_final", float(np.max(np.abs(u_final)))),
        ("max_abs_sensor", float(np.max(np.abs(u_sensor)))),
    ])
    print(f"{cfg.run_id}: forward model sampled on "
          f"{mesh.i_x}x{mesh.i_t} mesh")
    return EXIT_OK


def _run_sweep(cfg: RunConfig) -> int:
    case = _case_for(cfg)
    cells = _parse_sweep_cells(cfg)
    reports = sweep(case, cells, _solver_config(cfg), i_x=cfg.i_x,
                    i_t=cfg.i_t, noise_level=cfg.noise_level, seed=cfg.seed,
                    trunc=_trunc(cfg), jobs=cfg.jobs)
    write_csv(Path(cfg.outdir) / f"{cfg.run_id}_sweep.csv",
              ErrorReport.CSV_HEADER, (r.csv_row() for r in reports))
    converged = sum(1 for r in reports if r.status == "converged")
    _write_summary(cfg, [
        ("status", "ok" if converged == len(reports) else "partial"),
        ("cells", len(reports)),
        ("converged_cells", converged),
    ])
    print(f"{cfg.run_id}: {converged}/{len(reports)} cells converged")
    return EXIT_OK if converged == len(reports) else EXIT_NOT_CONVERGED


def _run_sensitivity(cfg: RunConfig) -> int:
    if cfg.case == "example1" and cfg.x_star is None:
        geom = sensitivity_demo_geometry()
    else:
        geom = _case_for(cfg).geometry
    mesh = MeasurementMesh.regular(geom, cfg.i_x, cfg.i_t)
    paths = emit_sensitivity_data(geom, cfg.n_x, cfg.n_t, mesh, cfg.outdir,
                                  run_id=cfg.run_id, trunc=_trunc(cfg))
    _write_summary(cfg, [
        ("status", "ok"),
        ("files", ";".join(str(p) for p in paths)),
    ])
    print(f"{cfg.run_id}: wrote {len(paths)} sensitivity tables")
    return EXIT_OK


_RUNNERS = {
    "invert": _run_invert,
    "forward": _run_forward,
    "sweep": _run_sweep,
    "sensitivity": _run_sensitivity,
}


def dispatch(cfg: RunConfig) -> int:
    """Execute the configured command; returns the process exit code."""
    try:
        Path(cfg.outdir).mkdir(parents=True, exist_ok=True)
        return _RUNNERS[cfg.command](cfg)
    except DivergenceError as exc:
        logger.error("iteration diverged: %s", exc)
        return EXIT_DIVERGED
    except (OutputError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_IO_FAILURE


def main(argv=None) -> int:
    """Console entry point."""
    parser = argparse.ArgumentParser(
        prog="heatsource",
        description=("Reconstruct a time-dependent heat source and the "
                     "initial temperature of a 1-D rod from final-time and "
                     "interior measurements."),
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="path to a key=value config file")
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        parser.add_argument(f"--{f.name}", dest=f.name, default=None,
                            metavar="VALUE")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig)
                 if f.name != "command" and getattr(args, f.name) is not None}
    overrides["command"] = args.command
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    try:
        return dispatch(cfg)
    except HeatSourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
