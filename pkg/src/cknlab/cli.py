"""Command line driver: ``python -m cknlab <command> [--config FILE] [--key value ...]``.

Every run writes CSV/JSON files into ``out_dir``.  Configuration comes from
the dataclass defaults, then an optional ``key = value`` file, then command
line flags (``--key-name``), each overriding the previous layer.  Exit status
is 0 on success, 1 when a computation fails to converge and 2 when the
configuration is invalid.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import math
import re
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from . import io
from .energy import SolverKnobs, minimize
from .errors import CknError, DomainError, NonConvergent, ParseError
from .limit import LadderReport, ScheduleParams, run_ladder
from .liouville import LiouvilleParams, mass, residual
from .onofri import CSV_COLUMNS as GAP_COLUMNS
from .onofri import bump, bump_battery, counterexample_gap, onofri_gap
from .operators import CknParams, c_hardy, c_hardy_quadrature, constants_report, window_sweep
from .quadrature import QuadratureConfig

COMMANDS = ("constants", "liouville-check", "minimize", "limit-ladder", "onofri-gap", "counterexample", "selftest")

QUADRATURE_KEYS = ("r_max", "n_cells", "grading", "pv_exclusion", "abs_tol", "rel_tol", "tail_order", "order",
                   "max_refine")
SOLVER_KEYS = ("per_decade", "max_iter", "flow_tol", "switch_tol", "el_tol", "newton", "rearrange")


@dataclass(frozen=True)
class RunConfig:
    command: str = "selftest"
    out_dir: str = "cknlab-out"
    seed: int = 0
    # quadrature
    r_max: float = 1.0e4
    n_cells: int = 8
    grading: float = 10.0
    pv_exclusion: float = 0.01
    abs_tol: float = 1.0e-10
    rel_tol: float = 1.0e-8
    tail_order: float = 2.0
    order: int = 8
    max_refine: int = 5
    # solver
    per_decade: int = 16
    max_iter: int = 50_000
    flow_tol: float = 1e-12
    switch_tol: float = 1e-6
    el_tol: float = 1e-4
    newton: bool = True
    rearrange: bool = True
    # problem inputs (gamma, alpha, beta default to the schedule point b = 0, epsilon = 0.2)
    gamma: float = 0.32
    alpha: float = 0.02
    beta: float = 0.04
    epsilon: float = 0.0
    b: float = 0.0
    rho: float = 1.0
    b_list: Tuple[float, ...] = (0.0, 0.25, 0.5, 0.75)
    rho_list: Tuple[float, ...] = (0.5, 1.0, 2.0)
    eps_list: Tuple[float, ...] = (0.2, 0.1)
    window: float = 5.0
    gammas: Tuple[float, ...] = (0.2, 0.3, 0.45)
    alpha_points: int = 6
    battery_size: int = 20
    t_list: Tuple[float, ...] = (1e-2, 1e-3, 1e-4)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ParseError("command must be one of %s, got %r" % (", ".join(COMMANDS), self.command))
        for name in ("battery_size", "alpha_points", "per_decade", "max_iter", "n_cells", "order"):
            if getattr(self, name) < 1:
                raise ParseError("%s must be positive" % name)
        if self.window <= 0.0:
            raise ParseError("window must be positive")
        if self.epsilon < 0.0:
            raise ParseError("epsilon must be >= 0 (0 means: use gamma, alpha, beta)")

    @property
    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(**{k: getattr(self, k) for k in QUADRATURE_KEYS})

    @property
    def knobs(self) -> SolverKnobs:
        return SolverKnobs(**{k: getattr(self, k) for k in SOLVER_KEYS})


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(name: str, text: str):
    default = _FIELDS[name].default
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ParseError("bad value %r for key %r" % (text, name)) from None
    return text


def _line_of(text: str, key: str) -> int:
    pat = re.compile(r"^\s*%s\s*[=:]" % re.escape(key))
    for i, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return i
    return 0


def parse_config(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    """Read a ``key = value`` document (``#`` comments, no sections) into a RunConfig."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), delimiters=("=", ":"))
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ParseError("malformed configuration: %s" % exc) from None
    updates = {}
    for key, value in cp["run"].items():
        name = key.strip().replace("-", "_")
        if name not in _FIELDS:
            raise ParseError("unknown key %r on line %d" % (key, _line_of(text, key)))
        try:
            updates[name] = _convert(name, value)
        except ParseError as exc:
            raise ParseError("%s (line %d)" % (exc, _line_of(text, key))) from None
    return dataclasses.replace(base or RunConfig(), **updates)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _out(cfg: RunConfig, name: str) -> Path:
    return Path(cfg.out_dir) / name


def cmd_constants(cfg: RunConfig) -> int:
    q = cfg.quadrature
    reports, bad = window_sweep(cfg.gammas, cfg.alpha_points, q)
    reports = [constants_report(1, g, 0.0, q) for g in cfg.gammas] + reports
    cols = ["n", "gamma", "alpha", "sigma_gamma", "c_gamma_alpha", "c_hardy", "c_ckn", "quadrature_error"]
    io.write_csv(_out(cfg, "constants.csv"), cols, [[getattr(r, c) for c in cols] for r in reports])
    hardy = []
    for g in cfg.gammas:
        r = c_hardy_quadrature(1, g, q)
        hardy.append({"gamma": g, "closed_form": c_hardy(1, g), "quadrature": r.value, "error": r.error})
    io.write_json(_out(cfg, "constants.json"), {"command": "constants", "hardy": hardy, "window_violations": bad})
    return 0


def cmd_liouville(cfg: RunConfig) -> int:
    q = cfg.quadrature
    rows = []
    for b in cfg.b_list:
        for rho in cfg.rho_list:
            lp = LiouvilleParams(rho, b)
            m = mass(lp, q)
            rows.append([b, rho, m.kappa, m.kappa_exact, m.rel_err, residual(lp, cfg=q, per_decade=cfg.per_decade)])
    io.write_csv(_out(cfg, "liouville.csv"), ["b", "rho", "kappa", "kappa_exact", "rel_err", "max_residual"], rows)
    return 0


def _problem(cfg: RunConfig) -> CknParams:
    if cfg.epsilon > 0.0:
        return ScheduleParams(cfg.b, cfg.epsilon).params
    return CknParams(cfg.gamma, cfg.alpha, cfg.beta)


def cmd_minimize(cfg: RunConfig) -> int:
    params = _problem(cfg)
    m = minimize(params, knobs=cfg.knobs, cfg=cfg.quadrature)
    rep = m.report
    doc = {"command": "minimize",
           "params": {"gamma": params.gamma, "alpha": params.alpha, "beta": params.beta, "p": params.p},
           "report": dataclasses.asdict(rep), "iterations": m.iterations, "converged": m.converged,
           "dilation": m.dilation}
    io.write_json(_out(cfg, "minimize.json"), doc)
    io.write_csv(_out(cfg, "minimize_profile.csv"), ["x", "u"], list(zip(m.u.nodes, m.u.values)))
    if not m.converged:
        raise NonConvergent("el_residual %.3g above tolerance" % rep.el_residual)
    return 0


def cmd_ladder(cfg: RunConfig) -> int:
    rep: LadderReport = run_ladder(cfg.b, cfg.eps_list, cfg.knobs, cfg.quadrature, cfg.window)
    doc = {"command": "limit-ladder"}
    doc.update(rep.document())
    io.write_json(_out(cfg, "ladder.json"), doc)
    io.write_csv(_out(cfg, "ladder.csv"), LadderReport.CSV_COLUMNS, rep.csv_rows())
    failed = [r for r in rep.rungs if r.error]
    if failed:
        raise NonConvergent("; ".join("epsilon=%g: %s" % (r.epsilon, r.error) for r in failed))
    return 0


def cmd_onofri(cfg: RunConfig) -> int:
    lp = LiouvilleParams(cfg.rho, cfg.b)
    q = cfg.quadrature
    zero = bump(0.0)
    rows = [onofri_gap(zero, lp, q).row("zero")]
    for i, v in enumerate(bump_battery(cfg.battery_size, cfg.seed)):
        rows.append(onofri_gap(v, lp, q).row("bump%02d" % i))
    io.write_csv(_out(cfg, "onofri_gap.csv"), GAP_COLUMNS, rows)
    return 0


def cmd_counterexample(cfg: RunConfig) -> int:
    lp = LiouvilleParams(cfg.rho, cfg.b)
    rows = [counterexample_gap(cfg.b, t, lp, cfg.quadrature).row("t=%.0e" % t) for t in cfg.t_list]
    io.write_csv(_out(cfg, "counterexample.csv"), GAP_COLUMNS, rows)
    return 0


def selftest_checks(cfg: RunConfig) -> List[Tuple[str, float, float, float]]:
    """(name, value, expected, tolerance) for the quick example set of every module."""
    from .energy import max_on_ball, test_profile
    from .onofri import constant_sequence_psi, counterexample_family, quarter_norm_sq
    from .operators import c_gamma_alpha, sigma_gamma
    from .quadrature import integrate_line

    q = cfg.quadrature
    checks = [
        ("quadrature.sqrt_singularity", integrate_line(lambda x: x ** -0.5, (0.0, 1.0), (0.5, 0.0), q).value, 2.0, 1e-8),
        ("operators.sigma_half", sigma_gamma(1, 0.5), 1.0 / math.pi, 1e-14),
        ("operators.c_gamma_zero", c_gamma_alpha(1, 0.3, 0.0, q), 0.0, 1e-12),
        ("operators.hardy_quadrature", c_hardy_quadrature(1, 0.25, q).value, c_hardy(1, 0.25), 1e-8),
        ("energy.test_profile_max", max_on_ball(test_profile(0.25, 8, (1e-3, 1e3)), 1.0), 1.0, 1e-6),
        ("liouville.mass_b0", mass(LiouvilleParams(1.0, 0.0), q).kappa, 2.0 * math.pi, 1e-8),
        ("liouville.mass_b05", mass(LiouvilleParams(1.0, 0.5), q).kappa, math.pi, 1e-8),
        ("limit.schedule_p", ScheduleParams(0.0, 0.1).params.p, 10.0, 1e-9),
        ("onofri.gap_zero", onofri_gap(bump(0.0), LiouvilleParams(1.0, 0.0), q).gap, 0.0, 1e-10),
        ("onofri.psi1_positive", float(quarter_norm_sq(constant_sequence_psi(1, per_decade=12), q) > 0.0), 1.0, 0.0),
        ("onofri.plateau_value", float(counterexample_family(-0.5, 1e-2)(1.0)), 3.0 * math.log(100.0), 1e-12),
    ]
    return checks


def cmd_selftest(cfg: RunConfig) -> int:
    rows, failed = [], []
    for name, value, expected, tol in selftest_checks(cfg):
        err = abs(value - expected)
        ok = err <= tol * max(1.0, abs(expected))
        rows.append([name, value, expected, err, tol, ok])
        if not ok:
            failed.append(name)
    io.write_csv(_out(cfg, "selftest.csv"), ["check", "value", "expected", "abs_err", "tol", "passed"], rows)
    for r in rows:
        print("%-30s %s" % (r[0], "pass" if r[-1] else "FAIL"))
    if failed:
        raise NonConvergent("selftest checks failed: " + ", ".join(failed))
    return 0


DISPATCH = {
    "constants": cmd_constants,
    "liouville-check": cmd_liouville,
    "minimize": cmd_minimize,
    "limit-ladder": cmd_ladder,
    "onofri-gap": cmd_onofri,
    "counterexample": cmd_counterexample,
    "selftest": cmd_selftest,
}


def _log_error(cfg: Optional[RunConfig], exc: BaseException, status: int) -> None:
    doc = {"status": status, "error_type": type(exc).__name__, "message": str(exc)}
    if cfg is not None:
        doc["command"] = cfg.command
        try:
            io.write_json(_out(cfg, "errors.json"), doc)
        except OSError:
            pass
    sys.stderr.write(io.json_text(doc))


def run(cfg: RunConfig) -> int:
    """Execute ``cfg.command``; returns the exit status and logs failures to ``errors.json``."""
    try:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _log_error(None, exc, 2)
        return 2
    try:
        return DISPATCH[cfg.command](cfg)
    except NonConvergent as exc:
        _log_error(cfg, exc, 1)
        return 1
    except (ParseError, DomainError) as exc:
        _log_error(cfg, exc, 2)
        return 2
    except CknError as exc:
        _log_error(cfg, exc, 1)
        return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cknlab", description=__doc__.splitlines()[0])
    ap.add_argument("command", nargs="?", choices=COMMANDS, help="experiment to run (overrides the config file)")
    ap.add_argument("--config", help="key = value file")
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        ap.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None, metavar="VALUE")
    return ap


def parse_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    cfg = RunConfig()
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError("cannot read config file: %s" % exc) from None
        cfg = parse_config(text, cfg)
    updates = {name: _convert(name, getattr(args, name)) for name in _FIELDS
               if name != "command" and getattr(args, name) is not None}
    if args.command:
        updates["command"] = args.command
    return dataclasses.replace(cfg, **updates)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = parse_args(argv)
        # building these validates the knob ranges
        cfg.quadrature
        cfg.knobs
    except (ParseError, DomainError) as exc:
        _log_error(None, exc, 2)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
