"""Command-line front end.

Exit status: 0 on success, 1 on runtime failure (including failed checks in
``verify``), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dynamics, info, measure as nm
from .linalg import DensityOperator, PureState, partial_trace, ptrace, projector, trace_distance

SERIES_HEADER = ("t_gamma0", "p", "gamma_over_gamma0", "E_SA", "J_SE")
MIN_STEPS = 200


@dataclass(frozen=True)
class RunConfig:
    lambda_ratio: float
    t_max: float
    steps: int
    r: float = 0.0
    output_path: str | None = None
    precision: int = 9

    @property
    def bath(self) -> dynamics.BathSpec:
        return dynamics.BathSpec(self.lambda_ratio)


def fmt(x: float, precision: int) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf"
    return f"{x + 0.0:.{precision}g}"


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def read_config(path: str) -> dict[str, str]:
    """Parse a key=value file; keys use flag names with or without dashes."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file mirroring the flags; flags take precedence")
    common.add_argument("--lambda-ratio", type=float, default=None, help="bath width lambda/gamma0")
    common.add_argument("--t-max", type=float, default=None, help="horizon gamma0*t (default 10 or 30 by regime)")
    common.add_argument("--steps", type=int, default=nm.DEFAULT_STEPS, help="grid intervals (>= 200)")
    common.add_argument("--r", type=float, default=0.0, help="apparatus Bloch radius")
    common.add_argument("--r-grid", type=_float_list, default=None, help="comma list of radii")
    common.add_argument("--lambda-grid", type=_float_list, default=None, help="comma list of lambda/gamma0")
    common.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    common.add_argument("--precision", type=int, default=9, help="significant digits in CSV output")

    parser = argparse.ArgumentParser(prog="nonmarkov", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="sample p, gamma, E_SA, J_SE along a trajectory")
    sub.add_parser("measure", parents=[common], help="optimised non-Markovianity measure")
    sub.add_parser("sweep", parents=[common], help="measure over a (lambda, r) grid")
    p_verify = sub.add_parser("verify", parents=[common], help="run the oracle cross-checks")
    p_verify.add_argument("--inject-fault", action="store_true", help="corrupt one check (harness self-test)")
    for p in sub.choices.values():
        p.add_argument("--jobs", type=int, default=1, help=argparse.SUPPRESS)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = read_config(args.config)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config: {exc}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        converted = {}
        for action in sub._actions:
            if action.dest in cfg:
                raw = cfg[action.dest]
                if isinstance(action, argparse._StoreTrueAction):
                    converted[action.dest] = raw.lower() in ("1", "true", "yes", "on")
                else:
                    try:
                        converted[action.dest] = action.type(raw) if action.type else raw
                    except (ValueError, argparse.ArgumentTypeError) as exc:
                        parser.error(f"bad config value for {action.dest}: {exc}")
        sub.set_defaults(**converted)
        args = parser.parse_args(argv)
    return args


def _validate(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if args.command in ("simulate", "measure", "verify") and args.lambda_ratio is None:
        parser.error("--lambda-ratio is required")
    if args.lambda_ratio is not None and not args.lambda_ratio > 0:
        parser.error("--lambda-ratio must be positive")
    if args.t_max is not None and not args.t_max > 0:
        parser.error("--t-max must be positive")
    if args.steps < MIN_STEPS:
        parser.error(f"--steps must be at least {MIN_STEPS}")
    if not 0.0 <= args.r <= 1.0:
        parser.error("--r must lie in [0, 1]")
    if args.r_grid is not None and any(not 0.0 <= r <= 1.0 for r in args.r_grid):
        parser.error("--r-grid values must lie in [0, 1]")
    if args.lambda_grid is not None and any(not lam > 0 for lam in args.lambda_grid):
        parser.error("--lambda-grid values must be positive")
    if not 1 <= args.precision <= 17:
        parser.error("--precision must be between 1 and 17")
    if args.jobs < 1:
        parser.error("--jobs must be positive")


def _config(args: argparse.Namespace, lambda_ratio: float | None = None) -> RunConfig:
    lam = args.lambda_ratio if lambda_ratio is None else lambda_ratio
    bath = dynamics.BathSpec(lam)
    t_max = nm.default_t_max(bath) if args.t_max is None else args.t_max
    return RunConfig(lam, t_max, args.steps, args.r, args.out, args.precision)


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _summary(line: str, path: str | None) -> None:
    print(line, file=sys.stdout if path else sys.stderr)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def series_csv(series: nm.TimeSeries, precision: int) -> str:
    rows = (
        [fmt(v, precision) for v in row]
        for row in zip(series.ts, series.p, series.gamma, series.e_sa, series.j_se)
    )
    return _csv_text(SERIES_HEADER, rows)


def read_series_csv(path: str) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = list(zip(*reader))
    return {name: np.array([float(v) for v in col]) for name, col in zip(header, cols)}


def _intervals_text(intervals, precision: int) -> str:
    if not intervals:
        return "none"
    return " ".join(f"[{fmt(a, precision)}, {fmt(b, precision)}]" for a, b in intervals)


def cmd_simulate(cfg: RunConfig) -> int:
    series = nm.trajectory(cfg.bath, nm.InitialStateSpec(cfg.r), cfg.t_max, cfg.steps)
    result = nm.measure_from_series(series)
    _emit(series_csv(series, cfg.precision), cfg.output_path)
    detected = "yes" if result.intervals else "no"
    _summary(f"growth intervals detected: {detected} ({len(result.intervals)})", cfg.output_path)
    _summary(f"N = {result.value:.{cfg.precision}f}", cfg.output_path)
    _summary(f"intervals: {_intervals_text(result.intervals, cfg.precision)}", cfg.output_path)
    return 0


def cmd_measure(cfg: RunConfig, r_grid) -> int:
    result = nm.measure(cfg.bath, cfg.t_max, cfg.steps, r_grid)
    out = sys.stdout
    print(f"N = {result.value:.{cfg.precision}f}", file=out)
    print(f"argmax r = {fmt(result.argmax_r, cfg.precision)}", file=out)
    print(f"intervals: {_intervals_text(result.intervals, cfg.precision)}", file=out)
    if cfg.output_path:
        rows = ([fmt(r, cfg.precision), fmt(v, cfg.precision)] for r, v in result.by_r)
        _emit(_csv_text(("r", "N"), rows), cfg.output_path)
    return 0


def _sweep_cell(job):
    lam, t_max, steps, radii = job
    res = nm.measure(dynamics.BathSpec(lam), t_max, steps, radii)
    return lam, res.by_r


def cmd_sweep(args: argparse.Namespace) -> int:
    lambdas = sorted(set(args.lambda_grid or [0.1, 0.5, 1.0, 2.0, 3.0]))
    radii = sorted(set(args.r_grid or nm.DEFAULT_R_GRID))
    jobs = []
    for lam in lambdas:
        t_max = args.t_max if args.t_max is not None else nm.default_t_max(dynamics.BathSpec(lam))
        jobs.append((lam, t_max, args.steps, radii))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            cells = list(pool.map(_sweep_cell, jobs))
    else:
        cells = [_sweep_cell(job) for job in jobs]
    rows = sorted((lam, r, v) for lam, by_r in cells for r, v in by_r)
    text = _csv_text(("lambda_ratio", "r", "N"), ([fmt(x, args.precision) for x in row] for row in rows))
    _emit(text, args.out)
    _summary(f"{len(rows)} rows", args.out)
    return 0


# --- verification ---------------------------------------------------------

KRAUS_MARKOV_TOL = 1e-6
KRAUS_OSC_TOL = 1e-4
KW_GAP_TOL = 5e-3
DUALITY_TOL = 1e-9
ENTROPY_DRIFT_TOL = 1e-10
CONCURRENCE_TOL = 1e-9


def _reference_qubit() -> DensityOperator:
    return DensityOperator((2,), np.array([[0.35, 0.3 - 0.2j], [0.3 + 0.2j, 0.65]]))


def check_integrator(cfg: RunConfig, samples: int = 20) -> float:
    bath = cfg.bath
    rho0 = _reference_qubit()
    h = cfg.t_max / cfg.steps
    worst = 0.0
    for t in np.linspace(cfg.t_max / samples, cfg.t_max, samples):
        steps = max(100, int(round(t / h)))
        rho = dynamics.integrate_master_equation(bath, rho0, float(t), steps)
        ref = dynamics.apply_kraus(dynamics.kraus_at(dynamics.p_of_t(bath, float(t))), rho0.matrix)
        worst = max(worst, trace_distance(rho.matrix, ref))
    return worst


def check_kw_gap(cfg: RunConfig, samples: int = 10, fault: float = 0.0) -> float:
    """Largest |J_kw - J_bruteforce|; brute force exceeding KW counts as a failure."""
    bath = cfg.bath
    psi0 = nm.initial_sae(nm.InitialStateSpec(cfg.r))
    worst = 0.0
    for t in np.linspace(0.0, cfg.t_max, samples):
        state = dynamics.evolve_tripartite(PureState((2, 2, 2), psi0), dynamics.p_of_t(bath, float(t)))
        j_kw = info.accessible_info_kw(state) + fault
        j_bf = info.accessible_info_bruteforce(partial_trace(state.density(), [0, 2]))
        if j_bf > j_kw + 1e-9:
            return math.inf
        worst = max(worst, j_kw - j_bf)
    return worst


def check_duality(cfg: RunConfig) -> tuple[float, float]:
    series = nm.trajectory(cfg.bath, nm.InitialStateSpec(cfg.r), cfg.t_max, cfg.steps)
    step_sum = np.abs(np.diff(series.e_sa) + np.diff(series.j_se))
    return float(step_sum.max()), float(np.ptp(series.s_s))


def check_concurrence() -> float:
    ps = np.round(np.arange(0.0, 1.0 + 1e-12, 0.01), 12)
    psi0 = nm.initial_sae(nm.InitialStateSpec(0.0))
    rho_sa = ptrace(projector(dynamics.evolve_amplitudes(psi0, ps)), (2, 2, 2), (0, 1))
    return float(np.max(np.abs(info.concurrence_array(rho_sa) - np.sqrt(1.0 - ps))))


def check_divisibility(cfg: RunConfig) -> int:
    """Number of grid intervals where Choi positivity disagrees with p being nondecreasing.

    Also counts growth intervals of E_SA that are not matched by gamma < 0 (within one
    step) or whose intermediate map is CP.
    """
    bath = cfg.bath
    ts = np.linspace(0.0, cfg.t_max, cfg.steps + 1)
    p = dynamics.p_of_t(bath, ts)
    bad = 0
    for i in range(cfg.steps):
        if p[i] >= 1.0:
            continue
        imap = dynamics.intermediate_map(bath, float(ts[i]), float(ts[i + 1]))
        if imap.is_cp != (p[i + 1] >= p[i]):
            bad += 1
    series = nm.trajectory(bath, nm.InitialStateSpec(cfg.r), cfg.t_max, cfg.steps)
    gamma = series.gamma
    for i, j in nm.growth_runs(series.e_sa):
        lo, hi = max(0, i - 1), min(len(ts) - 1, j + 1)
        if not np.any(gamma[lo : hi + 1] < 0):
            bad += 1
        if dynamics.intermediate_map(bath, float(ts[i]), float(ts[j])).is_cp:
            bad += 1
    return bad


def cmd_verify(cfg: RunConfig, inject_fault: bool = False) -> int:
    kraus_tol = KRAUS_OSC_TOL if cfg.bath.oscillatory else KRAUS_MARKOV_TOL
    dual, drift = check_duality(cfg)
    checks = [
        ("integrator_vs_kraus", check_integrator(cfg), kraus_tol),
        ("kw_vs_bruteforce", check_kw_gap(cfg, fault=1e-2 if inject_fault else 0.0), KW_GAP_TOL),
        ("duality_step_sum", dual, DUALITY_TOL),
        ("entropy_S_drift", drift, ENTROPY_DRIFT_TOL),
        ("concurrence_closed_form", check_concurrence(), CONCURRENCE_TOL),
        ("divisibility_mismatches", float(check_divisibility(cfg)), 0.0),
    ]
    ok = True
    for name, dev, tol in checks:
        passed = dev <= tol if tol == 0.0 else dev < tol
        ok &= passed
        print(f"{name:<26} max_dev={dev:.3e} tol={tol:.1e} {'PASS' if passed else 'FAIL'}")
    print("ALL PASS" if ok else "FAILED")
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = _apply_config(parser, argv)
    _validate(parser, args)
    try:
        if args.command == "simulate":
            return cmd_simulate(_config(args))
        if args.command == "measure":
            return cmd_measure(_config(args), args.r_grid or nm.DEFAULT_R_GRID)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_verify(_config(args), inject_fault=args.inject_fault)
    except (OSError, ValueError) as exc:
        print(f"nonmarkov: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
