"""Sweep driver and command line interface.

A sweep takes one flat key=value config describing a periodic operator, an
obstacle problem, and an eps sequence.  It tabulates the effective operator,
solves the homogenized obstacle problem once, then solves the oscillating
problem for each eps and records variable-exponent error norms, energies,
coincidence-set gaps, and the dual-bound certificate.  Reports are written
as a pinned-column CSV (byte-identical across runs) or as a JSON mirror of
the full record.

Subcommands: check (structural hypotheses), cell (effective flux at a
point, or a table file), solve (single discrete solve), sweep.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import analysis, cell
from .fields import ExponentField, FluxOperator, WeightField, rescale, \
    verify_structural
from .grid import Grid, ScalarField, luxembourg_norm, norm_w1p0
from .vi_solver import SolverParams, solve_obstacle

_WEIGHT_NAMES = ("gamma", "gamma1", "gamma2", "gamma3")


@dataclass
class SweepConfig:
    family: str = "weighted_p"
    exponent_kind: str = "constant"
    exponent_base: float = 2.0
    exponent_amplitude: float = 0.0
    exponent_periods: int = 1
    exponent_alpha: float | None = None
    exponent_beta: float | None = None
    gamma_kind: str = "constant"
    gamma_base: float = 1.0
    gamma_amplitude: float = 0.0
    gamma_periods: int = 1
    gamma_axis: int | None = None
    gamma1_kind: str = "constant"
    gamma1_base: float = 1.0
    gamma1_amplitude: float = 0.0
    gamma1_periods: int = 1
    gamma1_axis: int | None = None
    gamma2_kind: str = "constant"
    gamma2_base: float = 1.0
    gamma2_amplitude: float = 0.0
    gamma2_periods: int = 1
    gamma2_axis: int | None = None
    gamma3_kind: str = "constant"
    gamma3_base: float = 2.0
    gamma3_amplitude: float = 0.0
    gamma3_periods: int = 1
    gamma3_axis: int | None = None
    delta: float = 1e-8
    dim: int = 1
    length: float = 1.0
    f_constant: float = -16.0
    psi_constant: float = -1.0
    obstacle_oscillation: str = "none"
    obstacle_amplitude: float = 1.0
    n_fine: int = 512
    n_cell: int = 256
    eps_list: tuple = (0.25, 0.125, 0.0625)
    table_xi_max: float = 8.0
    table_n_samples: int = 65
    table_n_radii: int = 24
    table_n_angles: int = 32
    table_r_min_factor: float = 1e-4
    solver_max_sweeps: int = 200_000
    solver_tol_kkt: float | None = None
    solver_relaxation: float | str = "auto"
    ls_q_tol: float = 0.05
    ls_s: float | None = None


def _parse_number(tok: str) -> float:
    tok = tok.strip()
    if "/" in tok:
        num, den = tok.split("/", 1)
        return float(num) / float(den)
    return float(tok)


def _parse_eps_list(val: str) -> tuple:
    parts = [_parse_number(tok) for tok in val.split(",") if tok.strip()]
    if not parts:
        raise ValueError("eps_list is empty")
    return tuple(parts)


def _opt(parser):
    def run(val: str):
        return None if val.lower() == "none" else parser(val)
    return run


def _relaxation(val: str):
    return "auto" if val.lower() == "auto" else float(val)


def _build_key_table() -> dict:
    keys = {
        "family": ("family", str),
        "exponent.kind": ("exponent_kind", str),
        "exponent.base": ("exponent_base", float),
        "exponent.amplitude": ("exponent_amplitude", float),
        "exponent.periods": ("exponent_periods", int),
        "exponent.alpha": ("exponent_alpha", _opt(float)),
        "exponent.beta": ("exponent_beta", _opt(float)),
        "delta": ("delta", float),
        "dim": ("dim", int),
        "length": ("length", float),
        "f.constant": ("f_constant", float),
        "psi.constant": ("psi_constant", float),
        "obstacle.oscillation": ("obstacle_oscillation", str),
        "obstacle.amplitude": ("obstacle_amplitude", float),
        "n_fine": ("n_fine", int),
        "n_cell": ("n_cell", int),
        "eps_list": ("eps_list", _parse_eps_list),
        "table.xi_max": ("table_xi_max", float),
        "table.n_samples": ("table_n_samples", int),
        "table.n_radii": ("table_n_radii", int),
        "table.n_angles": ("table_n_angles", int),
        "table.r_min_factor": ("table_r_min_factor", float),
        "solver.max_sweeps": ("solver_max_sweeps", int),
        "solver.tol_kkt": ("solver_tol_kkt", _opt(float)),
        "solver.relaxation": ("solver_relaxation", _relaxation),
        "ls.q_tol": ("ls_q_tol", float),
        "ls.s": ("ls_s", _opt(float)),
    }
    for name in _WEIGHT_NAMES:
        keys[f"{name}.kind"] = (f"{name}_kind", str)
        keys[f"{name}.base"] = (f"{name}_base", float)
        keys[f"{name}.amplitude"] = (f"{name}_amplitude", float)
        keys[f"{name}.periods"] = (f"{name}_periods", int)
        keys[f"{name}.axis"] = (f"{name}_axis", _opt(int))
    return keys


_KEY_TABLE = _build_key_table()


def parse_config(text: str, path: str = "<config>") -> SweepConfig:
    """Flat key=value parser; [section] headers are decorative, '#' comments."""
    cfg = SweepConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _KEY_TABLE:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        attr, parser = _KEY_TABLE[key]
        try:
            setattr(cfg, attr, parser(val))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad value for {key!r}: "
                             f"{exc}") from None
    _validate_config(cfg, path)
    return cfg


def load_config(path) -> SweepConfig:
    with open(path) as fh:
        return parse_config(fh.read(), path=str(path))


def _validate_config(cfg: SweepConfig, path: str) -> None:
    if cfg.dim not in (1, 2):
        raise ValueError(f"{path}: dim must be 1 or 2")
    eps = cfg.eps_list
    if any(e <= 0.0 for e in eps):
        raise ValueError(f"{path}: eps values must be positive")
    if any(b <= a for a, b in zip(eps[1:], eps[:-1])):
        raise ValueError(f"{path}: eps_list must be strictly decreasing")
    if cfg.n_fine * min(eps) < 16.0 * cfg.length:
        raise ValueError(
            f"{path}: n_fine too coarse for the smallest eps; need "
            f"n_fine * min(eps) >= 16 * length "
            f"({cfg.n_fine} * {min(eps):g} < {16.0 * cfg.length:g})")
    if cfg.obstacle_oscillation not in ("none", "gradient"):
        raise ValueError(f"{path}: obstacle.oscillation must be "
                         "'none' or 'gradient'")


def _weight_from(cfg: SweepConfig, name: str) -> WeightField:
    return WeightField(kind=getattr(cfg, f"{name}_kind"),
                       base=getattr(cfg, f"{name}_base"),
                       amplitude=getattr(cfg, f"{name}_amplitude"),
                       periods=getattr(cfg, f"{name}_periods"),
                       axis=getattr(cfg, f"{name}_axis"))


def build_operator(cfg: SweepConfig) -> FluxOperator:
    exponent = ExponentField(kind=cfg.exponent_kind, base=cfg.exponent_base,
                             amplitude=cfg.exponent_amplitude,
                             periods=cfg.exponent_periods,
                             alpha=cfg.exponent_alpha, beta=cfg.exponent_beta)
    kwargs = {"family": cfg.family, "exponent": exponent, "delta": cfg.delta}
    if cfg.family in ("weighted_p", "weighted_px"):
        kwargs["gamma"] = _weight_from(cfg, "gamma")
    if cfg.family == "log_type":
        kwargs["gamma1"] = _weight_from(cfg, "gamma1")
        kwargs["gamma2"] = _weight_from(cfg, "gamma2")
        kwargs["gamma3"] = _weight_from(cfg, "gamma3")
    return FluxOperator(**kwargs)


def _table_params(cfg: SweepConfig) -> cell.TableParams:
    return cell.TableParams(xi_max=cfg.table_xi_max,
                            n_samples=cfg.table_n_samples,
                            n_radii=cfg.table_n_radii,
                            n_angles=cfg.table_n_angles,
                            r_min_factor=cfg.table_r_min_factor,
                            cell=cell.CellParams(n_cell=cfg.n_cell))


def _solver_params(cfg: SweepConfig) -> SolverParams:
    return SolverParams(tol_kkt=cfg.solver_tol_kkt,
                        max_sweeps=cfg.solver_max_sweeps,
                        relaxation=cfg.solver_relaxation)


def _obstacle_for(cfg: SweepConfig, eps: float | None):
    if eps is None or cfg.obstacle_oscillation == "none":
        return cfg.psi_constant
    return analysis.obstacle_family(cfg.psi_constant, eps,
                                    amplitude=cfg.obstacle_amplitude,
                                    length=cfg.length)


# ------------------------------------------------------------------- sweep

@dataclass
class EpsRow:
    eps: float
    l_alpha_error: float
    grad_l_alpha_error: float
    energy_eps: float
    coincidence_measure_eps: float
    measure_gap: float
    chi_l1_gap: float
    hausdorff: float
    ls_pass: bool
    s_norm_upper: float
    converged: bool
    sweeps: int
    kkt_tol: float
    kkt_max_negative_residual: float
    kkt_max_complementarity: float
    kkt_max_inactive_residual: float
    ls_q_max: float
    ls_q_outside_contact: float


@dataclass
class SweepReport:
    config: SweepConfig
    structural_passed: bool
    structural_monotonicity_min: float
    table_sha256: str
    retabulations: int
    energy_0: float
    coincidence_measure_0: float
    u0_converged: bool
    u0_sweeps: int
    u0_xi_peak: float
    degenerate_measure: float
    s_norm_upper_0: float
    rows: list = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return self.u0_converged and all(r.converged for r in self.rows)


def run_sweep(cfg: SweepConfig,
              table: cell.HomogenizedOperatorTable | None = None,
              log=None) -> SweepReport:
    def say(msg):
        if log is not None:
            print(msg, file=log)

    op = build_operator(cfg)
    structural = verify_structural(op, dim=cfg.dim)
    say(f"structural margins: mono {structural.monotonicity_min:.3e} "
        f"passed {structural.passed}")

    grid = Grid(dim=cfg.dim, n=cfg.n_fine, length=cfg.length)
    sp = _solver_params(cfg)
    tp = _table_params(cfg)
    if table is None:
        say(f"tabulating effective operator (xi_max {tp.xi_max:g})")
        table = cell.tabulate(op, tp, dim=cfg.dim)

    # homogenized solve, re-tabulating if gradients leave the sampled range
    retabs = 0
    psi0 = _obstacle_for(cfg, None)
    while True:
        u0 = solve_obstacle(table, grid, cfg.f_constant, psi0, params=sp)
        say(f"u0 solve: sweeps {u0.sweeps} converged {u0.converged} "
            f"xi_peak {u0.xi_peak:.3g} / table {table.xi_max:g}")
        if u0.xi_peak <= table.xi_max or retabs >= 3:
            break
        retabs += 1
        tp = replace(tp, xi_max=2.5 * u0.xi_peak)
        say(f"re-tabulating with xi_max {tp.xi_max:g}")
        table = cell.tabulate(op, tp, dim=cfg.dim)

    chi0 = analysis.coincidence(u0.u, psi0, tol_kkt=u0.kkt.tol)
    energy_0 = analysis.energy(table, u0.u)
    ls0 = analysis.lewy_stampacchia(table, u0, cfg.f_constant, psi0,
                                    s=cfg.ls_s, q_tol=cfg.ls_q_tol)
    p_macro = ExponentField(kind=cfg.exponent_kind, base=cfg.exponent_base,
                            amplitude=cfg.exponent_amplitude,
                            periods=cfg.exponent_periods,
                            alpha=cfg.exponent_alpha, beta=cfg.exponent_beta)

    report = SweepReport(
        config=cfg, structural_passed=structural.passed,
        structural_monotonicity_min=structural.monotonicity_min,
        table_sha256=cell.table_digest(table), retabulations=retabs,
        energy_0=energy_0, coincidence_measure_0=chi0.measure,
        u0_converged=u0.converged, u0_sweeps=u0.sweeps,
        u0_xi_peak=u0.xi_peak, degenerate_measure=ls0.degenerate_measure,
        s_norm_upper_0=ls0.s_norm_upper)

    for eps in cfg.eps_list:
        op_eps = rescale(op, eps)
        psi_eps = _obstacle_for(cfg, eps)
        sol = solve_obstacle(op_eps, grid, cfg.f_constant, psi_eps, params=sp)
        diff = ScalarField(grid, sol.u.values - u0.u.values)
        l_err = luxembourg_norm(diff, p_macro)
        g_err = norm_w1p0(diff, p_macro)
        chi_eps = analysis.coincidence(sol.u, psi_eps, tol_kkt=sol.kkt.tol)
        gap = analysis.measure_convergence(chi_eps, chi0)
        ls = analysis.lewy_stampacchia(op_eps, sol, cfg.f_constant, psi_eps,
                                       s=cfg.ls_s, q_tol=cfg.ls_q_tol)
        e_eps = analysis.energy(op_eps, sol.u)
        say(f"eps {eps:g}: sweeps {sol.sweeps} converged {sol.converged} "
            f"err {l_err:.3e} energy {e_eps:.6g}")
        report.rows.append(EpsRow(
            eps=eps, l_alpha_error=l_err, grad_l_alpha_error=g_err,
            energy_eps=e_eps, coincidence_measure_eps=chi_eps.measure,
            measure_gap=gap.measure_gap, chi_l1_gap=gap.chi_l1_gap,
            hausdorff=gap.hausdorff, ls_pass=ls.passed,
            s_norm_upper=ls.s_norm_upper, converged=sol.converged,
            sweeps=sol.sweeps, kkt_tol=sol.kkt.tol,
            kkt_max_negative_residual=sol.kkt.max_negative_residual,
            kkt_max_complementarity=sol.kkt.max_complementarity,
            kkt_max_inactive_residual=sol.kkt.max_inactive_residual,
            ls_q_max=ls.q_max, ls_q_outside_contact=ls.q_outside_contact))
    return report


# ----------------------------------------------------------------- reports

CSV_COLUMNS = ("eps", "l_alpha_error", "grad_l_alpha_error", "energy_eps",
               "energy_0", "coincidence_measure_eps", "measure_gap",
               "chi_l1_gap", "hausdorff", "ls_pass", "s_norm_upper")


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    return "%.17g" % v


def report_csv(report: SweepReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in report.rows:
        vals = {
            "eps": row.eps,
            "l_alpha_error": row.l_alpha_error,
            "grad_l_alpha_error": row.grad_l_alpha_error,
            "energy_eps": row.energy_eps,
            "energy_0": report.energy_0,
            "coincidence_measure_eps": row.coincidence_measure_eps,
            "measure_gap": row.measure_gap,
            "chi_l1_gap": row.chi_l1_gap,
            "hausdorff": row.hausdorff,
            "ls_pass": row.ls_pass,
            "s_norm_upper": row.s_norm_upper,
        }
        lines.append(",".join(_fmt_value(vals[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, np.ndarray):
        return [_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if dataclasses.is_dataclass(obj):
        return {f.name: _jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _jsonable(obj.item())
    raise TypeError(f"cannot serialize {type(obj)!r}")


def report_json(report: SweepReport) -> str:
    payload = _jsonable(report)
    payload["all_converged"] = report.all_converged
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def emit_report(report: SweepReport, path=None, fmt: str = "csv") -> str:
    text = report_csv(report) if fmt == "csv" else report_json(report)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


# -------------------------------------------------------------------- CLI

def _cmd_check(args) -> int:
    cfg = load_config(args.config)
    op = build_operator(cfg)
    rep = verify_structural(op, n_samples=args.samples, dim=cfg.dim)
    print(f"family                  {op.family}")
    print(f"exponent range          [{op.exponent.alpha:g}, "
          f"{op.exponent.beta:g}]")
    print(f"samples                 {rep.n_samples}")
    print(f"monotonicity_min        {rep.monotonicity_min:.6e}")
    print(f"coercivity_margin_min   {rep.coercivity_margin_min:.6e}")
    print(f"boundedness_margin_min  {rep.boundedness_margin_min:.6e}")
    print(f"passed                  {'true' if rep.passed else 'false'}")
    return 0 if rep.passed else 1


def _cmd_cell(args) -> int:
    cfg = load_config(args.config)
    op = build_operator(cfg)
    if args.tabulate:
        if not args.out:
            print("cell: --tabulate needs --out", file=sys.stderr)
            return 2
        table = cell.tabulate(op, _table_params(cfg), dim=cfg.dim)
        digest = cell.export_table(table, args.out)
        print(f"wrote table {args.out} (sha256 {digest})")
        return 0
    if args.xi is None:
        print("cell: need --xi or --tabulate with --out", file=sys.stderr)
        return 2
    xi = [_parse_number(tok) for tok in args.xi.split(",")]
    if len(xi) != cfg.dim:
        print(f"cell: --xi needs {cfg.dim} component(s)", file=sys.stderr)
        return 2
    params = cell.CellParams(n_cell=cfg.n_cell)
    sol = cell.solve_corrector(op, xi[0] if cfg.dim == 1 else xi, params)
    comps = " ".join("%.12g" % v for v in sol.flux_avg)
    print(f"a0({args.xi}) = {comps}")
    if sol.h_value is not None:
        print(f"h({args.xi})  = {sol.h_value:.12g}")
    print(f"residual = {sol.residual_norm:.3e}  converged = "
          f"{'true' if sol.converged else 'false'}")
    return 0 if sol.converged else 1


def _cmd_solve(args) -> int:
    cfg = load_config(args.config)
    op = build_operator(cfg)
    grid = Grid(dim=cfg.dim, n=cfg.n_fine, length=cfg.length)
    if args.homogenized:
        if args.table:
            flux = cell.load_table(args.table)
        else:
            flux = cell.tabulate(op, _table_params(cfg), dim=cfg.dim)
        psi = _obstacle_for(cfg, None)
        label = "homogenized"
    else:
        if args.eps is None:
            print("solve: need --eps or --homogenized", file=sys.stderr)
            return 2
        eps = _parse_number(args.eps)
        flux = rescale(op, eps)
        psi = _obstacle_for(cfg, eps)
        label = f"eps {eps:g}"
    sol = solve_obstacle(flux, grid, cfg.f_constant, psi,
                         params=_solver_params(cfg))
    chi = analysis.coincidence(sol.u, psi, tol_kkt=sol.kkt.tol)
    ls = analysis.lewy_stampacchia(flux, sol, cfg.f_constant, psi,
                                   s=cfg.ls_s, q_tol=cfg.ls_q_tol)
    print(f"solve {label}: sweeps {sol.sweeps} "
          f"converged {'true' if sol.converged else 'false'}")
    print(f"kkt: neg {sol.kkt.max_negative_residual:.3e} "
          f"comp {sol.kkt.max_complementarity:.3e} "
          f"inactive {sol.kkt.max_inactive_residual:.3e} "
          f"tol {sol.kkt.tol:.3e}")
    print(f"coincidence measure {chi.measure:.6g}")
    print(f"lewy-stampacchia: lower {ls.lower_violation:.3e} "
          f"upper {ls.upper_violation:.3e} q_max {ls.q_max:.4g} "
          f"s_norm_upper {ls.s_norm_upper:.6g} "
          f"passed {'true' if ls.passed else 'false'}")
    if args.out:
        _write_solution(args.out, sol.u)
        print(f"wrote solution {args.out}")
    return 0 if sol.converged else 1


def _write_solution(path, u: ScalarField) -> None:
    grid = u.grid
    with open(path, "w") as fh:
        if grid.dim == 1:
            fh.write("x,u\n")
            for x, v in zip(grid.node_points(), u.values):
                fh.write("%.17g,%.17g\n" % (x, v))
        else:
            fh.write("x0,x1,u\n")
            pts = grid.node_points()
            for i in range(pts.shape[0]):
                for j in range(pts.shape[1]):
                    fh.write("%.17g,%.17g,%.17g\n"
                             % (pts[i, j, 0], pts[i, j, 1], u.values[i, j]))


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    table = cell.load_table(args.table) if args.table else None
    report = run_sweep(cfg, table=table,
                       log=sys.stderr if args.verbose else None)
    text = emit_report(report, path=args.out, fmt=args.format)
    if args.out is None:
        sys.stdout.write(text)
    else:
        print(f"wrote {args.format} report {args.out}")
    ok = report.all_converged and report.structural_passed
    if not ok:
        print("sweep: some solves failed to converge or the operator "
              "failed structural checks", file=sys.stderr)
    return 0 if ok else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="homoglab",
        description="Obstacle problems with periodically oscillating "
                    "variable-exponent operators: cell problems, "
                    "homogenized solves, eps sweeps.")
    sub = ap.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="verify structural hypotheses")
    p_check.add_argument("--config", required=True)
    p_check.add_argument("--samples", type=int, default=10_000)
    p_check.set_defaults(fn=_cmd_check)

    p_cell = sub.add_parser("cell", help="effective flux at a point, or "
                                         "tabulate to a file")
    p_cell.add_argument("--config", required=True)
    p_cell.add_argument("--xi", help="mean gradient, comma separated in 2D")
    p_cell.add_argument("--tabulate", action="store_true")
    p_cell.add_argument("--out", help="table file for --tabulate")
    p_cell.set_defaults(fn=_cmd_cell)

    p_solve = sub.add_parser("solve", help="single obstacle solve")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--eps", help="oscillation scale (or fraction)")
    p_solve.add_argument("--homogenized", action="store_true")
    p_solve.add_argument("--table", help="reuse an exported table")
    p_solve.add_argument("--out", help="write node values as CSV")
    p_solve.set_defaults(fn=_cmd_solve)

    p_sweep = sub.add_parser("sweep", help="full eps sweep with report")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", help="report path (stdout when omitted)")
    p_sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sweep.add_argument("--table", help="reuse an exported table")
    p_sweep.add_argument("--verbose", action="store_true")
    p_sweep.set_defaults(fn=_cmd_sweep)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"homoglab {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
