"""Numerical laboratory for obstacle problems with periodically oscillating
variable-exponent monotone operators: cell problems and effective-operator
tables, projected-SOR obstacle solves with KKT certificates, and eps sweeps
tracking solution, energy, and free-boundary convergence.
"""
from .fields import (ExponentField, FluxOperator, StructuralReport,
                     WeightField, eval_exponent, eval_flux, rescale,
                     verify_structural)
from .grid import (Grid, ScalarField, VectorField, cell_average, gradient,
                   lp_norm, luxembourg_norm, modular, norm_w1p0)
from .vi_solver import (DiscreteSolution, KKTReport, SolverParams,
                        apply_operator, certify_kkt, default_tol_kkt,
                        evaluate_flux, solve_dirichlet, solve_obstacle)
from .cell import (CellParams, CorrectorSolution, HomogenizedOperatorTable,
                   TableDiagnostics, TableParams, export_table,
                   homogenized_density, homogenized_flux, load_table,
                   solve_corrector, table_diagnostics, table_digest, tabulate)
from .analysis import (CoincidenceSet, IndicatorGap, LewyStampacchiaReport,
                       coincidence, default_s_exponent, energy,
                       hausdorff_distance, lewy_stampacchia,
                       measure_convergence, obstacle_family, source_term)
from .sweep_cli import (SweepConfig, SweepReport, build_operator,
                        emit_report, load_config, parse_config, report_csv,
                        report_json, run_sweep)

__version__ = "0.1.0"

__all__ = [
    "ExponentField", "FluxOperator", "StructuralReport", "WeightField",
    "eval_exponent", "eval_flux", "rescale", "verify_structural",
    "Grid", "ScalarField", "VectorField", "cell_average", "gradient",
    "lp_norm", "luxembourg_norm", "modular", "norm_w1p0",
    "DiscreteSolution", "KKTReport", "SolverParams", "apply_operator",
    "certify_kkt", "default_tol_kkt", "evaluate_flux", "solve_dirichlet",
    "solve_obstacle",
    "CellParams", "CorrectorSolution", "HomogenizedOperatorTable",
    "TableDiagnostics", "TableParams", "export_table",
    "homogenized_density", "homogenized_flux", "load_table",
    "solve_corrector", "table_diagnostics", "table_digest", "tabulate",
    "CoincidenceSet", "IndicatorGap", "LewyStampacchiaReport",
    "coincidence", "default_s_exponent", "energy", "hausdorff_distance",
    "lewy_stampacchia", "measure_convergence", "obstacle_family",
    "source_term",
    "SweepConfig", "SweepReport", "build_operator", "emit_report",
    "load_config", "parse_config", "report_csv", "report_json", "run_sweep",
    "__version__",
]
