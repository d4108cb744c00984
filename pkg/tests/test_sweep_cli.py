"""Config parsing, sweep reports, file formats, and the command line."""
import json
import subprocess

import numpy as np
import pytest

from homoglab import (build_operator, emit_report, load_config, parse_config,
                      report_csv, report_json, run_sweep)
from homoglab.sweep_cli import CSV_COLUMNS, _fmt_value

MICRO = """\
# tiny deterministic setup for fast end-to-end checks
family = weighted_p
exponent.kind = constant
exponent.base = 2.0
gamma.kind = inverse_sinusoidal
gamma.base = 2.0
gamma.amplitude = 1.0

[discretization]
dim = 1
n_fine = 64
n_cell = 32
eps_list = 1/4
table.xi_max = 24.0
table.n_samples = 9
"""


def test_parse_config_full_round():
    cfg = parse_config(MICRO, "micro")
    assert cfg.family == "weighted_p"
    assert cfg.gamma_kind == "inverse_sinusoidal"
    assert cfg.eps_list == (0.25,)
    assert cfg.n_fine == 64 and cfg.n_cell == 32
    assert cfg.table_xi_max == 24.0 and cfg.table_n_samples == 9


def test_parse_config_fractions_and_lists():
    cfg = parse_config(MICRO.replace("eps_list = 1/4",
                                     "eps_list = 1/4, 0.125, 1/16")
                       .replace("n_fine = 64", "n_fine = 256"), "micro")
    assert cfg.eps_list == (0.25, 0.125, 0.0625)


def test_parse_config_unknown_key_reports_line():
    bad = MICRO + "no.such.key = 1\n"
    with pytest.raises(ValueError, match=r"micro:16: unknown key"):
        parse_config(bad, "micro")


def test_parse_config_bad_value_reports_line():
    bad = MICRO.replace("n_fine = 64", "n_fine = many")
    with pytest.raises(ValueError, match=r"micro:11: bad value"):
        parse_config(bad, "micro")


def test_validation_rules():
    with pytest.raises(ValueError, match="decreasing"):
        parse_config(MICRO.replace("eps_list = 1/4",
                                   "eps_list = 1/8, 1/4"), "m")
    with pytest.raises(ValueError, match="too coarse"):
        parse_config(MICRO.replace("n_fine = 64", "n_fine = 32"), "m")
    with pytest.raises(ValueError, match="dim"):
        parse_config(MICRO.replace("dim = 1", "dim = 3"), "m")
    with pytest.raises(ValueError, match="oscillation"):
        parse_config(MICRO + "obstacle.oscillation = wiggle\n", "m")


def test_build_operator_wires_profiles():
    cfg = parse_config(MICRO, "micro")
    op = build_operator(cfg)
    assert op.family == "weighted_p"
    assert op.gamma.kind == "inverse_sinusoidal"
    assert op.exponent.alpha == op.exponent.beta == 2.0

    log_cfg = parse_config(MICRO.replace("family = weighted_p",
                                         "family = log_type"), "micro")
    log_op = build_operator(log_cfg)
    assert log_op.family == "log_type" and log_op.gamma3.base == 2.0


def test_shipped_configs_parse(configs_dir):
    for path in sorted(configs_dir.glob("*.cfg")):
        cfg = load_config(path)
        assert cfg.n_fine * min(cfg.eps_list) >= 16 * cfg.length


def test_micro_sweep_deterministic_and_well_formed():
    cfg = parse_config(MICRO, "micro")
    rep1 = run_sweep(cfg)
    rep2 = run_sweep(cfg)
    csv1, csv2 = report_csv(rep1), report_csv(rep2)
    assert csv1 == csv2
    lines = csv1.strip().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 1 + len(cfg.eps_list)
    row = dict(zip(CSV_COLUMNS, lines[1].split(",")))
    assert float(row["eps"]) == 0.25
    assert row["ls_pass"] in ("true", "false")
    assert rep1.all_converged and rep1.structural_passed
    assert len(rep1.table_sha256) == 64


def test_json_report_structure():
    cfg = parse_config(MICRO, "micro")
    rep = run_sweep(cfg)
    blob = json.loads(report_json(rep))
    assert blob["all_converged"] is True
    assert blob["config"]["family"] == "weighted_p"
    assert len(blob["rows"]) == 1
    assert set(CSV_COLUMNS) - {"energy_0"} <= set(blob["rows"][0])


def test_emit_report_writes_csv_bytes(tmp_path):
    cfg = parse_config(MICRO, "micro")
    rep = run_sweep(cfg)
    out = tmp_path / "r.csv"
    emit_report(rep, out)
    assert out.read_text() == report_csv(rep)
    out_json = tmp_path / "r.json"
    emit_report(rep, out_json, fmt="json")
    json.loads(out_json.read_text())


def test_formatting_of_special_values():
    assert _fmt_value(float("inf")) == "+inf"
    assert _fmt_value(float("-inf")) == "-inf"
    assert _fmt_value(float("nan")) == "nan"
    assert _fmt_value(True) == "true" and _fmt_value(False) == "false"
    assert _fmt_value(0.25) == "0.25"
    # 17 significant digits round-trip doubles exactly
    x = 0.1 + 0.2
    assert float(_fmt_value(x)) == x


def _cli(*args):
    return subprocess.run(["homoglab", *map(str, args)],
                          capture_output=True, text=True)


def test_cli_check_and_sweep_round(tmp_path):
    cfg_path = tmp_path / "micro.cfg"
    cfg_path.write_text(MICRO)

    chk = _cli("check", "--config", cfg_path)
    assert chk.returncode == 0, chk.stderr
    assert "monotonicity" in chk.stdout

    out = tmp_path / "sweep.csv"
    swp = _cli("sweep", "--config", cfg_path, "--out", out)
    assert swp.returncode == 0, swp.stderr
    text = out.read_text()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)

    # byte-identical on repetition
    out2 = tmp_path / "sweep2.csv"
    swp2 = _cli("sweep", "--config", cfg_path, "--out", out2)
    assert swp2.returncode == 0
    assert out.read_bytes() == out2.read_bytes()

    blob = tmp_path / "sweep.json"
    swj = _cli("sweep", "--config", cfg_path, "--out", blob,
               "--format", "json")
    assert swj.returncode == 0
    json.loads(blob.read_text())


def test_cli_cell_and_solve(tmp_path):
    cfg_path = tmp_path / "micro.cfg"
    cfg_path.write_text(MICRO)

    cell = _cli("cell", "--config", cfg_path, "--xi", "1.0")
    assert cell.returncode == 0, cell.stderr
    # harmonic mean: a0(1) = 0.5
    assert "0.5" in cell.stdout

    tab = tmp_path / "table.homogtable"
    ct = _cli("cell", "--config", cfg_path, "--tabulate", "--out", tab)
    assert ct.returncode == 0, ct.stderr
    assert tab.exists()

    sol_out = tmp_path / "solution.csv"
    sv = _cli("solve", "--config", cfg_path, "--eps", "0.25",
              "--out", sol_out)
    assert sv.returncode == 0, sv.stderr
    assert "lewy-stampacchia" in sv.stdout
    rows = sol_out.read_text().strip().splitlines()
    assert len(rows) == 1 + 65  # header + nodes

    sh = _cli("solve", "--config", cfg_path, "--homogenized", "--table", tab)
    assert sh.returncode == 0, sh.stderr


def test_cli_rejects_broken_config(tmp_path):
    cfg_path = tmp_path / "broken.cfg"
    cfg_path.write_text(MICRO + "mystery = 3\n")
    res = _cli("sweep", "--config", cfg_path)
    assert res.returncode == 2
    assert "unknown key" in res.stderr
    missing = _cli("check", "--config", tmp_path / "nope.cfg")
    assert missing.returncode == 2


def test_cli_tabulate_requires_out(tmp_path):
    cfg_path = tmp_path / "micro.cfg"
    cfg_path.write_text(MICRO)
    res = _cli("cell", "--config", cfg_path, "--tabulate")
    assert res.returncode == 2
