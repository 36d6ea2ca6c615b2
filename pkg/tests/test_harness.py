import csv
import json
import math
from fractions import Fraction
from pathlib import Path

import pytest

from sfcdd.errors import ConfigurationError, ResourceError
from sfcdd.harness import (
    CONFIG_ERROR,
    ExperimentConfig,
    ResultRow,
    balanced_shape,
    emit_results,
    load_config,
    load_results,
    parse_config_text,
    resolve_grid,
    resolve_point,
    run_experiment,
)
from sfcdd.solvers import CONVERGED, RECOVERY_FAILED, ConvergenceRecord

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def small(**kw):
    base = dict(name="t", d=1, level_rule="weak", S=(6,), P=(8,), q=4, gamma=(Fraction(1),), runs=2, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_parse_and_round_trip_text():
    text = "# comment\nname = demo\nS = 8, 10\ngamma = 0.5,1.5\np_fault = 0.1\ncheck_shadow = no\n"
    cfg = ExperimentConfig.from_mapping(parse_config_text(text))
    assert cfg.S == (8, 10) and cfg.gamma == (Fraction(1, 2), Fraction(3, 2)) and not cfg.check_shadow
    again = ExperimentConfig.from_mapping(parse_config_text(cfg.to_text()))
    assert again == cfg


def test_config_errors():
    with pytest.raises(ConfigurationError):
        parse_config_text("no equals sign")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_mapping({"colour": "red"})
    with pytest.raises(ConfigurationError):
        ExperimentConfig(solver="gmres")
    with pytest.raises(ConfigurationError):
        ExperimentConfig(d=2, level_rule="weak")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_mapping({"check_shadow": "maybe"})


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.cfg")))
def test_shipped_configs_parse(path):
    cfg = load_config(path)
    assert cfg.point_keys()


def test_grid_rules():
    cfg = small()
    assert resolve_grid(cfg, 8, 100).n_points == 25599
    assert resolve_grid(cfg, 8, 64).levels == (14,) and resolve_grid(cfg, 8, 64).points is None
    iso = small(d=6, level_rule="isotropic")
    assert resolve_grid(iso, 8, 16).levels == (2,) * 6
    pts = small(d=6, level_rule="isotropic-points")
    g = resolve_grid(pts, 8, 16)
    assert g.n_points <= 4096 and max(g.shape) - min(g.shape) <= 1
    assert resolve_grid(small(level_rule="strong", L=10), 8, 4).n_points == 1023


def test_balanced_shape():
    assert balanced_shape(4096, 6) == (4, 4, 4, 4, 4, 4)
    n = balanced_shape(1000, 3)
    assert n == (10, 10, 10)
    n = balanced_shape(5000, 2)
    assert math.prod(n) <= 5000 and max(n) - min(n) <= 1


def test_resource_and_config_limits():
    with pytest.raises(ResourceError):
        resolve_point(small(), 0, (8, 2048, Fraction(1, 2), 0.0))
    with pytest.raises(ResourceError):
        resolve_point(small(), 0, (20, 16, Fraction(1, 2), 0.0))
    with pytest.raises(ConfigurationError):
        resolve_point(small(), 0, (6, 4, Fraction(2), 0.0))
    with pytest.raises(ConfigurationError):
        resolve_point(small(q=100), 0, (6, 4, Fraction(1, 2), 0.0))
    pt = resolve_point(small(force=True), 0, (6, 2048, Fraction(1, 2), 0.0))
    assert pt.P == 2048


def test_config_error_rows():
    table = run_experiment(small(P=(2, 8)))
    assert table.rows[0].status == CONFIG_ERROR and "gamma" in table.rows[0].message
    assert all(r.status == CONVERGED for r in table.rows[1:])
    assert len(table.rows) == 3


def test_run_and_summary():
    table = run_experiment(small(p_fault=(0.0, 0.2), runs=3))
    summ = table.summary()
    assert [s["p_fault"] for s in summ] == [0.0, 0.2]
    clean = [r for r in table.rows if r.point == 0]
    assert all(r.status == CONVERGED and r.n_faults == 0 for r in clean)
    assert summ[0]["mean_K"] == pytest.approx(sum(r.K for r in clean) / 3)
    assert summ[0]["discarded"] == 0
    faulty = [r for r in table.rows if r.point == 1]
    assert any(r.n_faults > 0 for r in faulty)
    assert all(0 < r.r_p < 1 for r in faulty)


def test_failed_runs_are_discarded():
    table = run_experiment(small(gamma=(Fraction(1, 2),), p_fault=(0.5,), runs=3))
    s = table.summary()[0]
    failed = [r for r in table.rows if r.status == RECOVERY_FAILED]
    assert s["discarded"] == len(failed) > 0
    ok = [r.K for r in table.rows if r.status == CONVERGED]
    if ok:
        assert s["mean_K"] == pytest.approx(sum(ok) / len(ok))
    else:
        assert math.isnan(s["mean_K"])


def test_seed_determinism_and_order_independence():
    a = run_experiment(small(p_fault=(0.0, 0.1)))
    b = run_experiment(small(p_fault=(0.0, 0.1)))
    assert a.rows == b.rows
    for k in a.records:
        assert a.records[k].errors == b.records[k].errors
    # a point's result depends on its index, not on the other points
    c = run_experiment(small(p_fault=(0.0,)))
    assert c.rows[0] == a.rows[0]


def test_richardson_rows():
    table = run_experiment(small(solver="richardson", runs=1))
    r = table.rows[0]
    assert r.status == CONVERGED and r.xi == pytest.approx(2 / (r.lam_min + r.lam_max))


def test_emit_and_load_round_trip(tmp_path):
    table = run_experiment(small(p_fault=(0.0, 0.1)))
    written = emit_results(table, tmp_path, "csv")
    assert (tmp_path / "summary.csv") in written
    for run_id in table.records:
        assert (tmp_path / f"curve_{run_id}.csv").exists()
        assert (tmp_path / f"run_{run_id}.json").exists()
    with (tmp_path / f"curve_{table.rows[0].run_id}.csv").open() as fh:
        assert next(csv.reader(fh)) == ["iteration", "a_norm_error", "n_faults"]
    again = load_results(tmp_path)
    assert again.config == table.config
    assert again.rows == table.rows
    for k, rec in table.records.items():
        assert again.records[k].errors == rec.errors and again.records[k].fault_log == rec.fault_log


def test_json_output(tmp_path):
    table = run_experiment(small())
    emit_results(table, tmp_path, "json")
    data = json.loads((tmp_path / "summary.json").read_text())
    assert len(data["rows"]) == 2 and data["points"][0]["runs"] == 2
    assert load_results(tmp_path).rows == table.rows
    with pytest.raises(ConfigurationError):
        emit_results(table, tmp_path, "xml")


def test_empty_sweep_writes_header_only(tmp_path):
    table = run_experiment(small(P=()))
    emit_results(table, tmp_path)
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert lines == [",".join(ResultRow.columns())]


def test_nan_aware_row_equality():
    table = run_experiment(small(P=(2,)))
    row = table.rows[0]
    assert math.isnan(row.rho_ave) and row == row


def test_record_files_parse(tmp_path):
    table = run_experiment(small(runs=1))
    emit_results(table, tmp_path)
    rid = table.rows[0].run_id
    rec = ConvergenceRecord.from_json((tmp_path / f"run_{rid}.json").read_text())
    errs, nf = ConvergenceRecord.parse_csv((tmp_path / f"curve_{rid}.csv").read_text())
    assert errs == rec.errors and nf == rec.n_faults
