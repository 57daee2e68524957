import csv
import os
from dataclasses import replace

import pytest

from qaplon.config import parse_config
from qaplon.heuristics import SaConfig
from qaplon.study import (
    METRIC_COLUMNS,
    StudyError,
    read_metrics_csv,
    report_tables,
    run_study,
)

TINY = """
[study]
classes = uniform, real-like
sizes = 5, 6
instances_per_class = 2
runs_per_algorithm = 5
[autocorr]
walk_length = 3000
n_walks = 2
[sa]
budget = 400
[ga]
population_size = 10
budget = 150
"""

STATS_FILES = {"table1.csv", "boxplot_sa.csv", "boxplot_ga.csv"} | {
    f"{kind}_{c}_{n}.csv" for kind in ("corr", "regress") for c in ("uniform", "real-like") for n in (5, 6)}


def _with(cfg, **kw):
    return replace(cfg, **kw)


def tiny(tmp_path, name="out", **kw):
    return _with(parse_config(TINY), output=str(tmp_path / name), **kw)


def snapshot(root):
    out = {}
    for base, _, names in os.walk(root):
        for name in names:
            path = os.path.join(base, name)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = fh.read()
    return out


def test_single_class_two_rows(tmp_path):
    cfg = _with(parse_config(TINY), classes=("uniform",), sizes=(5,), output=str(tmp_path / "o"))
    result = run_study(cfg)
    assert len(result.rows) == 2
    for row in result.rows:
        for key in ("n_v", "l_opt", "ell", "sa_hit", "ga_hit", "global_opt"):
            assert row[key] is not None


def test_layout_and_csv_format(tmp_path):
    cfg = tiny(tmp_path)
    result = run_study(cfg)
    root = tmp_path / "out"
    assert len(result.rows) == 2 * 2 * 2
    for cls in ("uniform", "real-like"):
        for n in (5, 6):
            for i in range(2):
                assert (root / "instances" / cls / str(n) / f"{i}.dat").is_file()
                assert (root / "lons" / cls / str(n) / f"{i}.nodes.tsv").is_file()
                assert (root / "lons" / cls / str(n) / f"{i}.edges.tsv").is_file()
    assert set(os.listdir(root / "stats")) == STATS_FILES
    text = (root / "metrics.csv").read_bytes()
    assert b"\r" not in text and text.endswith(b"\n")
    rows = list(csv.reader(text.decode().splitlines()))
    assert tuple(rows[0]) == METRIC_COLUMNS and len(rows) == 9
    hits = list(csv.reader((root / "hitrates.csv").read_text().splitlines()))
    assert hits[0] == ["class", "n", "index", "sa_hit_rate", "ga_hit_rate"] and len(hits) == 9
    corr = list(csv.reader((root / "stats" / "corr_uniform_5.csv").read_text().splitlines()))
    assert len(corr) == 10 and len(corr[0]) == 10
    lock = (root / "config.lock").read_text()
    assert "status = complete" in lock and "hash = " in lock
    assert not [p for p in snapshot(root) if ".tmp-" in p]


def test_rerun_is_a_no_op(tmp_path):
    cfg = tiny(tmp_path)
    first = run_study(cfg)
    before = snapshot(tmp_path / "out")
    mtimes = {p: os.stat(tmp_path / "out" / p).st_mtime_ns for p in before}
    again = run_study(cfg)
    assert all(v == 0 for v in again.computed.values())
    assert again.rows == first.rows
    assert snapshot(tmp_path / "out") == before
    assert {p: os.stat(tmp_path / "out" / p).st_mtime_ns for p in before} == mtimes


def test_worker_count_independent(tmp_path):
    one = run_study(tiny(tmp_path, "w1", workers=1))
    four = run_study(tiny(tmp_path, "w4", workers=4))
    assert one.rows == four.rows
    a, b = snapshot(tmp_path / "w1"), snapshot(tmp_path / "w4")
    assert a == b


def test_only_changed_stages_rerun(tmp_path):
    cfg = tiny(tmp_path)
    run_study(cfg)
    changed = run_study(_with(cfg, sa=SaConfig(budget=300)))
    assert changed.computed == {"gen": 0, "lon": 0, "metrics": 0, "autocorr": 0, "heur": 8}


def test_deleted_output_recomputed(tmp_path):
    cfg = tiny(tmp_path)
    first = run_study(cfg)
    os.unlink(tmp_path / "out" / "lons" / "uniform" / "6" / "1.edges.tsv")
    again = run_study(cfg)
    assert again.computed["lon"] == 1 and again.computed["metrics"] == 0
    assert again.rows == first.rows


def test_partial_run_with_other_config(tmp_path):
    cfg = tiny(tmp_path)
    run_study(cfg)
    lock = tmp_path / "out" / "config.lock"
    lock.write_text(lock.read_text().replace("status = complete", "status = running"))
    with pytest.raises(StudyError):
        run_study(_with(cfg, master_seed=99))
    run_study(cfg)  # same config resumes


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(StudyError):
        run_study(_with(parse_config(TINY), output=str(blocker / "sub")))


def test_zero_variance_flagged(tmp_path):
    text = TINY.replace("sizes = 5, 6", "sizes = 4") + "[generator]\nuniform_lo = 5\nuniform_hi = 5\n"
    cfg = _with(parse_config(text), classes=("uniform",), output=str(tmp_path / "flat"))
    rows = run_study(cfg).rows
    assert all(r["ell"] is None and r["autocorr_flag"] == "zero_variance" for r in rows)
    assert all(r["n_v"] == 24 and r["sa_hit"] == 1.0 for r in rows)
    lines = (tmp_path / "flat" / "metrics.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert lines[1].split(",")[header.index("ell")] == ""


def test_report_matches_study(tmp_path):
    run_study(tiny(tmp_path))
    rows = read_metrics_csv(tmp_path / "out" / "metrics.csv")
    for name, text in report_tables(rows).items():
        assert (tmp_path / "out" / "stats" / name).read_text() == text


def test_dumps(tmp_path):
    cfg = _with(parse_config(TINY), classes=("uniform",), sizes=(5,), dump_runs=True, dump_autocorr=True,
                output=str(tmp_path / "d"))
    run_study(cfg)
    runs = (tmp_path / "d" / "runs" / "uniform" / "5" / "0.csv").read_text().splitlines()
    assert runs[0] == "algorithm,run,best_cost,hit" and len(runs) == 11
    walk = (tmp_path / "d" / "autocorr" / "uniform" / "5" / "0.tsv").read_text().splitlines()
    assert walk[0] == "lag\tr" and len(walk) == 27
    assert abs(float(walk[1].split("\t")[1]) - 1) <= 1e-9
