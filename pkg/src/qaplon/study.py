"""End-to-end study: generate, extract, measure, walk, run heuristics, summarize.

Every instance is one task whose stages run in order; tasks are independent
and may run in worker processes. Each stage result is cached next to the
outputs under a content hash of its config section and input files, so a
rerun only recomputes what changed. All files are written atomically.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .autocorr import ZeroVarianceError, estimate_autocorr
from .config import StudyConfig, config_hash, dump_config, section_hash
from .generators import derive_seed, generate, instance_path
from .heuristics import run_many
from .lon import extract_lon, read_lon, write_lon
from .metrics import compute_all
from .qap import atomic_write_text, load_instance, save_instance
from .stats import STUDY_VARIABLES, aggregate_classes, correlation_matrix, ols_regression, quantiles

METRIC_COLUMNS = (
    "class", "n", "index", "seed", "n_v", "cc", "l_opt", "y2", "f_nn", "q", "ell",
    "sa_hit", "ga_hit", "global_opt", "unreachable", "n_clusters", "mcl_converged",
    "s_cut", "walk_length", "autocorr_flag",
)
HITRATE_COLUMNS = ("class", "n", "index", "sa_hit_rate", "ga_hit_rate")
PREDICTORS = ("n_v", "cc", "l_opt", "y2", "f_nn", "q", "ell")
HIT_COLUMNS = ("sa_hit", "ga_hit")
STAGES = ("gen", "lon", "metrics", "autocorr", "heur")

# stream ids mixed into the instance seed for the stochastic stages
_AUTOCORR_STREAM = 1
_SA_STREAM = 2
_GA_STREAM = 3


class StudyError(RuntimeError):
    pass


@dataclass
class StudyResult:
    rows: list
    computed: dict  # stage -> number of instances where it was (re)computed
    output: str


# ---------------------------------------------------------------------------
# formatting helpers

def format_cell(v) -> str:
    """CSV cell text: empty for missing, shortest round-trip repr for floats."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return ""
        if v.is_integer() and abs(v) < 2 ** 53:
            return f"{v:.1f}"
        return repr(v)
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buf.getvalue()


def write_if_changed(path, text: str) -> bool:
    """Atomic write that leaves an identical existing file untouched."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            if fh.read() == text:
                return False
    except FileNotFoundError:
        pass
    atomic_write_text(path, text)
    return True


def _sha(*paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        with open(p, "rb") as fh:
            h.update(fh.read())
        h.update(b"\x00")
    return h.hexdigest()


def _exists(*paths) -> bool:
    return all(os.path.isfile(p) for p in paths)


# ---------------------------------------------------------------------------
# per-instance pipeline

def lon_paths(root, cls, n, index):
    base = os.path.join(os.fspath(root), "lons", cls, str(n), str(index))
    return base + ".nodes.tsv", base + ".edges.tsv"


def _cache_path(root, cls, n, index):
    return os.path.join(os.fspath(root), "cache", cls, str(n), f"{index}.json")


def _load_cache(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (FileNotFoundError, ValueError):
        return {}


def _stage(cache, name, key, valid=True):
    entry = cache.get(name)
    if valid and entry is not None and entry.get("key") == key:
        return entry["result"]
    return None


def run_instance(cfg: StudyConfig, cls: str, n: int, index: int):
    """Run (or reuse) every stage for one instance; returns (row, recomputed stages)."""
    root = cfg.output
    cache_file = _cache_path(root, cls, n, index)
    cache = _load_cache(cache_file)
    fresh = []
    seed = derive_seed(cfg.master_seed, cls, n, index)

    inst_file = instance_path(root, cls, n, index)
    key = section_hash(cfg, "generator", cfg.master_seed, cls, n, index)
    res = _stage(cache, "gen", key, _exists(inst_file))
    if res is None or res["sha"] != _sha(inst_file):
        params = replace(cfg.generator, cls=cls, n=n, seed=seed)
        inst = generate(params)
        save_instance(inst_file, inst)
        res = {"sha": _sha(inst_file)}
        cache["gen"] = {"key": key, "result": res}
        fresh.append("gen")
    inst_sha = res["sha"]
    inst = load_instance(inst_file, label=f"{cls}/{n}/{index}")

    nodes, edges = lon_paths(root, cls, n, index)
    key = section_hash(cfg, "lon", inst_sha)
    res = _stage(cache, "lon", key, _exists(nodes, edges))
    if res is None or res["sha"] != _sha(nodes, edges):
        lon = extract_lon(inst, max_n=cfg.max_n)
        write_lon(lon, nodes, edges)
        res = {"sha": _sha(nodes, edges)}
        cache["lon"] = {"key": key, "result": res}
        fresh.append("lon")
    lon_sha = res["sha"]

    key = section_hash(cfg, "metrics", lon_sha)
    res = _stage(cache, "metrics", key)
    if res is None:
        lon = read_lon(nodes, edges)
        m = cfg.metrics
        res = compute_all(lon, m.mcl_inflation, m.mcl_prune, m.mcl_tol, m.mcl_max_iter).as_dict()
        res["global_opt"] = lon.fitness.min().item()
        cache["metrics"] = {"key": key, "result": res}
        fresh.append("metrics")
    metrics = res

    ac = cfg.autocorr
    dump = _autocorr_dump_path(root, cls, n, index) if cfg.dump_autocorr else None
    key = section_hash(cfg, "autocorr", inst_sha, seed)
    res = _stage(cache, "autocorr", key, dump is None or _exists(dump))
    if res is None:
        res = _autocorr_stage(inst, ac, seed, dump)
        cache["autocorr"] = {"key": key, "result": res}
        fresh.append("autocorr")
    walk = res

    optimum = metrics["global_opt"]
    dump = _runs_dump_path(root, cls, n, index) if cfg.dump_runs else None
    key = section_hash(cfg, "sa", "ga", cfg.runs_per_algorithm, inst_sha, optimum, seed)
    res = _stage(cache, "heur", key, dump is None or _exists(dump))
    if res is None:
        res = _heuristic_stage(inst, cfg, seed, optimum, dump)
        cache["heur"] = {"key": key, "result": res}
        fresh.append("heur")
    hits = res

    if fresh:
        atomic_write_text(cache_file, json.dumps(cache, indent=1, sort_keys=True) + "\n")

    row = {
        "class": cls, "n": n, "index": index, "seed": seed,
        "n_v": metrics["n_v"], "cc": metrics["cc"], "l_opt": metrics["l_opt"],
        "y2": metrics["y2"], "f_nn": metrics["f_nn"], "q": metrics["q"],
        "ell": walk["ell"], "sa_hit": hits["sa_hit"], "ga_hit": hits["ga_hit"],
        "global_opt": optimum, "unreachable": metrics["unreachable_count"],
        "n_clusters": metrics["n_clusters"], "mcl_converged": metrics["mcl_converged"],
        "s_cut": walk["s_cut"], "walk_length": cfg.autocorr.walk_length,
        "autocorr_flag": walk["flag"],
    }
    return {k: _missing_as_none(v) for k, v in row.items()}, fresh


def _missing_as_none(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _autocorr_dump_path(root, cls, n, index):
    return os.path.join(os.fspath(root), "autocorr", cls, str(n), f"{index}.tsv")


def _runs_dump_path(root, cls, n, index):
    return os.path.join(os.fspath(root), "runs", cls, str(n), f"{index}.csv")


def _autocorr_stage(inst, ac, seed, dump):
    try:
        est = estimate_autocorr(inst, walk_length=ac.walk_length, n_walks=ac.n_walks,
                                s_max=ac.resolved_s_max(inst.n), seed=[seed, _AUTOCORR_STREAM],
                                epsilon=ac.epsilon)
    except ZeroVarianceError:
        if dump is not None:
            atomic_write_text(dump, "lag\tr\n")
        return {"ell": None, "s_cut": None, "flag": "zero_variance"}
    if dump is not None:
        lines = [f"{s}\t{v!r}" for s, v in enumerate(est.r.tolist())]
        atomic_write_text(dump, "lag\tr\n" + "\n".join(lines) + "\n")
    return {"ell": est.ell, "s_cut": est.s_cut, "flag": ""}


def _heuristic_stage(inst, cfg, seed, optimum, dump):
    runs = cfg.runs_per_algorithm
    out = {}
    lines = []
    for algo, conf, stream in (("sa", cfg.sa, _SA_STREAM), ("ga", cfg.ga, _GA_STREAM)):
        results = run_many(inst, algo, conf, runs, [seed, stream], optimum)
        out[f"{algo}_hit"] = sum(r.hit for r in results) / runs
        lines.extend((algo, k, r.best_cost, int(r.hit)) for k, r in enumerate(results))
    if dump is not None:
        atomic_write_text(dump, csv_text(("algorithm", "run", "best_cost", "hit"), lines))
    return out


def _task(args):
    cfg, cls, n, index = args
    return run_instance(cfg, cls, n, index)


# ---------------------------------------------------------------------------
# lock file

def _lock_text(cfg, status):
    cp = configparser.ConfigParser()
    cp["lock"] = {"hash": config_hash(cfg), "status": status}
    buf = io.StringIO()
    cp.write(buf)
    return dump_config(cfg, hashed_only=True) + buf.getvalue()


def read_lock(root):
    path = os.path.join(os.fspath(root), "config.lock")
    if not os.path.isfile(path):
        return None
    cp = configparser.ConfigParser()
    try:
        cp.read(path, encoding="utf-8")
        return dict(cp["lock"])
    except (configparser.Error, KeyError):
        return {"hash": "", "status": "unreadable"}


def _check_lock(cfg):
    lock = read_lock(cfg.output)
    if lock is None:
        return
    if lock.get("hash") != config_hash(cfg) and lock.get("status") != "complete":
        raise StudyError(
            f"{cfg.output} holds a partial run made with a different configuration "
            f"(hash {lock.get('hash', '')[:12]}); remove it or use another output directory")


# ---------------------------------------------------------------------------
# study

def tasks(cfg: StudyConfig):
    return [(cls, n, i) for cls in cfg.classes for n in cfg.sizes
            for i in range(cfg.instances_per_class)]


def run_study(cfg: StudyConfig, progress=None) -> StudyResult:
    """Run the whole study under ``cfg.output`` and write every CSV.

    The returned rows (and all files) depend only on ``cfg`` minus the worker
    count and output location.
    """
    root = cfg.output
    try:
        os.makedirs(root, exist_ok=True)
        probe = os.path.join(root, ".write-probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.unlink(probe)
    except OSError as exc:
        raise StudyError(f"output directory {root!r} is not writable: {exc.strerror}") from None
    _check_lock(cfg)
    lock = read_lock(root)
    if lock is None or lock.get("hash") != config_hash(cfg):
        write_if_changed(os.path.join(root, "config.lock"), _lock_text(cfg, "running"))

    work = [(cfg, cls, n, i) for cls, n, i in tasks(cfg)]
    computed = dict.fromkeys(STAGES, 0)
    rows = []
    if cfg.workers == 1:
        results = map(_task, work)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=cfg.workers)
        results = pool.map(_task, work)
    try:
        for done, (row, fresh) in enumerate(results, 1):
            rows.append(row)
            for stage in fresh:
                computed[stage] += 1
            if progress is not None:
                progress(done, len(work), row)
    finally:
        if pool is not None:
            pool.shutdown()

    write_if_changed(os.path.join(root, "metrics.csv"), metrics_csv(rows))
    write_if_changed(os.path.join(root, "hitrates.csv"), hitrates_csv(rows))
    write_report(rows, os.path.join(root, "stats"))
    write_if_changed(os.path.join(root, "config.lock"), _lock_text(cfg, "complete"))
    return StudyResult(rows=rows, computed=computed, output=root)


# ---------------------------------------------------------------------------
# tables

def metrics_csv(rows) -> str:
    return csv_text(METRIC_COLUMNS, ([r.get(c) for c in METRIC_COLUMNS] for r in rows))


def hitrates_csv(rows) -> str:
    return csv_text(HITRATE_COLUMNS, ([r["class"], r["n"], r["index"], r["sa_hit"], r["ga_hit"]]
                                      for r in rows))


def _parse_cell(column, text):
    if text == "":
        return None
    if column in ("class", "autocorr_flag"):
        return text
    if column in ("n", "index", "seed", "n_v", "unreachable", "n_clusters", "s_cut", "walk_length"):
        return int(text)
    if column == "global_opt":
        return int(text) if text.lstrip("-").isdigit() else float(text)
    if column == "mcl_converged":
        return text == "1"
    return float(text)


def read_metrics_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"class", "n", "index", *STUDY_VARIABLES} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return [{k: _parse_cell(k, v) for k, v in rec.items()} for rec in reader]


def _groups(rows):
    out: dict = {}
    for r in rows:
        out.setdefault((r["class"], int(r["n"])), []).append(r)
    return out


def report_tables(rows) -> dict[str, str]:
    """CSV texts of the summary tables, keyed by file name."""
    files = {}
    header = ["class", "n", "count"]
    for v in STUDY_VARIABLES:
        header += [f"{v}_mean", f"{v}_std"]
    body = []
    for (cls, n), summary in aggregate_classes(rows).items():
        line = [cls, n, summary["count"]]
        for v in STUDY_VARIABLES:
            line.extend(summary[v])
        body.append(line)
    files["table1.csv"] = csv_text(header, body)

    for (cls, n), members in _groups(rows).items():
        mat = correlation_matrix(members, STUDY_VARIABLES)
        files[f"corr_{cls}_{n}.csv"] = csv_text(
            ["variable", *STUDY_VARIABLES],
            ([v, *mat[k].tolist()] for k, v in enumerate(STUDY_VARIABLES)))
        lines = []
        for hit in HIT_COLUMNS:
            y = [_num(r.get(hit)) for r in members]
            for metric in PREDICTORS:
                x = [_num(r.get(metric)) for r in members]
                lines.append([metric, hit, *ols_regression(x, y)])
        files[f"regress_{cls}_{n}.csv"] = csv_text(
            ["metric", "hit_rate", "slope", "intercept", "r_squared"], lines)

    for hit in HIT_COLUMNS:
        algo = hit.split("_")[0]
        lines = [[cls, n, *quantiles([_num(r.get(hit)) for r in members])]
                 for (cls, n), members in _groups(rows).items()]
        files[f"boxplot_{algo}.csv"] = csv_text(
            ["class", "n", "min", "q1", "median", "q3", "max"], lines)
    return files


def _num(v):
    return math.nan if v is None else float(v)


def write_report(rows, out_dir) -> list[str]:
    """Write the summary tables into ``out_dir``; returns the file paths."""
    paths = []
    for name, text in report_tables(rows).items():
        path = os.path.join(os.fspath(out_dir), name)
        write_if_changed(path, text)
        paths.append(path)
    return paths
