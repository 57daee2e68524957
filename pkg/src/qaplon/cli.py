"""Command line interface: ``qaplon <command> [options]``.

Failures print a single ``qaplon: error: <kind>: <message>`` line to stderr
and exit nonzero (2 for usage errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace

from .config import ConfigError, load_config
from .qap import InstanceFormatError, atomic_write_text, load_instance


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _csv_list(convert):
    def parse(text):
        try:
            return tuple(convert(x.strip()) for x in text.split(",") if x.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid list {text!r}") from None
    return parse


def _common(p, multi=False):
    p.add_argument("--config", help="INI configuration file")
    if multi:
        p.add_argument("--class", dest="cls", type=_csv_list(str), help="instance class(es), comma separated")
        p.add_argument("--n", type=_csv_list(int), help="problem size(s), comma separated")
    else:
        p.add_argument("--class", dest="cls", help="instance class")
        p.add_argument("--n", type=int, help="problem size")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output path")
    p.add_argument("--workers", type=int, help="parallel workers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qaplon", description="Local optima networks of small QAP instances.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate seeded instances")
    _common(p, multi=True)
    p.add_argument("--count", type=int, help="instances per class and size")

    p = sub.add_parser("lon", help="extract local optima networks")
    _common(p)
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="instance files")

    p = sub.add_parser("metrics", help="network metrics of extracted LONs")
    _common(p)
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="*.nodes.tsv files")

    p = sub.add_parser("autocorr", help="random-walk autocorrelation length")
    _common(p)
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="instance files")
    p.add_argument("--walk-length", type=int)
    p.add_argument("--walks", type=int)

    p = sub.add_parser("heur", help="SA and GA hit rates against the exhaustive optimum")
    _common(p)
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="instance files")
    p.add_argument("--runs", type=int)
    p.add_argument("--algorithm", choices=("sa", "ga", "both"), default="both")

    p = sub.add_parser("study", help="run the end-to-end study")
    _common(p, multi=True)
    p.add_argument("--count", type=int, help="instances per class and size")
    p.add_argument("--runs", type=int, help="runs per algorithm")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("report", help="summary tables from an existing metrics.csv")
    _common(p)
    p.add_argument("--in", dest="inputs", nargs=1, required=True, help="metrics.csv")
    return parser


def _config(args, **extra):
    overrides = {"workers": args.workers, **extra}
    return load_config(args.config, **overrides)


def _emit(text, out):
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _stem(path):
    name = os.path.basename(path)
    return name[:-4] if name.endswith(".dat") else os.path.splitext(name)[0]


def cmd_gen(args):
    from .generators import derive_seed, generate, instance_path
    from .qap import save_instance

    cfg = _config(args, classes=args.cls, sizes=args.n, master_seed=args.seed)
    count = cfg.instances_per_class if args.count is None else args.count
    if count < 1:
        raise UsageError("--count must be >= 1")
    root = args.out or "."
    for cls in cfg.classes:
        for n in cfg.sizes:
            for i in range(count):
                seed = derive_seed(cfg.master_seed, cls, n, i)
                path = instance_path(root, cls, n, i)
                save_instance(path, generate(replace(cfg.generator, cls=cls, n=n, seed=seed)))
                print(path)


def cmd_lon(args):
    from .lon import extract_lon, write_lon

    cfg = _config(args)
    out = args.out or "."
    for path in args.inputs:
        inst = load_instance(path)
        lon = extract_lon(inst, max_n=cfg.max_n, chunks=cfg.workers, workers=cfg.workers)
        nodes = os.path.join(out, _stem(path) + ".nodes.tsv")
        edges = os.path.join(out, _stem(path) + ".edges.tsv")
        write_lon(lon, nodes, edges)
        print(f"{path}\tn_v={lon.n_v}\tedges={lon.n_edges}\tbasins={int(lon.basin_size.sum())}")


def _edges_for(nodes):
    if nodes.endswith("nodes.tsv"):
        return nodes[: -len("nodes.tsv")] + "edges.tsv"
    raise UsageError(f"cannot infer the edges file for {nodes!r} (expected *nodes.tsv)")


def cmd_metrics(args):
    from .lon import read_lon
    from .metrics import compute_all
    from .study import csv_text

    cfg = _config(args)
    m = cfg.metrics
    cols = ("n_v", "cc", "l_opt", "y2", "f_nn", "q", "unreachable_count", "n_clusters", "mcl_converged")
    lines = []
    for nodes in args.inputs:
        lon = read_lon(nodes, _edges_for(nodes))
        res = compute_all(lon, m.mcl_inflation, m.mcl_prune, m.mcl_tol, m.mcl_max_iter).as_dict()
        lines.append([nodes, *(res[c] for c in cols)])
    _emit(csv_text(("file", *cols), lines), args.out)


def cmd_autocorr(args):
    from .autocorr import ZeroVarianceError, estimate_autocorr
    from .study import csv_text

    cfg = _config(args, master_seed=args.seed)
    ac = cfg.autocorr
    walk_length = args.walk_length or ac.walk_length
    n_walks = args.walks or ac.n_walks
    lines = []
    for path in args.inputs:
        inst = load_instance(path)
        try:
            est = estimate_autocorr(inst, walk_length=walk_length, n_walks=n_walks,
                                    s_max=ac.resolved_s_max(inst.n), seed=cfg.master_seed,
                                    epsilon=ac.epsilon)
            lines.append([path, est.ell, est.s_cut, float(est.r[1]) if est.r.size > 1 else math.nan, ""])
        except ZeroVarianceError:
            lines.append([path, None, None, None, "zero_variance"])
    _emit(csv_text(("file", "ell", "s_cut", "r1", "flag"), lines), args.out)


def cmd_heur(args):
    from .heuristics import hit_rate
    from .lon import global_optimum
    from .study import csv_text

    cfg = _config(args, master_seed=args.seed)
    runs = args.runs or cfg.runs_per_algorithm
    algos = ("sa", "ga") if args.algorithm == "both" else (args.algorithm,)
    lines = []
    for path in args.inputs:
        inst = load_instance(path)
        optimum, _ = global_optimum(inst, max_n=cfg.max_n)
        rates = {a: hit_rate(inst, a, getattr(cfg, a), runs, [cfg.master_seed, k], optimum)
                 for k, a in enumerate(algos)}
        lines.append([path, optimum, *(rates.get(a) for a in ("sa", "ga"))])
    _emit(csv_text(("file", "optimum", "sa_hit", "ga_hit"), lines), args.out)


def cmd_study(args):
    from .study import run_study

    cfg = _config(args, classes=args.cls, sizes=args.n, master_seed=args.seed, output=args.out,
                  instances_per_class=args.count, runs_per_algorithm=args.runs)

    def progress(done, total, row):
        if not args.quiet:
            print(f"[{done}/{total}] {row['class']} n={row['n']} #{row['index']} n_v={row['n_v']}",
                  file=sys.stderr)

    result = run_study(cfg, progress=progress)
    done = ", ".join(f"{k}={v}" for k, v in result.computed.items())
    print(f"{len(result.rows)} rows in {os.path.join(cfg.output, 'metrics.csv')} (computed: {done})")


def cmd_report(args):
    from .study import read_metrics_csv, write_report

    src = args.inputs[0]
    out = args.out or os.path.join(os.path.dirname(src) or ".", "stats")
    for path in write_report(read_metrics_csv(src), out):
        print(path)


COMMANDS = {
    "gen": cmd_gen, "lon": cmd_lon, "metrics": cmd_metrics, "autocorr": cmd_autocorr,
    "heur": cmd_heur, "study": cmd_study, "report": cmd_report,
}


def _fail(kind, message, code):
    message = " ".join(str(message).split())
    print(f"qaplon: error: {kind}: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    from .lon import SizeCapError
    from .study import StudyError

    try:
        args = build_parser().parse_args(argv)
        if args.workers is not None and args.workers < 1:
            raise UsageError("--workers must be >= 1")
        COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except ConfigError as exc:
        return _fail("config", exc, 2)
    except SizeCapError as exc:
        return _fail("cap", exc, 1)
    except InstanceFormatError as exc:
        return _fail("input", exc, 1)
    except StudyError as exc:
        return _fail("study", exc, 1)
    except OSError as exc:
        where = f"{exc.filename}: " if exc.filename else ""
        return _fail("io", f"{where}{exc.strerror or exc}", 1)
    except ValueError as exc:
        return _fail("value", exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
