"""Command-line front end.

Five subcommands: simulate (draw a dataset from a random ground-truth model),
discover (search structure on a dataset), score (score a given graph),
baseline (PC skeleton on mean-discretized data), evaluate (replicated
recovery benchmark driven by a config file, with CSV/JSON output and
figures). Commands that take --out write files there along with a manifest
recording the exact invocation; without it the primary result prints as JSON
on stdout.

Exit codes: 0 success, 1 usage error, 2 invalid or insufficient data,
3 request beyond a hard capability ceiling. Failures print a single JSON line
to stderr with code, message, and context.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .baseline import mean_discretize, pc_skeleton
from .bench import config_to_json, emit_results, load_config, run_experiment
from .dataset import Dataset, load_csv, save_csv, save_schema
from .errors import DataValidationError, HybridCdError, UsageError
from .graph import (
    Dag,
    Skeleton,
    dag_from_json,
    dag_to_dot,
    dag_to_json,
    skeleton_from_json,
    skeleton_to_json,
)
from .report import render_figures
from .scoring import bic_score
from .search import SearchReport, exhaustive_search, oracle_search
from .synth import NoiseSpec, derive_rng, random_dag, random_model, sample

EXIT_CODES = {"usage": 1, "data": 2, "insufficient-data": 2, "structure": 2, "capability": 3}


def _default_workers() -> int:
    return os.cpu_count() or 1


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad arguments; route those through UsageError so
    the usage exit code stays 1 and the error format stays JSON."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybridcd", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="draw a dataset from a random ground-truth model")
    sim.add_argument("--p", type=int, default=4, help="number of variables")
    sim.add_argument("--c", type=int, default=2, help="how many variables are continuous")
    sim.add_argument("--n", type=int, default=1000, help="samples to draw")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--edge-prob", type=float, default=0.5)
    sim.add_argument("--noise", choices=("laplace", "uniform"), default="laplace")
    sim.add_argument("--noise-scale", type=float, default=1.0)
    sim.add_argument(
        "--out", required=True,
        help="directory for data.csv, schema.json, truth.json, manifest.json",
    )

    dis = sub.add_parser("discover", help="search for the best-scoring structure")
    dis.add_argument("--data", required=True, help="CSV of samples")
    dis.add_argument("--schema", required=True, help="schema JSON")
    dis.add_argument("--skeleton", help="restrict the search to orientations of this skeleton JSON")
    dis.add_argument("--likelihood", choices=("laplace", "logcosh"), default="laplace")
    dis.add_argument(
        "--workers", type=int, default=_default_workers(),
        help="parallel scan width; 1 forces a serial scan (same result)",
    )
    dis.add_argument("--out", help="write graph.json and report.json here instead of stdout")
    dis.add_argument("--dot", action="store_true", help="also emit graphviz output")

    sco = sub.add_parser("score", help="score one given graph on a dataset")
    sco.add_argument("--data", required=True)
    sco.add_argument("--schema", required=True)
    sco.add_argument("--graph", required=True, help="graph JSON to score")
    sco.add_argument("--likelihood", choices=("laplace", "logcosh"), default="laplace")

    base = sub.add_parser("baseline", help="PC skeleton on mean-discretized data")
    base.add_argument("--data", required=True)
    base.add_argument("--schema", required=True)
    base.add_argument("--alpha", type=float, default=0.05)
    base.add_argument("--max-level", type=int, default=None)
    base.add_argument("--out", help="write skeleton.json and report.json here instead of stdout")

    ev = sub.add_parser("evaluate", help="replicated recovery benchmark across sample sizes")
    ev.add_argument(
        "--config", required=True,
        help="experiment config JSON; keys mirror the ExperimentConfig fields",
    )
    ev.add_argument("--out", required=True, help="output directory")
    ev.add_argument("--workers", type=int, default=_default_workers())
    ev.add_argument("--stem", default="results", help="basename for output files")
    ev.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    ev.add_argument("--quiet", action="store_true", help="suppress progress lines")
    return parser


def _write_manifest(out_dir: Path, argv: list[str], command: str, parameters: dict) -> None:
    manifest = {
        "tool": "hybridcd",
        "version": __version__,
        "command": command,
        "argv": argv,
        "parameters": parameters,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _emit(obj: dict, out_dir: str | None, filename: str) -> None:
    if out_dir is None:
        print(json.dumps(obj, indent=2))
    else:
        with open(Path(out_dir) / filename, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")


def _load_dataset(data_path: str, schema_path: str) -> Dataset:
    try:
        return load_csv(data_path, schema_path)
    except FileNotFoundError as exc:
        raise DataValidationError(f"cannot read {exc.filename}") from exc


def _load_json_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise DataValidationError(f"cannot read {exc.filename}") from exc
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{path} is not valid JSON: {exc}") from exc


def _reindex_to_dataset(names: list[str], edges, ds: Dataset) -> frozenset:
    if sorted(names) != sorted(ds.names):
        raise DataValidationError(
            f"graph nodes {sorted(names)} do not match dataset columns {sorted(ds.names)}"
        )
    to_col = {name: ds.column_index(name) for name in names}
    return frozenset((to_col[names[i]], to_col[names[j]]) for i, j in edges)


def _dag_for_dataset(obj: dict, ds: Dataset) -> Dag:
    dag, names = dag_from_json(obj)
    return Dag(ds.n_cols, _reindex_to_dataset(names, dag.edges, ds))


def _skeleton_for_dataset(obj: dict, ds: Dataset) -> Skeleton:
    skel, names = skeleton_from_json(obj)
    return Skeleton(ds.n_cols, _reindex_to_dataset(names, skel.edges, ds))


def _search_report_obj(report: SearchReport, ds: Dataset, mode: str) -> dict:
    best = report.best
    return {
        "mode": mode,
        "likelihood": report.likelihood,
        "bic": best.bic,
        "loglik": best.loglik,
        "dim": best.dim,
        "penalty": best.loglik - best.bic,
        "candidates_scored": report.candidates_scored,
        "n_ties": report.n_ties,
        "runner_up_margin": report.runner_up_margin,
        "wall_time": report.wall_time,
        "all_converged": best.all_converged,
        "graph": dag_to_json(best.dag, ds.names),
    }


# --- commands ----------------------------------------------------------------


def cmd_simulate(args, argv) -> int:
    rng = derive_rng(args.seed, 0)
    dag = random_dag(args.p, args.edge_prob, rng)
    model = random_model(dag, args.c, rng, noise=NoiseSpec(args.noise, args.noise_scale))
    ds = sample(model, args.n, derive_rng(args.seed, 1))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_csv(ds, out / "data.csv")
    save_schema(ds.schema, out / "schema.json")
    with open(out / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(dag_to_json(model.dag, ds.names), fh, indent=2)
        fh.write("\n")
    _write_manifest(
        out,
        argv,
        "simulate",
        {
            "p": args.p,
            "c": args.c,
            "n": args.n,
            "seed": args.seed,
            "edge_prob": args.edge_prob,
            "noise": args.noise,
            "noise_scale": args.noise_scale,
        },
    )
    print(f"wrote data.csv, schema.json, truth.json to {out}", file=sys.stderr)
    return 0


def cmd_discover(args, argv) -> int:
    ds = _load_dataset(args.data, args.schema)
    if args.skeleton:
        skeleton = _skeleton_for_dataset(_load_json_file(args.skeleton), ds)
        report = oracle_search(ds, skeleton, args.likelihood)
        mode = "skeleton"
    else:
        report = exhaustive_search(ds, args.likelihood, workers=args.workers)
        mode = "exhaustive"
    graph_obj = dag_to_json(report.dag, ds.names)
    report_obj = _search_report_obj(report, ds, mode)
    if args.out is None:
        print(json.dumps(report_obj, indent=2))
        if args.dot:
            print(dag_to_dot(report.dag, ds.names), end="")
    else:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _emit(graph_obj, args.out, "graph.json")
        _emit(report_obj, args.out, "report.json")
        if args.dot:
            (out / "graph.dot").write_text(dag_to_dot(report.dag, ds.names), encoding="utf-8")
        _write_manifest(
            out,
            argv,
            "discover",
            {"data": args.data, "schema": args.schema, "skeleton": args.skeleton,
             "likelihood": args.likelihood, "workers": args.workers},
        )
    return 0


def cmd_score(args, argv) -> int:
    ds = _load_dataset(args.data, args.schema)
    dag = _dag_for_dataset(_load_json_file(args.graph), ds)
    scored = bic_score(ds, dag, args.likelihood)
    print(
        json.dumps(
            {
                "likelihood": args.likelihood,
                "bic": scored.bic,
                "loglik": scored.loglik,
                "dim": scored.dim,
                "penalty": scored.loglik - scored.bic,
                "locals": {
                    name: {
                        "kind": fit.kind,
                        "parents": [ds.names[j] for j in fit.parents],
                        "loglik": fit.loglik,
                        "converged": fit.converged,
                    }
                    for name, fit in zip(ds.names, scored.locals)
                },
                "all_converged": scored.all_converged,
            },
            indent=2,
        )
    )
    return 0


def cmd_baseline(args, argv) -> int:
    ds = _load_dataset(args.data, args.schema)
    skeleton = pc_skeleton(mean_discretize(ds), alpha=args.alpha, max_level=args.max_level)
    skeleton_obj = skeleton_to_json(skeleton, ds.names)
    report_obj = {"alpha": args.alpha, "edge_count": skeleton.edge_count, "skeleton": skeleton_obj}
    if args.out is None:
        print(json.dumps(report_obj, indent=2))
    else:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _emit(skeleton_obj, args.out, "skeleton.json")
        _emit(report_obj, args.out, "report.json")
        _write_manifest(
            out,
            argv,
            "baseline",
            {"data": args.data, "schema": args.schema, "alpha": args.alpha,
             "max_level": args.max_level},
        )
    return 0


def cmd_evaluate(args, argv) -> int:
    config = load_config(args.config)
    progress = None
    if not args.quiet:
        def progress(done, total):
            print(f"replicate {done}/{total}", file=sys.stderr)

    results = run_experiment(config, workers=args.workers, progress=progress)
    out = Path(args.out)
    paths = emit_results(results, out, stem=args.stem)
    written = [p.name for p in paths.values()]
    if not args.no_plots:
        written += [p.name for p in render_figures(results, out, stem=args.stem)]
    _write_manifest(
        out, argv, "evaluate",
        {"config": config_to_json(config), "workers": args.workers},
    )
    print(f"wrote {', '.join(written)} to {out}", file=sys.stderr)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "discover": cmd_discover,
    "score": cmd_score,
    "baseline": cmd_baseline,
    "evaluate": cmd_evaluate,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, argv)
    except HybridCdError as exc:
        line = {"code": exc.code, "message": exc.message, "context": exc.context}
        print(json.dumps(line), file=sys.stderr)
        return EXIT_CODES.get(exc.code, 2)
    except OSError as exc:
        line = {"code": "data", "message": str(exc), "context": {}}
        print(json.dumps(line), file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
