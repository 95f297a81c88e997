"""Command-line interface.

Subcommands
-----------
cluster      run one method on one dataset and write a results JSON
compare      run all methods over several seeds and print a metrics table
build-graph  export the KNN graph, KNN hypergraph incidence or citation graph
evaluate     score a saved embedding CSV against a saved assignment CSV

Any option can also come from ``--config FILE`` (``key = value`` lines, keys
named like the long options); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .autoencoder import OPTIMIZERS, TrainConfig
from .datasets import (
    atomic_write_text,
    load_dataset,
    read_assignments,
    read_embeddings,
    write_assignments,
    write_edge_list,
    write_embeddings,
)
from .graphs import METRICS, KnnConfig, knn_graph, knn_hypergraph
from .metrics import evaluate
from .pipeline import CNN_METHODS, METHOD_TITLES, METHODS, RunConfig, compare, run_method, summarize

log = logging.getLogger("hgcluster")


def _pos_weight(text: str):
    return text if text == "auto" else float(text)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key=value file merged under the flags")
    p.add_argument("--threads", type=int, default=1, help="BLAS threads (default 1)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--content", type=Path, required=True, help="LINQS .content file")
    p.add_argument("--cites", type=Path, help="LINQS .cites file")


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k-clusters", type=int, help="default: number of classes in --content")
    p.add_argument("--knn", type=int, default=5, help="neighbours per vertex (default 5)")
    p.add_argument("--knn-metric", choices=METRICS, default="euclidean")
    p.add_argument("--hidden-dim", type=int, default=32)
    p.add_argument("--embed-dim", type=int, default=16)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--optimizer", choices=OPTIMIZERS, default="adaptive_moments")
    p.add_argument("--pos-weight", type=_pos_weight, default="auto", help="'auto' or a number")
    p.add_argument("--gcn-structure", choices=("auto", "knn", "citations"), default="auto")
    p.add_argument("--hgcn-structure", choices=("knn", "citations"), default="knn")
    p.add_argument("--n-init", type=int, default=10, help="k-means restarts")
    p.add_argument("--max-iter", type=int, default=300, help="k-means iteration cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hgcluster",
        description="Graph/hypergraph autoencoder clustering with classical baselines.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="run one method and write a results JSON")
    _add_data(p)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--seed", type=int, default=1)
    _add_run_options(p)
    p.add_argument("--output", type=Path, help="results JSON (default: stdout)")
    p.add_argument("--embeddings-out", type=Path, help="CSV of the clustered representation")
    p.add_argument("--assignments-out", type=Path, help="CSV of cluster ids")
    _add_common(p)

    p = sub.add_parser("compare", help="run all methods over several seeds")
    _add_data(p)
    p.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    p.add_argument("--methods", nargs="+", choices=METHODS)
    _add_run_options(p)
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    p.add_argument("--output", type=Path, help="table file (default: stdout)")
    p.add_argument("--runs-output", type=Path, help="JSON with every individual run")
    _add_common(p)

    p = sub.add_parser("build-graph", help="export a graph or incidence edge list")
    _add_data(p)
    p.add_argument("--kind", choices=("knn-graph", "knn-hypergraph", "citations"), default="knn-graph")
    p.add_argument("--knn", type=int, default=5)
    p.add_argument("--knn-metric", choices=METRICS, default="euclidean")
    p.add_argument("--output", type=Path, required=True)
    _add_common(p)

    p = sub.add_parser("evaluate", help="metrics of a saved embedding + assignment")
    p.add_argument("--embedding", type=Path, required=True)
    p.add_argument("--assignment", type=Path, required=True)
    p.add_argument("--output", type=Path, help="metrics JSON (default: stdout)")
    _add_common(p)

    parser._subparser_map = sub.choices  # for --config merging
    return parser


def read_config(path: Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    pre_args, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in parser._subparser_map), None)
    if pre_args.config is not None and command is not None:
        sub = parser._subparser_map[command]
        known = {a.dest: a for a in sub._actions}
        cfg = read_config(pre_args.config)
        for key, value in cfg.items():
            action = known.get(key)
            if action is None or key in ("config", "help"):
                parser.error(f"unknown key {key!r} in {pre_args.config}")
            if action.nargs in ("+", "*"):
                cfg[key] = [action.type(v) if action.type else v for v in value.split()]
            elif action.nargs == 0:
                cfg[key] = value.lower() in ("1", "true", "yes", "on")
            # a value in the file satisfies a required flag
            action.required = False
        sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def _run_config(args, k_clusters: int, seed: int) -> RunConfig:
    return RunConfig(
        k_clusters=k_clusters,
        seed=seed,
        knn=KnnConfig(args.knn, args.knn_metric),
        train=TrainConfig(
            hidden_dim=args.hidden_dim,
            embed_dim=args.embed_dim,
            learning_rate=args.learning_rate,
            epochs=args.epochs,
            seed=seed,
            optimizer=args.optimizer,
            pos_weight=args.pos_weight,
        ),
        gcn_structure=args.gcn_structure,
        hgcn_structure=args.hgcn_structure,
        kmeans_n_init=args.n_init,
        kmeans_max_iter=args.max_iter,
    )


def _load(args):
    needs_cites = (
        getattr(args, "method", None) == "spectral-adjacency"
        or getattr(args, "gcn_structure", None) == "citations"
        or getattr(args, "hgcn_structure", None) == "citations"
        or getattr(args, "kind", None) == "citations"
    )
    if needs_cites and args.cites is None:
        raise SystemExit("error: this configuration needs --cites")
    for path in (args.content, args.cites):
        if path is not None and not path.is_file():
            raise SystemExit(f"error: no such file: {path}")
    return load_dataset(args.content, args.cites)


def _config_echo(args, cfg: RunConfig, ds) -> dict:
    echo = {
        "content": str(args.content),
        "cites": None if args.cites is None else str(args.cites),
        "knn": cfg.knn.k,
        "knn_metric": cfg.knn.metric,
        "hidden_dim": cfg.train.hidden_dim,
        "embed_dim": cfg.train.embed_dim,
        "learning_rate": cfg.train.learning_rate,
        "epochs": cfg.train.epochs,
        "optimizer": cfg.train.optimizer,
        "pos_weight": cfg.train.pos_weight,
        "gcn_structure": cfg.gcn_structure,
        "hgcn_structure": cfg.hgcn_structure,
        "kmeans_n_init": cfg.kmeans_n_init,
        "kmeans_max_iter": cfg.kmeans_max_iter,
        "threads": args.threads,
        "init": "glorot_uniform/pcg64",
    }
    if ds.citations is not None:
        echo["citation_lines"] = ds.citations.n_lines
        echo["citation_edges"] = int(ds.cite_edges.shape[0])
        echo["citations_dangling"] = ds.citations.n_dangling
    return echo


def _contingency(labels, clusters, k: int) -> dict:
    classes = sorted(set(labels))
    index = {c: i for i, c in enumerate(classes)}
    table = np.zeros((len(classes), k), dtype=np.int64)
    np.add.at(table, ([index[c] for c in labels], clusters), 1)
    return {"classes": classes, "counts": table.tolist()}


def result_payload(args, ds, cfg: RunConfig, result) -> dict:
    payload = {
        "method": result.method,
        "dataset": ds.name,
        "n": ds.n,
        "k_clusters": cfg.k_clusters,
        "seed": cfg.seed,
        "config_echo": _config_echo(args, cfg, ds),
        "structure": result.embedding.structure,
        "metrics": {
            "silhouette": result.metrics.silhouette,
            "davies_bouldin": result.metrics.davies_bouldin,
            "calinski_harabasz": result.metrics.calinski_harabasz,
        },
        "cluster_sizes": np.bincount(result.assignment.labels).tolist(),
        # reporting only: rows are classes from the data file, columns clusters
        "label_contingency": _contingency(ds.labels, result.assignment.labels, cfg.k_clusters),
        "kmeans_inertia": result.assignment.inertia,
    }
    if result.method in CNN_METHODS:
        payload["pos_weight_resolved"] = result.embedding.pos_weight
        payload["loss_history"] = result.embedding.loss_history
    payload["runtime_ms"] = round(result.runtime_ms, 3)
    return payload


def _emit(text: str, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(output, text)


def cmd_cluster(args) -> int:
    ds = _load(args)
    k = args.k_clusters or len(ds.classes)
    cfg = _run_config(args, k, args.seed)
    result = run_method(ds, args.method, cfg)
    payload = result_payload(args, ds, cfg, result)
    if args.embeddings_out:
        write_embeddings(args.embeddings_out, result.embedding.rows, ds.ids)
    if args.assignments_out:
        write_assignments(args.assignments_out, result.assignment.labels, ds.ids)
    _emit(json.dumps(payload, indent=2) + "\n", args.output)
    return 0


def format_table(rows: list[dict], fmt: str) -> str:
    cols = ["method", "structure", "runs", "silhouette", "davies_bouldin", "calinski_harabasz"]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=cols + [f"{c}_std" for c in cols[3:]],
                                extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (format(v, ".17g") if isinstance(v, float) else v)
                             for k, v in row.items()})
        return buf.getvalue()
    lines = [
        "| method | structure | runs | silhouette | Davies-Bouldin | Calinski-Harabasz |",
        "|---|---|---|---|---|---|",
    ]
    for r in rows:
        lines.append(
            f"| {METHOD_TITLES[r['method']]} | {r['structure']} | {r['runs']} "
            f"| {r['silhouette']:.4f} ± {r['silhouette_std']:.4f} "
            f"| {r['davies_bouldin']:.4f} ± {r['davies_bouldin_std']:.4f} "
            f"| {r['calinski_harabasz']:.4f} ± {r['calinski_harabasz_std']:.4f} |"
        )
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> int:
    ds = _load(args)
    k = args.k_clusters or len(ds.classes)
    cfg = _run_config(args, k, args.seeds[0])
    results = compare(ds, cfg, args.seeds, args.methods)
    _emit(format_table(summarize(results), args.format), args.output)
    if args.runs_output:
        runs = [
            result_payload(args, ds, dataclasses.replace(cfg, seed=s), r)
            for method_runs in results.values()
            for s, r in zip(args.seeds, method_runs)
        ]
        _emit(json.dumps({"runs": runs}, indent=2) + "\n", args.runs_output)
    return 0


def cmd_build_graph(args) -> int:
    ds = _load(args)
    if args.kind == "knn-graph":
        S = knn_graph(ds.X, args.knn, args.knn_metric)
    elif args.kind == "knn-hypergraph":
        S = knn_hypergraph(ds.X, args.knn, args.knn_metric).incidence
    else:
        S = ds.adjacency()
    write_edge_list(args.output, S)
    log.info("wrote %d pairs to %s", S.nnz, args.output)
    return 0


def cmd_evaluate(args) -> int:
    emb_ids, Z = read_embeddings(args.embedding)
    asg_ids, labels = read_assignments(args.assignment)
    if emb_ids != asg_ids:
        raise SystemExit("error: embedding and assignment ids differ")
    report = evaluate(Z, labels)
    _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.output)
    return 0


COMMANDS = {
    "cluster": cmd_cluster,
    "compare": cmd_compare,
    "build-graph": cmd_build_graph,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        with threadpool_limits(limits=args.threads):
            return COMMANDS[args.command](args)
    except SystemExit:
        raise
    except Exception as exc:  # any module error becomes a clean nonzero exit
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
