"""Command-line entry point.

Subcommands mirror the pipeline: ingest, split, train, grid-search,
evaluate, predict, project, serve.  An optional JSON config file supplies
defaults for any long flag (underscored keys); explicit flags win.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import dataset as ds
from . import evaluation as ev
from .bpr import BprHyperparams
from .errors import TechInferError
from .model import load_model, save_model
from .projection import ProjectionConfig, export_projection, project
from .serve import (
    DEFAULT_FOLD_NEGATIVE_WEIGHT,
    DEFAULT_FOLD_REGULARIZATION,
    PredictRequest,
    ServiceState,
    export_csv,
    export_navigator_layer,
    load_names,
    predict,
    response_to_json,
    serve_http,
)
from .wmf import WmfHyperparams

USAGE_EXIT = 1
DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse default exits 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _comma_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _comma_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _comma_strs(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _load_input_dataset(path: str, fmt: str | None) -> ds.InteractionDataset:
    p = Path(path)
    if fmt is None:
        fmt = "jsonl" if p.suffix == ".jsonl" else "csv"
    return ds.load_dataset(p.read_bytes(), format=fmt)


def _resolve_training(args: argparse.Namespace) -> tuple[ds.SparseBinaryMatrix, tuple, tuple]:
    """Training matrix plus catalogs, from either --data or a split file."""
    if getattr(args, "split", None):
        sd = ds.split_from_json(Path(args.split).read_bytes())
        part = sd.train
    elif getattr(args, "data", None):
        part = _load_input_dataset(args.data, getattr(args, "format", None))
    else:
        raise TechInferError("one of --data or --split is required")
    return ds.to_matrix(part), part.entities, part.items


def _hyperparams(args: argparse.Namespace):
    """Per-model tuned defaults for any flag left unset."""
    if args.model == "wmf":
        return WmfHyperparams(
            embedding_dim=args.dim if args.dim is not None else 4,
            negative_weight=args.negative_weight,
            regularization=args.reg if args.reg is not None else 1e-5,
            epochs=args.epochs if args.epochs is not None else 25,
            init_scale=args.init_scale,
            seed=args.seed,
        )
    if args.model == "bpr":
        return BprHyperparams(
            embedding_dim=args.dim if args.dim is not None else 16,
            learning_rate=args.lr,
            regularization=args.reg if args.reg is not None else 0.01,
            epochs=args.epochs if args.epochs is not None else 100,
            init_scale=args.init_scale,
            seed=args.seed,
        )
    return None


def _cmd_ingest(args: argparse.Namespace) -> int:
    data = _load_input_dataset(args.input, args.format)
    Path(args.output).write_bytes(ds.write_csv(data))
    print(
        f"ingested {len(data.observations)} observations, "
        f"{data.m} reports, {data.n} techniques -> {args.output}"
    )
    return 0


def _cmd_split(args: argparse.Namespace) -> int:
    data = _load_input_dataset(args.input, args.format)
    sd = ds.split(data, args.test_frac, args.val_frac, args.seed)
    Path(args.output).write_bytes(ds.split_to_json(sd))
    print(
        f"split {len(data.observations)} observations -> "
        f"train {len(sd.train.observations)}, "
        f"validation {len(sd.validation.observations)}, "
        f"test {len(sd.test.observations)} ({args.output})"
    )
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    A, entities, items = _resolve_training(args)
    model = ev.train_model(args.model, A, _hyperparams(args), entities, items)
    model.similarity = args.similarity
    Path(args.output).write_bytes(save_model(model))
    print(f"trained {args.model} (d={model.d}) on {A.m}x{A.n} -> {args.output}")
    return 0


def _cmd_grid_search(args: argparse.Namespace) -> int:
    sd = ds.split_from_json(Path(args.split).read_bytes())
    grid = None
    if args.dims or args.rates or args.lambdas:
        base = ev.DEFAULT_WMF_GRID if args.model == "wmf" else ev.DEFAULT_BPR_GRID
        rate_key = "negative_weight" if args.model == "wmf" else "learning_rate"
        grid = {
            "embedding_dim": args.dims or base["embedding_dim"],
            rate_key: args.rates or base[rate_key],
            "regularization": args.lambdas or base["regularization"],
        }
    result = ev.grid_search(
        sd, args.model, grid=grid, seed=args.seed, epochs=args.epochs
    )
    csv_bytes = ev.grid_results_csv(result, args.model)
    if args.output:
        Path(args.output).write_bytes(csv_bytes)
    else:
        sys.stdout.write(csv_bytes.decode("utf-8"))
    best = result.best_record
    print(
        f"best: {best.hyperparams} similarity={best.similarity} "
        f"recall@20={best.recall_at_20:.4f}",
        file=sys.stderr,
    )
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    sd = ds.split_from_json(Path(args.split).read_bytes())
    ks = args.k
    metrics = ev.repeated_eval(
        sd,
        args.model,
        _hyperparams(args),
        runs=args.runs,
        base_seed=args.seed,
        target=args.target,
        ks=ks,
    )
    print(f"entities evaluated: {metrics.entities_evaluated}, runs: {args.runs}")
    for k in ks:
        print(f"recall@{k} = {metrics.recall[k]:.4f}   ndcg@{k} = {metrics.ndcg[k]:.4f}")
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    model = load_model(Path(args.model).read_bytes())
    names = load_names(args.names) if args.names else {}
    req = PredictRequest(
        observed=tuple(args.observed), k=args.k, similarity=args.similarity
    )
    resp = predict(
        model,
        req,
        names=names,
        fold_negative_weight=args.fold_negative_weight,
        fold_regularization=args.fold_reg,
    )
    if args.export == "navigator":
        payload = export_navigator_layer(resp, args.layer_name)
    elif args.export == "csv":
        payload = export_csv(resp)
    else:
        payload = None
    if payload is not None:
        if args.output:
            Path(args.output).write_bytes(payload)
        else:
            sys.stdout.buffer.write(payload)
        return 0
    if resp.unknown_ids:
        print(f"ignored unknown ids: {', '.join(resp.unknown_ids)}", file=sys.stderr)
    for entry in response_to_json(resp)["predictions"]:
        name = entry.get("technique_name", "")
        print(f"{entry['rank']:>4}  {entry['technique_id']:<12} {entry['score']: .6f}  {name}")
    return 0


def _cmd_project(args: argparse.Namespace) -> int:
    model = load_model(Path(args.model).read_bytes())
    cfg = ProjectionConfig(
        perplexity=args.perplexity,
        distance=args.distance,
        iterations=args.iterations,
        early_exaggeration=args.early_exaggeration,
        exaggeration_iters=args.exaggeration_iters,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )
    proj = project(model.U, cfg, bandwidth=args.bandwidth)
    payload = export_projection(proj, model.entity_catalog)
    if args.output:
        Path(args.output).write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)
    n_clusters = len(proj.mode_centers)
    print(f"projected {model.m} reports into {n_clusters} cluster(s)", file=sys.stderr)
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    model = load_model(Path(args.model).read_bytes())
    state = ServiceState(
        model=model,
        names=load_names(args.names) if args.names else {},
        fold_negative_weight=args.fold_negative_weight,
        fold_regularization=args.fold_reg,
        static_dir=Path(args.static) if args.static else None,
    )
    serve_http(state, args.bind)
    return 0


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=("wmf", "bpr", "popularity"), default="wmf")
    p.add_argument("--dim", "-d", type=int, default=None,
                   help="embedding dimension (default: 4 wmf, 16 bpr)")
    p.add_argument("--negative-weight", "-c", type=float, default=0.001,
                   dest="negative_weight", help="unobserved-cell weight (wmf)")
    p.add_argument("--lr", type=float, default=0.02, help="learning rate (bpr)")
    p.add_argument("--reg", "--lambda", type=float, default=None, dest="reg",
                   help="regularization coefficient (default: 1e-5 wmf, 0.01 bpr)")
    p.add_argument("--epochs", type=int, default=None,
                   help="training epochs (default: 25 wmf, 100 bpr)")
    p.add_argument("--init-scale", type=float, default=1.0, dest="init_scale")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> _Parser:
    parser = _Parser(prog="techinfer", description=__doc__)
    parser.add_argument("--config", default=None, help="JSON file of flag defaults")
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize a CSV/JSONL observation file")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default=None)
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("split", help="train/validation/test partition")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default=None)
    p.add_argument("--test-frac", type=float, default=0.2, dest="test_frac")
    p.add_argument("--val-frac", type=float, default=0.1, dest="val_frac")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train", help="train a model and save it as JSON")
    p.add_argument("--data", help="full observation file (csv/jsonl)")
    p.add_argument("--format", choices=("csv", "jsonl"), default=None)
    p.add_argument("--split", help="split file; trains on its train partition")
    _add_train_flags(p)
    p.add_argument("--similarity", choices=("dot", "cosine"), default="dot")
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("grid-search", help="hyperparameter sweep on validation recall@20")
    p.add_argument("--split", required=True)
    p.add_argument("--model", choices=("wmf", "bpr"), default="wmf")
    p.add_argument("--dims", type=_comma_ints, default=None)
    p.add_argument("--rates", type=_comma_floats, default=None,
                   help="learning rates (bpr) or negative weights (wmf)")
    p.add_argument("--lambdas", type=_comma_floats, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=_cmd_grid_search)

    p = sub.add_parser("evaluate", help="averaged recall@K / NDCG@K over repeated runs")
    p.add_argument("--split", required=True)
    _add_train_flags(p)
    p.add_argument("--k", type=_comma_ints, default=[10, 20, 50])
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--target", choices=("validation", "test"), default="test")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("predict", help="rank additional techniques for an observed set")
    p.add_argument("--model", "-m", required=True, help="model JSON file")
    p.add_argument("--observed", type=_comma_strs, required=True,
                   help="comma-separated technique ids")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--similarity", choices=("dot", "cosine"), default=None)
    p.add_argument("--names", default=None, help="JSON id->name catalog")
    p.add_argument("--export", choices=("navigator", "csv"), default=None)
    p.add_argument("--layer-name", default="inferred-techniques", dest="layer_name")
    p.add_argument("--fold-negative-weight", type=float,
                   default=DEFAULT_FOLD_NEGATIVE_WEIGHT, dest="fold_negative_weight")
    p.add_argument("--fold-reg", type=float, default=DEFAULT_FOLD_REGULARIZATION,
                   dest="fold_reg")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("project", help="2D projection + clustering of report embeddings")
    p.add_argument("--model", "-m", required=True)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--distance", choices=("cosine", "euclidean"), default="cosine")
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--early-exaggeration", type=float, default=12.0,
                   dest="early_exaggeration")
    p.add_argument("--exaggeration-iters", type=int, default=250,
                   dest="exaggeration_iters")
    p.add_argument("--learning-rate", type=float, default=200.0, dest="learning_rate")
    p.add_argument("--bandwidth", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("serve", help="HTTP prediction service")
    p.add_argument("--model", "-m", required=True)
    p.add_argument("--names", default=None)
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--static", default=None, help="directory of web UI assets to host")
    p.add_argument("--fold-negative-weight", type=float,
                   default=DEFAULT_FOLD_NEGATIVE_WEIGHT, dest="fold_negative_weight")
    p.add_argument("--fold-reg", type=float, default=DEFAULT_FOLD_REGULARIZATION,
                   dest="fold_reg")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()

    # Config file supplies defaults; anything passed explicitly wins because
    # set_defaults only changes what parse_args falls back to.
    config_path = None
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif arg.startswith("--config="):
            config_path = arg.split("=", 1)[1]
    if config_path:
        try:
            config = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"techinfer: cannot read config {config_path}: {exc}", file=sys.stderr)
            return USAGE_EXIT
        if not isinstance(config, dict):
            print("techinfer: config must be a JSON object", file=sys.stderr)
            return USAGE_EXIT
        parser.set_defaults(**config)
        for action in parser._subparsers._group_actions:  # propagate to subcommands
            for sp in action.choices.values():
                sp.set_defaults(**config)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except TechInferError as exc:
        print(f"techinfer: error [{exc.code}]: {exc}", file=sys.stderr)
        return DATA_EXIT
    except OSError as exc:
        print(f"techinfer: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
