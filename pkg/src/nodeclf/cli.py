"""Command-line surface.

Subcommands: ``train``, ``eval``, ``predict``, ``explain``,
``vector-field``, and ``gen-synthetic``.  Exit codes are a stable
contract: 0 success, 1 usage error, 2 malformed input or model file,
3 numeric failure (divergence, step limits).
"""

from __future__ import annotations

import argparse
import os
import sys

from . import evaluation, interpret
from .datasets import (DatasetFile, generate_synthetic, read_records,
                       to_dataset, write_dataset_csv)
from .errors import (ConfigError, DataFormatError, DimensionError,
                     ModelFileError, SolverError, TrainingError,
                     UndefinedMetricError)
from .model import TrainConfig, init_classifier, predict, train
from .odesolve import SolverConfig
from .serialize import load_model, save_model
from .text import fit

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nodeclf",
        description="Train, evaluate, and explain a continuous-dynamics "
                    "text classifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_dataset_flags(p):
        p.add_argument("--text-field", default="text",
                       help="name of the text column/field (default: text)")
        p.add_argument("--label-field", default="label",
                       help="name of the label column/field (default: label)")
        p.add_argument("--format", default="auto",
                       choices=["auto", "csv", "tsv", "jsonl"],
                       help="dataset format (default: by file extension)")

    def add_solver_flags(p):
        p.add_argument("--solver", default="dopri45",
                       choices=["euler", "rk4", "dopri45"])
        p.add_argument("--rtol", type=float, default=1e-6)
        p.add_argument("--atol", type=float, default=1e-8)
        p.add_argument("--initial-step", type=float, default=0.1)
        p.add_argument("--max-solver-steps", type=int, default=10_000)
        p.add_argument("--fixed-steps", type=int, default=100,
                       help="step count for the fixed-step methods")

    p = sub.add_parser("train", help="fit a classifier and write a model file")
    p.add_argument("data", help="training dataset (csv/tsv/jsonl)")
    p.add_argument("--out", required=True, help="output model file")
    add_dataset_flags(p)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--max-features", type=int, default=5000)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--l2", type=float, default=0.0)
    add_solver_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="print the comparison table on a test set")
    p.add_argument("model", help="model file")
    p.add_argument("data", help="evaluation dataset")
    add_dataset_flags(p)
    p.add_argument("--baseline", action="store_true",
                   help="also train and evaluate the logistic baseline")
    p.add_argument("--train-data", default=None,
                   help="dataset to fit the baseline on (default: the eval data)")
    p.add_argument("--baseline-iters", type=int, default=500)
    p.add_argument("--baseline-lr", type=float, default=1.0)
    p.add_argument("--scores-file", default=None,
                   help="external 'label,score' file to add as a table row")
    p.add_argument("--scores-name", default="external")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="decision threshold for external scores")
    p.add_argument("--ovr-auroc", action="store_true",
                   help="report macro one-vs-rest AUROC for multiclass tasks")
    p.add_argument("--csv", default=None, help="also write the table to this file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify text from a flag or stdin")
    p.add_argument("model", help="model file")
    p.add_argument("--text", default=None, help="a single input text")
    p.add_argument("--stdin", action="store_true",
                   help="read one input per line from standard input")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("explain", help="print top-k word saliency per class")
    p.add_argument("model", help="model file")
    p.add_argument("data", help="documents to aggregate over")
    add_dataset_flags(p)
    p.add_argument("--class", dest="class_name", default=None,
                   help="restrict the report to one class")
    p.add_argument("--all-classes", action="store_true",
                   help="one table per class (default when --class is absent)")
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--csv", default=None,
                   help="write machine-readable saliency (per class) here")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("vector-field",
                       help="export the derivative field on a 2D plane")
    p.add_argument("model", help="model file")
    p.add_argument("--out", required=True, help="output x,y,dx,dy file")
    p.add_argument("--bounds", default="-2,2,-2,2",
                   help="xmin,xmax,ymin,ymax (default: -2,2,-2,2)")
    p.add_argument("--grid-n", type=int, default=20)
    p.add_argument("--plane", default="0,1",
                   help="two hidden coordinates to slice (default: 0,1)")
    p.add_argument("--t", type=float, default=0.5,
                   help="evaluation time (the flow is autonomous)")
    p.add_argument("--svg", default=None, help="also render a quiver SVG here")
    p.add_argument("--trajectories", default=None,
                   help="dataset whose hidden trajectories to export")
    p.add_argument("--traj-prefix", default=None,
                   help="path prefix for trajectory files "
                        "(default: derived from --out)")
    p.add_argument("--n-samples", type=int, default=20,
                   help="samples per trajectory")
    add_dataset_flags(p)
    p.set_defaults(func=cmd_vector_field)

    p = sub.add_parser("gen-synthetic", help="write a seeded synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--task", default="admit", choices=["admit", "sentiment"])
    p.set_defaults(func=cmd_gen_synthetic)

    return parser


def _solver_from_args(args) -> SolverConfig:
    return SolverConfig(
        method=args.solver,
        rtol=args.rtol,
        atol=args.atol,
        initial_step=args.initial_step,
        max_steps=args.max_solver_steps,
        fixed_step_count=args.fixed_steps,
    )


def _dataset_file(path: str, args) -> DatasetFile:
    return DatasetFile(path=path, fmt=args.format,
                       text_field=args.text_field, label_field=args.label_field)


def cmd_train(args) -> int:
    rows = read_records(_dataset_file(args.data, args))
    data, label_names = to_dataset(rows)
    tfidf = fit([text for text, _ in rows],
                max_features=args.max_features)
    classifier = init_classifier(
        n_features=tfidf.n_features,
        hidden_dim=args.hidden_dim,
        n_classes=len(label_names),
        label_names=label_names,
        solver=_solver_from_args(args),
        seed=args.seed,
    )
    cfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.lr, seed=args.seed, l2_penalty=args.l2,
    )
    trained, curve = train(classifier, data, cfg, tfidf)
    for i, value in enumerate(curve, start=1):
        print(f"epoch {i} loss {value:.6f}")
    metadata = {
        "seed": args.seed,
        "epochs": args.epochs,
        "final_loss": curve[-1] if curve else None,
    }
    save_model(args.out, trained, tfidf, metadata)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    classifier, tfidf, _ = load_model(args.model)
    rows = read_records(_dataset_file(args.data, args))
    test, _ = to_dataset(rows, classifier.label_names)

    def node_scorer(text: str):
        label, probs = predict(classifier, tfidf, text)
        return label, probs.tolist()

    models = [("neural_ode", True, node_scorer)]
    if args.baseline:
        if args.train_data is not None:
            train_rows = read_records(_dataset_file(args.train_data, args))
        else:
            train_rows = rows
        train_set, _ = to_dataset(train_rows, classifier.label_names)
        baseline_cfg = TrainConfig(
            epochs=args.baseline_iters, learning_rate=args.baseline_lr,
        )
        lm = evaluation.train_logistic(train_set, tfidf, baseline_cfg)
        models.append(("logistic_regression", True,
                       evaluation.logistic_scorer(lm, tfidf)))

    results = evaluation.benchmark(models, test, tfidf,
                                   ovr_auroc=args.ovr_auroc)
    if args.scores_file is not None:
        labels, scores = evaluation.parse_score_file(args.scores_file)
        results.append(evaluation.result_from_scores(
            args.scores_name, False, labels, scores, args.threshold))

    print(evaluation.format_benchmark_table(results))
    if args.csv is not None:
        with open(args.csv, "w", encoding="utf-8") as fp:
            evaluation.write_benchmark_csv(results, fp)
    return EXIT_OK


def cmd_predict(args) -> int:
    classifier, tfidf, _ = load_model(args.model)
    if args.text is None and not args.stdin:
        raise ConfigError("predict needs --text or --stdin")
    if args.text is not None and args.stdin:
        raise ConfigError("give either --text or --stdin, not both")
    inputs = [args.text] if args.text is not None else \
        (line.rstrip("\n") for line in sys.stdin)
    for text in inputs:
        label, probs = predict(classifier, tfidf, text)
        pairs = " ".join(
            f"{name}:{probs[i]:.6f}"
            for i, name in enumerate(classifier.label_names)
        )
        print(f"{classifier.label_names[label]} {pairs}")
    return EXIT_OK


def cmd_explain(args) -> int:
    if args.top_k < 1:
        raise ConfigError(f"--top-k must be >= 1, got {args.top_k}")
    classifier, tfidf, _ = load_model(args.model)
    rows = read_records(_dataset_file(args.data, args))
    docs = [text for text, _ in rows]
    if args.class_name is not None:
        if args.class_name not in classifier.label_names:
            raise ConfigError(
                f"unknown class {args.class_name!r}; valid classes: "
                f"{', '.join(classifier.label_names)}"
            )
        targets = [classifier.label_names.index(args.class_name)]
    else:
        targets = list(range(classifier.n_classes))
    first = True
    for target in targets:
        report = interpret.saliency(classifier, tfidf, docs, target)
        if not first:
            print()
        first = False
        print(interpret.format_saliency_table(report, args.top_k))
        if args.csv is not None:
            path = args.csv
            if len(targets) > 1:
                root, ext = os.path.splitext(path)
                path = f"{root}.{report.class_name}{ext or '.csv'}"
            with open(path, "w", encoding="utf-8") as fp:
                interpret.write_saliency_csv(report, fp)
    return EXIT_OK


def _parse_floats(text: str, n: int, what: str) -> list[float]:
    parts = text.split(",")
    if len(parts) != n:
        raise ConfigError(f"{what} needs {n} comma-separated values, got {text!r}")
    try:
        return [float(v) for v in parts]
    except ValueError as e:
        raise ConfigError(f"{what}: {e}") from e


def cmd_vector_field(args) -> int:
    classifier, tfidf, _ = load_model(args.model)
    bounds = tuple(_parse_floats(args.bounds, 4, "--bounds"))
    axes = args.plane.split(",")
    if len(axes) != 2:
        raise ConfigError(f"--plane needs two comma-separated indices, got "
                          f"{args.plane!r}")
    try:
        plane = (int(axes[0]), int(axes[1]))
    except ValueError as e:
        raise ConfigError(f"--plane: {e}") from e
    grid = interpret.vector_field(classifier, plane, bounds, args.grid_n,
                                  t=args.t)
    if args.trajectories is not None:
        rows = read_records(_dataset_file(args.trajectories, args))
        grid.trajectories = interpret.trajectories(
            classifier, tfidf, [text for text, _ in rows], plane,
            args.n_samples,
        )
    with open(args.out, "w", encoding="utf-8") as fp:
        interpret.write_vector_field_csv(grid, fp)
    written = [args.out]
    if grid.trajectories:
        prefix = args.traj_prefix
        if prefix is None:
            prefix = os.path.splitext(args.out)[0] + "-traj"
        for k, path_points in enumerate(grid.trajectories):
            traj_path = f"{prefix}-{k:03d}.csv"
            with open(traj_path, "w", encoding="utf-8") as fp:
                interpret.write_trajectory_csv(path_points, fp)
            written.append(traj_path)
    if args.svg is not None:
        with open(args.svg, "w", encoding="utf-8") as fp:
            interpret.render_quiver_svg(grid, fp)
        written.append(args.svg)
    print("wrote " + " ".join(written))
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    rows = generate_synthetic(args.task, args.n, args.seed)
    write_dataset_csv(rows, args.out)
    print(f"wrote {args.out} ({args.n} documents, task {args.task}, "
          f"seed {args.seed})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage problems and 0 for --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"nodeclf: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, ModelFileError, DimensionError,
            UndefinedMetricError) as e:
        print(f"nodeclf: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, TrainingError) as e:
        print(f"nodeclf: {e}", file=sys.stderr)
        return EXIT_NUMERIC


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
