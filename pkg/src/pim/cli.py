"""Batch command-line interface.

Three subcommands: ``synth`` writes a seeded synthetic benchmark, ``partition``
runs the full pipeline on a feature file, ``eval`` scores a label file against
a ground-truth sidecar.  Reports are JSON on stdout (and on disk for file-
producing commands); all logging goes to stderr.

Exit codes: 0 success, 2 invalid input or malformed file, 3 I/O failure,
4 numerical abort.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import save_model
from .dataset import (
    ParseError,
    SynthSpec,
    class_counts,
    generate_synthetic,
    load_features,
    save_fmat,
)
from .driver import DEFAULT_LAMBDA_GRID, PimConfig, estimate_k, partition
from .evaluation import acc_partition, class_count_error, labeled_acc
from .objective import AblationFlags
from .optimizer import NumericalError

logger = logging.getLogger("pim")

_ABLATE_TOKENS = {
    "ce_off": ("constraint", "off"),
    "marginal_zu": ("marginal_scope", "zu_only"),
    "marginal_off": ("marginal_scope", "off"),
}


def _json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_json_dumps(obj))


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _parse_lambda_grid(text: str) -> tuple[float, ...]:
    if ":" in text:
        lo, hi, n = text.split(":")
        return tuple(float(x) for x in np.linspace(float(lo), float(hi), int(n)))
    return tuple(float(x) for x in text.split(","))


def _parse_ablate(text: str | None) -> AblationFlags:
    kwargs = {}
    if text:
        for token in text.split(","):
            token = token.strip()
            if not token:
                continue
            if token not in _ABLATE_TOKENS:
                raise ValueError(
                    f"unknown ablation token {token!r}; expected any of {sorted(_ABLATE_TOKENS)}"
                )
            key, value = _ABLATE_TOKENS[token]
            kwargs[key] = value
    return AblationFlags(**kwargs)


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("PIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ValueError(f"PIM_THREADS must be an integer, got {env!r}") from exc
    return 1


def _load_truth(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            truth = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(truth, dict) or "labels" not in truth:
        raise ParseError(f"{path}: truth sidecar must be a JSON object with a 'labels' array")
    return truth


# --- synth -------------------------------------------------------------------


def cmd_synth(args) -> int:
    spec = SynthSpec(
        k_total=args.k,
        k_old=args.k_old,
        dim=args.dim,
        samples_per_class_base=args.samples_per_class,
        tail=args.tail,
        alpha=args.alpha,
        separation=args.separation,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    started = _utc_now()
    t0 = time.monotonic()
    fs, truth = generate_synthetic(spec, labeled_fraction=args.labeled_fraction, normalize=not args.no_normalize)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    save_fmat(fs, out / "features.fmat")
    _write_json(out / "truth.json", {
        "k_total": spec.k_total,
        "k_old": spec.k_old,
        "labels": truth.tolist(),
        "labeled_mask": fs.labeled_mask.tolist(),
    })
    figures = []
    if not args.no_figures:
        from .figures import save_class_frequencies

        save_class_frequencies(class_counts(spec), out / "class_frequencies.png")
        figures.append("class_frequencies.png")
    manifest = {
        "command": "synth",
        "version": __version__,
        "argv": args.argv,
        "seed": spec.seed,
        "spec": {
            "k_total": spec.k_total, "k_old": spec.k_old, "dim": spec.dim,
            "samples_per_class_base": spec.samples_per_class_base,
            "tail": spec.tail, "alpha": spec.alpha,
            "separation": spec.separation, "noise_sigma": spec.noise_sigma,
            "seed": spec.seed, "labeled_fraction": args.labeled_fraction,
            "normalize": not args.no_normalize,
        },
        "inputs": {},
        "output_dir": str(args.output),
        "outputs": {"features": "features.fmat", "truth": "truth.json", "figures": figures},
    }
    report = {
        "schema": "pim-report/1",
        "manifest": manifest,
        "data": {
            "n_total": fs.n_total, "n_labeled": fs.n_labeled,
            "n_unlabeled": fs.n_unlabeled, "dim": fs.dim, "k_old": fs.k_old,
        },
        "class_counts": class_counts(spec).tolist(),
    }
    _write_json(out / "manifest.json", {
        **manifest,
        "started_at": started,
        "finished_at": _utc_now(),
        "wall_clock_seconds": time.monotonic() - t0,
    })
    sys.stdout.write(_json_dumps(report))
    logger.info("wrote %s", out / "features.fmat")
    return 0


# --- partition ---------------------------------------------------------------


def cmd_partition(args) -> int:
    if args.k is None and not args.estimate_k:
        raise ValueError("either --k or --estimate-k is required")
    if args.lambda_ is not None and args.lambda_grid is not None:
        raise ValueError("--lambda and --lambda-grid are mutually exclusive")
    grid = DEFAULT_LAMBDA_GRID
    if args.lambda_ is not None:
        grid = (args.lambda_,)
    elif args.lambda_grid is not None:
        grid = _parse_lambda_grid(args.lambda_grid)
    config = PimConfig(
        lambda_grid=grid,
        epochs_partition=args.epochs,
        epochs_ksearch=args.epochs_ksearch,
        init_strategy=args.init,
        flags=_parse_ablate(args.ablate),
        k_max=args.k_max,
        seed=args.seed,
        score=args.score,
        threads=_resolve_threads(args.threads),
    )
    started = _utc_now()
    t0 = time.monotonic()
    fs = load_features(args.input, normalize=not args.no_normalize)
    truth = None
    if args.truth:
        truth = _load_truth(args.truth)
        if len(truth["labels"]) != fs.n_total:
            raise ValueError(
                f"truth sidecar has {len(truth['labels'])} labels for {fs.n_total} rows"
            )

    timings = {}
    k_search = None
    if args.estimate_k:
        t = time.monotonic()
        k_search = estimate_k(fs, config)
        timings["k_search_seconds"] = time.monotonic() - t
        k = k_search.k_hat
        logger.info("estimated class count: %d", k)
    else:
        k = args.k

    t = time.monotonic()
    ground_truth = np.asarray(truth["labels"], dtype=np.int64) if truth else None
    result = partition(fs, k, config, ground_truth=ground_truth)
    timings["partition_seconds"] = time.monotonic() - t

    if result.eval_report is not None and k_search is not None and truth and "k_total" in truth:
        result.eval_report.k_hat = k_search.k_hat
        result.eval_report.err = class_count_error(k_search.k_hat, int(truth["k_total"]))

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {"report": "report.json", "labels": "labels.csv"}
    with open(out / "labels.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{int(c)}\n" for c in result.labels)
    if args.save_model:
        save_model(result.model, out / "model.pmod")
        outputs["model"] = "model.pmod"
    if args.trace:
        with open(out / "trace.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("total\n")
            fh.writelines(f"{float(v)!r}\n" for v in result.loss_trace)
        outputs["trace"] = "trace.csv"
    figures = []
    if not args.no_figures:
        from .figures import save_ksearch_trace, save_lambda_curve

        save_lambda_curve(result.lambda_result.trials, result.lambda_result.lambda_opt, out / "lambda_search.png")
        figures.append("lambda_search.png")
        if k_search is not None:
            save_ksearch_trace(k_search.trace, k_search.k_hat, out / "ksearch.png")
            figures.append("ksearch.png")
    outputs["figures"] = figures

    manifest = {
        "command": "partition",
        "version": __version__,
        "argv": args.argv,
        "seed": config.seed,
        "config": {**config.as_dict(), "normalize": not args.no_normalize, "estimate_k": bool(args.estimate_k)},
        "inputs": {
            "features": {"path": str(args.input), "sha256": _sha256(args.input)},
            **({"truth": {"path": str(args.truth), "sha256": _sha256(args.truth)}} if args.truth else {}),
        },
        "output_dir": str(args.output),
        "outputs": outputs,
    }
    report = {
        "schema": "pim-report/1",
        "manifest": manifest,
        "data": {
            "n_total": fs.n_total, "n_labeled": fs.n_labeled,
            "n_unlabeled": fs.n_unlabeled, "dim": fs.dim, "k_old": fs.k_old,
        },
        "k": int(k),
        "k_search": k_search.as_dict() if k_search is not None else None,
        "lambda_search": result.lambda_result.as_dict(),
        "loss": result.breakdown.as_dict(),
        "eval": result.eval_report.as_dict() if result.eval_report is not None else None,
    }
    _write_json(out / "report.json", report)
    _write_json(out / "manifest.json", {
        **manifest,
        "started_at": started,
        "finished_at": _utc_now(),
        "wall_clock_seconds": time.monotonic() - t0,
        "timings": timings,
    })
    sys.stdout.write(_json_dumps(report))
    logger.info("wrote %s", out / "report.json")
    return 0


# --- eval --------------------------------------------------------------------


def cmd_eval(args) -> int:
    truth = _load_truth(args.truth)
    labels = np.asarray(truth["labels"], dtype=np.int64)
    try:
        pred = np.loadtxt(args.pred, dtype=np.int64, ndmin=1)
    except ValueError as exc:
        raise ParseError(f"{args.pred}: malformed label file: {exc}") from exc
    if pred.shape[0] != labels.shape[0]:
        raise ValueError(f"prediction file has {pred.shape[0]} rows, truth has {labels.shape[0]}")
    mask = truth.get("labeled_mask")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape[0] != labels.shape[0]:
            raise ValueError("labeled_mask length does not match labels")
        k_old = int(truth.get("k_old", labels.max() + 1))
        report = acc_partition(pred[~mask], labels[~mask], k_old)
        report.labeled_acc = labeled_acc(pred[mask], labels[mask])
    else:
        k_old = int(truth.get("k_old", labels.max() + 1))
        report = acc_partition(pred, labels, k_old)
    if args.k_hat is not None:
        report.k_hat = args.k_hat
        if "k_total" in truth:
            report.err = class_count_error(args.k_hat, int(truth["k_total"]))
    sys.stdout.write(_json_dumps(report.as_dict()))
    return 0


# --- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"pim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic benchmark")
    p.add_argument("--k", type=int, required=True, help="total class count")
    p.add_argument("--k-old", type=int, required=True, help="known class count")
    p.add_argument("--dim", type=int, required=True, help="embedding dimension")
    p.add_argument("--samples-per-class", type=int, default=100)
    p.add_argument("--tail", choices=["uniform", "power"], default="uniform")
    p.add_argument("--alpha", type=float, default=1.0, help="power-tail exponent")
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--noise-sigma", type=float, default=1.0)
    p.add_argument("--labeled-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("partition", help="partition a feature file into clusters")
    p.add_argument("--input", required=True, help="feature file (.fmat or .csv)")
    p.add_argument("--k", type=int, default=None, help="total cluster count")
    p.add_argument("--estimate-k", action="store_true", help="estimate the cluster count first")
    p.add_argument("--k-max", type=int, default=None, help="upper bound for the count search")
    p.add_argument("--lambda", dest="lambda_", type=float, default=None,
                   help="fix the entropy weight to a single value")
    p.add_argument("--lambda-grid", default=None,
                   help="comma list '0.1,0.5,1' or linspace 'lo:hi:n'")
    p.add_argument("--epochs", type=int, default=1000, help="partitioning epochs")
    p.add_argument("--epochs-ksearch", type=int, default=500, help="count-search epochs")
    p.add_argument("--init", choices=["ssrdm", "sskmpp", "sskm"], default="sskm")
    p.add_argument("--ablate", default=None,
                   help="comma list of: ce_off, marginal_zu, marginal_off")
    p.add_argument("--score", choices=["dot", "neg_sqdist"], default="dot")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="grid-trial parallelism (env PIM_THREADS)")
    p.add_argument("--trace", action="store_true", help="write the per-epoch loss trace")
    p.add_argument("--save-model", action="store_true")
    p.add_argument("--truth", default=None, help="ground-truth sidecar for scoring")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("eval", help="score a label file against a truth sidecar")
    p.add_argument("--pred", required=True, help="label file, one cluster id per line")
    p.add_argument("--truth", required=True, help="ground-truth JSON sidecar")
    p.add_argument("--k-hat", type=int, default=None, help="estimated class count")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s", force=True)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except (ParseError, ValueError) as exc:
        logger.error("%s", exc)
        return 2
    except OSError as exc:
        logger.error("I/O failure: %s", exc)
        return 3
    except NumericalError as exc:
        logger.error("numerical abort: %s", exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
