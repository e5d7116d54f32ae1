"""Command-line front end.

Exit codes: 0 success, 1 check failed, 2 numeric failure, 64 usage error,
65 malformed input data.  ``APA_SEED`` supplies the seed when ``--seed`` is
not given.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import formats
from .activations import limits_check
from .autograd import NumericError
from .datagen import make_longtail, rng_for, theoretical_logit_table
from .experiments import ToyConfig, rebuild, run_toy
from .formats import FormatError
from .gradcheck import run_grad_check
from .nn import DivergenceError, RunReport
from .stats import (
    Family,
    UndefinedCollapseError,
    attention_entropy,
    attention_variance,
    covariances,
    logit_alignment_report,
    nc1,
    table_from_logits,
)

EXIT_OK, EXIT_FAIL, EXIT_NUMERIC, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 64, 65
ENTROPY_STREAM = 12

log = logging.getLogger("apa")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed_or_none(args) -> int | None:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("APA_SEED")
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"APA_SEED must be an integer, got {env!r}") from None


def _seed(args) -> int:
    seed = _seed_or_none(args)
    return 0 if seed is None else seed


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# --------------------------------------------------------------------------
# Commands

def cmd_grad_check(args) -> int:
    if args.probes <= 0:
        raise UsageError("--probes must be positive")
    report = run_grad_check(args.probes, _seed(args))
    print(f"{'derivative':<18} {'max rel err':>12}  worst probe (z, kappa, lambda)")
    for r in report.results:
        z, k, lam = r.worst_probe
        print(f"{r.name:<18} {r.max_rel_error:12.3e}  ({z:.4g}, {k:.4g}, {lam:.4g})")
    print(f"max relative error {report.max_rel_error:.3e} (tolerance {args.tolerance:g})")
    if not report.all_finite:
        print("non-finite derivative encountered", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK if report.max_rel_error < args.tolerance else EXIT_FAIL


def cmd_limits_check(args) -> int:
    if not args.tolerance > 0:
        raise UsageError("--tolerance must be positive")
    results = limits_check(args.tolerance)
    print(f"{'identity':<10} {'max deviation':>14} {'tolerance':>10}  status")
    for r in results:
        print(f"{r.name:<10} {r.max_deviation:14.3e} {r.tolerance:10.1e}  {'pass' if r.passed else 'FAIL'}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_analyze_logits(args) -> int:
    try:
        logits, labels = formats.read_logit_csv(args.input)
    except FileNotFoundError:
        raise UsageError(f"no such file: {args.input}") from None
    except FormatError as exc:
        raise DataError(str(exc)) from None
    if logits.shape[1] < 2:
        raise DataError(f"{args.input}: need at least 2 class columns")
    table = table_from_logits(logits, labels, args.rows)
    report = logit_alignment_report(table, workers=args.workers)
    if not report.evaluated:
        log.warning("every class has fewer than 2 distinct samples; all classes skipped")
    doc = {
        "kind": "logit-alignment",
        "header": {
            "input": str(args.input),
            "rows": args.rows,
            "fit": "per-class location/scale, method of moments",
            "ks": "exact one-sample statistic on the empirical CDF",
        },
        "classes": [asdict(c) for c in report.classes],
        "aggregate": {
            "evaluated": len(report.evaluated),
            "skipped": report.skipped,
            "gumbel_fraction": report.gumbel_fraction,
            "logistic_fraction": report.logistic_fraction,
        },
    }
    _emit(formats.dumps(doc), args.out)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["class", "group", "n", "skewness", "ks_logistic", "ks_gumbel", "winner"])
            for c in report.classes:
                if c.skipped:
                    continue
                w.writerow([c.cls, c.group, c.n, repr(c.skewness), repr(c.ks_logistic), repr(c.ks_gumbel), c.winner])
    if report.evaluated:
        print(f"gumbel-closer fraction {report.gumbel_fraction:.3f} over {len(report.evaluated)} classes",
              file=sys.stderr)
    return EXIT_OK


def _load_config(path, seed_override) -> ToyConfig:
    raw = _read_json(path)
    try:
        cfg = ToyConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid config: {exc}") from None
    if seed_override is not None:
        cfg = cfg.with_seed(seed_override)
    return cfg


def _toy_config(args) -> ToyConfig:
    if args.config:
        return _load_config(args.config, _seed_or_none(args))
    return ToyConfig().with_seed(_seed(args))


def cmd_train_toy(args) -> int:
    cfg = _toy_config(args)
    try:
        report, _ = run_toy(cfg)
    except (DivergenceError, NumericError) as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _emit(report.to_json(), args.out)
    fin = report.final
    ga = fin["group_acc"]
    fmt = lambda v: "  n/a" if v is None else f"{v:.3f}"  # noqa: E731
    print(f"acc avg {fin['avg_acc']:.3f} many {fmt(ga['many'])} medium {fmt(ga['medium'])} "
          f"few {fmt(ga['few'])} nc1 {fin['nc1']:.4f}", file=sys.stderr)
    return EXIT_OK


def _load_run(path) -> RunReport:
    text = Path(path).read_text() if Path(path).exists() else None
    if text is None:
        raise UsageError(f"no such file: {path}")
    try:
        return RunReport.from_json(text)
    except (ValueError, TypeError, KeyError) as exc:
        raise DataError(f"{path}: not a run report: {exc}") from None


def entropy_table(report: RunReport, split: str, batch: int) -> list[dict]:
    """Per-layer gate entropy/variance for batches of test samples drawn per group."""
    cfg, model = rebuild(report)
    test = make_longtail(cfg.data, "test")
    rng = rng_for(cfg.train.seed, ENTROPY_STREAM)
    sample_group = np.asarray(test.groups, dtype=object)[test.labels]
    selections = {"all": np.arange(len(test))}
    if split == "groups":
        selections = {g: np.flatnonzero(sample_group == g) for g in ("many", "few")}
    rows = []
    for name, idx in selections.items():
        if idx.size == 0:
            continue
        if idx.size > batch:
            idx = np.sort(rng.choice(idx, batch, replace=False))
        model.predict(test.features[idx])
        var = attention_variance(model.gates) if model.gates else []
        for layer, gates in enumerate(model.gates):
            rows.append({"split": name, "layer": layer, "samples": int(idx.size),
                         "entropy": attention_entropy(gates), "variance": var[layer]})
    return rows


def cmd_attention_entropy(args) -> int:
    if args.batch <= 0:
        raise UsageError("--batch must be positive")
    report = _load_run(args.run)
    rows = entropy_table(report, args.split, args.batch)
    print(f"{'split':<8} {'layer':>5} {'n':>5} {'entropy':>10} {'variance':>10}")
    for r in rows:
        print(f"{r['split']:<8} {r['layer']:>5} {r['samples']:>5} {r['entropy']:10.6f} {r['variance']:10.6f}")
    if args.out:
        formats.write_json(args.out, {"kind": "attention-entropy", "run": str(args.run), "log_base": 2, "rows": rows})
    return EXIT_OK


def cmd_nc1(args) -> int:
    try:
        feats, labels = formats.read_feature_csv(args.features)
    except FileNotFoundError:
        raise UsageError(f"no such file: {args.features}") from None
    except FormatError as exc:
        raise DataError(str(exc)) from None
    if labels.size == 0:
        raise DataError(f"{args.features}: no rows")
    try:
        pair = covariances(feats, labels, args.classes)
        value = nc1(pair)
    except UndefinedCollapseError as exc:
        print(f"nc1 undefined: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        raise DataError(f"{args.features}: {exc}") from None
    print(repr(value))
    if args.out:
        formats.write_json(args.out, {"kind": "nc1", "features": str(args.features), "classes": pair.num_classes,
                                      "dim": pair.dim, "nc1": value})
    return EXIT_OK


def cmd_gen_logits(args) -> int:
    if args.classes < 2 or args.samples < 1:
        raise UsageError("need --classes >= 2 and --samples >= 1")
    seed = _seed(args)
    logits = theoretical_logit_table(Family(args.family), args.classes, args.samples, seed)
    labels = rng_for(seed, 1).integers(0, args.classes, args.samples)
    formats.write_logit_csv(args.out, logits, labels)
    return EXIT_OK


def cmd_gen_data(args) -> int:
    cfg = _toy_config(args)
    ds = make_longtail(cfg.data, args.split)
    formats.write_feature_csv(args.out, ds.features, ds.labels)
    return EXIT_OK


def cmd_export_features(args) -> int:
    report = _load_run(args.run)
    cfg, model = rebuild(report)
    test = make_longtail(cfg.data, "test")
    model.predict(test.features)
    formats.write_feature_csv(args.out, model.features, test.labels)
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="apa", description="Adaptive parametric activation toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("grad-check", help="closed-form derivatives vs finite differences")
    s.add_argument("--probes", type=int, default=1000)
    s.add_argument("--seed", type=int)
    s.add_argument("--tolerance", type=float, default=1e-5)
    s.set_defaults(func=cmd_grad_check)

    s = sub.add_parser("limits-check", help="special cases recovered by APA/AGLU")
    s.add_argument("--tolerance", type=float, default=1e-5)
    s.set_defaults(func=cmd_limits_check)

    s = sub.add_parser("analyze-logits", help="per-class KS distance to fitted Gumbel/Logistic")
    s.add_argument("--input", required=True)
    s.add_argument("--out", help="JSON report path (stdout if omitted)")
    s.add_argument("--csv", help="plot-ready per-class distance table")
    s.add_argument("--rows", choices=("all", "labelled"), default="all")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_analyze_logits)

    s = sub.add_parser("train-toy", help="train on a synthetic long-tailed dataset")
    s.add_argument("--config")
    s.add_argument("--out", help="run report path (stdout if omitted)")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_train_toy)

    s = sub.add_parser("attention-entropy", help="per-layer gate entropy/variance of a trained run")
    s.add_argument("--run", required=True)
    s.add_argument("--split", choices=("groups", "all"), default="groups")
    s.add_argument("--batch", type=int, default=128)
    s.add_argument("--out")
    s.set_defaults(func=cmd_attention_entropy)

    s = sub.add_parser("nc1", help="neural-collapse NC1 of a feature CSV")
    s.add_argument("--features", required=True)
    s.add_argument("--classes", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_nc1)

    s = sub.add_parser("gen-logits", help="write a synthetic Gumbel/Logistic logit CSV")
    s.add_argument("--family", choices=[f.value for f in Family], required=True)
    s.add_argument("--classes", type=int, default=10)
    s.add_argument("--samples", type=int, default=10000)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_logits)

    s = sub.add_parser("gen-data", help="write a long-tailed dataset split as a feature CSV")
    s.add_argument("--config")
    s.add_argument("--split", choices=("train", "test"), default="train")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("export-features", help="penultimate test features of a trained run")
    s.add_argument("--run", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export_features)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"apa {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"apa {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
