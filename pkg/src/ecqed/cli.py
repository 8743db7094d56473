"""Command-line entry point.

Exit codes: 0 success, 1 data error, 2 config error, 3 numeric failure,
4 artifact/version error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from .corpus import SPLITS, Quadruple, corpus_statistics, ingest_source_dir, read_jsonl, write_jsonl
from .errors import ECQEDError, InputError
from .evaluator import REFERENCE_SPEED_MULTI_GRID, REFERENCE_SPEED_ONE_GRID, benchmark_throughput, evaluate_all
from .trainer import Checkpoint, TrainConfig, predict_many, train

log = logging.getLogger("ecqed")


def _emit(rows, out=None, tsv_path=None):
    out = out or sys.stdout
    lines = ["\t".join(str(c) for c in row) for row in rows]
    for line in lines:
        print(line, file=out)
    if tsv_path is not None:
        Path(tsv_path).parent.mkdir(parents=True, exist_ok=True)
        Path(tsv_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _fmt(x):
    return f"{x:.6f}"


def load_dialogs(path, split="all"):
    path = Path(path)
    if not path.exists():
        raise InputError(f"data file {path} not found")
    if path.is_dir():
        dialogs, failures = ingest_source_dir(path)
        if failures:
            raise InputError(f"{len(failures)} dialogs failed to parse, first: {failures[0]}")
    else:
        dialogs = read_jsonl(path)
    if split != "all":
        dialogs = [d for d in dialogs if d.split == split]
    if not dialogs:
        raise InputError(f"no dialogs found in {path} (split {split})")
    return dialogs


def read_predictions(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"prediction file {path} not found")
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out[str(rec["dialog_id"])] = {
                Quadruple(int(q["emotion_idx"]), int(q["cause_idx"]), q["emotion_type"], q["cause_type"])
                for q in rec.get("quadruples", [])
            }
    return out


def write_predictions(pred, path):
    with open(path, "w", encoding="utf-8") as fh:
        for did in sorted(pred):
            quads = [
                {"emotion_idx": q.emotion_idx, "cause_idx": q.cause_idx, "emotion_type": q.emotion_type, "cause_type": q.cause_type}
                for q in sorted(pred[did])
            ]
            fh.write(json.dumps({"dialog_id": did, "quadruples": quads}) + "\n")


# -- commands ----------------------------------------------------------------


def run_ingest(args):
    counters = Counter()
    source = Path(args.data)
    if source.is_dir():
        dialogs, failures = ingest_source_dir(source, counters)
        for exc in failures:
            print(f"parse failure: {exc}", file=sys.stderr)
        if failures:
            return 1
    elif source.is_file():
        dialogs = read_jsonl(source)
    else:
        print(f"no dialogs found: {source} does not exist", file=sys.stderr)
        return 1
    if not dialogs:
        print("no dialogs found", file=sys.stderr)
        return 1

    stats = corpus_statistics(dialogs, counters)
    fig_dir = Path(args.fig_dir) if args.fig_dir else None
    if args.stats_only:
        text = json.dumps(stats.to_json(), indent=2)
        if args.out:
            Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(text)
    else:
        if args.out:
            write_jsonl(dialogs, args.out)
        rows = [("split", "conversations", "utterances", "quadruples")]
        rows += [(s, stats.conversations.get(s, 0), stats.utterances.get(s, 0), stats.quadruples.get(s, 0)) for s in SPLITS]
        _emit(rows, tsv_path=fig_dir / "split_counts.tsv" if fig_dir else None)
        for key in sorted(counters):
            print(f"# {key}\t{counters[key]}")
    if fig_dir:
        from .plotting import plot_corpus_stats

        plot_corpus_stats(stats, fig_dir)
    return 0


def _train_config(args):
    cfg = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.one_grid:
        cfg.one_grid = True
    if args.ablate:
        cfg = cfg.with_ablations(args.ablate.split(","))
    return cfg.validate()


def run_train(args):
    cfg = _train_config(args)
    _emit([("key", "value")] + [(k, v) for k, v in cfg.to_json().items()])
    if args.dry_run:
        return 0
    dialogs = load_dialogs(args.data)
    log_path = Path(str(args.out) + ".log.jsonl")
    with open(log_path, "w", encoding="utf-8") as fh:

        def on_epoch(rec):
            fh.write(json.dumps(rec) + "\n")
            fh.flush()

        ckpt = train(dialogs, cfg, on_epoch=on_epoch)
    ckpt.save(args.out)
    meta = ckpt.metadata
    best = meta.get("best_val_f1")
    print(f"best_epoch\t{meta['epoch']}")
    print(f"final_train_loss\t{_fmt(meta['loss_curve'][-1])}")
    print(f"val_f1_quad\t{'n/a' if best is None else _fmt(best)}")
    if args.fig_dir:
        from .plotting import plot_loss_curve

        plot_loss_curve(meta["loss_curve"], meta["val_f1_curve"], Path(args.fig_dir) / "loss_curve.png")
    return 0


def run_evaluate(args):
    gold_dialogs = load_dialogs(args.data, args.split)
    gold = {d.dialog_id: d.quad_set for d in gold_dialogs}
    if args.gold_as_pred:
        pred = {k: set(v) for k, v in gold.items()}
    elif args.pred_file:
        pred = read_predictions(args.pred_file)
    elif args.checkpoint:
        pred = predict_many(gold_dialogs, Checkpoint.load(args.checkpoint[0]).build_model())
    else:
        raise InputError("evaluate needs --checkpoint, --pred-file or --gold-as-pred")
    report = evaluate_all(pred, gold)
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    fig_dir = Path(args.fig_dir) if args.fig_dir else None
    rows = [("level", "p", "r", "f1", "tp", "pred", "gold")]
    for level in ("quad", "pair", "emotion", "cause", "quad_overlap"):
        prf = getattr(report, level)
        rows.append((level, _fmt(prf.precision), _fmt(prf.recall), _fmt(prf.f1), prf.tp, prf.pred_count, prf.gold_count))
    _emit(rows, tsv_path=fig_dir / "eval.tsv" if fig_dir else None)
    if fig_dir:
        from .plotting import plot_eval_report

        plot_eval_report(report, fig_dir / "eval.png")
    return 0


def run_predict(args):
    if not args.checkpoint:
        raise InputError("predict needs --checkpoint")
    dialogs = load_dialogs(args.data, args.split)
    pred = predict_many(dialogs, Checkpoint.load(args.checkpoint[0]).build_model())
    if args.out:
        write_predictions(pred, args.out)
    _emit([("dialog_id", "quadruples")] + [(k, " ".join(q.short() for q in sorted(v))) for k, v in sorted(pred.items())])
    return 0


def run_benchmark(args):
    if not args.checkpoint:
        raise InputError("benchmark needs at least one --checkpoint")
    dialogs = load_dialogs(args.data, args.split)
    rates = {}
    for path in args.checkpoint:
        model = Checkpoint.load(path).build_model()
        label = "one_grid" if model.cfg.one_grid else "multi_grid"
        if label in rates:
            label = f"{label}:{path}"
        rates[label] = benchmark_throughput(model, dialogs, repeats=3)
    rows = [("model", "utterances_per_second")] + [(k, f"{v:.2f}") for k, v in rates.items()]
    result = {"utterances_per_second": rates}
    if "multi_grid" in rates and "one_grid" in rates:
        ratio = rates["multi_grid"] / rates["one_grid"]
        reference = REFERENCE_SPEED_MULTI_GRID / REFERENCE_SPEED_ONE_GRID
        rows += [("ratio_multi_over_one", f"{ratio:.3f}"), ("reference_ratio", f"{reference:.3f}")]
        result.update(ratio=ratio, reference_ratio=reference)
    fig_dir = Path(args.fig_dir) if args.fig_dir else None
    _emit(rows, tsv_path=fig_dir / "throughput.tsv" if fig_dir else None)
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    if fig_dir:
        from .plotting import plot_throughput

        plot_throughput(rates, fig_dir / "throughput.png")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="ecqed", description="Emotion-cause quadruple extraction in dialogs.")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, *flags):
        if "data" in flags:
            p.add_argument("--data", required=True, help="canonical JSONL file or RECCON release directory")
        if "out" in flags:
            p.add_argument("--out")
        if "split" in flags:
            p.add_argument("--split", default="test", choices=SPLITS + ("all",))
        if "checkpoint" in flags:
            p.add_argument("--checkpoint", action="append", help="checkpoint file (repeatable for benchmark)")
        p.add_argument("--fig-dir", help="write figures and TSV tables here")

    p = sub.add_parser("ingest", help="convert a RECCON release to canonical JSONL")
    common(p, "data", "out")
    p.add_argument("--stats-only", action="store_true")
    p.set_defaults(func=run_ingest)

    p = sub.add_parser("stats", help="same as ingest --stats-only")
    common(p, "data", "out")
    p.set_defaults(func=run_ingest, stats_only=True)

    p = sub.add_parser("train")
    common(p, "out")
    p.add_argument("--data")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--one-grid", action="store_true")
    p.add_argument("--ablate", help="comma list over sshg,su,du,mlp,biaffine")
    p.add_argument("--dry-run", action="store_true", help="validate and echo the config only")
    p.set_defaults(func=run_train)

    p = sub.add_parser("evaluate")
    common(p, "data", "out", "split", "checkpoint")
    p.add_argument("--pred-file")
    p.add_argument("--gold-as-pred", action="store_true", help="debug: score gold against itself")
    p.set_defaults(func=run_evaluate)

    p = sub.add_parser("predict")
    common(p, "data", "out", "split", "checkpoint")
    p.set_defaults(func=run_predict)

    p = sub.add_parser("benchmark")
    common(p, "data", "out", "split", "checkpoint")
    p.set_defaults(func=run_benchmark)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.verb == "train" and not args.dry_run:
        missing = [f for f in ("data", "out") if not getattr(args, f)]
        if missing:
            print(f"train needs --{' and --'.join(missing)}", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except ECQEDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
