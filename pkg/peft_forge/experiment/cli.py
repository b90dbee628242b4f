"""Command line entry point: ``python -m peft_forge <verb> [--config FILE] ...``"""
import argparse
import logging
import sys
import time
from pathlib import Path

import pandas as pd

from peft_forge import settings
from peft_forge.adapters.accounting import OPTIMIZED_RANKS, VTAB_TASKS, average_trainable_params, optimized_rank_params
from peft_forge.adapters.presets import preset_config
from peft_forge.errors import ConfigParseError, PeftForgeError
from peft_forge.experiment.config import default_config, parse_config
from peft_forge.experiment.results import FORMATS, emit_results, format_summary, summarize, write_summary
from peft_forge.experiment.runner import evaluate_checkpoint, run_experiment
from peft_forge.experiment.sink import write_records
from peft_forge.scenarios import STUDIES
from peft_forge.vit.config import BackboneConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

COUNT_RANKS = (1, 2, 4, 8, 16, 32)
COUNT_PRESETS = (("houlsby", 8), ("houlsby", 4), ("pfeiffer", 8), ("adaptformer", 8))


def _int_list(text):
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (defaults apply when omitted)")
    common.add_argument("--seeds", type=_int_list, help="comma-separated seeds, overrides experiment.seeds")
    common.add_argument("--out", help="result file; <out>.summary.csv is written next to it")
    common.add_argument("--format", choices=FORMATS, help="result file format")
    common.add_argument("--precision", choices=("f32", "f64"), help="floating point precision")

    parser = argparse.ArgumentParser(prog="peft_forge", description="Adapter fine-tuning lab for vision transformers.")
    verbs = parser.add_subparsers(dest="command", required=True)

    train = verbs.add_parser("train", parents=[common], help="run the configured experiment over its seeds")
    train.add_argument("--ranks", type=_int_list, help="rank sweep, one record set per rank")
    evaluation = verbs.add_parser("eval", parents=[common], help="score an adapter + head checkpoint")
    evaluation.add_argument("--checkpoint", required=True)
    for verb, study in STUDIES.items():
        verbs.add_parser(verb, parents=[common], help=(study.__doc__ or verb).strip().splitlines()[0])
    counting = verbs.add_parser("count-params", help="trainable parameter report at ViT-B/16 scale")
    counting.add_argument("--config", help="report for the configured backbone instead")
    counting.add_argument("--out", help="also write the report to this file")
    counting.add_argument("--format", choices=FORMATS, help="report file format (csv by default)")
    counting.add_argument("--precision", choices=("f32", "f64"), help="accepted for every verb; counts are exact integers")
    return parser


def load_config(args):
    cfg = parse_config(args.config) if args.config else default_config()
    overrides = {}
    if args.seeds:
        overrides["experiment.seeds"] = tuple(args.seeds)
    if args.format:
        overrides["experiment.format"] = args.format
    if args.precision:
        overrides["experiment.precision"] = args.precision
    return cfg.override(overrides) if overrides else cfg


def output_path(args, cfg):
    if args.out:
        return Path(args.out)
    if cfg["experiment.output"]:
        return Path(cfg["experiment.output"])
    return Path(settings.RESULTS_DIR) / f"{cfg.name}-{args.command}.{cfg['experiment.format']}"


def emit(records, args, cfg, study):
    if not records:
        print("\n❌ No results to write")
        return None
    summary = summarize(records)
    path = emit_results(records, output_path(args, cfg), cfg["experiment.format"])
    summary_path = write_summary(summary, path)
    print(f"\n📊 {len(records)} records -> {path}")
    print(f"📊 summary -> {summary_path}")
    write_records(records, study)
    return summary


# ---------------- verbs ----------------
def cmd_train(args):
    cfg = load_config(args)
    runs = [(cfg, cfg.name)]
    if args.ranks:
        runs = [(cfg.override({"adapter.rank": r}), f"r={r}") for r in args.ranks]

    records, failures = [], 0
    for run_cfg, label in runs:
        print(f"\n🚀 {label} ({run_cfg.config_hash}), seeds {list(run_cfg.seeds)}")
        started = time.time()
        try:
            run = run_experiment(run_cfg, label=label, study="train")
        except PeftForgeError as exc:
            logger.debug("run %s failed", label, exc_info=True)
            print(f"     ❌ {label}: {exc}")
            failures += 1
            continue
        records.extend(run)
        print(f"     ✅ Done in {time.time() - started:.1f}s")

    summary = emit(records, args, cfg, "train")
    if summary is not None:
        print("\n" + format_summary(summary))
    return EXIT_FAILED if failures or not records else EXIT_OK


def cmd_eval(args):
    cfg = load_config(args)
    print(f"\n🚀 evaluating {args.checkpoint}")
    record = evaluate_checkpoint(cfg, args.checkpoint)
    print(f"     ✅ val {100 * record.val_acc:.2f}%  test {100 * record.test_acc:.2f}%  ({record.params:,} params)")
    emit([record], args, cfg, "eval")
    return EXIT_OK


def cmd_study(args):
    cfg = load_config(args)
    result = STUDIES[args.command](cfg)
    emit(result.records, args, cfg, result.study)
    if result.failures:
        print(f"\n❌ {len(result.failures)} row(s) failed: {', '.join(label for label, _ in result.failures)}")
        return EXIT_FAILED
    return EXIT_OK


def param_report(backbone, cfg=None):
    """Average trainable parameters over the VTAB tasks, each with its own classifier."""
    rows = []

    def add(method, count):
        rows.append({"method": method, "params": count, "params_m": round(count / 1e6, 2)})

    for rank in COUNT_RANKS:
        add(f"adapter-plus r={rank}", average_trainable_params(backbone, preset_config("adapter-plus", rank), VTAB_TASKS))
    for name, rank in COUNT_PRESETS:
        add(f"{name} r={rank}", average_trainable_params(backbone, preset_config(name, rank), VTAB_TASKS))
    add("linear probing", average_trainable_params(backbone, None, VTAB_TASKS, mode="linear"))
    add("full fine-tuning", average_trainable_params(backbone, None, VTAB_TASKS, mode="full"))
    for table in OPTIMIZED_RANKS:
        add(f"adapter-plus {table}", optimized_rank_params(table, preset_config("adapter-plus"), backbone))
    if cfg is not None and cfg.train.mode == "adapter":
        add(f"configured ({cfg['adapter.preset']} r={cfg['adapter.rank']})",
            average_trainable_params(backbone, cfg.plan, VTAB_TASKS))
    return pd.DataFrame(rows, columns=["method", "params", "params_m"])


def cmd_count_params(args):
    cfg = parse_config(args.config) if args.config else None
    backbone = cfg.backbone if cfg is not None else BackboneConfig.vit_b16()
    print("=" * 70)
    print(f"📊 TRAINABLE PARAMETERS  d={backbone.hidden_dim}  N={backbone.num_layers}  (VTAB-average classifier)")
    print("=" * 70)
    report = param_report(backbone, cfg)
    print(report.to_string(index=False, formatters={"params": lambda v: f"{v:,.0f}"}))
    if args.out:
        fmt = args.format or (cfg["experiment.format"] if cfg is not None else "csv")
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            report.to_json(args.out, orient="records", indent=2)
        else:
            report.to_csv(args.out, index=False)
        print(f"\n📊 report -> {args.out}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "count-params": cmd_count_params,
    **{verb: cmd_study for verb in STUDIES},
}


def main(argv=None):
    settings.configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigParseError as exc:
        print(f"❌ config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PeftForgeError, OSError) as exc:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"❌ {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
