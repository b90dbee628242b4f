"""CSV / JSON emission and mean +- std summaries of ResultRecords."""
import json
import logging
from pathlib import Path

import pandas as pd

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "config_hash", "seed", "position", "rank", "init", "scaling", "norm",
    "params", "val_acc", "test_acc", "seconds", "data_norm",
]
FORMATS = ("csv", "json")


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    return value


def _json_value(value):
    if isinstance(value, float):
        return float(f"{value:.6g}")
    if isinstance(value, list):
        return [_json_value(v) for v in value]
    return value


def records_frame(records):
    """Formatted CSV rows in the fixed column order."""
    rows = [{col: _fmt(getattr(r, col)) for col in CSV_COLUMNS} for r in records]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def emit_results(records, path, fmt="csv"):
    """Write ``records`` to ``path``; floats carry 6 significant digits."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown result format {fmt!r}, expected one of {FORMATS}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        records_frame(records).to_csv(path, index=False)
    else:
        payload = [{key: _json_value(value) for key, value in r.to_dict().items()} for r in records]
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    logger.info("wrote %d records to %s", len(records), path)
    return path


SUMMARY_COLUMNS = ["params", "n", "val_mean", "val_std", "test_mean", "test_std", "val_delta", "delta"]


def summarize(records, by="label"):
    """Mean and sample std (n-1) of val/test accuracy per ``by`` group, in first-seen order.

    ``val_delta`` and ``delta`` are each group's mean validation and test
    accuracy minus the first group's.
    """
    return summarize_frame(pd.DataFrame([r.to_dict() for r in records]), by=by)


def summarize_frame(frame, by="label"):
    """``summarize`` over a frame with ``params``, ``seed``, ``val_acc`` and ``test_acc`` columns."""
    if frame.empty:
        return pd.DataFrame(columns=[by] + SUMMARY_COLUMNS)
    order = list(dict.fromkeys(frame[by]))
    grouped = frame.groupby(by, sort=False)
    summary = pd.DataFrame({
        "params": grouped["params"].first(),
        "n": grouped["seed"].count(),
        "val_mean": grouped["val_acc"].mean() * 100.0,
        "val_std": grouped["val_acc"].std(ddof=1).fillna(0.0) * 100.0,
        "test_mean": grouped["test_acc"].mean() * 100.0,
        "test_std": grouped["test_acc"].std(ddof=1).fillna(0.0) * 100.0,
    }).reindex(order)
    summary["val_delta"] = summary["val_mean"] - summary["val_mean"].iloc[0]
    summary["delta"] = summary["test_mean"] - summary["test_mean"].iloc[0]
    return summary.reset_index().rename(columns={"index": by})


def format_summary(summary):
    """Console table: accuracy in % as mean +- std, parameters in millions."""
    if summary.empty:
        return "(no results)"
    label = summary.columns[0]
    table = pd.DataFrame({
        label: summary[label],
        "params (M)": summary["params"].map(lambda p: f"{p / 1e6:.4f}"),
        "val %": [f"{m:.2f} ± {s:.2f}" for m, s in zip(summary["val_mean"], summary["val_std"])],
        "test %": [f"{m:.2f} ± {s:.2f}" for m, s in zip(summary["test_mean"], summary["test_std"])],
        "Δ val": summary["val_delta"].map(lambda d: f"{d:+.2f}"),
        "Δ test": summary["delta"].map(lambda d: f"{d:+.2f}"),
    })
    return table.to_string(index=False)


def write_summary(summary, out_path):
    """``<out>.summary.csv`` next to the raw records."""
    out_path = Path(out_path)
    target = out_path.with_name(out_path.name + ".summary.csv")
    summary.to_csv(target, index=False, float_format="%.6g")
    return target
