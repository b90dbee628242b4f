"""
Summarises emitted result files and plots accuracy against trainable parameters.
Usage: python -m analyse.analyze_results results/*.csv [--plot params_vs_acc.png]
"""
import argparse
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from peft_forge.experiment.results import summarize_frame  # noqa: E402


def print_header(title):
    print("\n" + "=" * 80)
    print(f"  {title}")
    print("=" * 80)


def load_results(path):
    """One result file as a frame; the label comes from the JSON records or the row's config hash."""
    path = Path(path)
    if path.suffix == ".json":
        frame = pd.DataFrame(json.loads(path.read_text(encoding="utf-8")))
    else:
        frame = pd.read_csv(path)
    if "label" not in frame:
        frame["label"] = [f"{pos} r={rank} ({h[:6]})" for pos, rank, h in
                          zip(frame["position"], frame["rank"], frame["config_hash"])]
    frame["source"] = path.stem
    return frame


def summary_table(frame):
    """Per-label summary indexed by label, as the CLI writes it to <out>.summary.csv."""
    return summarize_frame(frame).set_index("label")


def plot_params_vs_accuracy(tables, out_path):
    fig, ax = plt.subplots(figsize=(8, 5))
    for name, table in tables.items():
        ax.errorbar(table["params"] / 1e6, table["test_mean"], yerr=table["test_std"],
                    fmt="o", capsize=3, label=name)
        for label, row in table.iterrows():
            ax.annotate(label, (row["params"] / 1e6, row["test_mean"]), fontsize=7,
                        xytext=(3, 3), textcoords="offset points")
    ax.set_xlabel("trainable parameters (M)")
    ax.set_ylabel("test accuracy (%)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("files", nargs="+")
    parser.add_argument("--plot", default="params_vs_accuracy.png")
    args = parser.parse_args(argv)

    tables = {}
    for path in args.files:
        if path.endswith(".summary.csv"):
            continue
        try:
            frame = load_results(path)
        except (OSError, ValueError, KeyError) as e:
            print(f"    ⚠️  Skipping {path}: {e}")
            continue
        table = summary_table(frame)
        tables[frame["source"].iloc[0]] = table
        print_header(f"📊 {path} ({len(frame)} records)")
        print(table.to_string(float_format=lambda v: f"{v:.2f}"))

    if not tables:
        print("\n❌ No readable result files")
        return 1
    plot_params_vs_accuracy(tables, args.plot)
    print(f"\n📈 Plot written to {args.plot}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
