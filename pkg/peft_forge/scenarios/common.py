"""Shared row driver for the ablation studies."""
import logging
import time
from dataclasses import dataclass, field

from peft_forge.errors import PeftForgeError
from peft_forge.experiment.results import format_summary, summarize
from peft_forge.experiment.runner import run_experiment

logger = logging.getLogger(__name__)

# bias on, no LN, no scaling, Houlsby init
ADAPTER_BASE = {
    "train.mode": "adapter",
    "adapter.preset": "custom",
    "adapter.rank": 8,
    "adapter.bias": True,
    "adapter.layernorm": False,
    "adapter.scaling": "none",
    "adapter.init": "houlsby",
    "adapter.position": "post",
}


@dataclass
class StudyResult:
    study: str
    records: list = field(default_factory=list)
    summary: object = None
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures


def banner(title):
    print("\n" + "=" * 70)
    print(f"🚀 {title}")
    print("=" * 70)


def run_rows(base_cfg, study, rows, title):
    """Run every ``(label, overrides)`` row over the base config's seeds.

    A failing row is reported and skipped; the remaining rows still run.
    """
    banner(title)
    result = StudyResult(study)
    for i, (label, overrides) in enumerate(rows, 1):
        print(f"\n📍 {i}/{len(rows)} {label}")
        started = time.time()
        try:
            cfg = base_cfg.override(overrides)
            records = run_experiment(cfg, label=label, study=study)
        except PeftForgeError as exc:
            logger.debug("row %s failed", label, exc_info=True)
            print(f"     ❌ {label}: {exc}")
            result.failures.append((label, str(exc)))
            continue
        result.records.extend(records)
        mean_test = 100.0 * sum(r.test_acc for r in records) / len(records)
        print(f"     ✅ Done in {time.time() - started:.1f}s (test {mean_test:.2f}%, {records[0].params:,} params)")

    result.summary = summarize(result.records)
    print("\n" + format_summary(result.summary))
    return result
