"""Two ways to break an adapter: all-zero initialization and a missing skip connection."""
from peft_forge.scenarios.common import ADAPTER_BASE, run_rows

STUDY = "failure"

ROWS = [
    ("post / houlsby init", {**ADAPTER_BASE}),
    ("post / zero init", {**ADAPTER_BASE, "adapter.init": "zero-degenerate"}),
    ("intermediate", {**ADAPTER_BASE, "adapter.position": "intermediate"}),
    ("intermediate / no skip", {**ADAPTER_BASE, "adapter.position": "intermediate-noskip"}),
]


def run_failure_analysis(base_cfg):
    return run_rows(base_cfg, STUDY, ROWS, "ADAPTER FAILURE MODES")
