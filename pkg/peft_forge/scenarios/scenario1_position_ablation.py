"""Adapter position study: the base adapter before, inside, parallel to and after the FFN."""
from peft_forge.scenarios.common import ADAPTER_BASE, run_rows

STUDY = "position"

ROWS = [
    (position, {**ADAPTER_BASE, "adapter.position": position})
    for position in ("pre", "intermediate", "parallel", "post")
]


def run_position_ablation(base_cfg):
    return run_rows(base_cfg, STUDY, ROWS, "ADAPTER POSITION")
