"""Inner adapter structure study at the post position.

Deltas are reported against the first row, the base adapter.
"""
from peft_forge.scenarios.common import ADAPTER_BASE, run_rows

STUDY = "structure"


def _row(label, bias=True, layernorm=False, scaling="none", init="houlsby"):
    return label, {
        **ADAPTER_BASE,
        "adapter.bias": bias,
        "adapter.layernorm": layernorm,
        "adapter.scaling": scaling,
        "adapter.init": init,
    }


ROWS = [
    _row("base"),
    _row("no bias", bias=False),
    _row("lora init", init="lora"),
    _row("bert init", init="bert"),
    _row("+LN", layernorm=True),
    _row("+LN +layer scale", layernorm=True, scaling="learned-layer"),
    _row("+layer scale", scaling="learned-layer"),
    _row("+LN +channel scale", layernorm=True, scaling="learned-channel"),
    _row("+channel scale", scaling="learned-channel"),
]


def run_structure_ablation(base_cfg):
    return run_rows(base_cfg, STUDY, ROWS, "INNER ADAPTER STRUCTURE")
