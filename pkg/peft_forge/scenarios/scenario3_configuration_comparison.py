"""Published adapter configurations against Adapter+."""
from peft_forge.scenarios.common import run_rows

STUDY = "configs"

ROWS = [
    (f"{preset} r={rank}", {"train.mode": "adapter", "adapter.preset": preset, "adapter.rank": rank})
    for preset, rank in (
        ("houlsby", 8),
        ("houlsby", 4),
        ("pfeiffer", 8),
        ("adaptformer", 8),
        ("adapter-plus", 8),
    )
]


def run_configuration_comparison(base_cfg):
    return run_rows(base_cfg, STUDY, ROWS, "ADAPTER CONFIGURATIONS")
