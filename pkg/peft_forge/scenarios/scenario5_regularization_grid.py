"""Backbone stochastic depth on/off against adapter drop-path, dropout or nothing."""
from peft_forge.scenarios.common import ADAPTER_BASE, run_rows

STUDY = "regularization"

DROP_RATE = 0.1

_BACKBONE = (("on", DROP_RATE), ("off", 0.0))
_ADAPTER = (
    ("drop-path", {"adapter.drop_path": DROP_RATE, "adapter.dropout": 0.0}),
    ("dropout", {"adapter.drop_path": 0.0, "adapter.dropout": DROP_RATE}),
    ("none", {"adapter.drop_path": 0.0, "adapter.dropout": 0.0}),
)

ROWS = [
    (f"backbone sd {bb} / adapter {name}", {**ADAPTER_BASE, "backbone.drop_path_max": rate, **adapter})
    for bb, rate in _BACKBONE
    for name, adapter in _ADAPTER
]


def run_regularization_grid(base_cfg):
    return run_rows(base_cfg, STUDY, ROWS, "TRAINING REGULARIZATION")
