"""Transfer under Inception vs ImageNet input normalization.

The backbone is always pretrained with Inception normalization, so the
ImageNet row measures the cost of a mismatched preprocessing.
"""
from peft_forge.scenarios.common import run_rows

STUDY = "normalization"

ROWS = [
    (name, {"data.pretrain_normalization": "inception", "data.normalization": name})
    for name in ("inception", "imagenet")
]


def run_normalization_study(base_cfg):
    return run_rows(base_cfg, STUDY, ROWS, "DATA NORMALIZATION")
