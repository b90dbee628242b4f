import numpy as np
import pytest

from peft_forge import settings
from peft_forge.autodiff.rng import Rng
from peft_forge.autodiff.tensor import set_default_dtype
from peft_forge.experiment.config import default_config
from peft_forge.experiment.runner import ResultRecord, clear_caches
from peft_forge.vit.config import BackboneConfig
from peft_forge.vit.model import VisionTransformer


@pytest.fixture(autouse=True)
def _isolated_state(monkeypatch):
    monkeypatch.setattr(settings, "INFLUX_URL", None)
    yield
    set_default_dtype("f32")
    clear_caches()


@pytest.fixture
def tiny_backbone():
    return BackboneConfig(image_size=8, patch_size=4, hidden_dim=16, num_layers=2, num_heads=2,
                          ffn_expansion=2, drop_path_max=0.0)


@pytest.fixture
def grad_backbone():
    """Small enough for finite differences over every trainable coordinate."""
    return BackboneConfig(image_size=8, patch_size=4, hidden_dim=8, num_layers=2, num_heads=2,
                          ffn_expansion=2, drop_path_max=0.0)


def make_model(config, n_classes=3, seed=0, dtype=np.float64):
    return VisionTransformer(config, n_classes, Rng(seed), dtype=dtype)


def random_images(config, b, seed=0):
    return Rng(seed).child("images").uniform(0.0, 1.0, (b, 3, config.image_size, config.image_size))


@pytest.fixture
def tiny_cfg():
    """Two seeds of a seconds-long transfer run."""
    return default_config(
        "tiny",
        backbone__image_size=8,
        backbone__patch_size=4,
        backbone__hidden_dim=16,
        backbone__num_layers=2,
        backbone__num_heads=2,
        backbone__ffn_expansion=2,
        adapter__rank=4,
        data__classes=3,
        data__n_train=24,
        data__n_val=12,
        data__n_test=12,
        train__epochs=2,
        train__warmup_epochs=0,
        train__batch_size=8,
        experiment__pretrain_epochs=1,
        experiment__seeds="0,1",
        experiment__precision="f64",
    )


def make_record(**overrides):
    values = dict(
        config_hash="abc123def456",
        seed=0,
        label="post",
        position="post",
        rank=8,
        init="houlsby",
        scaling="learned-channel",
        norm=False,
        params=1234,
        val_acc=0.5,
        test_acc=0.25,
        seconds=1.5,
        epoch_losses=[1.0, 0.5],
    )
    values.update(overrides)
    return ResultRecord(**values)
