import itertools

import numpy as np
import pytest

from conftest import make_model, random_images
from peft_forge.adapters.accounting import adapter_param_count
from peft_forge.adapters.attach import attach_adapters, detach_adapters
from peft_forge.adapters.config import INITS, SCALINGS, AdapterConfig, AdapterPlan
from peft_forge.adapters.module import adapter_forward, init_adapter
from peft_forge.adapters.positions import wire_position
from peft_forge.adapters.presets import ADAPTFORMER_SCALE, preset_config
from peft_forge.autodiff import ops
from peft_forge.autodiff.gradcheck import grad_check
from peft_forge.autodiff.rng import Rng
from peft_forge.autodiff.tensor import Tensor, zero_grads
from peft_forge.errors import ConfigurationError, ContractError
from peft_forge.training.config import TrainConfig
from peft_forge.training.loop import select_trainables
from peft_forge.training.optim import OptimizerState, adamw_step
from peft_forge.vit.config import BackboneConfig
from peft_forge.vit.layers import TransformerLayer, ffn_branch
from peft_forge.vit.model import freeze_backbone

D = 16
WIRED_POSITIONS = ("pre", "post", "parallel", "intermediate")


def _x(shape=(2, 5, D), seed=0):
    return Tensor(Rng(seed).normal(shape), dtype=np.float64)


# ---------------- config ----------------
def test_config_validation():
    with pytest.raises(ConfigurationError):
        AdapterConfig(position="sideways")
    with pytest.raises(ConfigurationError):
        AdapterConfig(init="xavier")
    with pytest.raises(ConfigurationError):
        AdapterConfig(scaling="quadratic")
    with pytest.raises(ConfigurationError):
        AdapterConfig(rank=0)
    with pytest.raises(ConfigurationError):
        AdapterPlan()
    assert AdapterConfig(scaling="channel").scaling == "learned-channel"
    assert AdapterConfig(scaling="layer").scaling == "learned-layer"


def test_plan_dict_round_trip():
    plan = preset_config("houlsby", rank=4)
    assert AdapterPlan.from_dict(plan.to_dict()) == plan


def test_presets():
    plus = preset_config("adapter-plus").ffn
    assert (plus.position, plus.scaling, plus.init, plus.use_layernorm, plus.use_bias) == \
        ("post", "learned-channel", "houlsby", False, True)

    houlsby = preset_config("houlsby")
    assert houlsby.attention is not None and houlsby.tune_backbone_norms
    assert houlsby.ffn.position == "intermediate"

    pfeiffer = preset_config("pfeiffer").ffn
    assert (pfeiffer.position, pfeiffer.init, pfeiffer.use_layernorm) == ("post", "bert", True)

    adaptformer = preset_config("adaptformer").ffn
    assert (adaptformer.position, adaptformer.scaling, adaptformer.init) == ("parallel", "fixed", "lora")
    assert adaptformer.scale_value == ADAPTFORMER_SCALE == 0.1

    with pytest.raises(ConfigurationError):
        preset_config("prompt-tuning")


# ---------------- module ----------------
@pytest.mark.parametrize("bias,layernorm,scaling", itertools.product((True, False), (True, False), SCALINGS))
def test_module_has_exactly_the_configured_parameters(bias, layernorm, scaling):
    config = AdapterConfig(rank=4, use_bias=bias, use_layernorm=layernorm, scaling=scaling)
    module = init_adapter(config, D, Rng(0), prefix="adapters.layers.0.ffn")
    assert module.numel == adapter_param_count(config, D)
    names = {p.name for p in module.parameters()}
    assert ("adapters.layers.0.ffn.down_b" in names) == bias
    assert ("adapters.layers.0.ffn.ln.gamma" in names) == layernorm
    assert ("adapters.layers.0.ffn.scale" in names) == scaling.startswith("learned")


def test_rank_above_hidden_size_is_rejected():
    with pytest.raises(ContractError):
        init_adapter(AdapterConfig(rank=D + 1), D, Rng(0))


def test_houlsby_init_bounds():
    module = init_adapter(AdapterConfig(rank=8, init="houlsby"), 768, Rng(1), dtype=np.float64)
    for p in (module.down_w, module.up_w):
        assert np.abs(p.tensor.data).max() <= 0.02
    np.testing.assert_array_equal(module.down_b.tensor.data, 0.0)
    np.testing.assert_array_equal(module.up_b.tensor.data, 0.0)


def test_lora_init_zero_up_projection():
    module = init_adapter(AdapterConfig(rank=8, init="lora"), 768, Rng(2), dtype=np.float64)
    np.testing.assert_array_equal(module.up_w.tensor.data, 0.0)
    np.testing.assert_array_equal(module.up_b.tensor.data, 0.0)
    bound = np.sqrt(1.0 / 768)
    assert np.abs(module.down_w.tensor.data).max() <= bound
    assert np.abs(module.down_b.tensor.data).max() <= bound
    assert np.any(module.down_b.tensor.data != 0.0)


def test_bert_init_std():
    module = init_adapter(AdapterConfig(rank=64, init="bert"), 768, Rng(3), dtype=np.float64)
    draws = np.concatenate([module.down_w.tensor.data.ravel(), module.up_w.tensor.data.ravel()])
    assert abs(draws.std() - 0.02) < 0.01 * 0.02


def test_zero_degenerate_init_keeps_norm_and_scale_at_one():
    config = AdapterConfig(rank=4, init="zero-degenerate", use_layernorm=True, scaling="learned-channel")
    module = init_adapter(config, D, Rng(4), dtype=np.float64)
    for p in (module.down_w, module.down_b, module.up_w, module.up_b, module.ln_beta):
        np.testing.assert_array_equal(p.tensor.data, 0.0)
    np.testing.assert_array_equal(module.ln_gamma.tensor.data, 1.0)
    np.testing.assert_array_equal(module.scale.tensor.data, 1.0)


def test_adapter_forward_matches_the_formula():
    from scipy.special import erf

    config = AdapterConfig(rank=4, use_layernorm=True, scaling="learned-channel", init="bert")
    module = init_adapter(config, D, Rng(5), dtype=np.float64)
    module.scale.tensor.data = Rng(6).uniform(0.5, 1.5, (D,))
    module.up_b.tensor.data = Rng(7).normal((D,))
    x = _x()
    out = adapter_forward(x, module).data

    mu = x.data.mean(-1, keepdims=True)
    var = x.data.var(-1, keepdims=True)
    h = (x.data - mu) / np.sqrt(var + 1e-6)
    z = h @ module.down_w.tensor.data + module.down_b.tensor.data
    g = z * 0.5 * (1.0 + erf(z / np.sqrt(2.0)))
    expected = (g @ module.up_w.tensor.data + module.up_b.tensor.data) * module.scale.tensor.data
    np.testing.assert_allclose(out, expected, rtol=1e-10, atol=1e-12)


def test_fixed_scaling_multiplies_by_the_constant():
    base = AdapterConfig(rank=4, init="bert")
    fixed = AdapterConfig(rank=4, init="bert", scaling="fixed", scale_value=0.1)
    module = init_adapter(base, D, Rng(8), dtype=np.float64)
    x = _x()
    np.testing.assert_allclose(adapter_forward(x, module, fixed).data, 0.1 * adapter_forward(x, module).data)


def _scaled_module(scaling, source=None):
    module = init_adapter(AdapterConfig(rank=4, init="bert", scaling=scaling), D, Rng(14), dtype=np.float64)
    if source is not None:
        for name in ("down_w", "down_b", "up_w", "up_b"):
            getattr(module, name).tensor.data = getattr(source, name).tensor.data.copy()
    return module


def test_layer_scale_equals_a_constant_channel_scale():
    layer = _scaled_module("learned-layer")
    channel = _scaled_module("learned-channel", source=layer)
    layer.scale.tensor.data = np.array([0.37])
    channel.scale.tensor.data = np.full(D, 0.37)
    x = _x(seed=15)
    np.testing.assert_array_equal(adapter_forward(x, layer).data, adapter_forward(x, channel).data)


def test_channel_scale_of_ones_equals_no_scaling():
    plain = _scaled_module("none")
    channel = _scaled_module("learned-channel", source=plain)
    x = _x(seed=16)
    np.testing.assert_array_equal(adapter_forward(x, channel).data, adapter_forward(x, plain).data)


# ---------------- positions ----------------
def _layer(seed=9, ffn_zero=False):
    config = BackboneConfig(image_size=8, patch_size=4, hidden_dim=D, num_layers=2, num_heads=2, drop_path_max=0.0)
    layer = TransformerLayer.build(config, 0, 0.0, Rng(seed), np.float64)
    if ffn_zero:
        layer.w2.tensor.data[:] = 0.0
        layer.b2.tensor.data[:] = 0.0
    return layer


@pytest.mark.parametrize("position", ["pre", "post", "parallel"])
def test_positions_collapse_to_the_adapter_when_the_ffn_is_zero(position):
    layer = _layer(ffn_zero=True)
    module = init_adapter(AdapterConfig(rank=4, init="bert"), D, Rng(10), dtype=np.float64)
    x = _x()
    out = wire_position(x, layer, module, position).data
    np.testing.assert_allclose(out, x.data + adapter_forward(x, module).data, atol=1e-12)


def test_intermediate_with_zero_ffn_adds_the_adapter_of_zero():
    layer = _layer(ffn_zero=True)
    module = init_adapter(AdapterConfig(rank=4, init="bert"), D, Rng(11), dtype=np.float64)
    x = _x()
    out = wire_position(x, layer, module, "intermediate").data
    a_zero = adapter_forward(Tensor(np.zeros_like(x.data)), module).data
    np.testing.assert_allclose(out, x.data + a_zero, atol=1e-12)


def test_intermediate_noskip_replaces_the_ffn_output():
    layer = _layer()
    module = init_adapter(AdapterConfig(rank=4, init="bert"), D, Rng(12), dtype=np.float64)
    x = _x()
    f = ffn_branch(x, layer)
    out = wire_position(x, layer, module, "intermediate-noskip").data
    np.testing.assert_allclose(out, x.data + adapter_forward(f, module).data, atol=1e-12)


def test_unknown_position_is_rejected():
    module = init_adapter(AdapterConfig(rank=4), D, Rng(13), dtype=np.float64)
    with pytest.raises(ConfigurationError):
        wire_position(_x(), _layer(), module, "sideways")


@pytest.mark.parametrize("position,scaling", itertools.product(WIRED_POSITIONS, SCALINGS))
def test_lora_init_leaves_logits_bit_identical(position, scaling):
    config = BackboneConfig.toy()
    frozen = freeze_backbone(make_model(config, n_classes=10, seed=1))
    images = random_images(config, 100, seed=2)
    before = frozen.forward(images).data

    adapted = frozen.clone()
    plan = AdapterPlan(ffn=AdapterConfig(rank=8, init="lora", position=position, scaling=scaling, scale_value=0.1))
    attach_adapters(adapted, plan, Rng(3))
    np.testing.assert_array_equal(adapted.forward(images).data, before)


def test_houlsby_preset_with_lora_init_is_identity_too(tiny_backbone):
    frozen = make_model(tiny_backbone)
    images = random_images(tiny_backbone, 4)
    site = AdapterConfig(rank=4, init="lora", position="intermediate")
    adapted = attach_adapters(frozen.clone(), AdapterPlan(ffn=site, attention=site), Rng(0))
    np.testing.assert_array_equal(adapted.forward(images).data, frozen.forward(images).data)


# ---------------- attach ----------------
def test_attach_names_and_detach(tiny_backbone):
    model = attach_adapters(make_model(tiny_backbone), preset_config("houlsby", rank=4), Rng(0))
    names = [p.name for p in model.adapter_parameters()]
    assert names[0] == "adapters.layers.0.attn.down_w"
    assert "adapters.layers.1.ffn.up_b" in names
    assert model.plan.name == "houlsby"
    detach_adapters(model)
    assert model.adapter_parameters() == [] and model.plan is None


# ---------------- gradients and zero-degeneracy ----------------
@pytest.mark.parametrize("position", WIRED_POSITIONS)
def test_full_adapted_model_gradients(position, grad_backbone):
    images = random_images(grad_backbone, 2, seed=4)
    labels = np.array([0, 2])
    for scaling, init in itertools.product(SCALINGS, ("houlsby", "bert", "lora")):
        model = freeze_backbone(make_model(grad_backbone, seed=5))
        plan = AdapterPlan(ffn=AdapterConfig(rank=2, init=init, position=position, scaling=scaling, scale_value=0.5))
        attach_adapters(model, plan, Rng(6))
        model.head_w.tensor.data = Rng(8).normal(model.head_w.tensor.shape)
        params = select_trainables(model, "adapter")
        tensors = [p.tensor for p in params]
        error = grad_check(lambda: ops.cross_entropy(model.forward(images), labels), tensors,
                           h=1e-5, max_coords=4, rng=Rng(7))
        assert error < 1e-4, (scaling, init, error)


def test_zero_degenerate_projections_never_receive_gradient(tiny_backbone):
    model = freeze_backbone(make_model(tiny_backbone))
    plan = AdapterPlan(ffn=AdapterConfig(rank=4, init="zero-degenerate", position="post"))
    attach_adapters(model, plan, Rng(0))
    params = select_trainables(model, "adapter")
    state = OptimizerState.create(params)
    images = random_images(tiny_backbone, 4)
    labels = np.array([0, 1, 2, 0])
    cfg = TrainConfig(total_epochs=2, warmup_epochs=0)

    for _ in range(2):
        ops.cross_entropy(model.forward(images), labels).backward()
        for i in model.adapters:
            site = model.adapters[i].ffn
            np.testing.assert_array_equal(site.down_w.tensor.grad, 0.0)
            np.testing.assert_array_equal(site.up_w.tensor.grad, 0.0)
        assert any(np.any(model.adapters[i].ffn.up_b.tensor.grad != 0.0) for i in model.adapters)
        adamw_step(params, None, state, 1e-3, cfg)
        zero_grads(p.tensor for p in params)

    for i in model.adapters:
        np.testing.assert_array_equal(model.adapters[i].ffn.down_w.tensor.data, 0.0)
        np.testing.assert_array_equal(model.adapters[i].ffn.up_w.tensor.data, 0.0)


@pytest.mark.parametrize("init", INITS)
def test_every_init_builds_a_trainable_plan(init, tiny_backbone):
    model = attach_adapters(make_model(tiny_backbone), AdapterPlan(ffn=AdapterConfig(rank=2, init=init)), Rng(0))
    assert len(select_trainables(model, "adapter")) == 2 * 4 + 2
