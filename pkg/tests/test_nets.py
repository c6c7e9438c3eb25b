import numpy as np
import pytest

import ivusgan.tensor as T
from ivusgan.nets import (
    ConfigError,
    DiscriminatorConfig,
    GeneratorConfig,
    analytic_discriminator_params,
    analytic_generator_params,
    build_discriminator,
    build_generator,
    config_from_dict,
    forward_discriminator,
    forward_generator,
    param_count,
)
from ivusgan.rng import Rng
from ivusgan.tensor import Tensor, backward


def small_cfg(variant="unet", **kw):
    kw.setdefault("image_size", 8)
    kw.setdefault("depth", 2)
    kw.setdefault("base_channels", 2)
    return GeneratorConfig(variant=variant, **kw)


def rand_input(n, c, s, seed=0, dtype=np.float32):
    return Tensor(Rng(seed).normal((n, c, s, s)).astype(dtype))


def test_config_defaults_and_validation():
    cfg = GeneratorConfig()
    assert cfg.resolved_depth() == 6  # log2(64)
    cfg.validate()
    with pytest.raises(ConfigError, match="depth"):
        GeneratorConfig(depth=1).validate()
    with pytest.raises(ConfigError, match="2\\^depth"):
        GeneratorConfig(image_size=16, depth=5).validate()
    with pytest.raises(ConfigError, match="variant"):
        GeneratorConfig(variant="resnet").validate()
    with pytest.raises(ConfigError, match="n_stacks"):
        GeneratorConfig(variant="hourglass", n_stacks=0).validate()
    with pytest.raises(ConfigError, match="n_down"):
        DiscriminatorConfig(image_size=16, n_down=5).validate()
    with pytest.raises(ConfigError, match="unknown GeneratorConfig fields"):
        config_from_dict(GeneratorConfig, {"variance": "unet"})


def test_forward_shape_contract_small():
    cfg = GeneratorConfig(variant="unet", image_size=4, depth=2, base_channels=1)
    net = build_generator(cfg, Rng(0))
    u = rand_input(2, 1, 4)
    pred, inters = forward_generator(net, u, Rng(1), mode="train")
    assert pred.shape == (2, 3, 4, 4)
    assert inters == []


@pytest.mark.parametrize("variant", ["unet", "encoder_decoder", "hourglass", "hourglass_reinject"])
def test_forward_shape_all_variants(variant):
    cfg = small_cfg(variant)
    net = build_generator(cfg, Rng(3))
    pred, inters = forward_generator(net, rand_input(2, 1, 8), Rng(4), mode="train")
    assert pred.shape == (2, 3, 8, 8)
    if variant.startswith("hourglass"):
        assert len(inters) == cfg.n_stacks
        assert all(p.shape == (2, 3, 8, 8) for p in inters)
        assert inters[-1] is pred


def test_outputs_within_tanh_range():
    net = build_generator(small_cfg(), Rng(5))
    pred, _ = forward_generator(net, rand_input(2, 1, 8, seed=6), Rng(7), mode="train")
    assert np.all(pred.data > -1.0) and np.all(pred.data < 1.0)


def test_param_count_unet_matches_hand_computed():
    # image 8, depth 2, base 2 -> channels [2, 4], all BN present:
    #   enc0 conv 1->2 (34) + bn (4); enc1 conv 2->4 (132) + bn (8)
    #   dec1 convT 4->2 (130) + bn (4); final convT (2*2)->3 (195)
    net = build_generator(small_cfg("unet"), Rng(0))
    assert param_count(net) == 507
    assert analytic_generator_params(small_cfg("unet")) == 507


def test_param_count_encoder_decoder_matches_hand_computed():
    # same as unet but decoder inputs are not widened: final convT 2->3 (99)
    net = build_generator(small_cfg("encoder_decoder"), Rng(0))
    assert param_count(net) == 411
    assert analytic_generator_params(small_cfg("encoder_decoder")) == 411


def test_param_count_discriminator_matches_hand_computed():
    # 64px, n_down 4, base 16, in 4: convs 1040+8224+32832+131200,
    # bns 64+128+256 (none on first block), head 1153
    cfg = DiscriminatorConfig()
    net = build_discriminator(cfg, Rng(0))
    assert param_count(net) == 174897
    assert analytic_discriminator_params(cfg) == 174897


@pytest.mark.parametrize("variant", ["unet", "encoder_decoder", "hourglass", "hourglass_reinject"])
@pytest.mark.parametrize("depth,base", [(2, 2), (3, 4), (4, 3)])
def test_enumerated_count_equals_analytic(variant, depth, base):
    cfg = GeneratorConfig(variant=variant, image_size=16, depth=depth, base_channels=base)
    net = build_generator(cfg, Rng(1))
    assert param_count(net) == analytic_generator_params(cfg)
    # forward shape contract holds across the same grid (incl. batch 1)
    pred, _ = forward_generator(net, rand_input(1, 1, 16, seed=depth), Rng(2), mode="train")
    assert pred.shape == (1, 3, 16, 16)


def test_conv_layer_element_counting():
    # counting semantics: a 1->1 1x1 conv weight is a single element; a
    # 3->8 4x4 conv with bias holds 3*8*16 + 8 = 392 elements
    from ivusgan.nets import Conv

    tiny = Conv("t", 1, 1, 1, 1, 0, Rng(0), np.float32)
    assert tiny.weight.data.size == 1
    layer = Conv("c", 3, 8, 4, 1, 0, Rng(0), np.float32)
    assert sum(t.data.size for _, t in layer.params()) == 392


@pytest.mark.parametrize("depth,base", [(2, 2), (3, 4), (4, 3)])
def test_encoder_decoder_strictly_smaller_than_unet(depth, base):
    u = analytic_generator_params(GeneratorConfig("unet", 16, depth, base))
    e = analytic_generator_params(GeneratorConfig("encoder_decoder", 16, depth, base))
    assert e < u


def test_hourglass_reinject_adds_exactly_reinjection_convs():
    plain = GeneratorConfig("hourglass", 16, 3, 4, n_stacks=3)
    rein = GeneratorConfig("hourglass_reinject", 16, 3, 4, n_stacks=3)
    f = min(4 * 4, 8 * 4)
    reinject_params = (3 - 1) * (f * 3 * 9 + f)
    assert analytic_generator_params(rein) - analytic_generator_params(plain) == reinject_params
    assert param_count(build_generator(rein, Rng(2))) - param_count(
        build_generator(plain, Rng(2))
    ) == reinject_params


def test_parameter_names_unique_and_buffers_separate():
    net = build_generator(small_cfg("hourglass_reinject"), Rng(0))
    names = [n for n, _ in net.named_parameters()]
    assert len(names) == len(set(names))
    buf_names = [n for n, _ in net.named_buffers()]
    assert all("running" in n for n in buf_names)
    assert param_count(net) == sum(t.data.size for _, t in net.named_parameters())


def test_discriminator_grid_shape_and_range():
    cfg = DiscriminatorConfig(image_size=64, n_down=4)
    net = build_discriminator(cfg, Rng(6))
    u = rand_input(2, 1, 64, seed=1)
    cand = rand_input(2, 3, 64, seed=2)
    s = forward_discriminator(net, u, cand, mode="train")
    assert s.shape == (2, 1, 4, 4)
    assert np.all(s.data > 0.0) and np.all(s.data < 1.0)


def test_discriminator_zeroed_weights_give_half():
    net = build_discriminator(DiscriminatorConfig(image_size=16, n_down=2), Rng(7))
    for _, p in net.named_parameters():
        p.data[...] = 0.0
    s = forward_discriminator(net, rand_input(1, 1, 16, seed=3), rand_input(1, 3, 16, seed=4), mode="train")
    assert np.all(s.data == 0.5)


def test_bn_train_eval_agree_when_running_equals_batch():
    net = build_generator(small_cfg(), Rng(8))
    for layer in net._layers:
        if hasattr(layer, "momentum"):
            layer.momentum = 1.0  # one train pass copies batch stats into running
    u = rand_input(4, 1, 8, seed=9)
    forward_generator(net, u, Rng(10), mode="train")
    y_train, _ = forward_generator(net, u, Rng(10), mode="train")
    y_eval, _ = forward_generator(net, u, Rng(10), mode="eval")
    assert np.allclose(y_train.data, y_eval.data, atol=1e-6)


def test_dropout_noise_contract_in_eval_mode():
    net = build_generator(small_cfg(), Rng(11))
    u = rand_input(2, 1, 8, seed=12)
    a, _ = forward_generator(net, u, Rng(100), mode="eval")
    b, _ = forward_generator(net, u, Rng(100), mode="eval")
    c, _ = forward_generator(net, u, Rng(101), mode="eval")
    assert np.array_equal(a.data, b.data)  # identical rng: bitwise equal
    assert not np.array_equal(a.data, c.data)  # different rng: dropout noise differs


def test_channel_noise_mode():
    cfg = small_cfg(noise_mode="channel", dropout_p=0.0)
    net = build_generator(cfg, Rng(13))
    u = rand_input(2, 1, 8, seed=14)
    a, _ = forward_generator(net, u, Rng(200), mode="eval")
    b, _ = forward_generator(net, u, Rng(201), mode="eval")
    assert a.shape == (2, 3, 8, 8)
    assert not np.array_equal(a.data, b.data)  # noise channel differs
    # analytic count includes the extra input channel
    assert param_count(net) == analytic_generator_params(cfg)


@pytest.mark.parametrize("variant", ["unet", "encoder_decoder", "hourglass_reinject"])
def test_gradient_flows_to_every_parameter(variant):
    cfg = small_cfg(variant)
    touched = None
    for seed in range(5):
        net = build_generator(cfg, Rng(seed))
        u = rand_input(2, 1, 8, seed=20 + seed)
        pred, _ = forward_generator(net, u, Rng(30 + seed), mode="train")
        loss = T.mean(T.square_(pred - Tensor(np.zeros(pred.shape, dtype=np.float32))))
        backward(loss)
        nz = [
            (p.grad is not None and np.any(p.grad != 0))
            for _, p in net.named_parameters()
        ]
        touched = nz if touched is None else [a or b for a, b in zip(touched, nz)]
    assert all(touched), f"{variant}: {touched.count(False)} parameters never saw gradient"


def test_state_roundtrip_bitwise(tmp_path):
    from ivusgan.serialize import read_checkpoint, write_checkpoint

    net = build_generator(small_cfg("hourglass"), Rng(40))
    u = rand_input(2, 1, 8, seed=41)
    forward_generator(net, u, Rng(42), mode="train")  # move running stats off init
    state = dict(net.state_arrays())
    path = tmp_path / "state.ivck"
    write_checkpoint(path, {"kind": "generator"}, state)
    _, arrays = read_checkpoint(path)
    net2 = build_generator(small_cfg("hourglass"), Rng(99))  # different init
    net2.load_state_arrays(arrays)
    for (n1, a1), (n2, a2) in zip(net.state_arrays(), net2.state_arrays()):
        assert n1 == n2
        assert np.array_equal(a1, a2), n1
    y1, _ = forward_generator(net, u, Rng(50), mode="eval")
    y2, _ = forward_generator(net2, u, Rng(50), mode="eval")
    assert np.array_equal(y1.data, y2.data)
