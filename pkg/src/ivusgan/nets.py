"""Generator variants and the conditional patch discriminator.

Four generator architectures over the autodiff core:

* ``unet`` -- strided-conv encoder, transposed-conv decoder, mirror-level
  skip concatenations, Tanh head.
* ``encoder_decoder`` -- the same minus the skips.
* ``hourglass`` -- ``n_stacks`` symmetric down/up modules with additive
  skips at every resolution; each stack emits a 3-channel prediction
  (exposed for intermediate supervision), features chain between stacks.
* ``hourglass_reinject`` -- additionally feeds each stack's prediction
  back into the next stack's features through a 3x3 conv.

Downsampling convs are 4x4 stride 2 pad 1 (exact halving); upsampling uses
the transposed version (exact doubling); hourglass mixing blocks are 3x3.
Encoder/down blocks are conv -> BN -> LeakyReLU(0.2); decoder/up blocks
are transposed conv -> BN -> Dropout (three innermost levels) -> ReLU.
BatchNorm is omitted wherever a block's output spatial area is one pixel
(such a channel cannot be normalized within a singleton batch); with the
default depth of log2(image_size) this affects exactly the bottleneck.

The discriminator conditions on the input image: it sees the channel
concatenation of condition and candidate segmentation image, applies
``n_down`` strided conv blocks (no BN on the first) and a 3x3 single-channel
head with a sigmoid, yielding a grid of per-patch probabilities in (0, 1).

Weight init: convs ~ N(0, 0.02); BN gain ~ N(1, 0.02), shift 0.

Noise contract: in ``dropout`` noise mode the generator's dropout layers
stay active in every mode (they are the stochastic input); in ``channel``
mode a unit-Gaussian channel is concatenated to the condition image and
dropout follows the mode flag as usual.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .nn_ops import (
    batch_norm,
    conv2d,
    conv2d_transpose,
    dropout,
    leaky_relu,
    relu,
    sigmoid_act,
    tanh_act,
)
from .rng import Rng
from .tensor import ShapeError, Tensor, concat, add

WEIGHT_INIT_STD = 0.02
LEAKY_SLOPE = 0.2
GENERATOR_VARIANTS = ("unet", "encoder_decoder", "hourglass", "hourglass_reinject")
NETWORK_MODES = ("train", "eval", "eval_batch")


class ConfigError(ValueError):
    pass


@dataclass
class GeneratorConfig:
    variant: str = "unet"
    image_size: int = 64
    depth: int | None = None  # None: log2(image_size)
    base_channels: int = 16
    channel_cap_mult: int = 8
    dropout_p: float = 0.5
    noise_mode: str = "dropout"  # "dropout" | "channel"
    n_stacks: int = 2
    in_channels: int = 1
    out_channels: int = 3

    def resolved_depth(self) -> int:
        return self.depth if self.depth is not None else int(math.log2(self.image_size))

    def validate(self) -> None:
        if self.variant not in GENERATOR_VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}, expected one of {GENERATOR_VARIANTS}")
        if self.image_size < 4 or (self.image_size & (self.image_size - 1)) != 0:
            raise ConfigError(f"image_size must be a power of two >= 4, got {self.image_size}")
        d = self.resolved_depth()
        if d < 2:
            raise ConfigError(f"depth must be >= 2, got {d}")
        if 2 ** d > self.image_size:
            raise ConfigError(f"2^depth ({2 ** d}) exceeds image_size ({self.image_size})")
        if self.base_channels < 1 or self.channel_cap_mult < 1:
            raise ConfigError("base_channels and channel_cap_mult must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.noise_mode not in ("dropout", "channel"):
            raise ConfigError(f"noise_mode must be 'dropout' or 'channel', got {self.noise_mode!r}")
        if self.n_stacks < 1:
            raise ConfigError(f"n_stacks must be >= 1, got {self.n_stacks}")


@dataclass
class DiscriminatorConfig:
    image_size: int = 64
    n_down: int = 4
    base_channels: int = 16
    channel_cap_mult: int = 8
    cond_channels: int = 1
    cand_channels: int = 3

    @property
    def in_channels(self) -> int:
        return self.cond_channels + self.cand_channels

    def validate(self) -> None:
        if self.image_size < 4 or (self.image_size & (self.image_size - 1)) != 0:
            raise ConfigError(f"image_size must be a power of two >= 4, got {self.image_size}")
        if self.n_down < 1:
            raise ConfigError(f"n_down must be >= 1, got {self.n_down}")
        if self.image_size // (2 ** self.n_down) < 1:
            raise ConfigError(
                f"n_down={self.n_down} collapses a {self.image_size} image below 1x1"
            )
        if self.base_channels < 1 or self.channel_cap_mult < 1:
            raise ConfigError("base_channels and channel_cap_mult must be >= 1")


def config_from_dict(cls, d: dict):
    known = set(cls.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    cfg = cls(**d)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# layers

class Conv:
    def __init__(self, name, in_ch, out_ch, k, stride, pad, rng, dtype):
        self.name = name
        self.stride, self.pad = stride, pad
        w = rng.normal((out_ch, in_ch, k, k), std=WEIGHT_INIT_STD).astype(dtype)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_ch, dtype=dtype), requires_grad=True)

    def __call__(self, x):
        return conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.pad)

    def params(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]

    def buffers(self):
        return []


class ConvTranspose:
    def __init__(self, name, in_ch, out_ch, k, stride, pad, rng, dtype):
        self.name = name
        self.stride, self.pad = stride, pad
        w = rng.normal((in_ch, out_ch, k, k), std=WEIGHT_INIT_STD).astype(dtype)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_ch, dtype=dtype), requires_grad=True)

    def __call__(self, x):
        return conv2d_transpose(x, self.weight, self.bias, stride=self.stride, padding=self.pad)

    def params(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]

    def buffers(self):
        return []


class BatchNorm:
    def __init__(self, name, ch, rng, dtype, momentum=0.1, eps=1e-5):
        self.name = name
        self.momentum, self.eps = momentum, eps
        self.gamma = Tensor(rng.normal(ch, mean=1.0, std=WEIGHT_INIT_STD).astype(dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(ch, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(ch, dtype=dtype)
        self.running_var = np.ones(ch, dtype=dtype)

    def __call__(self, x, mode):
        if mode == "train":
            return batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                              mode="train", momentum=self.momentum, eps=self.eps)
        if mode == "eval_batch":
            n, _, h, w = x.shape
            if n * h * w >= 2:
                return batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                                  mode="train", momentum=self.momentum, eps=self.eps,
                                  update_running=False)
        return batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                          mode="eval", eps=self.eps)

    def params(self):
        return [(f"{self.name}.gamma", self.gamma), (f"{self.name}.beta", self.beta)]

    def buffers(self):
        return [(f"{self.name}.running_mean", self.running_mean),
                (f"{self.name}.running_var", self.running_var)]


class Network:
    """Ordered named parameters + buffers + a mode flag; built by the factories."""

    def __init__(self, kind: str, config):
        self.kind = kind
        self.config = config
        self.mode = "train"
        self._layers = []

    def _add(self, layer):
        self._layers.append(layer)
        return layer

    def set_mode(self, mode: str):
        if mode not in NETWORK_MODES:
            raise ValueError(f"mode must be one of {NETWORK_MODES}, got {mode!r}")
        self.mode = mode
        return self

    def named_parameters(self):
        out = []
        for layer in self._layers:
            out.extend(layer.params())
        names = [n for n, _ in out]
        assert len(names) == len(set(names)), "duplicate parameter names"
        return out

    def parameters(self):
        return [t for _, t in self.named_parameters()]

    def named_buffers(self):
        out = []
        for layer in self._layers:
            out.extend(layer.buffers())
        return out

    def state_arrays(self):
        """Named arrays for checkpointing: parameters then buffers."""
        out = [(n, t.data) for n, t in self.named_parameters()]
        out.extend(self.named_buffers())
        return out

    def load_state_arrays(self, arrays: dict, prefix: str = ""):
        expected = {prefix + n: t for n, t in self.named_parameters()}
        for n, buf in self.named_buffers():
            expected[prefix + n] = buf
        missing = set(expected) - set(arrays)
        extra = {a for a in arrays if a.startswith(prefix)} - set(expected)
        if missing or extra:
            raise ShapeError(
                f"state mismatch for {self.kind}: missing {sorted(missing)[:4]}, "
                f"unexpected {sorted(extra)[:4]}"
            )
        for name, target in expected.items():
            src = arrays[name]
            dst = target.data if isinstance(target, Tensor) else target
            if src.shape != dst.shape:
                raise ShapeError(f"{name}: stored shape {src.shape} != model shape {dst.shape}")
            if isinstance(target, Tensor):
                target.data = src.astype(dst.dtype, copy=True)
            else:
                target[...] = src.astype(dst.dtype)


def param_count(net: Network) -> int:
    """Total trainable parameter elements (buffers excluded)."""
    return sum(t.data.size for _, t in net.named_parameters())


def model_size_m(net_or_count) -> float:
    n = net_or_count if isinstance(net_or_count, int) else param_count(net_or_count)
    return n / 1e6


def _enc_channels(base: int, cap_mult: int, depth: int):
    return [min(base * (2 ** i), base * cap_mult) for i in range(depth)]


# ---------------------------------------------------------------------------
# generators

class _GeneratorBase(Network):
    def noise_channels(self) -> int:
        return 1 if self.config.noise_mode == "channel" else 0

    def _prepare_input(self, u: Tensor, rng: Rng) -> Tensor:
        cfg = self.config
        n, c, h, w = u.shape
        if c != cfg.in_channels or h != cfg.image_size or w != cfg.image_size:
            raise ShapeError(
                f"generator expects (N,{cfg.in_channels},{cfg.image_size},{cfg.image_size}), "
                f"got {u.shape}"
            )
        if cfg.noise_mode == "channel":
            noise = rng.split("noise_channel").normal((n, 1, h, w)).astype(u.dtype)
            return concat(u, Tensor(noise), axis=1)
        return u

    def _dropout_active(self) -> bool:
        # dropout-as-noise stays on in eval; channel mode follows the flag
        return self.config.noise_mode == "dropout" or self.mode == "train"


class UNetGenerator(_GeneratorBase):
    def __init__(self, cfg: GeneratorConfig, rng: Rng, dtype):
        super().__init__("generator", cfg)
        d = cfg.resolved_depth()
        ch = _enc_channels(cfg.base_channels, cfg.channel_cap_mult, d)
        self.skip = cfg.variant == "unet"
        in_ch = cfg.in_channels + self.noise_channels()
        self.enc = []
        size = cfg.image_size
        prev = in_ch
        for i in range(d):
            size //= 2
            conv = self._add(Conv(f"enc{i}.conv", prev, ch[i], 4, 2, 1, rng.split("enc", i), dtype))
            bn = None
            if size * size > 1:
                bn = self._add(BatchNorm(f"enc{i}.bn", ch[i], rng.split("enc_bn", i), dtype))
            self.enc.append((conv, bn))
            prev = ch[i]
        self.dec = []
        for lvl in range(d - 1, 0, -1):
            in_c = ch[d - 1] if lvl == d - 1 else (2 * ch[lvl] if self.skip else ch[lvl])
            conv = self._add(
                ConvTranspose(f"dec{lvl}.conv", in_c, ch[lvl - 1], 4, 2, 1, rng.split("dec", lvl), dtype)
            )
            bn = self._add(BatchNorm(f"dec{lvl}.bn", ch[lvl - 1], rng.split("dec_bn", lvl), dtype))
            use_drop = lvl >= d - 3 and cfg.dropout_p > 0
            self.dec.append((lvl, conv, bn, use_drop))
        fin_in = (2 * ch[0] if self.skip else ch[0])
        self.final = self._add(
            ConvTranspose("final.conv", fin_in, cfg.out_channels, 4, 2, 1, rng.split("final"), dtype)
        )

    def forward(self, u: Tensor, rng: Rng):
        cfg = self.config
        x = self._prepare_input(u, rng)
        skips = []
        for conv, bn in self.enc:
            x = conv(x)
            if bn is not None:
                x = bn(x, self.mode)
            x = leaky_relu(x, LEAKY_SLOPE)
            skips.append(x)
        drop_active = self._dropout_active()
        for lvl, conv, bn, use_drop in self.dec:
            x = conv(x)
            x = bn(x, self.mode)
            if use_drop:
                x = dropout(x, cfg.dropout_p, rng.split("dropout", lvl), active=drop_active)
            x = relu(x)
            if self.skip:
                x = concat(x, skips[lvl - 1], axis=1)
        pred = tanh_act(self.final(x))
        return pred, []


class HourglassGenerator(_GeneratorBase):
    def __init__(self, cfg: GeneratorConfig, rng: Rng, dtype):
        super().__init__("generator", cfg)
        d = cfg.resolved_depth()
        f = min(4 * cfg.base_channels, cfg.channel_cap_mult * cfg.base_channels)
        self.features = f
        self.reinject = cfg.variant == "hourglass_reinject"
        in_ch = cfg.in_channels + self.noise_channels()
        self.stem_conv = self._add(Conv("stem.conv", in_ch, f, 3, 1, 1, rng.split("stem"), dtype))
        self.stem_bn = self._add(BatchNorm("stem.bn", f, rng.split("stem_bn"), dtype))
        self.stacks = []
        for k in range(cfg.n_stacks):
            r = rng.split("stack", k)
            downs, ups = [], []
            size = cfg.image_size
            for i in range(d):
                size //= 2
                conv = self._add(Conv(f"s{k}.down{i}.conv", f, f, 4, 2, 1, r.split("down", i), dtype))
                bn = None
                if size * size > 1:
                    bn = self._add(BatchNorm(f"s{k}.down{i}.bn", f, r.split("down_bn", i), dtype))
                downs.append((conv, bn))
            bconv = self._add(Conv(f"s{k}.bottom.conv", f, f, 3, 1, 1, r.split("bottom"), dtype))
            bbn = None
            if size * size > 1:
                bbn = self._add(BatchNorm(f"s{k}.bottom.bn", f, r.split("bottom_bn"), dtype))
            for i in range(d - 1, -1, -1):
                conv = self._add(
                    ConvTranspose(f"s{k}.up{i}.conv", f, f, 4, 2, 1, r.split("up", i), dtype)
                )
                bn = self._add(BatchNorm(f"s{k}.up{i}.bn", f, r.split("up_bn", i), dtype))
                use_drop = i >= d - 3 and cfg.dropout_p > 0
                ups.append((i, conv, bn, use_drop))
            head = self._add(Conv(f"s{k}.head", f, cfg.out_channels, 3, 1, 1, r.split("head"), dtype))
            rein = None
            if self.reinject and k < cfg.n_stacks - 1:
                rein = self._add(
                    Conv(f"s{k}.reinject", cfg.out_channels, f, 3, 1, 1, r.split("reinject"), dtype)
                )
            self.stacks.append({"downs": downs, "bottom": (bconv, bbn), "ups": ups,
                                "head": head, "reinject": rein})

    def forward(self, u: Tensor, rng: Rng):
        cfg = self.config
        x = self._prepare_input(u, rng)
        x = leaky_relu(self.stem_bn(self.stem_conv(x), self.mode), LEAKY_SLOPE)
        drop_active = self._dropout_active()
        preds = []
        for k, stack in enumerate(self.stacks):
            pres = []
            for conv, bn in stack["downs"]:
                pres.append(x)
                x = conv(x)
                if bn is not None:
                    x = bn(x, self.mode)
                x = leaky_relu(x, LEAKY_SLOPE)
            bconv, bbn = stack["bottom"]
            x = bconv(x)
            if bbn is not None:
                x = bbn(x, self.mode)
            x = leaky_relu(x, LEAKY_SLOPE)
            for i, conv, bn, use_drop in stack["ups"]:
                x = conv(x)
                x = bn(x, self.mode)
                if use_drop:
                    x = dropout(x, cfg.dropout_p, rng.split("dropout", k, i), active=drop_active)
                x = relu(x)
                x = add(x, pres[i])
            pred = tanh_act(stack["head"](x))
            preds.append(pred)
            if stack["reinject"] is not None:
                x = add(x, stack["reinject"](pred))
        return preds[-1], preds


class PatchDiscriminator(Network):
    def __init__(self, cfg: DiscriminatorConfig, rng: Rng, dtype):
        super().__init__("discriminator", cfg)
        ch = _enc_channels(cfg.base_channels, cfg.channel_cap_mult, cfg.n_down)
        self.blocks = []
        prev = cfg.in_channels
        size = cfg.image_size
        for i in range(cfg.n_down):
            size //= 2
            conv = self._add(Conv(f"d{i}.conv", prev, ch[i], 4, 2, 1, rng.split("disc", i), dtype))
            bn = None
            if i > 0 and size * size > 1:  # no BN on the first block
                bn = self._add(BatchNorm(f"d{i}.bn", ch[i], rng.split("disc_bn", i), dtype))
            self.blocks.append((conv, bn))
            prev = ch[i]
        self.head = self._add(Conv("head", prev, 1, 3, 1, 1, rng.split("disc_head"), dtype))

    def forward(self, u: Tensor, candidate: Tensor):
        cfg = self.config
        if u.shape[1] != cfg.cond_channels or candidate.shape[1] != cfg.cand_channels:
            raise ShapeError(
                f"discriminator expects condition {cfg.cond_channels} ch + candidate "
                f"{cfg.cand_channels} ch, got {u.shape} and {candidate.shape}"
            )
        x = concat(u, candidate, axis=1)
        for conv, bn in self.blocks:
            x = conv(x)
            if bn is not None:
                x = bn(x, self.mode)
            x = leaky_relu(x, LEAKY_SLOPE)
        return sigmoid_act(self.head(x))


def build_generator(cfg: GeneratorConfig, rng: Rng, dtype=np.float32) -> Network:
    cfg.validate()
    if cfg.variant in ("unet", "encoder_decoder"):
        return UNetGenerator(cfg, rng.split("generator"), dtype)
    return HourglassGenerator(cfg, rng.split("generator"), dtype)


def build_discriminator(cfg: DiscriminatorConfig, rng: Rng, dtype=np.float32) -> Network:
    cfg.validate()
    return PatchDiscriminator(cfg, rng.split("discriminator"), dtype)


def forward_generator(net: Network, u: Tensor, rng: Rng, mode: str | None = None):
    """Run the generator; returns (prediction, stack predictions).

    The second element lists every hourglass stack's prediction (the last
    one *is* the final prediction); it is empty for unet/encoder_decoder.
    """
    if mode is not None:
        net.set_mode(mode)
    return net.forward(u, rng)


def forward_discriminator(net: Network, u: Tensor, candidate: Tensor, mode: str | None = None) -> Tensor:
    if mode is not None:
        net.set_mode(mode)
    return net.forward(u, candidate)


# ---------------------------------------------------------------------------
# analytic parameter counts (closed forms per variant; pure arithmetic)

def _conv_params(in_ch, out_ch, k):
    return out_ch * in_ch * k * k + out_ch


def _bn_params(ch):
    return 2 * ch


def analytic_generator_params(cfg: GeneratorConfig) -> int:
    cfg.validate()
    d = cfg.resolved_depth()
    base, cap = cfg.base_channels, cfg.channel_cap_mult
    ch = _enc_channels(base, cap, d)
    in_ch = cfg.in_channels + (1 if cfg.noise_mode == "channel" else 0)
    bottleneck_is_1px = 2 ** d == cfg.image_size

    if cfg.variant in ("unet", "encoder_decoder"):
        skip = cfg.variant == "unet"
        total = 0
        prev = in_ch
        for i in range(d):
            total += _conv_params(prev, ch[i], 4)
            if not (i == d - 1 and bottleneck_is_1px):
                total += _bn_params(ch[i])
            prev = ch[i]
        for lvl in range(d - 1, 0, -1):
            in_c = ch[d - 1] if lvl == d - 1 else (2 * ch[lvl] if skip else ch[lvl])
            total += _conv_params(in_c, ch[lvl - 1], 4) + _bn_params(ch[lvl - 1])
        total += _conv_params(2 * ch[0] if skip else ch[0], cfg.out_channels, 4)
        return total

    f = min(4 * base, cap * base)
    total = _conv_params(in_ch, f, 3) + _bn_params(f)  # stem
    per_stack = 0
    per_stack += d * _conv_params(f, f, 4)  # downs
    per_stack += (d - 1 if bottleneck_is_1px else d) * _bn_params(f)
    per_stack += _conv_params(f, f, 3)  # bottom
    if not bottleneck_is_1px:
        per_stack += _bn_params(f)
    per_stack += d * (_conv_params(f, f, 4) + _bn_params(f))  # ups
    per_stack += _conv_params(f, cfg.out_channels, 3)  # head
    total += cfg.n_stacks * per_stack
    if cfg.variant == "hourglass_reinject":
        total += (cfg.n_stacks - 1) * _conv_params(cfg.out_channels, f, 3)
    return total


def analytic_discriminator_params(cfg: DiscriminatorConfig) -> int:
    cfg.validate()
    ch = _enc_channels(cfg.base_channels, cfg.channel_cap_mult, cfg.n_down)
    total = 0
    prev = cfg.in_channels
    size = cfg.image_size
    for i in range(cfg.n_down):
        size //= 2
        total += _conv_params(prev, ch[i], 4)
        if i > 0 and size * size > 1:
            total += _bn_params(ch[i])
        prev = ch[i]
    total += _conv_params(prev, 1, 3)
    return total


def generator_config_to_dict(cfg: GeneratorConfig) -> dict:
    return asdict(cfg)


def discriminator_config_to_dict(cfg: DiscriminatorConfig) -> dict:
    return asdict(cfg)
