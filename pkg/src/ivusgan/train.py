"""Deterministic alternating adversarial training.

Per batch: ``d_steps_per_g`` discriminator updates on (condition, target)
vs (condition, detached fake), each minimizing ``0.5 * d_loss`` (the real
and fake terms averaged rather than summed, which halves the effective
discriminator rate), then one generator update minimizing the combined
adversarial + reconstruction loss.  Everything stochastic (init, shuffling,
dropout noise) is keyed off ``TrainConfig.seed``, so (configs, dataset,
seed) determine the History and the final checkpoint bit-for-bit.

Validation runs on the val split at the configured cadence using batch
statistics in BatchNorm when the split has >= 2 samples (running statistics
otherwise); epochs without a validation carry the last evaluated metrics
forward in the history CSV.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .losses import LossWeights, combined_g_loss_parts, d_loss
from .metrics import Calibration, MetricsRecord, aggregate, evaluate_sample
from .nets import (
    DiscriminatorConfig,
    GeneratorConfig,
    Network,
    build_discriminator,
    build_generator,
    config_from_dict,
    forward_discriminator,
    forward_generator,
)
from .rng import Rng
from .segment import predict_labels
from .serialize import SerializationError, read_checkpoint, write_checkpoint
from .tensor import Tensor, backward


class TrainingDivergedError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 4
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    d_steps_per_g: int = 1
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    eval_every: int = 1
    checkpoint_path: str | None = None

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.d_steps_per_g < 1:
            raise ValueError(f"d_steps_per_g must be >= 1, got {self.d_steps_per_g}")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")
        self.weights.validate()


class Adam:
    """Adam with bias correction; update in float64, applied in param dtype.

    p -= lr * mhat / (sqrt(vhat) + eps)  with  mhat = m/(1-beta1^t),
    vhat = v/(1-beta2^t).  Parameters whose grad is None are skipped.
    """

    def __init__(self, params, lr=2e-4, beta1=0.5, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros(p.shape, dtype=np.float64) for p in self.params]
        self.v = [np.zeros(p.shape, dtype=np.float64) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad.astype(np.float64)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data = (p.data.astype(np.float64) - update).astype(p.data.dtype)


@dataclass
class EpochRecord:
    epoch: int
    d_loss: float
    g_adv: float
    g_rec: float
    val: MetricsRecord = field(default_factory=MetricsRecord)


HISTORY_COLUMNS = ("epoch", "d_loss", "g_adv", "g_rec") + tuple(MetricsRecord.FIELDS)


@dataclass
class TrainResult:
    generator: Network
    discriminator: Network
    history: list


def _stack_batch(samples):
    u = np.stack([s.condition_image.data for s in samples])
    v = np.stack([s.target_image.data for s in samples])
    return Tensor(u), Tensor(v)


def _check_finite(value: float, what: str, epoch: int, batch: int, step: int):
    if not math.isfinite(value):
        raise TrainingDivergedError(
            f"non-finite {what} at epoch {epoch}, batch {batch}, global step {step}"
        )


def validate_generator(gen: Network, val_samples, rng: Rng, cal: Calibration | None = None) -> MetricsRecord:
    """Mean validation metrics of the generator on a sample list."""
    if not val_samples:
        return MetricsRecord()
    u, _ = _stack_batch(val_samples)
    mode = "eval_batch" if len(val_samples) >= 2 else "eval"
    pred, _ = forward_generator(gen, u, rng, mode=mode)
    records = []
    for i, sample in enumerate(val_samples):
        labels = predict_labels(pred.data[i])
        records.append(evaluate_sample(labels, sample, cal))
    return aggregate(records).mean


def train(gen_cfg: GeneratorConfig, disc_cfg: DiscriminatorConfig, train_cfg: TrainConfig,
          dataset, initial=None, progress=None) -> TrainResult:
    """Run the alternating loop; returns nets and per-epoch history.

    ``initial``: optional (generator, discriminator) pair to resume from.
    ``progress``: optional callback(EpochRecord) invoked per epoch.
    """
    gen_cfg.validate()
    disc_cfg.validate()
    train_cfg.validate()
    if not dataset.train:
        raise ValueError("dataset has no training samples")

    rng = Rng(train_cfg.seed)
    if initial is not None:
        gen, disc = initial
    else:
        gen = build_generator(gen_cfg, rng.split("init_g"))
        disc = build_discriminator(disc_cfg, rng.split("init_d"))
    adam_g = Adam(gen.parameters(), train_cfg.learning_rate, train_cfg.beta1,
                  train_cfg.beta2, train_cfg.eps)
    adam_d = Adam(disc.parameters(), train_cfg.learning_rate, train_cfg.beta1,
                  train_cfg.beta2, train_cfg.eps)
    w = train_cfg.weights

    history = []
    last_val = MetricsRecord()
    step = 0
    n = len(dataset.train)
    for epoch in range(1, train_cfg.epochs + 1):
        order = rng.split("order", epoch).permutation(n)
        d_vals, adv_vals, rec_vals = [], [], []
        for b0 in range(0, n, train_cfg.batch_size):
            batch_idx = order[b0 : b0 + train_cfg.batch_size]
            batch = [dataset.train[i] for i in batch_idx]
            u, v = _stack_batch(batch)
            bno = b0 // train_cfg.batch_size

            for j in range(train_cfg.d_steps_per_g):
                fake, _ = forward_generator(gen, u, rng.split("gfwd_d", step, j), mode="train")
                s_real = forward_discriminator(disc, u, v, mode="train")
                s_fake = forward_discriminator(disc, u, fake.detach(), mode="train")
                dl = d_loss(s_real, s_fake)
                _check_finite(dl.item(), "discriminator loss", epoch, bno, step)
                adam_d.zero_grad()
                backward(0.5 * dl)  # real/fake averaged, not summed
                adam_d.step()
                if j == 0:
                    d_vals.append(dl.item())

            fake, inters = forward_generator(gen, u, rng.split("gfwd_g", step), mode="train")
            s_fake = forward_discriminator(disc, u, fake, mode="train")
            total, adv, rec = combined_g_loss_parts(s_fake, v, fake, inters, w)
            _check_finite(total.item(), "generator loss", epoch, bno, step)
            adam_g.zero_grad()
            adam_d.zero_grad()  # generator backward also reaches D params
            backward(total)
            adam_g.step()
            adv_vals.append(adv.item() if adv is not None else 0.0)
            rec_vals.append(rec.item() if rec is not None else 0.0)
            step += 1

        if epoch % train_cfg.eval_every == 0 or epoch == train_cfg.epochs:
            last_val = validate_generator(gen, dataset.val, rng.split("val", epoch))
        record = EpochRecord(
            epoch=epoch,
            d_loss=float(np.mean(d_vals)),
            g_adv=float(np.mean(adv_vals)),
            g_rec=float(np.mean(rec_vals)),
            val=last_val,
        )
        history.append(record)
        if progress is not None:
            progress(record)

    if train_cfg.checkpoint_path:
        save_checkpoint(train_cfg.checkpoint_path, gen, disc)
    return TrainResult(gen, disc, history)


def history_to_csv(history, path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(HISTORY_COLUMNS) + "\n")
        for rec in history:
            vals = [str(rec.epoch), repr(rec.d_loss), repr(rec.g_adv), repr(rec.g_rec)]
            vals.extend(repr(v) for v in rec.val.values())
            fh.write(",".join(vals) + "\n")


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(path, generator: Network, discriminator: Network) -> None:
    config = {
        "generator": asdict(generator.config),
        "discriminator": asdict(discriminator.config),
    }
    arrays = [("gen." + n, a) for n, a in generator.state_arrays()]
    arrays += [("disc." + n, a) for n, a in discriminator.state_arrays()]
    parent = os.path.dirname(str(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
    write_checkpoint(path, config, arrays)


def _compare_config(kind: str, stored: dict, expected) -> None:
    exp = asdict(expected)
    for field_name, exp_val in exp.items():
        got = stored.get(field_name)
        if isinstance(exp_val, (list, tuple)):
            exp_val, got = list(exp_val), list(got) if got is not None else got
        if got != exp_val:
            raise CheckpointError(
                f"checkpoint {kind} config mismatch on field {field_name!r}: "
                f"stored {got!r}, expected {exp_val!r}"
            )


def load_checkpoint(path, gen_cfg: GeneratorConfig | None = None,
                    disc_cfg: DiscriminatorConfig | None = None):
    """Rebuild (generator, discriminator) from a checkpoint file.

    If expected configs are passed they are compared field-by-field against
    the stored echo; any difference raises CheckpointError naming the field.
    """
    try:
        config, arrays = read_checkpoint(path)
    except SerializationError as exc:
        raise CheckpointError(str(exc)) from exc
    if "generator" not in config or "discriminator" not in config:
        raise CheckpointError("checkpoint config echo lacks generator/discriminator sections")
    stored_gen = config["generator"]
    stored_disc = config["discriminator"]
    if gen_cfg is not None:
        _compare_config("generator", stored_gen, gen_cfg)
    if disc_cfg is not None:
        _compare_config("discriminator", stored_disc, disc_cfg)
    g_cfg = config_from_dict(GeneratorConfig, stored_gen)
    d_cfg = config_from_dict(DiscriminatorConfig, stored_disc)
    gen = build_generator(g_cfg, Rng(0))
    disc = build_discriminator(d_cfg, Rng(0))
    gen.load_state_arrays(
        {k[len("gen."):]: v for k, v in arrays.items() if k.startswith("gen.")}
    )
    disc.load_state_arrays(
        {k[len("disc."):]: v for k, v in arrays.items() if k.startswith("disc.")}
    )
    return gen, disc
