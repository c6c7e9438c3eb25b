"""Adversarial and reconstruction loss terms and their weighted combination.

The discriminator minimizes ``-mean(log S_real) - mean(log(1 - S_fake))``
(equivalently maximizes the usual two-term objective); the generator uses
the non-saturating form ``-mean(log S_fake)`` instead of the literal
``+log(1 - S_fake)`` -- same optimum, live gradients when the discriminator
wins early.  Expectations are arithmetic means over batch elements and
discriminator grid cells.  ``log`` is clamped (see tensor.LOG_EPS), so all
terms stay finite even at saturation.

Reconstruction is L1 (mean absolute), L2 (mean squared) or a convex blend.
``combined_g_loss`` is ``a * adversarial + b * reconstruction``; when stack
predictions are supplied (hourglass intermediate supervision) each one adds
reconstruction at weight ``b / n_stacks`` so the supervision mass does not
grow with the stack count.
"""

from __future__ import annotations

from dataclasses import dataclass

import ivusgan.tensor as T
from .tensor import ShapeError, Tensor

REC_MODES = ("L1", "L2", "L1plusL2")


class LossError(ValueError):
    pass


@dataclass
class LossWeights:
    """``a``: adversarial weight; ``b``: reconstruction weight (the swept beta)."""

    a: float = 1.0
    b: float = 100.0
    rec_mode: str = "L1"
    l1_share: float = 0.5  # only used by L1plusL2

    def validate(self) -> None:
        if self.a < 0 or self.b < 0:
            raise LossError(f"weights must be >= 0, got a={self.a}, b={self.b}")
        if self.a == 0 and self.b == 0:
            raise LossError("adversarial and reconstruction weights are both zero")
        if self.rec_mode not in REC_MODES:
            raise LossError(f"rec_mode must be one of {REC_MODES}, got {self.rec_mode!r}")
        if not 0.0 <= self.l1_share <= 1.0:
            raise LossError(f"l1_share must be in [0, 1], got {self.l1_share}")


def _check_grid(s: Tensor, name: str) -> None:
    if s.data.size == 0:
        raise LossError(f"{name}: empty probability grid")


def d_loss(s_real: Tensor, s_fake: Tensor) -> Tensor:
    """Discriminator objective: -mean(log S_real) - mean(log(1 - S_fake))."""
    _check_grid(s_real, "d_loss")
    _check_grid(s_fake, "d_loss")
    one = Tensor(1.0, dtype=s_fake.dtype)
    return -T.mean(T.log_(s_real)) - T.mean(T.log_(one - s_fake))


def g_adv_loss(s_fake: Tensor) -> Tensor:
    """Non-saturating generator objective: -mean(log S_fake)."""
    _check_grid(s_fake, "g_adv_loss")
    return -T.mean(T.log_(s_fake))


def l1_loss(v: Tensor, v_hat: Tensor) -> Tensor:
    if v.shape != v_hat.shape:
        raise ShapeError(f"l1_loss: shapes differ {v.shape} vs {v_hat.shape}")
    return T.mean(T.abs_(v - v_hat))


def l2_loss(v: Tensor, v_hat: Tensor) -> Tensor:
    if v.shape != v_hat.shape:
        raise ShapeError(f"l2_loss: shapes differ {v.shape} vs {v_hat.shape}")
    return T.mean(T.square_(v - v_hat))


def reconstruction_loss(v: Tensor, v_hat: Tensor, w: LossWeights) -> Tensor:
    if w.rec_mode == "L1":
        return l1_loss(v, v_hat)
    if w.rec_mode == "L2":
        return l2_loss(v, v_hat)
    return w.l1_share * l1_loss(v, v_hat) + (1.0 - w.l1_share) * l2_loss(v, v_hat)


def combined_g_loss_parts(s_fake, v, v_hat, intermediates, w: LossWeights):
    """(total, adversarial part, reconstruction part) as scalar Tensors.

    Parts are unweighted; total = a*adv + b*rec + sum_k (b/n)*rec(inter_k).
    Zero-weight terms are skipped entirely so the ablation identities hold
    exactly (a=0 -> total == b*rec; b=0 -> total == a*adv).
    """
    w.validate()
    adv = None
    rec = None
    total = None
    if w.a > 0:
        adv = g_adv_loss(s_fake)
        total = w.a * adv
    if w.b > 0:
        rec = reconstruction_loss(v, v_hat, w)
        term = w.b * rec
        total = term if total is None else total + term
        if intermediates:
            share = w.b / len(intermediates)
            for inter in intermediates:
                total = total + share * reconstruction_loss(v, inter, w)
    return total, adv, rec


def combined_g_loss(s_fake, v, v_hat, intermediates, w: LossWeights) -> Tensor:
    total, _, _ = combined_g_loss_parts(s_fake, v, v_hat, intermediates, w)
    return total
