"""Adversarial segmentation of synthetic intravascular ultrasound phantoms.

The package is a small numpy/scipy stack: a tape-based autodiff core
(:mod:`ivusgan.tensor`, :mod:`ivusgan.nn_ops`), a deterministic phantom
image generator (:mod:`ivusgan.phantom`), encoder-decoder / hourglass
generators with a patch discriminator (:mod:`ivusgan.nets`), hybrid
adversarial + reconstruction losses (:mod:`ivusgan.losses`), an alternating
training loop (:mod:`ivusgan.train`), contour extraction
(:mod:`ivusgan.segment`), region/contour metrics (:mod:`ivusgan.metrics`)
and an experiment harness with a CLI (:mod:`ivusgan.harness`,
``ivusgan --help``).
"""

__version__ = "0.1.0"

from .losses import LossWeights, combined_g_loss, d_loss, g_adv_loss, l1_loss, l2_loss
from .metrics import (
    Calibration,
    MetricsRecord,
    aggregate,
    avg_distance,
    evaluate_sample,
    hausdorff,
    jaccard,
    pad,
)
from .nets import (
    DiscriminatorConfig,
    GeneratorConfig,
    build_discriminator,
    build_generator,
    forward_discriminator,
    forward_generator,
    param_count,
)
from .phantom import Dataset, PhantomSpec, Sample, generate_phantom, make_dataset, profile_line
from .augment import augment_dataset, rotate_sample, scale_sample
from .rng import Rng
from .segment import (
    binarize,
    cleanup,
    extract_contour,
    lu_ma_boundaries,
    predict_labels,
)
from .tensor import Tensor, backward
from .train import TrainConfig, load_checkpoint, save_checkpoint, train

__all__ = [
    "__version__",
    "Rng", "Tensor", "backward",
    "PhantomSpec", "Sample", "Dataset", "generate_phantom", "make_dataset", "profile_line",
    "rotate_sample", "scale_sample", "augment_dataset",
    "GeneratorConfig", "DiscriminatorConfig", "build_generator", "build_discriminator",
    "forward_generator", "forward_discriminator", "param_count",
    "LossWeights", "d_loss", "g_adv_loss", "l1_loss", "l2_loss", "combined_g_loss",
    "TrainConfig", "train", "save_checkpoint", "load_checkpoint",
    "predict_labels", "binarize", "cleanup", "extract_contour", "lu_ma_boundaries",
    "MetricsRecord", "Calibration", "jaccard", "pad", "hausdorff", "avg_distance",
    "evaluate_sample", "aggregate",
]
