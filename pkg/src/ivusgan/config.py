"""Plain-text run configuration: a documented TOML-style subset.

Grammar (one setting per line)::

    [section]            # section header
    key = value          # value: int, float, true/false, "string",
                         #        or [v1, v2, ...] of scalars
    # comment            # '#' starts a comment outside strings

Sections used by the CLI: ``[experiment]`` (name, seeds, out_dir),
``[dataset]`` (n_train/n_val/n_test), ``[phantom]`` (PhantomSpec fields),
``[generator]``, ``[discriminator]``, ``[train]`` (TrainConfig fields plus
the loss weights ``adv_weight``/``rec_weight``/``rec_mode``/``l1_share``)
and ``[augment]``.  Every key can be overridden on the command line with
``--set section.key=value`` (same value grammar); flags win over the file.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .losses import LossWeights
from .nets import DiscriminatorConfig, GeneratorConfig, config_from_dict
from .phantom import PhantomSpec, spec_from_dict
from .serialize import canonical_json
from .train import TrainConfig


class ConfigParseError(ValueError):
    pass


def _parse_scalar(tok: str, where: str):
    tok = tok.strip()
    if not tok:
        raise ConfigParseError(f"{where}: empty value")
    if tok.startswith('"'):
        if not (len(tok) >= 2 and tok.endswith('"')):
            raise ConfigParseError(f"{where}: unterminated string {tok!r}")
        return tok[1:-1]
    if tok == "true":
        return True
    if tok == "false":
        return False
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        raise ConfigParseError(f"{where}: cannot parse value {tok!r}") from None


def _strip_comment(line: str) -> str:
    out = []
    in_str = False
    for ch in line:
        if ch == '"':
            in_str = not in_str
        if ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        where = f"{source}:{lineno}"
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigParseError(f"{where}: malformed section header {raw.strip()!r}")
            name = line[1:-1].strip()
            if name in sections:
                raise ConfigParseError(f"{where}: duplicate section [{name}]")
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ConfigParseError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        if current is None:
            raise ConfigParseError(f"{where}: key outside any [section]")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if not key:
            raise ConfigParseError(f"{where}: missing key")
        if key in sections[current]:
            raise ConfigParseError(f"{where}: duplicate key {key!r} in [{current}]")
        if val.startswith("["):
            if not val.endswith("]"):
                raise ConfigParseError(f"{where}: unterminated array {val!r}")
            body = val[1:-1].strip()
            items = [] if not body else [
                _parse_scalar(tok, where) for tok in body.split(",")
            ]
            sections[current][key] = items
        else:
            sections[current][key] = _parse_scalar(val, where)
    return sections


def load_config_file(path) -> dict:
    with open(path) as fh:
        return parse_config_text(fh.read(), source=str(path))


def apply_overrides(sections: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings (the flag mirror of config keys)."""
    out = {k: dict(v) for k, v in sections.items()}
    for ov in overrides or []:
        if "=" not in ov:
            raise ConfigParseError(f"override {ov!r}: expected section.key=value")
        target, _, val = ov.partition("=")
        if "." not in target:
            raise ConfigParseError(f"override {ov!r}: key must be section.key")
        sec, _, key = target.strip().partition(".")
        val = val.strip()
        where = f"--set {ov}"
        if val.startswith("["):
            if not val.endswith("]"):
                raise ConfigParseError(f"{where}: unterminated array")
            body = val[1:-1].strip()
            parsed = [] if not body else [_parse_scalar(t, where) for t in body.split(",")]
        else:
            parsed = _parse_scalar(val, where)
        out.setdefault(sec, {})[key.strip()] = parsed
    return out


@dataclass
class AugmentConfig:
    enabled: bool = False
    n_rotations: int = 8
    scale_factors: list = field(default_factory=lambda: [0.9, 1.1])
    seed: int = 0


@dataclass
class RunConfig:
    """Everything one training run needs; built from config-file sections."""

    phantom: PhantomSpec
    n_train: int = 32
    n_val: int = 8
    n_test: int = 8
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    def to_jsonable(self) -> dict:
        from dataclasses import asdict

        d = asdict(self)
        d["phantom"]["lumen_radius_range"] = list(self.phantom.lumen_radius_range)
        d["phantom"]["plaque_thickness_range"] = list(self.phantom.plaque_thickness_range)
        return d

    def content_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_jsonable()).encode()).hexdigest()[:16]


_TRAIN_WEIGHT_KEYS = {"adv_weight": "a", "rec_weight": "b", "rec_mode": "rec_mode",
                      "l1_share": "l1_share"}


def run_config_from_sections(sections: dict) -> RunConfig:
    known = {"experiment", "dataset", "phantom", "generator", "discriminator",
             "train", "augment"}
    unknown = set(sections) - known
    if unknown:
        raise ConfigParseError(f"unknown config sections: {sorted(unknown)}")

    phantom = spec_from_dict(sections.get("phantom", {}))

    ds = dict(sections.get("dataset", {}))
    counts = {k: ds.pop(k, default) for k, default in
              (("n_train", 32), ("n_val", 8), ("n_test", 8))}
    if ds:
        raise ConfigParseError(f"unknown [dataset] keys: {sorted(ds)}")

    gen_d = dict(sections.get("generator", {}))
    gen_d.setdefault("image_size", phantom.image_size)
    generator = config_from_dict(GeneratorConfig, gen_d)
    if generator.image_size != phantom.image_size:
        raise ConfigParseError(
            f"generator.image_size ({generator.image_size}) != phantom.image_size "
            f"({phantom.image_size})"
        )

    disc_d = dict(sections.get("discriminator", {}))
    disc_d.setdefault("image_size", phantom.image_size)
    discriminator = config_from_dict(DiscriminatorConfig, disc_d)
    if discriminator.image_size != phantom.image_size:
        raise ConfigParseError(
            f"discriminator.image_size ({discriminator.image_size}) != phantom.image_size "
            f"({phantom.image_size})"
        )

    tr = dict(sections.get("train", {}))
    weights = LossWeights()
    for key, attr in _TRAIN_WEIGHT_KEYS.items():
        if key in tr:
            setattr(weights, attr, tr.pop(key))
    tr_known = set(TrainConfig.__dataclass_fields__) - {"weights"}
    unknown_tr = set(tr) - tr_known
    if unknown_tr:
        raise ConfigParseError(f"unknown [train] keys: {sorted(unknown_tr)}")
    train_cfg = TrainConfig(weights=weights, **tr)
    train_cfg.validate()

    aug = dict(sections.get("augment", {}))
    aug_known = set(AugmentConfig.__dataclass_fields__)
    unknown_aug = set(aug) - aug_known
    if unknown_aug:
        raise ConfigParseError(f"unknown [augment] keys: {sorted(unknown_aug)}")
    augment = AugmentConfig(**aug)

    return RunConfig(phantom=phantom, generator=generator, discriminator=discriminator,
                     train=train_cfg, augment=augment, **counts)


@dataclass
class ExperimentConfig:
    name: str
    run: RunConfig
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    out_dir: str = "runs/experiment"

    EXPERIMENTS = ("loss_ablation", "beta_sweep_l1", "beta_sweep_l2", "generator_comparison")

    def validate(self):
        if self.name not in self.EXPERIMENTS:
            raise ConfigParseError(
                f"unknown experiment {self.name!r}, expected one of {self.EXPERIMENTS}"
            )
        if not self.seeds:
            raise ConfigParseError("experiment needs at least one seed")


def experiment_config_from_sections(sections: dict) -> ExperimentConfig:
    exp = dict(sections.get("experiment", {}))
    name = exp.pop("name", None)
    if name is None:
        raise ConfigParseError("[experiment] section must set 'name'")
    seeds = exp.pop("seeds", [0, 1, 2])
    out_dir = exp.pop("out_dir", f"runs/{name}")
    if exp:
        raise ConfigParseError(f"unknown [experiment] keys: {sorted(exp)}")
    cfg = ExperimentConfig(name=name, run=run_config_from_sections(sections),
                           seeds=list(seeds), out_dir=str(out_dir))
    cfg.validate()
    return cfg
