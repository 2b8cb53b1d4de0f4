"""Dual-input encoder/decoder segmentation network.

Two structurally identical encoders (image and doodle prompt) produce five
feature maps each; per-stage fusion combines them; a skip-connected decoder
upsamples back to input resolution and a 1x1 conv + sigmoid emits the
probability mask.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .autograd import Tensor, add, relu, sigmoid, ShapeError
from .layers import (Layer, DepthwiseConv3x3, PointwiseConv, BatchNorm,
                     SEBlock, concat_channels, max_pool_2x2, upsample_2x2)


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    """Architecture hyperparameters.

    Defaults are the desk-scale configuration (trains in minutes on a CPU);
    ``full_scale()`` is the full-size variant.
    """

    input_side: int = 64
    stage_filters: tuple[int, ...] = (8, 16, 32, 64, 128)
    se_reduction: int = 16
    use_depthwise: bool = True
    use_se: bool = True
    use_residual: bool = True
    fusion_mode: str = "concat"
    shared_encoder_weights: bool = False
    allow_nondoubling: bool = False

    def __post_init__(self):
        self.stage_filters = tuple(int(f) for f in self.stage_filters)
        self.validate()

    def validate(self) -> None:
        if self.input_side % 16 != 0 or self.input_side <= 0:
            raise ConfigError(f"input_side {self.input_side} must be a positive multiple of 16")
        if len(self.stage_filters) != 5 or any(f < 1 for f in self.stage_filters):
            raise ConfigError(f"stage_filters needs 5 positive entries, got {self.stage_filters}")
        if not self.allow_nondoubling:
            for a, b in zip(self.stage_filters, self.stage_filters[1:]):
                if b != 2 * a:
                    raise ConfigError(
                        f"stage_filters must double each stage ({self.stage_filters}); "
                        "set allow_nondoubling to override")
        if self.se_reduction < 1:
            raise ConfigError("se_reduction must be >= 1")
        if self.fusion_mode not in ("concat", "add"):
            raise ConfigError(f"unknown fusion_mode {self.fusion_mode!r}")

    @classmethod
    def full_scale(cls) -> "ModelConfig":
        return cls(input_side=256, stage_filters=(64, 128, 256, 512, 1024))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stage_filters"] = list(self.stage_filters)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["stage_filters"] = tuple(d["stage_filters"])
        return cls(**d)

    def fused_channels(self, stage: int) -> int:
        f = self.stage_filters[stage]
        return 2 * f if self.fusion_mode == "concat" else f


class DPRConvSEBlock(Layer):
    """Depthwise-pointwise residual conv block with squeeze-excitation gate.

    main: relu(bn(dw3x3(x))) -> relu(bn(pw -> f)) -> SE
    shortcut: bn(pw(x) -> f)
    out: relu(main + shortcut)

    Ablation switches swap the depthwise conv for a second pointwise conv,
    bypass the SE gate, or drop the shortcut (then the main path's own relu
    is the block output).
    """

    def __init__(self, cin: int, f: int, cfg: ModelConfig, rng: np.random.Generator):
        if cfg.use_depthwise:
            self.spatial = DepthwiseConv3x3(cin, rng)
        else:
            self.spatial = PointwiseConv(cin, cin, rng)
        self.bn_spatial = BatchNorm(cin)
        self.pw = PointwiseConv(cin, f, rng)
        self.bn_pw = BatchNorm(f)
        self.se: Optional[SEBlock] = SEBlock(f, cfg.se_reduction, rng) if cfg.use_se else None
        if cfg.use_residual:
            self.shortcut: Optional[PointwiseConv] = PointwiseConv(cin, f, rng)
            self.bn_shortcut: Optional[BatchNorm] = BatchNorm(f)
        else:
            self.shortcut = None
            self.bn_shortcut = None

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        h = relu(self.bn_spatial(self.spatial(x), training))
        h = relu(self.bn_pw(self.pw(h), training))
        if self.se is not None:
            h = self.se(h)
        if self.shortcut is not None:
            h = relu(add(h, self.bn_shortcut(self.shortcut(x), training)))
        return h


class Encoder(Layer):
    """Five DPRConvSE stages; stages 2-5 are preceded by 2x2 max pooling."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        cin = 1
        for i, f in enumerate(cfg.stage_filters):
            setattr(self, f"stage{i + 1}", DPRConvSEBlock(cin, f, cfg, rng))
            cin = f
        self.n_stages = len(cfg.stage_filters)

    def __call__(self, x: Tensor, training: bool = False) -> list[Tensor]:
        maps = []
        h = x
        for i in range(self.n_stages):
            if i > 0:
                h = max_pool_2x2(h)
            h = getattr(self, f"stage{i + 1}")(h, training)
            maps.append(h)
        return maps


class Decoder(Layer):
    """Skip-connected decoder: upsample, concat with the same-stage fusion,
    DPRConvSE with halving filters, then 1x1 conv + sigmoid."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        fs = cfg.stage_filters
        cin = cfg.fused_channels(4)
        for stage in (3, 2, 1, 0):
            cin = cin + cfg.fused_channels(stage)
            setattr(self, f"block{stage + 1}", DPRConvSEBlock(cin, fs[stage], cfg, rng))
            cin = fs[stage]
        self.head = PointwiseConv(fs[0], 1, rng)

    def __call__(self, fusions: list[Tensor], training: bool = False) -> Tensor:
        h = fusions[4]
        for stage in (3, 2, 1, 0):
            h = concat_channels(upsample_2x2(h), fusions[stage])
            h = getattr(self, f"block{stage + 1}")(h, training)
        return sigmoid(self.head(h))


class DoodleSegNet(Layer):
    """The full dual-input network. Built deterministically from (config, seed)."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        rng = np.random.default_rng(np.random.SeedSequence([0x5E6, seed]))
        if cfg.shared_encoder_weights:
            self.encoder = Encoder(cfg, rng)
        else:
            self.image_encoder = Encoder(cfg, rng)
            self.doodle_encoder = Encoder(cfg, rng)
        self.decoder = Decoder(cfg, rng)

    def _encoders(self) -> tuple[Encoder, Encoder]:
        if self.cfg.shared_encoder_weights:
            return self.encoder, self.encoder
        return self.image_encoder, self.doodle_encoder

    def encode(self, x: Tensor, which: str, training: bool = False) -> list[Tensor]:
        if which not in ("image", "doodle"):
            raise ValueError(f"unknown encoder {which!r}")
        self._check_input(x, which)
        img_enc, doo_enc = self._encoders()
        return (img_enc if which == "image" else doo_enc)(x, training)

    def fuse(self, img_map: Tensor, doo_map: Tensor) -> Tensor:
        if img_map.shape != doo_map.shape:
            raise ShapeError(f"fuse: shape mismatch {img_map.shape} vs {doo_map.shape}")
        if self.cfg.fusion_mode == "concat":
            return concat_channels(img_map, doo_map)
        return add(img_map, doo_map)

    def _check_input(self, x: Tensor, label: str) -> None:
        s = self.cfg.input_side
        if x.data.ndim != 4 or x.shape[1] != s or x.shape[2] != s or x.shape[3] != 1:
            raise ShapeError(f"{label} input must be N x {s} x {s} x 1, got {x.shape}")

    def forward(self, image: Tensor, doodle: Tensor, training: bool = False) -> Tensor:
        self._check_input(image, "image")
        self._check_input(doodle, "doodle")
        img_enc, doo_enc = self._encoders()
        img_maps = img_enc(image, training)
        doo_maps = doo_enc(doodle, training)
        fusions = [self.fuse(a, b) for a, b in zip(img_maps, doo_maps)]
        return self.decoder(fusions, training)

    __call__ = forward

    # -- state ---------------------------------------------------------------

    def state(self) -> dict[str, np.ndarray]:
        """Named parameters followed by named buffers, deterministic order."""
        out = {name: t.data for name, t in self.named_parameters()}
        for name, buf in self.named_buffers():
            out[name] = buf
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        own = self.state()
        if set(own) != set(state):
            missing = set(own) - set(state)
            extra = set(state) - set(own)
            raise KeyError(f"state mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, arr in state.items():
            dst = own[name]
            if dst.shape != arr.shape:
                raise ShapeError(f"state {name}: shape {arr.shape} != {dst.shape}")
            dst[...] = arr

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.state().items()}


def count_parameters(model: DoodleSegNet) -> int:
    """Total trainable parameter elements (batch-norm gamma/beta included,
    running statistics excluded)."""
    return sum(t.size for _, t in model.named_parameters())


def count_buffers(model: DoodleSegNet) -> int:
    return sum(b.size for _, b in model.named_buffers())
