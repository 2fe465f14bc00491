"""Declarative layer stacks, their shape chain, and the key=value text format."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Union

from degbench.tensor import conv_output_size

LOSSES = ("cross_entropy", "margin", "margin+reconstruction")


@dataclass(frozen=True)
class Conv:
    filters: int
    k: int
    stride: int = 1
    activation: str = "relu"
    padding: str = "valid"
    tag: str = ""
    kind = "conv"


@dataclass(frozen=True)
class MaxPool:
    k: int = 2
    kind = "maxpool"


@dataclass(frozen=True)
class Dense:
    units: int
    activation: str = "relu"
    tag: str = ""
    kind = "dense"


@dataclass(frozen=True)
class Dropout:
    rate: float
    kind = "dropout"


@dataclass(frozen=True)
class PrimaryCaps:
    types: int
    dim: int
    k: int
    stride: int
    kind = "primary_caps"


@dataclass(frozen=True)
class ClassCaps:
    classes: int
    dim: int = 16
    routing_iters: int = 3
    kind = "class_caps"


@dataclass(frozen=True)
class Ntt:
    filter_size: int
    shared: bool = False
    kind = "ntt"


@dataclass(frozen=True)
class Decoder:
    fc: tuple[int, ...]
    output_shape: tuple[int, int, int]
    kind = "decoder"


LayerSpec = Union[Conv, MaxPool, Dense, Dropout, PrimaryCaps, ClassCaps, Ntt, Decoder]
LAYER_TYPES = {cls.kind: cls for cls in (Conv, MaxPool, Dense, Dropout, PrimaryCaps, ClassCaps, Ntt, Decoder)}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]
    loss: str = "cross_entropy"
    recon_weight: float = 0.0
    name: str = "model"
    metadata: tuple[tuple[str, str], ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(_with_tags(self.layers)))
        validate(self)

    @property
    def has_ntt(self) -> bool:
        return any(isinstance(l, Ntt) for l in self.layers)

    @property
    def is_capsule(self) -> bool:
        return any(isinstance(l, ClassCaps) for l in self.layers)

    def conv_tags(self) -> list[str]:
        return [l.tag for l in self.layers if isinstance(l, Conv)]

    def last_conv_tag(self) -> str:
        tags = self.conv_tags()
        if not tags:
            raise ConfigError(f"model {self.name!r} has no conv layer")
        return tags[-1]


def _with_tags(layers):
    conv_i = dense_i = 0
    out = []
    for layer in layers:
        if isinstance(layer, Conv):
            conv_i += 1
            if not layer.tag:
                layer = replace(layer, tag=f"conv{conv_i}")
        elif isinstance(layer, Dense):
            dense_i += 1
            if not layer.tag:
                layer = replace(layer, tag=f"dense{dense_i}")
        out.append(layer)
    return out


def infer_shapes(cfg: ModelConfig) -> list[tuple[int, ...]]:
    """Per-layer output shape (batch axis omitted); decoder rows report the reconstruction."""
    shape: tuple[int, ...] = tuple(cfg.input_shape)
    shapes = []
    for i, layer in enumerate(cfg.layers):
        if isinstance(layer, Ntt):
            if shape[1] < 1:
                raise ConfigError("NTT layer needs a spatial input")
        elif isinstance(layer, Conv):
            if len(shape) != 3:
                raise ConfigError(f"layer {i} conv needs a (C,H,W) input, got {shape}")
            c, h, w = shape
            if layer.padding == "valid" and (layer.k > h or layer.k > w):
                raise ConfigError(f"layer {i} conv kernel {layer.k} larger than input {h}x{w}")
            shape = (layer.filters, conv_output_size(h, layer.k, layer.stride, layer.padding),
                     conv_output_size(w, layer.k, layer.stride, layer.padding))
        elif isinstance(layer, MaxPool):
            if len(shape) != 3 or shape[1] < layer.k or shape[2] < layer.k:
                raise ConfigError(f"layer {i} maxpool {layer.k} does not fit input {shape}")
            shape = (shape[0], shape[1] // layer.k, shape[2] // layer.k)
        elif isinstance(layer, Dense):
            n = 1
            for s in shape:
                n *= s
            shape = (layer.units,)
        elif isinstance(layer, Dropout):
            if not 0 <= layer.rate < 1:
                raise ConfigError(f"dropout rate must be in [0,1), got {layer.rate}")
        elif isinstance(layer, PrimaryCaps):
            if len(shape) != 3:
                raise ConfigError(f"primary capsules need a (C,H,W) input, got {shape}")
            _, h, w = shape
            if h < layer.k or w < layer.k:
                raise ConfigError(f"feature map {h}x{w} smaller than primary capsule kernel {layer.k}")
            ho = conv_output_size(h, layer.k, layer.stride, "valid")
            wo = conv_output_size(w, layer.k, layer.stride, "valid")
            shape = (layer.types * ho * wo, layer.dim)
        elif isinstance(layer, ClassCaps):
            if len(shape) != 2:
                raise ConfigError(f"class capsules need primary capsules below them, got {shape}")
            if layer.routing_iters < 1:
                raise ConfigError("routing iterations must be >= 1")
            shape = (layer.classes, layer.dim)
        elif isinstance(layer, Decoder):
            if len(shape) != 2:
                raise ConfigError("decoder must follow the class capsule layer")
            if tuple(layer.output_shape) != tuple(cfg.input_shape):
                raise ConfigError(f"decoder output {layer.output_shape} must equal input {cfg.input_shape}")
            shapes.append(tuple(layer.output_shape))
            continue
        else:
            raise ConfigError(f"unknown layer spec {layer!r}")
        shapes.append(shape)
    return shapes


def validate(cfg: ModelConfig) -> None:
    if cfg.loss not in LOSSES:
        raise ConfigError(f"loss must be one of {LOSSES}, got {cfg.loss!r}")
    if len(cfg.input_shape) != 3:
        raise ConfigError(f"input shape must be (C,H,W), got {cfg.input_shape}")
    ntt_pos = [i for i, l in enumerate(cfg.layers) if isinstance(l, Ntt)]
    if len(ntt_pos) > 1:
        raise ConfigError("at most one NTT layer is allowed")
    if ntt_pos and ntt_pos[0] != 0:
        raise ConfigError("the NTT layer must be the first layer")
    decoders = [i for i, l in enumerate(cfg.layers) if isinstance(l, Decoder)]
    if decoders and decoders[0] != len(cfg.layers) - 1:
        raise ConfigError("the decoder must be the last layer")
    if cfg.loss == "margin+reconstruction" and not decoders:
        raise ConfigError("reconstruction loss needs a decoder layer")
    if cfg.loss.startswith("margin") and not cfg.is_capsule:
        raise ConfigError("margin loss needs a class capsule layer")
    if cfg.loss == "cross_entropy" and cfg.is_capsule:
        raise ConfigError("capsule models are trained with the margin loss")
    infer_shapes(cfg)


# ---------------------------------------------------------------- text form

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v) if v else "-"
    return str(v)


def _shape_str(shape) -> str:
    return "x".join(str(s) for s in shape)


def dumps(cfg: ModelConfig) -> str:
    lines = [
        f"name={cfg.name}",
        f"input={_shape_str(cfg.input_shape)}",
        f"loss={cfg.loss}",
        f"recon_weight={cfg.recon_weight!r}",
    ]
    for key, value in cfg.metadata:
        lines.append(f"meta.{key}={value}")
    for layer in cfg.layers:
        parts = [f"layer={layer.kind}"]
        for f in fields(layer):
            v = getattr(layer, f.name)
            parts.append(f"{f.name}={_shape_str(v) if f.name == 'output_shape' else _fmt(v)}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def _parse_value(cls, name: str, raw: str):
    ann = {f.name: f.type for f in fields(cls)}[name]
    if name == "output_shape":
        return tuple(int(x) for x in raw.split("x"))
    if "tuple" in str(ann):
        return () if raw == "-" else tuple(int(x) for x in raw.split(","))
    if ann in (int, "int"):
        return int(raw)
    if ann in (float, "float"):
        return float(raw)
    if ann in (bool, "bool"):
        return raw == "true"
    return raw


def loads(text: str) -> ModelConfig:
    head: dict[str, str] = {}
    meta = []
    layers = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("layer="):
            tokens = dict(tok.split("=", 1) for tok in line.split())
            kind = tokens.pop("layer")
            if kind not in LAYER_TYPES:
                raise ConfigError(f"line {lineno}: unknown layer kind {kind!r}")
            cls = LAYER_TYPES[kind]
            kwargs = {k: _parse_value(cls, k, v) for k, v in tokens.items()}
            layers.append(cls(**kwargs))
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        if key.startswith("meta."):
            meta.append((key[5:], value))
        else:
            head[key] = value
    try:
        return ModelConfig(
            input_shape=tuple(int(x) for x in head["input"].split("x")),
            layers=tuple(layers),
            loss=head.get("loss", "cross_entropy"),
            recon_weight=float(head.get("recon_weight", 0.0)),
            name=head.get("name", "model"),
            metadata=tuple(meta),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from None
