"""Executable network built from a :class:`ModelConfig`."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from degbench import tensor as T
from degbench.models.capsules import MarginLossParams, dynamic_routing, margin_loss, squash
from degbench.models.config import (
    ClassCaps, ConfigError, Conv, Decoder, Dense, Dropout, MaxPool, ModelConfig, Ntt, PrimaryCaps,
    infer_shapes,
)
from degbench.rng import Prng
from degbench.tensor import Tensor

INIT_STREAM = 0x1417


def _prod(shape) -> int:
    n = 1
    for s in shape:
        n *= int(s)
    return n


def parameter_shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...], bool]]:
    """(name, shape, trainable) for every parameter, in a fixed order."""
    out = []
    shape: tuple[int, ...] = tuple(cfg.input_shape)
    shapes = infer_shapes(cfg)
    for layer, next_shape in zip(cfg.layers, shapes):
        if isinstance(layer, Ntt):
            c = shape[0]
            planes = 1 if layer.shared else c
            k = layer.filter_size
            out.append(("ntt.frozen", (planes, 1, k, k), False))
            out.append(("ntt.trainable", (planes, 1, k, k), True))
        elif isinstance(layer, Conv):
            out.append((f"{layer.tag}.w", (layer.filters, shape[0], layer.k, layer.k), True))
            out.append((f"{layer.tag}.b", (layer.filters,), True))
        elif isinstance(layer, Dense):
            out.append((f"{layer.tag}.w", (_prod(shape), layer.units), True))
            out.append((f"{layer.tag}.b", (layer.units,), True))
        elif isinstance(layer, PrimaryCaps):
            out.append(("primary_caps.w", (layer.types * layer.dim, shape[0], layer.k, layer.k), True))
            out.append(("primary_caps.b", (layer.types * layer.dim,), True))
        elif isinstance(layer, ClassCaps):
            n_in, d_in = shape
            out.append(("class_caps.w", (n_in, d_in, layer.classes * layer.dim), True))
        elif isinstance(layer, Decoder):
            fan = _prod(shape)
            sizes = list(layer.fc) + [_prod(layer.output_shape)]
            for i, units in enumerate(sizes, 1):
                out.append((f"decoder.fc{i}.w", (fan, units), True))
                out.append((f"decoder.fc{i}.b", (units,), True))
                fan = units
            continue
        shape = next_shape
    return out


def count_parameters(cfg: ModelConfig, trainable_only: bool = True) -> int:
    return sum(_prod(s) for _, s, tr in parameter_shapes(cfg) if tr or not trainable_only)


@dataclass
class ForwardResult:
    scores: Tensor
    logits: Tensor | None = None
    capsules: Tensor | None = None
    lengths: Tensor | None = None
    reconstruction: Tensor | None = None
    features: dict[str, Tensor] = field(default_factory=dict)
    couplings: list[np.ndarray] = field(default_factory=list)
    dropout_masks: list[np.ndarray] = field(default_factory=list)


class Network:
    """Parameters plus the forward pass for one config.

    ``params`` maps names to float32 arrays; ``trainable`` lists the names the
    trainer may update. The frozen NTT kernel is never in ``trainable``.
    """

    def __init__(self, cfg: ModelConfig, seed: int = 0, margin: MarginLossParams = MarginLossParams()):
        self.cfg = cfg
        self.margin = margin
        self.params: dict[str, np.ndarray] = {}
        self.trainable: list[str] = []
        self._init_params(seed)

    # ------------------------------------------------------------- params
    def _init_params(self, seed: int) -> None:
        base = Prng(seed, INIT_STREAM)
        act_of = {}
        for layer in self.cfg.layers:
            if isinstance(layer, (Conv, Dense)):
                act_of[layer.tag] = layer.activation
        for idx, (name, shape, trainable) in enumerate(parameter_shapes(self.cfg)):
            rng = base.child(idx)
            if name == "ntt.frozen":
                k = shape[-1]
                arr = np.full(shape, 1.0 / (k * k))
            elif name == "ntt.trainable":
                arr = np.zeros(shape)
                arr[:, :, shape[2] // 2, shape[3] // 2] = 1.0
            elif name.endswith(".b"):
                arr = np.zeros(shape)
            elif name == "class_caps.w":
                n_in, d_in, jd = shape
                classes = next(l.classes for l in self.cfg.layers if isinstance(l, ClassCaps))
                arr = rng.normal(size=shape, scale=np.sqrt(classes / (n_in * d_in)))
            elif len(shape) == 4:
                fan_in = shape[1] * shape[2] * shape[3]
                arr = rng.normal(size=shape, scale=np.sqrt(2.0 / fan_in))
            else:
                fan_in = shape[0]
                relu = act_of.get(name.rsplit(".", 1)[0], "relu") == "relu" or name.startswith("decoder")
                arr = rng.normal(size=shape, scale=np.sqrt((2.0 if relu else 1.0) / fan_in))
            self.params[name] = arr.astype(np.float32)
            if trainable:
                self.trainable.append(name)

    def num_parameters(self, trainable_only: bool = True) -> int:
        names = self.trainable if trainable_only else list(self.params)
        return sum(self.params[n].size for n in names)

    def state(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        extra = set(state) - set(self.params)
        if missing or extra:
            raise ConfigError(f"checkpoint does not match model: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, v in state.items():
            if v.shape != self.params[k].shape:
                raise ConfigError(f"shape mismatch for {k}: {v.shape} vs {self.params[k].shape}")
            self.params[k] = np.asarray(v, dtype=np.float32).copy()

    def bind(self, track: bool = True, dtype=np.float32) -> dict[str, Tensor]:
        """Wrap parameters as tensors; trainable ones track gradients when ``track``."""
        trainable = set(self.trainable)
        return {
            k: Tensor(v.astype(dtype, copy=False), requires_grad=track and k in trainable, name=k)
            for k, v in self.params.items()
        }

    # ------------------------------------------------------------ forward
    def forward(self, x, params: dict[str, Tensor] | None = None, training: bool = False,
                rng: Prng | None = None, labels=None, stop_at: str | None = None) -> ForwardResult:
        p = params if params is not None else self.bind(track=False)
        x = T.as_tensor(x)
        if x.ndim != 4 or tuple(x.shape[1:]) != tuple(self.cfg.input_shape):
            raise ConfigError(f"expected input (N,{','.join(map(str, self.cfg.input_shape))}), got {x.shape}")
        res = ForwardResult(scores=None)  # type: ignore[arg-type]
        h = x
        drop_i = 0
        for layer in self.cfg.layers:
            if isinstance(layer, Ntt):
                frozen, trainable = p["ntt.frozen"], p["ntt.trainable"]
                if layer.shared:
                    ones = np.ones((h.shape[1], 1, 1, 1), dtype=h.dtype)
                    frozen, trainable = frozen * ones, trainable * ones
                h = T.depthwise_conv2d(h, frozen, 1, "same")
                h = T.depthwise_conv2d(h, trainable, 1, "same")
                res.features["ntt"] = h
            elif isinstance(layer, Conv):
                h = T.conv2d(h, p[f"{layer.tag}.w"], layer.stride, layer.padding)
                h = h + T.reshape(p[f"{layer.tag}.b"], (1, -1, 1, 1))
                h = T.activation(h, layer.activation)
                res.features[layer.tag] = h
                if stop_at == layer.tag:
                    return res
            elif isinstance(layer, MaxPool):
                h = T.max_pool2d(h, layer.k)
            elif isinstance(layer, Dropout):
                if training and layer.rate > 0:
                    if rng is None:
                        raise ValueError("training with dropout needs a Prng")
                    h, mask = T.dropout(h, layer.rate, rng.child(drop_i))
                    res.dropout_masks.append(mask)
                drop_i += 1
            elif isinstance(layer, Dense):
                if h.ndim > 2:
                    h = T.flatten(h)
                z = T.linear(h, p[f"{layer.tag}.w"], p[f"{layer.tag}.b"])
                if layer.activation == "softmax":
                    res.logits = z
                h = T.activation(z, layer.activation)
                res.features[layer.tag] = h
            elif isinstance(layer, PrimaryCaps):
                z = T.conv2d(h, p["primary_caps.w"], layer.stride, "valid")
                z = z + T.reshape(p["primary_caps.b"], (1, -1, 1, 1))
                n, _, ph, pw = z.shape
                z = T.reshape(z, (n, layer.types, layer.dim, ph, pw))
                z = T.transpose(z, (0, 1, 3, 4, 2))
                h = squash(T.reshape(z, (n, layer.types * ph * pw, layer.dim)), axis=-1)
                res.features["primary_caps"] = h
            elif isinstance(layer, ClassCaps):
                n, n_in, d_in = h.shape
                u = T.transpose(h, (1, 0, 2))
                u_hat = T.matmul(u, p["class_caps.w"])
                u_hat = T.reshape(u_hat, (n_in, n, layer.classes, layer.dim))
                u_hat = T.transpose(u_hat, (1, 2, 0, 3))
                routed = dynamic_routing(u_hat, layer.routing_iters)
                res.capsules = routed.v
                res.couplings = routed.couplings
                res.lengths = T.l2_norm(routed.v, axis=-1)
                h = routed.v
            elif isinstance(layer, Decoder):
                res.reconstruction = self._decode(layer, res, p, labels)
        if stop_at is not None:
            raise ConfigError(f"unknown layer tag {stop_at!r}")
        res.scores = res.lengths if res.lengths is not None else h
        return res

    def _decode(self, layer: Decoder, res: ForwardResult, p, labels) -> Tensor:
        v = res.capsules
        n, j, e = v.shape
        if labels is None:
            chosen = np.argmax(res.lengths.data, axis=1)
        else:
            chosen = np.asarray(labels, dtype=np.int64)
        mask = np.zeros((n, j, 1), dtype=v.dtype)
        mask[np.arange(n), chosen, 0] = 1.0
        h = T.reshape(v * mask, (n, j * e))
        n_fc = len(layer.fc) + 1
        for i in range(1, n_fc + 1):
            h = T.linear(h, p[f"decoder.fc{i}.w"], p[f"decoder.fc{i}.b"])
            h = T.relu(h) if i < n_fc else T.sigmoid(h)
        return T.reshape(h, (n,) + tuple(layer.output_shape))

    # --------------------------------------------------------------- loss
    def loss(self, res: ForwardResult, x, labels) -> Tensor:
        labels = np.asarray(labels, dtype=np.int64)
        if self.cfg.loss == "cross_entropy":
            if res.logits is None:
                raise ConfigError("cross-entropy loss needs a softmax output layer")
            return T.cross_entropy(res.logits, labels)
        total = margin_loss(res.lengths, labels, self.margin)
        if self.cfg.loss == "margin+reconstruction":
            x = T.as_tensor(x)
            diff = res.reconstruction - x
            sse = T.reduce_sum(diff * diff) * (1.0 / x.shape[0])
            total = total + sse * self.cfg.recon_weight
        return total

    def loss_and_forward(self, x, labels, params=None, training=False, rng=None):
        res = self.forward(x, params=params, training=training, rng=rng,
                           labels=labels if self.cfg.loss == "margin+reconstruction" else None)
        return self.loss(res, x, labels), res


def predict(model: Network, batch: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Class scores: softmax probabilities for CNNs, capsule lengths for capsule models."""
    batch = np.asarray(batch, dtype=np.float32)
    p = model.bind(track=False)
    out = []
    with T.no_grad():
        for i in range(0, len(batch), batch_size):
            out.append(model.forward(batch[i:i + batch_size], params=p).scores.data)
    return np.concatenate(out, axis=0).astype(np.float64)


def feature_extract(model: Network, layer_tag: str, batch: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Post-activation output of conv layer ``layer_tag``: (N, C, h, w)."""
    if layer_tag not in model.cfg.conv_tags():
        raise ConfigError(f"unknown conv layer tag {layer_tag!r}; have {model.cfg.conv_tags()}")
    batch = np.asarray(batch, dtype=np.float32)
    p = model.bind(track=False)
    out = []
    with T.no_grad():
        for i in range(0, len(batch), batch_size):
            out.append(model.forward(batch[i:i + batch_size], params=p, stop_at=layer_tag).features[layer_tag].data)
    return np.concatenate(out, axis=0)
