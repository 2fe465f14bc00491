"""The six degradation operators and a tagged spec that dispatches to them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from degbench.degrade.blur import (
    apply_gaussian_blur,
    apply_motion_blur,
    gaussian_blur_sigma,
    gaussian_kernel,
    motion_blur_kernel,
)
from degbench.degrade.jpeg import apply_jpeg
from degbench.degrade.noise import apply_awgn_per_channel, apply_awgn_shared, apply_salt_pepper
from degbench.rng import Prng

__all__ = [
    "AwgnShared", "AwgnPerChannel", "SaltPepper", "MotionBlur", "GaussianBlur", "JpegQuality",
    "DegradationSpec", "apply", "make_spec", "DEGRADATIONS",
    "apply_awgn_shared", "apply_awgn_per_channel", "apply_salt_pepper",
    "apply_motion_blur", "apply_gaussian_blur", "apply_jpeg",
    "motion_blur_kernel", "gaussian_blur_sigma", "gaussian_kernel",
]


@dataclass(frozen=True)
class AwgnShared:
    sigma: float
    name = "awgn"

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    @property
    def param(self) -> float:
        return self.sigma


@dataclass(frozen=True)
class AwgnPerChannel:
    sigma: float
    name = "awgn_color"

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    @property
    def param(self) -> float:
        return self.sigma


@dataclass(frozen=True)
class SaltPepper:
    density: float
    name = "salt_pepper"

    def __post_init__(self):
        if not 0.0 <= self.density <= 1.0:
            raise ValueError(f"density must be in [0, 1], got {self.density}")

    @property
    def param(self) -> float:
        return self.density


@dataclass(frozen=True)
class MotionBlur:
    width: int
    name = "motion_blur"

    def __post_init__(self):
        if int(self.width) != self.width or self.width < 1 or self.width % 2 == 0:
            raise ValueError(f"motion blur width must be odd and >= 1, got {self.width}")

    @property
    def param(self) -> float:
        return self.width


@dataclass(frozen=True)
class GaussianBlur:
    # ksize 1 is accepted as the zero-severity identity
    ksize: int
    name = "gaussian_blur"

    def __post_init__(self):
        if int(self.ksize) != self.ksize or self.ksize < 1 or self.ksize % 2 == 0:
            raise ValueError(f"gaussian kernel size must be odd, got {self.ksize}")

    @property
    def param(self) -> float:
        return self.ksize


@dataclass(frozen=True)
class JpegQuality:
    q: int
    name = "jpeg"

    def __post_init__(self):
        if int(self.q) != self.q or not 0 <= self.q <= 100:
            raise ValueError(f"JPEG quality must be an integer in [0, 100], got {self.q}")

    @property
    def param(self) -> float:
        return self.q


DegradationSpec = Union[AwgnShared, AwgnPerChannel, SaltPepper, MotionBlur, GaussianBlur, JpegQuality]

DEGRADATIONS = {
    "awgn": AwgnShared,
    "awgn_color": AwgnPerChannel,
    "salt_pepper": SaltPepper,
    "motion_blur": MotionBlur,
    "gaussian_blur": GaussianBlur,
    "jpeg": JpegQuality,
}

_INT_PARAMS = {"motion_blur", "gaussian_blur", "jpeg"}


def make_spec(name: str, param: float) -> DegradationSpec:
    try:
        cls = DEGRADATIONS[name]
    except KeyError:
        raise ValueError(f"unknown degradation {name!r}; choose from {sorted(DEGRADATIONS)}") from None
    if name in _INT_PARAMS:
        if float(param) != int(param):
            raise ValueError(f"{name} needs an integer parameter, got {param}")
        param = int(param)
    return cls(param)


def is_identity(spec: DegradationSpec) -> bool:
    if isinstance(spec, JpegQuality):
        return False
    if isinstance(spec, (MotionBlur, GaussianBlur)):
        return spec.param == 1
    return spec.param == 0


def apply(spec: DegradationSpec, img: np.ndarray, rng: Prng | None = None) -> np.ndarray:
    if isinstance(spec, AwgnShared):
        return apply_awgn_shared(img, spec.sigma, _need(rng))
    if isinstance(spec, AwgnPerChannel):
        return apply_awgn_per_channel(img, spec.sigma, _need(rng))
    if isinstance(spec, SaltPepper):
        return apply_salt_pepper(img, spec.density, _need(rng))
    if isinstance(spec, MotionBlur):
        return apply_motion_blur(img, spec.width)
    if isinstance(spec, GaussianBlur):
        return apply_gaussian_blur(img, spec.ksize)
    if isinstance(spec, JpegQuality):
        return apply_jpeg(img, spec.q)
    raise TypeError(f"not a degradation spec: {spec!r}")


def _need(rng: Prng | None) -> Prng:
    if rng is None:
        raise ValueError("this degradation is stochastic and needs a Prng")
    return rng
