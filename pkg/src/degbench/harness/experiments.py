"""Feature-SSIM probe, NTT pairing and the FGSM sweep runner."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from degbench import degrade
from degbench.attacks import AdversarialRecord, adversarial_sweep
from degbench.metrics import SsimParams, feature_ssim
from degbench.models.builders import strip_ntt
from degbench.models.network import Network, feature_extract
from degbench.harness.sweep import SweepError, SweepResult, degrade_images, run_degradation_sweep, \
    sweep_points, to_model_input

FEATSSIM_HEADER = "model,degradation,param,ssim,n,seed"
FGSM_HEADER = "model,eps,top1,mean_psnr,n,n_infinite,seed"


def dataset_tag(model: Network) -> str | None:
    return dict(model.cfg.metadata).get("dataset")


# ------------------------------------------------------------ feature SSIM

@dataclass(frozen=True)
class FeatureSsimRow:
    model: str
    degradation: str
    param: float
    ssim: float
    n: int
    seed: int

    def csv_row(self) -> str:
        p = str(int(self.param)) if float(self.param).is_integer() else repr(float(self.param))
        return f"{self.model},{self.degradation},{p},{self.ssim:.6f},{self.n},{self.seed}"


def _probe(model: Network, tag: str, clean_feats: np.ndarray, x: np.ndarray) -> float:
    feats = feature_extract(model, tag, x)
    return float(np.mean([feature_ssim(c, d) for c, d in zip(clean_feats, feats)]))


def run_feature_ssim(models: Sequence[Network], images: Sequence[np.ndarray],
                     grids: dict[str, Sequence[float]], seed: int = 0,
                     model_ids: Sequence[str] | None = None, threads: int | None = None) -> list[FeatureSsimRow]:
    """Mean SSIM between last-conv features of clean and degraded inputs, per model and grid point."""
    if len(images) == 0:
        raise SweepError("empty evaluation set")
    tags = {dataset_tag(m) for m in models}
    if len(tags) > 1:
        raise SweepError(f"models were trained on different datasets: {sorted(map(str, tags))}")
    ids = list(model_ids) if model_ids is not None else [m.cfg.name for m in models]
    layer = [m.cfg.last_conv_tag() for m in models]
    clean = [feature_extract(m, t, to_model_input(images, m.cfg.input_shape[1])) for m, t in zip(models, layer)]
    for mid, c in zip(ids, clean):
        if min(c.shape[-2:]) < SsimParams().window:
            raise SweepError(f"{mid}: last conv map {c.shape[-2:]} is smaller than the SSIM window")
    rows = []
    for name, point, value in sweep_points(grids):
        spec = degrade.make_spec(name, value)
        degraded = None
        for m, t, c, mid in zip(models, layer, clean, ids):
            if degrade.is_identity(spec):
                x = to_model_input(images, m.cfg.input_shape[1])
            else:
                if degraded is None:
                    degraded = degrade_images(images, spec, seed, point, threads)
                x = to_model_input(degraded, m.cfg.input_shape[1])
            rows.append(FeatureSsimRow(mid, name, value, _probe(m, t, c, x), len(images), seed))
    return rows


# ------------------------------------------------------------- NTT pairing

@dataclass(frozen=True)
class NttSummary:
    clean_delta: float  # NTT clean top-1 minus plain clean top-1
    max_gain: float  # largest NTT-minus-plain top-1 over noisy points
    max_gain_at: tuple[str, float]
    gains: dict


def check_pairing(plain: Network, ntt: Network) -> None:
    if plain.cfg.has_ntt or not ntt.cfg.has_ntt:
        raise SweepError("expected (plain, +NTT) checkpoints in that order")
    if strip_ntt(ntt.cfg).layers != plain.cfg.layers or ntt.cfg.input_shape != plain.cfg.input_shape:
        raise SweepError(f"{ntt.cfg.name!r} is not the NTT variant of {plain.cfg.name!r}")
    ta, tb = dataset_tag(plain), dataset_tag(ntt)
    if ta != tb:
        raise SweepError(f"checkpoints trained on different datasets ({ta} vs {tb})")


def summarize_ntt(plain_rows: Sequence[SweepResult], ntt_rows: Sequence[SweepResult]) -> NttSummary:
    if len(plain_rows) != len(ntt_rows):
        raise SweepError("unpaired sweep rows")
    gains, clean = {}, []
    for a, b in zip(plain_rows, ntt_rows):
        if (a.degradation, a.param) != (b.degradation, b.param):
            raise SweepError("unpaired sweep rows")
        spec = degrade.make_spec(a.degradation, a.param)
        if degrade.is_identity(spec):
            clean.append(b.top1 - a.top1)
        else:
            gains[(a.degradation, a.param)] = b.top1 - a.top1
    clean_delta = float(np.mean(clean)) if clean else math.nan
    if gains:
        at = max(gains, key=lambda k: (gains[k], k))
        best = gains[at]
    else:
        at, best = ("", math.nan), math.nan
    return NttSummary(clean_delta, best, at, gains)


def run_ntt_comparison(plain: Network, ntt: Network, images, labels, grids, seed: int = 0,
                       ids: tuple[str, str] | None = None, threads: int | None = None):
    """Sweep both variants on identical corrupted inputs; returns (plain rows, ntt rows, summary)."""
    check_pairing(plain, ntt)
    ids = ids or (plain.cfg.name, ntt.cfg.name)
    a = run_degradation_sweep(plain, images, labels, grids, seed, ids[0], threads)
    b = run_degradation_sweep(ntt, images, labels, grids, seed, ids[1], threads)
    return a, b, summarize_ntt(a, b)


# ------------------------------------------------------------------- FGSM

@dataclass(frozen=True)
class FgsmRow:
    model: str
    record: AdversarialRecord
    seed: int

    def csv_row(self) -> str:
        r = self.record
        p = "inf" if math.isinf(r.mean_psnr) else f"{r.mean_psnr:.6f}"
        return f"{self.model},{r.eps!r},{r.top1:.6f},{p},{r.n},{r.n_infinite},{self.seed}"


def run_fgsm(model: Network, images, labels, eps_list: Sequence[float], seed: int = 0,
             model_id: str | None = None) -> list[FgsmRow]:
    x = to_model_input(images, model.cfg.input_shape[1])
    recs = adversarial_sweep(model, x, np.asarray(labels), eps_list)
    return [FgsmRow(model_id or model.cfg.name, r, seed) for r in recs]
