"""Train the desk-scale model set and write every sweep, probe and plot.

    python scripts/run_desk_experiments.py --out runs/desk --seeds 0,1,2

Checkpoints are cached under <out>/models, so a rerun only re-sweeps.
"""
import argparse
import logging
from pathlib import Path

from degbench.harness.config import DEFAULT_GRIDS
from degbench.harness.desk import ModelZoo, prepare_digits
from degbench.harness.experiments import FEATSSIM_HEADER, FGSM_HEADER, run_feature_ssim, run_fgsm, \
    run_ntt_comparison
from degbench.harness.plot import emit_plot
from degbench.harness.report import report
from degbench.harness.sweep import CsvSink, run_degradation_sweep

SWEEP_MODELS = ("capsnet", "capsnet_r1", "small_cnn_shallow", "small_cnn_shallow+ntt")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--seeds", default="0")
    ap.add_argument("--models", default=",".join(SWEEP_MODELS))
    ap.add_argument("--eval-limit", type=int, default=0, help="use only the first N test images")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    out = Path(args.out)
    seeds = [int(s) for s in args.seeds.split(",")]
    zoo = ModelZoo(prepare_digits(out / "digits"), out / "models")
    x, y = zoo.data.x_test, zoo.data.y_test
    if args.eval_limit:
        x, y = x[:args.eval_limit], y[:args.eval_limit]

    sink = CsvSink(out / "sweep.csv")
    for sel in args.models.split(","):
        for seed in seeds:
            run_degradation_sweep(zoo.get(sel, seed).model, x, y, DEFAULT_GRIDS, seed, f"{sel}/s{seed}",
                                  on_row=sink.write)
    emit_plot(sink.path, out / "sweep.svg")

    noise = {k: DEFAULT_GRIDS[k] for k in ("awgn", "salt_pepper")}
    feats = CsvSink(out / "featssim.csv", FEATSSIM_HEADER)
    ntt = CsvSink(out / "ntt.csv")
    fgsm = CsvSink(out / "fgsm.csv", FGSM_HEADER)
    for seed in seeds:
        pair = [zoo.get("capsnet", seed).model, zoo.get("vcapsnet_mini", seed).model]
        for row in run_feature_ssim(pair, x[:100], noise, seed, (f"capsnet/s{seed}", f"vcapsnet_mini/s{seed}")):
            feats.write(row)
        a, b, summary = run_ntt_comparison(zoo.get("small_cnn_shallow", seed).model,
                                           zoo.get("small_cnn_shallow+ntt", seed).model, x, y, noise, seed,
                                           (f"plain/s{seed}", f"ntt/s{seed}"))
        for row in a + b:
            ntt.write(row)
        logging.info("seed %d NTT: clean delta %+.3f, max gain %+.3f at %s", seed, summary.clean_delta,
                     summary.max_gain, summary.max_gain_at)
        for sel in ("small_cnn_shallow", "small_cnn_shallow+ntt"):
            for row in run_fgsm(zoo.get(sel, seed).model, x[:100], y[:100], (0, .01, .02, .05, .1, .2), seed,
                                f"{sel}/s{seed}"):
                fgsm.write(row)
    emit_plot(feats.path, out / "featssim.svg", metric="ssim")
    emit_plot(ntt.path, out / "ntt.svg")
    emit_plot(fgsm.path, out / "fgsm_psnr.svg", metric="mean_psnr")
    emit_plot(fgsm.path, out / "fgsm_top1.svg")
    text = report(out)
    (out / "report.txt").write_text(text)
    print(text)


if __name__ == "__main__":
    main()
