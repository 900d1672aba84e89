#!/usr/bin/env python3
"""Train the desk-scale config on a synthetic corpus and print diagnostics.

    python3 scripts/run_desk.py --out runs/desk [--seeds 0 1 2]

For each seed writes ``<out>/seed<k>/model.ckpt`` and one probe trajectory
per class, then prints basis/KL loss ratios, held-out agreement,
autoencoding error and the class-to-basis probes.
"""

import argparse
import logging
import time
from pathlib import Path

from headbasis.checkpoint import save_checkpoint
from headbasis.config import TrainConfig
from headbasis.evaluation import (EULER_NAMES, autoencoding_error, basis_agreement,
                                class_probes)
from headbasis.pose import write_trajectory
from headbasis.sampling import probe_basis
from headbasis.synth import SynthConfig, split_indices, synth_dataset
from headbasis.training import Model, StageData, stage1_loss, train

ROOT = Path(__file__).resolve().parents[1]


def run(seed: int, cfg: TrainConfig, clips: int, out: Path) -> dict:
    cfg = cfg.replace(seed=seed)
    corpus = synth_dataset(SynthConfig(classes=("still", "nod", "shake", "tilt"),
                                       clips_per_class=clips, seed=seed))
    t0 = time.perf_counter()
    ckpt = train(corpus, cfg)
    elapsed = time.perf_counter() - t0
    _, held = split_indices(len(corpus), cfg.holdout_fraction, seed)
    held = corpus.subset(held)
    data = StageData(corpus, cfg)
    init = Model.init(cfg, corpus.identities.shape[0], corpus.face.exp_dim)
    lb0 = stage1_loss(init, data.offsets, cfg.lambda_rec, grads=False)[1]
    lb1 = stage1_loss(ckpt.model, data.offsets, cfg.lambda_rec, grads=False)[1]
    kl = ckpt.history[2]
    probes = class_probes(ckpt.model, corpus)

    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt, out / "model.ckpt")
    for p in probes:
        write_trajectory(out / f"probe_{p.label}.csv",
                         probe_basis(ckpt.model.bank, ckpt.model.decoder, p.basis))
    return {
        "seed": seed,
        "time": elapsed,
        "basis_ratio": lb1 / lb0,
        "kl_ratio": kl[-1][1] / kl[0][1],
        "agreement": basis_agreement(ckpt.model, held),
        "mae": autoencoding_error(ckpt.model, held),
        "probes": probes,
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "desk.cfg"))
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--clips", type=int, default=60, help="clips per class")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    cfg = TrainConfig.load(args.config)
    for seed in args.seeds:
        r = run(seed, cfg, args.clips, Path(args.out) / f"seed{seed}")
        probes = " ".join(f"{p.label}:b{p.basis}:{EULER_NAMES[p.dominant]}"
                          f"{'' if p.matches else '(x)'}" for p in r["probes"])
        hits = sum(p.matches for p in r["probes"])
        print(f"seed {seed}: {r['time']:.0f}s basis {r['basis_ratio']:.3f} "
              f"kl {r['kl_ratio']:.4f} agree {r['agreement']:.3f} mae {r['mae']:.4f} "
              f"probes {hits}/4 {probes}", flush=True)


if __name__ == "__main__":
    main()
