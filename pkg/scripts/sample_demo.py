#!/usr/bin/env python3
"""Sample several head-motion trajectories for one audio sequence and
report how their diversity grows with the sampling radius.

    python3 scripts/sample_demo.py --ckpt runs/desk/seed0/model.ckpt
"""

import argparse

import numpy as np

from headbasis.checkpoint import load_checkpoint
from headbasis.metrics import diversity_metric
from headbasis.sampling import SampleConfig, sample_trajectories
from headbasis.synth import SynthConfig, synth_dataset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ckpt", required=True)
    ap.add_argument("--clips", type=int, default=8, help="audio clips to concatenate")
    ap.add_argument("--num", type=int, default=20, help="samples per radius")
    ap.add_argument("--epsilons", type=float, nargs="+", default=[0.0, 0.1, 0.3, 1.0, 2.0])
    ap.add_argument("--seed", type=int, default=100)
    args = ap.parse_args()
    ckpt = load_checkpoint(args.ckpt)
    m, t = ckpt.model, ckpt.config.clip_len
    corpus = synth_dataset(SynthConfig(classes=("nod", "shake", "tilt"), clips_per_class=4,
                                       clip_len=t, seed=args.seed))
    audio = corpus.audio[:args.clips].reshape(-1, corpus.audio.shape[2])
    for eps in args.epsilons:
        trajs = sample_trajectories(m.bank, m.audio_net, m.decoder, audio,
                                    SampleConfig(epsilon=eps, seed=0, num_samples=args.num), t)
        spread = np.std(np.stack(trajs)[:, :, :3], axis=0).mean()
        print(f"eps {eps:4.2f}: diversity {diversity_metric(trajs):.4f}  "
              f"between-sample spread {spread:.4f}")


if __name__ == "__main__":
    main()
