"""Command line entry point: ``headbasis <command> ...``.

Commands: synth, train, sample, stitch, eval, probe, gradcheck.  Run
``headbasis <command> -h`` for the flags of each.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .errors import HeadBasisError, ParseError
from .face import load_desk_face_model, project_landmarks, reconstruct_shape
from .gradients import check_model
from .metrics import diversity_metric, lmd_metric
from .pose import POSE_COLUMNS, OffsetClip, PoseFrame, frames_from_array, write_trajectory
from .sampling import NEUTRAL_POSE, SampleConfig, probe_basis, sample_trajectories, stitch_clips
from .synth import DEFAULT_CLASSES, SynthConfig, landmark_columns, load_corpus, read_audio, \
    save_corpus, synth_dataset
from .tables import read_frame_table
from .training import train


def _pose_arg(text: str) -> PoseFrame:
    try:
        vals = [float(v) for v in text.split(",")]
        return PoseFrame.from_vector(vals)
    except (ValueError, HeadBasisError) as exc:
        raise argparse.ArgumentTypeError(f"expected 'r,p,y,tx,ty,tz', got {text!r}") from exc


def _csv_list(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def cmd_synth(args) -> int:
    cfg = SynthConfig(classes=tuple(args.classes), clips_per_class=args.clips, noise=args.noise,
                      subjects=args.subjects, seed=args.seed)
    corpus = synth_dataset(cfg)
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} clips ({', '.join(cfg.classes)}) to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = TrainConfig.load(args.config) if args.config else TrainConfig()
    corpus = load_corpus(args.data, cfg.clip_len)
    resume = load_checkpoint(args.resume) if args.resume else None
    ckpt = train(corpus, cfg, resume=resume, stop_after=args.max_steps)
    save_checkpoint(ckpt, args.out)
    for stage, hist in sorted(ckpt.history.items()):
        if hist:
            print(f"stage {stage}: loss {hist[0][1]:.6g} -> {hist[-1][1]:.6g} "
                  f"({hist[-1][0]} steps)")
    state = "finished" if ckpt.finished else f"paused at stage {ckpt.stage} step {ckpt.step}"
    print(f"checkpoint {args.out}: {state}")
    return 0


def _stem(path: Path) -> str:
    return path.name[:-4] if path.name.endswith(".csv") else path.name


def cmd_sample(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    audio = read_audio(args.audio)
    cfg = SampleConfig(epsilon=args.epsilon, seed=args.seed, num_samples=args.num)
    m = ckpt.model
    trajs = sample_trajectories(m.bank, m.audio_net, m.decoder, audio, cfg,
                                ckpt.config.clip_len, args.initial)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = _stem(Path(args.audio))
    for j, arr in enumerate(trajs):
        write_trajectory(out / f"{stem}.sample{j}.csv", frames_from_array(arr, wrap=True))
    print(f"wrote {len(trajs)} trajectories of {trajs[0].shape[0]} frames to {out}")
    return 0


def read_offset_clip(path) -> OffsetClip:
    """A pose table read as a clip relative to its own first frame."""
    _, arr = read_frame_table(path, POSE_COLUMNS)
    if arr.shape[0] < 1:
        raise ParseError(f"{path}: no frames")
    return OffsetClip(arr - arr[0])


def cmd_stitch(args) -> int:
    clips = [read_offset_clip(p) for p in args.clips]
    frames = stitch_clips(clips, args.initial)
    write_trajectory(args.out, frames)
    print(f"wrote {len(frames)} frames to {args.out}")
    return 0


def _table_kind(columns) -> str | None:
    if columns == list(POSE_COLUMNS):
        return "pose"
    if columns and len(columns) % 2 == 0 and columns == list(landmark_columns(len(columns) // 2)):
        return "landmarks"
    return None


def _scan(directory) -> dict[str, tuple[str, np.ndarray]]:
    found = {}
    for path in sorted(Path(directory).glob("*.csv")):
        try:
            cols, arr = read_frame_table(path)
        except ParseError:
            continue
        kind = _table_kind(cols)
        if kind is not None:
            found[path.name] = (kind, arr)
    return found


def _as_landmarks(kind: str, arr: np.ndarray, face) -> np.ndarray:
    if kind == "landmarks":
        return arr.reshape(arr.shape[0], -1, 2)
    neutral = reconstruct_shape(face)
    return np.stack([project_landmarks(neutral, face, PoseFrame.from_vector(row, wrap=True))
                     for row in arr])


def evaluate_dirs(pred_dir, ref_dir, metrics) -> dict:
    """Metric report for the tables in ``pred_dir`` (and same-named ones in ``ref_dir``).

    Diversity averages over every pose table in ``pred_dir``.  LMD pools all
    frames of every file present in both directories; pose tables are
    rendered as landmarks of the neutral desk face under each pose.
    """
    pred = _scan(pred_dir)
    report: dict = {"num_pred": len(pred)}
    if "diversity" in metrics:
        poses = [arr for kind, arr in pred.values() if kind == "pose"]
        if not poses:
            raise ParseError(f"{pred_dir}: no pose tables for diversity")
        report["diversity"] = float(np.mean([diversity_metric([a]) for a in poses]))
    if "lmd" in metrics:
        ref = _scan(ref_dir)
        face = load_desk_face_model()
        pairs = sorted(set(pred) & set(ref))
        if not pairs:
            raise ParseError(f"no file names shared by {pred_dir} and {ref_dir}")
        p = [_as_landmarks(*pred[name], face) for name in pairs]
        q = [_as_landmarks(*ref[name], face) for name in pairs]
        report["lmd"] = lmd_metric(np.concatenate(p), np.concatenate(q))
        report["num_pairs"] = len(pairs)
    return report


def cmd_eval(args) -> int:
    unknown = set(args.metrics) - {"diversity", "lmd"}
    if unknown:
        raise ParseError(f"unknown metrics {sorted(unknown)}")
    report = evaluate_dirs(args.pred, args.ref, args.metrics)
    Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")
    for name in args.metrics:
        print(f"{name}: {report[name]:.6g}")
    return 0


def cmd_probe(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    frames = probe_basis(ckpt.model.bank, ckpt.model.decoder, args.basis, args.initial,
                         args.clips)
    write_trajectory(args.out, frames)
    print(f"wrote {len(frames)} frames decoded from basis {args.basis} to {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    reports = check_model(ckpt.model, ckpt.config, seed=args.seed, tol=args.tol,
                          max_entries=args.max_entries)
    ok = True
    for name, rep in reports.items():
        status = "PASS" if rep.passed else "FAIL"
        print(f"{name}: max rel err {rep.max_error:.3e} {status}")
        for key in rep.failures():
            print(f"  {key}: {rep.errors[key]:.3e} at {rep.worst_index.get(key)}")
        ok = ok and rep.passed
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="headbasis",
                                 description="Pose-level audio-to-head-motion tools.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic paired corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=_csv_list, default=list(DEFAULT_CLASSES))
    p.add_argument("--clips", type=int, default=50, help="clips per class")
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--subjects", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="run (or resume) staged training")
    p.add_argument("--data", required=True)
    p.add_argument("--config", help="key=value config file (defaults if omitted)")
    p.add_argument("--out", required=True)
    p.add_argument("--resume")
    p.add_argument("--max-steps", type=int, default=None,
                   help="stop after this many optimizer steps (checkpoint can be resumed)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="sample pose trajectories for an audio table")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--audio", required=True)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--num", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial", type=_pose_arg, default=NEUTRAL_POSE)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("stitch", help="chain pose clips into one trajectory")
    p.add_argument("--clips", nargs="+", required=True)
    p.add_argument("--initial", type=_pose_arg, default=NEUTRAL_POSE)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stitch)

    p = sub.add_parser("eval", help="diversity / landmark distance report")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--metrics", type=_csv_list, default=["diversity", "lmd"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("probe", help="decode one motion basis into a trajectory")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--basis", type=int, required=True)
    p.add_argument("--clips", type=int, default=4)
    p.add_argument("--initial", type=_pose_arg, default=NEUTRAL_POSE)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("gradcheck", help="finite-difference check of a checkpoint's gradients")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-entries", type=int, default=200)
    p.set_defaults(func=cmd_gradcheck)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (HeadBasisError, IndexError, OSError) as exc:
        print(f"headbasis {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
