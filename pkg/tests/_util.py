"""Helpers shared by several test modules."""

import numpy as np

from headbasis.synth import Corpus


def model_arrays(model) -> dict[str, np.ndarray]:
    out = {"basis": model.bank.basis, "embeddings": model.embeddings}
    for name, net in model.nets().items():
        for k, v in net.params().items():
            out[f"{name}.{k}"] = v
    return out


def assert_models_identical(a, b) -> None:
    xa, xb = model_arrays(a), model_arrays(b)
    assert xa.keys() == xb.keys()
    for k in xa:
        assert xa[k].tobytes() == xb[k].tobytes(), k
    assert a.bank.kappa == b.bank.kappa


def single_pair_corpus(corpus: Corpus, n_clips: int = 10) -> Corpus:
    """Every frame of every clip carries clip 0's first (audio, beta, pose, subject)."""
    t = corpus.clip_len
    one = corpus.subset([0])

    def rep(a):
        return np.repeat(np.repeat(a[:, :1], t, axis=1), n_clips, axis=0)

    return Corpus(rep(one.poses), rep(one.audio), rep(one.betas), one.labels * n_clips,
                  np.repeat(one.subjects, n_clips), corpus.identities, corpus.fps, corpus.face)


# filled by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []
