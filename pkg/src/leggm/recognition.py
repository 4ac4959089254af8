"""Gallery matching: similarity scores, ranked identification,
genuine/impostor verification pools.

Scores are "higher is better" for both metrics: cosine similarity, or
negated Euclidean distance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyGalleryError,
    UnknownClaimedLabelError,
)

log = logging.getLogger(__name__)

METRICS = ("cosine", "euclid")


@dataclass(frozen=True)
class Match:
    sample_id: str
    subject: str
    score: float


class Gallery:
    """Immutable enrolled set: one vector per sample, a subject per vector."""

    def __init__(self, vectors: np.ndarray, sample_ids, subjects):
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        sample_ids = [str(s) for s in sample_ids]
        subjects = [str(s) for s in subjects]
        if vectors.shape[0] != len(sample_ids) or len(sample_ids) != len(subjects):
            raise DimensionMismatchError(
                f"{vectors.shape[0]} vectors, {len(sample_ids)} ids, {len(subjects)} subjects"
            )
        if len(set(sample_ids)) != len(sample_ids):
            raise DimensionMismatchError("gallery sample ids must be unique")
        self._vectors = vectors
        self._vectors.setflags(write=False)
        self._sample_ids = tuple(sample_ids)
        self._subjects = tuple(subjects)

    def __len__(self) -> int:
        return len(self._sample_ids)

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def sample_ids(self):
        return self._sample_ids

    @property
    def subjects(self):
        return self._subjects

    @property
    def subject_set(self):
        return set(self._subjects)

    @property
    def dim(self) -> int:
        return self._vectors.shape[1] if len(self) else 0


def similarity(a: np.ndarray, b: np.ndarray, metric: str = "cosine") -> float:
    """Score one pair; zero-norm operands under cosine score 0."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatchError(f"vector dims {a.shape} vs {b.shape}")
    if metric == "euclid":
        return float(-np.linalg.norm(a - b))
    if metric == "cosine":
        na = np.linalg.norm(a)
        nb = np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(a @ b / (na * nb))
    raise ValueError(f"unknown metric {metric!r}")


def _score_against(gallery: Gallery, probe: np.ndarray, metric: str) -> np.ndarray:
    probe = np.asarray(probe, dtype=np.float64).ravel()
    if probe.size != gallery.dim:
        raise DimensionMismatchError(
            f"probe dim {probe.size} vs gallery dim {gallery.dim}"
        )
    g = gallery.vectors
    if metric == "euclid":
        return -np.linalg.norm(g - probe[None, :], axis=1)
    if metric == "cosine":
        norms = np.linalg.norm(g, axis=1)
        pn = np.linalg.norm(probe)
        scores = np.zeros(len(gallery))
        if pn > 0.0:
            ok = norms > 0.0
            scores[ok] = (g[ok] @ probe) / (norms[ok] * pn)
        return scores
    raise ValueError(f"unknown metric {metric!r}")


def identify(gallery: Gallery, probe: np.ndarray, metric: str = "cosine",
             k: int | None = None) -> list[Match]:
    """Rank gallery samples by score; ties broken by ascending sample id."""
    if len(gallery) == 0:
        raise EmptyGalleryError("cannot identify against an empty gallery")
    if k is None:
        k = len(gallery)
    if not 1 <= k <= len(gallery):
        raise DimensionMismatchError(f"k={k} outside 1..{len(gallery)}")
    scores = _score_against(gallery, probe, metric)
    order = sorted(range(len(gallery)),
                   key=lambda i: (-scores[i], gallery.sample_ids[i]))
    return [
        Match(gallery.sample_ids[i], gallery.subjects[i], float(scores[i]))
        for i in order[:k]
    ]


def verify_scores(gallery: Gallery, probes, metric: str = "cosine"):
    """Build genuine/impostor pools from labelled probes.

    Each probe is a (vector, true subject) pair.  Its best score over the
    gallery samples of that subject joins the genuine pool; its best score
    over each other enrolled subject's samples joins the impostor pool.
    """
    if len(gallery) == 0:
        raise EmptyGalleryError("cannot verify against an empty gallery")
    probes = list(probes)
    if not probes:
        raise EmptyGalleryError("no probes to verify")
    subjects = np.asarray(gallery.subjects)
    unique_subjects = sorted(gallery.subject_set)
    genuine: list[float] = []
    impostor: list[float] = []
    for vector, claimed in probes:
        claimed = str(claimed)
        if claimed not in gallery.subject_set:
            raise UnknownClaimedLabelError(f"subject {claimed!r} not enrolled")
        scores = _score_against(gallery, vector, metric)
        for subject in unique_subjects:
            best = float(scores[subjects == subject].max())
            if subject == claimed:
                genuine.append(best)
            else:
                impostor.append(best)
    log.info("verification pools: %d genuine, %d impostor", len(genuine), len(impostor))
    return genuine, impostor
