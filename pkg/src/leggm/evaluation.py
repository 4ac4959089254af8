"""Evaluation harness: dataset manifests, CMC/ROC metrics and the
closed-set identification + verification protocol runner.

A manifest is a CSV with header ``path,subject,role`` where role is one of
train/gallery/probe; relative paths resolve against the manifest's
directory.  The same file may appear under several roles (train and
gallery typically overlap) but probe data never enters fitting.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .descriptor import extract
from .errors import (
    EmptyPoolError,
    IoFailureError,
    MalformedPayloadError,
    ProtocolViolationError,
)
from .gabor import build_bank
from .imaging import load_image
from .recognition import Gallery, identify, verify_scores
from .subspace import fit_method, project

log = logging.getLogger(__name__)

ROLES = ("train", "gallery", "probe")
VR_TARGETS = (0.01, 0.05, 0.1)


@dataclass(frozen=True)
class ManifestRow:
    path: str
    subject: str
    role: str


@dataclass(frozen=True)
class DatasetManifest:
    rows: tuple
    base_dir: Path

    def select(self, role: str):
        return [r for r in self.rows if r.role == role]

    def resolve(self, row: ManifestRow) -> Path:
        p = Path(row.path)
        return p if p.is_absolute() else self.base_dir / p


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["path", "subject", "role"]:
                raise MalformedPayloadError(
                    f"manifest header must be path,subject,role, got {header}"
                )
            rows = []
            for lineno, rec in enumerate(reader, start=2):
                if not rec:
                    continue
                if len(rec) != 3:
                    raise MalformedPayloadError(f"manifest line {lineno}: need 3 fields")
                p, subject, role = (f.strip() for f in rec)
                if role not in ROLES:
                    raise MalformedPayloadError(
                        f"manifest line {lineno}: role must be train|gallery|probe, got {role!r}"
                    )
                if not p or not subject:
                    raise MalformedPayloadError(f"manifest line {lineno}: empty field")
                if "/" in subject:
                    raise MalformedPayloadError(
                        f"manifest line {lineno}: subject may not contain '/'"
                    )
                rows.append(ManifestRow(p, subject, role))
    except OSError as exc:
        raise IoFailureError(f"cannot read manifest {path}: {exc}") from exc
    if not rows:
        raise MalformedPayloadError(f"manifest {path} has no data rows")
    return DatasetManifest(tuple(rows), path.parent)


# --- metrics -----------------------------------------------------------------

@dataclass(frozen=True)
class RocPoint:
    threshold: float
    far: float
    frr: float


def cmc(rankings, true_subjects) -> list[float]:
    """Cumulative match characteristic at identity level.

    Each ranking is an ordered list of Match results for one probe; the rank
    of an identity is the position of its best-ranked sample once the list
    is collapsed to first occurrences.  Returns rates for ranks 1..n_ids.
    """
    if len(rankings) != len(true_subjects) or not rankings:
        raise EmptyPoolError("need one ranking per probe")
    identity_ranks = []
    n_ids = 0
    for ranking, truth in zip(rankings, true_subjects):
        seen: list[str] = []
        for match in ranking:
            if match.subject not in seen:
                seen.append(match.subject)
        n_ids = max(n_ids, len(seen))
        identity_ranks.append(seen.index(truth) + 1 if truth in seen else math.inf)
    ranks = np.asarray(identity_ranks, dtype=np.float64)
    return [float(np.mean(ranks <= r)) for r in range(1, n_ids + 1)]


def roc(genuine, impostor) -> list[RocPoint]:
    """One RocPoint per candidate threshold (all scores plus +-inf sentinels).

    FAR(t) counts impostor scores >= t; FRR(t) counts genuine scores < t.
    """
    genuine = np.asarray(list(genuine), dtype=np.float64)
    impostor = np.asarray(list(impostor), dtype=np.float64)
    if genuine.size == 0 or impostor.size == 0:
        raise EmptyPoolError("both score pools must be non-empty")
    thresholds = np.concatenate(
        ([-np.inf], np.unique(np.concatenate([genuine, impostor])), [np.inf])
    )
    g = np.sort(genuine)
    i = np.sort(impostor)
    points = []
    for t in thresholds:
        far = (i.size - np.searchsorted(i, t, side="left")) / i.size
        frr = np.searchsorted(g, t, side="left") / g.size
        points.append(RocPoint(float(t), float(far), float(frr)))
    return points


def eer(points) -> float:
    """FAR at the FAR = FRR crossing, linearly interpolated between the two
    RocPoints bracketing the sign change of (far - frr)."""
    if not points:
        raise EmptyPoolError("empty ROC")
    prev = points[0]
    prev_d = prev.far - prev.frr
    for point in points[1:]:
        d = point.far - point.frr
        if d == 0.0:
            return point.far
        if prev_d > 0.0 > d:
            frac = prev_d / (prev_d - d)
            return prev.far + frac * (point.far - prev.far)
        if prev_d == 0.0:
            return prev.far
        prev, prev_d = point, d
    return prev.far  # degenerate single-point curve


def vr_at_far(points, far_target: float) -> float:
    """Verification rate (1 - FRR) at the most permissive threshold whose
    FAR fits the budget; step function over the ROC, no interpolation."""
    if not 0.0 <= far_target <= 1.0:
        raise ValueError(f"far_target must lie in [0,1], got {far_target}")
    if not points:
        raise EmptyPoolError("empty ROC")
    for point in points:  # ascending thresholds; FRR only grows from here
        if point.far <= far_target:
            return 1.0 - point.frr
    return 0.0  # unreachable with the +inf sentinel present


# --- protocol runner ---------------------------------------------------------

@dataclass(frozen=True)
class EvalReport:
    rank1: float
    cmc: tuple
    eer: float
    vr_at: dict
    roc: tuple
    counts: dict
    config: dict

    def to_dict(self) -> dict:
        return {
            "rank1": self.rank1,
            "cmc": list(self.cmc),
            "eer": self.eer,
            "vr_at": {f"{t:g}": v for t, v in sorted(self.vr_at.items())},
            "roc": [
                {"threshold": p.threshold, "far": p.far, "frr": p.frr}
                for p in self.roc
            ],
            "counts": dict(sorted(self.counts.items())),
            "config": {k: v for k, v in sorted(self.config.items())},
        }


def extract_features(manifest: DatasetManifest, cfg: PipelineConfig,
                     rows=None, jobs: int = 1) -> dict:
    """Descriptor vectors for every distinct path in `rows` (default: all).

    Returns {path: vector}.  Work is split across threads when jobs > 1;
    each image's pipeline is independent, so the result is identical for
    any job count.
    """
    if rows is None:
        rows = manifest.rows
    paths = list(dict.fromkeys(r.path for r in rows))  # stable dedupe
    params = cfg.descriptor_params()
    bank = build_bank(cfg.gabor_params())

    def one(path: str) -> np.ndarray:
        img = load_image(manifest.resolve(ManifestRow(path, "-", "train")),
                         size=cfg.size, illum="none")
        return extract(img, params, bank, illum=cfg.illum)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            vectors = list(pool.map(one, paths))
    else:
        vectors = [one(p) for p in paths]
    return dict(zip(paths, vectors))


def run_protocol(manifest: DatasetManifest, cfg: PipelineConfig,
                 jobs: int = 1) -> EvalReport:
    """Closed-set identification + verification over a manifest."""
    train = manifest.select("train")
    gallery_rows = manifest.select("gallery")
    probes = manifest.select("probe")
    if not train or not gallery_rows or not probes:
        raise ProtocolViolationError("manifest needs train, gallery and probe rows")
    train_paths = {r.path for r in train}
    leaked = sorted({r.path for r in probes} & train_paths)
    if leaked:
        raise ProtocolViolationError(f"probe paths appear in training: {leaked}")
    enrolled = {r.subject for r in gallery_rows}
    unknown = sorted({r.subject for r in probes} - enrolled)
    if unknown:
        raise ProtocolViolationError(
            f"closed-set protocol: probe subjects missing from gallery: {unknown}"
        )

    features = extract_features(manifest, cfg, jobs=jobs)
    train_x = np.stack([features[r.path] for r in train])
    train_labels = [r.subject for r in train]
    dims = cfg.dims if cfg.dims > 0 else None
    pca_keep = cfg.pca_keep if cfg.pca_keep > 0 else None
    model = fit_method(
        cfg.method, train_x, train_labels,
        dims=dims, knn_k=cfg.knn_k, alpha=cfg.alpha,
        heat_t=cfg.heat_t_value(), var_keep=cfg.pre_var, pca_keep=pca_keep,
    )

    gallery = Gallery(
        project(model, np.stack([features[r.path] for r in gallery_rows])),
        [f"{r.subject}/{r.path}" for r in gallery_rows],
        [r.subject for r in gallery_rows],
    )
    probe_vectors = project(model, np.stack([features[r.path] for r in probes]))
    probe_subjects = [r.subject for r in probes]

    rankings = [identify(gallery, v, metric=cfg.metric) for v in probe_vectors]
    curve = cmc(rankings, probe_subjects)
    genuine, impostor = verify_scores(
        gallery, zip(probe_vectors, probe_subjects), metric=cfg.metric
    )
    points = roc(genuine, impostor)
    report = EvalReport(
        rank1=curve[0],
        cmc=tuple(curve),
        eer=eer(points),
        vr_at={t: vr_at_far(points, t) for t in VR_TARGETS},
        roc=tuple(points),
        counts={
            "train": len(train),
            "gallery": len(gallery_rows),
            "probe": len(probes),
            "subjects": len({r.subject for r in manifest.rows}),
            "genuine": len(genuine),
            "impostor": len(impostor),
        },
        config=cfg.to_flat_dict(),
    )
    log.info("protocol done: rank1=%.4f eer=%.4f", report.rank1, report.eer)
    return report
