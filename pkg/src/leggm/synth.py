"""Deterministic synthetic corpus for desk-scale pipeline validation.

Each class gets a prototype built from a smooth background, a handful of
oriented bars and an elliptical ring -- enough hard edges to exercise the
band-pass and Gabor stages.  Samples perturb the prototype with a small
circular shift, a gain jitter and additive Gaussian noise.  Non-probe
files are listed under both the train and gallery roles; the last sample
of every class is the probe.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .errors import ProtocolViolationError
from .imaging import encode_pgm

log = logging.getLogger(__name__)

SIZE = 128
NOISE_SIGMA = 0.02
GAIN_RANGE = (0.9, 1.1)
MAX_SHIFT = 2


def _prototype(rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:SIZE, 0:SIZE].astype(np.float64)
    img = np.full((SIZE, SIZE), 0.5)
    # smooth background: a few low-frequency cosine sheets
    for _ in range(3):
        fx, fy = rng.uniform(0.2, 1.5, size=2)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=2)
        amp = rng.uniform(0.04, 0.12)
        img += amp * np.cos(2.0 * np.pi * fx * xx / SIZE + phase[0]) \
                   * np.cos(2.0 * np.pi * fy * yy / SIZE + phase[1])
    # oriented bars with hard edges
    for _ in range(int(rng.integers(4, 8))):
        cx, cy = rng.uniform(20.0, SIZE - 20.0, size=2)
        theta = rng.uniform(0.0, np.pi)
        half_len = rng.uniform(14.0, 40.0)
        half_width = rng.uniform(1.5, 4.0)
        level = 0.5 + rng.choice([-1.0, 1.0]) * rng.uniform(0.25, 0.42)
        u = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
        v = -(xx - cx) * np.sin(theta) + (yy - cy) * np.cos(theta)
        img[(np.abs(u) < half_len) & (np.abs(v) < half_width)] = level
    # one elliptical ring
    cx, cy = rng.uniform(44.0, 84.0, size=2)
    a, b = rng.uniform(16.0, 42.0, size=2)
    level = 0.5 + rng.choice([-1.0, 1.0]) * rng.uniform(0.25, 0.42)
    q = ((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2
    img[(q > 0.82) & (q < 1.18)] = level
    return np.clip(img, 0.02, 0.98)


def _perturb(proto: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    dy, dx = rng.integers(-MAX_SHIFT, MAX_SHIFT + 1, size=2)
    img = np.roll(proto, (int(dy), int(dx)), axis=(0, 1))
    img = img * rng.uniform(*GAIN_RANGE)
    img = img + rng.normal(0.0, NOISE_SIGMA, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def synth_dataset(n_classes: int, per_class: int, seed: int, out_dir) -> Path:
    """Write PGM samples and a manifest; returns the manifest path.

    The manifest lists per class: per_class-1 files under the train role,
    the same files again under gallery, and the held-out last file as the
    probe.  The same seed reproduces every byte.
    """
    if n_classes < 2:
        raise ProtocolViolationError(f"need at least 2 classes, got {n_classes}")
    if per_class < 2:
        raise ProtocolViolationError(f"need at least 2 samples per class, got {per_class}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    lines = ["path,subject,role"]
    for ci in range(n_classes):
        subject = f"s{ci:03d}"
        proto = _prototype(rng)
        names = []
        for si in range(per_class):
            name = f"{subject}_{si:02d}.pgm"
            sample = _perturb(proto, rng)
            (out_dir / name).write_bytes(encode_pgm(sample))
            names.append(name)
        for name in names[:-1]:
            lines.append(f"{name},{subject},train")
        for name in names[:-1]:
            lines.append(f"{name},{subject},gallery")
        lines.append(f"{names[-1]},{subject},probe")
    manifest_path = out_dir / "manifest.csv"
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    log.info("synthesized %d classes x %d samples into %s",
             n_classes, per_class, out_dir)
    return manifest_path
