"""Pipeline configuration: flat ``section.key = value`` files.

Every stage knob lives under a dotted section name; unknown keys are
rejected rather than ignored so typos fail loudly, and invariants are
re-checked after parsing so a loaded config can never build an
inconsistent pipeline.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

from .descriptor import DescriptorParams
from .errors import (
    ConfigParseError,
    DataError,
    InvariantViolationError,
    IoFailureError,
    UnknownKeyError,
)
from .gabor import GaborParams
from .pisp import PispParams
from .recognition import METRICS
from .subspace import METHODS

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class PipelineConfig:
    illum: str = "histeq"
    size: int = 128
    pisp_sigma1: float = 1.0
    pisp_sigma2: float = 2.0
    pisp_size1: int = 7
    pisp_size2: int = 13
    gabor_sigma: float = SQRT2
    gabor_l_max: float = 0.25
    gabor_s_f: float = SQRT2
    gabor_scales: int = 5
    gabor_orients: int = 8
    p: int = 64
    downsample: str = "blockmean"
    normalize: bool = True
    method: str = "pca_lda"
    dims: int = 0           # 0 = automatic (classes - 1)
    knn_k: int = 5
    alpha: float = 0.5
    heat_t: str = "binary"  # "binary", "auto", or a positive number
    pre_var: float = 0.999
    pca_keep: int = 0       # 0 = automatic (all that the data supports)
    metric: str = "cosine"

    # -- derived parameter bundles -------------------------------------------

    def pisp_params(self) -> PispParams:
        return PispParams(self.pisp_sigma1, self.pisp_sigma2,
                          self.pisp_size1, self.pisp_size2)

    def gabor_params(self) -> GaborParams:
        return GaborParams(self.gabor_sigma, self.gabor_l_max, self.gabor_s_f,
                           self.gabor_scales, self.gabor_orients,
                           self.size, self.size)

    def descriptor_params(self) -> DescriptorParams:
        return DescriptorParams(self.pisp_params(), self.gabor_params(),
                                self.p, self.downsample, self.normalize)

    def heat_t_value(self):
        """None for binary affinity, 'auto', or the numeric t."""
        if self.heat_t == "binary":
            return None
        if self.heat_t == "auto":
            return "auto"
        return float(self.heat_t)

    def validate(self) -> "PipelineConfig":
        if self.illum not in ("histeq", "none"):
            raise InvariantViolationError(f"imaging.illum must be histeq|none, got {self.illum!r}")
        if self.size < 3:
            raise InvariantViolationError(f"imaging.size must be >= 3, got {self.size}")
        if self.downsample not in ("blockmean", "bilinear"):
            raise InvariantViolationError(
                f"descriptor.downsample must be blockmean|bilinear, got {self.downsample!r}")
        if self.method not in METHODS:
            raise InvariantViolationError(
                f"subspace.method must be one of {'|'.join(METHODS)}, got {self.method!r}")
        if self.metric not in METRICS:
            raise InvariantViolationError(
                f"recognition.metric must be one of {'|'.join(METRICS)}, got {self.metric!r}")
        if self.dims < 0:
            raise InvariantViolationError(f"subspace.dims must be >= 0, got {self.dims}")
        if self.knn_k < 1:
            raise InvariantViolationError(f"subspace.knn_k must be >= 1, got {self.knn_k}")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvariantViolationError(f"subspace.alpha must lie in [0,1], got {self.alpha}")
        if not 0.0 < self.pre_var <= 1.0:
            raise InvariantViolationError(f"subspace.pre_var must lie in (0,1], got {self.pre_var}")
        if self.pca_keep < 0:
            raise InvariantViolationError(f"subspace.pca_keep must be >= 0, got {self.pca_keep}")
        if self.heat_t not in ("binary", "auto"):
            try:
                t = float(self.heat_t)
            except ValueError:
                raise InvariantViolationError(
                    f"subspace.heat_t must be binary|auto|<number>, got {self.heat_t!r}") from None
            if t <= 0.0:
                raise InvariantViolationError(f"subspace.heat_t must be positive, got {t}")
        # the parameter bundles enforce the cross-field rules (sigma ordering,
        # odd sizes, square p, divisibility); surface theirs as config errors
        try:
            self.descriptor_params()
        except DataError as exc:
            raise InvariantViolationError(str(exc)) from exc
        return self

    def to_flat_dict(self) -> dict:
        return {key: getattr(self, name) for key, (name, _) in sorted(KEYMAP.items())}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# config key -> (dataclass field, parser)
KEYMAP = {
    "imaging.illum": ("illum", str),
    "imaging.size": ("size", int),
    "pisp.sigma1": ("pisp_sigma1", float),
    "pisp.sigma2": ("pisp_sigma2", float),
    "pisp.size1": ("pisp_size1", int),
    "pisp.size2": ("pisp_size2", int),
    "gabor.sigma": ("gabor_sigma", float),
    "gabor.l_max": ("gabor_l_max", float),
    "gabor.s_f": ("gabor_s_f", float),
    "gabor.scales": ("gabor_scales", int),
    "gabor.orients": ("gabor_orients", int),
    "descriptor.p": ("p", int),
    "descriptor.downsample": ("downsample", str),
    "descriptor.normalize": ("normalize", _parse_bool),
    "subspace.method": ("method", str),
    "subspace.dims": ("dims", int),
    "subspace.knn_k": ("knn_k", int),
    "subspace.alpha": ("alpha", float),
    "subspace.heat_t": ("heat_t", str),
    "subspace.pre_var": ("pre_var", float),
    "subspace.pca_keep": ("pca_keep", int),
    "recognition.metric": ("metric", str),
}


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Parse key=value lines ('#' comments) on top of defaults and validate."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigParseError(f"line {lineno}: expected key = value, got {raw!r}")
        key = key.strip()
        value = value.strip()
        if key not in KEYMAP:
            raise UnknownKeyError(f"line {lineno}: unknown key {key!r}")
        name, parser = KEYMAP[key]
        try:
            values[name] = parser(value)
        except ValueError as exc:
            raise ConfigParseError(f"line {lineno}: bad value for {key}: {exc}") from exc
    cfg = replace(base or PipelineConfig(), **values)
    return cfg.validate()


def load_config(path) -> PipelineConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailureError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text)
    log.info("resolved config: %s", cfg.to_flat_dict())
    return cfg
