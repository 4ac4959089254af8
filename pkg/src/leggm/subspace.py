"""Linear subspace learning over descriptor vectors.

Implements PCA, the PCA+LDA composite, supervised locality-preserving
projections (sLPP) and locality-sensitive discriminant analysis (LSDA),
the latter two under either plain linear graph embedding (LGE) or its
orthogonal variant (OLGE, sequential deflation).  They all funnel into one
generalized symmetric eigensolver so B-orthonormality, regularization,
ordering and sign conventions are applied uniformly -- models are bitwise
reproducible for identical inputs.

Model files use the ``LGSM`` format: little-endian header (magic, u32
version, u8 method tag, u32 input dim D, u32 output dim d), D float64 mean,
d*D float64 projection rows, then a u32-length-prefixed UTF-8 JSON
hyperparameter record.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceFailureError,
    DimensionMismatchError,
    IoFailureError,
    KeepTooLargeError,
    KTooLargeError,
    MalformedPayloadError,
    NotSPDError,
    SingularConstraintError,
    SingularScatterError,
)

log = logging.getLogger(__name__)

METHODS = ("pca", "pca_lda", "slpp_lge", "slpp_olge", "lsda_lge", "lsda_olge")
METHOD_TAGS = {name: tag for tag, name in enumerate(METHODS)}

MODEL_MAGIC = b"LGSM"
MODEL_VERSION = 1

# scale factor for the ridge added to a constraint matrix that fails Cholesky
EPS_SCALE = 1e-8
# accepted relative residual of every generalized eigenpair
RESIDUAL_BOUND = 1e-8


@dataclass(frozen=True)
class SubspaceModel:
    method: str
    mean: np.ndarray        # (D,)
    projection: np.ndarray  # (d, D), rows are directions in input space
    hyperparams: dict

    @property
    def input_dim(self) -> int:
        return self.mean.size

    @property
    def output_dim(self) -> int:
        return self.projection.shape[0]


def project(model: SubspaceModel, x: np.ndarray) -> np.ndarray:
    """Map one vector or a stack of row vectors through the model."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise DimensionMismatchError(
            f"vector dim {x.shape[-1]} vs model input dim {model.input_dim}"
        )
    return (x - model.mean) @ model.projection.T


# --- generalized symmetric eigensolver ---------------------------------------

def geneig_sym(a: np.ndarray, b: np.ndarray, k: int, which: str = "largest"):
    """Solve A v = lambda B v for symmetric A and SPD (or repairable) B.

    Returns (eigenvalues (k,), eigenvectors (D, k) as columns).  Vectors are
    B-orthonormal; each is sign-fixed so its largest-magnitude entry is
    positive.  Ordering follows `which` with ties kept in ascending-lambda
    LAPACK order.  A ridge EPS_SCALE*trace(B)/D is added once if B fails
    Cholesky; residuals beyond RESIDUAL_BOUND*|A|_2 raise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise DimensionMismatchError(f"bad problem shapes {a.shape} vs {b.shape}")
    dim = a.shape[0]
    if not 1 <= k <= dim:
        raise KeepTooLargeError(f"k={k} outside 1..{dim}")
    if which not in ("largest", "smallest"):
        raise ValueError(f"which must be 'largest' or 'smallest', got {which!r}")
    scale = max(1.0, float(np.abs(a).max()))
    if float(np.abs(a - a.T).max()) > 1e-10 * scale:
        raise ValueError("A is not symmetric within 1e-10")
    a = 0.5 * (a + a.T)
    b = 0.5 * (b + b.T)
    b = _ensure_spd(b)
    try:
        w, v = scipy.linalg.eigh(a, b)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise ConvergenceFailureError(f"generalized eigensolve failed: {exc}") from exc
    a_norm = float(np.linalg.norm(a, 2))
    residual = np.linalg.norm(a @ v - (b @ v) * w[None, :], axis=0)
    if np.any(residual > RESIDUAL_BOUND * max(a_norm, np.finfo(float).tiny)):
        raise ConvergenceFailureError(
            f"eigenpair residual {residual.max():.3e} exceeds "
            f"{RESIDUAL_BOUND:.0e} * |A| = {RESIDUAL_BOUND * a_norm:.3e}"
        )
    if which == "largest":
        order = np.argsort(-w, kind="stable")[:k]
    else:
        order = np.argsort(w, kind="stable")[:k]
    return w[order], _fix_signs(v[:, order])


def _ensure_spd(b: np.ndarray) -> np.ndarray:
    try:
        np.linalg.cholesky(b)
        return b
    except np.linalg.LinAlgError:
        pass
    dim = b.shape[0]
    eps = EPS_SCALE * float(np.trace(b)) / dim
    if eps <= 0.0:
        eps = EPS_SCALE  # zero-trace constraint: fall back to an absolute ridge
    b_reg = b + eps * np.eye(dim)
    log.debug("constraint matrix not SPD; added ridge %.3e", eps)
    try:
        np.linalg.cholesky(b_reg)
        return b_reg
    except np.linalg.LinAlgError as exc:
        raise NotSPDError(f"constraint matrix not SPD even with ridge {eps:.3e}") from exc


def _fix_signs(v: np.ndarray) -> np.ndarray:
    """Flip eigenvector columns so the largest-|entry| coordinate is positive."""
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


# --- PCA ---------------------------------------------------------------------

def fit_pca(x: np.ndarray, keep: int) -> SubspaceModel:
    """Top-`keep` principal directions (population covariance ordering)."""
    x = np.asarray(x, dtype=np.float64)
    n, dim = x.shape
    if n < 2:
        raise KeepTooLargeError("PCA needs at least two samples")
    if not 1 <= keep <= min(dim, n - 1):
        raise KeepTooLargeError(f"keep={keep} outside 1..min({dim}, {n - 1})")
    mean = x.mean(axis=0)
    _, _, vt = np.linalg.svd(x - mean, full_matrices=False)
    comps = _fix_signs(vt[:keep].T).T
    return SubspaceModel("pca", mean, comps, {"pca_keep": keep})


def _pca_pre(x: np.ndarray, keep: int | None = None, var_keep: float | None = None):
    """Rank-capped PCA basis used as a pre-projection by the supervised fits.

    Either a target dimension or a retained-variance fraction is given; the
    result is additionally capped at the numerical rank so downstream scatter
    and graph matrices are built in a non-degenerate coordinate system.
    """
    n, dim = x.shape
    mean = x.mean(axis=0)
    xc = x - mean
    _, s, vt = np.linalg.svd(xc, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        raise KeepTooLargeError("training data carries no variance")
    rank = int(np.sum(s > s[0] * max(n, dim) * np.finfo(float).eps))
    limit = min(n - 1, dim, rank)
    if keep is None:
        energy = s * s
        cum = np.cumsum(energy) / energy.sum()
        keep = int(np.searchsorted(cum, var_keep, side="left") + 1)
    keep = max(1, min(keep, limit))
    comps = _fix_signs(vt[:keep].T).T
    return mean, comps


# --- PCA + LDA ---------------------------------------------------------------

def _check_labeled(x, labels):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatchError("expected a (n_samples, dim) data matrix")
    labels = np.asarray(labels)
    if labels.shape != (x.shape[0],):
        raise DimensionMismatchError(
            f"{labels.size} labels for {x.shape[0]} samples"
        )
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise KeepTooLargeError("supervised fit needs at least two classes")
    return x, labels, classes


def _scatters(y: np.ndarray, labels: np.ndarray, classes):
    """Within- and between-class scatter matrices."""
    m = y.mean(axis=0)
    dim = y.shape[1]
    sw = np.zeros((dim, dim))
    sb = np.zeros((dim, dim))
    for c in classes:
        yc = y[labels == c]
        mc = yc.mean(axis=0)
        d = yc - mc
        sw += d.T @ d
        diff = (mc - m)[:, None]
        sb += yc.shape[0] * (diff @ diff.T)
    return sw, sb


def fit_pca_lda(x, labels) -> SubspaceModel:
    """Fisher discriminant in a PCA subspace of dimension n - C.

    The PCA depth follows the classic recipe that keeps the within-class
    scatter invertible, additionally capped by the data dimension and rank
    so degenerate corpora (few dims, duplicated vectors) stay well posed.
    The discriminant keeps the C-1 largest-ratio directions.
    """
    x, labels, classes = _check_labeled(x, labels)
    n, dim = x.shape
    n_classes = len(classes)
    if n <= n_classes:
        raise KeepTooLargeError("need more samples than classes")
    mean, comps = _pca_pre(x, keep=min(n - n_classes, dim, n - 1))
    y = (x - mean) @ comps.T
    sw, sb = _scatters(y, labels, classes)
    d_out = min(n_classes - 1, comps.shape[0])
    try:
        _, dirs = geneig_sym(sb, sw, d_out, "largest")
    except NotSPDError as exc:
        raise SingularScatterError(
            f"within-class scatter singular beyond repair: {exc}"
        ) from exc
    return SubspaceModel(
        "pca_lda",
        mean,
        dirs.T @ comps,
        {"pca_keep": int(comps.shape[0]), "epsilon": EPS_SCALE},
    )


# --- graph construction ------------------------------------------------------

def _pairwise_sq(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def supervised_affinity(x: np.ndarray, labels, heat_t=None) -> np.ndarray:
    """Same-label affinity matrix: binary, or heat-kernel weighted.

    heat_t = None  -> W_ij = 1 iff labels match (binary mode);
    heat_t = "auto" -> exp(-|xi-xj|^2 / t) with t the mean squared pairwise
    distance of the data; a positive number uses that t directly.
    """
    labels = np.asarray(labels)
    same = (labels[:, None] == labels[None, :]).astype(np.float64)
    if heat_t is None:
        return same
    d2 = _pairwise_sq(np.asarray(x, dtype=np.float64))
    if isinstance(heat_t, str):
        if heat_t != "auto":
            raise ValueError(f"heat_t must be None, 'auto' or a number, got {heat_t!r}")
        n = d2.shape[0]
        off = d2[~np.eye(n, dtype=bool)]
        t = float(off.mean()) if off.size else 1.0
        if t <= 0.0:
            t = 1.0
    else:
        t = float(heat_t)
        if t <= 0.0:
            raise ValueError(f"heat_t must be positive, got {t}")
    return np.exp(-d2 / t) * same


def lsda_graphs(x: np.ndarray, labels, k: int):
    """k-NN graph split into within-class and between-class halves.

    Each sample's k nearest neighbours (squared Euclidean, ties broken by
    index) are assigned to W_w when labels agree and to W_b otherwise; both
    matrices are then symmetrized by max so edges are undirected.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    n = x.shape[0]
    if not 1 <= k < n:
        raise KTooLargeError(f"k={k} must satisfy 1 <= k < n={n}")
    d2 = _pairwise_sq(x)
    np.fill_diagonal(d2, np.inf)
    ww = np.zeros((n, n))
    wb = np.zeros((n, n))
    for i in range(n):
        for j in np.argsort(d2[i], kind="stable")[:k]:
            if labels[i] == labels[j]:
                ww[i, j] = 1.0
            else:
                wb[i, j] = 1.0
    ww = np.maximum(ww, ww.T)
    wb = np.maximum(wb, wb.T)
    return ww, wb


# --- graph-embedding fits ----------------------------------------------------

def _embed_directions(a: np.ndarray, b: np.ndarray, d: int, which: str, variant: str):
    """d generalized eigendirections; `olge` deflates into the Euclidean
    complement of what was already found, yielding orthonormal directions."""
    if variant == "lge":
        _, dirs = geneig_sym(a, b, d, which)
        return dirs
    if variant != "olge":
        raise ValueError(f"variant must be 'lge' or 'olge', got {variant!r}")
    dim = a.shape[0]
    if d > dim:
        raise KeepTooLargeError(f"cannot extract {d} orthonormal directions in dim {dim}")
    cols = []
    for _ in range(d):
        if cols:
            q, _ = np.linalg.qr(np.column_stack(cols), mode="complete")
            basis = q[:, len(cols):]
        else:
            basis = np.eye(dim)
        _, vr = geneig_sym(basis.T @ a @ basis, basis.T @ b @ basis, 1, which)
        u = basis @ vr[:, 0]
        u = u / np.linalg.norm(u)
        cols.append(_fix_signs(u[:, None])[:, 0])
    return np.column_stack(cols)


def fit_slpp(x, labels, variant: str = "lge", heat_t=None,
             dims: int | None = None, var_keep: float = 0.999) -> SubspaceModel:
    """Supervised locality-preserving projection.

    Minimizes a^T X L X^T a against the degree constraint a^T X Dg X^T a = 1
    where L is the Laplacian of the same-label affinity graph, taking the d
    smallest generalized eigendirections after a PCA pre-projection.
    """
    x, labels, classes = _check_labeled(x, labels)
    mean, comps = _pca_pre(x, var_keep=var_keep)
    y = (x - mean) @ comps.T
    w = supervised_affinity(y, labels, heat_t)
    deg = w.sum(axis=1)
    lap = np.diag(deg) - w
    a_mat = y.T @ lap @ y
    b_mat = y.T @ (deg[:, None] * y)
    d_out = dims if dims is not None else len(classes) - 1
    d_out = max(1, min(d_out, comps.shape[0]))
    try:
        dirs = _embed_directions(a_mat, b_mat, d_out, "smallest", variant)
    except NotSPDError as exc:
        raise SingularConstraintError(f"degree constraint singular: {exc}") from exc
    hyper = {
        "heat_t": heat_t if heat_t is None or isinstance(heat_t, str) else float(heat_t),
        "pre_keep": int(comps.shape[0]),
        "epsilon": EPS_SCALE,
    }
    return SubspaceModel(f"slpp_{variant}", mean, dirs.T @ comps, hyper)


def fit_lsda(x, labels, k: int, variant: str = "lge", alpha: float = 0.5,
             dims: int | None = None, var_keep: float = 0.999) -> SubspaceModel:
    """Locality-sensitive discriminant analysis.

    Splits each sample's k-NN set into within/between-class graphs and
    maximizes a^T X (alpha L_b + (1-alpha) W_w) X^T a against the
    within-degree constraint.  When no between-class neighbours exist the
    objective degrades gracefully to pure locality preservation.
    """
    x, labels, classes = _check_labeled(x, labels)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    mean, comps = _pca_pre(x, var_keep=var_keep)
    y = (x - mean) @ comps.T
    ww, wb = lsda_graphs(y, labels, k)
    lb = np.diag(wb.sum(axis=1)) - wb
    dw = ww.sum(axis=1)
    a_mat = y.T @ (alpha * lb + (1.0 - alpha) * ww) @ y
    b_mat = y.T @ (dw[:, None] * y)
    d_out = dims if dims is not None else len(classes) - 1
    d_out = max(1, min(d_out, comps.shape[0]))
    try:
        dirs = _embed_directions(a_mat, b_mat, d_out, "largest", variant)
    except NotSPDError as exc:
        raise SingularConstraintError(f"within-degree constraint singular: {exc}") from exc
    hyper = {
        "knn_k": int(k),
        "alpha": float(alpha),
        "pre_keep": int(comps.shape[0]),
        "epsilon": EPS_SCALE,
    }
    return SubspaceModel(f"lsda_{variant}", mean, dirs.T @ comps, hyper)


def fit_method(method: str, x, labels, *, dims=None, knn_k=5, alpha=0.5,
               heat_t=None, var_keep=0.999, pca_keep=None) -> SubspaceModel:
    """Dispatch a fit by method name (the CLI/evaluation entry point)."""
    if method == "pca":
        x = np.asarray(x, dtype=np.float64)
        keep = pca_keep if pca_keep else min(x.shape[1], x.shape[0] - 1)
        return fit_pca(x, keep)
    if method == "pca_lda":
        return fit_pca_lda(x, labels)
    if method in ("slpp_lge", "slpp_olge"):
        return fit_slpp(x, labels, variant=method.split("_")[1],
                        heat_t=heat_t, dims=dims, var_keep=var_keep)
    if method in ("lsda_lge", "lsda_olge"):
        return fit_lsda(x, labels, knn_k, variant=method.split("_")[1],
                        alpha=alpha, dims=dims, var_keep=var_keep)
    raise ValueError(f"unknown subspace method {method!r}")


# --- model file I/O ----------------------------------------------------------

def save_model(path, model: SubspaceModel) -> None:
    if model.method not in METHOD_TAGS:
        raise ValueError(f"unknown method {model.method!r}")
    d, dim = model.projection.shape
    hyper = json.dumps(model.hyperparams, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(MODEL_MAGIC)
            fh.write(struct.pack("<IBII", MODEL_VERSION, METHOD_TAGS[model.method], dim, d))
            fh.write(np.ascontiguousarray(model.mean, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(model.projection, dtype="<f8").tobytes())
            fh.write(struct.pack("<I", len(hyper)))
            fh.write(hyper)
    except OSError as exc:
        raise IoFailureError(f"cannot write model to {path}: {exc}") from exc


def load_model(path) -> SubspaceModel:
    try:
        with open(path, "rb") as fh:
            payload = fh.read()
    except OSError as exc:
        raise IoFailureError(f"cannot read model from {path}: {exc}") from exc
    if payload[:4] != MODEL_MAGIC:
        raise MalformedPayloadError("not an LGSM model file (bad magic)")
    header = struct.calcsize("<IBII")
    if len(payload) < 4 + header:
        raise MalformedPayloadError("truncated LGSM header")
    version, tag, dim, d = struct.unpack("<IBII", payload[4 : 4 + header])
    if version != MODEL_VERSION:
        raise MalformedPayloadError(f"unsupported LGSM version {version}")
    methods = {tag_: name for name, tag_ in METHOD_TAGS.items()}
    if tag not in methods:
        raise MalformedPayloadError(f"unknown LGSM method tag {tag}")
    pos = 4 + header
    mean_end = pos + 8 * dim
    proj_end = mean_end + 8 * d * dim
    if len(payload) < proj_end + 4:
        raise MalformedPayloadError("truncated LGSM payload")
    mean = np.frombuffer(payload[pos:mean_end], dtype="<f8").copy()
    projection = np.frombuffer(payload[mean_end:proj_end], dtype="<f8").reshape(d, dim).copy()
    (hyper_len,) = struct.unpack("<I", payload[proj_end : proj_end + 4])
    hyper_bytes = payload[proj_end + 4 : proj_end + 4 + hyper_len]
    if len(hyper_bytes) != hyper_len:
        raise MalformedPayloadError("truncated LGSM hyperparameter record")
    try:
        hyper = json.loads(hyper_bytes.decode("utf-8")) if hyper_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedPayloadError(f"bad LGSM hyperparameter record: {exc}") from exc
    return SubspaceModel(methods[tag], mean, projection, hyper)
