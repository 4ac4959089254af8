"""Command-line front end.

One executable, one subcommand per pipeline stage:

    synth     generate a synthetic labelled corpus
    extract   manifest -> LEGF feature file
    fit       LEGF features -> LGSM subspace model
    identify  ranked candidates per probe (CSV)
    verify    genuine/impostor pools -> EER and VR@FAR (JSON)
    evaluate  full protocol -> JSON report
    bank      inspect the Gabor kernel family
    dump      write an intermediate stage as a PGM

Exit codes: 0 success, 2 usage, 3 bad data, 4 numerical failure.  Set
LEGGM_LOG=error|info|debug to control stderr logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import descriptor as descriptor_mod
from . import evaluation, gabor, imaging, pisp, recognition, subspace, synth
from .config import PipelineConfig, load_config
from .errors import DataError, LeggmError, NumericError

log = logging.getLogger(__name__)

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    level = os.environ.get("LEGGM_LOG", "error").lower()
    if level not in _LOG_LEVELS:
        print(f"warning: LEGGM_LOG={level!r} not one of error|info|debug", file=sys.stderr)
        level = "error"
    logging.basicConfig(
        level=_LOG_LEVELS[level],
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load_cfg(args) -> PipelineConfig:
    from dataclasses import replace

    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    if getattr(args, "illum", None):
        cfg = replace(cfg, illum=args.illum)
    if getattr(args, "downsample", None):
        cfg = replace(cfg, downsample=args.downsample)
    return cfg.validate()


def _jobs(args) -> int:
    if args.jobs is not None:
        if args.jobs < 1:
            raise DataError(f"--jobs must be >= 1, got {args.jobs}")
        return args.jobs
    return os.cpu_count() or 1


# --- subcommands -------------------------------------------------------------

def cmd_synth(args) -> int:
    manifest = synth.synth_dataset(args.classes, args.per_class, args.seed, args.out)
    print(manifest)
    return 0


def cmd_extract(args) -> int:
    cfg = _load_cfg(args)
    manifest = evaluation.load_manifest(args.manifest)
    rows = manifest.rows
    if args.role:
        rows = [r for r in rows if r.role in args.role]
        if not rows:
            raise DataError(f"no manifest rows with role in {args.role}")
    features = evaluation.extract_features(manifest, cfg, rows=rows, jobs=_jobs(args))
    ids, vectors = [], []
    for row in rows:
        sample_id = f"{row.subject}/{row.path}"
        if sample_id not in ids:
            ids.append(sample_id)
            vectors.append(features[row.path])
    descriptor_mod.write_features(args.out, np.stack(vectors), ids)
    log.info("wrote %d vectors of dim %d to %s", len(ids), vectors[0].size, args.out)
    return 0


def _read_labelled_features(path):
    vectors, ids = descriptor_mod.read_features(path)
    subjects = [s.split("/", 1)[0] for s in ids]
    return vectors, ids, subjects


def cmd_fit(args) -> int:
    cfg = _load_cfg(args)
    vectors, _, subjects = _read_labelled_features(args.features)
    heat_t = cfg.heat_t_value()
    if args.heat_t is not None:
        heat_t = None if args.heat_t == "binary" else (
            "auto" if args.heat_t == "auto" else float(args.heat_t))
    model = subspace.fit_method(
        args.method or cfg.method, vectors, subjects,
        dims=args.dims or (cfg.dims if cfg.dims > 0 else None),
        knn_k=args.knn or cfg.knn_k,
        alpha=args.alpha if args.alpha is not None else cfg.alpha,
        heat_t=heat_t,
        var_keep=cfg.pre_var,
        pca_keep=args.pca_keep or (cfg.pca_keep if cfg.pca_keep > 0 else None),
    )
    subspace.save_model(args.out, model)
    log.info("fitted %s: %d -> %d dims", model.method, model.input_dim, model.output_dim)
    return 0


def _build_gallery(model, path):
    vectors, ids, subjects = _read_labelled_features(path)
    return recognition.Gallery(subspace.project(model, vectors), ids, subjects)


def cmd_identify(args) -> int:
    model = subspace.load_model(args.model)
    gallery = _build_gallery(model, args.gallery)
    probe_vectors, probe_ids, _ = _read_labelled_features(args.probe)
    top = args.top if args.top else len(gallery)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        print("probe_id,rank,subject,score", file=out)
        for probe_id, vector in zip(probe_ids, subspace.project(model, probe_vectors)):
            for rank, match in enumerate(
                recognition.identify(gallery, vector, metric=args.metric, k=top), start=1
            ):
                print(f"{probe_id},{rank},{match.subject},{match.score:.17g}", file=out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_verify(args) -> int:
    model = subspace.load_model(args.model)
    gallery = _build_gallery(model, args.gallery)
    probe_vectors, _, probe_subjects = _read_labelled_features(args.probe)
    genuine, impostor = recognition.verify_scores(
        gallery,
        zip(subspace.project(model, probe_vectors), probe_subjects),
        metric=args.metric,
    )
    points = evaluation.roc(genuine, impostor)
    result = {
        "eer": evaluation.eer(points),
        "vr_at": {f"{t:g}": evaluation.vr_at_far(points, t) for t in evaluation.VR_TARGETS},
        "genuine": len(genuine),
        "impostor": len(impostor),
    }
    text = json.dumps(result, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_cfg(args)
    manifest = evaluation.load_manifest(args.manifest)
    report = evaluation.run_protocol(manifest, cfg, jobs=_jobs(args))
    Path(args.report).write_bytes(
        (json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n").encode("utf-8")
    )
    if args.emit_cmc:
        lines = ["rank,rate"] + [f"{r},{v:.17g}" for r, v in enumerate(report.cmc, 1)]
        Path(args.emit_cmc).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if args.emit_roc:
        lines = ["threshold,far,frr"] + [
            f"{p.threshold:.17g},{p.far:.17g},{p.frr:.17g}" for p in report.roc
        ]
        Path(args.emit_roc).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"rank1={report.rank1:.4f} eer={report.eer:.4f} -> {args.report}")
    return 0


def cmd_bank(args) -> int:
    cfg = _load_cfg(args)
    bank = gabor.build_bank(cfg.gabor_params())
    p = bank.params
    print("mu,nu,wave_magnitude,orientation,dc_residue")
    for mu in range(p.n_scales):
        for nu in range(p.n_orients):
            k = bank.kernels[bank.index(mu, nu)]
            print(f"{mu},{nu},{gabor.wave_magnitude(mu, p):.12g},"
                  f"{gabor.orientation_angle(nu, p):.12g},{gabor.dc_residue(k):.6g}")
    if args.dump_dir:
        out = Path(args.dump_dir)
        out.mkdir(parents=True, exist_ok=True)
        for mu in range(p.n_scales):
            for nu in range(p.n_orients):
                k = bank.kernels[bank.index(mu, nu)]
                for part, grid in (("re", k.real), ("im", k.imag)):
                    (out / f"kernel_{mu}_{nu}_{part}.pgm").write_bytes(
                        imaging.encode_pgm(_rescale(grid))
                    )
    return 0


def _rescale(grid: np.ndarray) -> np.ndarray:
    lo = float(grid.min())
    hi = float(grid.max())
    if hi <= lo:
        log.info("degenerate range [%g, %g]; dumping zeros", lo, hi)
        return np.zeros_like(grid)
    log.info("affine rescale: offset %g, scale %g", -lo, 1.0 / (hi - lo))
    return (grid - lo) / (hi - lo)


def cmd_dump(args) -> int:
    cfg = _load_cfg(args)
    img = imaging.load_image(args.input, size=cfg.size, illum="none")
    gray = imaging.illum_normalize(img) if cfg.illum == "histeq" else img
    if args.stage == "gray":
        grid = gray
    else:
        structure = pisp.extract_pisp(gray, cfg.pisp_params())
        grid = structure if args.stage == "pisp" else pisp.embed(structure, gray)
    Path(args.out).write_bytes(imaging.encode_pgm(_rescale(grid)))
    return 0


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leggm",
        description="Edge-gradient Gabor-magnitude face descriptor pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract descriptor vectors from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--role", action="append", choices=evaluation.ROLES,
                   help="restrict to one or more roles (default: all rows)")
    p.add_argument("--illum", choices=["histeq", "none"])
    p.add_argument("--downsample", choices=["blockmean", "bilinear"])
    p.add_argument("--config")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("fit", help="fit a subspace model on extracted features")
    p.add_argument("--method", choices=subspace.METHODS)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dims", type=int)
    p.add_argument("--knn", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--heat-t")
    p.add_argument("--pca-keep", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("identify", help="rank gallery candidates per probe")
    p.add_argument("--model", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--probe", required=True)
    p.add_argument("--top", type=int)
    p.add_argument("--metric", choices=recognition.METRICS, default="cosine")
    p.add_argument("--out")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("verify", help="verification pools and operating points")
    p.add_argument("--model", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--probe", required=True)
    p.add_argument("--metric", choices=recognition.METRICS, default="cosine")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("evaluate", help="run the full protocol on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--config")
    p.add_argument("--emit-cmc")
    p.add_argument("--emit-roc")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bank", help="inspect the Gabor kernel family")
    bank_sub = p.add_subparsers(dest="bank_command", required=True)
    pi = bank_sub.add_parser("inspect", help="per-kernel parameters and DC residue")
    pi.add_argument("--config")
    pi.add_argument("--dump-dir")
    pi.set_defaults(func=cmd_bank)

    p = sub.add_parser("dump", help="write an intermediate stage as PGM")
    p.add_argument("--input", required=True)
    p.add_argument("--stage", choices=["gray", "pisp", "embedded"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_dump)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (DataError, ValueError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except LeggmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
