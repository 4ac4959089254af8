"""Synthetic corpus generation: layout, determinism, and separability."""

import numpy as np
import pytest

from conftest import CORPUS_CLASSES, CORPUS_PER_CLASS, CORPUS_SEED
from leggm.errors import ProtocolViolationError
from leggm.evaluation import load_manifest
from leggm.imaging import decode_pgm
from leggm.synth import SIZE, synth_dataset


def corpus_bytes(root):
    return {p.name: p.read_bytes() for p in sorted(root.iterdir())}


class TestLayout:
    def test_minimal_corpus(self, tmp_path):
        manifest_path = synth_dataset(2, 2, 7, tmp_path / "c")
        files = sorted(p.name for p in (tmp_path / "c").iterdir())
        assert files == [
            "manifest.csv",
            "s000_00.pgm", "s000_01.pgm",
            "s001_00.pgm", "s001_01.pgm",
        ]
        m = load_manifest(manifest_path)
        assert len(m.rows) == 6
        assert len(m.select("train")) == 2
        assert len(m.select("gallery")) == 2
        assert len(m.select("probe")) == 2

    def test_train_and_gallery_share_files(self, corpus_manifest):
        train = {r.path for r in corpus_manifest.select("train")}
        gallery = {r.path for r in corpus_manifest.select("gallery")}
        assert train == gallery

    def test_probe_is_held_out(self, corpus_manifest):
        train = {r.path for r in corpus_manifest.select("train")}
        probes = corpus_manifest.select("probe")
        assert len(probes) == CORPUS_CLASSES
        for row in probes:
            assert row.path not in train
            assert row.path.endswith(f"_{CORPUS_PER_CLASS - 1:02d}.pgm")

    def test_every_subject_has_probe_and_gallery(self, corpus_manifest):
        subjects = {r.subject for r in corpus_manifest.rows}
        assert len(subjects) == CORPUS_CLASSES
        assert {r.subject for r in corpus_manifest.select("probe")} == subjects
        assert {r.subject for r in corpus_manifest.select("gallery")} == subjects


class TestImages:
    def test_decodable_unit_range(self, corpus_dir, corpus_manifest):
        for row in corpus_manifest.rows[:4]:
            img = decode_pgm(corpus_manifest.resolve(row).read_bytes())
            assert img.shape == (SIZE, SIZE)
            assert img.dtype == np.float64
            assert 0.0 <= img.min() and img.max() <= 1.0

    def test_images_have_structure(self, corpus_dir, corpus_manifest):
        # bars and rings must survive quantization: plenty of distinct levels
        row = corpus_manifest.rows[0]
        img = decode_pgm(corpus_manifest.resolve(row).read_bytes())
        assert len(np.unique(img)) > 50
        assert img.std() > 0.02


class TestDeterminism:
    def test_same_seed_same_bytes(self, tmp_path):
        synth_dataset(3, 2, 99, tmp_path / "a")
        synth_dataset(3, 2, 99, tmp_path / "b")
        assert corpus_bytes(tmp_path / "a") == corpus_bytes(tmp_path / "b")

    def test_different_seed_differs(self, tmp_path):
        synth_dataset(3, 2, 99, tmp_path / "a")
        synth_dataset(3, 2, 100, tmp_path / "b")
        a = corpus_bytes(tmp_path / "a")
        b = corpus_bytes(tmp_path / "b")
        assert a.keys() == b.keys()
        assert any(a[k] != b[k] for k in a if k.endswith(".pgm"))


class TestSeparability:
    def test_intra_class_beats_inter_class(self, corpus_dir, corpus_manifest):
        # raw-pixel distances: samples of one class sit nearer each other
        # than samples of different classes, for nearly all triples
        images = {}
        for row in corpus_manifest.rows:
            if row.path not in images:
                images[row.path] = decode_pgm(corpus_manifest.resolve(row).read_bytes())
        by_subject = {}
        for row in corpus_manifest.rows:
            by_subject.setdefault(row.subject, set()).add(row.path)
        subjects = sorted(by_subject)
        wins = total = 0
        for s in subjects:
            own = sorted(by_subject[s])
            for anchor in own:
                for positive in own:
                    if positive == anchor:
                        continue
                    intra = np.linalg.norm(images[anchor] - images[positive])
                    for other in subjects:
                        if other == s:
                            continue
                        for negative in sorted(by_subject[other]):
                            inter = np.linalg.norm(images[anchor] - images[negative])
                            total += 1
                            wins += intra < inter
        assert total == 540
        assert wins / total >= 0.95


class TestValidation:
    def test_too_few_classes(self, tmp_path):
        with pytest.raises(ProtocolViolationError):
            synth_dataset(1, 3, 0, tmp_path)

    def test_too_few_samples(self, tmp_path):
        with pytest.raises(ProtocolViolationError):
            synth_dataset(3, 1, 0, tmp_path)

    def test_creates_output_dir(self, tmp_path):
        nested = tmp_path / "deep" / "corpus"
        synth_dataset(2, 2, CORPUS_SEED, nested)
        assert (nested / "manifest.csv").exists()
