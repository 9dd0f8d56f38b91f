"""Acceptance gates: ten externally meaningful properties of the pipeline,
each pinned at a stated tolerance. One PASS/FAIL line per criterion is
printed at the end of the run (see conftest.py)."""

import hashlib
import json
import time

import numpy as np

from faceverify.cli import main
from faceverify.datasets import SynthSpec, generate_synthetic, split_subjects, synth_images
from faceverify.evalproto import roc, vr_at_far
from faceverify.fourier import ComplexSpectrum, dft2, phase_cos, spectrum
from faceverify.imgcore import smooth
from faceverify.ingi import (
    IngiParams,
    NormalizedGradient,
    gradient,
    ingi,
    integrate,
    normalize_gradient,
)
from faceverify.pipeline import train_verifier
from faceverify.subspace import KernelSpec, TrainingSet, kpca_train, pca_train, project_rows

from test_fourier import direct_centered_dft
from test_ingi import dense_poisson_solve, ncc
from test_subspace import reference_pca

SMALL_MODEL = {
    "eye_distance": 16.0,
    "out_width": 32,
    "out_height": 40,
    "eye_row": 14.0,
    "eye_center_col": 16.0,
}


def split_blocks(entries):
    by = {}
    for e in entries:
        by.setdefault(e.subject_id, []).append(e)
    train_ids, dev_ids, eval_ids = split_subjects(sorted(by))

    def pick(ids):
        return [e for s in ids for e in by[s]]

    ev = pick(eval_ids)
    gallery = [e for e in ev if e.session_tag == "controlled"]
    probes = [e for e in ev if e.session_tag == "uncontrolled"]
    return pick(train_ids), pick(dev_ids), gallery, probes


def tree_digest(root):
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def brute_force_auc(genuine, impostor):
    wins = sum(1 for g in genuine for i in impostor if g > i)
    ties = sum(1 for g in genuine for i in impostor if g == i)
    return (wins + 0.5 * ties) / (len(genuine) * len(impostor))


def test_criterion_01_illumination_invariance(acceptance_note):
    started = time.perf_counter()
    spec = SynthSpec(
        seed=11, n_subjects=17, images_per_subject=4, width=64, height=64,
        illum_strength=4.0, noise_sigma=0.01,
    )
    by = {}
    for e in synth_images(spec):
        by.setdefault(e.subject_id, []).append(e)
    params = IngiParams()
    ingi_nccs, raw_nccs = [], []
    for group in by.values():
        controlled = next(e for e in group if e.session_tag == "controlled")
        ref = ingi(controlled.image, params)
        for e in group:
            if e.session_tag == "uncontrolled":
                ingi_nccs.append(ncc(ingi(e.image, params), ref))
                raw_nccs.append(ncc(e.image, controlled.image))
    assert len(ingi_nccs) >= 50
    mean_ingi = float(np.mean(ingi_nccs))
    mean_raw = float(np.mean(raw_nccs))
    acceptance_note(1, f"ncc={mean_ingi:.4f} raw={mean_raw:.4f} pairs={len(ingi_nccs)}")
    assert mean_ingi >= 0.95
    assert mean_raw <= 0.85
    assert time.perf_counter() - started < 60.0


def test_criterion_02_scale_invariance():
    started = time.perf_counter()
    rng = np.random.default_rng(2)
    x = 0.2 + 0.6 * rng.random((64, 64))
    sigma, eps = 2.0, 0.01
    w = smooth(x, sigma)
    mask = w >= eps
    assert mask.all()  # construction keeps the weight above epsilon
    base = normalize_gradient(gradient(x), w, eps)
    for c in (0.5, 2.0):
        scaled = normalize_gradient(gradient(c * x), smooth(c * x, sigma), eps)
        assert np.max(np.abs(scaled.nx - base.nx)[mask]) < 1e-12
        assert np.max(np.abs(scaled.ny - base.ny)[mask]) < 1e-12
    assert time.perf_counter() - started < 5.0


def test_criterion_03_integration_oracle():
    started = time.perf_counter()
    i, j = np.meshgrid(np.arange(16.0), np.arange(16.0), indexing="ij")
    surface = 0.4 + 0.02 * j + 0.015 * i + 0.05 * np.sin(i / 3.0) * np.cos(j / 4.0)
    g = gradient(surface)
    n = NormalizedGradient(nx=g.gx, ny=g.gy, epsilon=0.01)
    oracle = dense_poisson_solve(n)
    jac = integrate(n, 2000)
    diff = (jac - jac.mean()) - (oracle - oracle.mean())
    assert np.max(np.abs(diff)) < 1e-3
    assert time.perf_counter() - started < 10.0


def test_criterion_04_fourier_identities():
    started = time.perf_counter()
    for seed in (3, 4, 5):
        img = np.random.default_rng(seed).random((8, 8))
        s = dft2(img)
        oracle = direct_centered_dft(img)
        assert np.max(np.abs(s.re - oracle.real)) < 1e-9
        assert np.max(np.abs(s.im - oracle.imag)) < 1e-9
        freq_energy = float((s.re**2 + s.im**2).sum())
        space_energy = img.size * float((img**2).sum())
        assert abs(freq_energy - space_energy) / space_energy < 1e-9
        rolled = np.roll(np.roll(img, 3, axis=0), 5, axis=1)
        assert np.max(np.abs(spectrum(dft2(rolled)) - spectrum(s))) < 1e-9
        phi = phase_cos(s)
        assert np.all(phi >= -1.0) and np.all(phi <= 1.0)
    point = ComplexSpectrum(
        re=np.array([[3.0]]), im=np.array([[4.0]]), width=1, height=1
    )
    assert spectrum(point)[0, 0] == 5.0
    assert phase_cos(point)[0, 0] == 0.6
    assert time.perf_counter() - started < 5.0


def test_criterion_05_subspace_equivalence():
    started = time.perf_counter()
    rng = np.random.default_rng(6)
    m = rng.standard_normal((10, 40))
    probes = rng.standard_normal((5, 40))
    train = TrainingSet(matrix=m, labels=[f"s{i}" for i in range(10)])
    k = 6

    # dual (Gram) route against the written-out covariance route
    gram = pca_train(train, k=k)
    ref_train_proj, ref_vals, ref_basis = reference_pca(m, k)
    assert np.max(np.abs(project_rows(gram, m) - ref_train_proj)) < 1e-8
    ref_probe_proj = ((probes - gram.mean) / gram.scale) @ ref_basis
    assert np.max(np.abs(project_rows(gram, probes) - ref_probe_proj)) < 1e-8
    assert np.allclose(gram.eigenvalues, ref_vals, atol=1e-8)

    # linear-kernel route against plain PCA, up to per-component sign
    lin = kpca_train(train, kernel=KernelSpec("linear"), k=k)
    for rows in (m, probes):
        a = project_rows(lin, rows)
        b = project_rows(gram, rows)
        for col in range(k):
            sign = 1.0 if float(a[:, col] @ b[:, col]) >= 0 else -1.0
            assert np.max(np.abs(a[:, col] - sign * b[:, col])) < 1e-8
    assert time.perf_counter() - started < 5.0


def test_criterion_06_self_match(tmp_path, capsys):
    started = time.perf_counter()
    data = tmp_path / "data"
    spec = SynthSpec(seed=5, n_subjects=6, images_per_subject=3, width=48, height=48)
    generate_synthetic(spec, data)
    cfg = {
        "ingi": {"iterations": 40},
        "face_models": [SMALL_MODEL],
        "fusion": {"path": "simple", "tau": 0.85},
        "paths": {
            "train": str(data / "train.csv"),
            "dev": str(data / "dev.csv"),
            "model_dir": str(tmp_path / "models"),
        },
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["train", "--config", str(cfg_path)]) == 0

    self_cfg = tmp_path / "self.json"
    self_cfg.write_text(json.dumps({"paths": {
        "gallery": str(data / "gallery.csv"),
        "probe": str(data / "gallery.csv"),
        "model_dir": str(tmp_path / "models"),
    }}))
    assert main(["verify", "--config", str(self_cfg)]) == 0
    lines = [
        l for l in capsys.readouterr().out.splitlines() if l.startswith("probe ")
    ]
    assert len(lines) == 2
    for position, line in enumerate(lines, start=1):
        fields = dict(
            part.split("=", 1) for part in line.split(": ", 1)[1].split(" ")
        )
        assert float(fields["distance"]) < 1e-9
        assert fields["decision"] == "accept"
        assert int(fields["index"]) == position
    assert time.perf_counter() - started < 5.0


def test_criterion_07_fusion_gain(acceptance_note):
    started = time.perf_counter()
    spec = SynthSpec(
        seed=23, n_subjects=14, images_per_subject=5, width=64, height=64,
        illum_strength=4.0, noise_sigma=0.04,
    )
    train, dev, gallery, probes = split_blocks(synth_images(spec))
    assert len({e.subject_id for e in gallery}) >= 4  # >= 5 subjects per block overall
    verifier = train_verifier({}, train, dev)

    cache = {id(e): verifier.projections(e) for e in (*gallery, *probes)}
    genuine_sims, impostor_sims = [], []
    genuine_fused, impostor_fused = [], []
    for p in probes:
        for g in gallery:
            score, _, sims = verifier.pair_score(cache[id(p)], cache[id(g)])
            if p.subject_id == g.subject_id:
                genuine_sims.append(sims)
                genuine_fused.append(score)
            else:
                impostor_sims.append(sims)
                impostor_fused.append(score)
    genuine_sims = np.array(genuine_sims)
    impostor_sims = np.array(impostor_sims)
    singles = [
        brute_force_auc(genuine_sims[:, c], impostor_sims[:, c])
        for c in range(len(verifier.classifier_ids))
    ]
    fused = brute_force_auc(genuine_fused, impostor_fused)
    acceptance_note(7, f"fused={fused:.4f} best_single={max(singles):.4f}")
    assert fused >= max(singles) - 0.005
    assert time.perf_counter() - started < 120.0


def test_criterion_08_preprocessing_ablation(acceptance_note):
    spec = SynthSpec(
        seed=11, n_subjects=12, images_per_subject=4, width=64, height=64,
        illum_strength=4.0, noise_sigma=0.01,
    )
    train, dev, gallery, probes = split_blocks(synth_images(spec))
    results = {}
    for use_ingi in (True, False):
        cfg = {"use_ingi": use_ingi, "fusion": {"path": "simple", "tau": 0.85}}
        verifier = train_verifier(cfg, train, dev)
        scores = verifier.experiment(gallery, probes)
        curve = roc(scores)
        vr = vr_at_far(curve, 0.01)
        genuine_mean = float(np.mean([r.score for r in scores.genuine]))
        results[use_ingi] = (vr, genuine_mean)
    vr_on, mean_on = results[True]
    vr_off, mean_off = results[False]
    acceptance_note(8, f"vr_on={vr_on:.4f} vr_off={vr_off:.4f}")
    assert vr_on >= vr_off
    assert mean_on - mean_off >= 0.0


def test_criterion_09_roc_exactness():
    started = time.perf_counter()
    from faceverify.evalproto import ScoreRow, ScoreSet

    for seed in (7, 8, 9):
        rng = np.random.default_rng(seed)
        gen = np.round(rng.random(50), 2)
        imp = np.round(rng.random(50), 2)
        s = ScoreSet(
            genuine=tuple(
                ScoreRow(f"p{i}", f"g{i}", v, 1.0 - v) for i, v in enumerate(gen)
            ),
            impostor=tuple(
                ScoreRow(f"p{i}", f"x{i}", v, 1.0 - v) for i, v in enumerate(imp)
            ),
        )
        curve = roc(s)
        expected = [(0.0, 0.0)]
        for theta in np.unique(np.concatenate([gen, imp]))[::-1]:
            expected.append(
                (float(np.mean(imp >= theta)), float(np.mean(gen >= theta)))
            )
        assert curve.points == tuple(expected)
        for target in (0.001, 0.01, 0.1, 0.25, 1.0):
            best = max((v for f, v in expected if f <= target), default=0.0)
            assert vr_at_far(curve, target) == best
    assert time.perf_counter() - started < 5.0


def test_criterion_10_determinism(tmp_path):
    digests = []
    for run in ("a", "b"):
        root = tmp_path / run
        data = root / "data"
        assert main([
            "synth", "--out", str(data), "--seed", "9", "--subjects", "6",
            "--per-subject", "3", "--width", "48", "--height", "48",
        ]) == 0
        cfg = {
            "ingi": {"iterations": 40},
            "face_models": [SMALL_MODEL],
            "paths": {
                "train": str(data / "train.csv"),
                "dev": str(data / "dev.csv"),
                "gallery": str(data / "gallery.csv"),
                "probe": str(data / "probe.csv"),
                "model_dir": str(root / "models"),
                "report_dir": str(root / "report"),
            },
        }
        cfg_path = root / "config.json"
        cfg_path.write_text(json.dumps(cfg))
        assert main(["train", "--config", str(cfg_path)]) == 0
        assert main(["evaluate", "--config", str(cfg_path)]) == 0
        digests.append(
            (
                tree_digest(data),
                tree_digest(root / "models"),
                tree_digest(root / "report"),
            )
        )
    assert digests[0] == digests[1]
