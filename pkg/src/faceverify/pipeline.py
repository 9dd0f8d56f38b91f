"""End-to-end verification pipeline and its configuration surface.

A configured pipeline is a bank of classifiers: one per (face model, Fourier
domain) pair. Every image is aligned to each face model, illumination
corrected (or just histogram equalized when the correction is disabled),
described by hybrid Fourier features, split by domain, and projected through
that classifier's trained subspace. A probe/gallery pair gets one Euclidean
distance and similarity per classifier; the configured fusion path turns
those into a single score.

Configuration is a JSON-compatible dict. The config hash covers everything
except the paths section, so the same processing setup keeps one identity
across machines; trained model files embed the hash and verification
refuses to run against a mismatched config.
"""

from __future__ import annotations

import copy
import hashlib
import json
import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from faceverify.datasets import ManifestEntry
from faceverify.evalproto import ScoreSet, run_experiment
from faceverify.fourier import BandSpec, FeatureVector, extract_features
from faceverify.imgcore import FaceModelConfig, align, histogram_equalize
from faceverify.ingi import IngiParams, ingi
from faceverify.matching import (
    DEFAULT_SIMPLE_TAU,
    FusionModel,
    euclidean_distance,
    fuse_scores,
    simple_fuse,
    to_similarity,
    train_fusion,
)
from faceverify.subspace import KernelSpec, SubspaceModel, TrainingSet, kpca_train, pca_train, project_rows

DOMAINS = ("ri", "spectrum", "phase")
MODEL_FORMAT = "faceverify-subspace"
FUSION_FORMAT = "faceverify-fusion"
FORMAT_VERSION = 1

DEFAULT_CONFIG = {
    "seed": 0,
    "use_ingi": True,
    "ingi": {
        "sigma": 2.0,
        "epsilon": 0.01,
        "iterations": 500,
        "anisotropic": False,
        "kappa": 0.1,
    },
    "bands": [0.25, 0.5, 0.75],
    "face_models": [
        {"eye_distance": 24.0, "out_width": 64, "out_height": 80, "eye_row": 28.0, "eye_center_col": 32.0},
        {"eye_distance": 32.0, "out_width": 64, "out_height": 80, "eye_row": 28.0, "eye_center_col": 32.0},
        {"eye_distance": 40.0, "out_width": 64, "out_height": 80, "eye_row": 28.0, "eye_center_col": 32.0},
    ],
    "subspace": {"kind": "pca", "k": None, "kernel": {"kind": "rbf", "gamma": None}},
    "fusion": {"path": "llr", "tau": DEFAULT_SIMPLE_TAU, "target_far": 0.01},
    "paths": {},
}


def resolve_config(raw: dict | None) -> dict:
    """Merge a partial config over the defaults and validate it."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    for key, value in raw.items():
        if key not in cfg:
            raise ValueError(f"unknown config key {key!r}")
        if isinstance(cfg[key], dict) and key != "paths":
            if not isinstance(value, dict):
                raise ValueError(f"config key {key!r} must be an object")
            for sub, subvalue in value.items():
                if sub not in cfg[key]:
                    raise ValueError(f"unknown config key {key}.{sub!r}")
                if isinstance(cfg[key][sub], dict) and isinstance(subvalue, dict):
                    for s2, v2 in subvalue.items():
                        if s2 not in cfg[key][sub]:
                            raise ValueError(f"unknown config key {key}.{sub}.{s2!r}")
                        cfg[key][sub][s2] = v2
                else:
                    cfg[key][sub] = subvalue
        else:
            cfg[key] = value

    # Construct the typed objects once so bad values fail here, not mid-run.
    ingi_params_from(cfg)
    face_models_from(cfg)
    bands_from(cfg)
    if cfg["subspace"]["kind"] not in ("pca", "kpca"):
        raise ValueError("subspace.kind must be 'pca' or 'kpca'")
    if cfg["subspace"]["kind"] == "kpca":
        kernel_from(cfg)
    if cfg["fusion"]["path"] not in ("llr", "simple"):
        raise ValueError("fusion.path must be 'llr' or 'simple'")
    if not 0.0 < cfg["fusion"]["target_far"] <= 1.0:
        raise ValueError("fusion.target_far must lie in (0, 1]")
    if not isinstance(cfg["paths"], dict):
        raise ValueError("paths must be an object")
    return cfg


def ingi_params_from(cfg: dict) -> IngiParams:
    return IngiParams(**cfg["ingi"])


def face_models_from(cfg: dict) -> tuple[FaceModelConfig, ...]:
    models = tuple(FaceModelConfig(**fm) for fm in cfg["face_models"])
    if not models:
        raise ValueError("at least one face model is required")
    return models


def bands_from(cfg: dict) -> tuple[BandSpec, BandSpec, BandSpec]:
    fr = cfg["bands"]
    if len(fr) != 3:
        raise ValueError("bands must list exactly 3 fractions")
    return tuple(BandSpec(f"B{i+1}", float(f)) for i, f in enumerate(fr))


def kernel_from(cfg: dict) -> KernelSpec:
    return KernelSpec(**cfg["subspace"]["kernel"])


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical config JSON, paths excluded."""
    hashed = {k: v for k, v in cfg.items() if k != "paths"}
    text = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("ascii")).hexdigest()


def classifier_ids(cfg: dict) -> tuple[str, ...]:
    return tuple(
        f"fm{m}-{d}" for m in range(len(cfg["face_models"])) for d in DOMAINS
    )


def split_domains(fv: FeatureVector) -> dict[str, FeatureVector]:
    """Slice one hybrid feature vector into its three domain vectors."""
    pieces = {d: ([], []) for d in DOMAINS}
    offset = 0
    for domain, band, length in fv.layout:
        key = "ri" if domain in ("re", "im") else domain
        values, layout = pieces[key]
        values.append(fv.values[offset : offset + length])
        layout.append((domain, band, length))
        offset += length
    return {
        d: FeatureVector(values=np.concatenate(v), layout=tuple(lay))
        for d, (v, lay) in pieces.items()
    }


@dataclass(frozen=True)
class Verifier:
    """A trained pipeline: per-classifier subspaces plus the fusion model."""

    config: dict
    config_hash: str
    subspaces: dict
    fusion: FusionModel

    @property
    def classifier_ids(self) -> tuple[str, ...]:
        return tuple(self.subspaces)

    def preprocess(self, entry: ManifestEntry, model_index: int) -> np.ndarray:
        fm = face_models_from(self.config)[model_index]
        crop = align(entry.image, entry.eyes, fm)
        if self.config["use_ingi"]:
            return ingi(crop, ingi_params_from(self.config))
        return histogram_equalize(crop)

    def features(self, entry: ManifestEntry, model_index: int) -> dict[str, FeatureVector]:
        crop = self.preprocess(entry, model_index)
        fv = extract_features(crop, bands_from(self.config))
        return split_domains(fv)

    def projections(self, entry: ManifestEntry) -> dict[str, np.ndarray]:
        """Projected vector per classifier id for one image."""
        out: dict[str, np.ndarray] = {}
        for m in range(len(self.config["face_models"])):
            per_domain = self.features(entry, m)
            for d in DOMAINS:
                cid = f"fm{m}-{d}"
                out[cid] = project_rows(self.subspaces[cid], per_domain[d].values)
        return out

    def pair_sims(
        self, probe_proj: dict[str, np.ndarray], gallery_proj: dict[str, np.ndarray]
    ) -> tuple[np.ndarray, np.ndarray]:
        """Per-classifier (distances, similarities) for one pair."""
        dists = np.array(
            [euclidean_distance(probe_proj[c], gallery_proj[c]) for c in self.classifier_ids]
        )
        sims = np.array([to_similarity(d) for d in dists])
        return dists, sims

    def pair_score(
        self, probe_proj: dict[str, np.ndarray], gallery_proj: dict[str, np.ndarray]
    ) -> tuple[float, float, np.ndarray]:
        """(fused score, mean distance, raw per-classifier similarities)."""
        dists, sims = self.pair_sims(probe_proj, gallery_proj)
        if self.config["fusion"]["path"] == "llr":
            score = float(fuse_scores(self.fusion, sims))
        else:
            score = simple_fuse(sims)
        return score, float(dists.mean()), sims

    @property
    def tau(self) -> float:
        if self.config["fusion"]["path"] == "llr":
            return self.fusion.tau
        return float(self.config["fusion"]["tau"])

    def experiment(self, gallery: list[ManifestEntry], probes: list[ManifestEntry]) -> ScoreSet:
        """All-pairs scoring with projections computed once per image."""
        cache = {id(e): self.projections(e) for e in (*gallery, *probes)}

        def score_pair(probe: ManifestEntry, entry: ManifestEntry):
            score, dist, _ = self.pair_score(cache[id(probe)], cache[id(entry)])
            return score, dist

        return run_experiment(
            gallery,
            probes,
            score_pair,
            metadata={"config_hash": self.config_hash, "fusion_path": self.config["fusion"]["path"]},
        )


def _dev_pairs(verifier_like, dev: list[ManifestEntry]):
    """Raw similarity matrices for fusion training from the dev block.

    Controlled dev images enroll, uncontrolled dev images probe; every pair
    is labeled genuine/impostor by subject equality.
    """
    dev_gallery = [e for e in dev if e.session_tag == "controlled"]
    dev_probes = [e for e in dev if e.session_tag == "uncontrolled"]
    if not dev_gallery or not dev_probes:
        raise ValueError("dev set needs controlled and uncontrolled images")
    cache = {id(e): verifier_like.projections(e) for e in (*dev_gallery, *dev_probes)}
    genuine, impostor = [], []
    for p in dev_probes:
        for g in dev_gallery:
            _, sims = verifier_like.pair_sims(cache[id(p)], cache[id(g)])
            (genuine if p.subject_id == g.subject_id else impostor).append(sims)
    if len(genuine) < 2 or len(impostor) < 2:
        raise ValueError(
            f"dev set yields {len(genuine)} genuine / {len(impostor)} impostor pairs;"
            " need at least 2 of each (2+ subjects, repeated images)"
        )
    return np.array(genuine), np.array(impostor)


def train_verifier(
    cfg: dict, train_entries: list[ManifestEntry], dev_entries: list[ManifestEntry]
) -> Verifier:
    """Fit one subspace per classifier on the train block, then fusion on dev."""
    cfg = resolve_config(cfg)
    chash = config_hash(cfg)
    face_models = face_models_from(cfg)
    labels = tuple(e.subject_id for e in train_entries)
    if len(train_entries) < 2:
        raise ValueError("training needs at least 2 images")

    # Placeholder fusion so the projection helpers can run during training.
    bootstrap = Verifier(config=cfg, config_hash=chash, subspaces={}, fusion=None)

    subspaces: dict[str, SubspaceModel] = {}
    for m in range(len(face_models)):
        per_domain_rows = {d: [] for d in DOMAINS}
        for e in train_entries:
            fvs = bootstrap.features(e, m)
            for d in DOMAINS:
                per_domain_rows[d].append(fvs[d])
        for d in DOMAINS:
            ts = TrainingSet.from_features(per_domain_rows[d], labels)
            if cfg["subspace"]["kind"] == "pca":
                model = pca_train(ts, cfg["subspace"]["k"])
            else:
                model = kpca_train(ts, kernel_from(cfg), cfg["subspace"]["k"])
            subspaces[f"fm{m}-{d}"] = model

    trained = Verifier(config=cfg, config_hash=chash, subspaces=subspaces, fusion=None)
    genuine, impostor = _dev_pairs(trained, dev_entries)
    fusion = train_fusion(
        genuine, impostor, tuple(subspaces), target_far=cfg["fusion"]["target_far"]
    )
    return Verifier(config=cfg, config_hash=chash, subspaces=subspaces, fusion=fusion)


def save_verifier(v: Verifier, model_dir) -> list[Path]:
    """Persist one file per subspace plus the fusion bundle.

    Files embed the config hash; pickle with a fixed protocol keeps reruns
    byte-identical.
    """
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for cid, model in v.subspaces.items():
        payload = {
            "format": MODEL_FORMAT,
            "version": FORMAT_VERSION,
            "config_hash": v.config_hash,
            "classifier_id": cid,
            "model": model,
        }
        p = model_dir / f"subspace_{cid}.pkl"
        p.write_bytes(pickle.dumps(payload, protocol=4))
        written.append(p)
    config_no_paths = {k: val for k, val in v.config.items() if k != "paths"}
    payload = {
        "format": FUSION_FORMAT,
        "version": FORMAT_VERSION,
        "config_hash": v.config_hash,
        "config": config_no_paths,
        "classifier_ids": tuple(v.subspaces),
        "fusion": v.fusion,
    }
    p = model_dir / "fusion.pkl"
    p.write_bytes(pickle.dumps(payload, protocol=4))
    written.append(p)
    return written


def load_verifier(model_dir, cfg: dict | None = None) -> Verifier:
    """Load a persisted verifier, checking config-hash compatibility.

    When cfg is given, its hash must equal the stored one; otherwise the
    stored config is used as-is (with any paths supplied by the caller).
    """
    model_dir = Path(model_dir)
    fusion_path = model_dir / "fusion.pkl"
    if not fusion_path.exists():
        raise FileNotFoundError(f"model bundle not found: {fusion_path}")
    bundle = pickle.loads(fusion_path.read_bytes())
    if bundle.get("format") != FUSION_FORMAT or bundle.get("version") != FORMAT_VERSION:
        raise RuntimeError(f"{fusion_path}: unrecognized model bundle format")

    stored_hash = bundle["config_hash"]
    if cfg is not None:
        cfg = resolve_config(cfg)
        if config_hash(cfg) != stored_hash:
            raise RuntimeError(
                "config hash mismatch: models were trained with"
                f" {stored_hash[:12]}, current config hashes to {config_hash(cfg)[:12]}"
            )
    else:
        cfg = resolve_config({**bundle["config"], "paths": {}})

    subspaces: dict[str, SubspaceModel] = {}
    for cid in bundle["classifier_ids"]:
        p = model_dir / f"subspace_{cid}.pkl"
        if not p.exists():
            raise FileNotFoundError(f"missing subspace model file: {p}")
        payload = pickle.loads(p.read_bytes())
        if payload.get("format") != MODEL_FORMAT or payload.get("config_hash") != stored_hash:
            raise RuntimeError(f"{p}: model file does not match the fusion bundle")
        subspaces[cid] = payload["model"]
    return Verifier(
        config=cfg, config_hash=stored_hash, subspaces=subspaces, fusion=bundle["fusion"]
    )
