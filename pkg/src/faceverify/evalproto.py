"""Gallery/probe verification experiments and empirical ROC summaries.

An experiment scores every probe against every gallery image; a pair is
genuine exactly when the two subject ids match (a probe against its own
gallery copy counts as genuine). Curves are empirical step functions over
the observed score values, with ties handled by the same >= rule the
accept decision uses. Report files contain no timestamps, so identical
inputs produce byte-identical reports.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from faceverify.datasets import ManifestEntry, ManifestError


class ScoreRow(NamedTuple):
    probe_id: str
    gallery_id: str
    score: float
    distance: float


@dataclass(frozen=True)
class ScoreSet:
    """Labeled pair scores plus experiment metadata (config hash, orderings)."""

    genuine: tuple[ScoreRow, ...]
    impostor: tuple[ScoreRow, ...]
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RocCurve:
    """(FAR, VR) points: a (0, 0) anchor, then one point per distinct
    threshold in descending threshold order, ending at (1, 1)."""

    points: tuple[tuple[float, float], ...]


def run_experiment(
    gallery: list[ManifestEntry],
    probes: list[ManifestEntry],
    score_pair: Callable[[ManifestEntry, ManifestEntry], tuple[float, float]],
    metadata: dict | None = None,
) -> ScoreSet:
    """Score all probe x gallery pairs with the supplied scoring callback.

    score_pair returns (score, distance) for one pair. Output rows follow
    probe manifest order crossed with gallery manifest order, so the result
    does not depend on how the scoring work is scheduled.
    """
    if not gallery:
        raise ManifestError("gallery manifest has no images")
    if not probes:
        raise ManifestError("probe manifest has no images")
    genuine: list[ScoreRow] = []
    impostor: list[ScoreRow] = []
    for probe in probes:
        for entry in gallery:
            score, distance = score_pair(probe, entry)
            row = ScoreRow(probe.path, entry.path, float(score), float(distance))
            if probe.subject_id == entry.subject_id:
                genuine.append(row)
            else:
                impostor.append(row)
    meta = dict(metadata or {})
    meta.setdefault("probe_ids", tuple(p.path for p in probes))
    meta.setdefault("gallery_ids", tuple(g.path for g in gallery))
    return ScoreSet(genuine=tuple(genuine), impostor=tuple(impostor), metadata=meta)


def roc(s: ScoreSet) -> RocCurve:
    """Empirical ROC over the distinct observed scores.

    For each candidate threshold theta (every distinct score, descending):
    FAR = #{impostor >= theta} / #impostor, VR = #{genuine >= theta} /
    #genuine. The lowest threshold accepts everything, so the curve always
    ends at (1, 1).
    """
    if not s.genuine or not s.impostor:
        raise ValueError("ROC needs both genuine and impostor scores")
    gen = np.sort(np.array([r.score for r in s.genuine]))
    imp = np.sort(np.array([r.score for r in s.impostor]))
    thresholds = np.unique(np.concatenate([gen, imp]))[::-1]
    points = [(0.0, 0.0)]
    for theta in thresholds:
        far = float(imp.size - np.searchsorted(imp, theta, side="left")) / imp.size
        vr = float(gen.size - np.searchsorted(gen, theta, side="left")) / gen.size
        points.append((far, vr))
    return RocCurve(points=tuple(points))


def vr_at_far(c: RocCurve, far: float) -> float:
    """Verification rate at the largest achieved FAR <= far (step rule)."""
    if not 0.0 <= far <= 1.0:
        raise ValueError("far must lie in [0, 1]")
    best = 0.0
    for f, v in c.points:
        if f <= far and v > best:
            best = v
    return best


def auc(genuine_scores, impostor_scores) -> float:
    """Pairwise ranking AUC: P(genuine > impostor) with half credit for ties."""
    gen = np.asarray(genuine_scores, dtype=np.float64)
    imp = np.sort(np.asarray(impostor_scores, dtype=np.float64))
    if gen.size == 0 or imp.size == 0:
        raise ValueError("AUC needs both genuine and impostor scores")
    below = np.searchsorted(imp, gen, side="left")
    upto = np.searchsorted(imp, gen, side="right")
    wins = below.sum()
    ties = (upto - below).sum()
    return float((wins + 0.5 * ties) / (gen.size * imp.size))


def _ordering(s: ScoreSet, key: str, attr: str) -> list[str]:
    ids = s.metadata.get(key)
    if ids:
        return list(ids)
    seen: list[str] = []
    for row in (*s.genuine, *s.impostor):
        value = getattr(row, attr)
        if value not in seen:
            seen.append(value)
    return seen


def emit_report(s: ScoreSet, c: RocCurve, out_dir) -> dict[str, Path]:
    """Write scores.csv, roc.csv, and summary.txt under out_dir.

    The summary lists pair counts, the minimum genuine distance, the
    best-scoring gallery position for each probe (1-based, ties to the
    earlier position), and VR at FAR 0.1%, 1%, and 10%.
    """
    if not s.genuine or not s.impostor:
        raise ValueError("report needs both genuine and impostor scores")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "scores": out_dir / "scores.csv",
        "roc": out_dir / "roc.csv",
        "summary": out_dir / "summary.txt",
    }

    probe_order = _ordering(s, "probe_ids", "probe_id")
    gallery_order = _ordering(s, "gallery_ids", "gallery_id")
    probe_pos = {p: i for i, p in enumerate(probe_order)}
    gallery_pos = {g: i for i, g in enumerate(gallery_order)}
    labeled = sorted(
        [("genuine", r) for r in s.genuine] + [("impostor", r) for r in s.impostor],
        key=lambda kr: (probe_pos[kr[1].probe_id], gallery_pos[kr[1].gallery_id]),
    )

    with paths["scores"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["probe_id", "gallery_id", "kind", "score", "distance"])
        for kind, r in labeled:
            w.writerow([r.probe_id, r.gallery_id, kind, repr(r.score), repr(r.distance)])

    with paths["roc"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["far", "vr"])
        for f, v in c.points:
            w.writerow([repr(f), repr(v)])

    best_lines = []
    by_probe: dict[str, list[ScoreRow]] = {}
    for _, r in labeled:
        by_probe.setdefault(r.probe_id, []).append(r)
    for probe_id in probe_order:
        rows = by_probe[probe_id]
        best = max(rows, key=lambda r: (r.score, -gallery_pos[r.gallery_id]))
        best_lines.append(
            f"probe {probe_id}: best_gallery_index={gallery_pos[best.gallery_id] + 1}"
            f" score={best.score!r}"
        )

    min_gen_dist = min(r.distance for r in s.genuine)
    lines = [
        "verification experiment summary",
        f"config_hash={s.metadata.get('config_hash', 'unknown')}",
        f"probes={len(probe_order)} gallery={len(gallery_order)}",
        f"genuine_pairs={len(s.genuine)} impostor_pairs={len(s.impostor)}",
        f"min_genuine_distance={min_gen_dist!r}",
        f"vr_at_far_0.001={vr_at_far(c, 0.001)!r}",
        f"vr_at_far_0.01={vr_at_far(c, 0.01)!r}",
        f"vr_at_far_0.1={vr_at_far(c, 0.1)!r}",
        *best_lines,
    ]
    paths["summary"].write_text("\n".join(lines) + "\n")
    return paths
