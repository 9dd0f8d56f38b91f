"""Command-line surface: synth, train, verify, evaluate, features.

Every command is a pure function of its inputs: identical configs and
manifests produce bit-identical outputs. Exit codes: 0 success, 1 runtime
error (missing data, unreadable files, incompatible models), 2 usage or
validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from faceverify.datasets import ManifestError, SynthSpec, generate_synthetic, load_manifest
from faceverify.evalproto import emit_report, roc, vr_at_far
from faceverify.matching import decide, znorm_apply
from faceverify.pipeline import (
    Verifier,
    config_hash,
    load_verifier,
    resolve_config,
    save_verifier,
    train_verifier,
)


def _load_config(args) -> dict:
    """Raw config file plus --override / --no-ingi flags applied on top."""
    raw: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from exc
    for item in getattr(args, "override", None) or []:
        if "=" not in item:
            raise ValueError(f"--override expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValueError(f"--override path {key!r} crosses a non-object")
        node[parts[-1]] = parsed
    if getattr(args, "no_ingi", False):
        raw["use_ingi"] = False
    return raw


def _required_paths(cfg: dict, keys: tuple[str, ...]) -> dict:
    paths = cfg.get("paths", {})
    missing = [k for k in keys if not paths.get(k)]
    if missing:
        raise ValueError(
            "config is missing required paths: "
            + ", ".join(f"paths.{k}" for k in missing)
        )
    return {k: Path(paths[k]) for k in keys}


def _config_and_paths(args, keys: tuple[str, ...]):
    """Resolve config and required paths for the model-consuming commands.

    When the user supplied only paths (no processing keys), returns None for
    the config so the stored training config is used verbatim; otherwise the
    resolved config must hash-match the trained models.
    """
    raw = _load_config(args)
    req = _required_paths(raw, keys)
    has_processing = any(k != "paths" for k in raw)
    cfg = resolve_config(raw) if has_processing else None
    return cfg, req


def cmd_synth(args) -> int:
    for flag, value in (("--subjects", args.subjects), ("--per-subject", args.per_subject)):
        if value < 1:
            raise ValueError(f"{flag} must be >= 1, got {value}")
    spec = SynthSpec(
        seed=args.seed,
        n_subjects=args.subjects,
        images_per_subject=args.per_subject,
        width=args.width,
        height=args.height,
        illum_strength=args.illum_strength,
        noise_sigma=args.noise_sigma,
    )
    paths = generate_synthetic(spec, args.out)
    for name in sorted(paths):
        print(f"{name}: {paths[name]}")
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(_load_config(args))
    paths = _required_paths(cfg, ("train", "dev", "model_dir"))
    train_entries = load_manifest(paths["train"])
    dev_entries = load_manifest(paths["dev"])
    verifier = train_verifier(cfg, train_entries, dev_entries)
    written = save_verifier(verifier, paths["model_dir"])
    print(f"config_hash={verifier.config_hash}")
    print(f"classifiers={len(verifier.subspaces)}")
    for p in written:
        print(f"wrote {p}")
    return 0


def _score_log_rows(verifier: Verifier, probes, gallery, cache):
    llr = verifier.config["fusion"]["path"] == "llr"
    for p in probes:
        for g in gallery:
            score, _, sims = verifier.pair_score(cache[id(p)], cache[id(g)])
            normalized = (
                znorm_apply(sims, verifier.fusion.znorm_mu, verifier.fusion.znorm_sigma)
                if llr
                else sims
            )
            verdict = "accept" if decide(score, verifier.tau) else "reject"
            for i, cid in enumerate(verifier.classifier_ids):
                yield [
                    p.path,
                    g.path,
                    cid,
                    repr(float(sims[i])),
                    repr(float(normalized[i])),
                    repr(float(score)),
                    verdict,
                ]


def cmd_verify(args) -> int:
    started = time.perf_counter()
    cfg, req = _config_and_paths(args, ("gallery", "probe", "model_dir"))
    verifier = load_verifier(req["model_dir"], cfg)
    gallery = load_manifest(req["gallery"])
    probes = load_manifest(req["probe"])
    if not gallery or not probes:
        raise ManifestError("gallery and probe manifests must be non-empty")

    cache = {id(e): verifier.projections(e) for e in (*gallery, *probes)}
    tau = verifier.tau
    for p in probes:
        scored = []
        for idx, g in enumerate(gallery):
            score, dist, _ = verifier.pair_score(cache[id(p)], cache[id(g)])
            scored.append((score, dist, idx, g.path))
        best = max(scored, key=lambda t: (t[0], -t[2]))
        verdict = "accept" if decide(best[0], tau) else "reject"
        print(
            f"probe {p.path}: best={best[3]} index={best[2] + 1}"
            f" distance={best[1]!r} score={best[0]!r} decision={verdict}"
        )
    if args.log:
        log_path = Path(args.log)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        with log_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["probe_id", "gallery_id", "classifier_id", "raw", "normalized", "fused", "decision"]
            )
            w.writerows(_score_log_rows(verifier, probes, gallery, cache))
        print(f"score log: {log_path}")
    print(f"elapsed_seconds={time.perf_counter() - started:.3f}")
    return 0


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    cfg, req = _config_and_paths(args, ("gallery", "probe", "model_dir", "report_dir"))
    verifier = load_verifier(req["model_dir"], cfg)
    gallery = load_manifest(req["gallery"])
    probes = load_manifest(req["probe"])
    scores = verifier.experiment(gallery, probes)
    curve = roc(scores)
    paths = emit_report(scores, curve, req["report_dir"])
    for name in ("scores", "roc", "summary"):
        print(f"{name}: {paths[name]}")
    for target in (0.001, 0.01, 0.1):
        print(f"vr_at_far_{target}={vr_at_far(curve, target)!r}")
    print(f"elapsed_seconds={time.perf_counter() - started:.3f}")
    return 0


def cmd_features(args) -> int:
    cfg = resolve_config(_load_config(args))
    if not 0 <= args.model_index < len(cfg["face_models"]):
        raise ValueError(
            f"--model-index {args.model_index} outside the {len(cfg['face_models'])}"
            " configured face models"
        )
    entries = load_manifest(args.manifest)
    scratch = Verifier(config=cfg, config_hash=config_hash(cfg), subspaces={}, fusion=None)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        for e in entries:
            per_domain = scratch.features(e, args.model_index)
            values = np.concatenate(
                [per_domain[d].values for d in ("ri", "spectrum", "phase")]
            )
            w.writerow([e.path, *(repr(float(v)) for v in values)])
    print(f"features: {out} ({len(entries)} rows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faceverify",
        description="Face verification pipeline: synthesize data, train, verify, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument(
            "--override",
            action="append",
            metavar="KEY=VALUE",
            help="override a config key (dotted path, JSON value); repeatable",
        )
        p.add_argument(
            "--no-ingi",
            action="store_true",
            help="disable gradient-domain preprocessing (histogram equalization only)",
        )

    p = sub.add_parser("synth", help="generate a deterministic synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subjects", type=int, default=8)
    p.add_argument("--per-subject", type=int, default=4)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--illum-strength", type=float, default=4.0)
    p.add_argument("--noise-sigma", type=float, default=0.01)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train subspace and fusion models")
    add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("verify", help="verify probes against a gallery")
    add_config_flags(p)
    p.add_argument("--log", help="write a per-classifier score log CSV here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("evaluate", help="run the ROC evaluation and write reports")
    add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("features", help="dump raw hybrid Fourier features as CSV")
    add_config_flags(p)
    p.add_argument("--manifest", required=True, help="manifest CSV of images to process")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--model-index", type=int, default=0, help="face model to use")
    p.set_defaults(func=cmd_features)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
