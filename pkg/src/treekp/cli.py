"""Command line interface: ``treekp <command> ...``.

Exit codes: 0 success, 2 bad input (missing file, malformed config,
duplicate id, empty store), 3 a pipeline stage failed.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from treekp import augment, graph, matching, pipeline, render, store
from treekp.errors import (ConflictError, EmptyInputError, NoSeedsError, SegmentationError,
                           StageError, TreeKPError, TruncationError)
from treekp.imaging import load_image, save_image, save_mask

EXIT_OK, EXIT_INPUT, EXIT_STAGE = 0, 2, 3


class InputError(Exception):
    pass


def _config(args) -> pipeline.PipelineConfig:
    cfg = pipeline.PipelineConfig.load(args.config) if getattr(args, "config", None) else pipeline.PipelineConfig()
    return cfg.replace(alpha=getattr(args, "alpha", None), tau=getattr(args, "tau", None),
                       min_spur=getattr(args, "min_spur", None))


def _weights(args):
    return matching.FeatureWeights.load(args.weights) if getattr(args, "weights", None) else None


def _image(path):
    if not Path(path).is_file():
        raise InputError(f"no such file: {path}")
    return load_image(path)


def _kv(d: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in d.items())


def _emit(text, out_file=None):
    sys.stdout.write(text)
    if out_file:
        Path(out_file).write_text(text)


def _keypoints_csv(g) -> str:
    rows = ["index,x,y,kind,parent,level,merge"]
    for n in g.nodes:
        parent = "" if n.parent is None else n.parent
        rows.append(f"{n.index},{n.x!r},{n.y!r},{n.kind},{parent},{n.level},{int(n.merge)}")
    return "\n".join(rows) + "\n"


def _features_csv(table) -> str:
    rows = [",".join(graph.FEATURE_NAMES)]
    for r in table.values:
        rows.append(",".join(f"{v:.10g}" for v in r))
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_extract(args):
    cfg = _config(args)
    img = _image(args.image)
    ex = pipeline.extract(img, cfg)
    g = ex.graph
    summary = {
        "keypoints": len(g),
        **{f"{k}_count": v for k, v in g.kind_counts().items()},
        "r_mec": f"{ex.geometry.r_mec:.6f}",
        "r_init": f"{ex.geometry.r_init:.6f}",
        "steps_total": ex.stats.steps_total,
        "windows_spawned": ex.stats.windows_spawned,
        "pixels_visited": ex.stats.pixels_visited,
        "config_hash": cfg.extract_hash,
    }
    summary.update({f"seconds_{k}": f"{v:.6f}" for k, v in ex.timings.items()})
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        graph.save_graph(out / "graph.tpg", g)
        (out / "keypoints.csv").write_text(_keypoints_csv(g))
        (out / "features.csv").write_text(_features_csv(graph.compute_features(g)))
        save_mask(out / "mask.png", ex.mask)
        save_mask(out / "skeleton.png", ex.skeleton)
        save_image(out / "overlay.png", render.keypoint_overlay(g, img, ex.skeleton))
        (out / "extract.txt").write_text(_kv(summary))
    if args.store:
        if not args.id:
            raise InputError("--store with extract needs --id")
        store.enroll(store.PatternRecord(args.id, g, cfg.extract_hash, str(Path(args.image).resolve())), args.store)
    _emit(_kv(summary))


def cmd_enroll(args):
    cfg = _config(args)
    img = _image(args.image)
    pid = args.id or Path(args.image).stem
    rec = store.extract_record(pid, img, cfg, source=str(Path(args.image).resolve()),
                               learn=args.learn, seed=args.seed)
    if rec.weights is None and args.weights:
        rec.weights = _weights(args)
    store.enroll(rec, args.store)
    _emit(_kv({"id": pid, "keypoints": len(rec.graph), "file": rec.digest + ".tpg"}))


def cmd_identify(args):
    cfg = _config(args)
    img = _image(args.image)
    records = store.load_store(args.store)
    report = store.identify(img, args.store, cfg, _weights(args), records=records)
    _emit(report.to_csv(), args.out)
    for k, v in report.elapsed.items():
        sys.stderr.write(f"seconds_{k}={v:.6f}\n")


def _graph_from(path, cfg):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"no such file: {path}")
    if p.suffix.lower() == ".tpg":
        return graph.load_graph(p), None
    img = load_image(p)
    return pipeline.extract(img, cfg).graph, img


def cmd_match(args):
    cfg = _config(args)
    ref, _ = _graph_from(args.a, cfg)
    test, _ = _graph_from(args.b, cfg)
    m = pipeline.match_graphs(ref, test, _weights(args), cfg)
    res = {
        "eta": f"{m.score.eta:.9f}",
        "accuracy_pct": f"{m.score.accuracy_pct:.6f}",
        "similarity": f"{m.similarity:.6f}",
        "pairs": m.score.n_pairs,
        "rotation_deg": f"{m.transform.angle_deg:.6f}",
        "ref_keypoints": len(ref),
        "test_keypoints": len(test),
        "tau": cfg.tau,
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "score.txt").write_text(_kv(res))
        with open(out / "pairs.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ref", "test", "distance"])
            rp = ref.positions()
            for i, j in m.assignment.pairs:
                w.writerow([i, j, f"{np.hypot(*(rp[i] - m.projected[j])):.6f}"])
        save_image(out / "alignment.png", render.match_overlay(ref, m.projected, m.assignment.pairs, cfg.tau))
    _emit(_kv(res))


def cmd_bench(args):
    cfg = _config(args)
    records = store.load_store(args.store)
    images = {}
    for rec in records:
        if rec.source == "-" or not Path(rec.source).is_file():
            raise InputError(f"source image of {rec.id!r} not found: {rec.source}")
        images[rec.id] = load_image(rec.source)
    grid = store.DEFAULT_GRID
    if args.grid:
        grid = tuple((kind, float(v)) for kind, v in (item.split("=") for item in args.grid.split(",")))
    report = store.bench(args.store, images, grid, cfg, seed=args.seed)
    report.write(args.out)
    _emit(report.accuracy_csv())


def cmd_augment(args):
    img = _image(args.image)
    spec = augment.AugmentSpec(rotation_deg=args.rot, scale=args.scale, perspective_ratio=args.persp,
                               noise_var=args.noise, rng_seed=args.seed)
    save_image(args.out, augment.augment(img, spec))


def cmd_synth(args):
    p = augment.SynthParams(rng_seed=args.seed, particles=args.particles, canvas=args.canvas)
    save_image(args.out, augment.generate_dendrite(p))


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="treekp", description="Tree-pattern key points and matching.")
    sub = ap.add_subparsers(dest="command", required=True)

    def pipeline_flags(p):
        p.add_argument("--config", help="key=value pipeline config file")
        p.add_argument("--alpha", type=float, help="seed circle as a fraction of the enclosing radius")
        p.add_argument("--tau", type=float, help="match tolerance in pixels")
        p.add_argument("--min-spur", dest="min_spur", type=int, help="prune open branches shorter than this")

    p = sub.add_parser("extract", help="image -> key-point graph")
    p.add_argument("image")
    p.add_argument("--out", help="directory for graph.tpg, CSVs and overlays")
    p.add_argument("--store", help="also enroll the result here (needs --id)")
    p.add_argument("--id")
    pipeline_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("enroll", help="extract and add to a store")
    p.add_argument("image")
    p.add_argument("--store", required=True)
    p.add_argument("--id", help="default: image file stem")
    p.add_argument("--learn", action="store_true", help="learn feature weights from augmented copies")
    p.add_argument("--weights", help="feature weights file to store with the record")
    p.add_argument("--seed", type=int, default=0)
    pipeline_flags(p)
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("identify", help="rank stored patterns against an image")
    p.add_argument("image")
    p.add_argument("--store", required=True)
    p.add_argument("--weights", help="override stored weights")
    p.add_argument("--out", help="write the ranking CSV here too")
    pipeline_flags(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("match", help="align two images or .tpg graphs (a = reference)")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--weights")
    p.add_argument("--out", help="directory for score.txt, pairs.csv, alignment.png")
    pipeline_flags(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("bench", help="cross-matching matrix and augmentation accuracy")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", help="e.g. rotation=30,perspective=0.5 (default: full grid)")
    p.add_argument("--seed", type=int, default=0)
    pipeline_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("augment", help="rotate / scale / warp / add noise")
    p.add_argument("image")
    p.add_argument("--rot", type=float, default=0.0)
    p.add_argument("--persp", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("synth", help="synthetic dendrite image")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--particles", type=int, default=2000)
    p.add_argument("--canvas", type=int, default=512)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (StageError, SegmentationError, NoSeedsError, TruncationError) as e:
        sys.stderr.write(f"error: stage failure: {e}\n")
        return EXIT_STAGE
    except (InputError, ConflictError, EmptyInputError, FileNotFoundError, KeyError, ValueError,
            OSError, TreeKPError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
