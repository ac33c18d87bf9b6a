"""On-disk pattern store, identification and benchmark reports.

A store is a directory holding

* ``manifest.tsv``: one tab-separated line per record,
  ``id  file  config_hash  weights_file  source`` (``-`` when absent),
  in enrollment order;
* ``<digest>.tpg``: the graph in TPG1 text, named by the SHA-256 of its
  content (first 16 hex digits);
* ``<digest>.weights``: optional learned feature weights (key=value).
"""

from __future__ import annotations

import csv
import hashlib
import io
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from treekp import augment, graph, matching, pipeline
from treekp.errors import ConflictError, EmptyInputError

MANIFEST = "manifest.tsv"
_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


@dataclass
class PatternRecord:
    id: str
    graph: graph.PatternGraph
    config_hash: str
    source: str = "-"
    weights: Optional[matching.FeatureWeights] = None

    @property
    def features(self) -> graph.FeatureTable:
        return graph.compute_features(self.graph)

    @property
    def digest(self) -> str:
        return hashlib.sha256(graph.dumps_graph(self.graph).encode("ascii")).hexdigest()[:16]


def extract_record(pattern_id, img, cfg: pipeline.PipelineConfig = pipeline.PipelineConfig(),
                source="-", learn=False, seed=0) -> PatternRecord:
    """Extract ``img`` and wrap it as a record, optionally learning weights."""
    ex = pipeline.extract(img, cfg)
    w = pipeline.learn_pattern_weights(img, ex.graph, cfg, seed=seed) if learn else None
    return PatternRecord(pattern_id, ex.graph, cfg.extract_hash, str(source), w)


def _read_manifest(store: Path) -> list:
    path = store / MANIFEST
    if not path.exists():
        return []
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            parts = line.split("\t")
            if len(parts) != 5:
                raise ValueError(f"malformed manifest line: {line!r}")
            rows.append(parts)
    return rows


def enroll(record: PatternRecord, store) -> str:
    if not _ID_RE.match(record.id):
        raise ValueError(f"invalid id {record.id!r}: use letters, digits, '.', '_' or '-'")
    store = Path(store)
    store.mkdir(parents=True, exist_ok=True)
    if any(row[0] == record.id for row in _read_manifest(store)):
        raise ConflictError(f"id {record.id!r} already enrolled")
    digest = record.digest
    tpg = f"{digest}.tpg"
    (store / tpg).write_text(graph.dumps_graph(record.graph), encoding="ascii")
    wfile = "-"
    if record.weights is not None:
        wtext = record.weights.dumps()
        wfile = hashlib.sha256(wtext.encode("ascii")).hexdigest()[:16] + ".weights"
        (store / wfile).write_text(wtext, encoding="ascii")
    src = record.source.replace("\t", " ") or "-"
    with open(store / MANIFEST, "a", encoding="utf-8") as fh:
        fh.write("\t".join([record.id, tpg, record.config_hash, wfile, src]) + "\n")
    return record.id


def load_store(store) -> list:
    store = Path(store)
    out = []
    for pid, tpg, chash, wfile, src in _read_manifest(store):
        g = graph.load_graph(store / tpg)
        w = matching.FeatureWeights.load(store / wfile) if wfile != "-" else None
        out.append(PatternRecord(pid, g, chash, src, w))
    return out


def load_record(store, pattern_id) -> PatternRecord:
    for rec in load_store(store):
        if rec.id == pattern_id:
            return rec
    raise KeyError(pattern_id)


# ---------------------------------------------------------------------------
# identification


@dataclass
class Candidate:
    id: str
    similarity: float
    eta: float
    accuracy_pct: float


@dataclass
class IdentifyReport:
    ranking: list  # Candidate, best first
    elapsed: dict = field(default_factory=dict)

    @property
    def best(self) -> Candidate:
        return self.ranking[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "id", "similarity", "eta", "accuracy_pct"])
        for i, c in enumerate(self.ranking, 1):
            w.writerow([i, c.id, f"{c.similarity:.6f}", f"{c.eta:.6f}", f"{c.accuracy_pct:.6f}"])
        return buf.getvalue()


def rank(test: graph.PatternGraph, records, cfg: pipeline.PipelineConfig = pipeline.PipelineConfig(),
         weights: Optional[matching.FeatureWeights] = None) -> list:
    """Score ``test`` against each record; best similarity first, ties in store order."""
    if not records:
        raise EmptyInputError("the store is empty")
    cands = []
    for rec in records:
        w = weights if weights is not None else rec.weights
        m = pipeline.match_graphs(rec.graph, test, w, cfg)
        cands.append(Candidate(rec.id, m.similarity, m.score.eta, m.score.accuracy_pct))
    order = sorted(range(len(cands)), key=lambda i: (-cands[i].similarity, i))
    return [cands[i] for i in order]


def identify(img, store, cfg: pipeline.PipelineConfig = pipeline.PipelineConfig(),
             weights: Optional[matching.FeatureWeights] = None, records=None) -> IdentifyReport:
    records = load_store(store) if records is None else records
    if not records:
        raise EmptyInputError("the store is empty")
    t0 = time.perf_counter()
    ex = pipeline.extract(img, cfg)
    elapsed = dict(ex.timings)
    elapsed["extract"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    ranking = rank(ex.graph, records, cfg, weights)
    elapsed["match"] = time.perf_counter() - t0
    return IdentifyReport(ranking, elapsed)


# ---------------------------------------------------------------------------
# benchmark

DEFAULT_GRID = (
    ("rotation", 30.0), ("rotation", 70.0), ("rotation", 100.0), ("rotation", 200.0), ("rotation", 300.0),
    ("perspective", 0.1), ("perspective", 0.5),
    ("noise", 0.01), ("noise", 0.1),
)


def grid_spec(kind, value, seed=0) -> augment.AugmentSpec:
    if kind == "rotation":
        return augment.AugmentSpec(rotation_deg=value, rng_seed=seed)
    if kind == "perspective":
        return augment.AugmentSpec(perspective_ratio=value, rng_seed=seed)
    if kind == "noise":
        return augment.AugmentSpec(noise_var=value, rng_seed=seed)
    if kind == "scale":
        return augment.AugmentSpec(scale=value, rng_seed=seed)
    raise ValueError(f"unknown augmentation {kind!r}")


@dataclass
class BenchReport:
    ids: list
    similarity: np.ndarray  # queries (rows) x references (cols)
    accuracy_rows: list     # (kind, value, mean_accuracy, min_accuracy, n)
    timing_rows: list       # (id, keypoints, extract_seconds)

    def matrix_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["query"] + list(self.ids))
        for pid, row in zip(self.ids, self.similarity):
            w.writerow([pid] + [f"{v:.6f}" for v in row])
        return buf.getvalue()

    def accuracy_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["augmentation", "value", "mean_accuracy_pct", "min_accuracy_pct", "n"])
        for kind, value, mean, lo, n in self.accuracy_rows:
            w.writerow([kind, f"{value:g}", f"{mean:.4f}", f"{lo:.4f}", n])
        return buf.getvalue()

    def timing_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "keypoints", "extract_seconds"])
        for pid, n, sec in self.timing_rows:
            w.writerow([pid, n, f"{sec:.6f}"])
        return buf.getvalue()

    def write(self, out_dir) -> None:
        from treekp.imaging import save_image

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "similarity_matrix.csv").write_text(self.matrix_csv())
        (out / "augmentation_accuracy.csv").write_text(self.accuracy_csv())
        (out / "timing.csv").write_text(self.timing_csv())
        save_image(out / "similarity_matrix.png", matrix_image(self.similarity))


def matrix_image(sim, cell=8) -> np.ndarray:
    """Grayscale rendering of a similarity matrix, brighter = more similar."""
    s = np.clip(np.asarray(sim, dtype=np.float64) / 100.0, 0.0, 1.0)
    return np.kron(s, np.ones((cell, cell)))


def bench(store, images: dict, grid=DEFAULT_GRID, cfg: pipeline.PipelineConfig = pipeline.PipelineConfig(),
          seed=0) -> BenchReport:
    """Cross-matching matrix, per-augmentation accuracy and timing.

    ``images`` maps record id to its source image. Queries are re-extracted
    from the images; each augmented query is matched to its own reference.
    """
    records = load_store(store)
    if len(records) < 2:
        raise ValueError("bench needs at least two stored patterns")
    ids = [r.id for r in records]
    missing = [i for i in ids if i not in images]
    if missing:
        raise KeyError(f"no source image for {missing}")
    queries, timing = [], []
    for rec in records:
        t0 = time.perf_counter()
        ex = pipeline.extract(images[rec.id], cfg)
        timing.append((rec.id, len(ex.graph), time.perf_counter() - t0))
        queries.append(ex.graph)
    sim = np.zeros((len(records), len(records)))
    for i, q in enumerate(queries):
        for j, rec in enumerate(records):
            sim[i, j] = pipeline.match_graphs(rec.graph, q, rec.weights, cfg).similarity
    acc_rows = []
    for kind, value in grid:
        accs = []
        for rec in records:
            spec = grid_spec(kind, value, seed)
            q = pipeline.extract(augment.augment(images[rec.id], spec), cfg).graph
            accs.append(pipeline.match_graphs(rec.graph, q, rec.weights, cfg).score.accuracy_pct)
        acc_rows.append((kind, float(value), float(np.mean(accs)), float(np.min(accs)), len(accs)))
    return BenchReport(ids, sim, acc_rows, timing)
