"""End-to-end extraction and pairwise matching.

``extract`` runs colour expansion, filtering, PCA fusion, K-means
segmentation, thinning, spur pruning and the key-point trace, and returns
a :class:`PatternGraph`. ``match_graphs`` compares two graphs: joint
feature normalization, weighted distance matrix, Munkres assignment, rigid
alignment and scoring.

Assignment on features alone ignores geometry, so matching optionally
refines it. Starting from the feature-based alignment and from a few
rotations about the roots suggested by polar histograms, each test point
is paired with its nearest reference point and the rigid map is refitted
on the pairs closer than a shrinking cutoff (``refine_iters`` rounds,
ending at ``refine_cap``). The start leaving the most points within
``tau`` wins.

A last polishing pass ignores features: pairs cost their projected
distance capped at ``refine_cap`` pixels, so far-off points stop pulling
on the assignment, and the rigid map is refitted on the pairs within the
cap. This runs ``inlier_refits`` times. The reported pairing then
maximizes the number of pairs within ``tau`` under the final alignment,
and among those the total distance.

Similarity is ``max(0, 100 (1 - eta / R))`` with R the half largest
pairwise distance among the reference key points.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from treekp import alignment, fusion, graph, keypoints, matching, skeleton
from treekp.errors import DegenerateInputError, SegmentationError, StageError, TreeKPError


@dataclass(frozen=True)
class PipelineConfig:
    spaces: tuple = fusion.COLOR_SPACES
    filters: tuple = fusion.FilterBankConfig().filters
    filter_sources: tuple = ("gray",)
    k: int = 2
    fg_rule: str = "darker"
    kmeans_seed: int = 0
    orient_field: bool = True
    min_component: int = 0
    min_spur: int = skeleton.DEFAULT_MIN_SPUR
    alpha: float = keypoints.DEFAULT_ALPHA
    max_steps: Optional[int] = None
    tau: float = alignment.DEFAULT_TAU
    refine_iters: int = 8
    rotation_candidates: int = 3
    refine_cap: float = 7.0
    inlier_refits: int = 3

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.fg_rule not in fusion.FG_RULES:
            raise ValueError(f"fg_rule must be one of {fusion.FG_RULES}")
        if min(self.min_spur, self.min_component, self.refine_iters, self.rotation_candidates,
               self.inlier_refits) < 0:
            raise ValueError("min_spur and the refinement settings must be nonnegative")
        if not self.tau > 0 or not self.refine_cap > 0:
            raise ValueError("tau and refine_cap must be positive")
        keypoints.SearchConfig(self.alpha, self.max_steps)  # validates alpha

    # key=value text ---------------------------------------------------------

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(v)
            elif v is None:
                v = "none"
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PipelineConfig":
        kinds = {f.name: f for f in fields(cls)}
        defaults = cls()
        kw = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or key not in kinds:
                raise ValueError(f"bad config line {line!r}")
            cur = getattr(defaults, key)
            if isinstance(cur, tuple):
                kw[key] = tuple(x.strip() for x in val.split(",") if x.strip())
            elif key == "max_steps":
                kw[key] = None if val.lower() == "none" else int(val)
            elif isinstance(cur, bool):
                kw[key] = val.lower() in ("1", "true", "yes")
            elif isinstance(cur, int):
                kw[key] = int(val)
            elif isinstance(cur, float):
                kw[key] = float(val)
            else:
                kw[key] = val
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())

    def replace(self, **kw) -> "PipelineConfig":
        d = asdict(self)
        d.update({k: v for k, v in kw.items() if v is not None})
        return PipelineConfig(**d)

    @property
    def extract_hash(self) -> str:
        """Digest of the settings that influence extraction (not matching)."""
        keep = ("spaces", "filters", "filter_sources", "k", "fg_rule", "kmeans_seed",
                "orient_field", "min_component", "min_spur", "alpha", "max_steps")
        text = "".join(line + "\n" for line in self.dumps().splitlines() if line.split("=")[0] in keep)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class Extraction:
    graph: graph.PatternGraph
    geometry: keypoints.Geometry
    stats: keypoints.TraceStats
    mask: np.ndarray
    skeleton: np.ndarray
    timings: dict = field(default_factory=dict)


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except TreeKPError as e:
        raise StageError(name, e) from e


def fused_field(img, cfg: PipelineConfig = PipelineConfig()) -> np.ndarray:
    """First principal component of the expanded, filtered stack.

    With ``orient_field`` the sign is chosen so the field correlates
    positively with luminance; otherwise it follows the eigenvector sign
    rule, under which "darker" may select the background.
    """
    stack = fusion.expand_color_spaces(img, cfg.spaces)
    bank = fusion.FilterBankConfig(tuple(cfg.filters), tuple(cfg.filter_sources))
    stack = fusion.apply_filter_bank(stack, bank)
    f = fusion.fuse_pca(stack)
    if cfg.orient_field:
        lum = img if img.ndim == 2 else img.mean(axis=2)
        if np.sum((f - f.mean()) * (lum - lum.mean())) < 0:
            f = 1.0 - f
    return f


def drop_small_components(mask, min_size) -> np.ndarray:
    """Remove 8-connected foreground components with fewer than ``min_size`` pixels."""
    if min_size <= 1:
        return mask
    lab, _ = ndimage.label(mask, structure=np.ones((3, 3), bool))
    sizes = np.bincount(lab.ravel())
    keep = sizes >= min_size
    keep[0] = False
    return keep[lab]


def _segment(img, cfg):
    try:
        f = fused_field(img, cfg)
        mask = fusion.segment_kmeans(f, cfg.k, cfg.fg_rule, cfg.kmeans_seed)
    except DegenerateInputError as e:
        raise SegmentationError(f"nothing to segment: {e}") from e
    mask = drop_small_components(mask, cfg.min_component)
    if not mask.any():
        raise SegmentationError("no foreground component survives min_component")
    return mask


def extract(img, cfg: PipelineConfig = PipelineConfig()) -> Extraction:
    """Image -> key-point graph. Stage failures raise :class:`StageError`."""
    from treekp.imaging import check_raster

    img = check_raster(img)
    t = {}
    t0 = time.perf_counter()
    mask = _stage("segment", _segment, img, cfg)
    t["segment"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    skel = _stage("skeleton", skeleton.thin, mask)
    skel = skeleton.prune_spurs(skel, cfg.min_spur)
    t["skeleton"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    kps, stats, geom = _stage("keypoints", keypoints.detect, skel,
                              keypoints.SearchConfig(cfg.alpha, cfg.max_steps))
    g = graph.build_graph(kps, (img.shape[1], img.shape[0]))
    t["keypoints"] = time.perf_counter() - t0
    return Extraction(g, geom, stats, mask, skel, t)


# ---------------------------------------------------------------------------
# matching


@dataclass
class MatchResult:
    assignment: matching.Assignment
    transform: alignment.RigidTransform
    score: alignment.MatchScore
    similarity: float
    projected: np.ndarray  # all test key points after alignment


def graph_radius(g: graph.PatternGraph) -> float:
    """Half the largest pairwise distance between key points (root excluded)."""
    pos = g.positions()
    return keypoints.half_max_pairwise(pos[1:] if len(pos) > 1 else pos)


def _align(assign, ref_pos, test_pos, tau):
    idx = np.asarray(assign.pairs, dtype=np.int64).reshape(-1, 2)
    r, t = ref_pos[idx[:, 0]], test_pos[idx[:, 1]]
    try:
        tf = alignment.fit_rigid(t, r)
    except DegenerateInputError:
        c_t = tuple(t.mean(axis=0))
        c_r = tuple(r.mean(axis=0))
        tf = alignment.RigidTransform(np.eye(2), c_t, c_r)
    proj = alignment.project(test_pos, tf)
    return tf, proj, alignment.score(proj[idx[:, 1]], r, tau)


def _polar_histogram(pos, bins, rings):
    rel = pos[1:] - pos[0]
    r = np.hypot(rel[:, 0], rel[:, 1])
    if len(r) == 0 or r.max() == 0:
        return np.zeros((rings, bins))
    ang = np.arctan2(rel[:, 1], rel[:, 0]) % (2 * np.pi)
    ai = np.minimum((ang / (2 * np.pi) * bins).astype(int), bins - 1)
    ri = np.minimum((r / r.max() * rings).astype(int), rings - 1)
    h = np.zeros((rings, bins))
    np.add.at(h, (ri, ai), 1.0)
    # circular smoothing over one bin either side
    return 0.5 * h + 0.25 * (np.roll(h, 1, axis=1) + np.roll(h, -1, axis=1))


def rotation_candidates(ref_pos, test_pos, count=3, bins=360, rings=4) -> list:
    """Likely rotation angles (radians, test -> ref, y-down) about the roots.

    Key points are binned by angle and normalized radius around node 0; the
    circular cross-correlation of the two histograms peaks at the rotation.
    The ``count`` best separated peaks are returned, best first.
    """
    hr = _polar_histogram(ref_pos, bins, rings)
    ht = _polar_histogram(test_pos, bins, rings)
    corr = np.real(np.fft.ifft(np.fft.fft(hr, axis=1) * np.conj(np.fft.fft(ht, axis=1)), axis=1)).sum(axis=0)
    order = np.argsort(-corr, kind="stable")
    picked = []
    for k in order:
        if all(min(abs(k - q), bins - abs(k - q)) > bins // 36 for q in picked):
            picked.append(int(k))
        if len(picked) == count:
            break
    return [2 * np.pi * k / bins for k in picked]


def _nearest_fit(tree, ref_pos, test_pos, proj, cfg):
    """Nearest-neighbour rigid refinement; returns (hits, -eta, tf, proj) or None."""
    tf = None
    for k in range(cfg.refine_iters):
        cutoff = cfg.refine_cap * max(1.0, 3.0 * 0.7 ** k)
        d, j = tree.query(proj)
        inl = d <= cutoff
        if inl.sum() < 2:
            break
        try:
            tf = alignment.fit_rigid(test_pos[inl], ref_pos[j[inl]])
        except DegenerateInputError:
            break
        proj = alignment.project(test_pos, tf)
    if tf is None:
        return None
    d, _ = tree.query(proj)
    return int((d <= cfg.tau).sum()), -float(d.mean()), tf, proj


def _pairwise(ref_pos, proj):
    return np.hypot(ref_pos[:, None, 0] - proj[None, :, 0], ref_pos[:, None, 1] - proj[None, :, 1])


def inlier_first_cost(d, tau) -> np.ndarray:
    """Cost whose minimum assignment has the most pairs within ``tau``, then the least total distance.

    Each pair costs 1 beyond ``tau`` plus eps * d / d_max; with
    eps = 1 / (2 (n + 1)) the distance terms of any assignment sum to less
    than 1/2, so they can only break ties in the inlier count.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.size == 0:
        return d
    eps = 0.5 / (min(d.shape) + 1)
    top = d.max() if d.max() > 0 else 1.0
    return (d > tau).astype(np.float64) + eps * d / top


def _polish(ref_pos, test_pos, tf, proj, cfg):
    """Capped-distance assignment with rigid refits on the inlier pairs."""
    assign = None
    for _ in range(cfg.inlier_refits):
        d = _pairwise(ref_pos, proj)
        assign = matching.assign_munkres(np.minimum(d, cfg.refine_cap))
        idx = np.asarray(assign.pairs, dtype=np.int64).reshape(-1, 2)
        inl = d[idx[:, 0], idx[:, 1]] <= cfg.refine_cap
        if inl.sum() < 2:
            break
        try:
            tf = alignment.fit_rigid(test_pos[idx[inl, 1]], ref_pos[idx[inl, 0]])
        except DegenerateInputError:
            break
        proj = alignment.project(test_pos, tf)
    if assign is None:
        return None
    assign = matching.assign_munkres(inlier_first_cost(_pairwise(ref_pos, proj), cfg.tau))
    idx = np.asarray(assign.pairs, dtype=np.int64).reshape(-1, 2)
    return assign, tf, proj, alignment.score(proj[idx[:, 1]], ref_pos[idx[:, 0]], cfg.tau)


def match_graphs(ref: graph.PatternGraph, test: graph.PatternGraph,
                 weights: Optional[matching.FeatureWeights] = None,
                 cfg: PipelineConfig = PipelineConfig()) -> MatchResult:
    """Assignment and rigid alignment of ``test`` onto ``ref``.

    With ``refine_iters`` and ``inlier_refits`` both 0 this is the plain
    feature assignment followed by one rigid fit.
    """
    w = weights if weights is not None else matching.FeatureWeights.uniform()
    fr, ft = graph.compute_features(ref), graph.compute_features(test)
    nr, nt = graph.normalize_features(fr, ft)
    base = matching.distance_matrix(nr, nt, w).values
    ref_pos, test_pos = ref.positions(), test.positions()
    radius = graph_radius(ref)

    assign = matching.assign_munkres(base)
    tf, proj, sc = _align(assign, ref_pos, test_pos, cfg.tau)
    if cfg.refine_iters:
        starts = [proj]
        thetas = rotation_candidates(ref_pos, test_pos, cfg.rotation_candidates) if cfg.rotation_candidates else []
        for theta in thetas:
            t0 = alignment.RigidTransform(alignment.rotation_matrix(theta), tuple(test_pos[0]), tuple(ref_pos[0]))
            starts.append(alignment.project(test_pos, t0))
        tree = cKDTree(ref_pos)
        best = None
        for start in starts:
            r = _nearest_fit(tree, ref_pos, test_pos, start, cfg)
            if r is not None and (best is None or r[:2] > best[:2]):
                best = r
        if best is not None:
            tf, proj = best[2], best[3]
    if cfg.inlier_refits:
        polished = _polish(ref_pos, test_pos, tf, proj, cfg)
        if polished is not None:
            assign, tf, proj, sc = polished
    return MatchResult(assign, tf, sc, sc.similarity(radius) if radius > 0 else 0.0, proj)


# ---------------------------------------------------------------------------
# weight learning

DEFAULT_LEARN_SPECS = tuple(
    [dict(rotation_deg=a) for a in (15.0, 45.0, 90.0, 160.0, 250.0)]
    + [dict(perspective_ratio=r) for r in (0.1, 0.3)]
    + [dict(noise_var=0.01)]
)


def ground_truth_pairs(ref: graph.PatternGraph, test: graph.PatternGraph, spec, shape, tau) -> tuple:
    """One-to-one (ref, test) pairs whose mapped reference point lies within ``tau``."""
    from treekp.augment import augment_points

    mapped = augment_points(ref.positions(), spec, shape)
    d = _pairwise(mapped, test.positions())
    big = tau + 1.0
    assign = matching.assign_munkres(np.minimum(d, big))
    return tuple((i, j) for i, j in assign.pairs if d[i, j] <= tau)


def learn_pattern_weights(img, ref: graph.PatternGraph, cfg: PipelineConfig = PipelineConfig(),
                          specs=None, seed=0) -> matching.FeatureWeights:
    """Weights from augmented copies of ``img`` with exact ground-truth pairs."""
    from treekp.augment import AugmentSpec, augment

    specs = [AugmentSpec(rng_seed=seed + i, **kw) for i, kw in enumerate(specs or DEFAULT_LEARN_SPECS)]
    ref_feats = graph.compute_features(ref)
    samples = []
    for spec in specs:
        g = extract(augment(img, spec), cfg).graph
        pairs = ground_truth_pairs(ref, g, spec, img.shape, cfg.tau)
        if pairs:
            samples.append((graph.compute_features(g), pairs))
    return matching.learn_weights(ref_feats, samples)
