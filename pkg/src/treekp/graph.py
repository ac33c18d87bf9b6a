"""Pattern graphs, per-node features and the TPG1 text format.

Node features (one row per key point):

==============  =========================================================
X, Y            pixel position
Level           hops from the root
Angle           atan2(y - y_parent, x - x_parent) in degrees, (-180, 180]
RelativeLength  Euclidean distance to the parent
ChildCount      number of children
ChildLevel      mean subtree height over the children (0 for a leaf)
DistToParentX   x - x_parent (signed)
DistToParentY   y - y_parent (signed)
SiblingCount    other children of the same parent
DistToRoot      Euclidean distance to the root
Index           search order
Type            root / seed / bifurcation / end (categorical)
ParentType      the parent's Type, "none" for the root (categorical)
==============  =========================================================

The root row has zero Angle, RelativeLength, offsets and DistToRoot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from treekp.errors import StructureError
from treekp.keypoints import KINDS, KeyPoint

NUMERIC_FEATURES = (
    "X", "Y", "Level", "Angle", "RelativeLength", "ChildCount", "ChildLevel",
    "DistToParentX", "DistToParentY", "SiblingCount", "DistToRoot", "Index",
)
CATEGORICAL_FEATURES = ("Type", "ParentType")
FEATURE_NAMES = NUMERIC_FEATURES + CATEGORICAL_FEATURES
COL = {name: i for i, name in enumerate(FEATURE_NAMES)}

KIND_CODE = {k: i for i, k in enumerate(KINDS)}
NO_PARENT = -1

TPG_MAGIC = "TPG1"


@dataclass
class PatternGraph:
    nodes: list
    width: int
    height: int

    @property
    def canvas(self) -> tuple:
        return self.width, self.height

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def children(self) -> dict:
        out = {n.index: [] for n in self.nodes}
        for n in self.nodes:
            if n.parent is not None:
                out[n.parent].append(n.index)
        return out

    @property
    def edges(self) -> list:
        return [(n.parent, n.index) for n in self.nodes if n.parent is not None]

    def positions(self) -> np.ndarray:
        return np.array([(n.x, n.y) for n in self.nodes], dtype=np.float64).reshape(-1, 2)

    def kind_counts(self) -> dict:
        out = {k: 0 for k in KINDS}
        for n in self.nodes:
            out[n.kind] += 1
        return out


def build_graph(kps, canvas) -> PatternGraph:
    """Validate parent links and wrap key points as a graph rooted at node 0."""
    kps = list(kps)
    if not kps:
        raise StructureError("no key points")
    for i, n in enumerate(kps):
        if n.index != i:
            raise StructureError(f"node {i} carries index {n.index}")
        if n.kind not in KIND_CODE:
            raise StructureError(f"node {i}: unknown kind {n.kind!r}")
    if kps[0].parent is not None or kps[0].kind != "root":
        raise StructureError("node 0 must be a root without parent")
    for n in kps[1:]:
        if n.parent is None:
            raise StructureError(f"node {n.index} has no parent")
        if not 0 <= n.parent < len(kps):
            raise StructureError(f"node {n.index}: dangling parent {n.parent}")
        if n.kind == "root":
            raise StructureError("only node 0 may be a root")
    # every parent chain must reach the root without revisiting a node
    state = [0] * len(kps)  # 0 unknown, 1 on stack, 2 reaches root
    state[0] = 2
    for start in range(1, len(kps)):
        chain, i = [], start
        while state[i] == 0:
            state[i] = 1
            chain.append(i)
            i = kps[i].parent
        if state[i] == 1:
            raise StructureError(f"cycle in parent links through node {i}")
        for j in chain:
            state[j] = 2
    w, h = canvas
    return PatternGraph(kps, int(w), int(h))


@dataclass
class FeatureTable:
    """Raw feature rows, columns in ``FEATURE_NAMES`` order (categoricals as codes)."""

    values: np.ndarray  # (n, 14)

    def __len__(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, COL[name]]


def _subtree_heights(g: PatternGraph) -> np.ndarray:
    ch = g.children
    height = np.zeros(len(g))
    # parents always precede children in a trace, but do not rely on it
    order = _topo_order(g, ch)
    for i in reversed(order):
        if ch[i]:
            height[i] = 1 + max(height[c] for c in ch[i])
    return height


def _topo_order(g, ch):
    order, stack = [], [0]
    while stack:
        i = stack.pop()
        order.append(i)
        stack.extend(reversed(ch[i]))
    return order


def compute_features(g: PatternGraph) -> FeatureTable:
    n = len(g)
    ch = g.children
    heights = _subtree_heights(g)
    root = g.nodes[0]
    out = np.zeros((n, len(FEATURE_NAMES)))
    for node in g.nodes:
        row = out[node.index]
        row[COL["X"]] = node.x
        row[COL["Y"]] = node.y
        row[COL["Level"]] = node.level
        row[COL["Index"]] = node.index
        kids = ch[node.index]
        row[COL["ChildCount"]] = len(kids)
        row[COL["ChildLevel"]] = float(np.mean([heights[c] + 1 for c in kids])) if kids else 0.0
        row[COL["Type"]] = KIND_CODE[node.kind]
        row[COL["DistToRoot"]] = math.hypot(node.x - root.x, node.y - root.y)
        if node.parent is None:
            row[COL["ParentType"]] = NO_PARENT
            continue
        p = g.nodes[node.parent]
        dx, dy = node.x - p.x, node.y - p.y
        row[COL["DistToParentX"]] = dx
        row[COL["DistToParentY"]] = dy
        row[COL["RelativeLength"]] = math.hypot(dx, dy)
        ang = math.degrees(math.atan2(dy, dx))
        row[COL["Angle"]] = 180.0 if ang == -180.0 else ang
        row[COL["SiblingCount"]] = len(ch[node.parent]) - 1
        row[COL["ParentType"]] = KIND_CODE[p.kind]
    return FeatureTable(out)


@dataclass
class NormalizedFeatures:
    """Numeric columns min-max scaled to [0, 1]; categorical codes untouched."""

    values: np.ndarray  # (n, 14), same layout as FeatureTable

    def __len__(self) -> int:
        return self.values.shape[0]

    def node(self, i: int) -> np.ndarray:
        return self.values[i]


def normalize_features(a: FeatureTable, b: FeatureTable):
    """Joint min-max over the rows of both tables; constant columns become 0.5."""
    if len(a) == 0 or len(b) == 0:
        raise ValueError("feature tables must be non-empty")
    k = len(NUMERIC_FEATURES)
    both = np.vstack([a.values[:, :k], b.values[:, :k]])
    lo, hi = both.min(axis=0), both.max(axis=0)
    span = hi - lo
    const = span == 0

    def scale(t):
        v = t.values.copy()
        num = (v[:, :k] - lo) / np.where(const, 1.0, span)
        num[:, const] = 0.5
        v[:, :k] = num
        return NormalizedFeatures(v)

    return scale(a), scale(b)


# ---------------------------------------------------------------------------
# TPG1 text format
#
#   TPG1 <width> <height> <n_nodes>
#   index,x,y,kind,parent,level,angle,rel_len,dist_root,child_count,sibling_count,merge
#   ... one line per node, in index order
#
# Floats are written with repr() so they round-trip exactly; the root's
# parent is -1. angle..sibling_count are derived and checked on load.
# merge (0/1) flags key points emitted where trace windows collided; lines
# without it are read as merge=0.


def dumps_graph(g: PatternGraph) -> str:
    ft = compute_features(g)
    lines = [f"{TPG_MAGIC} {g.width} {g.height} {len(g)}"]
    for n in g.nodes:
        r = ft.values[n.index]
        lines.append(",".join([
            str(n.index), repr(float(n.x)), repr(float(n.y)), n.kind,
            str(NO_PARENT if n.parent is None else n.parent), str(n.level),
            repr(float(r[COL["Angle"]])), repr(float(r[COL["RelativeLength"]])),
            repr(float(r[COL["DistToRoot"]])), str(int(r[COL["ChildCount"]])),
            str(int(r[COL["SiblingCount"]])), str(int(n.merge)),
        ]))
    return "\n".join(lines) + "\n"


def loads_graph(text: str) -> PatternGraph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise StructureError("empty graph file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != TPG_MAGIC:
        raise StructureError(f"bad header {lines[0]!r}")
    w, h, n = int(head[1]), int(head[2]), int(head[3])
    if len(lines) - 1 != n:
        raise StructureError(f"header says {n} nodes, found {len(lines) - 1}")
    kps = []
    for ln in lines[1:]:
        f = ln.split(",")
        if len(f) not in (11, 12):
            raise StructureError(f"expected 11 or 12 fields, got {len(f)}: {ln!r}")
        if len(f) == 12 and f[11] not in ("0", "1"):
            raise StructureError(f"merge flag must be 0 or 1: {ln!r}")
        parent = int(f[4])
        kps.append(KeyPoint(int(f[0]), float(f[1]), float(f[2]), f[3],
                            None if parent == NO_PARENT else parent, int(f[5]),
                            len(f) == 12 and f[11] == "1"))
    g = build_graph(kps, (w, h))
    ft = compute_features(g)
    for ln, r in zip(lines[1:], ft.values):
        f = ln.split(",")
        if int(f[9]) != int(r[COL["ChildCount"]]) or int(f[10]) != int(r[COL["SiblingCount"]]):
            raise StructureError(f"derived fields disagree with topology: {ln!r}")
    return g


def save_graph(path, g: PatternGraph) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps_graph(g))


def load_graph(path) -> PatternGraph:
    with open(path, encoding="ascii") as fh:
        return loads_graph(fh.read())
