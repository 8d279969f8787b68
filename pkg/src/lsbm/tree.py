"""Labelled Galton-Watson trees, the broadcast process and root reconstruction.

Trees are stored as flat arrays in breadth-first order: node 0 is the root
and every parent index is smaller than its children's. All quantities that
depend on the labels only through the channel parameter theta are
computed in log space so deep paths cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import expit, logsumexp

from .bp import edge_transfer
from .graphgen import GraphFormatError, LabelledGraph, _read_lines, _write_lines
from .model import LabelSet, ModelParams, derive_label_quantities, observed_label_dist

MAX_TREE_NODES = 20_000_000


@dataclass(eq=False)
class LabelledTree:
    parent: np.ndarray
    label_idx: np.ndarray
    labels: LabelSet
    types: np.ndarray | None = None
    depth: np.ndarray | None = None

    def __post_init__(self):
        self.parent = np.asarray(self.parent, dtype=np.int64)
        self.label_idx = np.asarray(self.label_idx, dtype=np.int64)
        n = len(self.parent)
        if n == 0 or self.parent[0] != -1:
            raise ValueError("node 0 must be the root (parent -1)")
        if len(self.label_idx) != n:
            raise ValueError("label array length differs from node count")
        kids = self.parent[1:]
        if np.any(kids < 0) or np.any(kids >= np.arange(1, n)):
            raise ValueError("every non-root parent index must precede its child")
        if n > 1 and (self.label_idx[1:].min() < 0 or self.label_idx[1:].max() >= len(self.labels)):
            raise ValueError("edge label outside the label set")
        if self.depth is None:
            depth = np.zeros(n, dtype=np.int64)
            for i in range(1, n):
                depth[i] = depth[self.parent[i]] + 1
            self.depth = depth
        else:
            self.depth = np.asarray(self.depth, dtype=np.int64)
        if self.types is not None:
            self.types = np.asarray(self.types, dtype=np.int8)
            if len(self.types) != n:
                raise ValueError("types length differs from node count")

    @property
    def size(self) -> int:
        return len(self.parent)

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    def boundary(self, d: int) -> np.ndarray:
        """Nodes at depth exactly ``d``."""
        return np.flatnonzero(self.depth == d)

    def generation_sizes(self, d_max: int | None = None) -> np.ndarray:
        d_max = self.max_depth if d_max is None else d_max
        return np.bincount(self.depth, minlength=d_max + 1)[: d_max + 1]

    def truncate(self, d: int) -> "LabelledTree":
        keep = self.depth <= d
        if keep.all():
            return self
        idx = np.flatnonzero(keep)
        remap = np.full(self.size, -1, dtype=np.int64)
        remap[idx] = np.arange(len(idx))
        parent = np.where(self.parent[idx] >= 0, remap[self.parent[idx]], -1)
        parent[0] = -1
        types = None if self.types is None else self.types[idx]
        return LabelledTree(parent, self.label_idx[idx], self.labels, types, self.depth[idx])

    def without_types(self) -> "LabelledTree":
        return LabelledTree(self.parent, self.label_idx, self.labels, None, self.depth)

    def as_graph(self) -> LabelledGraph:
        """The tree as an undirected labelled graph on the same node indices."""
        child = np.arange(1, self.size)
        types = np.zeros(self.size, np.int8) if self.types is None else self.types
        return LabelledGraph(self.size, types, self.parent[1:], child,
                             self.label_idx[1:], self.labels)

    def __eq__(self, other):
        if not isinstance(other, LabelledTree):
            return NotImplemented
        same_types = (self.types is None and other.types is None) or (
            self.types is not None and other.types is not None
            and np.array_equal(self.types, other.types))
        return (self.labels == other.labels and same_types
                and np.array_equal(self.parent, other.parent)
                and np.array_equal(self.label_idx[1:], other.label_idx[1:]))


@dataclass(frozen=True)
class TreeBounds:
    r_eff: float
    lower: float
    upper: float


def _grow(rng, params: ModelParams, depth_d: int, typed: bool, max_nodes: int):
    mu, nu = params.mu.as_array(), params.nu.as_array()
    m = observed_label_dist(params).as_array()
    k = len(params.labels)
    root_type = int(rng.integers(0, 2))
    parents = [np.array([-1], dtype=np.int64)]
    labels = [np.array([-1], dtype=np.int64)]
    types = [np.array([root_type], dtype=np.int8)]
    depths = [np.zeros(1, dtype=np.int64)]
    cur = np.array([0], dtype=np.int64)
    cur_types = types[0]
    total = 1
    for g in range(1, depth_d + 1):
        if len(cur) == 0:
            break
        if typed:
            n_same = rng.poisson(params.a / 2, size=len(cur))
            n_diff = rng.poisson(params.b / 2, size=len(cur))
            count = n_same + n_diff
        else:
            count = rng.poisson(params.mean_degree, size=len(cur))
        n_kids = int(count.sum())
        total += n_kids
        if total > max_nodes:
            raise MemoryError(f"tree exceeds {max_nodes} nodes at depth {g}")
        par = np.repeat(cur, count)
        if typed:
            starts = np.cumsum(count) - count
            pos = np.arange(n_kids) - np.repeat(starts, count)
            same = pos < np.repeat(n_same, count)
            kid_types = np.where(same, np.repeat(cur_types, count),
                                 1 - np.repeat(cur_types, count)).astype(np.int8)
            lab = np.empty(n_kids, dtype=np.int64)
            lab[same] = rng.choice(k, size=int(same.sum()), p=mu)
            lab[~same] = rng.choice(k, size=int((~same).sum()), p=nu)
        else:
            kid_types = np.zeros(n_kids, dtype=np.int8)
            lab = rng.choice(k, size=n_kids, p=m)
        new = np.arange(total - n_kids, total, dtype=np.int64)
        parents.append(par)
        labels.append(lab)
        types.append(kid_types)
        depths.append(np.full(n_kids, g, dtype=np.int64))
        cur, cur_types = new, kid_types
    return (np.concatenate(parents), np.concatenate(labels),
            np.concatenate(types), np.concatenate(depths))


def sample_gw_tree(params: ModelParams, depth_d: int, seed,
                   max_nodes: int = MAX_TREE_NODES) -> LabelledTree:
    """Typed branching tree down to depth ``depth_d``.

    The root type is uniform; each node has Poi(a/2) children of its own
    type and Poi(b/2) of the other type. Labels follow ``mu`` on
    same-type edges and ``nu`` otherwise.
    """
    if depth_d < 0:
        raise ValueError("depth must be >= 0")
    rng = np.random.default_rng(seed)
    parent, lab, types, depth = _grow(rng, params, depth_d, True, max_nodes)
    return LabelledTree(parent, lab, params.labels, types, depth)


def sample_gw_skeleton(params: ModelParams, depth_d: int, seed,
                       max_nodes: int = MAX_TREE_NODES) -> LabelledTree:
    """Untyped Poi(lambda) tree whose edge labels are i.i.d. from the observed label law."""
    if depth_d < 0:
        raise ValueError("depth must be >= 0")
    rng = np.random.default_rng(seed)
    parent, lab, _, depth = _grow(rng, params, depth_d, False, max_nodes)
    return LabelledTree(parent, lab, params.labels, None, depth)


def sample_edge_labels(params: ModelParams, size: int, seed) -> np.ndarray:
    """Labels of ``size`` independent parent-child edges of the typed tree.

    The child shares its parent's type with probability a/(a+b); the label
    then follows ``mu`` or ``nu``.
    """
    rng = np.random.default_rng(seed)
    same = rng.random(size) < params.a / (params.a + params.b)
    k = len(params.labels)
    out = np.empty(size, dtype=np.int64)
    out[same] = rng.choice(k, size=int(same.sum()), p=params.mu.as_array())
    out[~same] = rng.choice(k, size=int((~same).sum()), p=params.nu.as_array())
    return out


def _edge_eps(tree: LabelledTree, params: ModelParams) -> np.ndarray:
    eps = derive_label_quantities(params).eps
    out = np.zeros(tree.size)
    out[1:] = eps[tree.label_idx[1:]]
    return out


def _broadcast_batch(tree: LabelledTree, params: ModelParams, rng, reps: int) -> np.ndarray:
    eps = _edge_eps(tree, params)
    types = np.empty((reps, tree.size), dtype=np.int8)
    types[:, 0] = rng.integers(0, 2, size=reps)
    flips = (rng.random((reps, tree.size)) < eps).astype(np.int8)
    for g in range(1, tree.max_depth + 1):
        nodes = np.flatnonzero(tree.depth == g)
        types[:, nodes] = types[:, tree.parent[nodes]] ^ flips[:, nodes]
    return types


def broadcast_types(skeleton: LabelledTree, params: ModelParams, seed) -> LabelledTree:
    """Uniform root type, copied along each edge and flipped with probability eps(label)."""
    rng = np.random.default_rng(seed)
    types = _broadcast_batch(skeleton, params, rng, 1)[0]
    return LabelledTree(skeleton.parent, skeleton.label_idx, skeleton.labels, types, skeleton.depth)


def _root_log_ratio(tree: LabelledTree, d: int, leaf_types: np.ndarray,
                    params: ModelParams, clamp: float) -> np.ndarray:
    """Root log ratios for a batch of boundary observations (rows of ``leaf_types``)."""
    reps = leaf_types.shape[0]
    keep = tree.depth <= d
    lr = np.zeros((int(keep.sum()), reps))
    # BFS order: nodes with depth <= d are exactly the first keep.sum() indices
    boundary = tree.boundary(d)
    lr[boundary] = np.where(leaf_types.T == 1, clamp, -clamp)
    for g in range(d, 0, -1):
        nodes = np.flatnonzero(tree.depth == g)
        contrib = edge_transfer(lr[nodes], tree.label_idx[nodes][:, None], params)
        np.add.at(lr, tree.parent[nodes], contrib)
    return lr[0]


def _check_bfs(tree: LabelledTree):
    if np.any(np.diff(tree.depth) < 0):
        raise ValueError("tree nodes must be ordered by depth")


def ml_root_posterior(tree: LabelledTree, leaf_types: Mapping[int, int], params: ModelParams,
                      d: int | None = None, clamp: float = 30.0) -> float:
    """P(root type = 1 | edge labels, observed types on the depth-``d`` boundary).

    ``d`` defaults to the deepest level of ``tree``. Boundary nodes are
    pinned at log ratio ``+-clamp``; nodes above ``d`` without children
    carry no information.
    """
    _check_bfs(tree)
    d = tree.max_depth if d is None else d
    boundary = tree.boundary(d)
    missing = [int(j) for j in boundary if int(j) not in leaf_types]
    if missing:
        raise ValueError(f"missing leaf observations for nodes {missing[:10]}")
    extra = set(int(k) for k in leaf_types) - set(boundary.tolist())
    if extra:
        raise ValueError(f"observations given for non-boundary nodes {sorted(extra)[:10]}")
    obs = np.array([[leaf_types[int(j)] for j in boundary]], dtype=np.int8)
    return float(expit(_root_log_ratio(tree, d, obs, params, clamp)[0]))


def estimate_delta(skeleton: LabelledTree, d: int, reps: int, params: ModelParams,
                   seed, clamp: float = 30.0) -> tuple[float, float]:
    """Monte Carlo estimate of the root-reconstruction advantage and its standard error.

    Each replication broadcasts fresh types on the fixed skeleton and
    reconstructs the root from depth-``d`` types by maximum likelihood.
    Correct counts 1, a tie counts 1/2; the estimate is ``2 * mean - 1``.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    _check_bfs(skeleton)
    tree = skeleton.truncate(d)
    rng = np.random.default_rng(seed)
    types = _broadcast_batch(tree, params, rng, reps)
    boundary = tree.boundary(d)
    lr = _root_log_ratio(tree, d, types[:, boundary], params, clamp)
    truth = types[:, 0]
    score = np.where(lr == 0, 0.5, ((lr > 0) == (truth == 1)).astype(float))
    delta = 2 * score.mean() - 1
    se = 2 * score.std(ddof=1) / math.sqrt(reps) if reps > 1 else math.inf
    return float(delta), float(se)


def path_log_theta_sq(tree: LabelledTree, params: ModelParams) -> np.ndarray:
    """``sum over the root path of log theta^2`` per node (``-inf`` through a theta = 0 edge)."""
    _check_bfs(tree)
    w = derive_label_quantities(params).weight
    cum = np.zeros(tree.size)
    for g in range(1, tree.max_depth + 1):
        nodes = np.flatnonzero(tree.depth == g)
        cum[nodes] = cum[tree.parent[nodes]] + 2 * w[tree.label_idx[nodes]]
    return cum


def conductance_bounds(tree: LabelledTree, d: int, params: ModelParams) -> TreeBounds:
    """Effective-resistance lower bound and squared-path-product upper bound on Delta.

    Edge ``(i, j)`` gets resistance ``(1 - theta^2) / Theta_j^2``, where
    ``Theta_j`` is the product of theta along the root path to ``j``. The
    network is reduced leaf to root: child branches add as conductances,
    each in series with its edge. A theta = 0 edge is an open circuit.
    """
    _check_bfs(tree)
    theta = derive_label_quantities(params).theta
    cum = path_log_theta_sq(tree, params)
    keep = tree.depth <= d
    n = int(keep.sum())
    r_sub = np.zeros(n)
    cond = np.zeros(n)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        for g in range(d, 0, -1):
            nodes = np.flatnonzero(tree.depth == g)
            th2 = theta[tree.label_idx[nodes]] ** 2
            r_edge = np.exp(np.log1p(-th2) - cum[nodes])
            r_edge = np.where(np.isnan(r_edge), np.inf, r_edge)
            branch = 1.0 / (r_edge + r_sub[nodes])
            np.add.at(cond, tree.parent[nodes], branch)
            above = np.flatnonzero(tree.depth[:n] == g - 1)
            r_sub[above] = 1.0 / cond[above]
        r_eff = float(r_sub[0]) if d > 0 else 0.0
        lower = 0.0 if math.isinf(r_eff) else 1.0 / (1.0 + r_eff)
    theta_sq_sum = float(np.exp(cum[tree.boundary(d)]).sum())
    return TreeBounds(r_eff, lower, math.sqrt(2 * theta_sq_sum))


def sensitivity_chi(tree: LabelledTree, d: int, params: ModelParams) -> float:
    """Linearised variance of the root belief under unit noise on depth-``d`` beliefs."""
    return float(math.exp(log_sensitivity_chi(tree, d, params)))


def log_sensitivity_chi(tree: LabelledTree, d: int, params: ModelParams) -> float:
    cum = path_log_theta_sq(tree, params)[tree.boundary(d)]
    if len(cum) == 0 or np.all(np.isneginf(cum)):
        return -math.inf
    return float(logsumexp(cum))


def chi_profile(tree: LabelledTree, params: ModelParams, d_max: int | None = None) -> np.ndarray:
    """``log chi(d)`` for ``d = 0..d_max`` from a single pass."""
    d_max = tree.max_depth if d_max is None else d_max
    cum = path_log_theta_sq(tree, params)
    out = np.full(d_max + 1, -math.inf)
    for d in range(d_max + 1):
        sel = cum[tree.depth == d]
        if len(sel) and not np.all(np.isneginf(sel)):
            out[d] = logsumexp(sel)
    return out


def chi_slope(log_chi: np.ndarray, depths) -> float:
    """Least-squares slope of ``log chi(d)`` against ``d``."""
    depths = np.asarray(depths)
    return float(np.polyfit(depths, log_chi[depths], 1)[0])


def write_tree(tree: LabelledTree, destination) -> None:
    """One ``child parent label [type]`` line per node; the root line is ``0 -1 .``."""
    names = tree.labels.labels
    lines = []
    for i in range(tree.size):
        par = int(tree.parent[i])
        lab = "." if i == 0 else names[tree.label_idx[i]]
        line = f"{i} {par} {lab}"
        if tree.types is not None:
            line += f" {int(tree.types[i])}"
        lines.append(line)
    _write_lines(destination, lines)


def read_tree(source, labels: LabelSet) -> LabelledTree:
    index = {l: k for k, l in enumerate(labels)}
    parent, lab, types = [], [], []
    for lineno, line in enumerate(_read_lines(source), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise GraphFormatError(f"line {lineno}: expected 'child parent label [type]'")
        try:
            child, par = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: non-integer node index") from None
        if child != len(parent):
            raise GraphFormatError(f"line {lineno}: expected node {len(parent)}, got {child}")
        if child == 0:
            if par != -1:
                raise GraphFormatError(f"line {lineno}: root must have parent -1")
            lab.append(-1)
        else:
            if not 0 <= par < child:
                raise GraphFormatError(f"line {lineno}: parent {par} must precede child {child}")
            if parts[2] not in index:
                raise GraphFormatError(f"line {lineno}: unknown label {parts[2]!r}")
            lab.append(index[parts[2]])
        parent.append(par)
        if len(parts) == 4:
            if parts[3] not in ("0", "1"):
                raise GraphFormatError(f"line {lineno}: type must be 0 or 1")
            types.append(int(parts[3]))
    if not parent:
        raise GraphFormatError("line 1: empty tree file")
    if types and len(types) != len(parent):
        raise GraphFormatError("types given for some nodes but not all")
    return LabelledTree(np.array(parent), np.array(lab), labels,
                        np.array(types, dtype=np.int8) if types else None)
