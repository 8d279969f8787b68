import itertools

import numpy as np
import pytest

from lsbm.graphgen import LabelledGraph
from lsbm.model import LabelSet, ModelParams, derive_label_quantities
from lsbm.tree import LabelledTree

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_params(rng, n_labels=None, equal_ab=False, a_max=5.0):
    k = n_labels or int(rng.integers(1, 4))
    a = float(rng.uniform(0.2, a_max))
    b = a if equal_ab else float(rng.uniform(0.2, a_max))
    mu = rng.dirichlet(np.ones(k))
    nu = rng.dirichlet(np.ones(k))
    return ModelParams.build(a, b, [f"l{i}" for i in range(k)], mu, nu)


def random_forest(rng, n, labels: LabelSet, edge_prob=0.8) -> LabelledGraph:
    """Random acyclic graph: each node i > 0 links to an earlier node with probability edge_prob."""
    us, vs = [], []
    for i in range(1, n):
        if rng.random() < edge_prob:
            us.append(int(rng.integers(0, i)))
            vs.append(i)
    # random relabelling so edges are not always (small, large) in insertion order
    perm = rng.permutation(n)
    u = perm[np.array(us, dtype=int)] if us else np.array([], dtype=int)
    v = perm[np.array(vs, dtype=int)] if vs else np.array([], dtype=int)
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    order = np.lexsort((hi, lo))
    lab = rng.integers(0, len(labels), size=len(lo))
    types = np.zeros(n, dtype=np.int8)
    return LabelledGraph(n, types, lo[order], hi[order], lab, labels)


def random_tree(rng, n_nodes, labels: LabelSet) -> LabelledTree:
    """Random recursive tree in breadth-first order."""
    parent = [-1]
    depth = [0]
    for i in range(1, n_nodes):
        p = int(rng.integers(0, i))
        parent.append(p)
        depth.append(depth[p] + 1)
    # reorder by depth so parents precede children and generations are contiguous
    order = np.argsort(np.array(depth), kind="stable")
    inv = np.empty(n_nodes, dtype=int)
    inv[order] = np.arange(n_nodes)
    new_parent = np.array([-1] + [inv[parent[o]] for o in order[1:]])
    lab = np.concatenate([[-1], rng.integers(0, len(labels), size=n_nodes - 1)])
    return LabelledTree(new_parent, lab, labels)


def enumerate_root_posterior(tree: LabelledTree, d: int, leaf_types: dict, params) -> float:
    """P(root = 1 | labels, leaf types) by summing the broadcast law over all type configurations."""
    eps = derive_label_quantities(params).eps
    nodes = np.flatnonzero(tree.depth <= d)
    num = den = 0.0
    for config in itertools.product((0, 1), repeat=len(nodes)):
        t = dict(zip(nodes.tolist(), config))
        if any(t[j] != v for j, v in leaf_types.items()):
            continue
        w = 0.5
        for j in nodes[1:]:
            e = eps[tree.label_idx[j]]
            w *= e if t[j] != t[int(tree.parent[j])] else 1 - e
        den += w
        if t[0] == 1:
            num += w
    return num / den
