"""Sampling and serialization of labelled two-block SBM graphs."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import LabelSet, ModelParams

EXACT_PAIR_LIMIT = 20000


class GraphFormatError(ValueError):
    pass


@dataclass(eq=False)
class LabelledGraph:
    """``n`` nodes, hidden types, and an edge list ``(u, v, label)`` with ``u < v``.

    Edge labels are stored as indices into ``labels``.
    """

    n: int
    types: np.ndarray
    u: np.ndarray
    v: np.ndarray
    label_idx: np.ndarray
    labels: LabelSet

    def __post_init__(self):
        self.types = np.asarray(self.types, dtype=np.int8)
        self.u = np.asarray(self.u, dtype=np.int64)
        self.v = np.asarray(self.v, dtype=np.int64)
        self.label_idx = np.asarray(self.label_idx, dtype=np.int64)

    @property
    def num_edges(self) -> int:
        return len(self.u)

    @property
    def edges(self) -> list[tuple[int, int, str]]:
        names = self.labels.labels
        return [(int(a), int(b), names[k]) for a, b, k in zip(self.u, self.v, self.label_idx)]

    def degrees(self) -> np.ndarray:
        return np.bincount(np.concatenate([self.u, self.v]), minlength=self.n)

    def validate(self, balanced: bool = True) -> None:
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        if len(self.types) != self.n or not np.isin(self.types, (0, 1)).all():
            raise ValueError("types must be n values in {0, 1}")
        if balanced and (self.n % 2 or int(self.types.sum()) != self.n // 2):
            raise ValueError("types are not a balanced partition")
        if not (len(self.u) == len(self.v) == len(self.label_idx)):
            raise ValueError("edge arrays differ in length")
        if len(self.u):
            if self.u.min() < 0 or self.v.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if np.any(self.u >= self.v):
                raise ValueError("edges must satisfy u < v (no self-loops)")
            keys = self.u * self.n + self.v
            if len(np.unique(keys)) != len(keys):
                raise ValueError("duplicate edge")
            if self.label_idx.min() < 0 or self.label_idx.max() >= len(self.labels):
                raise ValueError("edge label outside the label set")

    def __eq__(self, other):
        if not isinstance(other, LabelledGraph):
            return NotImplemented
        return (self.n == other.n and self.labels == other.labels
                and np.array_equal(self.types, other.types)
                and np.array_equal(self.u, other.u)
                and np.array_equal(self.v, other.v)
                and np.array_equal(self.label_idx, other.label_idx))


def _draw_labels(rng, same: np.ndarray, params: ModelParams) -> np.ndarray:
    k = len(params.labels)
    out = np.empty(len(same), dtype=np.int64)
    ns = int(same.sum())
    out[same] = rng.choice(k, size=ns, p=params.mu.as_array())
    out[~same] = rng.choice(k, size=len(same) - ns, p=params.nu.as_array())
    return out


def _pairs_exact(rng, types, p_in, p_out):
    n = len(types)
    us, vs = [], []
    for i in range(n - 1):
        draws = rng.random(n - 1 - i)
        prob = np.where(types[i + 1:] == types[i], p_in, p_out)
        hit = np.flatnonzero(draws < prob)
        if len(hit):
            us.append(np.full(len(hit), i, dtype=np.int64))
            vs.append(hit + i + 1)
    if not us:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(us), np.concatenate(vs)


def _distinct_pairs(rng, count, n_pairs, decode):
    # uniform subset of `count` distinct pair codes out of `n_pairs`
    chosen = np.empty(0, dtype=np.int64)
    while len(chosen) < count:
        extra = rng.integers(0, n_pairs, size=count - len(chosen))
        chosen = np.unique(np.concatenate([chosen, extra]))
    chosen = rng.permutation(chosen)[:count]
    return decode(chosen)


def _pairs_binomial(rng, types, p_in, p_out):
    blocks = [np.flatnonzero(types == t) for t in (0, 1)]
    us, vs = [], []
    for nodes in blocks:
        m = len(nodes)
        n_pairs = m * (m - 1) // 2
        cnt = rng.binomial(n_pairs, p_in) if n_pairs else 0

        def decode(codes, nodes=nodes, m=m):
            # code -> (i, j), i < j, row-major over the upper triangle
            i = (m - 2 - np.floor(np.sqrt(-8.0 * codes + 4.0 * m * (m - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
            j = codes + i + 1 - m * (m - 1) // 2 + (m - i) * ((m - i) - 1) // 2
            return nodes[i], nodes[j]

        a, b = _distinct_pairs(rng, cnt, n_pairs, decode)
        us.append(a)
        vs.append(b)
    n0, n1 = len(blocks[0]), len(blocks[1])
    cnt = rng.binomial(n0 * n1, p_out) if n0 * n1 else 0
    a, b = _distinct_pairs(rng, cnt, n0 * n1,
                           lambda c: (blocks[0][c // n1], blocks[1][c % n1]))
    us.append(a)
    vs.append(b)
    u, v = np.concatenate(us), np.concatenate(vs)
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    order = np.lexsort((hi, lo))
    return lo[order], hi[order]


def sample_graph(params: ModelParams, n: int, seed: int) -> LabelledGraph:
    """Draw a labelled SBM graph on ``n`` nodes (``n`` even).

    Types come from a uniformly random balanced partition. Pairs are linked
    with probability ``a/n`` (same type) or ``b/n`` (different type) and
    each edge label is drawn from ``mu`` or ``nu`` accordingly. Edges are
    returned sorted by ``(u, v)``.
    """
    if n < 2 or n % 2:
        raise ValueError(f"n must be an even integer >= 2, got {n}")
    p_in, p_out = params.a / n, params.b / n
    if p_in > 1 or p_out > 1:
        raise ValueError(f"edge probability exceeds 1 (a/n={p_in}, b/n={p_out})")
    rng = np.random.default_rng(seed)
    types = np.ones(n, dtype=np.int8)
    types[rng.permutation(n)[: n // 2]] = 0
    if n <= EXACT_PAIR_LIMIT:
        u, v = _pairs_exact(rng, types, p_in, p_out)
    else:
        u, v = _pairs_binomial(rng, types, p_in, p_out)
    same = types[u] == types[v]
    label_idx = _draw_labels(rng, same, params)
    return LabelledGraph(n, types, u, v, label_idx, params.labels)


def types_path_for(path) -> Path:
    return Path(str(path) + ".types")


def write_graph(graph: LabelledGraph, destination, types_destination=None) -> None:
    """Write ``n <n>`` then one ``u v label`` line per edge.

    Hidden types go to a companion file (default ``<destination>.types``),
    one ``node type`` per line, so an inference run reading only the edge
    list never sees them. Pass ``types_destination=False`` to skip it.
    """
    names = graph.labels.labels
    lines = [f"n {graph.n}"]
    lines.extend(f"{a} {b} {names[k]}" for a, b, k in
                 zip(graph.u.tolist(), graph.v.tolist(), graph.label_idx.tolist()))
    _write_lines(destination, lines)
    if types_destination is False:
        return
    if types_destination is None:
        types_destination = types_path_for(destination)
    write_node_values(types_destination, graph.types.tolist())


def write_node_values(destination, values) -> None:
    _write_lines(destination, [f"{i} {v}" for i, v in enumerate(values)])


def _write_lines(destination, lines) -> None:
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
        return
    try:
        with open(destination, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {os.fspath(destination)}: {exc}") from exc


def _read_lines(source) -> list[str]:
    if hasattr(source, "read"):
        return source.read().splitlines()
    with open(source, encoding="utf-8") as fh:
        return fh.read().splitlines()


def read_graph(source, labels: LabelSet, types_source=None) -> LabelledGraph:
    """Parse an edge-list file written by :func:`write_graph`.

    ``types_source`` defaults to the companion ``.types`` file when reading
    from a path and that file exists; otherwise, or with
    ``types_source=False``, types are all zero.
    """
    lines = _read_lines(source)
    if not lines:
        raise GraphFormatError("line 1: empty file, expected 'n <count>'")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "n":
        raise GraphFormatError(f"line 1: expected 'n <count>', got {lines[0]!r}")
    try:
        n = int(head[1])
    except ValueError:
        raise GraphFormatError(f"line 1: bad node count {head[1]!r}") from None
    if n < 1:
        raise GraphFormatError(f"line 1: node count must be positive, got {n}")
    index = {l: k for k, l in enumerate(labels)}
    us, vs, ks = [], [], []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise GraphFormatError(f"line {lineno}: expected 'u v label', got {line!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: non-integer node index in {line!r}") from None
        if not (0 <= a < n and 0 <= b < n):
            raise GraphFormatError(f"line {lineno}: node index out of range [0, {n})")
        if a == b:
            raise GraphFormatError(f"line {lineno}: self-loop on node {a}")
        if a > b:
            raise GraphFormatError(f"line {lineno}: expected u < v, got {a} {b}")
        if (a, b) in seen:
            raise GraphFormatError(f"line {lineno}: duplicate edge {a} {b}")
        if parts[2] not in index:
            raise GraphFormatError(f"line {lineno}: unknown label {parts[2]!r}")
        seen.add((a, b))
        us.append(a)
        vs.append(b)
        ks.append(index[parts[2]])
    if types_source is None and not hasattr(source, "read"):
        candidate = types_path_for(source)
        if candidate.exists():
            types_source = candidate
    types = np.zeros(n, dtype=np.int8)
    if types_source is not None and types_source is not False:
        types = read_node_values(types_source, n, int_values=True).astype(np.int8)
        if not np.isin(types, (0, 1)).all():
            raise GraphFormatError("types file: values must be 0 or 1")
    return LabelledGraph(n, types, np.array(us, dtype=np.int64),
                         np.array(vs, dtype=np.int64), np.array(ks, dtype=np.int64), labels)


def read_node_values(source, n: int, int_values: bool = False) -> np.ndarray:
    """Read ``node value`` lines covering nodes ``0..n-1``."""
    out = np.zeros(n, dtype=np.int64 if int_values else float)
    seen = np.zeros(n, dtype=bool)
    for lineno, line in enumerate(_read_lines(source), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"line {lineno}: expected 'node value', got {line!r}")
        try:
            i = int(parts[0])
            val = int(parts[1]) if int_values else float(parts[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: cannot parse {line!r}") from None
        if not 0 <= i < n:
            raise GraphFormatError(f"line {lineno}: node index {i} out of range [0, {n})")
        out[i] = val
        seen[i] = True
    if not seen.all():
        raise GraphFormatError(f"missing values for {int((~seen).sum())} nodes")
    return out
