import io
import math

import numpy as np
import pytest
from scipy import stats

from lsbm import graphgen
from lsbm.graphgen import GraphFormatError, LabelledGraph, read_graph, sample_graph, write_graph
from lsbm.model import LabelSet, ModelParams


def test_zero_connectivity_gives_empty_graph():
    p = ModelParams.build(0.0, 1e-12, ["x"], [1.0], [1.0])
    g = sample_graph(p, 100, 1)
    assert g.num_edges == 0
    g.validate()


def test_mean_degree_concentrates():
    p = ModelParams.two_label(5.0, 5.0, 0.2)
    g = sample_graph(p, 5000, 7)
    g.validate()
    deg = g.degrees()
    se = deg.std(ddof=1) / math.sqrt(len(deg))
    # degrees are weakly dependent; the edge count is exactly binomial
    assert abs(deg.mean() - 5.0) < 3 * se + 5.0 / 5000
    m = g.num_edges
    expected = 2 * (5 / 5000) * (2500 * 2499 / 2) + (5 / 5000) * 2500**2
    var = expected  # Poisson-like, p small
    assert abs(m - expected) < 3 * math.sqrt(var)


def test_degenerate_label_laws():
    p = ModelParams.build(4.0, 4.0, ["+", "-"], [1.0, 0.0], [0.0, 1.0])
    g = sample_graph(p, 400, 3)
    same = g.types[g.u] == g.types[g.v]
    assert np.all(g.label_idx[same] == 0)
    assert np.all(g.label_idx[~same] == 1)
    assert same.any() and (~same).any()


def test_rejects_bad_arguments():
    p = ModelParams.unlabelled(5.0, 1.0)
    with pytest.raises(ValueError):
        sample_graph(p, 3, 0)
    with pytest.raises(ValueError):
        sample_graph(p, 4, 0)  # a/n > 1


def test_seed_determinism():
    p = ModelParams.two_label(3.0, 1.0, 0.3)
    assert sample_graph(p, 500, 11) == sample_graph(p, 500, 11)
    assert sample_graph(p, 500, 11) != sample_graph(p, 500, 12)


def test_block_counts_and_label_frequencies_over_seeds():
    a, b, n = 6.0, 2.0, 400
    p = ModelParams.build(a, b, ["x", "y", "z"], [0.5, 0.3, 0.2], [0.2, 0.2, 0.6])
    within, cross = [], []
    lab_counts = np.zeros(3)
    for s in range(40):
        g = sample_graph(p, n, s)
        same = g.types[g.u] == g.types[g.v]
        within.append(same.sum())
        cross.append((~same).sum())
        lab_counts += np.bincount(g.label_idx[same], minlength=3)
    e_in = (a / n) * (n / 2) * (n / 2 - 1)
    e_out = (b / n) * (n / 2) ** 2
    assert abs(np.mean(within) - e_in) < 3 * math.sqrt(e_in / 40)
    assert abs(np.mean(cross) - e_out) < 3 * math.sqrt(e_out / 40)
    pval = stats.chisquare(lab_counts, lab_counts.sum() * np.array([0.5, 0.3, 0.2])).pvalue
    assert pval > 0.01


def test_binomial_path_matches_model():
    """The large-n sampler: decode covers the triangle and edge rates match."""
    rng = np.random.default_rng(0)
    types = np.zeros(12, dtype=np.int8)
    types[6:] = 1
    # p = 1 must hit every pair exactly once
    u, v = graphgen._pairs_binomial(rng, types, 1.0, 1.0)
    assert len(u) == 66
    assert len(set(zip(u.tolist(), v.tolist()))) == 66
    assert np.all(u < v)
    # statistical check at moderate size
    n = 3000
    types = np.zeros(n, dtype=np.int8)
    types[rng.permutation(n)[: n // 2]] = 1
    u, v = graphgen._pairs_binomial(rng, types, 8 / n, 2 / n)
    same = types[u] == types[v]
    e_in = 8 / n * 2 * (n // 2) * (n // 2 - 1) / 2
    e_out = 2 / n * (n // 2) ** 2
    assert abs(same.sum() - e_in) < 4 * math.sqrt(e_in)
    assert abs((~same).sum() - e_out) < 4 * math.sqrt(e_out)
    keys = u * n + v
    assert len(np.unique(keys)) == len(keys)


def test_large_graph_uses_binomial_sampler():
    p = ModelParams.two_label(3.0, 3.0, 0.2)
    g = sample_graph(p, graphgen.EXACT_PAIR_LIMIT + 2, 5)
    g.validate()
    assert abs(g.num_edges - 3.0 * g.n / 2) < 5 * math.sqrt(3.0 * g.n / 2)


def test_round_trip(tmp_path):
    p = ModelParams.two_label(5.0, 5.0, 0.3)
    g = sample_graph(p, 5000, 9)
    path = tmp_path / "g.txt"
    write_graph(g, path)
    h = read_graph(path, p.labels)
    assert h == g
    assert h.edges == g.edges
    blind = read_graph(path, p.labels, types_source=False)
    assert not blind.types.any()


def test_empty_graph_round_trip(tmp_path):
    ls = LabelSet(("x",))
    g = LabelledGraph(4, [0, 1, 0, 1], [], [], [], ls)
    path = tmp_path / "e.txt"
    write_graph(g, path)
    assert path.read_text() == "n 4\n"
    assert read_graph(path, ls) == g


@pytest.mark.parametrize("body,fragment", [
    ("n 4\n1 1 x\n", "line 2: self-loop"),
    ("n 4\n0 1 x\n2 1 x\n", "line 3: expected u < v"),
    ("n 4\n0 9 x\n", "line 2: node index out of range"),
    ("n 4\n0 1 q\n", "line 2: unknown label"),
    ("n 4\n0 1 x\n0 1 x\n", "line 3: duplicate"),
    ("n 4\n0 1\n", "line 2: expected"),
    ("edges 4\n", "line 1"),
    ("", "line 1"),
])
def test_parse_errors_name_the_line(body, fragment):
    with pytest.raises(GraphFormatError, match=fragment):
        read_graph(io.StringIO(body), LabelSet(("x",)))


def test_types_file_validation(tmp_path):
    ls = LabelSet(("x",))
    (tmp_path / "g.txt").write_text("n 2\n0 1 x\n")
    (tmp_path / "g.txt.types").write_text("0 0\n")
    with pytest.raises(GraphFormatError, match="missing"):
        read_graph(tmp_path / "g.txt", ls)
    (tmp_path / "g.txt.types").write_text("0 0\n1 2\n")
    with pytest.raises(GraphFormatError, match="0 or 1"):
        read_graph(tmp_path / "g.txt", ls)
