import numpy as np
import pytest

from ambimatch.graphgen import RngStream, dump_edge_list, relabel, sample_pair
from ambimatch.model import Labeling, validate_distribution


def test_stream_is_reproducible():
    a = RngStream(5, 3).child(1).generator().random(4)
    b = RngStream(5, 3).child(1).generator().random(4)
    c = RngStream(5, 3).child(2).generator().random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_relabel_moves_entries():
    rng = np.random.default_rng(0)
    a = np.triu(rng.integers(0, 2, (5, 5)), 1)
    a = a + a.T
    s = Labeling.random(5, rng)
    out = relabel(a, s)
    for i in range(5):
        for j in range(5):
            assert out[s(i), s(j)] == a[i, j]


def test_truth_aligns_pair(corr):
    pair = sample_pair(12, corr, rng=RngStream(1, 0))
    aligned = relabel(pair.adj2, pair.truth)
    assert pair.ut2().data.tolist() == aligned[np.triu_indices(12, 1)].tolist()
    assert pair.adj1.shape == (12, 12)


def test_perfect_correlation_gives_identical_aligned_graphs(perfect):
    pair = sample_pair(15, perfect, rng=2)
    np.testing.assert_array_equal(pair.ut1().data, pair.ut2().data)


def test_identity_truth(corr):
    pair = sample_pair(6, corr, truth=Labeling.identity(6), rng=4)
    assert pair.truth == Labeling.identity(6)


def test_empirical_joint_matches_distribution(tern):
    # chi-square style check on one large draw
    pair = sample_pair(200, tern, rng=9)
    u1, u2 = pair.ut1().data, pair.ut2().data
    counts = np.zeros((3, 3))
    np.add.at(counts, (u1, u2), 1)
    freq = counts / u1.size
    np.testing.assert_allclose(freq, tern.joint, atol=0.01)


def test_zero_cells_never_sampled():
    d = validate_distribution([[0.5, 0.0], [0.2, 0.3]])
    pair = sample_pair(40, d, rng=1)
    u1, u2 = pair.ut1().data, pair.ut2().data
    assert not np.any((u1 == 0) & (u2 == 1))


def test_edge_list_dump(tmp_path, corr):
    pair = sample_pair(4, corr, truth=Labeling.identity(4), rng=0)
    path = tmp_path / "e.txt"
    dump_edge_list(pair, path)
    lines = path.read_text().split("\n")
    lines = [ln for ln in lines if ln]
    assert len(lines) == 6
    i, j, a1, a2 = map(int, lines[0].split())
    assert (i, j) == (1, 2) and a1 == pair.adj1[0, 1] and a2 == pair.adj2[0, 1]


def test_bad_n(corr):
    with pytest.raises(ValueError):
        sample_pair(0, corr, rng=0)


def test_point_mass_gives_complete_graphs():
    d = validate_distribution([[0.0, 0.0], [0.0, 1.0]])
    pair = sample_pair(5, d, truth=Labeling.identity(5), rng=0)
    full = np.ones((5, 5), dtype=int) - np.eye(5, dtype=int)
    np.testing.assert_array_equal(pair.adj1, full)
    np.testing.assert_array_equal(pair.adj2, full)


def test_relabel_single_edge():
    a = np.zeros((3, 3), dtype=int)
    a[0, 1] = a[1, 0] = 1
    # vertex 1 -> 2, 2 -> 3, 3 -> 1 in 1-based terms
    out = relabel(a, Labeling(np.array([1, 2, 0])))
    expect = np.zeros((3, 3), dtype=int)
    expect[1, 2] = expect[2, 1] = 1
    np.testing.assert_array_equal(out, expect)
