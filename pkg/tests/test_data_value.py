import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.cluster.hierarchy import fcluster, linkage

from redundant_labels.data_value import (
    PercentileVector,
    cluster_activities,
    data_value_matrix,
    extract_trimmed,
    histogram_pair,
    pair_score,
    percentile_vector,
    select_attribute,
    sturges_bins,
)
from redundant_labels.emd import Signature, abs_ground, emd

from logs import base_log, log_from_sequences


def pv(name, q1, q3):
    return PercentileVector(name, q1, q3, 10)


def members(clusters):
    return sorted(sorted(c.members) for c in clusters)


@pytest.mark.parametrize("values, q1, q3", [
    ([1, 2, 3, 4, 5], 2.0, 4.0),
    ([0, 1], 0.25, 0.75),
    ([7.5], 7.5, 7.5),
])
def test_percentiles(values, q1, q3):
    v = percentile_vector(values)
    assert (v.q1, v.q3) == pytest.approx((q1, q3))


def test_close_vectors_merge():
    assert members(cluster_activities([pv("a", 0.3, 0.5), pv("b", 0.31, 0.52)], 0.1)) == [["a", "b"]]


def test_far_vectors_stay_apart():
    assert members(cluster_activities([pv("a", 0, 0), pv("b", 10, 10)], 0.1)) == [["a"], ["b"]]


def test_single_vector():
    assert members(cluster_activities([pv("a", 1, 2)], 0.5)) == [["a"]]


def test_merge_is_strictly_below_threshold():
    assert members(cluster_activities([pv("a", 0, 0), pv("b", 0, 1)], 1.0)) == [["a"], ["b"]]


def test_average_linkage_not_single():
    # c is within 1.1 of b but its average distance to {a, b} is 1.55
    vecs = [pv("a", 0, 0), pv("b", 1, 0), pv("c", 2.1, 0)]
    assert members(cluster_activities(vecs, 1.5)) == [["a", "b"], ["c"]]


@pytest.mark.parametrize("seed", range(25))
def test_clustering_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    pts = rng.random((n, 2)) * 5
    theta = float(rng.uniform(0.3, 3.0))
    names = [f"a{i:02d}" for i in range(n)]
    ours = members(cluster_activities([pv(nm, *p) for nm, p in zip(names, pts)], theta))
    labels = fcluster(linkage(pts, "average"), t=theta * (1 - 1e-12), criterion="distance")
    ref = {}
    for nm, lab in zip(names, labels):
        ref.setdefault(lab, []).append(nm)
    assert ours == sorted(sorted(g) for g in ref.values())


def test_clustering_is_monotone_in_theta():
    rng = np.random.default_rng(11)
    vecs = [pv(f"a{i}", *p) for i, p in enumerate(rng.random((15, 2)) * 4)]
    previous = None
    for theta in (0.05, 0.2, 0.5, 1.0, 2.0, 5.0):
        parts = members(cluster_activities(vecs, theta))
        assert sorted(x for g in parts for x in g) == sorted(v.activity for v in vecs)
        if previous is not None:
            # every coarser cluster is a union of finer ones
            for g in previous:
                assert any(set(g) <= set(h) for h in parts)
        previous = parts


def test_sturges():
    assert sturges_bins(100) == 8
    assert sturges_bins(1) == 1
    assert sturges_bins(2) == 2
    assert sturges_bins(64) == 7
    assert sturges_bins(65) == 8
    assert sturges_bins(100, "floor") == 7
    for n in range(1, 2000):
        assert sturges_bins(n) == math.ceil(math.log2(n)) + 1


def test_histogram_pair_shape():
    rng = np.random.default_rng(0)
    h = histogram_pair(rng.random(100), rng.random(300))
    assert h.bins == 8 and len(h.left_edges) == 8
    assert sum(h.weights_a) == pytest.approx(1.0, abs=1e-9)
    assert sum(h.weights_b) == pytest.approx(1.0, abs=1e-9)
    assert h.left_edges[0] == h.lo


def test_identical_data_gives_identical_histograms():
    v = [1.0, 2.0, 2.5, 9.0]
    h = histogram_pair(v, v)
    assert h.weights_a == h.weights_b
    assert pair_score(v, v) == 0.0


def test_constant_data_collapses_to_one_bin():
    h = histogram_pair([3.0, 3.0], [3.0])
    assert h.bins == 1
    assert pair_score([3.0, 3.0], [3.0]) == 0.0


def test_four_bin_signature_is_legal():
    s = Signature((10.0, 15.0, 20.0, 25.0), (0.2, 0.3, 0.2, 0.3))
    assert emd(s, s, abs_ground)[0] == 0.0


def test_score_matches_general_solver():
    rng = np.random.default_rng(4)
    for _ in range(20):
        va, vb = rng.normal(0, 1, 50), rng.normal(0.5, 2, 80)
        h = histogram_pair(va, vb)
        ref = emd(*h.signatures(), abs_ground)[0] / h.range
        assert pair_score(va, vb) == pytest.approx(ref, abs=1e-9)


def test_trim():
    log = log_from_sequences([["a"] * 100], values={(0, j): {"v": float(j)} for j in range(100)})
    assert len(extract_trimmed(log, "a", 0.01)) == 98
    assert extract_trimmed(log, "a", 0.0) == [float(j) for j in range(100)]
    with pytest.raises(ValueError):
        extract_trimmed(log, "a", 0.5)


def test_no_values_is_not_applicable():
    assert extract_trimmed(log_from_sequences([["a"]]), "a") is None


def test_attribute_selection_prefers_most_values():
    log = log_from_sequences([["a", "a", "a"]], values={
        (0, 0): {"x": 1.0, "y": 1.0}, (0, 1): {"y": 2.0}, (0, 2): {"x": 3.0, "y": 3.0}})
    assert select_attribute(log, "a") == "y"
    tie = log_from_sequences([["a"]], values={(0, 0): {"y": 1.0, "x": 2.0}})
    assert select_attribute(tie, "a") == "x"


def test_matrix_cases():
    vals = {}
    seqs = []
    rng = np.random.default_rng(2)
    for i in range(40):
        seqs.append(["p", "q", "far", "none1", "none2"])
        vals[i, 0] = {"v": float(rng.normal(5, 1))}
        vals[i, 1] = {"v": float(rng.normal(5, 1))}
        vals[i, 2] = {"v": float(rng.normal(500, 1))}
    m = data_value_matrix(log_from_sequences(seqs, vals))
    assert 0.0 <= m["p", "q"] < 0.3
    assert m["p", "far"] == 1.0
    assert m["p", "none1"] == 1.0
    assert m["none1", "none2"] is None


def test_matrix_range_on_generated_log():
    m = data_value_matrix(base_log(300))
    assert all(v is None or 0.0 <= v <= 1.0 for _, v in m.items())


datasets = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=60)


@settings(max_examples=200, deadline=None)
@given(datasets, datasets)
def test_score_in_unit_interval(va, vb):
    assert 0.0 <= pair_score(va, vb) <= 1.0


@pytest.mark.parametrize("seed", range(50))
def test_affine_invariance(seed):
    rng = np.random.default_rng(seed)
    va = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 3), int(rng.integers(5, 200)))
    vb = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 3), int(rng.integers(5, 200)))
    c = rng.uniform(0.01, 100) * rng.choice([-1, 1])
    t = rng.uniform(-1000, 1000)
    assert pair_score(c * va + t, c * vb + t) == pytest.approx(pair_score(va, vb), abs=1e-9)
