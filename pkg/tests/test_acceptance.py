"""Acceptance gate: one group of tests per criterion.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints a
PASS/FAIL/SKIP line per criterion.  The Sepsis grid runs only when the
``SEPSIS_LOG`` environment variable points at the public XES file.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from redundant_labels.cli import main
from redundant_labels.control_flow import Direction, control_flow_matrix, control_flow_parts, directional_signature, \
    directional_similarity
from redundant_labels.data_value import PercentileVector, cluster_activities, pair_score, sturges_bins
from redundant_labels.detector import DetectorConfig, detect
from redundant_labels.emd import Signature, abs_ground, emd, emd_1d, emd_unit_ground, unit_ground
from redundant_labels.eventlog import load_xes, write_csv
from redundant_labels.evaluation import Metrics, read_pairs, run_grid
from redundant_labels.graphs import build_dfg, build_ifg, incoming, outgoing

from logs import LAB_VALUES, base_log, branch_log, clone_activity
from oracles import emd_lp, random_weights

criterion = pytest.mark.criterion
DATA = Path(__file__).resolve().parent.parent / "data"


# -- 1 ----------------------------------------------------------------------

C1 = criterion(1, "EMD oracle equivalence")


@C1
def test_c1_general_solver_matches_lp_oracle():
    rng = np.random.default_rng(20240101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        m, n = rng.integers(1, 7, size=2)
        wp, wq = random_weights(rng, m), random_weights(rng, n)
        cost = rng.random((m, n)) * rng.choice([1.0, 10.0])
        p = Signature(tuple(range(m)), tuple(wp))
        q = Signature(tuple(range(n)), tuple(wq))
        ours = emd(p, q, lambda i, j: cost[i, j])[0]
        worst = max(worst, abs(ours - emd_lp(wp, wq, cost)))
    elapsed = time.perf_counter() - start
    print(f"max |emd - LP| over 1000 pairs: {worst:.3e}, {elapsed:.1f} s")
    assert worst <= 1e-9
    assert elapsed < 30


def _planar(rng, k):
    pts = {i: rng.random(2) for i in range(k)}
    return pts, (lambda a, b: float(np.linalg.norm(pts[a] - pts[b])))


@C1
def test_c1_symmetry_and_triangle_inequality():
    rng = np.random.default_rng(7)
    for _ in range(300):
        k = 8
        _, d = _planar(rng, k)
        sigs = []
        for _ in range(3):
            size = int(rng.integers(1, 7))
            ids = rng.choice(k, size=size, replace=False)
            sigs.append(Signature(tuple(int(i) for i in ids), tuple(random_weights(rng, size))))
        p, q, r = sigs
        assert emd(p, q, d)[0] == pytest.approx(emd(q, p, d)[0], abs=1e-9)
        assert emd(p, r, d)[0] <= emd(p, q, d)[0] + emd(q, r, d)[0] + 1e-9
        assert emd(p, p, d)[0] <= 1e-12


# -- 2 ----------------------------------------------------------------------

C2 = criterion(2, "Closed-form identities")


@C2
def test_c2_total_variation_identity():
    rng = np.random.default_rng(2)
    alphabet = list("ABCDEFGHIJ")
    for _ in range(1000):
        p = Signature.from_pairs(zip(rng.choice(alphabet, int(rng.integers(1, 7)), replace=False),
                                     random_weights(rng, 6)))
        p = Signature(p.clusters, tuple(np.asarray(p.weights) / sum(p.weights)))
        size = int(rng.integers(1, 7))
        q = Signature(tuple(rng.choice(alphabet, size, replace=False)), tuple(random_weights(rng, size)))
        assert emd_unit_ground(p, q) == pytest.approx(emd(p, q, unit_ground)[0], abs=1e-9)


@C2
def test_c2_one_dimensional_closed_form():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        k = int(rng.integers(1, 9))
        lo, width = rng.uniform(-100, 100), rng.uniform(0.01, 20)
        edges = tuple(lo + i * width for i in range(k))
        p = Signature(edges, tuple(random_weights(rng, k)))
        q = Signature(edges, tuple(random_weights(rng, k)))
        assert emd_1d(p, q) == pytest.approx(emd(p, q, abs_ground)[0], abs=1e-9)


@C2
def test_c2_literal_unit_ground_example():
    # Exact EMD of the literal signatures; P carries 0.96 of mass.
    p = Signature(("C", "D", "F"), (0.46, 0.48, 0.02))
    q = Signature(("C", "D"), (0.5, 0.5))
    value = emd(p, q, unit_ground)[0]
    print(f"EMD of the literal worked-example signatures: {value!r}")
    assert value == pytest.approx(0.06, abs=1e-9)


# -- 3 ----------------------------------------------------------------------

C3 = criterion(3, "Hand-built follows-graph fixture")


@pytest.fixture(scope="module")
def branch():
    log = branch_log()
    return log, build_dfg(log), build_ifg(log)


@C3
def test_c3_fixture_realizes_stated_facts(branch):
    log, dfg, ifg = branch
    assert outgoing(dfg, "A") == {("H", 50), ("B", 50)}
    assert {b for b, _ in incoming(dfg, "C")} == {"H", "B"}
    h = directional_signature(dfg, "H", Direction.OUTGOING).signature.as_dict()
    assert (h["C"], h["D"], h["F"]) == pytest.approx((0.46, 0.48, 0.02), abs=1e-12)
    b = directional_signature(dfg, "B", Direction.OUTGOING).signature.as_dict()
    assert b == {"C": 0.5, "D": 0.5}
    assert ("D", "G") in ifg.arcs and ("C", "G") not in ifg.arcs


@C3
def test_c3_reproduced_values(branch):
    log, dfg, ifg = branch
    a = directional_signature(dfg, "A", Direction.OUTGOING).signature
    assert sorted(a.weights) == [0.5, 0.5]
    assert directional_similarity(dfg, "H", "B", Direction.OUTGOING) == pytest.approx(0.06, abs=1e-9)
    cd = control_flow_matrix(log)["C", "D"]
    print(f"C-vs-D control-flow score: {cd:.4f}, parts {control_flow_parts(dfg, ifg)['C', 'D']}")
    assert cd > 0


# -- 4 ----------------------------------------------------------------------

C4 = criterion(4, "Planted-duplicate property")


@C4
def test_c4_planted_duplicate():
    base = base_log(600, seed=0)
    counts = {a: 0 for a in base.activities}
    for e in base.events():
        counts[e.activity] += 1
    assert len(base) >= 500 and len(base.activities) >= 10 and len(LAB_VALUES) >= 2
    assert counts["CRP"] >= 100
    cfg = DetectorConfig(theta_c=0.25, theta_d=0.1)
    start = time.perf_counter()
    found = 0
    for seed in range(5):
        log = clone_activity(base, "CRP", 0.3, seed=seed)
        report = detect(log, cfg)
        found += ("CRP", "CRP'") in report.redundant_pairs
        parts = control_flow_parts(build_dfg(log), build_ifg(log, cfg.theta_ld))
        for pair in report.redundant_pairs:
            assert min(parts[pair]) < 1.0, f"{pair} reported with fully disjoint contexts"
    elapsed = time.perf_counter() - start
    print(f"planted pair found in {found}/5 seeds, {elapsed:.1f} s")
    assert found >= 4
    assert elapsed < 60


# -- 5 ----------------------------------------------------------------------

C5 = criterion(5, "Grid-protocol fidelity")


@C5
def test_c5_full_grid_reproducible_across_workers(tmp_path, capsys):
    src = tmp_path / "base.csv"
    write_csv(base_log(600, seed=0), src)
    outputs = []
    for threads in (1, 3):
        raw, summary = tmp_path / f"raw{threads}.csv", tmp_path / f"sum{threads}.csv"
        code = main(["evaluate", str(src), "--numeric-keys", "CRP,Lactate,Leucocytes", "--replicates", "5",
                     "--seed", "12345", "--threads", str(threads), "--out-raw", str(raw),
                     "--out-summary", str(summary)])
        assert code == 0
        outputs.append((raw.read_bytes(), summary.read_bytes()))
    capsys.readouterr()
    raw_lines = outputs[0][0].decode().splitlines()
    assert len(raw_lines) - 1 == 175
    assert len(outputs[0][1].decode().splitlines()) - 1 == 35
    assert outputs[0] == outputs[1]


# -- 6 ----------------------------------------------------------------------

C6 = criterion(6, "Sepsis grid runs and reports (0.64 not expected)")


@C6
@pytest.mark.skipif(not os.environ.get("SEPSIS_LOG"), reason="set SEPSIS_LOG to the Sepsis XES file")
def test_c6_sepsis_grid():
    log = load_xes(os.environ["SEPSIS_LOG"], ["CRP", "LacticAcid", "Leucocytes"])
    known = read_pairs(DATA / "sepsis_known_pairs.csv")
    result = run_grid(log, replicates=5, cfg=DetectorConfig(theta_c=0.25, theta_d=0.1), master_seed=0,
                      known_pairs=known, threads=os.cpu_count() or 1)
    assert len(result.rows) == 175
    print(f"Sepsis grid: {len(result.rows)} runs, mean f-score {result.mean_f_score:.3f}")


# -- 7 ----------------------------------------------------------------------

C7 = criterion(7, "Metrics unit checks")


@C7
def test_c7_metrics():
    m = Metrics(tp=2, fp=1, fn=0)
    assert m.precision == 2 / 3
    assert m.recall == 1.0
    assert m.f_score == 0.8
    assert Metrics(tp=0, fp=4, fn=3).f_score == 0.0


# -- 8 ----------------------------------------------------------------------

C8 = criterion(8, "Data-value pipeline checks")


@C8
def test_c8_sturges():
    assert sturges_bins(100) == 8


@C8
def test_c8_percentile_clustering():
    pair = [PercentileVector("a", 0.3, 0.5, 10), PercentileVector("b", 0.31, 0.52, 10)]
    assert len(cluster_activities(pair, 0.1)) == 1
    assert len(cluster_activities(pair, 0.02)) == 2
    rng = np.random.default_rng(8)
    vecs = [PercentileVector(f"a{i}", *p, 10) for i, p in enumerate(rng.random((20, 2)))]
    sizes = [len(cluster_activities(vecs, t)) for t in (0.01, 0.05, 0.1, 0.2, 0.4, 0.8, 2.0)]
    assert sizes == sorted(sizes, reverse=True)


@C8
def test_c8_scores_in_unit_interval_and_affine_invariant():
    rng = np.random.default_rng(88)
    for _ in range(300):
        va = rng.normal(rng.uniform(-10, 10), rng.uniform(0.1, 5), int(rng.integers(1, 300)))
        vb = rng.gamma(rng.uniform(0.5, 3), rng.uniform(0.1, 5), int(rng.integers(1, 300)))
        s = pair_score(va, vb)
        assert 0.0 <= s <= 1.0
        c, t = rng.uniform(1e-3, 1e3) * rng.choice([-1, 1]), rng.uniform(-1e4, 1e4)
        assert pair_score(c * va + t, c * vb + t) == pytest.approx(s, abs=1e-9)


# -- 9 ----------------------------------------------------------------------

C9 = criterion(9, "Determinism across thread counts")


@C9
@pytest.mark.parametrize("fmt", ["json", "csv", "table"])
def test_c9_detect_byte_identical(tmp_path, capsys, fmt):
    src = tmp_path / "fixture.csv"
    write_csv(clone_activity(base_log(600, seed=0), "CRP", 0.3, seed=0), src)
    outputs = set()
    for threads in (1, 4, os.cpu_count() or 1):
        code = main(["detect", str(src), "--numeric-keys", "CRP,Lactate,Leucocytes", "--theta-s", "0.3",
                     "--combination", "atleast:2", "--group", "--threads", str(threads), "--format", fmt])
        assert code == 0
        outputs.add(capsys.readouterr().out)
    assert len(outputs) == 1


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
