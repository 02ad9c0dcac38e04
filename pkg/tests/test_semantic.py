import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from redundant_labels.semantic import (
    EditDistanceProvider,
    VectorProvider,
    VectorTable,
    edit_similarity,
    levenshtein,
    load_vectors,
    semantic_matrix,
    tokenize,
    vector_similarity,
)

from logs import log_from_sequences


@pytest.mark.parametrize("label, tokens", [
    ("BloodPressure", ["blood", "pressure"]),
    ("Arterial BP [Systolic]", ["arterial", "bp", "systolic"]),
    ("", []),
    ("ER_Sepsis-Triage", ["er", "sepsis", "triage"]),
    ("IVAntibiotics", ["iv", "antibiotics"]),
])
def test_tokenize(label, tokens):
    assert tokenize(label) == tokens


def test_levenshtein():
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein("", "abc") == 3
    assert levenshtein("abc", "abc") == 0


def test_edit_similarity_examples():
    assert edit_similarity("Release A", "Release A") == 1.0
    assert edit_similarity("BloodPressure", "blood pressure") == 1.0
    assert edit_similarity("abcd", "wxyz") == 0.0
    assert edit_similarity("", "") == 1.0


@pytest.fixture
def table():
    return VectorTable({
        "blood": [1.0, 0.0, 0.0],
        "pressure": [0.0, 1.0, 0.0],
        "release": [0.0, 0.0, 1.0],
        "discharge": [0.0, 0.1, 1.0],
    }, 3)


def test_vector_similarity(table):
    assert vector_similarity("blood pressure", "BloodPressure", table) == pytest.approx(1.0)
    assert vector_similarity("blood", "pressure", table) == 0.0
    assert vector_similarity("release", "discharge", table) > 0.99


def test_vector_fallback_to_edit(table):
    assert vector_similarity("zzz", "zzy", table) == edit_similarity("zzz", "zzy")


def test_negative_cosine_clipped():
    t = VectorTable({"up": [1.0, 0.0], "down": [-1.0, 0.0]}, 2)
    assert vector_similarity("up", "down", t) == 0.0


def test_load_vectors(tmp_path):
    p = tmp_path / "vec.txt"
    p.write_text("d=2\nBlood 1 0\npressure 0 1\n", encoding="utf-8")
    t = load_vectors(p)
    assert t.dim == 2 and "blood" in t and len(t) == 2
    p.write_text("a 1 0\nb 1 0 0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_vectors(p)
    p.write_text("d=3\na 1 0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_vectors(p)


def test_table_rejects_bad_vectors():
    with pytest.raises(ValueError):
        VectorTable({"a": [0.0, 0.0]}, 2)
    with pytest.raises(ValueError):
        VectorTable({"a": [1.0]}, 2)


def test_semantic_matrix_is_one_minus_similarity():
    class Fixed:
        name = "fixed"

        def similarity(self, a, b):
            return 0.9

    m = semantic_matrix(log_from_sequences([["x", "y"]]), Fixed())
    assert m["x", "y"] == pytest.approx(0.1)


def test_semantic_alone_would_confuse_release_labels():
    m = semantic_matrix(log_from_sequences([["Release A", "Release B"]]), EditDistanceProvider())
    assert m["Release A", "Release B"] < 0.2


labels = st.text(alphabet=st.characters(codec="utf-8", categories=["L", "N", "Zs", "Pc", "Pd"]), max_size=20)
RANDOM_TABLE = VectorTable({w: np.random.default_rng(i).normal(size=4) for i, w in
                            enumerate(["a", "b", "ab", "x", "release", "er", "crp"])}, 4)


@settings(max_examples=200, deadline=None)
@given(labels, labels)
def test_provider_contract(a, b):
    for provider in (EditDistanceProvider(), VectorProvider(RANDOM_TABLE)):
        s = provider.similarity(a, b)
        assert 0.0 <= s <= 1.0
        assert s == provider.similarity(b, a)
        assert provider.similarity(a, a) == 1.0
