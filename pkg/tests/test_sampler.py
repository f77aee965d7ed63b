import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rerw.model import make_rng, total_weight
from rerw.sampler import (
    FenwickTree,
    RecordMemory,
    TreeMemory,
    draw_many,
    exact_distribution,
    record_draw,
    tree_draw,
    validate_history,
)

PROB_ATOL = 1e-12
CHI2_ALPHA = 0.01


@st.composite
def histories(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    return [draw(st.integers(1, j - 1)) for j in range(2, n + 1)]


def test_exact_distribution_examples():
    assert np.allclose(exact_distribution([], 3.0), [1.0])
    assert np.allclose(exact_distribution([1], 2.0), [0.75, 0.25])
    assert np.allclose(exact_distribution([1, 1], 1.0), [0.6, 0.2, 0.2])
    assert np.allclose(exact_distribution([1, 2, 1, 3], 0.0), np.full(5, 0.2))


def test_invalid_history_rejected():
    with pytest.raises(ValueError, match="beta_3"):
        exact_distribution([1, 3], 1.0)
    with pytest.raises(ValueError):
        validate_history([0])


@given(histories(), st.floats(0.0, 5.0))
def test_backend_laws_equal_exact_law(history, c):
    exact = exact_distribution(history, c)
    assert exact.min() >= 0
    assert abs(exact.sum() - 1) < PROB_ATOL
    assert np.allclose(RecordMemory(c, history).probabilities(), exact, atol=PROB_ATOL)
    assert np.allclose(TreeMemory(c, history).probabilities(), exact, atol=PROB_ATOL)


@given(histories(), st.floats(0.0, 5.0))
def test_record_mixture_masses(history, c):
    n = len(history) + 1
    base, extra = n * 1.0, (n - 1) * c
    assert np.isclose(base + extra, total_weight(n, c))
    counts = np.bincount(history, minlength=n + 1)[1:]
    assert np.allclose(1 + c * counts, exact_distribution(history, c) * total_weight(n, c))


def test_first_draw_is_one():
    rng = make_rng(0)
    for _ in range(100):
        assert record_draw(RecordMemory(1.5), rng) == 1
        assert tree_draw(TreeMemory(1.5), rng) == 1


@pytest.mark.parametrize("c", [0.0, 0.5, 2.0])
def test_n2_probability(c):
    # beta_2 = 1 surely, so P(beta_3 = 1) = (1 + c) / (2 + c)
    assert np.isclose(exact_distribution([1], c)[0], (1 + c) / (2 + c))


def test_fenwick_tree_find_and_growth():
    t = FenwickTree(2)
    w = [3.0, 0.0, 1.0, 2.5, 0.5]
    for i, v in enumerate(w, start=1):
        t.add(i, v)
    assert len(t) == 5
    assert np.isclose(t.total, sum(w))
    assert [t.weight(i) for i in range(1, 6)] == pytest.approx(w)
    cum = np.cumsum(w)
    for target in np.linspace(0, sum(w) - 1e-9, 97):
        k = t.find(target)
        assert cum[k - 1] > target and (k == 1 or cum[k - 2] <= target)


@pytest.mark.parametrize("draw, memory", [(record_draw, RecordMemory), (tree_draw, TreeMemory)])
def test_draw_consumes_two_uniforms(draw, memory):
    rng = make_rng(4)
    mem = memory(1.0, [1, 1, 2])
    draw(mem, rng)
    ref = make_rng(4)
    ref.random(2)
    assert rng.random() == ref.random()


@pytest.mark.parametrize("draw, memory", [(record_draw, RecordMemory), (tree_draw, TreeMemory)])
def test_chi_square_small(draw, memory):
    history, c = [1, 1, 2, 1, 4], 1.5
    mem = memory(c, history)
    rng = make_rng(21)
    R = 50000
    counts = np.bincount([draw(mem, rng) for _ in range(R)], minlength=len(history) + 2)[1:]
    expected = exact_distribution(history, c) * R
    assert stats.chisquare(counts, expected).pvalue > CHI2_ALPHA


@settings(max_examples=30, deadline=None)
@given(histories(max_n=8), st.floats(0.0, 3.0))
def test_tree_push_tracks_weights(history, c):
    mem = TreeMemory(c)
    for b in history:
        mem.push(b)
    assert np.isclose(mem.tree.total, total_weight(mem.n, c))
    assert np.allclose(mem.probabilities(), exact_distribution(history, c))


@pytest.mark.parametrize("draw, memory", [(record_draw, RecordMemory), (tree_draw, TreeMemory)])
@pytest.mark.parametrize("history", [[], [1], [1, 1, 2, 1, 4], [1, 2, 3, 4, 5, 6, 7, 8, 9]])
def test_draw_many_equals_repeated_single_draws(draw, memory, history):
    mem = memory(0.8, history)
    batch = draw_many(mem, make_rng(3), 500)
    rng = make_rng(3)
    assert batch.tolist() == [draw(mem, rng) for _ in range(500)]
