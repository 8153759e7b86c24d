import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sasa.metrics import auc, rmse, task_metric

import oracles


def test_auc_examples():
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


def test_auc_needs_both_classes():
    with pytest.raises(ValueError):
        auc([0.2, 0.4], [1, 1])
    with pytest.raises(ValueError):
        auc([0.2, 0.4], [1, 2])
    with pytest.raises(ValueError):
        auc([0.2], [1, 0])


labels_and_scores = st.integers(2, 40).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(lambda v: 0 < sum(v) < len(v)),
        st.lists(st.integers(-60, 60).map(lambda k: k / 12), min_size=n, max_size=n),
    )
)


@settings(max_examples=200, deadline=None)
@given(labels_and_scores)
def test_auc_matches_pairwise_oracle_and_monotone_invariance(data):
    labels, scores = data
    scores = np.array(scores)
    value = auc(scores, labels)
    assert 0.0 <= value <= 1.0
    assert value == pytest.approx(oracles.pairwise_auc(scores, labels), abs=1e-12)
    assert auc(np.exp(scores), labels) == value
    assert auc(3.0 * scores + 1.0, labels) == pytest.approx(value, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(labels_and_scores)
def test_auc_of_negated_scores_is_complement(data):
    labels, scores = data
    scores = np.array(scores)
    if len(np.unique(scores)) == len(scores):
        assert auc(scores, labels) + auc(-scores, labels) == pytest.approx(1.0, abs=1e-12)


def test_rmse_examples():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([3.0, 4.0], [0.0, 0.0]) == pytest.approx(math.sqrt(12.5), abs=1e-12)
    with pytest.raises(ValueError):
        rmse([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        rmse([], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=1, max_size=30),
       st.floats(-10, 10))
def test_rmse_scale_equivariance_and_mean_error_bound(pairs, c):
    p, t = np.array(pairs).T
    assert rmse(c * p, c * t) == pytest.approx(abs(c) * rmse(p, t), rel=1e-9, abs=1e-9)
    assert rmse(p, t) >= abs(np.mean(p - t)) - 1e-9


def test_task_metric_dispatch():
    report = task_metric("classification", [0.1, 0.9], [0, 1])
    assert report.to_dict() == {"metric": "auc", "value": 1.0, "count": 2, "per_seed": []}
    assert task_metric("regression", [1.0], [2.0]).metric == "rmse"
    with pytest.raises(ValueError):
        task_metric("ranking", [1.0], [1.0])
