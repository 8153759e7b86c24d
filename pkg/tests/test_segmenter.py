import numpy as np
import pytest

from sasa import diffnum as dn
from sasa.diffnum import Tensor
from sasa.segmenter import (
    TimeSeriesSample,
    VarLSTMParams,
    enumerate_segments,
    init_lstm_cell,
    init_var_lstm,
    lstm_step,
    summarize,
    zero_state,
)

import oracles


def test_enumerate_segments_examples():
    assert [w.tolist() for w in enumerate_segments([7.0])] == [[7.0]]
    assert [w.tolist() for w in enumerate_segments([1.0, 2.0, 3.0])] == [[3.0], [2.0, 3.0], [1.0, 2.0, 3.0]]


def test_each_window_is_a_suffix_of_the_next():
    wins = enumerate_segments(np.random.default_rng(0).normal(size=9))
    for short, long in zip(wins, wins[1:]):
        assert long.size == short.size + 1
        np.testing.assert_array_equal(long[1:], short)


def test_sample_validation():
    with pytest.raises(ValueError):
        TimeSeriesSample(np.ones(4))
    with pytest.raises(ValueError):
        TimeSeriesSample(np.array([[1.0, np.inf]]))
    with pytest.raises(ValueError):
        TimeSeriesSample(np.ones((2, 3)), domain="elsewhere")
    s = TimeSeriesSample([[1, 2, 3], [4, 5, 6]], 1.0)
    assert (s.M, s.N) == (2, 3) and s.series.dtype == np.float64


def test_zero_parameters_give_zero_state():
    cell = init_lstm_cell(1, 3, np.random.default_rng(0))
    for p in (cell.w_x, cell.w_h, cell.b):
        p.values[...] = 0.0
    h, c = lstm_step(0.7, zero_state(1, 3), cell)
    np.testing.assert_array_equal(h.values, 0.0)
    np.testing.assert_array_equal(c.values, 0.0)


def test_hidden_state_is_bounded():
    rng = np.random.default_rng(1)
    cell = init_lstm_cell(1, 4, rng)
    for p in (cell.w_x, cell.w_h, cell.b):
        p.values[...] *= 20.0
    state = zero_state(8, 4)
    for _ in range(10):
        state = lstm_step(Tensor(rng.normal(scale=5.0, size=(8, 1))), state, cell)
        assert (np.abs(state[0].values) < 1).all()


def test_lstm_step_matches_textbook_cell():
    rng = np.random.default_rng(2)
    cell = init_lstm_cell(1, 3, rng)
    h0, c0 = rng.normal(size=3), rng.normal(size=3)
    h, c = lstm_step(Tensor([[0.4]]), (Tensor(h0[None]), Tensor(c0[None])), cell)
    eh, ec = oracles.lstm_cell(np.array([0.4]), h0, c0, cell.w_x.values, cell.w_h.values, cell.b.values)
    np.testing.assert_allclose(h.values[0], eh, atol=1e-14)
    np.testing.assert_allclose(c.values[0], ec, atol=1e-14)


def test_five_chained_steps_pass_grad_check():
    rng = np.random.default_rng(3)
    cell = init_lstm_cell(1, 3, rng)
    xs = rng.normal(size=(5, 2, 1))
    w = Tensor(rng.normal(size=(2, 3)))

    def f():
        state = zero_state(2, 3)
        for x in xs:
            state = lstm_step(Tensor(x), state, cell)
        return dn.sum(dn.mul(state[0], w))

    assert dn.grad_check(f, [cell.w_x, cell.w_h, cell.b]) < 1e-5


def test_bank_matches_per_window_oracle():
    rng = np.random.default_rng(4)
    params = init_var_lstm(3, 4, rng)
    x = rng.normal(size=(3, 6))
    bank = summarize(x, params)
    expected = oracles.segment_bank(x, params.w_x.values, params.w_h.values, params.b.values)
    assert bank.shape == (3, 6, 4)
    np.testing.assert_allclose(bank.values, expected, atol=1e-12)


def test_batched_bank_matches_per_sample_banks():
    rng = np.random.default_rng(5)
    params = init_var_lstm(2, 3, rng)
    x = rng.normal(size=(4, 2, 5))
    batched = summarize(x, params).values
    for b in range(4):
        np.testing.assert_allclose(batched[b], summarize(x[b], params).values, atol=1e-14)


def test_single_step_bank_is_one_lstm_step():
    rng = np.random.default_rng(6)
    params = init_var_lstm(2, 3, rng)
    x = np.array([[0.3], [-1.1]])
    bank = summarize(TimeSeriesSample(x), params).values
    for i in range(2):
        h, _ = lstm_step(Tensor([[x[i, 0]]]), zero_state(1, 3), params.block(i))
        np.testing.assert_allclose(bank[i, 0], h.values[0], atol=1e-15)


def test_variables_are_isolated():
    rng = np.random.default_rng(7)
    params = init_var_lstm(3, 3, rng)
    x = rng.normal(size=(3, 5))
    y = x.copy()
    y[1] += rng.normal(size=5)
    a, b = summarize(x, params).values, summarize(y, params).values
    np.testing.assert_array_equal(a[[0, 2]], b[[0, 2]])
    assert not np.allclose(a[1], b[1])


def test_window_reads_only_its_last_steps():
    rng = np.random.default_rng(8)
    params = init_var_lstm(1, 3, rng)
    x = rng.normal(size=(1, 6))
    base = summarize(x, params).values
    for pos in range(6):
        y = x.copy()
        y[0, pos] += 1.0
        moved = summarize(y, params).values
        for tau in range(1, 7):
            if pos < 6 - tau:
                np.testing.assert_array_equal(moved[0, tau - 1], base[0, tau - 1])
            else:
                assert not np.array_equal(moved[0, tau - 1], base[0, tau - 1])


def test_bank_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    params = init_var_lstm(2, 2, rng)
    x = rng.normal(size=(2, 2, 4))
    w = Tensor(rng.normal(size=(2, 2, 4, 2)))
    err = dn.grad_check(lambda: dn.sum(dn.mul(summarize(x, params), w)), list(params.tensors().values()), h=1e-5)
    assert err < 1e-5


def test_rejects_wrong_variable_count():
    params = init_var_lstm(2, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        summarize(np.zeros((3, 4)), params)


def test_block_view_shapes():
    params = init_var_lstm(3, 2, np.random.default_rng(0))
    assert isinstance(params, VarLSTMParams)
    cell = params.block(1)
    assert cell.w_x.shape == (1, 8) and cell.w_h.shape == (2, 8) and cell.b.shape == (8,)
    np.testing.assert_array_equal(params.b.values[:, 2:4], 1.0)
