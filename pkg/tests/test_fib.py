import numpy as np
import pytest

import oracles
from roa.engine import run_nested
from roa.fib import (FibCell, bias_terms, cv_coefficient, debias_output, delta_star, fib_table, gamma_hat,
                     t_test, w_hat, w_hat_cv)
from roa.budget import allocate
from roa.models import MeanModel, ProductModel
from roa.resample import Dataset
from roa.variance import total_debiased_variance


def test_hand_examples():
    cell = FibCell(10.0, [12.0], [15.0])
    assert delta_star(cell) == 2.0
    assert gamma_hat(cell) == 1.0
    assert debias_output(cell) == 7.0
    assert w_hat(cell) == 3.0


def test_flat_levels_give_zero():
    cell = FibCell(4.0, [4.0, 4.0], [4.0, 4.0])
    assert delta_star(cell) == gamma_hat(cell) == w_hat(cell) == 0.0
    assert debias_output(cell) == 4.0


def test_cell_validation():
    with pytest.raises(ValueError):
        FibCell(1.0, [], [])
    with pytest.raises(ValueError):
        FibCell(1.0, [1.0, 2.0], [1.0])


def test_identity_w_is_level_difference():
    g = np.random.default_rng(0)
    for _ in range(200):
        b2 = int(g.integers(1, 8))
        cell = FibCell(g.normal(), g.normal(size=b2), g.normal(size=b2))
        assert abs(w_hat(cell) - (cell.y_3star.mean() - cell.y_2star.mean())) < 1e-12
        assert abs(debias_output(cell) - (cell.y_star - w_hat(cell))) < 1e-12


def test_against_loop_oracle():
    g = np.random.default_rng(1)
    for _ in range(100):
        b2 = int(g.integers(2, 9))
        y, y2, y3 = g.normal(5, 2), g.normal(5, 2, b2), g.normal(5, 2, b2)
        cell = FibCell(y, y2, y3)
        d, gm, w, yd = oracles.fib_parts(y, list(y2), list(y3))
        assert delta_star(cell) == pytest.approx(d, rel=1e-10, abs=1e-12)
        assert gamma_hat(cell) == pytest.approx(gm, rel=1e-10, abs=1e-12)
        assert debias_output(cell) == pytest.approx(yd, rel=1e-10)
        assert t_test(cell)[0] == pytest.approx(oracles.t_stat(y, list(y2), list(y3)), rel=1e-10)


def test_t_test_edge_cases():
    t, sig, lo, hi = t_test(FibCell(0.0, [1.0, 1.0, 1.0], [2.0, 2.0, 2.0]))
    assert t == np.inf and sig and lo == hi == 1.0
    # terms are +1 and -1: mean zero
    t, sig, _, _ = t_test(FibCell(0.0, [0.0, 0.0], [1.0, -1.0]))
    assert t == 0.0 and not sig
    t, sig, _, _ = t_test(FibCell(0.0, [1.0], [2.0]))
    assert np.isnan(t) and not sig
    t, sig, _, _ = t_test(FibCell(3.0, [3.0, 3.0], [3.0, 3.0]))
    assert t == 0.0 and not sig


def test_t_test_calibration():
    g = np.random.default_rng(2)
    trials, rejections = 10_000, 0
    for _ in range(trials):
        terms = g.normal(1.0, 1.0, 30)
        # shift by the hypothesised value so that H0: W = 1 becomes W = 0
        cell = FibCell(0.0, np.zeros(30), terms - 1.0)
        rejections += t_test(cell)[1]
    assert abs(rejections / trials - 0.05) < 0.02


def test_cv_coefficient():
    assert cv_coefficient([1.0, 2.0, 3.0], [0.0, 0.0, 0.0]) == 0.0
    c = np.array([0.3, -1.2, 2.0, 0.5])
    assert cv_coefficient(2 * c, c) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(ValueError):
        cv_coefficient([1.0], [1.0])
    g = np.random.default_rng(3)
    for _ in range(100):
        k = int(g.integers(2, 12))
        w, cc = g.normal(size=k), g.normal(size=k)
        assert cv_coefficient(w, cc) == pytest.approx(oracles.cv_slope(list(w), list(cc)), rel=1e-12)


def test_w_hat_cv():
    cell = FibCell(1.0, [1.0], [4.0], y_cv_extra=0.0)  # W = 3, C = -1
    assert w_hat_cv(cell, 0.0) == w_hat(cell)
    assert w_hat_cv(cell, 0.5) == 2.5


def test_fitted_control_variate_does_not_increase_spread():
    g = np.random.default_rng(4)
    worse = 0
    for _ in range(100):
        c = g.normal(size=10)
        w = 0.8 * c + g.normal(size=10)
        adj = w - cv_coefficient(w, c) * c
        worse += np.var(adj) > np.var(w) + 1e-12
    assert worse == 0


def test_fib_table_matches_cellwise():
    g = np.random.default_rng(5)
    y, y2, y3, ycv = g.normal(size=(4, 3)), g.normal(size=(4, 3, 5)), g.normal(size=(4, 3, 5)), g.normal(size=4)
    tab = fib_table(y, y2, y3, ycv, cv_slope="per-b1")
    for b in range(4):
        for r in range(3):
            cell = FibCell(y[b, r], y2[b, r], y3[b, r], ycv[b])
            res = tab.result(b, r)
            assert res.w_hat == pytest.approx(w_hat(cell), abs=1e-12)
            assert res.t_stat == pytest.approx(t_test(cell)[0], rel=1e-12)
            assert res.w_hat == pytest.approx(res.delta_star + res.gamma_hat, abs=1e-12)
        controls = ycv[b] - y[b]
        assert tab.c1_hat[b] == pytest.approx(cv_coefficient(tab.w_hat[b], controls), rel=1e-12)
    assert np.allclose(tab.w_hat_cv, tab.w_hat - tab.c1_hat[:, None] * (ycv[:, None] - y))


def test_pooled_slope_uses_within_resample_deviations():
    g = np.random.default_rng(12)
    y, y2, y3, ycv = g.normal(size=(6, 4)), g.normal(size=(6, 4, 3)), g.normal(size=(6, 4, 3)), g.normal(size=6)
    tab = fib_table(y, y2, y3, ycv)
    c = ycv[:, None] - y
    wc = (tab.w_hat - tab.w_hat.mean(axis=1, keepdims=True)).ravel()
    cc = (c - c.mean(axis=1, keepdims=True)).ravel()
    slope = oracles.cv_slope(wc.tolist(), cc.tolist())  # centred data, so the plain slope is the pooled one
    assert np.allclose(tab.c1_hat, slope, rtol=1e-12)
    assert np.allclose(tab.w_hat_cv, tab.w_hat - slope * c)
    with pytest.raises(ValueError):
        fib_table(y, y2, y3, ycv, cv_slope="median")


def test_pooled_slope_lowers_debiased_variance_on_quadratic_oracle():
    alloc = allocate(1000, 20)
    lower = 0
    for rep in range(30):
        x = np.random.default_rng(1000 + rep).normal(0.0, 1.0, 20)
        t = run_nested(ProductModel(), Dataset.from_values(x), alloc.B1, alloc.R, alloc.B2, alloc.m_star, root=rep)
        tab = fib_table(t.y_star, t.y_2star, t.y_3star, t.y_cv)
        lower += (total_debiased_variance(t.y_star, tab.w_hat_cv).total_debiased
                  <= total_debiased_variance(t.y_star, tab.w_hat).total_debiased)
    assert lower >= 27


def test_gate_zeroes_insignificant():
    g = np.random.default_rng(6)
    y, y2, y3 = g.normal(size=(3, 2)), g.normal(size=(3, 2, 4)), g.normal(size=(3, 2, 4))
    tab = fib_table(y, y2, y3, gate=True)
    assert np.all(tab.w_used[~tab.significant] == 0.0)
    assert np.all(tab.w_used[tab.significant] == tab.w_hat[tab.significant])
    assert np.array_equal(fib_table(y, y2, y3).w_used, tab.w_hat)


def test_linear_functional_has_no_fib_bias():
    data = Dataset.from_values(np.random.default_rng(7).normal(size=20))
    t = run_nested(MeanModel(1), data, 100, 5, 4, 20, root=3)
    tab = fib_table(t.y_star, t.y_2star, t.y_3star, t.y_cv)
    w = tab.w_hat.ravel()
    assert abs(w.mean()) < 3 * w.std(ddof=1) / np.sqrt(w.size) * np.sqrt(5)
    c = (t.y_cv[:, None] - t.y_star).ravel()
    assert abs(c.mean()) < 4 * c.std(ddof=1) / np.sqrt(c.size) * np.sqrt(5)


def test_debiasing_shrinks_quadratic_bias():
    # Y = D1 * D2 has theta(F) = mu^2; with mu = 0 the truth is 0
    alloc = allocate(1000, 20)
    gaps_star, gaps_d = [], []
    for rep in range(200):
        x = np.random.default_rng(1000 + rep).normal(0.0, 1.0, 20)
        t = run_nested(ProductModel(), Dataset.from_values(x), alloc.B1, alloc.R, alloc.B2, alloc.m_star,
                       root=rep, cv=False)
        tab = fib_table(t.y_star, t.y_2star, t.y_3star)
        gaps_star.append(t.y_star.mean())
        gaps_d.append((t.y_star - tab.w_hat).mean())
    assert abs(np.mean(gaps_d)) <= 0.5 * abs(np.mean(gaps_star))


def test_bias_terms_sum_to_w():
    cell = FibCell(2.0, [3.0, 1.0], [5.0, 0.0])
    assert bias_terms(cell).mean() == pytest.approx(w_hat(cell))
