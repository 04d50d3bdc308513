import math

import numpy as np
import pytest
from scipy import stats

from roa import ci
from roa.analysis import analyze
from roa.budget import allocate
from roa.engine import run_nested
from roa.hoif import if1_centered
from roa.ml import ConstantMeanLearner, OlsLearner, SupervisedDataset, fold_assignment, generate_dataset, \
    loo_boot_baseline, repeated_cv_baseline
from roa.models import MeanModel, ProductModel
from roa.resample import Dataset
from roa.variance import pooled_simulation_variance


def test_crude_constant_outputs():
    iv = ci.crude_ci([3.0, 3.0, 3.0])
    assert iv.lo == iv.point == iv.hi == 3.0


def test_crude_two_outputs_uses_standard_error():
    iv = ci.crude_ci([1.0, 3.0])
    t = stats.t.ppf(0.975, 1)
    assert iv.point == 2.0
    assert iv.halfwidth == pytest.approx(t * math.sqrt(2.0) / math.sqrt(2.0))
    assert iv.dof == 1
    with pytest.raises(ValueError):
        ci.crude_ci([1.0])


def test_crude_calibration():
    g = np.random.default_rng(21)
    x = g.normal(5.0, 2.0, size=(10_000, 10))
    hits = sum(ci.crude_ci(row).covers(5.0) for row in x)
    assert abs(hits / 10_000 - 0.95) < 0.01


def test_barton_without_input_uncertainty():
    g = np.random.default_rng(2)
    row = g.normal(size=6)
    y = np.tile(row, (5, 1))
    iv = ci.barton_ci(y)
    sim_only = stats.t.ppf(0.975, 4) * math.sqrt(pooled_simulation_variance(y) / 6)
    assert iv.halfwidth == pytest.approx(sim_only)
    assert iv.point == pytest.approx(y.mean())


def test_barton_wider_than_simulation_only():
    g = np.random.default_rng(3)
    for _ in range(50):
        y = g.normal(size=(6, 1)) * 2 + g.normal(size=(6, 4))
        iv = ci.barton_ci(y)
        sim_only = stats.t.ppf(0.975, 5) * math.sqrt(pooled_simulation_variance(y) / 4)
        if ci.iu_variance(y)[0] > 0:
            assert iv.halfwidth > sim_only


def test_barton_hierarchical_coverage():
    # Y = theta + mu_b + e_r; the interval targets theta with the spread of one resample mean
    g = np.random.default_rng(4)
    hits = 0
    for _ in range(500):
        y = 10.0 + g.normal(0, 1.0, (20, 1)) + g.normal(0, 2.0, (20, 5))
        hits += ci.barton_ci(y).covers(10.0)
    assert hits / 500 >= 0.90


def test_lamqian_zero_influence():
    y = np.random.default_rng(5).normal(size=(4, 3))
    iv = ci.lamqian_ci(y, np.zeros(7))
    half = stats.norm.ppf(0.975) * math.sqrt(pooled_simulation_variance(y) / 12)
    assert iv.halfwidth == pytest.approx(half)
    assert math.isinf(iv.dof)


def test_lamqian_width_grows_with_influence():
    y = np.random.default_rng(6).normal(size=(4, 3))
    base = np.random.default_rng(7).normal(size=10)
    widths = [ci.lamqian_ci(y, s * base).halfwidth for s in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert all(a < b for a, b in zip(widths, widths[1:]))


def test_lamqian_variance_of_the_mean():
    x = np.random.default_rng(4).normal(size=20)
    t = run_nested(MeanModel(k=1), Dataset.from_values(x), 2000, 5, 0, 20, root=1, cv=False)
    if1 = if1_centered(t.y_star, t.counts)
    assert abs(np.sum(if1 ** 2) / 400 / (np.var(x) / 20) - 1) < 0.25


def test_bias_corrected_zero_bias_is_grand_mean():
    y = np.random.default_rng(8).normal(size=(5, 3))
    iv = ci.bias_corrected_ci(y, 0.0, 1.0, 0.5)
    assert iv.point == pytest.approx(y.mean())
    assert iv.dof == 14


def test_bias_corrected_scales():
    y = np.random.default_rng(9).normal(size=(5, 3))
    lit = ci.bias_corrected_ci(y, 0.2, 1.4, 0.5, scale="sampling-only")
    adj = ci.bias_corrected_ci(y, 0.2, 1.4, 0.5, m=10, n=20, scale="iu-adjusted")
    t = stats.t.ppf(0.975, 14)
    assert lit.halfwidth == pytest.approx(t * math.sqrt(1.4 / 14))
    assert adj.halfwidth == pytest.approx(t * math.sqrt(1.4 / 14 + 0.5 * 0.5))
    assert lit.point == adj.point == pytest.approx(y.mean() - 0.2)
    with pytest.raises(ValueError):
        ci.bias_corrected_ci(y, 0.0, 1.0, 0.5, scale="wide")


def _oracle_report(rep, alpha=0.05, mode="eq21"):
    alloc = allocate(1000, 20)
    x = np.random.default_rng(1000 + rep).normal(0.0, 1.0, 20)
    t = run_nested(ProductModel(), Dataset.from_values(x), alloc.B1, alloc.R, alloc.B2, alloc.m_star, root=rep,
                   baseline_runs=10)
    return analyze(t, alpha, mode)


def test_center_shift_identity():
    rep = _oracle_report(0)
    grand = rep.tensor.y_star.mean()
    for method, w, hoif in (("bias-corrected", rep.fib.w_used, rep.hoif),
                            ("bias-corrected-vr", rep.fib.w_hat_cv, rep.hoif_cv)):
        shift = rep.intervals[method].point - grand
        assert shift == pytest.approx(-(w.mean() + hoif.beta_hat), abs=1e-12)


def test_smaller_alpha_nests_every_interval():
    wide = _oracle_report(1, 0.05).intervals
    narrow = _oracle_report(1, 0.10).intervals
    assert set(wide) == {"crude", "iu-barton", "iu-lamqian", "bias-corrected", "bias-corrected-vr"}
    for method in wide:
        assert wide[method].lo <= narrow[method].lo <= narrow[method].hi <= wide[method].hi


def test_intervals_ordered():
    for iv in _oracle_report(2).intervals.values():
        assert iv.lo <= iv.point <= iv.hi


def test_variance_reduced_interval_narrower():
    alloc = allocate(1000, 20)
    narrower = 0
    for rep in range(200):
        x = np.random.default_rng(1000 + rep).normal(0.0, 1.0, 20)
        t = run_nested(ProductModel(), Dataset.from_values(x), alloc.B1, alloc.R, alloc.B2, alloc.m_star, root=rep)
        ivs = analyze(t, methods=["bias-corrected", "bias-corrected-vr"]).intervals
        narrower += ivs["bias-corrected-vr"].halfwidth <= ivs["bias-corrected"].halfwidth
    assert narrower / 200 >= 0.60


def _constant_response(n=40):
    z = np.random.default_rng(0).gamma(2.0, 1.0, size=(n, 3))
    return SupervisedDataset.from_arrays(z, np.full(n, 4.0))


@pytest.mark.parametrize("data,learner", [
    (generate_dataset("linear", "none", 60, 3), OlsLearner()),
    (_constant_response(), ConstantMeanLearner()),
])
def test_baselines_zero_for_perfect_fit(data, learner):
    loo = loo_boot_baseline(data, learner, 10, 5, root=1)
    cv = repeated_cv_baseline(data, learner, root=2, repeats=5)
    for iv in (loo, cv):
        assert abs(iv.point) < 1e-12 and iv.halfwidth < 1e-12


def test_fold_assignment_partitions():
    labels = fold_assignment(53, 10, seed=4)
    assert labels.shape == (53,)
    counts = np.bincount(labels, minlength=10)
    assert counts.sum() == 53 and counts.min() >= 5 and counts.max() <= 6
    with pytest.raises(ValueError):
        repeated_cv_baseline(generate_dataset("linear", "low", 8, 0), OlsLearner(), root=0)
