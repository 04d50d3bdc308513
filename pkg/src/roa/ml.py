"""Prediction error of a learner as a resampling-compatible model output.

An output is computed from a *test pool* distribution: a test multiset is
drawn from the pool, the learner is fitted on every base point that is not in
the test multiset, and the output is the count-weighted mean squared error on
the out-of-bag test points. At the true data law the test points are fresh
draws and the model is fitted on the whole dataset, so the expected output is
the conditional test error of the learner.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import EvaluationError
from .resample import Dataset, ResampleCounts, ceil_size, derive_seed, draw_counts, nested_counts

KINDS = ("linear", "polynomial", "complex")
NOISE_SD = {"none": 0.0, "low": 3.0, "high": 6.0}
MAX_TEST_ATTEMPTS = 16


class SupervisedDataset(Dataset):
    """Rows are ``[features..., response]``."""

    @classmethod
    def from_arrays(cls, features, response, label: str = "") -> "SupervisedDataset":
        x = np.asarray(features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(response, dtype=float).reshape(-1, 1)
        if x.shape[0] != y.shape[0]:
            raise ValueError("features and response lengths differ")
        return cls(np.hstack([x, y]), label)

    @property
    def features(self) -> np.ndarray:
        return self.rows[:, :-1]

    @property
    def response(self) -> np.ndarray:
        return self.rows[:, -1]

    @property
    def p(self) -> int:
        return self.width - 1


def _features(g: np.random.Generator, n: int) -> np.ndarray:
    z1 = g.gamma(2.0, 1.0, n)
    z2 = g.gamma(5.0, 0.5, n)  # rate 2
    z3 = g.gamma(3.0, 1.0, n)
    return np.column_stack([z1, z2, z3])


def response_mean(kind: str, z: np.ndarray) -> np.ndarray:
    z1, z2, z3 = z[:, 0], z[:, 1], z[:, 2]
    if kind == "linear":
        return 5 * z1 + z2 + 2 * z3
    if kind == "polynomial":
        return z1 ** 2 + z1 * z2 + z3 ** 2
    if kind == "complex":
        return 5 / np.sqrt(z1) + z2 + 1 / z3
    raise ValueError(f"unknown generator kind {kind!r}; expected one of {KINDS}")


@dataclass(frozen=True)
class Generator:
    kind: str = "linear"
    noise: str = "low"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        if self.noise not in NOISE_SD:
            raise ValueError(f"unknown noise level {self.noise!r}; expected one of {tuple(NOISE_SD)}")

    def draw(self, g: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        z = _features(g, n)
        return z, response_mean(self.kind, z) + g.normal(0.0, NOISE_SD[self.noise], n)


def generate_dataset(kind: str = "linear", noise: str = "low", n: int = 100, seed: int = 0) -> SupervisedDataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    z, y = Generator(kind, noise).draw(np.random.default_rng(seed), n)
    return SupervisedDataset.from_arrays(z, y, f"{kind}-{noise}")


def fit_ols(x: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Least-squares coefficients, intercept first.

    A rank-deficient design gets a 1e-8 ridge; failure after that is an
    evaluation error.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    design = np.column_stack([np.ones(x.shape[0]), x])
    if weights is not None:
        sw = np.sqrt(np.asarray(weights, dtype=float))
        design, y = design * sw[:, None], y * sw
    k = design.shape[1]
    if np.linalg.matrix_rank(design) == k:
        coef = np.linalg.lstsq(design, y, rcond=None)[0]
    else:
        gram = design.T @ design + 1e-8 * np.eye(k)
        try:
            coef = np.linalg.solve(gram, design.T @ y)
        except np.linalg.LinAlgError as exc:
            raise EvaluationError("ols", f"singular design after ridge fallback: {exc}") from exc
    if not np.all(np.isfinite(coef)):
        raise EvaluationError("ols", "non-finite coefficients")
    return coef


class OlsLearner:
    name = "ols"

    def fit(self, x, y, weights=None):
        return fit_ols(x, y, weights)

    def predict(self, coef, x):
        return coef[0] + np.asarray(x, dtype=float) @ coef[1:]


class ConstantMeanLearner:
    name = "constant-mean"

    def fit(self, x, y, weights=None):
        y = np.asarray(y, dtype=float)
        if y.size == 0:
            raise EvaluationError("constant-mean", "empty training set")
        return np.array([np.average(y, weights=weights)])

    def predict(self, coef, x):
        return np.full(np.asarray(x).shape[0], coef[0])


LEARNERS = {"ols": OlsLearner, "constant-mean": ConstantMeanLearner}


@dataclass(frozen=True)
class OobMembership:
    test_counts: np.ndarray
    oob_flags: np.ndarray

    def __post_init__(self):
        if np.any(self.oob_flags & (self.test_counts == 0)):
            raise ValueError("out-of-bag flag set on a point outside the test draw")

    @property
    def weight(self) -> int:
        return int(np.sum(self.test_counts * self.oob_flags))


def holdout_membership(test: ResampleCounts, train_counts: np.ndarray) -> OobMembership:
    return OobMembership(test.counts.copy(), (test.counts > 0) & (np.asarray(train_counts) == 0))


def oob_error(coef, membership: OobMembership, data: SupervisedDataset, learner=None) -> float:
    """Count-weighted mean squared residual over out-of-bag test points."""
    w = membership.test_counts * membership.oob_flags
    total = w.sum()
    if total < 1:
        raise EvaluationError("oob", "empty out-of-bag set")
    learner = learner or OlsLearner()
    idx = np.flatnonzero(w)
    resid = data.response[idx] - learner.predict(coef, data.features[idx])
    return float(np.dot(w[idx], resid ** 2) / total)


def holdout_error(data: SupervisedDataset, learner, test: ResampleCounts) -> float:
    """Fit on every point outside ``test`` and score on the test draw."""
    train = (test.counts == 0).astype(np.int64)
    if train.sum() < 1:
        raise EvaluationError("oob", "test draw leaves no training points")
    mask = train.astype(bool)
    coef = learner.fit(data.features[mask], data.response[mask])
    return oob_error(coef, holdout_membership(test, train), data, learner)


def draw_test(pool: ResampleCounts, size: int, seed: int) -> ResampleCounts:
    """Test multiset from ``pool``; redrawn with fresh seeds while nothing is out of bag."""
    for attempt in range(MAX_TEST_ATTEMPTS):
        test = nested_counts(pool, size, derive_seed(seed, (attempt,)))
        if np.any(test.counts > 0) and np.any(test.counts == 0):
            return test
    raise EvaluationError("oob", f"no usable test draw after {MAX_TEST_ATTEMPTS} attempts")


@dataclass(frozen=True)
class OobErrorModel:
    """Output = hold-out error on a test draw of size ceil(test_ratio * m) from the pool."""

    data: SupervisedDataset
    learner: object
    test_ratio: float

    def evaluate(self, counts, config, seed):
        test = draw_test(counts, ceil_size(self.test_ratio, counts.m), seed)
        return holdout_error(self.data, self.learner, test)


def true_error(data: SupervisedDataset, learner, generator: Generator, seed: int,
               size: int = 1_000_000, chunk: int = 250_000) -> float:
    """Test error of the learner fitted on all of ``data``, on a fresh draw of ``size`` points."""
    coef = learner.fit(data.features, data.response)
    g = np.random.default_rng(seed)
    total = 0.0
    done = 0
    while done < size:
        k = min(chunk, size - done)
        z, y = generator.draw(g, k)
        total += float(np.sum((y - learner.predict(coef, z)) ** 2))
        done += k
    return total / size


# seed path stages for the ML nested design
_OUTER, _TEST, _L2, _L3, _CV = 20, 21, 22, 23, 24


def run_algorithm1_tensor(data: SupervisedDataset, learner, B1: int, R: int, B2: int, m: int, root: int):
    """Fill an OutputTensor following the out-of-bag nested design.

    For outer pool D_b1 (m draws from the data) and replication r a test draw
    of size ceil(kappa*m) is taken from the pool, then two nested draws of
    sizes ceil(kappa*|test|) and ceil(kappa^2*|test|). Every level is scored
    by ``holdout_error``. One extra test draw per pool feeds the control variate.
    """
    from .engine import OutputTensor

    kappa = m / data.n
    t_size = ceil_size(kappa, m)
    s2 = ceil_size(kappa, t_size)
    s3 = ceil_size(kappa * kappa, t_size)
    counts = np.empty((B1, data.n), dtype=np.int64)
    y = np.empty((B1, R))
    y2 = np.empty((B1, R, B2))
    y3 = np.empty((B1, R, B2))
    ycv = np.empty(B1)
    runs = 0
    for b in range(B1):
        pool = draw_counts(data, m, derive_seed(root, (_OUTER, b)))
        counts[b] = pool.counts
        for r in range(R):
            test = draw_test(pool, t_size, derive_seed(root, (_TEST, b, r)))
            y[b, r] = holdout_error(data, learner, test)
            runs += 1
            for k in range(B2):
                t2 = draw_test(test, s2, derive_seed(root, (_L2, b, r, k)))
                t3 = draw_test(t2, s3, derive_seed(root, (_L3, b, r, k)))
                y2[b, r, k] = holdout_error(data, learner, t2)
                y3[b, r, k] = holdout_error(data, learner, t3)
                runs += 2
        if B2 > 0:
            extra = draw_test(pool, t_size, derive_seed(root, (_CV, b)))
            ycv[b] = holdout_error(data, learner, extra)
            runs += 1
    return OutputTensor(y, y2, y3, ycv if B2 > 0 else None, counts, np.empty(0), m, data.n, runs)


def run_algorithm1(data: SupervisedDataset, learner, N: int, root: int, overrides=None,
                   alpha: float = 0.05, mode: str = "eq21", gate: bool = False, scale: str = "iu-adjusted",
                   cv_slope: str = "pooled"):
    """Allocate the budget, run the nested out-of-bag design and analyse it."""
    from .analysis import analyze
    from .budget import allocate

    alloc = allocate(N, data.n, overrides, baseline_runs=0)
    if alloc.B2 < 1:
        raise ValueError("the out-of-bag design needs B2 >= 1")
    t = run_algorithm1_tensor(data, learner, alloc.B1, alloc.R, alloc.B2, alloc.m_star, root)
    report = analyze(t, alpha, mode, gate, scale, cv_slope=cv_slope)
    report.settings["allocation"] = alloc
    return report


def loo_boot_baseline(data: SupervisedDataset, learner, B1: int, R: int, root: int, alpha: float = 0.05):
    """Leave-one-out bootstrap error, one estimate per group of R bootstrap fits.

    Each point is scored only by fits whose bootstrap sample excludes it. A
    group keeps drawing (up to 16 extra fits) until every point has been out
    of bag at least once; any point that never was is dropped from that
    group's average. Returns the t interval over group estimates.
    """
    from .ci import t_interval

    n = data.n
    estimates = np.empty(B1)
    for b in range(B1):
        loss_sum = np.zeros(n)
        loss_cnt = np.zeros(n)
        k = 0
        while k < R or (np.any(loss_cnt == 0) and k < R + MAX_TEST_ATTEMPTS):
            boot = draw_counts(data, n, derive_seed(root, (30, b, k)))
            inbag = boot.counts > 0
            coef = learner.fit(data.features[inbag], data.response[inbag], boot.counts[inbag])
            out = ~inbag
            if np.any(out):
                res = data.response[out] - learner.predict(coef, data.features[out])
                loss_sum[out] += res ** 2
                loss_cnt[out] += 1
            k += 1
        seen = loss_cnt > 0
        if not np.any(seen):
            raise EvaluationError("loo-boot", f"no point was out of bag in group {b}")
        # points still never out of bag are left out of the average
        estimates[b] = np.mean(loss_sum[seen] / loss_cnt[seen])
    return t_interval("loo-boot", estimates, alpha)


def repeated_cv_baseline(data: SupervisedDataset, learner, root: int, folds: int = 10, repeats: int = 100,
                         alpha: float = 0.05):
    """``repeats`` x k-fold cross-validation; t interval over repeat-level errors."""
    from .ci import t_interval

    n = data.n
    if n < folds:
        raise ValueError(f"need at least {folds} points for {folds}-fold cross-validation")
    errors = np.empty(repeats)
    for rep in range(repeats):
        labels = fold_assignment(n, folds, derive_seed(root, (31, rep)))
        sq = np.empty(n)
        for f in range(folds):
            test = labels == f
            train = ~test
            coef = learner.fit(data.features[train], data.response[train])
            sq[test] = (data.response[test] - learner.predict(coef, data.features[test])) ** 2
        errors[rep] = sq.mean()
    return t_interval("repeated-cv", errors, alpha)


def fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold label of each point for one repeat."""
    perm = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=np.int64)
    for f, test in enumerate(np.array_split(perm, folds)):
        labels[test] = f
    return labels
