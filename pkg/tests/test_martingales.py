import math

import numpy as np
import pytest

from stochastic_gronwall.errors import ContractViolationError
from stochastic_gronwall.martingales import (
    MartingalePath,
    enumerate_sign_walks,
    functionals,
    gen_stopped_random_walk,
    gen_stopped_wiener_discretization,
    lemma_bound_ratio,
    remark_constants,
    sample_sup_stopped_bm_exact,
    sample_sup_stopped_bm_exact_batch,
    stopped_bm_batch_functionals,
    stopped_bm_paths_matrix,
    walk_conditional_increment_bias,
    walk_functional_expectations,
)
from stochastic_gronwall.streams import StreamPlan


class _FixedUniform:
    """Stream stub whose uniform draws are prescribed."""

    def __init__(self, value):
        self.value = value

    def random(self, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)


class TestFunctionals:
    def test_trivial(self):
        pf = functionals(MartingalePath([0.0], "t"))
        assert (pf.sup_val, pf.neg_inf_val) == (0.0, 0.0)

    def test_scan(self):
        pf = functionals(MartingalePath([0.0, 1.0, -2.0], "t"))
        assert (pf.sup_val, pf.neg_inf_val) == (1.0, 2.0)
        pf = functionals(MartingalePath([0.0, -1.0, -1.0], "t"))
        assert (pf.sup_val, pf.neg_inf_val) == (0.0, 1.0)

    def test_rejects_nonzero_start(self):
        with pytest.raises(ContractViolationError):
            MartingalePath([1.0, 0.0], "t")


class TestStoppedRandomWalk:
    def test_zero_steps(self):
        path = gen_stopped_random_walk(0, -1.0, StreamPlan(0).path_stream(0))
        assert list(path.values.values) == [0.0]

    def test_freezing_rule(self):
        plan = StreamPlan(7)
        for i in range(50):
            path = gen_stopped_random_walk(30, -1.0, plan.path_stream(i)).values.values
            hits = np.nonzero(path <= -1.0)[0]
            if hits.size:
                k = hits[0]
                assert np.all(path[k:] == path[k])

    def test_plain_walk_unbounded_level(self):
        path = gen_stopped_random_walk(10, -math.inf, StreamPlan(3).path_stream(0))
        steps = np.diff(path.values.values)
        assert set(np.unique(steps)) <= {-1.0, 1.0}

    def test_contract(self):
        stream = StreamPlan(0).path_stream(0)
        with pytest.raises(ContractViolationError):
            gen_stopped_random_walk(5, 0.0, stream)
        with pytest.raises(ContractViolationError):
            gen_stopped_random_walk(-1, -1.0, stream)


class TestEnumeration:
    def test_two_step_paths(self):
        paths = enumerate_sign_walks(2)
        expected = {(0.0, 1.0, 2.0), (0.0, 1.0, 0.0), (0.0, -1.0, 0.0), (0.0, -1.0, -2.0)}
        assert {tuple(row) for row in paths} == expected
        assert paths.shape == (4, 3)

    def test_stopped_two_step(self):
        paths = enumerate_sign_walks(2, stop_level=-1.0)
        # the two down-first patterns freeze at -1
        expected = {(0.0, 1.0, 2.0), (0.0, 1.0, 0.0), (0.0, -1.0, -1.0)}
        assert {tuple(row) for row in paths} == expected

    def test_two_step_hand_expectations(self):
        exp = walk_functional_expectations(2, [0.5])
        assert exp.e_sup_p[0.5] == (math.sqrt(2.0) + 1.0) / 4.0
        assert exp.e_neg_inf == 0.75

    def test_guard(self):
        with pytest.raises(ContractViolationError):
            enumerate_sign_walks(23)

    @pytest.mark.parametrize("stop", [None, -1.0, -2.0])
    @pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
    def test_inequality_small_n(self, stop, p):
        for n in range(0, 9):
            exp = walk_functional_expectations(n, [p], stop_level=stop)
            lhs = exp.e_sup_p[p]
            rhs = exp.e_neg_inf**p / (1.0 - p)
            assert lhs <= rhs + 1e-12

    @pytest.mark.parametrize("stop", [None, -1.0, -3.0])
    def test_martingale_property_exact(self, stop):
        assert walk_conditional_increment_bias(8, stop_level=stop) <= 1e-12


class TestExactSupSampler:
    def test_inverse_survival_at_half(self):
        assert sample_sup_stopped_bm_exact(_FixedUniform(0.5)) == 1.0

    def test_tail_probability(self):
        stream = StreamPlan(11).path_stream(0)
        draws = sample_sup_stopped_bm_exact_batch(stream, 1_000_000)
        frac = float(np.mean(draws >= 1.0))
        # P(sup >= 1) = 1/2, standard error 5e-4
        assert abs(frac - 0.5) <= 4 * 5e-4

    def test_mean_sqrt_near_half_pi(self):
        stream = StreamPlan(5).path_stream(0)
        vals = np.sqrt(sample_sup_stopped_bm_exact_batch(stream, 200_000))
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert abs(vals.mean() - math.pi / 2.0) <= 4 * se

    def test_kolmogorov_smirnov(self):
        stream = StreamPlan(17).path_stream(0)
        draws = np.sort(sample_sup_stopped_bm_exact_batch(stream, 100_000))
        cdf = draws / (1.0 + draws)
        n = draws.size
        upper = np.arange(1, n + 1) / n - cdf
        lower = cdf - np.arange(0, n) / n
        d_stat = max(upper.max(), lower.max())
        assert d_stat <= 0.01


class TestLemmaRatio:
    def test_two_step_enumeration(self):
        exp = walk_functional_expectations(2, [0.5])
        check = lemma_bound_ratio(0.5, exp.e_sup_p[0.5], exp.e_neg_inf)
        assert check.ratio == pytest.approx(0.6969, abs=1e-4)
        assert check.upper == 2.0
        assert not check.degenerate

    def test_degenerate(self):
        check = lemma_bound_ratio(0.5, 0.0, 0.0)
        assert check.degenerate and math.isnan(check.ratio)
        check2 = lemma_bound_ratio(0.5, 1.0, 0.0)
        assert check2.degenerate

    def test_stopped_bm_limit_value(self):
        # exact sampler mean over a large batch approaches pi/2 <= 2
        stream = StreamPlan(23).path_stream(0)
        e_sup_p = float(np.mean(np.sqrt(sample_sup_stopped_bm_exact_batch(stream, 500_000))))
        check = lemma_bound_ratio(0.5, e_sup_p, 1.0)
        assert check.ratio == pytest.approx(math.pi / 2.0, abs=0.02)
        assert check.ratio <= check.upper


class TestRemarkConstants:
    def test_at_half(self):
        rc = remark_constants(0.5)
        assert rc.lower == pytest.approx(math.pi / 2.0, rel=1e-15)
        assert rc.upper == 2.0
        assert rc.ratio == pytest.approx(4.0 / math.pi, rel=1e-15)

    def test_limits(self):
        assert remark_constants(0.001).ratio == pytest.approx(1.0, abs=0.01)
        assert remark_constants(0.999).ratio == pytest.approx(1.0, abs=0.01)

    def test_ordering_grid(self):
        for p in np.linspace(0.01, 0.99, 99):
            rc = remark_constants(float(p))
            assert rc.lower <= rc.upper


class TestStoppedWiener:
    def test_freezing_rule(self):
        plan = StreamPlan(29)
        for i in range(20):
            path = gen_stopped_wiener_discretization(0.5, 50.0, plan.path_stream(i))
            vals = path.values.values
            hits = np.nonzero(vals <= -1.0)[0]
            if hits.size:
                k = hits[0]
                assert np.all(vals[k:] == vals[k])
                assert vals[k] <= -1.0

    def test_zero_mean_martingale(self):
        # E[M at truncation] = 0 by optional stopping on a bounded horizon
        stream = StreamPlan(31).path_stream(0)
        batch = stopped_bm_batch_functionals(0.25, 100.0, stream, 100_000)
        se = batch.final.std(ddof=1) / math.sqrt(batch.final.size)
        assert abs(batch.final.mean()) <= 4 * se

    def test_neg_inf_approaches_one_from_above(self):
        # overshoot shrinks like sqrt(h); truncation bias is far smaller
        stream = StreamPlan(37).path_stream(0)
        means = []
        for h in (1.0, 0.25, 0.0625):
            batch = stopped_bm_batch_functionals(h, 1e4, stream, 4000)
            means.append(batch.neg_inf.mean())
        assert means[0] > means[1] > means[2] > 1.0

    def test_truncated_fraction_reported(self):
        stream = StreamPlan(41).path_stream(0)
        batch = stopped_bm_batch_functionals(0.5, 10.0, stream, 2000)
        assert 0.0 < batch.truncated_fraction < 1.0

    def test_increment_regression_slope(self):
        # conditional mean of the next increment given the present value
        # is zero; regression slope over paths must be statistically zero
        stream = StreamPlan(43).path_stream(0)
        paths = stopped_bm_paths_matrix(1.0, 20, stream, 20_000)
        k = 10
        x = paths[:, k]
        y = paths[:, k + 1] - paths[:, k]
        slope = np.cov(x, y, ddof=1)[0, 1] / np.var(x, ddof=1)
        resid = y - slope * x
        se = resid.std(ddof=2) / (math.sqrt(x.size) * x.std(ddof=1))
        assert abs(slope) <= 4 * se
