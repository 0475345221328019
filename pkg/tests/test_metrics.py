"""Criteria tests: pinned values, invariances, O(n²) oracle equivalence."""

import numpy as np
import pytest

from triqa.errors import LengthMismatch, UndefinedCorrelation
from triqa.metrics import (
    MetricsReport,
    average_ranks,
    compute_report,
    krcc,
    mae,
    plcc,
    rmse,
    srcc,
)

from oracles import oracle_average_ranks, oracle_pearson, oracle_srcc, oracle_tau_b


def random_vectors(rng, n, tie_prob=0.0):
    x = rng.normal(size=n)
    y = rng.normal(size=n)
    if tie_prob > 0:
        # quantize a random subset to force ties
        mask = rng.random(n) < tie_prob
        x[mask] = np.round(x[mask], 1)
        y[mask] = np.round(y[mask], 1)
    return x, y


class TestAverageRanks:
    def test_strictly_increasing(self):
        np.testing.assert_array_equal(average_ranks([10, 20, 30]), [1, 2, 3])

    def test_two_way_tie(self):
        np.testing.assert_array_equal(average_ranks([5, 5]), [1.5, 1.5])

    def test_mixed_ties(self):
        np.testing.assert_array_equal(average_ranks([3, 1, 3, 2]), [3.5, 1, 3.5, 2])

    def test_matches_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            v = rng.integers(0, 10, size=rng.integers(1, 30)).astype(float)
            np.testing.assert_allclose(average_ranks(v), oracle_average_ranks(v))


class TestSrcc:
    def test_identical_orderings(self):
        assert srcc([1, 2, 3, 4], [1, 2, 3, 4]) == pytest.approx(1.0)

    def test_reversed(self):
        assert srcc([4, 3, 2, 1], [1, 2, 3, 4]) == pytest.approx(-1.0)

    def test_same_order_different_values(self):
        assert srcc([0.1, 0.4, 0.2, 0.9], [1, 3, 2, 4]) == pytest.approx(1.0)

    def test_constant_vector_raises(self):
        with pytest.raises(UndefinedCorrelation):
            srcc([1, 1, 1], [1, 2, 3])

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        transforms = (lambda x: x**3 + x, np.exp, lambda x: 5 * x + 2)
        for _ in range(50):
            x = rng.normal(size=20)
            y = rng.normal(size=20)
            base = srcc(x, y)
            for f in transforms:
                assert abs(srcc(f(x), y) - base) < 1e-12


class TestPlcc:
    def test_affine_relation(self):
        x = np.linspace(0, 1, 10)
        assert plcc(2 * x + 3, x) == pytest.approx(1.0)

    def test_negation(self):
        x = np.linspace(0, 1, 10)
        assert plcc(-x, x) == pytest.approx(-1.0)

    def test_matches_covariance_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            x, y = random_vectors(rng, 10)
            assert abs(plcc(x, y) - oracle_pearson(x, y)) < 1e-12

    def test_affine_invariance_property(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            x, y = random_vectors(rng, 15)
            assert abs(plcc(3.7 * x + 0.2, y) - plcc(x, y)) < 1e-12


class TestKrcc:
    def test_perfect_agreement(self):
        assert krcc([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)

    def test_perfect_disagreement(self):
        assert krcc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_tied_case_matches_oracle(self):
        x = [1, 2, 2, 3]
        y = [1, 3, 2, 4]
        assert krcc(x, y) == pytest.approx(oracle_tau_b(x, y), abs=1e-12)

    def test_all_ties_raise(self):
        with pytest.raises(UndefinedCorrelation):
            krcc([2, 2, 2], [1, 2, 3])

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            x = rng.normal(size=12)
            y = rng.normal(size=12)
            assert abs(krcc(np.exp(x), y) - krcc(x, y)) < 1e-12


class TestErrors:
    def test_perfect(self):
        assert rmse([1, 2], [1, 2]) == 0.0
        assert mae([1, 2], [1, 2]) == 0.0

    def test_symmetric_errors(self):
        assert rmse([0.6, 0.4], [0.5, 0.5]) == pytest.approx(0.1)
        assert mae([0.6, 0.4], [0.5, 0.5]) == pytest.approx(0.1)

    def test_pinned_arithmetic(self):
        p = [0.3, 0.0, 0.0]
        l = [0.0, 0.0, 0.0]
        assert rmse(p, l) == pytest.approx(0.17320508075688773, abs=1e-12)
        assert mae(p, l) == pytest.approx(0.1, abs=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            rmse([1, 2], [1, 2, 3])


class TestOracleEquivalence:
    def test_srcc_krcc_match_oracles_including_ties(self):
        rng = np.random.default_rng(5)
        for case in range(300):
            n = int(rng.integers(2, 65))
            x, y = random_vectors(rng, n, tie_prob=0.5 if case % 2 else 0.0)
            try:
                expected_s = oracle_srcc(x, y)
            except UndefinedCorrelation:
                with pytest.raises(UndefinedCorrelation):
                    srcc(x, y)
                continue
            assert abs(srcc(x, y) - expected_s) < 1e-12
            assert abs(krcc(x, y) - oracle_tau_b(x, y)) < 1e-12

    def test_rmse_dominates_mae(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            x, y = random_vectors(rng, int(rng.integers(1, 40)))
            assert rmse(x, y) >= mae(x, y) - 1e-15

    def test_correlations_symmetric_and_bounded(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            x, y = random_vectors(rng, 12, tie_prob=0.3)
            try:
                for fn in (srcc, plcc, krcc):
                    v = fn(x, y)
                    assert abs(v) <= 1.0 + 1e-12
                    assert abs(fn(y, x) - v) < 1e-12
            except UndefinedCorrelation:
                pass


class TestReport:
    def test_degenerate_model_still_reports_errors(self):
        report = compute_report([0.5, 0.5, 0.5], [0.1, 0.5, 0.9])
        assert np.isnan(report.srcc) and np.isnan(report.plcc) and np.isnan(report.krcc)
        assert set(report.degenerate) == {"srcc", "plcc", "krcc"}
        assert report.rmse == pytest.approx(np.sqrt((0.16 + 0 + 0.16) / 3))
        assert report.mae == pytest.approx(0.8 / 3)

    def test_csv_row_roundtrip(self):
        report = compute_report([0.1, 0.9, 0.4], [0.2, 0.8, 0.3])
        row = report.to_csv_row()
        vals = [float(v) for v in row.split(",")]
        assert vals == [report.srcc, report.plcc, report.krcc, report.rmse, report.mae]

    def test_text_block_has_five_lines(self):
        report = compute_report([0.1, 0.9, 0.4], [0.2, 0.8, 0.3])
        assert len(report.to_text().splitlines()) == 5
