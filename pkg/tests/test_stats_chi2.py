import numpy as np
import pytest

from netsafety.errors import DataError
from netsafety.stats import chi2_contingency_yates, chi2_oneway

from oracles import chi2_sf_oracle, yates_chi2_oracle


class TestContingencyYates:
    def test_identical_rows(self):
        result = chi2_contingency_yates([[10, 20, 30], [10, 20, 30]])
        assert result.statistic == pytest.approx(0.0, abs=1e-12)
        assert result.p_value == pytest.approx(1.0, abs=1e-9)

    def test_hand_yates_2x2(self):
        result = chi2_contingency_yates([[10, 20], [20, 10]])
        assert result.statistic == pytest.approx(5.4)
        assert result.df == 1
        assert result.p_value == pytest.approx(0.0201, abs=1e-4)

    def test_three_rows_no_correction(self):
        table = [[10, 20], [15, 15], [20, 10]]
        obs = np.asarray(table, dtype=float)
        row, col = obs.sum(axis=1), obs.sum(axis=0)
        expected = np.outer(row, col) / obs.sum()
        plain = float(np.sum((obs - expected) ** 2 / expected))
        result = chi2_contingency_yates(table)
        assert result.statistic == pytest.approx(plain)
        assert result.df == 2

    def test_matches_oracle_on_random_2xc(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            c = int(rng.integers(2, 10))
            table = rng.integers(1, 60, size=(2, c))
            stat, df, p = yates_chi2_oracle(table)
            result = chi2_contingency_yates(table)
            assert result.statistic == pytest.approx(stat, rel=1e-12)
            assert result.df == df
            assert result.p_value == pytest.approx(p, abs=1e-8)

    def test_proportional_rows_floor(self):
        result = chi2_contingency_yates([[10, 20, 40], [20, 40, 80]])
        assert result.statistic <= 3 * 2 * 0.25  # every deviation inside the correction floor
        assert result.p_value >= 0.95

    def test_zero_margin_rejected(self):
        with pytest.raises(DataError):
            chi2_contingency_yates([[0, 0], [1, 2]])


class TestOneWay:
    def test_uniform(self):
        result = chi2_oneway([5, 5, 5, 5])
        assert result.statistic == 0.0
        assert result.p_value == pytest.approx(1.0)

    def test_hand_value(self):
        result = chi2_oneway([10, 20])
        assert result.statistic == pytest.approx(10 / 3)
        assert result.df == 1
        assert result.p_value == pytest.approx(chi2_sf_oracle(10 / 3, 1), abs=1e-8)
        assert result.p_value == pytest.approx(0.0679, abs=1e-4)

    def test_exact_expected_match(self):
        result = chi2_oneway([3, 7, 10], expected=[3, 7, 10])
        assert result.statistic == 0.0

    def test_strong_peak_tiny_p(self):
        counts = [1] * 23 + [500]
        assert chi2_oneway(counts).p_value < 1e-6

    def test_all_zero_rejected(self):
        with pytest.raises(DataError):
            chi2_oneway([0, 0, 0])

    def test_bad_expected(self):
        with pytest.raises(DataError):
            chi2_oneway([1, 2], expected=[1, 0])
