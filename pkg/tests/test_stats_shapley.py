import numpy as np
import pytest

from netsafety.errors import ParameterError
from netsafety.stats import Dataset, shapley_from_game, shapley_values

from oracles import shapley_permutation_oracle


class TestGameEnumeration:
    def test_two_player_hand_values(self):
        game = {frozenset(): 0.0, frozenset({0}): 0.3, frozenset({1}): 0.4, frozenset({0, 1}): 0.6}
        report = shapley_from_game(2, game.__getitem__)
        assert report.phi[0] == pytest.approx(0.25)
        assert report.phi[1] == pytest.approx(0.35)

    def test_matches_permutation_oracle(self):
        rng = np.random.default_rng(0)
        for n in (2, 3, 4, 5):
            table = {
                frozenset(s): float(rng.uniform(0, 1))
                for mask in range(1 << n)
                for s in [[i for i in range(n) if mask >> i & 1]]
            }
            table[frozenset()] = 0.0
            report = shapley_from_game(n, table.__getitem__)
            oracle = shapley_permutation_oracle(n, table.__getitem__)
            np.testing.assert_allclose(report.phi, oracle, atol=1e-12)

    def test_efficiency(self):
        rng = np.random.default_rng(1)
        n = 6
        table = {}
        for mask in range(1 << n):
            s = frozenset(i for i in range(n) if mask >> i & 1)
            table[s] = float(rng.uniform(0, 1)) if s else 0.0
        report = shapley_from_game(n, table.__getitem__)
        assert sum(report.phi) == pytest.approx(table[frozenset(range(n))], abs=1e-9)

    def test_dummy_player(self):
        # Player 1 never changes the value of any coalition.
        def value(s):
            return 0.5 if 0 in s else 0.0

        report = shapley_from_game(2, value)
        assert report.phi[1] == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_players_equal(self):
        def value(s):
            return float(len(s & {0, 1}) > 0) * 0.4 + 0.1 * (2 in s)

        report = shapley_from_game(3, value)
        assert report.phi[0] == pytest.approx(report.phi[1], abs=1e-12)

    def test_player_cap(self):
        with pytest.raises(ParameterError):
            shapley_from_game(17, lambda s: 0.0)


def planted_dataset(rng, n=120, noise=0.05):
    x = rng.normal(size=(n, 4))
    y = 3.0 * x[:, 0] + 0.5 * x[:, 1] + rng.normal(0, noise, n)
    return Dataset(x=x, y=y, predictor_names=["strong", "weak", "null_a", "null_b"])


class TestRegressionGame:
    def test_dominant_predictor_ranks_first(self):
        rng = np.random.default_rng(2)
        report = shapley_values(planted_dataset(rng))
        values = report.by_name()
        assert values["strong"] == max(values.values())
        assert values["strong"] > values["weak"] > max(values["null_a"], values["null_b"])

    def test_efficiency_against_full_fit(self):
        from netsafety.stats import ols_fit

        rng = np.random.default_rng(3)
        d = planted_dataset(rng)
        report = shapley_values(d)
        assert sum(report.phi) == pytest.approx(ols_fit(d).adj_r2, abs=1e-9)

    def test_duplicated_predictor_splits_value(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(100, 2))
        y = 2.0 * x[:, 0] + rng.normal(0, 0.1, 100)
        base = shapley_values(Dataset(x=x, y=y, predictor_names=["a", "b"]))
        dup = shapley_values(
            Dataset(x=np.column_stack([x, x[:, 0]]), y=y, predictor_names=["a", "b", "a_dup"])
        )
        values = dup.by_name()
        assert values["a"] == pytest.approx(values["a_dup"], abs=1e-9)  # symmetry
        assert sum(dup.phi) == pytest.approx(sum(base.phi), abs=1e-9)  # total unchanged
        assert len(dup.degenerate_coalitions) > 0

    def test_null_predictors_near_zero(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(200, 3))
        y = 4.0 * x[:, 0] + rng.normal(0, 0.05, 200)
        values = shapley_values(Dataset(x=x, y=y, predictor_names=["s", "n1", "n2"])).by_name()
        assert abs(values["n1"]) < 0.02 and abs(values["n2"]) < 0.02
