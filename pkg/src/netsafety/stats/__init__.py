"""Statistical procedures: correlations, regression, chi-square tests, Shapley values."""

from .contingency import Chi2Result, chi2_contingency_yates, chi2_oneway
from .correlation import kendall, pearson, spearman
from .regression import (
    Dataset,
    RegressionReport,
    adjusted_r2,
    kfold_cv,
    n_mse,
    ols_fit,
    poisson_fit,
    predict,
    r2_score,
)
from .shapley import ShapleyReport, shapley_from_game, shapley_values
from .special import betainc, chi2_sf, f_sf, gammainc_upper

__all__ = [
    "Chi2Result",
    "Dataset",
    "RegressionReport",
    "ShapleyReport",
    "adjusted_r2",
    "betainc",
    "chi2_contingency_yates",
    "chi2_oneway",
    "chi2_sf",
    "f_sf",
    "gammainc_upper",
    "kendall",
    "kfold_cv",
    "n_mse",
    "ols_fit",
    "pearson",
    "poisson_fit",
    "predict",
    "r2_score",
    "shapley_from_game",
    "shapley_values",
    "spearman",
]
