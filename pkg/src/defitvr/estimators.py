"""scikit-learn style wrappers around the metrics and the shock engine."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_decline_grid, check_snapshot, check_snapshots
from .contagion import (
    DEFAULT_GAS_LIMIT,
    DEFAULT_GAS_PRICE,
    DEFAULT_MAX_ROUNDS,
    ShockScenario,
    apply_overrides,
    run_point,
    sensitivity_curve,
)
from .metrics import metric_report, tvl, tvr


class SensitivityAnalysis(BaseEstimator):
    """Change in TVL and TVR after a price decline of one plain token.

    ``fit`` takes a snapshot and records the baseline; ``predict`` maps
    declines ``d`` to rows ``[delta_tvl, delta_tvr]``.
    """

    def __init__(self, shock_token="ETH", close_factors=None, liquidation_bonuses=None,
                 gas_limit=DEFAULT_GAS_LIMIT, gas_price=DEFAULT_GAS_PRICE, gas_scale=1.0,
                 max_rounds=DEFAULT_MAX_ROUNDS):
        self.shock_token = shock_token
        self.close_factors = close_factors
        self.liquidation_bonuses = liquidation_bonuses
        self.gas_limit = gas_limit
        self.gas_price = gas_price
        self.gas_scale = gas_scale
        self.max_rounds = max_rounds

    def scenario(self, grid=(0.0,)) -> ShockScenario:
        return ShockScenario(
            shock_token=self.shock_token,
            grid=tuple(sorted(float(d) for d in grid)),
            close_factors=self.close_factors or {},
            liquidation_bonuses=self.liquidation_bonuses or {},
            gas_limit=self.gas_limit,
            gas_price=self.gas_price,
            gas_scale=self.gas_scale,
            max_rounds=self.max_rounds,
        )

    def fit(self, X, y=None):
        snapshot = check_snapshot(X)
        base = apply_overrides(snapshot, self.scenario())
        prices = base.prices()
        self.snapshot_ = base
        self.baseline_tvl_ = tvl(base, prices)
        self.baseline_tvr_ = tvr(base, prices)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "snapshot_")
        declines = check_decline_grid(X)
        scenario = self.scenario()
        baseline = (self.baseline_tvl_, self.baseline_tvr_)
        rows = [run_point(self.snapshot_, scenario, float(d), baseline) for d in declines]
        return np.array([[r.delta_tvl, r.delta_tvr] for r in rows]).reshape(-1, 2)

    def simulate(self, grid):
        check_is_fitted(self, "snapshot_")
        return sensitivity_curve(self.snapshot_, self.scenario(check_decline_grid(grid)))


class TVRMetrics(TransformerMixin, BaseEstimator):
    """Map snapshots to rows ``[tvl, tvr, tvl_adjusted, multiplier]``.

    The multiplier is NaN where TVR is zero.
    """

    def __init__(self, excluded_protocols=None):
        self.excluded_protocols = excluded_protocols

    def fit(self, X, y=None):
        check_snapshots(X)
        self.n_features_out_ = 4
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_out_")
        rows = []
        for snap in check_snapshots(X):
            excluded = [p for p in (self.excluded_protocols or ()) if p in snap.protocols]
            rep = metric_report(snap, excluded_protocols=excluded)
            mult = np.nan if rep.multiplier is None else rep.multiplier
            rows.append([rep.tvl, rep.tvr, rep.tvl_adjusted, mult])
        return np.array(rows, dtype=float).reshape(-1, 4)

    def get_feature_names_out(self, input_features=None):
        return np.array(["tvl", "tvr", "tvl_adjusted", "multiplier"], dtype=object)
