import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from defitvr.contagion import ShockScenario, sensitivity_curve
from defitvr.estimators import SensitivityAnalysis, TVRMetrics
from defitvr.exceptions import SchemaError
from defitvr.fixtures import synthetic_system, wrapping_chain
from defitvr.metrics import tvl, tvr
from defitvr.protocols import Protocol
from defitvr.snapshot import Snapshot
from defitvr.tokens import Token, TokenKind


@pytest.fixture(scope="module")
def fitted():
    return SensitivityAnalysis(close_factors={"MakerDAO": 1.0}).fit(synthetic_system())


class TestSensitivityAnalysis:
    def test_params_round_trip(self):
        est = SensitivityAnalysis(gas_scale=2.0)
        params = est.get_params()
        assert params["gas_scale"] == 2.0 and params["shock_token"] == "ETH"
        assert est.set_params(max_rounds=5).max_rounds == 5
        twin = clone(est)
        assert twin.get_params() == est.get_params() and not hasattr(twin, "snapshot_")

    def test_baseline(self, fitted):
        snap = synthetic_system()
        assert fitted.baseline_tvl_ == pytest.approx(tvl(snap))
        assert fitted.baseline_tvr_ == pytest.approx(tvr(snap))

    def test_predict_shape_and_zero_row(self, fitted):
        out = fitted.predict([0.0, 0.1, 0.3])
        assert out.shape == (3, 2)
        assert out[0].tolist() == [0.0, 0.0]

    def test_predict_matches_curve(self, fitted):
        grid = [0.05, 0.2, 0.4]
        curve = sensitivity_curve(synthetic_system(), ShockScenario("ETH", tuple(grid),
                                                                    close_factors={"MakerDAO": 1.0}))
        expected = [[r.delta_tvl, r.delta_tvr] for r in curve.rows]
        assert np.allclose(fitted.predict(np.array(grid).reshape(-1, 1)), expected, rtol=1e-12)

    def test_simulate(self, fitted):
        assert len(fitted.simulate([0.0, 0.25]).rows) == 2

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            SensitivityAnalysis().predict([0.1])

    def test_rejects_non_snapshot(self):
        with pytest.raises(TypeError):
            SensitivityAnalysis().fit(np.zeros((2, 2)))

    def test_decline_out_of_range(self, fitted):
        with pytest.raises(SchemaError):
            fitted.predict([1.2])

    def test_two_dimensional_declines(self, fitted):
        with pytest.raises(ValueError):
            fitted.predict(np.zeros((2, 2)))


class TestTVRMetrics:
    def test_wrapping_chain_row(self):
        out = TVRMetrics(excluded_protocols=["MakerDAO", "Convex"]).fit_transform([wrapping_chain()])
        assert out.shape == (1, 4)
        assert out[0] == pytest.approx([4713.0, 1000.0, 3142.0, 4.713])

    def test_nan_multiplier(self):
        tokens = [Token("ETH", TokenKind.PLAIN), Token("stETH", TokenKind.DERIVATIVE, 1.0, (("ETH", 1.0),))]
        snap = Snapshot.build(tokens, [Protocol("Curve")], [("Curve", "stETH", 1.0)], [], {"ETH": 10.0})
        out = TVRMetrics().fit(snap).transform(snap)
        assert out[0, :3].tolist() == [10.0, 0.0, 10.0] and math.isnan(out[0, 3])

    def test_exclusion_skips_absent_protocols(self):
        out = TVRMetrics(excluded_protocols=["Nowhere"]).fit_transform([wrapping_chain()])
        assert out[0, 2] == out[0, 0]

    def test_feature_names(self):
        assert list(TVRMetrics().get_feature_names_out()) == ["tvl", "tvr", "tvl_adjusted", "multiplier"]

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            TVRMetrics().transform([wrapping_chain()])

    def test_clone(self):
        est = TVRMetrics(excluded_protocols=["Convex"])
        assert clone(est).get_params() == {"excluded_protocols": ["Convex"]}
