import math

import numpy as np
import pytest

from genomask.experiments.complexity import loglog_slope
from genomask.runner import ExperimentRunner

from ..conftest import make_config, write_panel_file


def metric(frame, name):
    return frame[frame["metric"] == name].reset_index(drop=True)


class TestWindowBaseline:
    def test_rows(self):
        """One mechanism row per (epsilon, theta) and two rows per window size."""
        frame = ExperimentRunner(make_config("fig3", omegas=[0, 3])).run()
        assert len(metric(frame, "mechanism_erasure_rate")) == 1
        np.testing.assert_allclose(metric(frame, "window_erasure_rate")["value"], [0.0, 0.5])
        leakage = metric(frame, "window_leakage")
        assert leakage["omega"].tolist() == [0, 3]
        assert leakage["value"][0] == pytest.approx(1.0)

    def test_mechanism_erases_at_least_the_sensitive_position(self):
        """The mechanism's erasure rate is at least |K| / n."""
        frame = ExperimentRunner(make_config("fig3", omegas=[1])).run()
        assert metric(frame, "mechanism_erasure_rate")["value"][0] >= 1 / 6 - 1e-12

    @pytest.mark.slow
    def test_window_needs_more_erasures_than_the_mechanism(self):
        """The first window leaking under 1% erases at least 5 points more than the mechanism."""
        config = make_config(
            "fig3", m=50, n=60, epsilons=[0.1], thetas=[0.01], omegas=list(range(0, 61, 5)), runs=200, samples=2000
        )
        frame = ExperimentRunner(config).run()
        mechanism = metric(frame, "mechanism_erasure_rate")["value"][0]
        leakage = metric(frame, "window_leakage")
        private = leakage[leakage["value"] - 2 * leakage["stderr"] < 0.01]
        assert not private.empty
        assert private["omega"].min() / 60 >= mechanism + 0.05


class TestRateVersusCrossover:
    def test_rate_stays_below_the_bound(self):
        """Every sampled rate lies within noise of the bound or below it."""
        frame = ExperimentRunner(make_config("fig4", epsilons=[0.05, 0.2], thetas=[0.01, 0.1], runs=200)).run()
        rates, bounds = metric(frame, "rate"), metric(frame, "bound")
        assert len(rates) == 4
        assert np.all(rates["value"] <= bounds["value"] + 4 * rates["stderr"] + 1e-9)

    def test_panel_file(self, tmp_path):
        """A panel file fixes m and n."""
        panel = write_panel_file(tmp_path, 4, 5)
        frame = ExperimentRunner(make_config("fig4", panel_path=str(panel))).run()
        assert set(frame["m"]) == {4}
        assert set(frame["n"]) == {5}

    @pytest.mark.slow
    def test_noisier_emissions_raise_the_rate(self):
        """theta = 0.05 rates dominate theta = 0.01 rates, and the gap closes past epsilon = 0.2."""
        epsilons = [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5]
        config = make_config("fig4", m=50, n=60, epsilons=epsilons, thetas=[0.01, 0.05], runs=300)
        rates = metric(ExperimentRunner(config).run(), "rate")
        sharp = rates[rates["theta"] == 0.01].set_index("epsilon")
        noisy = rates[rates["theta"] == 0.05].set_index("epsilon")
        gap = noisy["value"] - sharp["value"]
        noise = np.sqrt(noisy["stderr"] ** 2 + sharp["stderr"] ** 2)
        assert np.all(gap >= -3 * noise)
        assert gap[gap.index > 0.2].max() < gap[gap.index <= 0.2].max()


class TestLpSandwich:
    def test_sandwich(self):
        """mechanism <= LP <= bound at every point."""
        frame = ExperimentRunner(make_config("fig5", epsilons=[0.1, 0.3], truncate=4)).run()
        mechanism, lp, bound = (metric(frame, name) for name in ("mechanism", "lp", "bound"))
        assert set(lp["status"]) == {"optimal"}
        assert np.all(mechanism["value"] <= lp["value"] + 1e-7)
        assert np.all(lp["value"] <= bound["value"] + 1e-7)
        assert set(frame["n"]) == {4}


class TestModelMismatch:
    def test_leakage_respects_the_bound(self):
        """Leakage under p never exceeds D(p || q); matching models leak nothing."""
        frame = ExperimentRunner(make_config("robustness", epsilons=[0.1], q_epsilons=[0.1, 0.3])).run()
        leakage, bound = metric(frame, "leakage"), metric(frame, "kl_bound")
        assert metric(frame, "q_epsilon")["value"].tolist() == [0.1, 0.3]
        assert np.all(leakage["value"] <= bound["value"] + 1e-9)
        assert leakage["value"][0] == pytest.approx(0.0, abs=1e-12)
        assert np.all(np.abs(metric(frame, "q_self_leakage")["value"]) <= 1e-10)

    def test_long_panels_sample_the_divergence(self):
        """Past the enumeration budget leakage rows carry status capacity and the bound a stderr."""
        config = make_config("robustness", n=14, truncate=14, epsilons=[0.1], q_epsilons=[0.3], samples=200)
        frame = ExperimentRunner(config).run()
        leakage, bound = metric(frame, "leakage"), metric(frame, "kl_bound")
        assert leakage["status"].tolist() == ["capacity"]
        assert leakage["value"].isna().all()
        assert bound["status"].tolist() == ["ok"]
        assert bound["stderr"][0] > 0


class TestOrderingHardness:
    def test_optimal_ordering_matches_hitting_set(self):
        """Every random instance reports e* = h*."""
        frame = ExperimentRunner(make_config("hardness", universe=4, sets=3, instances=8)).run()
        assert set(frame["status"]) == {"ok"}
        np.testing.assert_array_equal(metric(frame, "e_star")["value"], metric(frame, "h_star")["value"])


class TestMaskingComplexity:
    def test_loglog_slope(self):
        """A quadratic cost has slope two."""
        sizes = [10, 20, 40]
        assert loglog_slope(sizes, [s**2 for s in sizes]) == pytest.approx(2.0)

    def test_rows(self):
        """Each axis times every size and reports one slope."""
        frame = ExperimentRunner(make_config("complexity", sizes=[4, 8], repeats=1)).run()
        assert len(metric(frame, "seconds")) == 4
        slopes = frame[frame["metric"].str.startswith("slope_")]
        assert slopes["metric"].tolist() == ["slope_n", "slope_m"]
        assert all(math.isfinite(v) for v in slopes["value"])
