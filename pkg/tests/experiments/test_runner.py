import io

import pandas as pd
import pytest

from genomask.errors import InputError
from genomask.experiments import COLUMNS, EXPERIMENTS
from genomask.runner import ExperimentRunner, write_results

from ..conftest import make_config


class TestRegistry:
    def test_every_sweep_is_registered(self):
        """Each configurable experiment name has an implementation."""
        assert set(EXPERIMENTS) == {"fig3", "fig4", "fig5", "robustness", "hardness", "complexity"}

    def test_info(self):
        """Runners expose the experiment's name and description."""
        info = ExperimentRunner(make_config("fig4")).info()
        assert info.name == "fig4"
        assert info.description

    def test_unregistered_experiment(self):
        """A runner with a registry lacking the name refuses to start."""
        with pytest.raises(InputError):
            ExperimentRunner(make_config("fig4"), experiments={})


class TestRunner:
    def test_rows_follow_grid_order(self):
        """Points appear in grid order with their metrics."""
        frame = ExperimentRunner(make_config("hardness", universe=3, sets=2, instances=3)).run()
        assert list(frame.columns) == list(COLUMNS)
        assert frame["point"].tolist() == [0, 0, 1, 1, 2, 2]
        assert frame["metric"].tolist() == ["e_star", "h_star"] * 3

    def test_workers_do_not_change_results(self):
        """Parallel evaluation yields the same rows as serial evaluation."""
        serial = ExperimentRunner(make_config("fig4", epsilons=[0.1, 0.2, 0.3], workers=1)).run()
        parallel = ExperimentRunner(make_config("fig4", epsilons=[0.1, 0.2, 0.3], workers=3)).run()
        pd.testing.assert_frame_equal(serial, parallel)

    def test_reruns_are_byte_identical(self):
        """The same config and seed produce the same CSV text."""
        config = make_config("hardness", universe=4, sets=3, instances=4, seed=11)
        first = write_results(ExperimentRunner(config).run(), None)
        second = write_results(ExperimentRunner(config).run(), None)
        assert first == second

    def test_failed_points_become_error_rows(self):
        """A point that raises is reported with its status instead of aborting the sweep."""
        frame = ExperimentRunner(make_config("fig5", truncate=7)).run()
        assert frame["metric"].tolist() == ["error"]
        assert frame["status"].tolist() == ["input"]

    def test_provenance_columns(self):
        """Rows carry the 1-based sensitive positions and the root seed."""
        frame = ExperimentRunner(make_config("fig4", sensitive=[2], seed=5)).run()
        assert set(frame["sensitive"]) == {"2"}
        assert set(frame["seed"]) == {5}


class TestWriteResults:
    def test_csv_text_and_json(self, tmp_path):
        """Without a path the CSV comes back as text; JSON is written alongside on request."""
        frame = ExperimentRunner(make_config("hardness", universe=3, sets=2, instances=2)).run()
        text = write_results(frame, None, tmp_path / "rows.json")
        assert text.splitlines()[0] == ",".join(COLUMNS)
        assert len(pd.read_csv(io.StringIO(text))) == 4
        assert len(pd.read_json(tmp_path / "rows.json")) == 4

    def test_csv_to_file(self, tmp_path):
        """With a path the CSV is written and nothing is returned."""
        frame = ExperimentRunner(make_config("hardness", universe=3, sets=2, instances=2)).run()
        assert write_results(frame, tmp_path / "rows.csv") is None
        assert (tmp_path / "rows.csv").read_text().startswith("experiment,point,metric")
