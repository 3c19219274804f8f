import json

import numpy as np
import pytest

from genomask.config import ExperimentConfig
from genomask.errors import CapacityError, DegenerateSensitiveError, GenomaskError, InputError, NumericalError
from genomask.rng import stream


class TestExperimentConfig:
    def test_sensitive_positions_become_zero_based(self):
        """Files carry 1-based positions."""
        config = ExperimentConfig.from_dict({"name": "fig4", "sensitive": [1, 5]})
        assert config.sensitive == (0, 4)

    def test_grids_are_tuples(self):
        """Lists in the file become tuples of the right type."""
        config = ExperimentConfig.from_dict({"name": "fig3", "epsilons": [0.1, 0.2], "omegas": [0, 10]})
        assert config.epsilons == (0.1, 0.2)
        assert config.omegas == (0, 10)

    def test_unknown_keys_go_to_extra(self):
        """Experiment-specific keys are kept aside."""
        config = ExperimentConfig.from_dict({"name": "hardness", "universe": 4})
        assert config.extra == {"universe": 4}

    def test_rejects_unknown_experiments(self):
        """Only the registered sweeps can be named."""
        with pytest.raises(InputError):
            ExperimentConfig(name="fig9")

    def test_rejects_bad_values(self):
        """Empty grids, zero runs and zero positions are input errors."""
        with pytest.raises(InputError):
            ExperimentConfig(name="fig4", epsilons=())
        with pytest.raises(InputError):
            ExperimentConfig(name="fig4", runs=0)
        with pytest.raises(InputError):
            ExperimentConfig.from_dict({"name": "fig4", "sensitive": [0]})
        with pytest.raises(InputError):
            ExperimentConfig(name="fig4", seed=-1)

    def test_load_resolves_paths(self, tmp_path):
        """Relative paths in a config file are relative to the file."""
        path = tmp_path / "fig4.json"
        path.write_text(json.dumps({"name": "fig4", "panel_path": "panel.txt", "output": "out.csv"}))
        config = ExperimentConfig.load(path)
        assert config.panel_path == tmp_path / "panel.txt"
        assert config.output == tmp_path / "out.csv"

    def test_load_rejects_malformed_files(self, tmp_path):
        """Invalid JSON is an input error."""
        path = tmp_path / "bad.json"
        path.write_text("{")
        with pytest.raises(InputError):
            ExperimentConfig.load(path)


class TestErrors:
    def test_exit_codes(self):
        """Each error family maps to its own exit code."""
        assert InputError("x").exit_code == 2
        assert DegenerateSensitiveError("x").exit_code == 2
        assert CapacityError("x").exit_code == 3
        assert NumericalError("x").exit_code == 4
        assert GenomaskError("x").exit_code == 1

    def test_input_errors_are_value_errors(self):
        """Input errors can be caught as ValueError."""
        assert issubclass(InputError, ValueError)


class TestStreams:
    def test_same_key_same_stream(self):
        """A stream is a pure function of seed and key."""
        np.testing.assert_array_equal(stream(7, 3).random(5), stream(7, 3).random(5))

    def test_keys_are_independent(self):
        """Different keys or seeds give different streams."""
        assert not np.array_equal(stream(7, 3).random(5), stream(7, 4).random(5))
        assert not np.array_equal(stream(7).random(5), stream(8).random(5))
