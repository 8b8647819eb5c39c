r"""
Tests for the experiment configuration.
"""
import pytest

from robust_replay.config import ExperimentConfig, SyntheticSpec, load_config, load_synthetic_spec
from robust_replay.exceptions import ConfigError
from robust_replay.memory import BalancingCoefficient


class TestExperimentConfig:
    """Tests for building and validating configurations"""

    def test_defaults(self):
        """Test the canonical defaults"""
        config = ExperimentConfig()
        assert (config.num_classes, config.dim, config.num_tasks) == (10, 32, 5)
        assert config.memory_size == 200 and config.noise_ratio == 0.4
        assert config.seeds == (0, 1, 2)
        assert config.coefficient == BalancingCoefficient("adaptive")
        assert config.is_synthetic

    @pytest.mark.parametrize(
        "key,value",
        [
            ("num_tasks", 11),
            ("num_tasks", 0),
            ("blurry_ratio", 1.0),
            ("noise_type", "pair"),
            ("noise_ratio", -0.1),
            ("memory_size", 0),
            ("robust_mode", "mixmatch"),
            ("eta", -1.0),
            ("lr", 0.0),
            ("lr_schedule", "step"),
            ("workers", 0),
            ("warmup_epochs", -1),
            ("seeds", ()),
            ("alpha_mode", "fixed:1.5"),
            ("alpha_mode", "0.3"),
        ],
    )
    def test_invalid_value(self, key, value):
        """Test that an invalid value is reported with its key"""
        with pytest.raises(ConfigError, match=f"'{key}'"):
            ExperimentConfig(**{key: value})

    @pytest.mark.parametrize(
        "key,value",
        [
            ("seeds", "abc"),
            ("seeds", [0, "1"]),
            ("num_tasks", 2.5),
            ("memory_size", True),
            ("lr", "fast"),
            ("eta", None),
            ("sampler", 3),
            ("asym_map", [1.5, 2, 0]),
        ],
    )
    def test_wrong_type(self, key, value):
        """Test that a value of the wrong type is reported with its key"""
        with pytest.raises(ConfigError, match=f"'{key}'"):
            ExperimentConfig.from_dict({key: value})

    def test_integral_float_fields(self):
        """Test that integers are accepted where a number is expected"""
        config = ExperimentConfig(lr=1, radius=4, noise_ratio=0)
        assert config.lr == 1 and config.noise_ratio == 0

    def test_unknown_key(self):
        """Test that unknown keys are rejected"""
        with pytest.raises(ConfigError, match="Unknown configuration key"):
            ExperimentConfig.from_dict({"memory": 10})

    def test_asym_map(self):
        """Test the asymmetric map checks and conversion"""
        config = ExperimentConfig(num_classes=3, num_tasks=3, asym_map=[1, 2, 0])
        assert config.class_map() == {0: 1, 1: 2, 2: 0}
        with pytest.raises(ConfigError, match="asym_map"):
            ExperimentConfig(num_classes=3, num_tasks=3, asym_map=[0, 2, 1])
        with pytest.raises(ConfigError, match="asym_map"):
            ExperimentConfig(num_classes=3, num_tasks=3, asym_map=[1, 2])

    def test_replace_validates(self):
        """Test that a replaced copy is validated"""
        config = ExperimentConfig()
        assert config.replace(noise_ratio=0.2).noise_ratio == 0.2
        with pytest.raises(ConfigError):
            config.replace(noise_ratio=2.0)
        with pytest.raises(ConfigError, match="Unknown"):
            config.replace(colour="red")

    def test_dumps_reads_back(self, tmp_path):
        """Test that the TOML echo loads into an equal configuration"""
        config = ExperimentConfig(sampler="gbs", seeds=[3, 4], alpha_mode="fixed:0.25")
        path = tmp_path / "config.toml"
        path.write_text(config.dumps())
        assert load_config(path) == config

    def test_to_dict_drops_none(self):
        """Test that unset optional keys are left out"""
        values = ExperimentConfig().to_dict()
        assert "test_dataset" not in values and "asym_map" not in values
        assert values["seeds"] == [0, 1, 2]


class TestLoadConfig:
    """Tests for reading configuration files"""

    def test_missing_file(self, tmp_path):
        """Test that a missing file is a configuration error"""
        with pytest.raises(ConfigError, match="Cannot read"):
            load_config(tmp_path / "nope.toml")

    def test_malformed(self, tmp_path):
        """Test that malformed TOML is a configuration error"""
        path = tmp_path / "bad.toml"
        path.write_text("memory_size = = 3\n")
        with pytest.raises(ConfigError, match="Malformed"):
            load_config(path)

    def test_wrong_type_in_file(self, tmp_path):
        """Test that a value of the wrong type in a file names its key"""
        path = tmp_path / "run.toml"
        path.write_text('seeds = "abc"\nmemory_size = true\n')
        with pytest.raises(ConfigError, match="'(seeds|memory_size)'"):
            load_config(path)

    def test_partial(self, tmp_path):
        """Test that omitted keys take their defaults"""
        path = tmp_path / "run.toml"
        path.write_text('sampler = "reservoir"\nmemory_size = 50\nseeds = [7]\n')
        config = load_config(path)
        assert config.sampler == "reservoir" and config.memory_size == 50
        assert config.seeds == (7,) and config.num_classes == 10


class TestSyntheticSpec:
    """Tests for the synthetic dataset settings"""

    def test_load(self, tmp_path):
        """Test reading a dataset spec"""
        path = tmp_path / "data.toml"
        path.write_text("num_classes = 3\ndim = 4\nsamples_per_class = 20\n")
        spec = load_synthetic_spec(path)
        assert spec == SyntheticSpec(num_classes=3, dim=4, samples_per_class=20)

    @pytest.mark.parametrize(
        "values", [{"samples_per_class": 1}, {"sigma": -1.0}, {"test_fraction": 1.0}, {"classes": 3}]
    )
    def test_invalid(self, values):
        """Test that invalid settings are rejected"""
        with pytest.raises(ConfigError):
            SyntheticSpec.from_dict(values)
