r"""
Tests for the ``robust-replay`` command.
"""
import pytest

from robust_replay import cli, runner
from robust_replay.data import load_dataset_csv
from robust_replay.exceptions import RunError
from robust_replay.metrics import read_metrics_csv

SMALL_RUN = """
num_classes = 3
dim = 4
samples_per_class = 20
num_tasks = 2
memory_size = 10
batch_size = 8
memory_epochs = 1
hidden = 8
oracle_epochs = 1
seeds = [0, 1]
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(SMALL_RUN)
    return path


class TestMain:
    """Tests for the subcommands and exit codes"""

    def test_run(self, config_file, tmp_path):
        """Test that a run writes its metrics"""
        out = tmp_path / "out"
        assert cli.main(["run", "--config", str(config_file), "--out", str(out)]) == 0
        records = read_metrics_csv(out / "metrics.csv")
        assert len(records) == 4
        assert (out / "config.echo").exists()

    def test_single_seed(self, config_file, tmp_path):
        """Test that --seed restricts the run to one seed"""
        out = tmp_path / "out"
        assert cli.main(["run", "--config", str(config_file), "--seed", "1", "--out", str(out)]) == 0
        assert {r.seed for r in read_metrics_csv(out / "metrics.csv")} == {1}
        assert (out / "memory_task1.json").exists()

    def test_sweep_alpha(self, config_file, tmp_path):
        """Test that an alpha sweep writes the summary table"""
        out = tmp_path / "sweep"
        argv = ["sweep-alpha", "--config", str(config_file), "--alphas", "0.1,adaptive", "--out", str(out)]
        assert cli.main(argv) == 0
        assert len((out / "sweep.csv").read_text().splitlines()) == 3

    def test_sweep_noise(self, config_file, tmp_path):
        """Test that a noise sweep runs every ratio"""
        out = tmp_path / "sweep"
        argv = ["sweep-noise", "--config", str(config_file), "--ratios", "0.0,0.2", "--out", str(out)]
        assert cli.main(argv) == 0
        assert {r.noise_ratio for r in read_metrics_csv(out / "metrics.csv")} == {0.0, 0.2}

    def test_gen_data(self, tmp_path):
        """Test that gen-data writes a train and a test file"""
        spec = tmp_path / "data.toml"
        spec.write_text("num_classes = 2\ndim = 3\nsamples_per_class = 10\n")
        out = tmp_path / "data" / "blobs.csv"
        assert cli.main(["gen-data", "--spec", str(spec), "--out", str(out)]) == 0
        assert len(load_dataset_csv(out)) == 16
        assert len(load_dataset_csv(tmp_path / "data" / "blobs_test.csv")) == 4

    def test_config_error(self, tmp_path, capsys):
        """Test that an invalid configuration exits with code 2"""
        path = tmp_path / "bad.toml"
        path.write_text("noise_ratio = 1.5\n")
        assert cli.main(["run", "--config", str(path)]) == 2
        assert "noise_ratio" in capsys.readouterr().err

    @pytest.mark.parametrize("line", ['seeds = "abc"', "num_tasks = 2.5", "memory_size = true", 'lr = "fast"'])
    def test_wrong_type(self, tmp_path, capsys, line):
        """Test that a value of the wrong type exits with code 2 and names its key"""
        path = tmp_path / "bad.toml"
        path.write_text(line + "\n")
        assert cli.main(["run", "--config", str(path)]) == 2
        assert line.split(" =")[0] in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        """Test that a missing configuration file exits with code 2"""
        assert cli.main(["run", "--config", str(tmp_path / "missing.toml")]) == 2

    def test_bad_ratio(self, config_file):
        """Test that an unparseable ratio exits with code 2"""
        assert cli.main(["sweep-noise", "--config", str(config_file), "--ratios", "a,b"]) == 2

    def test_run_error(self, config_file, tmp_path, monkeypatch):
        """Test that a failed run exits with code 3"""

        def fail(*args, **kwargs):
            raise RunError("non-finite loss", example_id=7)

        monkeypatch.setattr(cli, "run_experiment", fail)
        assert cli.main(["run", "--config", str(config_file), "--out", str(tmp_path)]) == 3

    def test_usage_error(self):
        """Test that a missing subcommand is a usage error"""
        with pytest.raises(SystemExit):
            cli.main([])

    def test_verbosity(self, mocker):
        """Test that -v and -vv select the log level"""
        spy = mocker.patch.object(cli.logging, "basicConfig")
        parser = cli.build_parser()
        cli._configure_logging(parser.parse_args(["-vv", "gen-data", "--spec", "s", "--out", "o"]).verbose)
        assert spy.call_args.kwargs["level"] == cli.logging.DEBUG


@pytest.fixture(autouse=True)
def fresh_oracle_cache(monkeypatch):
    monkeypatch.setattr(runner, "_ORACLE_CACHE", {})
