import json

import pytest

from app.cli import EXIT_ERROR, EXIT_FAILED, EXIT_OK, build_parser, config_from_args, main
from app.errors import ConfigError
from app.models import load_config


def _config(argv):
    return load_config(config_from_args(build_parser().parse_args(argv)))


class TestArgumentMapping:
    def test_estimate(self):
        config = _config(["estimate", "--seed", "5", "--snr-grid", "1,4", "--l", "1,2", "--trials", "100"])
        assert config.experiment == "pilot-estimation"
        assert config.snr_grid == [1.0, 4.0]
        assert config.l_grid == [1, 2]
        assert config.master_seed == 5 and config.trials == 100

    def test_spread(self):
        config = _config(["spread", "--seed", "1", "--snr-grid", "2", "--n", "4", "--l", "2", "--k", "1,3"])
        assert config.experiment == "spreading"
        assert (config.plan.n, config.plan.l, config.plan.g) == (4, 2, 3)
        assert config.k_grid == [1, 3]

    def test_detect_switches_on_measurement(self):
        single = _config(["detect", "--seed", "1", "--snr-grid", "2", "--measurement", "hom-p"])
        collective = _config(["detect", "--seed", "1", "--snr-grid", "2", "--d", "3", "--codewords", "4"])
        assert single.experiment == "single-detection" and single.measurement == "hom-p"
        assert collective.experiment == "collective-detection"
        assert (collective.codebook.d, collective.codebook.n_codewords) == (3, 4)

    def test_multiuser(self):
        config = _config(["multiuser", "--seed", "1", "--snr-grid", "2", "--rk", "2,2,4"])
        assert config.allocation.dims == [2, 2, 4]

    def test_bounded_model(self):
        config = _config(["detect", "--seed", "1", "--snr-grid", "2", "--model", "bounded:0.1,0.5", "--measurement", "het"])
        assert config.channel.kind == "bounded"
        assert config.channel.magnitudes == [0.1, 0.5]

    def test_snr_grid_must_be_numeric(self):
        with pytest.raises(ConfigError):
            build_parser().parse_args(["estimate", "--seed", "1", "--snr-grid", "a,b"])


class TestExitCodes:
    def test_fig3_to_file(self, tmp_path):
        out = tmp_path / "fig3.csv"
        code = main(["fig3", "--seed", "0", "--snr-grid", "1,4", "--l", "1,2", "--out", str(out)])
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0].startswith("experiment,snr,snr_convention")
        # per SNR: two l rows, two k rows and the limit row
        assert len(lines) == 1 + 2 * 5

    def test_json_to_stdout(self, capsys):
        code = main(["estimate", "--seed", "11", "--snr-grid", "2", "--trials", "20000", "--format", "json"])
        assert code in (EXIT_OK, EXIT_FAILED)
        document = json.loads(capsys.readouterr().out)
        assert document["snr_convention"] == "snr_hat"
        assert [row["analytic_ref"] for row in document["rows"]] == ["eq57", "eq63"]
        assert code == (EXIT_OK if document["passed"] else EXIT_FAILED)

    @pytest.mark.parametrize(
        "argv",
        [
            ["estimate", "--seed", "1", "--snr-grid", "2", "--model", "weibull:1"],
            ["estimate", "--seed", "1", "--snr-grid", "2", "--model", "bounded:0.1"],
            ["spread", "--seed", "1", "--snr-grid", "2", "--n", "4", "--l", "2", "--g", "2"],
            ["detect", "--seed", "1", "--snr-grid", "2", "--measurement", "hom-z"],
            ["multiuser", "--seed", "1", "--snr-grid", "-1", "--rk", "2"],
        ],
    )
    def test_configuration_errors(self, argv, capsys):
        assert main(argv) == EXIT_ERROR
        assert "error:" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "argv",
        [
            ["estimate", "--seed", "1", "--snr-grid", "a,b"],
            ["estimate", "--snr-grid", "1"],
            ["spread", "--seed", "1", "--snr-grid", "2", "--l", "2"],
            ["detect", "--seed", "x", "--snr-grid", "2"],
            ["simulate", "--seed", "1"],
        ],
    )
    def test_usage_errors_exit_as_configuration_errors(self, argv, capsys):
        assert main(argv) == EXIT_ERROR
        err = capsys.readouterr().err
        assert "error: argv:" in err

    def test_help_still_exits_cleanly(self):
        with pytest.raises(SystemExit) as exc:
            main(["estimate", "--help"])
        assert exc.value.code == 0

    def test_failed_comparison_exit_code(self, monkeypatch):
        from app import cli
        from app.models import ErrorRateReport, ErrorRateRow

        failing = ErrorRateReport(
            config={},
            snr_convention="snr",
            rows=[
                ErrorRateRow(
                    experiment="spreading", snr=1.0, snr_convention="snr", trials=10, seed=0,
                    empirical_p=0.9, analytic_p=0.1, analytic_ref="eq87", z_score=10.0,
                )
            ],
        )
        monkeypatch.setattr(cli, "run", lambda config: failing)
        assert main(["spread", "--seed", "1", "--snr-grid", "2", "--n", "3", "--l", "2", "--trials", "10"]) == EXIT_FAILED
