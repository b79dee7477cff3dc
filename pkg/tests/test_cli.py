import csv
import io
import math
import subprocess
import sys
from importlib import resources

import pytest
import yaml

from balint import (
    Bernoulli,
    BernoulliOutcome,
    Categorical,
    ClampToUnit,
    ConfigError,
    ExactEnumeration,
    Gamma,
    MonteCarlo,
    Normal,
    NormalOutcome,
    UniformContinuous,
    expand_grid,
)
from balint.cli import (
    dgp_config_to_dict,
    grid_config_to_dict,
    load_config,
    main,
    parse_dgp_config,
    parse_grid_config,
)

LOG_BETA0 = -0.7422235688278819

DGP_DOC = """\
link: log
target_mean: 0.5
outcome: {family: normal, sd: 0.1}
covariates:
  - {name: x, dist: categorical, probs: [0.5, 0.35, 0.15], betas: [0.2, -0.2]}
solver: log_closed_form
master_seed: 11
"""

GRID_DOC = """\
name: mini
link: log
outcome: {family: normal, sd: 0.1}
exposure: {name: x, probs: [0.5, 0.35, 0.15], betas: [0.2, -0.2]}
covariate_axis:
  - {name: z, dist: bernoulli, p: 0.8}
  - {name: z, dist: normal, mu: 0.0, sigma: 1.0}
beta2_axis: [1.0]
target_axis: [0.3, 0.5]
n: 100
replicates: 4
master_seed: 5
solver: log_closed_form
"""


@pytest.fixture
def dgp_config(tmp_path):
    path = tmp_path / "dgp.yaml"
    path.write_text(DGP_DOC)
    return str(path)


@pytest.fixture
def grid_config(tmp_path):
    path = tmp_path / "grid.yaml"
    path.write_text(GRID_DOC)
    return str(path)


def solve_row(capsys, argv):
    assert main(argv) == 0
    out = capsys.readouterr().out
    rows = list(csv.reader(io.StringIO(out)))
    return dict(zip(rows[0], rows[1]))


class TestLoadConfig:
    def test_missing_file_is_oserror(self, tmp_path):
        with pytest.raises(OSError):
            load_config(str(tmp_path / "nope.yaml"))

    def test_malformed_yaml_names_path(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("a: [1, 2\n")
        with pytest.raises(ConfigError, match="bad.yaml"):
            load_config(str(path))

    def test_non_mapping_top_level(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_config(str(path))


class TestParseDgpConfig:
    def test_minimal(self):
        parsed = parse_dgp_config(yaml.safe_load(DGP_DOC))
        assert parsed.solver == "log_closed_form"
        assert parsed.engine == ExactEnumeration()
        assert parsed.tol is None
        assert parsed.master_seed == 11
        assert parsed.dgp.link.name == "log"
        assert parsed.dgp.terms[0].spec == Categorical(probs=(0.5, 0.35, 0.15))

    def test_default_names_and_seed(self):
        doc = yaml.safe_load(DGP_DOC)
        del doc["master_seed"]
        doc["covariates"] = [
            {"dist": "normal", "mu": 0.0, "sigma": 1.0, "beta": 1.0},
            {"dist": "bernoulli", "p": 0.5, "beta": 0.3},
        ]
        parsed = parse_dgp_config(doc)
        assert [t.name for t in parsed.dgp.terms] == ["x1", "x2"]
        assert parsed.master_seed == 0

    def test_unknown_key_named(self):
        doc = yaml.safe_load(DGP_DOC)
        doc["solvr"] = "numeric"
        with pytest.raises(ConfigError, match="'solvr'"):
            parse_dgp_config(doc)

    def test_unknown_dist_named(self):
        doc = yaml.safe_load(DGP_DOC)
        doc["covariates"] = [{"dist": "beta", "beta": 1.0}]
        with pytest.raises(ConfigError, match="'beta'"):
            parse_dgp_config(doc)

    def test_bool_is_not_a_number(self):
        doc = yaml.safe_load(DGP_DOC)
        doc["target_mean"] = True
        with pytest.raises(ConfigError, match="target_mean"):
            parse_dgp_config(doc)

    def test_categorical_beta_confusion(self):
        doc = yaml.safe_load(DGP_DOC)
        doc["covariates"][0]["beta"] = 0.2
        with pytest.raises(ConfigError, match="betas"):
            parse_dgp_config(doc)

    def test_continuous_betas_confusion(self):
        doc = yaml.safe_load(DGP_DOC)
        doc["covariates"] = [{"dist": "normal", "mu": 0, "sigma": 1, "betas": [1.0]}]
        with pytest.raises(ConfigError, match="'beta'"):
            parse_dgp_config(doc)

    def test_missing_dist_param(self):
        doc = yaml.safe_load(DGP_DOC)
        doc["covariates"] = [{"dist": "normal", "mu": 0, "beta": 1.0}]
        with pytest.raises(ConfigError, match="'sigma'"):
            parse_dgp_config(doc)

    def test_round_trip(self):
        parsed = parse_dgp_config(yaml.safe_load(DGP_DOC))
        again = parse_dgp_config(dgp_config_to_dict(parsed))
        assert again == parsed


class TestParseGridConfig:
    def test_mini_grid(self):
        cfg = parse_grid_config(yaml.safe_load(GRID_DOC))
        assert cfg.name == "mini"
        assert [spec.kind for _, spec in cfg.z_axis] == ["bernoulli", "normal"]
        assert cfg.workers == 1
        assert len(expand_grid(cfg)) == 4

    def test_round_trip(self):
        cfg = parse_grid_config(yaml.safe_load(GRID_DOC))
        assert parse_grid_config(grid_config_to_dict(cfg)) == cfg

    def test_engine_with_draw_count_round_trips(self):
        doc = yaml.safe_load(GRID_DOC)
        doc["engine"] = "mc"
        doc["n_mc"] = 5000
        doc["solver"] = "numeric"
        cfg = parse_grid_config(doc)
        assert cfg.engine == MonteCarlo(5000)
        assert parse_grid_config(grid_config_to_dict(cfg)) == cfg

    def test_unknown_engine(self):
        doc = yaml.safe_load(GRID_DOC)
        doc["engine"] = "quadrature"
        with pytest.raises(ConfigError, match="engine"):
            parse_grid_config(doc)

    def test_exposure_typo_named(self):
        doc = yaml.safe_load(GRID_DOC)
        doc["exposure"]["prob"] = doc["exposure"].pop("probs")
        with pytest.raises(ConfigError, match="'prob'"):
            parse_grid_config(doc)


class TestBundledConfigs:
    def _load(self, filename):
        path = resources.files("balint") / "configs" / filename
        return yaml.safe_load(path.read_text())

    def test_fig1_shape(self):
        cfg = parse_grid_config(self._load("fig1.yaml"))
        assert cfg.name == "fig1"
        assert cfg.link.name == "log"
        assert cfg.outcome == NormalOutcome(sd=0.1)
        assert cfg.exposure.spec.probs == (0.5, 0.35, 0.15)
        assert cfg.exposure.beta == (0.2, -0.2)
        assert [spec.kind for _, spec in cfg.z_axis] == [
            "bernoulli",
            "uniform",
            "normal",
            "gamma",
        ]
        by_kind = {spec.kind: spec for _, spec in cfg.z_axis}
        assert by_kind["bernoulli"] == Bernoulli(0.8)
        assert by_kind["uniform"] == UniformContinuous(-1.0, 3.0)
        assert by_kind["normal"] == Normal(0.0, 1.0)
        assert by_kind["gamma"] == Gamma(1.0, 1.5)
        assert all(name == "z" for name, _ in cfg.z_axis)
        assert cfg.beta2_axis == (1.0, 1.5, 2.0, 2.5, 3.0)
        assert cfg.target_axis == tuple((i + 1) / 10 for i in range(9))
        assert (cfg.n, cfg.replicates, cfg.master_seed) == (10_000, 500, 20_210_822)
        assert cfg.solver == "log_closed_form"
        assert len(expand_grid(cfg)) == 180

    def test_suppfig1_shape(self):
        cfg = parse_grid_config(self._load("suppfig1.yaml"))
        assert cfg.name == "suppfig1"
        assert cfg.outcome == BernoulliOutcome(clamp=ClampToUnit())
        assert len(expand_grid(cfg)) == 180


class TestSolveCommand:
    def test_closed_form_full_precision(self, capsys, dgp_config):
        row = solve_row(capsys, ["solve", "--config", dgp_config])
        assert set(row) == {"beta0", "method", "residual", "mc_se", "warnings"}
        assert float(row["beta0"]) == pytest.approx(LOG_BETA0, abs=1e-15)
        assert row["method"] == "log_closed_form"
        assert float(row["residual"]) <= 1e-14
        assert row["warnings"] == ""

    def test_seed_changes_monte_carlo_solution(self, capsys, tmp_path):
        path = tmp_path / "mc.yaml"
        path.write_text(
            DGP_DOC.replace("solver: log_closed_form", "solver: numeric")
            + "engine: mc\nn_mc: 5000\n"
        )
        a = solve_row(capsys, ["solve", "--config", str(path)])
        b = solve_row(capsys, ["solve", "--config", str(path), "--seed", "99"])
        c = solve_row(capsys, ["solve", "--config", str(path)])
        assert a["beta0"] == c["beta0"]
        assert a["beta0"] != b["beta0"]
        assert float(a["mc_se"]) > 0.0

    def test_engine_override_rescues_cauchy(self, capsys, tmp_path):
        path = tmp_path / "cauchy.yaml"
        path.write_text(
            "link: log\ntarget_mean: 0.5\n"
            "outcome: {family: normal, sd: 0.1}\n"
            "covariates:\n  - {name: c, dist: cauchy, location: 0.0, scale: 1.0, beta: 0.5}\n"
            "solver: log_closed_form\n"
        )
        assert main(["solve", "--config", str(path)]) == 2
        assert "term 'c'" in capsys.readouterr().err
        row = solve_row(
            capsys, ["solve", "--config", str(path), "--engine", "mc", "--n-mc", "1000"]
        )
        assert "mc_fallback" in row["warnings"]
        assert "undefined_moment" in row["warnings"]

    def test_divergent_gamma_exits_2(self, capsys, tmp_path):
        path = tmp_path / "gamma.yaml"
        path.write_text(
            "link: log\ntarget_mean: 0.5\n"
            "outcome: {family: normal, sd: 0.1}\n"
            "covariates:\n  - {name: g, dist: gamma, shape: 1.0, rate: 1.5, beta: 2.0}\n"
            "solver: log_closed_form\n"
        )
        assert main(["solve", "--config", str(path)]) == 2
        err = capsys.readouterr().err
        assert "term 'g'" in err

    def test_zero_coefficients_numeric(self, capsys, tmp_path):
        path = tmp_path / "flat.yaml"
        path.write_text(
            "link: logit\ntarget_mean: 0.5\n"
            "outcome: {family: bernoulli}\n"
            "covariates: []\n"
            "solver: numeric\n"
        )
        row = solve_row(capsys, ["solve", "--config", str(path)])
        assert abs(float(row["beta0"])) <= 1e-9


class TestVerifyCommand:
    def test_solve_then_verify_round_trip(self, capsys, dgp_config):
        row = solve_row(capsys, ["solve", "--config", dgp_config])
        code = main(["verify", "--config", dgp_config, "--beta0", row["beta0"]])
        out = capsys.readouterr().out
        assert code == 0
        parsed = dict(zip(*csv.reader(io.StringIO(out))))
        assert float(parsed["gap"]) <= 1e-10

    def test_wrong_beta0_exits_3(self, capsys, dgp_config):
        assert main(["verify", "--config", dgp_config, "--beta0", "0.0"]) == 3
        err = capsys.readouterr().err
        assert "verification failed" in err

    def test_loose_tol_accepts_the_gap(self, capsys, dgp_config):
        code = main(["verify", "--config", dgp_config, "--beta0", "0.0", "--tol", "10"])
        assert code == 0

    def test_monte_carlo_verification(self, capsys, dgp_config):
        code = main(
            [
                "verify",
                "--config",
                dgp_config,
                "--beta0",
                repr(LOG_BETA0),
                "--engine",
                "mc",
                "--n-mc",
                "20000",
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        parsed = dict(zip(*csv.reader(io.StringIO(out))))
        se = float(parsed["se"])
        assert se > 0.0
        assert float(parsed["gap"]) <= 4 * se


class TestSimulateCommand:
    def test_writes_grid_and_reports(self, capsys, grid_config, tmp_path):
        out = tmp_path / "rows.csv"
        assert main(["simulate", "--config", grid_config, "--out", str(out)]) == 0
        err = capsys.readouterr().err
        assert "4 cells run, 0 skipped" in err
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 5
        assert lines[0].startswith("scenario_id,")

    def test_reruns_are_byte_identical(self, capsys, grid_config, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", "--config", grid_config, "--out", str(a)])
        main(["simulate", "--config", grid_config, "--out", str(b), "--workers", "2"])
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_replicate_and_seed_overrides_land_in_rows(self, capsys, grid_config, tmp_path):
        out = tmp_path / "o.csv"
        main(
            [
                "simulate",
                "--config",
                grid_config,
                "--out",
                str(out),
                "--replicates",
                "3",
                "--seed",
                "77",
            ]
        )
        capsys.readouterr()
        rows = list(csv.DictReader(out.open()))
        assert {r["replicates"] for r in rows} == {"3"}
        assert {r["master_seed"] for r in rows} == {"77"}


class TestUsageErrors:
    def test_unknown_key_in_config(self, capsys, tmp_path):
        path = tmp_path / "typo.yaml"
        path.write_text(DGP_DOC + "solvr: numeric\n")
        assert main(["solve", "--config", str(path)]) == 1
        assert "'solvr'" in capsys.readouterr().err

    def test_missing_file(self, capsys, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "nope.yaml")]) == 1

    def test_missing_required_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["solve"])
        assert exc.value.code == 1

    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate", "--config", "x.yaml"])
        assert exc.value.code == 1

    def test_no_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_impossible_target_is_infeasibility(self, capsys, tmp_path):
        path = tmp_path / "neg.yaml"
        path.write_text(DGP_DOC.replace("target_mean: 0.5", "target_mean: -0.5"))
        assert main(["solve", "--config", str(path)]) == 2
        assert "target_mean" in capsys.readouterr().err


class TestConsoleScript:
    def test_entry_point_help(self):
        proc = subprocess.run(["balint", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "solve" in proc.stdout and "simulate" in proc.stdout
