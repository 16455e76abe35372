import csv
import json

import pytest
import yaml

from lightning_init.cli import run
from lightning_init.config import PRESETS, ExperimentConfig, load_config, preset
from lightning_init.exceptions import ConfigurationError, SchemaVersionError
from lightning_init.persistence import read_table

from fixtures import write_mnist_cache


@pytest.fixture(scope="module")
def cache(tmp_path_factory):
    return write_mnist_cache(tmp_path_factory.mktemp("cache"), n_train=200, n_test=50)


def tiny(cache, kind="train", **extra):
    cfg = {
        "kind": kind,
        "seed": 0,
        "architecture": {"layer_sizes": [784, 16, 10]},
        "initializers": [{"kind": "glorot_uniform"}],
        "training": {"learning_rate": 0.1, "batch_size": 20, "epochs": 1},
        "data": {"cache_dir": str(cache), "offline": True},
    }
    cfg.update(extra)
    return cfg


def write_config(path, cfg):
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return str(path)


def rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_presets_load(self):
        for name in PRESETS:
            assert preset(name).kind in ("train", "prune-reinit", "path-curve",
                                         "param-study", "cdf")

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError):
            preset("nope")

    def test_roundtrip(self):
        cfg = preset("mnist-init-comparison")
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(write_config(tmp_path / "c.yaml", {"kind": "train", "bogus": 1}))

    def test_single_initializer_key(self, tmp_path):
        cfg = load_config(write_config(tmp_path / "c.yaml", {
            "initializer": {"kind": "lightning", "n_lightnings": 5, "strength": 0.5}}))
        assert cfg.initializers[0].lightning.n_lightnings == 5


class TestTrain:
    def test_repeats_give_rows(self, cache, tmp_path):
        out = tmp_path / "run"
        cfg = write_config(tmp_path / "c.yaml", tiny(cache))
        assert run(["train", "--config", cfg, "--repeats", "2", "--out", str(out)]) == 0
        table = rows(out / "metrics.csv")
        assert [r["seed"] for r in table] == ["0", "1"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seeds"] == [0, 1]
        assert manifest["schemas"]["metrics.csv"] == 1
        assert (out / "weights" / "glorot_uniform_r1.npz").exists()

    def test_rerun_from_manifest_is_identical(self, cache, tmp_path):
        cfg = write_config(tmp_path / "c.yaml", tiny(cache, hooks={"path_k": [50]}))
        first, second = tmp_path / "a", tmp_path / "b"
        assert run(["train", "--config", cfg, "--out", str(first)]) == 0
        manifest = str(first / "manifest.json")
        assert run(["train", "--config", manifest, "--out", str(second)]) == 0
        assert (first / "metrics.csv").read_bytes() == (second / "metrics.csv").read_bytes()

    def test_threads_match_serial(self, cache, tmp_path):
        cfg = write_config(tmp_path / "c.yaml", tiny(cache, repeats=2))
        assert run(["train", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
        assert run(["train", "--config", cfg, "--threads", "2", "--out", str(tmp_path / "p")]) == 0
        assert (tmp_path / "s" / "metrics.csv").read_bytes() == \
            (tmp_path / "p" / "metrics.csv").read_bytes()

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_exit_code(self, cache, tmp_path, capsys):
        cfg = tiny(cache)
        cfg["initializers"] = [{"kind": "lightning", "n_lightnings": 500, "strength": 1e200}]
        path = write_config(tmp_path / "c.yaml", cfg)
        assert run(["train", "--config", path, "--out", str(tmp_path / "r")]) == 3
        assert "error" in capsys.readouterr().err

    def test_missing_data_offline(self, tmp_path):
        cfg = write_config(tmp_path / "c.yaml", tiny(tmp_path / "empty"))
        assert run(["train", "--config", cfg, "--out", str(tmp_path / "r")]) == 2

    def test_bad_usage(self, tmp_path):
        assert run(["train", "--config", str(tmp_path / "missing.yaml")]) == 2
        assert run(["frobnicate"]) == 2
        assert run(["train", "--preset", "mnist-path-curve"]) == 2


class TestOtherCommands:
    def test_path_curve(self, tmp_path):
        cfg = {"kind": "path-curve", "architecture": {"layer_sizes": [12, 8, 3]},
               "initializers": [{"kind": "glorot_uniform"}, {"kind": "he_normal"}],
               "path_curve": {"grid": [1, 20, 120], "trials": 3}}
        out = tmp_path / "pc"
        assert run(["path-curve", "--config", write_config(tmp_path / "c.yaml", cfg),
                    "--out", str(out)]) == 0
        table = read_table(out, "path_curve.csv")
        assert len(table) == 6
        assert table[-1]["mean_fraction"] == "1.0"
        assert run(["plot", str(out)]) == 0
        assert (out / "plot" / "path_he_normal.dat").read_text().startswith("# k ")

    def test_path_curve_grid_out_of_range(self, tmp_path):
        cfg = {"kind": "path-curve", "architecture": {"layer_sizes": [12, 8, 3]},
               "path_curve": {"grid": [200], "trials": 1}}
        assert run(["path-curve", "--config", write_config(tmp_path / "c.yaml", cfg),
                    "--out", str(tmp_path / "pc")]) == 2

    def test_prune_reinit(self, cache, tmp_path):
        cfg = tiny(cache, kind="prune-reinit",
                   prune_reinit={"active_fractions": [0.3, 1.0], "magnitude": 0.1,
                                 "child_epochs": 1})
        out = tmp_path / "pr"
        assert run(["prune-reinit", "--config", write_config(tmp_path / "c.yaml", cfg),
                    "--out", str(out)]) == 0
        table = rows(out / "prune_reinit.csv")
        assert [r["stage"] for r in table] == ["reinit", "retrained"] * 2
        assert all(float(r["change_overall"]) == 0.0 for r in table if r["stage"] == "reinit")
        assert "change_hidden_0" in table[0]
        assert run(["plot", str(out)]) == 0

    def test_param_study(self, cache, tmp_path):
        cfg = tiny(cache, kind="param-study",
                   param_study={"n_lightnings": [20], "strengths": [0.5]})
        out = tmp_path / "ps"
        assert run(["param-study", "--config", write_config(tmp_path / "c.yaml", cfg),
                    "--out", str(out)]) == 0
        (row,) = rows(out / "param_study.csv")
        assert row["n_lightnings"] == "20" and row["strength"] == "0.5"
        assert float(row["wrong_answer_plot"]) <= 0.10
        assert run(["plot", str(out)]) == 0
        assert (out / "plot" / "param_study.dat").exists()

    def test_cdf_from_weights(self, cache, tmp_path):
        train_out = tmp_path / "t"
        assert run(["train", "--config", write_config(tmp_path / "c.yaml", tiny(cache)),
                    "--out", str(train_out)]) == 0
        cdf_cfg = write_config(tmp_path / "d.yaml", tiny(cache, kind="cdf"))
        out = tmp_path / "cdf"
        weights = str(train_out / "weights" / "glorot_uniform_r0.npz")
        assert run(["cdf", "--config", cdf_cfg, "--weights", weights, "--out", str(out)]) == 0
        table = rows(out / "cdf.csv")
        assert len(table) == 784 * 16 + 16 * 10
        assert {r["layer"] for r in table} == {"hidden 0", "output"}
        assert run(["plot", str(out)]) == 0

    def test_cdf_missing_weights(self, cache, tmp_path):
        cdf_cfg = write_config(tmp_path / "d.yaml", tiny(cache, kind="cdf"))
        assert run(["cdf", "--config", cdf_cfg, "--weights", str(tmp_path / "no.npz"),
                    "--out", str(tmp_path / "o")]) == 2


class TestPlot:
    def test_empty_dir(self, tmp_path):
        assert run(["plot", str(tmp_path)]) == 2

    def test_schema_mismatch(self, cache, tmp_path):
        out = tmp_path / "run"
        assert run(["train", "--config", write_config(tmp_path / "c.yaml", tiny(cache)),
                    "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        manifest["schemas"]["metrics.csv"] = 99
        (out / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(SchemaVersionError):
            read_table(out, "metrics.csv")
        assert run(["plot", str(out)]) == 2

    def test_train_plot(self, cache, tmp_path):
        out = tmp_path / "run"
        assert run(["train", "--config", write_config(tmp_path / "c.yaml", tiny(cache)),
                    "--out", str(out)]) == 0
        assert run(["plot", str(out)]) == 0
        plot_manifest = json.loads((out / "plot" / "manifest.json").read_text())
        assert plot_manifest["series"][0]["file"] == "error_glorot_uniform.dat"
