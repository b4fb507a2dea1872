"""End-to-end command-line pipeline on a synthetic plant."""

import json

import numpy as np
import pytest

from daepca.cli import main

CONFIG = """\
[run]
method = daepca2
components = 4
alpha = 0.99
trials = 1
seed = 0

[network]
d = 8
iter_max = 800

[synth]
latent_dim = 3
observed_dim = 12
n_train = 2400
n_val = 600
n_test = 400
noise_std = 0.2
ar_coeff = 0.6
seed = 7

[fault.1]
kind = step
magnitude = 0.0
onset = 100
sensors = 0

[fault.2]
kind = step
magnitude = 1.6
onset = 100
sensors = 0, 3
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    config = root / "run.ini"
    config.write_text(CONFIG)
    assert main(["synth", "--config", str(config),
                 "--out-dir", str(root / "data")]) == 0
    assert main(["train", "--config", str(config), "--data", str(root / "data"),
                 "--out-dir", str(root / "model")]) == 0
    return root, config


class TestPipeline:
    def test_synth_artifacts(self, workdir):
        root, _ = workdir
        data = root / "data"
        assert (data / "train.csv").is_file()
        assert (data / "val.csv").is_file()
        assert (data / "test_01.csv").is_file()
        assert (data / "test_02.csv").is_file()
        meta = json.loads((data / "meta.json").read_text())
        assert len(meta["variable_names"]) == 12
        assert meta["tests"][0]["onset"] == 100

    def test_train_artifacts(self, workdir):
        root, _ = workdir
        model_dir = root / "model"
        assert (model_dir / "model.bin").is_file()
        sidecar = json.loads((model_dir / "model.bin.json").read_text())
        assert sidecar["kind"] == "daepca"
        meta = json.loads((model_dir / "train_meta.json").read_text())
        assert meta["method"] == "daepca2"
        assert meta["components"] == 4

    def test_retraining_is_byte_identical(self, workdir):
        root, config = workdir
        assert main(["train", "--config", str(config),
                     "--data", str(root / "data"),
                     "--out-dir", str(root / "model2")]) == 0
        a = (root / "model" / "model.bin").read_bytes()
        b = (root / "model2" / "model.bin").read_bytes()
        assert a == b

    def test_detect_fault_free_stays_quiet(self, workdir, capsys):
        root, _ = workdir
        assert main(["detect", "--model", str(root / "model" / "model.bin"),
                     "--input", str(root / "data" / "test_01.csv"),
                     "--out-dir", str(root / "null")]) == 0
        out = capsys.readouterr().out
        frac = float(out.split("alarm fraction")[1].split()[0])
        assert frac <= 0.03

    def test_detect_fault_fires(self, workdir):
        root, _ = workdir
        assert main(["detect", "--model", str(root / "model" / "model.bin"),
                     "--input", str(root / "data" / "test_02.csv"),
                     "--out-dir", str(root / "hit"), "--onset", "100"]) == 0
        series = (root / "hit" / "series.csv").read_text().splitlines()
        assert series[0] == "index,t2,spe,bic,alarm"
        alarms = np.array([int(line.rsplit(",", 1)[1]) for line in series[1:]])
        assert len(alarms) == 400
        assert alarms[100:].mean() > 0.9
        svg = (root / "hit" / "trace.svg").read_text()
        assert "<svg" in svg

    def test_eval_reports(self, workdir, capsys):
        root, config = workdir
        assert main(["eval", "--config", str(config),
                     "--data", str(root / "data"),
                     "--out-dir", str(root / "eval")]) == 0
        out = capsys.readouterr().out
        assert "fault 1" in out and "fault 2" in out
        fdr_lines = (root / "eval" / "fdr.csv").read_text().splitlines()
        assert len(fdr_lines) == 3
        # fault 2 is the real step: FS detection in the last pair
        fs_mean = float(fdr_lines[2].split(",")[6])
        assert fs_mean > 90.0
        meta = json.loads((root / "eval" / "eval_meta.json").read_text())
        assert meta["method"] == "daepca2"
        assert meta["exclusions"] == []
        assert (root / "eval" / "delay.csv").is_file()
        assert (root / "eval" / "far.csv").is_file()


BENCH_CONFIG = """\
[run]
method = daepca2
components = 2
seed = 0

[network]
d = 4
iter_max = 60

[kernel]
kind = rbf
width = 16.0

[bench]
methods = pca kpca daepca2
repeats = 2

[synth]
latent_dim = 2
observed_dim = 8
n_train = 400
n_val = 100
n_test = 80
noise_std = 0.2
ar_coeff = 0.6
seed = 1

[fault.1]
kind = step
magnitude = 1.0
onset = 20
sensors = 1
"""


class TestBench:
    def test_bench_writes_timings(self, tmp_path, capsys):
        config = tmp_path / "bench.ini"
        config.write_text(BENCH_CONFIG)
        assert main(["synth", "--config", str(config),
                     "--out-dir", str(tmp_path / "data")]) == 0
        assert main(["bench", "--config", str(config),
                     "--data", str(tmp_path / "data"),
                     "--out-dir", str(tmp_path / "bench")]) == 0
        lines = (tmp_path / "bench" / "timing.csv").read_text().splitlines()
        assert lines[0] == "method,seconds,n_samples,n_train,repeats"
        methods = [line.split(",")[0] for line in lines[1:]]
        assert methods == ["pca", "kpca", "daepca2"]
        kpca_row = lines[2].split(",")
        assert kpca_row[3] == "400"  # stored training size drives its cost


class TestExitCodes:
    def test_missing_config_file(self, tmp_path):
        assert main(["synth", "--config", str(tmp_path / "none.ini"),
                     "--out-dir", str(tmp_path / "out")]) == 2

    def test_unknown_config_key(self, tmp_path):
        config = tmp_path / "bad.ini"
        config.write_text("[synth]\nobserved_dims = 5\n")
        assert main(["synth", "--config", str(config),
                     "--out-dir", str(tmp_path / "out")]) == 2

    def test_unknown_section(self, tmp_path):
        config = tmp_path / "bad.ini"
        config.write_text("[synthesis]\nn_train = 10\n")
        assert main(["synth", "--config", str(config),
                     "--out-dir", str(tmp_path / "out")]) == 2

    def test_bad_method_name(self, tmp_path):
        config = tmp_path / "bad.ini"
        config.write_text(CONFIG.replace("method = daepca2", "method = isomap"))
        assert main(["synth", "--config", str(config),
                     "--out-dir", str(tmp_path / "data")]) == 0
        assert main(["train", "--config", str(config),
                     "--data", str(tmp_path / "data"),
                     "--out-dir", str(tmp_path / "model")]) == 2

    def test_missing_model_file(self, tmp_path):
        csv = tmp_path / "x.csv"
        csv.write_text("a\n1.0\n")
        assert main(["detect", "--model", str(tmp_path / "no_model.bin"),
                     "--input", str(csv),
                     "--out-dir", str(tmp_path / "out")]) == 1

    def test_missing_data_dir(self, tmp_path):
        config = tmp_path / "run.ini"
        config.write_text(CONFIG)
        assert main(["train", "--config", str(config),
                     "--data", str(tmp_path / "absent"),
                     "--out-dir", str(tmp_path / "model")]) == 1
