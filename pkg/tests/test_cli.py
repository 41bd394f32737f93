import json

import pytest

from seivote.cli import main
from seivote.experiments import case_signal
from seivote.signals import write_iq32

TINY_CONFIG = {
    "num_emitters": 2,
    "snr_levels_db": [25.0],
    "runs_per_setup": 1,
    "samples_per_case": 3,
    "subsample_length": 80,
    "signal_length": 20_000,
}


@pytest.fixture()
def tiny_config_path(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY_CONFIG))
    return path


class TestGenerateFeaturize:
    def test_generate(self, tiny_config_path, tmp_path, capsys):
        code = main(
            ["generate", "--config", str(tiny_config_path), "--output-dir", str(tmp_path / "out")]
        )
        assert code == 0
        assert "wrote 2 signals" in capsys.readouterr().out
        assert (tmp_path / "out" / "signals" / "case_0000.iq32").exists()

    def test_featurize(self, tiny_config_path, tmp_path, capsys):
        code = main(
            ["featurize", "--config", str(tiny_config_path), "--output-dir", str(tmp_path / "out")]
        )
        assert code == 0
        assert "train=6" in capsys.readouterr().out


class TestIdentifyCommand:
    def test_identify_conclusive(self, model_path, desk_settings, tmp_path, capsys):
        manifest = desk_settings.manifest()
        case = manifest.cases()[3]
        signal_path = tmp_path / "sig.iq32"
        write_iq32(case_signal(manifest, case), signal_path)
        code = main(
            [
                "identify",
                "--model",
                str(model_path),
                "--signal",
                str(signal_path),
                "--threshold",
                "1e-3",
                "--output-dir",
                str(tmp_path),
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert f"winner: emitter {case.emitter_index}" in out
        assert "conclusive" in out

    def test_identify_inconclusive_exit_code(self, model_path, desk_settings, tmp_path, capsys):
        manifest = desk_settings.manifest()
        signal_path = tmp_path / "sig.iq32"
        write_iq32(case_signal(manifest, manifest.cases()[0]), signal_path)
        config_path = tmp_path / "one_vote.json"
        config_path.write_text(json.dumps({"max_votes": 1, "acceptable_error": 1e-3}))
        code = main(
            [
                "identify",
                "--config",
                str(config_path),
                "--model",
                str(model_path),
                "--signal",
                str(signal_path),
                "--output-dir",
                str(tmp_path),
            ]
        )
        assert code == 5
        assert "inconclusive" in capsys.readouterr().err

    def test_missing_model_exit_code(self, desk_settings, tmp_path, capsys):
        manifest = desk_settings.manifest()
        signal_path = tmp_path / "sig.iq32"
        write_iq32(case_signal(manifest, manifest.cases()[0]), signal_path)
        code = main(
            ["identify", "--model", str(tmp_path / "none.bin"), "--signal", str(signal_path)]
        )
        assert code == 3
        assert "error [io]" in capsys.readouterr().err


class TestConfigErrors:
    def test_missing_config_file(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["generate", "--config", str(tmp_path / "none.json"), "--output-dir", str(tmp_path)])
        assert excinfo.value.code == 3

    def test_invalid_config_value(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"acceptable_error": 0.9}))
        with pytest.raises(SystemExit) as excinfo:
            main(["generate", "--config", str(path), "--output-dir", str(tmp_path)])
        assert excinfo.value.code == 2
        assert "error [config]" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(SystemExit) as excinfo:
            main(["generate", "--config", str(path), "--output-dir", str(tmp_path)])
        assert excinfo.value.code == 2


class TestSweepAndReport:
    def test_sweep_accuracy_and_report(self, tmp_path, capsys):
        config_path = tmp_path / "cfg.json"
        config_path.write_text(
            json.dumps(
                {
                    "sweep": {
                        "thresholds": [0.3, 0.1],
                        "trials_per_threshold": 100,
                        "certainty_threshold_low": 1e-3,
                        "certainty_threshold_high": 1e-1,
                        "certainty_threshold_count": 3,
                        "certainty_repeats": 1,
                    }
                }
            )
        )
        out_dir = tmp_path / "results"
        assert main(["sweep-accuracy", "--config", str(config_path), "--output-dir", str(out_dir)]) == 0
        assert main(["sweep-certainty", "--config", str(config_path), "--output-dir", str(out_dir)]) == 0
        capsys.readouterr()
        assert main(["report", "--results-dir", str(out_dir), "--output-dir", str(out_dir)]) == 0
        out = capsys.readouterr().out
        assert "accuracy sweep" in out
        assert "certainty sweep" in out
        assert "votes per decade" in out

    def test_seed_override_changes_output(self, tmp_path):
        config_path = tmp_path / "cfg.json"
        config_path.write_text(
            json.dumps({"sweep": {"thresholds": [0.1], "trials_per_threshold": 100}})
        )
        main(
            ["sweep-accuracy", "--config", str(config_path), "--output-dir", str(tmp_path / "a"),
             "--seed", "1"]
        )
        main(
            ["sweep-accuracy", "--config", str(config_path), "--output-dir", str(tmp_path / "b"),
             "--seed", "1"]
        )
        main(
            ["sweep-accuracy", "--config", str(config_path), "--output-dir", str(tmp_path / "c"),
             "--seed", "2"]
        )
        a = (tmp_path / "a" / "accuracy_sweep.csv").read_bytes()
        b = (tmp_path / "b" / "accuracy_sweep.csv").read_bytes()
        c = (tmp_path / "c" / "accuracy_sweep.csv").read_bytes()
        assert a == b
        assert a != c
