"""CLI behavior: subcommands, config merge, exit codes, outputs."""

import json

from pulselab.cli import main


def run(args):
    return main(args)


class TestCatalogValidate:
    def test_shipped_catalog_ok(self, capsys):
        assert run(["catalog-validate"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_corrupt_catalog_fails(self, tmp_path, capsys):
        bad = [{
            "name": "RECT", "order": 0,
            "segments": [{"start": "0", "end": "1", "amplitude_taup": "1.5"}],
        }]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        assert run(["catalog-validate", "--catalog", str(path)]) == 3


class TestScaling:
    def test_small_run_writes_outputs(self, tmp_path, capsys):
        out = tmp_path / "res"
        code = run([
            "scaling", "--model", "exponential", "--gamma", "0.01",
            "--pulses", "rect,corpse", "--inv-v-min", "1e-3",
            "--inv-v-max", "3e-2", "--points", "4", "--realizations", "800",
            "--steps", "64", "--seed", "5", "--out", str(out),
        ])
        assert code == 0
        assert (out / "scaling.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert set(summary["fits"]) == {"RECT", "CORPSE"}
        assert abs(summary["fits"]["RECT"]["slope"] - 1.0) < 0.15

    def test_unknown_pulse_is_config_error(self, tmp_path):
        code = run(["scaling", "--model", "gaussian", "--gamma", "0.1",
                    "--pulses", "nosuch", "--out", str(tmp_path)])
        assert code == 2

    def test_missing_model_is_config_error(self, tmp_path):
        assert run(["scaling", "--pulses", "rect", "--out", str(tmp_path)]) == 2

    def test_config_file_with_flag_override(self, tmp_path):
        conf = {
            "model": "exponential", "gamma": 0.01,
            "pulses": "rect", "inv_v": "1e-3,3e-3,1e-2,3e-2",
            "realizations": 500, "steps": 48, "seed": 9,
        }
        cpath = tmp_path / "run.json"
        cpath.write_text(json.dumps(conf))
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        assert run(["--config", str(cpath), "scaling", "--out", str(out1)]) == 0
        # same config reloaded gives byte-identical csv
        assert run(["--config", str(cpath), "scaling", "--out", str(out2)]) == 0
        assert (out1 / "scaling.csv").read_bytes() == (out2 / "scaling.csv").read_bytes()
        # a flag overrides the config value
        out3 = tmp_path / "c"
        assert run(["--config", str(cpath), "scaling", "--seed", "10",
                    "--out", str(out3)]) == 0
        assert (out1 / "scaling.csv").read_bytes() != (out3 / "scaling.csv").read_bytes()

    def test_env_seed_default(self, tmp_path, monkeypatch):
        args = ["scaling", "--model", "exponential", "--gamma", "0.01",
                "--pulses", "rect", "--inv-v", "1e-3,3e-3,1e-2",
                "--realizations", "400", "--steps", "48"]
        monkeypatch.setenv("PULSELAB_SEED", "77")
        out1 = tmp_path / "env"
        assert run(args + ["--out", str(out1)]) == 0
        monkeypatch.delenv("PULSELAB_SEED")
        out2 = tmp_path / "flag"
        assert run(args + ["--seed", "77", "--out", str(out2)]) == 0
        assert (out1 / "scaling.csv").read_bytes() == (out2 / "scaling.csv").read_bytes()


class TestOtherSubcommands:
    def test_prefactor(self, tmp_path, capsys):
        code = run(["prefactor", "--model", "exponential", "--gamma", "0.01",
                    "--pulse", "corpse", "--inv-v", "1e-2",
                    "--realizations", "2000", "--steps", "128",
                    "--seed", "3", "--out", str(tmp_path)])
        assert code == 0
        text = (tmp_path / "prefactor_corpse.csv").read_text()
        assert text.startswith("inv_v,measured_df2")

    def test_nogo(self, tmp_path):
        code = run(["nogo", "--pulse", "scorpse", "--grid", "256",
                    "--model", "exponential", "--gamma", "0.01",
                    "--out", str(tmp_path)])
        assert code == 0
        payload = json.loads((tmp_path / "nogo_scorpse.json").read_text())
        assert payload["i32_kernel"] > 0
        assert payload["identity_residual"] > 0

    def test_nogo_zeroth_order_is_numerical_error(self, tmp_path):
        code = run(["nogo", "--pulse", "rect", "--grid", "64",
                    "--out", str(tmp_path)])
        assert code == 3

    def test_design(self, tmp_path):
        code = run(["design", "--model", "exponential", "--gamma", "0.01",
                    "--segments", "3", "--restarts", "1", "--budget", "400",
                    "--seed", "1", "--out", str(tmp_path)])
        assert code == 0
        recs = json.loads((tmp_path / "designed_pulse.json").read_text())
        assert len(recs) == 1 and len(recs[0]["segments"]) == 3

    def test_noise_validate(self, tmp_path):
        code = run(["noise-validate", "--model", "gaussian", "--gamma", "0.5",
                    "--steps", "8", "--realizations", "20000",
                    "--seed", "2", "--out", str(tmp_path)])
        assert code == 0
        payload = json.loads((tmp_path / "noise_validate.json").read_text())
        assert payload["max_cov_sigma"] < 5.0

    def test_usage_error_exit_code(self):
        assert run(["frobnicate"]) == 1
        assert run([]) == 1
