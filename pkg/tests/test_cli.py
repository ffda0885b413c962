import csv
import json

import pytest

from rpnc.cli import EXIT_ASSERT, EXIT_CONFIG, EXIT_OK, main


def _read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestCli:
    def test_framesync_asserts_clean(self, tmp_path, capsys):
        out = tmp_path / "fs"
        assert main(["framesync-bench", "--out", str(out), "--assert"]) == EXIT_OK
        assert {p.name for p in out.iterdir()} >= {"framesync_summary.csv", "checks.csv", "manifest.json"}
        assert all(r["passed"] == "True" for r in _read(out / "checks.csv"))
        assert "PASS" in capsys.readouterr().out

    def test_manifest_reproduces(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(["stability", "--slots", "400", "--out", str(first)]) == EXIT_OK
        manifest = json.loads((first / "manifest.json").read_text())
        assert manifest["experiment"] == "stability" and manifest["config"]["run"]["slots"] == 400
        assert main(["stability", "--config", str(first / "manifest.json"), "--out", str(second)]) == EXIT_OK
        assert (first / "stability.csv").read_bytes() == (second / "stability.csv").read_bytes()

    def test_failed_threshold_exit_code(self, tmp_path):
        args = ["sync-accuracy", "--slots", "200", "--out", str(tmp_path / "s")]
        assert main(args + ["--assert"]) == EXIT_ASSERT
        assert main(args) == EXIT_OK

    @pytest.mark.parametrize("text", ["protocol:\n  window: 0\n", "protocol: [1, 2\n", "nonsense: 1\n"])
    def test_bad_config(self, tmp_path, text, capsys):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text(text)
        assert main(["framesync-bench", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["rtt", "--config", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            main(["fly"])

    def test_plot(self, tmp_path):
        pytest.importorskip("matplotlib")
        out = tmp_path / "fs"
        assert main(["framesync-bench", "--out", str(out), "--plot"]) == EXIT_OK
        assert list(out.glob("*.png"))
