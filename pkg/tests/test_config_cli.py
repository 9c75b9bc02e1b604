import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ylab import cli, config

MINIMAL_BALL = (
    'task = "solve"\n'
    'domain = { kind = "ball", n = 3, R = 1.0 }\n'
    'solver = { path = "radial" }\n'
)


class TestParser:
    def test_minimal_ball(self):
        cfg = config.parse_config(MINIMAL_BALL)
        assert cfg.task == "solve"
        assert cfg.domain == {"kind": "ball", "n": 3, "R": 1.0}
        dom = config.domain_from_block(cfg.domain)
        assert dom.dim == 3

    def test_annulus_constraint_diagnostic(self):
        text = ('task = "solve"\n'
                'domain = { kind = "annulus", r0 = 3.0, R = 1.0, n = 3 }\n')
        with pytest.raises(config.ConfigError) as err:
            config.parse_config(text)
        assert "0 < r0 < R" in str(err.value)

    def test_unknown_key_suggestion(self):
        text = ('task = "solve"\n'
                'domain = { kind = "ball", R = 1.0 }\n'
                'solver = { mesh_size = 0.1 }\n')
        with pytest.raises(config.ConfigError) as err:
            config.parse_config(text)
        assert "mesh_size" in str(err.value)
        assert "'h'" in str(err.value)

    def test_unknown_top_key(self):
        with pytest.raises(config.ConfigError) as err:
            config.parse_config('tusk = "solve"\n')
        assert "did you mean 'task'" in str(err.value)

    def test_duplicate_key(self):
        text = 'seed = 1\nseed = 2\n'
        with pytest.raises(config.ConfigError) as err:
            config.parse_config(text)
        assert "duplicate" in str(err.value)

    def test_duplicate_inline_key(self):
        text = 'domain = { kind = "ball", R = 1.0, R = 2.0 }\ntask = "solve"\n'
        with pytest.raises(config.ConfigError):
            config.parse_config(text)

    def test_diagnostics_carry_position(self):
        text = 'task = "solve"\ndomain = { kind = "ball", R = }\n'
        with pytest.raises(config.ConfigError) as err:
            config.parse_config(text)
        assert err.value.diagnostics[0].line == 2

    def test_comments_and_blank_lines(self):
        text = "# header\n\n" + MINIMAL_BALL + "\n# trailing\n"
        assert config.parse_config(text).task == "solve"

    def test_lists_and_nested(self):
        text = ('task = "scan-annulus"\n'
                'scan = { r0 = [0.4, 0.2], R = [4.0] }\n')
        cfg = config.parse_config(text)
        assert cfg.scan == {"r0": [0.4, 0.2], "R": [4.0]}

    def test_roundtrip_identity(self):
        cfg = config.parse_config(MINIMAL_BALL)
        text = config.serialize_config(cfg)
        cfg2 = config.parse_config(text)
        assert config.serialize_config(cfg2) == text
        assert cfg2.domain == cfg.domain
        assert cfg2.solver == cfg.solver

    def test_missing_domain_for_solve(self):
        with pytest.raises(config.ConfigError) as err:
            config.parse_config('task = "solve"\n')
        assert "domain" in str(err.value)

    def test_holes_block(self):
        text = ('task = "solve"\n'
                'domain = { kind = "ball_minus_balls", n = 3, R = 3.0, '
                'holes = [[1.0, 0.0, 0.0, 0.2]] }\n'
                'solver = { path = "grid", h = 0.25 }\n')
        dom = config.domain_from_block(config.parse_config(text).domain)
        assert len(dom.shape.holes) == 1
        assert dom.shape.holes[0].radius == 0.2


class TestCli:
    def test_solve_radial_ball(self, tmp_path):
        rc = cli.main(["solve", "--domain", "ball", "--R", "1", "--n", "3",
                       "--path", "radial", "--out", str(tmp_path)])
        assert rc == 0
        rows = (tmp_path / "solution.csv").read_text().splitlines()
        first = rows[1].split(",")
        assert float(first[0]) == 0.0
        assert float(first[1]) == 0.5     # v(0) = 0.5
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["v_origin"] == 0.5

    def test_byte_identical_reruns(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            rc = cli.main(["scan-annulus", "--r0", "0.4,0.2", "--R", "3",
                           "--n", "3", "--out", str(out)])
            assert rc == 0
        assert (out1 / "scan.csv").read_bytes() == (out2 / "scan.csv").read_bytes()
        assert (out1 / "scan.json").read_bytes() == (out2 / "scan.json").read_bytes()

    def test_verify_convex_exit_code(self, tmp_path):
        rc = cli.main(["verify-convex", "--domain", "ball", "--R", "1",
                       "--n", "3", "--h", "0.125", "--out", str(tmp_path)])
        assert rc == 0
        data = json.loads((tmp_path / "verify.json").read_text())
        assert data["passed"] is True

    def test_verify_convex_rejects_annulus(self, tmp_path, capsys):
        rc = cli.main(["verify-convex", "--domain", "annulus", "--r0", "0.5",
                       "--R", "2", "--n", "3", "--h", "0.25",
                       "--out", str(tmp_path)])
        assert rc == 1
        assert "convex" in capsys.readouterr().err

    def test_solve_grid_writes_field(self, tmp_path):
        rc = cli.main(["solve", "--domain", "ball", "--R", "1", "--n", "3",
                       "--path", "grid", "--h", "0.125", "--out", str(tmp_path)])
        assert rc == 0
        head = (tmp_path / "field.txt").read_text().splitlines()[0].split()
        assert head[0] == "3"
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["final_residual"] <= 1e-10

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text('task = "solve"\n'
                       'domain = { kind = "ball", n = 3, R = 2.0 }\n'
                       'solver = { path = "radial" }\n')
        out = tmp_path / "out"
        rc = cli.main(["solve", "--config", str(cfg), "--R", "1",
                       "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["R"] == 1.0        # flag wins over config

    def test_parse_error_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("tusk = 1\n")
        rc = cli.main(["solve", "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 1
        assert "config error" in capsys.readouterr().err

    def test_cap_check_cli(self, tmp_path):
        rc = cli.main(["cap-check", "--i", "2", "--n", "3", "--h", "0.125",
                       "--out", str(tmp_path)])
        assert rc == 0
        data = json.loads((tmp_path / "cap.json").read_text())
        assert data["passed"] is True

    def test_selftest(self):
        assert cli.main(["selftest"]) == 0

    def test_curvature_per_node(self, tmp_path):
        rc = cli.main(["curvature", "--domain", "ball", "--R", "1", "--n", "3",
                       "--h", "0.125", "--per-node", "--out", str(tmp_path)])
        assert rc == 0
        data = json.loads((tmp_path / "curvature.json").read_text())
        assert data["max_ricci"] == pytest.approx(-2.0, abs=1e-8)
        lines = (tmp_path / "nodes.csv").read_text().splitlines()
        assert lines[0].startswith("idx,v,min_sectional")
        assert len(lines) == data["num_nodes"] + 1 if "num_nodes" in data \
            else len(lines) > 10

    def test_entry_point_installed(self):
        out = subprocess.run([sys.executable, "-m", "ylab.cli", "--version"],
                             capture_output=True, text=True)
        assert out.returncode == 0
