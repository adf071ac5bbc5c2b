import csv
import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from phasecrystal import cli
from phasecrystal.cli import main, parse_config, parse_config_text, preset_names, verify_manifest
from phasecrystal.errors import ParseError, ValidationError
from phasecrystal.interaction import uc_ue_contact


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


class TestParse:
    def test_minimal_lattice(self):
        cmd, p = parse_config_text('{"cmd":"lattice","q0":4,"K":0.1}')
        assert cmd == "lattice"
        assert p["lam"] == 1.0 and p["q0"] == 4 and p["K"] == 0.1

    def test_bands_not_coprime(self):
        with pytest.raises(ValidationError, match="lowest terms"):
            parse_config_text('{"cmd":"bands","p":2,"q":4}')

    def test_fig5_config(self):
        cmd, p = parse_config_text('{"cmd":"dissipate","K":0.1,"kappa":1e-4,"kicks":3000}')
        assert cmd == "dissipate"
        assert (p["K"], p["kappa"], p["kicks"], p["n0"], p["lam"]) == (0.1, 1e-4, 3000, 0.0, 1.0)

    def test_unknown_key(self):
        with pytest.raises(ValidationError, match="unknwon|unknown"):
            parse_config_text('{"cmd":"lattice","K":0.1,"kapa":1}')

    def test_parse_error_location(self):
        with pytest.raises(ParseError, match=r"cfg:2:\d+"):
            parse_config_text('{"cmd": "lattice",\n "K": }', source="cfg")

    def test_type_errors(self):
        with pytest.raises(ValidationError):
            parse_config_text('{"cmd":"lattice","K":"big"}')
        with pytest.raises(ValidationError):
            parse_config_text('{"cmd":"lattice","K":0.1,"q0":2}')
        with pytest.raises(ValidationError):
            parse_config_text('{"cmd":"bands","p":1,"q":3,"n_kx":true}')

    def test_subcommand_mismatch(self):
        with pytest.raises(ValidationError):
            parse_config_text('{"cmd":"lattice","K":0.1}', cmd="bands")

    def test_cmd_from_subcommand(self):
        cmd, _ = parse_config_text('{"K":0.1}', cmd="lattice")
        assert cmd == "lattice"

    def test_potential_block(self):
        _, p = parse_config_text('{"cmd":"nbody","K":-0.0063662,"potential":{"kind":"contact","eps":0.194}}')
        assert p["potential"]["sigma"] == 0.1 and p["potential"]["n"] == 20
        with pytest.raises(ValidationError):
            parse_config_text('{"cmd":"nbody","K":-0.01,"potential":{"kind":"contact","sgima":0.1}}')
        with pytest.raises(ValidationError):
            parse_config_text('{"cmd":"nbody","K":-0.01,"q0":6,"potential":{"kind":"none"}}')

    @pytest.mark.parametrize("name", preset_names())
    def test_presets_parse(self, name, tmp_path):
        cfg = parse_config("preset:" + name, out=str(tmp_path / "o"))
        assert cfg.cmd in cli.SUBCOMMANDS

    def test_preset_coverage(self):
        figs = {n.split("_")[0].rstrip("abcd") for n in preset_names() if n.startswith("fig")}
        assert figs == {f"fig{i}" for i in range(2, 9)}

    def test_missing_preset(self):
        with pytest.raises(ParseError):
            parse_config("preset:nope")


class TestRun:
    def run(self, tmp_path, obj, cmd, *extra):
        out = tmp_path / "out"
        code = main([cmd, "--config", write(tmp_path, obj), "--out", str(out), *extra])
        return code, out

    def test_lattice_outputs(self, tmp_path):
        code, out = self.run(tmp_path, {"cmd": "lattice", "q0": 4, "K": 0.1, "resolution": 21}, "lattice")
        assert code == 0
        man = json.loads((out / "manifest.json").read_text())
        assert man["config"]["K"] == 0.1 and man["config"]["lam"] == 1.0
        assert {f["file"] for f in man["outputs"]} == {"lattice.csv", "lattice.json"}
        assert verify_manifest(out)

    def test_manifest_detects_tamper(self, tmp_path):
        code, out = self.run(tmp_path, {"cmd": "lattice", "q0": 4, "K": 0.1, "resolution": 11}, "lattice")
        assert code == 0
        with open(out / "lattice.csv", "a") as fh:
            fh.write("0,0,0\n")
        assert not verify_manifest(out)

    def test_butterfly_mirror(self, tmp_path):
        code, out = self.run(tmp_path, {"cmd": "butterfly", "q_max": 8, "K": 1.0}, "butterfly")
        assert code == 0
        head, data = read_csv(out / "butterfly.csv")
        assert head == ["p", "q", "lambda_over_2pi", "band_index", "E_min", "E_max"]
        table = {(int(r[0]), int(r[1]), int(r[3])): (r[4], r[5]) for r in data}
        for (p, q, b), v in table.items():
            if p < q:
                np.testing.assert_allclose(v, table[(q - p, q, b)], atol=1e-10)
        # every interval set is symmetric about E = 0
        for (p, q) in {(k[0], k[1]) for k in table}:
            lo = np.array([table[(p, q, b)][0] for b in range(1, q + 1)])
            hi = np.array([table[(p, q, b)][1] for b in range(1, q + 1)])
            np.testing.assert_allclose(lo, -hi[::-1], atol=1e-9)

    def test_potential_contact(self, tmp_path):
        code, out = self.run(tmp_path, {"cmd": "potential", "kind": "contact", "eps": 1.0, "lam": 1.0,
                                        "R_max": 10.0, "n_R": 41}, "potential")
        assert code == 0
        head, data = read_csv(out / "potential_coherent.csv")
        assert head == ["R", "U_c", "U_e"]
        ref = uc_ue_contact(1.0, 1.0, data[:, 0])[0]
        np.testing.assert_allclose(data[:, 1], ref, rtol=1e-11)
        np.testing.assert_array_equal(data[:, 1], data[:, 2])
        head, lev = read_csv(out / "potential_levels.csv")
        assert head == ["N", "R_N", "U_N"] and lev[0, 1] == pytest.approx(math.sqrt(2), rel=1e-11)

    def test_crystal(self, tmp_path):
        code, out = self.run(tmp_path, {"cmd": "crystal", "K": -0.02 / math.pi,
                                        "potential": {"kind": "contact", "eps": 0.194}}, "crystal")
        assert code == 0
        rep = json.loads((out / "crystal.json").read_text())
        assert rep["survived"] is True and rep["n_atoms"] == 7

    def test_chern(self, tmp_path):
        code, out = self.run(tmp_path, {"cmd": "chern", "p": 1, "q": 3, "K": 1.0}, "chern")
        assert code == 0
        assert json.loads((out / "chern.json").read_text())["band_chern"] == [1, -2, 1]

    def test_dissipate_small(self, tmp_path):
        code, out = self.run(tmp_path, {"cmd": "dissipate", "K": 0.1, "kappa": 1e-3, "kicks": 4, "L": 12.8,
                                        "N": 64, "snapshots": [0, 2], "save_char": True}, "dissipate")
        assert code == 0
        head, e = read_csv(out / "energy.csv")
        assert head == ["kick", "Eq5_energy", "number_energy"]
        assert e.shape == (5, 3) and e[0, 2] == pytest.approx(0.0, abs=1e-12)
        assert {"Q_kick0.csv", "Q_kick2.csv", "Q_kick4.csv", "char_kick2.csv"} <= {p.name for p in out.iterdir()}
        head, _ = read_csv(out / "char_kick2.csv")
        assert head == ["s", "k", "Re(w)", "Im(w)"]

    def test_deterministic_bytes(self, tmp_path):
        cfg = {"cmd": "nbody", "K": -0.02 / math.pi, "periods": 5, "methods": ["rwa", "linear"],
               "potential": {"kind": "contact", "eps": 0.194}}
        a = tmp_path / "a"
        b = tmp_path / "b"
        path = write(tmp_path, cfg)
        assert main(["nbody", "--config", path, "--out", str(a)]) == 0
        assert main(["nbody", "--config", path, "--out", str(b)]) == 0
        for name in ("rwa.csv", "linear.csv", "summary.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_twelve_digits(self, tmp_path):
        code, out = self.run(tmp_path, {"cmd": "bands", "p": 1, "q": 3, "K": 1.0, "n_kx": 3, "n_kp": 3}, "bands")
        assert code == 0
        _, data = read_csv(out / "bands.csv")
        text = (out / "bands.csv").read_text().splitlines()[1:]
        for line in text:
            mant = line.split(",")[-1].lstrip("-").split("e")[0].replace(".", "").lstrip("0")
            assert len(mant) <= 12

    def test_non_empty_out_needs_overwrite(self, tmp_path):
        cfg = {"cmd": "lattice", "K": 0.1, "resolution": 11}
        code, out = self.run(tmp_path, cfg, "lattice")
        assert code == 0
        code, _ = self.run(tmp_path, cfg, "lattice")
        assert code == 2
        code, _ = self.run(tmp_path, cfg, "lattice", "--overwrite")
        assert code == 0

    def test_config_errors_exit_2(self, tmp_path, capsys):
        assert self.run(tmp_path, {"cmd": "bands", "p": 2, "q": 4}, "bands")[0] == 2
        assert "ValidationError" in capsys.readouterr().err
        assert self.run(tmp_path, '{"cmd": "lattice", "K": ', "lattice")[0] == 2
        assert "ParseError" in capsys.readouterr().err
        assert main(["lattice", "--config", str(tmp_path / "missing.json")]) == 2
        assert main(["frobnicate"]) == 2
        assert main([]) == 2

    def test_numeric_failure_cleans_up(self, tmp_path, capsys):
        cfg = {"cmd": "nbody", "K": -0.02 / math.pi, "periods": 2, "methods": ["poincare", "rwa"],
               "initial": [[0.0, 0.0], [0.0, 0.0]], "potential": {"kind": "contact", "eps": 0.194}}
        code, out = self.run(tmp_path, cfg, "nbody")
        assert code == 3
        assert "CollisionSingularity" in capsys.readouterr().err
        assert not out.exists()

    def test_failure_keeps_existing_directory(self, tmp_path, monkeypatch):
        out = tmp_path / "keep"
        out.mkdir()
        (out / "other.txt").write_text("x")

        def boom(p, o):
            o.csv("partial.csv", ("a",), [(1,)])
            raise FloatingPointError("overflow")

        monkeypatch.setitem(cli.RUNNERS, "lattice", boom)
        code = main(["lattice", "--config", write(tmp_path, {"cmd": "lattice", "K": 0.1}),
                     "--out", str(out), "--overwrite"])
        assert code == 3
        assert sorted(p.name for p in out.iterdir()) == ["other.txt"]

    def test_threads(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PHASECRYSTAL_THREADS", "1")
        code, out = self.run(tmp_path, {"cmd": "lattice", "K": 0.1, "resolution": 11}, "lattice")
        assert code == 0
        assert json.loads((out / "manifest.json").read_text())["threads"] == 1
        monkeypatch.setenv("PHASECRYSTAL_THREADS", "zero")
        assert main(["lattice", "--config", write(tmp_path, {"K": 0.1}), "--out", str(tmp_path / "t")]) == 2
        assert main(["lattice", "--config", write(tmp_path, {"K": 0.1}), "--out", str(tmp_path / "t"),
                     "--threads", "1"]) == 0

    def test_preset_run(self, tmp_path):
        assert main(["potential", "--config", "preset:potentials_hardcore", "--out", str(tmp_path / "h")]) == 0
        assert verify_manifest(tmp_path / "h")

    def test_list_presets(self, capsys):
        assert main(["--list-presets"]) == 0
        assert "fig8_crystal_contact" in capsys.readouterr().out


def test_console_script_and_numpy_backend(tmp_path):
    env = dict(os.environ, PHASECRYSTAL_NUMBA="0")
    cfg = write(tmp_path, {"cmd": "lattice", "K": 0.1, "resolution": 11})
    res = subprocess.run([sys.executable, "-m", "phasecrystal.cli", "lattice", "--config", cfg,
                          "--out", str(tmp_path / "np")], env=env, capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    man = json.loads((tmp_path / "np" / "manifest.json").read_text())
    assert man["backend"] == "numpy"
