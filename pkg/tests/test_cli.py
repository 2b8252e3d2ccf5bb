"""End-to-end checks of the experiment driver, all in process.

Every invocation goes through main(argv) with a tmp_path output directory;
reruns into the same directory must be byte-identical, which is what makes
the CSV outputs diffable across machines.
"""

import os
import warnings

import numpy as np
import pytest

from tfch.cli import main


def _run(argv):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return main(argv)


def _read(path):
    with open(path) as f:
        return f.read()


class TestParsing:
    def test_no_subcommand_is_a_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_flag_is_a_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["rho-star", "--bogus", "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_empty_list_value_is_a_usage_error(self, tmp_path):
        # a bare "--alphas ''" must not silently write a header-only table
        with pytest.raises(SystemExit) as exc:
            main(["rho-star", "--alphas", "", "--out", str(tmp_path)])
        assert exc.value.code == 2


class TestRhoStar:
    def test_threshold_table(self, tmp_path):
        rc = _run(["rho-star", "--alphas", "0.5,1.0", "--out", str(tmp_path)])
        assert rc == 0
        lines = _read(tmp_path / "rho_star.csv").strip().split("\n")
        assert lines[0] == "alpha,rho_star"
        assert len(lines) == 3
        a1, r1 = lines[2].split(",")
        assert float(a1) == 1.0
        assert float(r1) == pytest.approx(4.864536512317584, rel=1e-12)

    def test_fixed_point_and_q3_grid(self, tmp_path, capsys):
        rc = _run(["rho-star", "--alphas", "0.4,0.8", "--q3",
                   "--q3-rhos", "2.0,3.0,4.0", "--fixed-point",
                   "--out", str(tmp_path)])
        assert rc == 0
        q3_lines = _read(tmp_path / "q3_curves.csv").strip().split("\n")
        assert q3_lines[0] == "rho,alpha,q3"
        assert len(q3_lines) == 1 + 3 * 2
        fp = _read(tmp_path / "fixed_point.csv").strip().split("\n")
        assert fp[0] == "rho_bar,alpha_bar"
        rho, alpha = (float(v) for v in fp[1].split(","))
        assert rho == pytest.approx(4.7476114, abs=1e-6)
        assert alpha == pytest.approx(0.82265, abs=1e-4)
        assert "fixed point" in capsys.readouterr().out

    def test_alpha_out_of_range_exits_2(self, tmp_path):
        assert _run(["rho-star", "--alphas", "1.5",
                     "--out", str(tmp_path)]) == 2


class TestMesh:
    def test_table_and_meta(self, tmp_path):
        rc = _run(["mesh", "--N", "6", "--out", str(tmp_path)])
        assert rc == 0
        lines = _read(tmp_path / "mesh.csv").strip().split("\n")
        assert lines[0] == "k,t_k,tau_k,rho_k"
        assert len(lines) == 8
        meta = _read(tmp_path / "run_meta.txt")
        assert meta.startswith("command: mesh\n")
        assert "N: 6\n" in meta and "T: 1.0\n" in meta
        assert "outputs: mesh.csv" in meta
        assert "out:" not in meta and "config:" not in meta

    def test_rerun_is_byte_identical(self, tmp_path):
        argv = ["mesh", "--N", "8", "--alpha", "0.5", "--out", str(tmp_path)]
        assert _run(argv) == 0
        first = {n: _read(tmp_path / n) for n in ("mesh.csv", "run_meta.txt")}
        assert _run(argv) == 0
        for name, content in first.items():
            assert _read(tmp_path / name) == content

    def test_mesh_file_roundtrip_is_byte_identical(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert _run(["mesh", "--N", "9", "--out", str(a)]) == 0
        assert _run(["mesh", "--mesh", str(a / "mesh.csv"),
                     "--out", str(b)]) == 0
        assert _read(a / "mesh.csv") == _read(b / "mesh.csv")

    def test_step_file_with_ratio_report(self, tmp_path):
        steps = tmp_path / "steps.txt"
        steps.write_text("0.5\n0.1\n")
        rc = _run(["mesh", "--mesh", str(steps), "--alpha", "0.5",
                   "--out", str(tmp_path)])
        assert rc == 0
        meta = _read(tmp_path / "run_meta.txt")
        assert "note: ratio bound fails at 1 steps (first k=2)" in meta

    def test_kernel_row_needs_alpha(self, tmp_path):
        rc = _run(["mesh", "--N", "6", "--kernel-level", "3",
                   "--out", str(tmp_path)])
        assert rc == 2

    def test_kernel_row_output(self, tmp_path):
        rc = _run(["mesh", "--N", "6", "--alpha", "0.5", "--kernel-level",
                   "4", "--out", str(tmp_path)])
        assert rc == 0
        lines = _read(tmp_path / "kernel_row.csv").strip().split("\n")
        assert lines[0] == "k,c,d,B,c_tilde,J"
        assert len(lines) == 5

    def test_graded_without_N_exits_2(self, tmp_path):
        assert _run(["mesh", "--out", str(tmp_path)]) == 2

    def test_missing_mesh_file_exits_2(self, tmp_path):
        assert _run(["mesh", "--mesh", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path)]) == 2

    def test_garbage_mesh_file_exits_1(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("k,t_k,tau_k,rho_k\n0,zero,,\n1,one,1,\n")
        assert _run(["mesh", "--mesh", str(bad), "--out", str(tmp_path)]) == 1


class TestCaputoConvergence:
    def test_small_table(self, tmp_path, capsys):
        rc = _run(["caputo-convergence", "--alphas", "0.5", "--Ns", "8,16",
                   "--out", str(tmp_path)])
        assert rc == 0
        lines = _read(tmp_path / "caputo_convergence.csv").strip().split("\n")
        assert lines[0] == "alpha,N,error,order"
        assert len(lines) == 3
        r8 = lines[1].split(",")
        r16 = lines[2].split(",")
        assert r8[3] == "" and float(r16[3]) > 1.5
        assert float(r16[2]) < float(r8[2])
        assert "alpha" in capsys.readouterr().out


class TestTfchRun:
    def test_requires_alpha(self, tmp_path):
        assert _run(["tfch-run", "--out", str(tmp_path)]) == 2

    def test_outputs_and_notes(self, tmp_path, capsys):
        rc = _run(["tfch-run", "--alpha", "0.5", "--N", "12", "--M", "8",
                   "--out", str(tmp_path)])
        assert rc == 0
        for name in ("energy.csv", "mass.csv", "validators.csv",
                     "terminal_state.csv", "run_meta.txt"):
            assert (tmp_path / name).exists()
        v_lines = _read(tmp_path / "validators.csv").strip().split("\n")
        assert v_lines[0] == "kind,violations,first_level"
        kinds = [l.split(",")[0] for l in v_lines[1:]]
        assert kinds == ["energy", "first_step", "lipschitz", "solvability"]
        meta = _read(tmp_path / "run_meta.txt")
        assert "note: max mass drift" in meta
        assert "note: iterations total=" in meta
        assert "max mass drift" in capsys.readouterr().out
        t_lines = _read(tmp_path / "terminal_state.csv").strip().split("\n")
        assert t_lines[0] == "x,u"
        assert len(t_lines) == 10

    def test_dump_states(self, tmp_path):
        rc = _run(["tfch-run", "--alpha", "0.5", "--N", "12", "--M", "8",
                   "--dump-states", "5", "--out", str(tmp_path)])
        assert rc == 0
        names = sorted(p.name for p in tmp_path.glob("state_*.csv"))
        assert names == ["state_0000.csv", "state_0005.csv",
                         "state_0010.csv"]

    def test_invalid_spatial_resolution_exits_1(self, tmp_path):
        assert _run(["tfch-run", "--alpha", "0.5", "--M", "3", "--N", "8",
                     "--out", str(tmp_path)]) == 1


class TestTfchConvergence:
    def test_reference_must_be_finer(self, tmp_path):
        assert _run(["tfch-convergence", "--alphas", "0.5", "--Ns", "6,8",
                     "--N0", "8", "--M", "8", "--out", str(tmp_path)]) == 2

    def test_workers_do_not_change_the_bytes(self, tmp_path):
        base = ["tfch-convergence", "--alphas", "0.3,0.5", "--Ns", "6,8",
                "--N0", "12", "--M", "8"]
        d1 = tmp_path / "serial"
        d2 = tmp_path / "threads"
        assert _run(base + ["--out", str(d1)]) == 0
        assert _run(base + ["--workers", "2", "--out", str(d2)]) == 0
        assert _read(d1 / "tfch_convergence.csv") \
            == _read(d2 / "tfch_convergence.csv")
        lines = _read(d1 / "tfch_convergence.csv").strip().split("\n")
        assert lines[0] == "alpha,N,error,order"
        assert len(lines) == 5


class TestManufactured:
    def test_tiny_sweep(self, tmp_path):
        rc = _run(["manufactured", "--alphas", "0.5", "--Ns", "12",
                   "--M", "8", "--out", str(tmp_path)])
        assert rc == 0
        detail = _read(tmp_path / "manufactured_N12.csv").strip().split("\n")
        assert detail[0] == "alpha,x,exact,numeric,abs_error"
        assert len(detail) == 10
        mid = detail[5].split(",")
        assert float(mid[1]) == 0.5
        # 0.5^8 * 1.0^(3+alpha): exact dyadic value survives the format
        assert mid[2] == "0.00390625"
        summary = _read(tmp_path / "summary_N12.csv").strip().split("\n")
        assert summary[0] == "alpha,max_error"
        alpha, max_err = summary[1].split(",")
        assert float(alpha) == 0.5
        errs = np.array([float(l.split(",")[4]) for l in detail[1:]])
        assert float(max_err) == pytest.approx(errs.max(), rel=1e-15)


class TestVerifySubcommand:
    def test_battery_passes(self, tmp_path, capsys):
        rc = _run(["verify", "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "checks passed" in out
        assert "FAIL" not in out
        meta = _read(tmp_path / "run_meta.txt")
        assert meta.count("note: ") >= 10
        assert "PASS" in meta


class TestConfigFiles:
    def test_defaults_apply_and_flags_override(self, tmp_path):
        cfg = tmp_path / "run.conf"
        cfg.write_text("alpha = 0.5\nN = 10\nM = 8\n# comment\n\n"
                       "max-iterations = 400\n")
        out = tmp_path / "out"
        rc = _run(["tfch-run", "--config", str(cfg), "--M", "10",
                   "--out", str(out)])
        assert rc == 0
        meta = _read(out / "run_meta.txt")
        assert "alpha: 0.5\n" in meta
        assert "N: 10\n" in meta
        assert "M: 10\n" in meta
        assert "max_iterations: 400\n" in meta

    def test_unknown_key_is_a_usage_error(self, tmp_path):
        cfg = tmp_path / "run.conf"
        cfg.write_text("bogus = 3\n")
        with pytest.raises(SystemExit) as exc:
            main(["tfch-run", "--config", str(cfg), "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_malformed_line_is_a_usage_error(self, tmp_path):
        cfg = tmp_path / "run.conf"
        cfg.write_text("alpha 0.5\n")
        assert _run(["tfch-run", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 2

    def test_missing_config_file_is_a_usage_error(self, tmp_path):
        assert _run(["tfch-run", "--config", str(tmp_path / "absent.conf"),
                     "--out", str(tmp_path)]) == 2

    def test_bad_config_value_is_a_usage_error(self, tmp_path, capsys):
        cfg = tmp_path / "run.conf"
        cfg.write_text("M = abc\n")
        assert _run(["tfch-run", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "config key 'M'" in err
