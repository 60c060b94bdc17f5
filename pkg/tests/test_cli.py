"""Command-line front end: config resolution, artifacts, exit codes."""

import json
import math

import pytest

from ostlab.cli import main


def run(capsys, *args):
    """Invoke the CLI in-process; returns (exit_code, stdout, stderr)."""
    code = main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def read_csv(path):
    """Split a provenance CSV into (config dict, header list, row lists)."""
    config = {}
    header = None
    rows = []
    for line in path.read_text().splitlines():
        if line.startswith("# "):
            name, _, value = line[2:].partition(" = ")
            config[name] = value
        elif header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    return config, header, rows


class TestConfigResolution:
    def test_missing_config_file_exits_1_with_path(self, capsys, tmp_path):
        missing = tmp_path / "absent.cfg"
        code, _, err = run(capsys, "simulate", "--config", str(missing))
        assert code == 1
        assert str(missing) in err

    def test_unknown_key_reports_file_and_line(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("grid.modes = 8\nbogus.key = 3\n")
        code, _, err = run(capsys, "simulate", "--config", str(cfg))
        assert code == 1
        assert f"{cfg}:2" in err and "bogus.key" in err

    def test_malformed_line_reports_file_and_line(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# fine comment\ngrid.modes 8\n")
        code, _, err = run(capsys, "simulate", "--config", str(cfg))
        assert code == 1
        assert f"{cfg}:2" in err

    def test_bad_value_names_key_and_line(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("grid.modes = eight\n")
        code, _, err = run(capsys, "simulate", "--config", str(cfg))
        assert code == 1
        assert f"{cfg}:1" in err and "grid.modes" in err

    def test_key_from_another_subcommand_is_rejected(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("picard.iters = 5\n")  # valid for picard, not simulate
        code, _, err = run(capsys, "simulate", "--config", str(cfg))
        assert code == 1
        assert "picard.iters" in err

    def test_flags_override_file_overrides_defaults(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"resonance.n_max = 4\noutput.dir = {tmp_path}\n")
        code, _, _ = run(capsys, "resonance-scan", "--config", str(cfg), "--nmax", "6")
        assert code == 0
        config, _, _ = read_csv(tmp_path / "resonance_scan.csv")
        assert config["resonance.n_max"] == "6"  # flag wins
        assert config["output.dir"] == str(tmp_path)  # file wins over default

    def test_comments_and_blank_lines_ignored(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("\n# full-line comment\nresonance.n_max = 5  # trailing\n\n")
        code, _, _ = run(capsys, "resonance-scan", "--config", str(cfg), "--out", str(tmp_path))
        assert code == 0
        config, _, _ = read_csv(tmp_path / "resonance_scan.csv")
        assert config["resonance.n_max"] == "5"

    def test_no_subcommand_exits_1(self, capsys):
        code, _, err = run(capsys)
        assert code == 1
        assert "subcommand" in err

    def test_unknown_subcommand_exits_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_unknown_flag_exits_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["resonance-scan", "--frobnicate", "3"])
        assert exc.value.code == 1

    def test_help_documents_keys_and_defaults(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["gibbs-sample", "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert "gibbs.cutoff_r" in out and "default" in out

    def test_bad_flag_value_exits_1(self, capsys):
        code, _, err = run(capsys, "resonance-scan", "--nmax", "many")
        assert code == 1
        assert "nmax" in err


class TestResonanceScanCommand:
    def test_min_ratio_row_at_least_one(self, capsys, tmp_path):
        code, _, _ = run(capsys, "resonance-scan", "--nmax", "8", "--out", str(tmp_path))
        assert code == 0
        _, header, rows = read_csv(tmp_path / "resonance_scan.csv")
        assert header == ["kind", "n", "n1", "R", "ratio"]
        by_kind = {r[0]: r for r in rows}
        assert float(by_kind["admissible-min"][4]) >= 1.0

    def test_histogram_file_written(self, capsys, tmp_path):
        run(capsys, "resonance-scan", "--nmax", "6", "--out", str(tmp_path))
        _, header, rows = read_csv(tmp_path / "resonance_hist.csv")
        assert header == ["ratio_lo", "ratio_hi", "count"]
        assert sum(int(r[2]) for r in rows) > 0

    def test_reruns_byte_identical_and_meta_isolates_timestamp(self, capsys, tmp_path):
        args = ("resonance-scan", "--nmax", "5", "--out", str(tmp_path))
        run(capsys, *args)
        first = (tmp_path / "resonance_scan.csv").read_bytes()
        meta1 = json.loads((tmp_path / "resonance-scan.meta.json").read_text())
        run(capsys, *args)
        second = (tmp_path / "resonance_scan.csv").read_bytes()
        meta2 = json.loads((tmp_path / "resonance-scan.meta.json").read_text())
        assert first == second
        meta1.pop("timestamp")
        meta2.pop("timestamp")
        assert meta1 == meta2


class TestSimulateCommand:
    def test_outputs_embed_config_and_version(self, capsys, tmp_path):
        code, _, _ = run(
            capsys,
            "simulate", "--modes", "6", "--t", "0.2", "--dt", "0.002",
            "--record-every", "20", "--out", str(tmp_path),
        )
        assert code == 0
        config, header, rows = read_csv(tmp_path / "simulate.csv")
        assert config["version"] == "0.1.0"
        assert config["command"] == "simulate"
        assert config["grid.modes"] == "6"
        assert config["flow.dt"] == "0.002"
        assert header == ["t", "l2", "hamiltonian"]
        l2 = [float(r[1]) for r in rows]
        assert max(abs(v - l2[0]) for v in l2) / l2[0] < 1e-8

    def test_final_state_has_one_row_per_mode(self, capsys, tmp_path):
        run(
            capsys,
            "simulate", "--modes", "6", "--t", "0.05", "--dt", "0.005",
            "--out", str(tmp_path),
        )
        _, header, rows = read_csv(tmp_path / "final_state.csv")
        assert header == ["k", "re", "im"]
        assert [int(r[0]) for r in rows] == list(range(1, 7))

    def test_cosine_initial_state(self, capsys, tmp_path):
        code, _, _ = run(
            capsys,
            "simulate", "--init", "cosine", "--norm", "0.5", "--modes", "8",
            "--t", "0.05", "--dt", "0.005", "--out", str(tmp_path),
        )
        assert code == 0
        _, _, rows = read_csv(tmp_path / "simulate.csv")
        # |u0| = norm/sqrt(2) * sqrt(A) for a pure cosine of amplitude norm
        assert float(rows[0][1]) == pytest.approx(0.5 * math.sqrt(math.pi), rel=1e-12)

    def test_blow_up_exits_2(self, capsys, tmp_path):
        code, _, err = run(
            capsys,
            "simulate", "--modes", "8", "--norm", "1e9", "--t", "1.0",
            "--dt", "0.05", "--out", str(tmp_path),
        )
        assert code == 2
        assert "numerical failure" in err

    def test_domain_violation_exits_1(self, capsys, tmp_path):
        code, _, err = run(capsys, "simulate", "--modes", "-3", "--out", str(tmp_path))
        assert code == 1
        assert "modes" in err


class TestGibbsSampleCommand:
    def test_summary_variances_near_ladder(self, capsys, tmp_path):
        code, _, _ = run(
            capsys,
            "gibbs-sample", "--modes", "4", "--count", "4000", "--out", str(tmp_path),
        )
        assert code == 0
        _, header, rows = read_csv(tmp_path / "gibbs_summary.csv")
        assert header == ["coordinate", "v", "variance", "variance_times_v"]
        assert len(rows) == 8
        for r in rows:
            assert abs(float(r[3]) - 1.0) < 0.2

    def test_ensemble_directory_written(self, capsys, tmp_path):
        run(capsys, "gibbs-sample", "--modes", "3", "--count", "10", "--out", str(tmp_path))
        manifest = json.loads((tmp_path / "ensemble" / "manifest.json").read_text())
        assert manifest["count"] == 10

    def test_pcn_sampler_reports_acceptance(self, capsys, tmp_path):
        code, _, _ = run(
            capsys,
            "gibbs-sample", "--modes", "3", "--count", "200", "--sampler", "pcn-mcmc",
            "--beta", "0.4", "--burn-in", "50", "--out", str(tmp_path),
        )
        assert code == 0
        meta = json.loads((tmp_path / "gibbs-sample.meta.json").read_text())
        assert 0.0 < meta["summary"]["acceptance_rate"] <= 1.0


class TestVerifyInvarianceCommand:
    def test_t_zero_control_all_z_exactly_zero(self, capsys, tmp_path):
        code, out, _ = run(
            capsys,
            "verify-invariance", "--modes", "4", "--count", "2000",
            "--t-values", "0.0", "--out", str(tmp_path),
        )
        assert code == 0
        doc = json.loads((tmp_path / "invariance.json").read_text())
        results = doc["reports"][0]["results"]
        assert len(results) == 7  # default observable set
        assert all(r["z"] == 0.0 for r in results)
        assert all(r["pass"] for r in results)
        assert "PASS" in out

    def test_results_independent_of_thread_count(self, capsys, tmp_path):
        base = (
            "verify-invariance", "--modes", "4", "--count", "1500",
            "--t-values", "0.2,0.4", "--dt", "0.01", "--out", str(tmp_path),
        )
        run(capsys, *base, "--threads", "1")
        one = json.loads((tmp_path / "invariance.json").read_text())["reports"]
        run(capsys, *base, "--threads", "3")
        three = json.loads((tmp_path / "invariance.json").read_text())["reports"]
        assert one == three

    def test_custom_observable_tokens(self, capsys, tmp_path):
        code, _, _ = run(
            capsys,
            "verify-invariance", "--modes", "4", "--count", "1000",
            "--t-values", "0.0", "--observables", "mode_power(2),l2_squared",
            "--out", str(tmp_path),
        )
        assert code == 0
        doc = json.loads((tmp_path / "invariance.json").read_text())
        names = [r["name"] for r in doc["reports"][0]["results"]]
        assert names == ["mode_power(2)", "l2_squared"]

    def test_unknown_observable_exits_1(self, capsys, tmp_path):
        code, _, err = run(
            capsys,
            "verify-invariance", "--modes", "4", "--observables", "entropy",
            "--out", str(tmp_path),
        )
        assert code == 1
        assert "entropy" in err

    def test_mode_power_beyond_grid_exits_1(self, capsys, tmp_path):
        code, _, err = run(
            capsys,
            "verify-invariance", "--modes", "4", "--observables", "mode_power(9)",
            "--out", str(tmp_path),
        )
        assert code == 1
        assert "mode_power(9)" in err

    def test_degenerate_weights_exit_2(self, capsys, tmp_path):
        code, _, err = run(
            capsys,
            "verify-invariance", "--modes", "4", "--count", "300",
            "--cutoff", "0.001", "--t-values", "0.1", "--out", str(tmp_path),
        )
        assert code == 2
        assert "numerical failure" in err


class TestAnalysisCommands:
    def test_picard_artifacts(self, capsys, tmp_path):
        code, out, _ = run(
            capsys,
            "picard", "--modes", "8", "--norm", "0.1", "--t", "0.05",
            "--iters", "5", "--ref-dt", "0.001", "--out", str(tmp_path),
        )
        assert code == 0
        _, header, rows = read_csv(tmp_path / "picard.csv")
        assert header == ["iteration", "distance"]
        assert len(rows) == 5
        meta = json.loads((tmp_path / "picard.meta.json").read_text())
        assert meta["summary"]["diverged"] is False
        assert meta["summary"]["endpoint_error"] < 1e-6
        assert "contracting" in out

    def test_convergence_m_decreasing(self, capsys, tmp_path):
        code, _, _ = run(
            capsys,
            "convergence-m", "--m", "4,8", "--t", "0.1", "--dt", "0.002",
            "--record-every", "10", "--out", str(tmp_path),
        )
        assert code == 0
        _, _, rows = read_csv(tmp_path / "convergence_m.csv")
        errors = [float(r[1]) for r in rows]
        assert errors[1] < errors[0]
        meta = json.loads((tmp_path / "convergence-m.meta.json").read_text())
        assert meta["summary"]["strictly_decreasing"] is True

    def test_convergence_m_requires_increasing_list(self, capsys, tmp_path):
        code, _, err = run(
            capsys, "convergence-m", "--m", "8,4", "--out", str(tmp_path)
        )
        assert code == 1
        assert "increasing" in err

    def test_kernel_scan_single_constant(self, capsys, tmp_path):
        code, out, _ = run(
            capsys,
            "kernel-scan", "--alpha", "0,1,-10", "--sum-tau", "0,5",
            "--sum-n", "1,2", "--k-range", "2000", "--out", str(tmp_path),
        )
        assert code == 0
        meta = json.loads((tmp_path / "kernel-scan.meta.json").read_text())
        assert meta["summary"]["single_constant"] <= 10.0
        _, header, rows = read_csv(tmp_path / "kernel_integrals.csv")
        assert header == ["form", "alpha", "integral", "bound", "ratio"]
        assert len(rows) == 9  # 3 forms x 3 alphas
        assert "constant" in out

    def test_bilinear_sweep_rows(self, capsys, tmp_path):
        code, _, _ = run(
            capsys,
            "bilinear-sweep", "--s", "0,-0.5", "--nmax", "4,8", "--trials", "1",
            "--out", str(tmp_path),
        )
        assert code == 0
        _, header, rows = read_csv(tmp_path / "bilinear_sweep.csv")
        assert header == ["s", "n_max", "max_ratio", "candidate", "recommendation_met"]
        assert len(rows) == 4
        assert all(float(r[2]) > 0.0 for r in rows)
        # sorted by (s, n_max)
        keys = [(float(r[0]), int(r[1])) for r in rows]
        assert keys == sorted(keys)

    def test_recurrence_artifacts(self, capsys, tmp_path):
        code, _, _ = run(
            capsys,
            "recurrence", "--modes", "4", "--count", "10", "--dt", "0.01",
            "--record-every", "10", "--horizon", "3", "--radius", "0.6",
            "--out", str(tmp_path),
        )
        assert code == 0
        _, header, rows = read_csv(tmp_path / "recurrence.csv")
        assert header == ["sample", "return_time"]
        assert len(rows) == 10
        meta = json.loads((tmp_path / "recurrence.meta.json").read_text())
        assert 0.0 <= meta["summary"]["returned_fraction"] <= 1.0


class TestOutputDirectory:
    def test_env_var_default(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("OSTLAB_OUTDIR", str(tmp_path / "envdir"))
        code, _, _ = run(capsys, "resonance-scan", "--nmax", "4")
        assert code == 0
        assert (tmp_path / "envdir" / "resonance_scan.csv").is_file()

    def test_flag_beats_env_var(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("OSTLAB_OUTDIR", str(tmp_path / "envdir"))
        code, _, _ = run(capsys, "resonance-scan", "--nmax", "4", "--out", str(tmp_path / "flagdir"))
        assert code == 0
        assert (tmp_path / "flagdir" / "resonance_scan.csv").is_file()
        assert not (tmp_path / "envdir").exists()

    def test_nested_directory_created(self, capsys, tmp_path):
        target = tmp_path / "a" / "b"
        code, _, _ = run(capsys, "resonance-scan", "--nmax", "4", "--out", str(target))
        assert code == 0
        assert (target / "resonance_scan.csv").is_file()
