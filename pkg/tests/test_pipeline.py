"""End-to-end orchestration: artifacts, determinism, sweeps, CLI contract."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from conftest import fast_config
from parosc.cli import main
from parosc.pipeline import (
    PSD_FILES,
    FIT_FILES,
    epsilon_for_target_s,
    report_artifacts,
    run_single,
    run_sweep_ratio_vs_s,
    run_sweep_variance_vs_tone_ratio,
)

TWO_PI = 2.0 * math.pi


def tiny_config(**overrides):
    merged = dict(
        duration="12s", schedule_period="3s", welch_segment="0.7s",
        repetitions="2", seed="1234",
    )
    merged.update(overrides)
    return fast_config(**merged)


def read_tree_bytes(root: Path) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestRunSingle:
    @pytest.fixture(scope="class")
    def run(self, tmp_path_factory):
        out = tmp_path_factory.mktemp("single")
        report = run_single(tiny_config(), out)
        return out, report

    def test_artifacts_complete(self, run):
        out, report = run
        for name in ("config.txt", "report.json", "report.txt"):
            assert (out / name).exists()
        for rep in range(2):
            for name in PSD_FILES + FIT_FILES:
                assert (out / f"rep{rep:02d}" / name).exists(), name
        for rel in report["artifacts"]:
            assert (out / rel).exists(), rel

    def test_artifacts_carry_config_hash(self, run):
        out, report = run
        cfg_hash = report["config_hash"]
        first = (out / "rep00" / "heterodyne_detuned.csv").read_text().splitlines()[0]
        assert cfg_hash in first
        fit = json.loads((out / "rep00" / "fit_heterodyne_double.json").read_text())
        assert fit["provenance"]["config_hash"] == cfg_hash

    def test_report_structure(self, run):
        _, report = run
        agg = report["aggregate"]
        assert len(agg["s_hat"]["values"]) == 2
        assert agg["s_hat"]["std"] >= 0.0
        assert report["theory"]["s"] == 0.5
        assert {c["name"] for c in report["checks"]} >= {
            "s_recovery", "r_plus_recovery", "gamma_eff_reference",
            "detuned_channels_indistinguishable",
        }
        assert report["tolerances"]["s_abs"] == 0.05
        assert "lockin" in report

    def test_phase_optimizer_recovers_frame(self, run):
        _, report = run
        agg = report["aggregate"]
        for theta, phi in zip(agg["theta_star"]["values"], agg["frame_phase"]["values"]):
            delta = abs((theta - phi + math.pi / 2) % math.pi - math.pi / 2)
            assert delta < 0.2

    def test_report_verb_renders(self, run):
        out, _ = run
        text, ok = report_artifacts(out)
        assert "checks:" in text
        assert "config hash" in text


class TestDeterminism:
    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = tiny_config(repetitions="1")
        a = tmp_path / "a"
        b = tmp_path / "b"
        run_single(cfg, a)
        run_single(cfg, b)
        ta, tb = read_tree_bytes(a), read_tree_bytes(b)
        assert ta.keys() == tb.keys()
        for name in ta:
            assert ta[name] == tb[name], name

    def test_seed_changes_outputs(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        run_single(tiny_config(repetitions="1"), a)
        run_single(tiny_config(repetitions="1", seed="999"), b)
        assert (a / "rep00" / "heterodyne_detuned.csv").read_bytes() != (
            b / "rep00" / "heterodyne_detuned.csv"
        ).read_bytes()

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        cfg = tiny_config(repetitions="1")
        s_values = [0.0, 0.3, 0.5]
        a = tmp_path / "w1"
        b = tmp_path / "w2"
        run_sweep_ratio_vs_s(cfg, s_values, a, workers=1)
        run_sweep_ratio_vs_s(cfg, s_values, b, workers=3)
        ta, tb = read_tree_bytes(a), read_tree_bytes(b)
        assert ta.keys() == tb.keys()
        for name in ta:
            assert ta[name] == tb[name], name


class TestSweepRatios:
    def test_empty_sweep_succeeds(self, tmp_path):
        summary = run_sweep_ratio_vs_s(tiny_config(), [], tmp_path)
        assert summary == []
        lines = (tmp_path / "sweep_summary.csv").read_text().splitlines()
        assert len(lines) == 1  # header only
        assert (tmp_path / "theory_overlay.csv").exists()

    def test_failed_point_is_isolated(self, tmp_path):
        cfg = tiny_config(n_bar="0.3")
        summary = run_sweep_ratio_vs_s(cfg, [0.1, 0.7], tmp_path)
        assert summary[0]["status"] == "ok"
        assert summary[1]["status"] == "failed"
        assert "quantum" in summary[1]["error"].lower() or "0.7" in summary[1]["error"]
        rows = (tmp_path / "sweep_summary.csv").read_text().splitlines()
        assert rows[1].split(",")[2] == "ok"
        assert rows[2].split(",")[2] == "failed"
        assert (tmp_path / "point_00" / "report.json").exists()

    def test_summary_columns(self, tmp_path):
        summary = run_sweep_ratio_vs_s(tiny_config(repetitions="1"), [0.5], tmp_path)
        assert summary[0]["status"] == "ok"
        header = (tmp_path / "sweep_summary.csv").read_text().splitlines()[0].split(",")
        assert header[:5] == ["index", "s_set", "status", "s_hat", "s_hat_sigma"]
        assert "theory_r_plus" in header


class TestSweepVariances:
    def test_epsilon_one_gives_unity_ratios(self, tmp_path):
        cfg = tiny_config(
            repetitions="1",
            rate_source="params", g="5kHz", epsilon_c="0.8", delta_pump="200kHz",
        )
        summary = run_sweep_variance_vs_tone_ratio(cfg, [1.0], tmp_path)
        assert summary[0]["status"] == "ok", summary[0]["error"]
        report = summary[0]["report"]
        assert report["theory"]["s"] == 0.0
        assert report["aggregate"]["var_ratio_x"]["mean"] == pytest.approx(1.0, abs=0.15)
        assert report["aggregate"]["var_ratio_y"]["mean"] == pytest.approx(1.0, abs=0.15)

    def test_epsilon_for_target_s_inverts_model(self):
        cfg = fast_config(rate_source="params", g="5kHz", delta_pump="200kHz")
        from parosc.model import squeeze_param

        eps = epsilon_for_target_s(cfg, 0.3)
        s = squeeze_param(cfg.pump(epsilon_c=eps), cfg.oscillator())
        assert s == pytest.approx(0.3, abs=1e-9)
        assert epsilon_for_target_s(cfg, 0.0) == 1.0


class TestCli:
    def test_validate_config_ok(self, tmp_path, capsys):
        path = tmp_path / "run.cfg"
        path.write_text(tiny_config().snapshot())
        assert main(["validate-config", "--config", str(path)]) == 0
        assert "config ok" in capsys.readouterr().out

    def test_validate_config_error_exit_2(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("sample_rate = 1kHz\n")
        assert main(["validate-config", "--config", str(path)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_unknown_key_exit_2(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("bogus = 1\n")
        assert main(["validate-config", "--config", str(path)]) == 2

    def test_simulate_and_report(self, tmp_path, capsys):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(tiny_config(repetitions="1").snapshot())
        out = tmp_path / "out"
        code = main(["simulate", "--config", str(cfg_path), "--out", str(out)])
        assert code == 0
        assert (out / "report.txt").exists()
        code = main(["report", "--out", str(out)])
        captured = capsys.readouterr()
        assert "checks:" in captured.out
        assert code in (0, 4)

    def test_report_missing_artifacts_exit_4(self, tmp_path):
        out = tmp_path / "out"
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(tiny_config(repetitions="1").snapshot())
        assert main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 0
        (out / "rep00" / "heterodyne_detuned.csv").unlink()
        assert main(["report", "--out", str(out)]) == 4

    def test_seed_override(self, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(tiny_config(repetitions="1").snapshot())
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        main(["simulate", "--config", str(cfg_path), "--out", str(out1), "--seed", "7"])
        main(["simulate", "--config", str(cfg_path), "--out", str(out2), "--seed", "8"])
        a = json.loads((out1 / "report.json").read_text())
        b = json.loads((out2 / "report.json").read_text())
        assert a["seeds"] != b["seeds"]


class TestAnalyticOnlyMode:
    def test_quantum_regime_emits_analytic_report(self, tmp_path):
        cfg = tiny_config(n_bar="0.3", s_target="0.7")
        report = run_single(cfg, tmp_path)
        assert report["mode"] == "analytic_only"
        assert report["theory"]["regime"]["quantum_squeezed"] is True
        assert (tmp_path / "analytic_stokes.csv").exists()
        assert (tmp_path / "analytic_antistokes.csv").exists()
        text = (tmp_path / "report.txt").read_text()
        assert "quantum-squeezing regime" in text
        assert "analytic spectra only" in text
        _, ok = report_artifacts(tmp_path)
        assert ok  # no checks, nothing missing

    def test_sweep_point_in_regime_marked_failed(self, tmp_path):
        cfg = tiny_config(n_bar="0.3")
        summary = run_sweep_ratio_vs_s(cfg, [0.7], tmp_path)
        assert summary[0]["status"] == "failed"
        assert "quantum-squeezing" in summary[0]["error"]


class TestCliNumericalFailure:
    def test_runtime_failure_exit_3(self, tmp_path, capsys):
        # validates fine but the fit band selects too few bins at runtime
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(tiny_config(repetitions="1", fit_margin="3Hz").snapshot())
        out = tmp_path / "out"
        code = main(["simulate", "--config", str(cfg_path), "--out", str(out)])
        assert code == 3
        assert "numerical failure" in capsys.readouterr().err


class TestKeepRaw:
    def test_raw_records_persisted(self, tmp_path):
        cfg = tiny_config(repetitions="1", keep_raw="true")
        run_single(cfg, tmp_path)
        raw = tmp_path / "rep00" / "raw"
        assert (raw / "record_wigner.bin").exists()
        assert (raw / "record_component.bin").exists()
        assert (raw / "demod_channels.bin").exists()
        from parosc.recordio import read_record_bin

        samples, rate = read_record_bin(raw / "record_wigner.bin")
        assert rate == 25e3
        assert len(samples) == int(12 * 25e3)


class TestWidthCrossCheck:
    def test_heterodyne_widths_agree_with_quadrature_widths(self, tmp_path):
        # the double-fit widths gamma_eff(1 +- s) agree with the directly
        # fitted channel widths of the same run within joint uncertainty
        cfg = fast_config(duration="60s", repetitions="2", seed="20260823")
        report = run_single(cfg, tmp_path / "run")
        agg = report["aggregate"]
        gamma_ref = np.array(agg["gamma_eff_ref_hz"]["values"])
        s_hat = np.array(agg["s_hat"]["values"])
        s_sig = np.array(agg["s_hat"]["sigmas"])
        for sign, ch_key in ((+1.0, "gamma_x_res_hz"), (-1.0, "gamma_y_res_hz")):
            het = gamma_ref * (1.0 + sign * s_hat)
            het_sig = gamma_ref * s_sig
            ch = np.array(agg[ch_key]["values"])
            ch_sig = np.array(agg[ch_key]["sigmas"])
            n = len(het)
            diff = abs(het.mean() - ch.mean())
            joint = math.hypot(
                math.sqrt(float(np.sum(het_sig**2))) / n,
                math.sqrt(float(np.sum(ch_sig**2))) / n,
            )
            assert diff <= joint, (ch_key, het.mean(), ch.mean(), joint)


class TestCliSweeps:
    def test_sweep_ratios_verb(self, tmp_path, capsys):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(tiny_config(repetitions="1").snapshot())
        out = tmp_path / "out"
        code = main([
            "sweep-ratios", "--config", str(cfg_path), "--out", str(out),
            "--s-values", "0.3,0.5",
        ])
        assert code == 0
        assert (out / "sweep_summary.csv").exists()
        assert "2/2 points ok" in capsys.readouterr().out

    def test_sweep_variances_verb(self, tmp_path, capsys):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(
            tiny_config(
                repetitions="1", rate_source="params",
                g="5kHz", delta_pump="200kHz",
            ).snapshot()
        )
        out = tmp_path / "out"
        code = main([
            "sweep-variances", "--config", str(cfg_path), "--out", str(out),
            "--epsilon-values", "1.0",
        ])
        assert code == 0
        assert (out / "sweep_summary.csv").exists()


class TestRatioSweepStraddlesTheory:
    def test_six_point_sweep_pulls(self, tmp_path):
        # fitted ratios scatter around the theory curves with calibrated
        # pulls: none is a gross outlier and the signs are mixed
        cfg = fast_config(duration="30s", repetitions="1", seed="31415")
        s_values = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
        summary = run_sweep_ratio_vs_s(cfg, s_values, tmp_path)
        pulls = []
        for entry in summary:
            assert entry["status"] == "ok", entry["error"]
            agg = entry["report"]["aggregate"]
            th = entry["report"]["theory"]
            for key, target in (("r_plus", th["r_plus"]), ("r_minus", th["r_minus"])):
                pulls.append(
                    (agg[key]["mean"] - target) / max(agg[key]["sem_fit"], 1e-9)
                )
        pulls = np.array(pulls)
        assert np.max(np.abs(pulls)) < 5.0
        assert np.any(pulls > 0) and np.any(pulls < 0)
