"""Experiment orchestration: seeded end-to-end runs, the two sweeps,
artifact persistence and report emission.

Every run synthesizes one scheduled record per backend (Wigner for the
quadrature-demodulation path, component for the sideband path), estimates
per-drive-class PSDs, performs the reference fit that pins the effective
width, then the constrained double fit and the quadrature fits.  Fitted
values and theory overlays always come from one shared DerivedRates
instance.  Artifacts are byte-reproducible for a fixed (config, seed),
independent of the worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import recordio
from .config import TWO_PI, RunConfig, require_valid
from .detect import (
    demod_baseband,
    compose_heterodyne_components,
    compose_heterodyne_wigner,
    lockin_demodulate,
    optimize_demod_phase,
    schedule_drive,
)
from .errors import ParoscError, PipelineError, QuantumSqueezingRegimeError
from .fitting import fit_double_pair, fit_quadrature, fit_single_pair
from .model import DerivedRates, quadrature_variances
from .spectral import chi2_indistinguishable, welch_psd_chunks, write_psd_csv
from .synth import (
    DETUNED,
    RESONANT,
    STREAM_FRAME_PHASE,
    simulate_scheduled_envelopes,
    simulate_scheduled_quadratures,
    stream_rng,
)

# Pass/fail tolerances applied by the report stage; pinned here, not tuned
# per run.
TOLERANCES = {
    "s_abs": 0.05,
    "ratio_sigma_multiple": 1.0,
    "var_ratio_rel": 0.05,
    "width_var_sigma_multiple": 1.0,
    "gamma_eff_rel": 0.05,
    "chi2_level": 0.01,
}

PSD_FILES = (
    "heterodyne_detuned.csv",
    "heterodyne_resonant.csv",
    "quadrature_x_detuned.csv",
    "quadrature_y_detuned.csv",
    "quadrature_x_resonant.csv",
    "quadrature_y_resonant.csv",
)

FIT_FILES = (
    "fit_heterodyne_reference.json",
    "fit_heterodyne_double.json",
    "fit_quadrature_x_detuned.json",
    "fit_quadrature_y_detuned.json",
    "fit_quadrature_x_resonant.json",
    "fit_quadrature_y_resonant.json",
)


def rep_seed(master_seed: int, point_key: tuple[int, ...], rep: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(*point_key, rep))
    return int(ss.generate_state(1, np.uint64)[0])


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ParoscError as exc:
        raise PipelineError(f"stage '{name}': {exc}") from exc


def _chunks(arr: np.ndarray, slices) -> list[np.ndarray]:
    return [arr[s] for s in slices]


def _run_repetition(config: RunConfig, rates: DerivedRates, seed: int, raw_dir: Path | None):
    v = config.values
    osc = config.oscillator()
    det = config.detection()
    grid = config.grid(seed)
    schedule = _stage("schedule", schedule_drive, grid, v["schedule_period"], rates.gamma_minus)
    delta_lo = v["delta_lo"]
    f_lo = delta_lo / TWO_PI
    decim = v["decimate"]
    passband_edge = config.passband_edge_hz(rates)

    # Quadrature path (Wigner backend).
    traj = _stage("synthesis", simulate_scheduled_quadratures, osc, rates, grid, schedule)
    if v["demod_phase_mode"] == "optimize":
        frame_phase = float(stream_rng(seed, STREAM_FRAME_PHASE).uniform(0.0, math.pi))
    else:
        frame_phase = 0.0
    rec_w = _stage(
        "composition", compose_heterodyne_wigner,
        traj, det, delta_lo, schedule=schedule, frame_phase=frame_phase,
    )
    if raw_dir is not None:
        recordio.write_record_bin(raw_dir / "record_wigner.bin", rec_w.samples, rec_w.sample_rate)
    del traj
    baseband = _stage("demodulation", demod_baseband, rec_w, det, passband_edge, decim)
    if v["demod_phase_mode"] == "optimize":
        theta = _stage(
            "phase search", optimize_demod_phase, rec_w, det, passband_edge, baseband=baseband
        )
    else:
        theta = v["demod_phase"]
    det_theta = config.detection(demod_phase=theta)
    demod = lockin_demodulate(rec_w, det_theta, passband_edge, decim, baseband=baseband)
    del baseband, rec_w

    nperseg_q = int(round(v["welch_segment"] * demod.sample_rate))
    psd_q = {}
    for tag in (DETUNED, RESONANT):
        slices = demod.usable_slices(tag)
        for ch_name, ch in (("x", demod.ch_x), ("y", demod.ch_y)):
            psd_q[(ch_name, tag)] = _stage(
                "quadrature psd", welch_psd_chunks,
                _chunks(ch, slices), demod.sample_rate, nperseg_q,
                v["welch_overlap"], v["window"],
            )
    if raw_dir is not None:
        recordio.write_record_bin(
            raw_dir / "demod_channels.bin",
            np.vstack([demod.ch_x, demod.ch_y]),
            demod.sample_rate,
        )
    del demod

    # Sideband path (component backend).
    beta_s, beta_as = _stage(
        "synthesis", simulate_scheduled_envelopes, osc, rates, grid, schedule
    )
    rec_c = _stage(
        "composition", compose_heterodyne_components,
        beta_s, beta_as, det, grid, delta_lo, schedule=schedule,
    )
    del beta_s, beta_as
    if raw_dir is not None:
        recordio.write_record_bin(raw_dir / "record_component.bin", rec_c.samples, rec_c.sample_rate)
    nperseg_h = int(round(v["welch_segment"] * rec_c.sample_rate))
    psd_h = {}
    for tag in (DETUNED, RESONANT):
        slices = rec_c.usable_slices(tag)
        psd_h[tag] = _stage(
            "heterodyne psd", welch_psd_chunks,
            _chunks(rec_c.samples, slices), rec_c.sample_rate, nperseg_h,
            v["welch_overlap"], v["window"],
        )
    del rec_c

    # Fits: reference first, then the constrained double fit it seeds.
    f_c = grid.carrier / TWO_PI
    centers = (f_c + f_lo, f_c - f_lo)
    margin = v["fit_margin"]
    ref = _stage("reference fit", fit_single_pair, psd_h[DETUNED], centers, margin)
    gamma_eff_ref = ref.estimates["gamma_hz"] * TWO_PI
    dbl = _stage("double fit", fit_double_pair, psd_h[RESONANT], gamma_eff_ref, centers, margin)
    quad_fits = {
        key: _stage("quadrature fit", fit_quadrature, psd, f_lo, margin)
        for key, psd in psd_q.items()
    }

    # Upper half-band only: the channel density mirrors exactly around f_lo,
    # so including both halves would double-count every bin in the statistic.
    same, p_value = chi2_indistinguishable(
        psd_q[("x", DETUNED)].band(f_lo, f_lo + margin),
        psd_q[("y", DETUNED)].band(f_lo, f_lo + margin),
        TOLERANCES["chi2_level"],
    )

    sigma2_x0 = quad_fits[("x", DETUNED)].derived["sigma2"]
    sigma2_y0 = quad_fits[("y", DETUNED)].derived["sigma2"]
    sigma2_0 = 0.5 * (sigma2_x0[0] + sigma2_y0[0])
    sigma2_0_sig = 0.5 * math.hypot(sigma2_x0[1], sigma2_y0[1])
    sigma2_x = quad_fits[("x", RESONANT)].derived["sigma2"]
    sigma2_y = quad_fits[("y", RESONANT)].derived["sigma2"]

    def _ratio(num, den):
        val = num[0] / den[0]
        sig = abs(val) * math.hypot(num[1] / num[0], den[1] / den[0]) if num[0] else math.inf
        return val, sig

    var_ratio_x = _ratio(sigma2_x, (sigma2_0, sigma2_0_sig))
    var_ratio_y = _ratio(sigma2_y, (sigma2_0, sigma2_0_sig))
    s_hat = dbl.derived["s"]

    scalars = {
        "theta_star": (theta, 0.0),
        "frame_phase": (frame_phase, 0.0),
        "gamma_eff_ref_hz": (ref.estimates["gamma_hz"], ref.sigmas["gamma_hz"]),
        "ratio": ref.derived["ratio"],
        "n_bar": ref.derived["n_bar"],
        "s_hat": s_hat,
        "r_plus": dbl.derived["r_plus"],
        "r_minus": dbl.derived["r_minus"],
        "ratio_total": dbl.derived["ratio_total"],
        "width_plus": (1.0 + s_hat[0], s_hat[1]),
        "width_minus": (1.0 - s_hat[0], s_hat[1]),
        "sigma2_0": (sigma2_0, sigma2_0_sig),
        "var_ratio_x": var_ratio_x,
        "var_ratio_y": var_ratio_y,
        "var_inferred_plus": _ratio((sigma2_0, sigma2_0_sig), sigma2_x),
        "var_inferred_minus": _ratio((sigma2_0, sigma2_0_sig), sigma2_y),
        "gamma_x_det_hz": quad_fits[("x", DETUNED)].derived["gamma_hz"],
        "gamma_y_det_hz": quad_fits[("y", DETUNED)].derived["gamma_hz"],
        "gamma_x_res_hz": quad_fits[("x", RESONANT)].derived["gamma_hz"],
        "gamma_y_res_hz": quad_fits[("y", RESONANT)].derived["gamma_hz"],
        "detuned_chi2_p": (p_value, 0.0),
    }
    fits = {
        "fit_heterodyne_reference.json": ref,
        "fit_heterodyne_double.json": dbl,
        "fit_quadrature_x_detuned.json": quad_fits[("x", DETUNED)],
        "fit_quadrature_y_detuned.json": quad_fits[("y", DETUNED)],
        "fit_quadrature_x_resonant.json": quad_fits[("x", RESONANT)],
        "fit_quadrature_y_resonant.json": quad_fits[("y", RESONANT)],
    }
    psds = {
        "heterodyne_detuned.csv": psd_h[DETUNED],
        "heterodyne_resonant.csv": psd_h[RESONANT],
        "quadrature_x_detuned.csv": psd_q[("x", DETUNED)],
        "quadrature_y_detuned.csv": psd_q[("y", DETUNED)],
        "quadrature_x_resonant.csv": psd_q[("x", RESONANT)],
        "quadrature_y_resonant.csv": psd_q[("y", RESONANT)],
    }
    return {
        "seed": seed,
        "detuned_indistinguishable": same,
        "scalars": scalars,
        "fits": fits,
        "psds": psds,
    }


def _aggregate(reps: list[dict]) -> dict:
    keys = reps[0]["scalars"].keys()
    out = {}
    for key in keys:
        vals = np.array([r["scalars"][key][0] for r in reps], dtype=float)
        sigs = np.array([r["scalars"][key][1] for r in reps], dtype=float)
        n = len(vals)
        out[key] = {
            "mean": float(np.mean(vals)),
            "std": float(np.std(vals, ddof=1)) if n > 1 else 0.0,
            "sem_fit": float(np.sqrt(np.sum(sigs**2)) / n),
            "values": [float(x) for x in vals],
            "sigmas": [float(x) for x in sigs],
        }
    return out


def _theory_block(rates: DerivedRates) -> dict:
    var_x, var_y = quadrature_variances(rates.n_bar, rates.s)
    regime = rates.regime()
    return {
        "gamma_eff_hz": rates.gamma_eff / TWO_PI,
        "gamma_plus_hz": rates.gamma_plus / TWO_PI,
        "gamma_minus_hz": rates.gamma_minus / TWO_PI,
        "s": rates.s,
        "n_bar": rates.n_bar,
        "r_plain": rates.r_plain,
        "r_plus": rates.r_plus,
        "r_minus": rates.r_minus,
        "weights": list(rates.weights.as_tuple()),
        "var_x": var_x,
        "var_y": var_y,
        "var_ratio_x": 1.0 / (1.0 + rates.s),
        "var_ratio_y": 1.0 / (1.0 - rates.s),
        "regime": {
            "stable": regime.stable,
            "quantum_squeezed": regime.quantum_squeezed,
            "quantum_squeezing_reachable": regime.quantum_squeezing_reachable,
        },
    }


def _checks(aggregate: dict, theory: dict, reps: list[dict]) -> list[dict]:
    tol = TOLERANCES
    checks = []

    def add(name, passed, detail):
        checks.append({"name": name, "passed": bool(passed), "detail": detail})

    s_err = abs(aggregate["s_hat"]["mean"] - theory["s"])
    add("s_recovery", s_err <= tol["s_abs"],
        f"|s_hat - s| = {s_err:.4g} (limit {tol['s_abs']})")

    for key, target in (("r_plus", theory["r_plus"]), ("r_minus", theory["r_minus"])):
        sem = max(aggregate[key]["sem_fit"], 1e-12)
        pull = abs(aggregate[key]["mean"] - target) / sem
        add(f"{key}_recovery", pull <= tol["ratio_sigma_multiple"],
            f"|{key} - theory| = {pull:.3g} combined sigma (limit {tol['ratio_sigma_multiple']})")

    for key, target in (("var_ratio_x", theory["var_ratio_x"]), ("var_ratio_y", theory["var_ratio_y"])):
        rel = abs(aggregate[key]["mean"] / target - 1.0)
        add(f"{key}_recovery", rel <= tol["var_ratio_rel"],
            f"relative error {rel:.4g} (limit {tol['var_ratio_rel']})")

    for w_key, v_key in (("width_plus", "var_inferred_plus"), ("width_minus", "var_inferred_minus")):
        diff = abs(aggregate[w_key]["mean"] - aggregate[v_key]["mean"])
        joint = math.hypot(max(aggregate[w_key]["sem_fit"], 1e-12),
                           max(aggregate[v_key]["sem_fit"], 1e-12))
        add(f"{w_key}_consistency", diff <= tol["width_var_sigma_multiple"] * joint,
            f"|width - variance inferred| = {diff:.4g} vs joint sigma {joint:.4g}")

    rel = abs(aggregate["gamma_eff_ref_hz"]["mean"] / theory["gamma_eff_hz"] - 1.0)
    add("gamma_eff_reference", rel <= tol["gamma_eff_rel"],
        f"relative error {rel:.4g} (limit {tol['gamma_eff_rel']})")

    all_same = all(r["detuned_indistinguishable"] for r in reps)
    add("detuned_channels_indistinguishable", all_same,
        f"chi-square test at {tol['chi2_level']:.0%} level, p = "
        + ", ".join(f"{r['scalars']['detuned_chi2_p'][0]:.3g}" for r in reps))
    return checks


def _run_analytic_only(config: RunConfig, out: Path, rates: DerivedRates) -> dict:
    """Quantum-squeezing regime (s > 2*n_bar): time-domain synthesis is
    refused, so the run emits the closed-form sideband spectra and a report
    that states the regime prominently."""
    from .model import analytic_sideband_psd

    gamma_plus = rates.gamma_plus
    omega = np.linspace(-30.0 * gamma_plus, 30.0 * gamma_plus, 4001)
    manifest = ["config.txt", "report.json", "report.txt"]
    cfg_hash = config.config_hash()
    for side in ("stokes", "antistokes"):
        psd = analytic_sideband_psd(rates.n_bar, rates.s, rates.gamma_eff, side, omega)
        name = f"analytic_{side}.csv"
        write_psd_csv_with_hash(psd, out / name, cfg_hash)
        manifest.append(name)
    report = {
        "config_hash": cfg_hash,
        "mode": "analytic_only",
        "theory": _theory_block(rates),
        "checks": [],
        "tolerances": TOLERANCES,
        "artifacts": sorted(manifest),
    }
    with open(out / "config.txt", "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash = {cfg_hash}\n")
        fh.write(config.snapshot())
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(out / "report.txt", "w", encoding="utf-8") as fh:
        fh.write(render_report(report))
    return report


def run_single(
    config: RunConfig,
    out_dir,
    point_key: tuple[int, ...] = (0,),
    validate: bool = True,
) -> dict:
    """One seeded end-to-end run with the configured number of repetitions.

    Writes per-repetition PSD CSVs and fit reports plus a consolidated
    report.json / report.txt; returns the report dictionary.  In the
    quantum-squeezing regime (s > 2*n_bar) the run degrades to analytic
    spectra only, since the component backend refuses negative weights.
    """
    if validate:
        require_valid(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rates = config.derived_rates()
    if min(rates.weights.as_tuple()) < 0.0:
        return _run_analytic_only(config, out, rates)
    v = config.values
    reps = []
    manifest = ["config.txt", "report.json", "report.txt"]
    for rep in range(v["repetitions"]):
        seed = rep_seed(v["seed"], point_key, rep)
        rep_dir = out / f"rep{rep:02d}"
        rep_dir.mkdir(parents=True, exist_ok=True)
        raw_dir = None
        if v["keep_raw"]:
            raw_dir = rep_dir / "raw"
            raw_dir.mkdir(exist_ok=True)
        result = _run_repetition(config, rates, seed, raw_dir)
        cfg_hash = config.config_hash()
        for name, psd in result["psds"].items():
            path = rep_dir / name
            write_psd_csv_with_hash(psd, path, cfg_hash)
            manifest.append(str(path.relative_to(out)))
        for name, fit in result["fits"].items():
            doc = fit.to_json_dict()
            doc["provenance"] = {"config_hash": cfg_hash, "seed": result["seed"]}
            with open(rep_dir / name, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=1, sort_keys=True)
                fh.write("\n")
            manifest.append(str((rep_dir / name).relative_to(out)))
        reps.append(result)
    aggregate = _aggregate(reps)
    theory = _theory_block(rates)
    checks = _checks(aggregate, theory, reps)
    report = {
        "config_hash": config.config_hash(),
        "point_key": list(point_key),
        "repetitions": v["repetitions"],
        "seeds": [r["seed"] for r in reps],
        "theory": theory,
        "aggregate": aggregate,
        "checks": checks,
        "tolerances": TOLERANCES,
        "lockin": {
            "lowpass_cutoff_hz": v["lowpass_cutoff"],
            "passband_edge_hz": config.passband_edge_hz(rates),
            "decimate": v["decimate"],
            "window": v["window"],
            "welch_segment_s": v["welch_segment"],
            "welch_overlap": v["welch_overlap"],
        },
        "artifacts": sorted(manifest),
    }
    with open(out / "config.txt", "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash = {config.config_hash()}\n")
        fh.write(config.snapshot())
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(out / "report.txt", "w", encoding="utf-8") as fh:
        fh.write(render_report(report))
    return report


def write_psd_csv_with_hash(psd, path, cfg_hash: str) -> None:
    write_psd_csv(psd, path)
    with open(path, "r", encoding="utf-8") as fh:
        body = fh.read()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# config={cfg_hash}\n" + body)


def render_report(report: dict) -> str:
    lines = []
    th = report["theory"]
    lines.append(f"config hash      : {report['config_hash']}")
    if "repetitions" in report:
        lines.append(f"repetitions      : {report['repetitions']}")
    lines.append(
        "theory           : s = {s:.6g}, n_bar = {n}, gamma_eff = {g:.6g} Hz".format(
            s=th["s"], n=th["n_bar"], g=th["gamma_eff_hz"]
        )
    )
    regime = th["regime"]
    lines.append(
        "regime           : stable={stable} quantum_squeezed={qs} reachable_below_instability={qr}".format(
            stable=regime["stable"], qs=regime["quantum_squeezed"],
            qr=regime["quantum_squeezing_reachable"],
        )
    )
    if regime["quantum_squeezed"]:
        lines.append(
            "                   NOTE: quantum-squeezing regime (s > 2*n_bar) --"
        )
        lines.append(
            "                   time-domain synthesis is refused; this run used"
        )
        lines.append(
            "                   analytic spectra only."
        )
    if "aggregate" in report:
        agg = report["aggregate"]
        for key in ("gamma_eff_ref_hz", "ratio", "n_bar", "s_hat", "r_plus", "r_minus",
                    "var_ratio_x", "var_ratio_y"):
            a = agg[key]
            lines.append(
                f"{key:<17}: {a['mean']:.6g} +- {a['std']:.3g} (std over reps), "
                f"+- {a['sem_fit']:.3g} (fit)"
            )
    lines.append("tolerances       : " + json.dumps(report["tolerances"], sort_keys=True))
    lines.append("checks:")
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        lines.append(f"  [{status}] {check['name']}: {check['detail']}")
    if not report["checks"]:
        lines.append("  (none: no synthesized data in this mode)")
    if "lockin" in report:
        lines.append("lock-in settings : " + json.dumps(report["lockin"], sort_keys=True))
    return "\n".join(lines) + "\n"


# --- sweeps ----------------------------------------------------------------


def _run_point(args):
    index, config, out_dir = args
    try:
        # sweep rows need fitted quantities, so a point in the
        # quantum-squeezing regime is reported as failed with the synth
        # refusal message rather than silently degrading to analytic mode
        rates = config.derived_rates()
        if min(rates.weights.as_tuple()) < 0.0:
            raise QuantumSqueezingRegimeError(
                f"s = {rates.s:.4g} > 2*n_bar = {2 * rates.n_bar:.4g}: "
                "quantum-squeezing regime, time-domain synthesis refused"
            )
        report = run_single(config, out_dir, point_key=(index,))
        return index, report, None
    except Exception as exc:  # error isolation: a failing point must not kill siblings
        return index, None, f"{type(exc).__name__}: {exc}"


def _run_points(points, workers: int):
    if workers <= 1:
        results = [_run_point(p) for p in points]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, points))
    return sorted(results, key=lambda r: r[0])


def _csv_cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return str(x).lower()
    return f"{x:.12g}"


def write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(c) for c in row) + "\n")


def run_sweep_ratio_vs_s(config: RunConfig, s_values, out_dir, workers: int | None = None) -> list[dict]:
    """Sweep of the sideband-component ratios versus the set parametric gain
    at constant occupancy.  Per-point artifacts land in point_XX/; the summary
    table and a dense theory overlay are emitted as CSV."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = config.values["workers"] if workers is None else workers
    points = []
    for i, s in enumerate(s_values):
        sub = config.with_overrides(rate_source="target", s_target=f"{s:.12g}")
        points.append((i, sub, out / f"point_{i:02d}"))
    results = _run_points(points, workers)
    n_bar = config.values["n_bar"]
    rows = []
    summary = []
    for (i, report, error), s in zip(results, s_values):
        entry = {"index": i, "s_set": float(s), "status": "ok" if error is None else "failed",
                 "error": error, "report": report}
        summary.append(entry)
        if error is None:
            agg = report["aggregate"]
            th = report["theory"]
            rows.append([
                i, s, "ok",
                agg["s_hat"]["mean"], agg["s_hat"]["sem_fit"],
                agg["r_plus"]["mean"], agg["r_plus"]["sem_fit"],
                agg["r_minus"]["mean"], agg["r_minus"]["sem_fit"],
                th["r_plus"], th["r_minus"], "",
            ])
        else:
            rows.append([i, s, "failed"] + [None] * 8 + [error])
    write_csv(
        out / "sweep_summary.csv",
        ["index", "s_set", "status", "s_hat", "s_hat_sigma",
         "r_plus_hat", "r_plus_sigma", "r_minus_hat", "r_minus_sigma",
         "theory_r_plus", "theory_r_minus", "error"],
        rows,
    )
    overlay = []
    for s in np.linspace(0.0, 0.95, 96):
        r_plain = (n_bar + 1.0) / n_bar
        r_plus = (n_bar + 1.0 + s / 2.0) / (n_bar - s / 2.0)
        r_minus = (n_bar + 1.0 - s / 2.0) / (n_bar + s / 2.0)
        overlay.append([s, r_plain, r_plus, r_minus])
    write_csv(out / "theory_overlay.csv", ["s", "r_plain", "r_plus", "r_minus"], overlay)
    return summary


def epsilon_for_target_s(config: RunConfig, s_target: float, lo: float = 0.5, hi: float = 1.0) -> float:
    """Cooling-tone fraction realizing a requested parametric gain at constant
    total pump power.

    Walks the monotone branch down from epsilon_c = 1 (where s = 0) and
    brackets the target before root-finding; the walk stops where the model
    leaves the damped stable region (anti-damping or s >= 1), which bounds
    the usable epsilon_c range from below.
    """
    from .errors import AntiDampedError
    from .model import squeeze_param

    if s_target == 0.0:
        return 1.0
    osc = config.oscillator()

    def s_of(eps):
        try:
            s = squeeze_param(config.pump(epsilon_c=eps), osc)
        except (AntiDampedError, ValueError):
            return None
        return s

    prev_eps = hi - 1e-12
    prev = s_of(prev_eps)
    if prev is None:
        raise PipelineError("model undefined at epsilon_c = 1")
    for eps in np.linspace(prev_eps, lo, 201)[1:]:
        val = s_of(eps)
        if val is None or val >= 1.0:
            break
        if (val - s_target) == 0.0:
            return float(eps)
        if (val > s_target) != (prev > s_target):
            return float(
                brentq(lambda e: s_of(e) - s_target, eps, prev_eps, xtol=1e-12)
            )
        prev_eps, prev = eps, val
    raise PipelineError(
        f"no epsilon_c in [{lo:.3g}, {hi:.3g}] realizes s = {s_target:.4g} "
        "inside the stable damped region"
    )


def run_sweep_variance_vs_tone_ratio(config: RunConfig, epsilon_values, out_dir, workers: int | None = None) -> list[dict]:
    """Quadrature-variance sweep versus the modulation/cooling tone split at
    constant total pump power, with the three-way consistency columns:
    measured normalized variances, their theory 1/(1 +- s), and the widths of
    the heterodyne components expressed as (1 +- s)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = config.values["workers"] if workers is None else workers
    points = []
    for i, eps in enumerate(epsilon_values):
        sub = config.with_overrides(rate_source="params", epsilon_c=f"{eps:.12g}")
        points.append((i, sub, out / f"point_{i:02d}"))
    results = _run_points(points, workers)
    rows = []
    summary = []
    for (i, report, error), eps in zip(results, epsilon_values):
        entry = {"index": i, "epsilon_c": float(eps), "status": "ok" if error is None else "failed",
                 "error": error, "report": report}
        summary.append(entry)
        if error is None:
            agg = report["aggregate"]
            th = report["theory"]
            rows.append([
                i, eps, "ok", th["s"],
                agg["var_ratio_x"]["mean"], agg["var_ratio_x"]["sem_fit"],
                agg["var_ratio_y"]["mean"], agg["var_ratio_y"]["sem_fit"],
                th["var_ratio_x"], th["var_ratio_y"],
                agg["width_plus"]["mean"], agg["width_plus"]["sem_fit"],
                agg["width_minus"]["mean"], agg["width_minus"]["sem_fit"],
                agg["var_inferred_plus"]["mean"], agg["var_inferred_plus"]["sem_fit"],
                agg["var_inferred_minus"]["mean"], agg["var_inferred_minus"]["sem_fit"],
                "",
            ])
        else:
            rows.append([i, eps, "failed"] + [None] * 14 + [error])
    write_csv(
        out / "sweep_summary.csv",
        ["index", "epsilon_c", "status", "s_model",
         "var_ratio_x", "var_ratio_x_sigma", "var_ratio_y", "var_ratio_y_sigma",
         "theory_var_ratio_x", "theory_var_ratio_y",
         "width_plus", "width_plus_sigma", "width_minus", "width_minus_sigma",
         "var_inferred_plus", "var_inferred_plus_sigma",
         "var_inferred_minus", "var_inferred_minus_sigma", "error"],
        rows,
    )
    overlay = []
    if config.values["rate_source"] == "params":
        from .model import squeeze_param

        osc = config.oscillator()
        for eps in np.linspace(0.5, 1.0, 101):
            try:
                s = squeeze_param(config.pump(epsilon_c=float(eps)), osc)
            except ParoscError:
                continue
            if 0.0 <= s < 1.0:
                overlay.append([eps, s, 1.0 / (1.0 + s), 1.0 / (1.0 - s)])
    write_csv(out / "theory_overlay.csv",
              ["epsilon_c", "s", "var_ratio_x", "var_ratio_y"], overlay)
    return summary


# --- report verb -------------------------------------------------------------


def load_report(artifacts_dir) -> dict:
    path = Path(artifacts_dir) / "report.json"
    if not path.exists():
        raise PipelineError(f"missing report.json under {artifacts_dir}")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def report_artifacts(artifacts_dir) -> tuple[str, bool]:
    """Render the human summary for a run or sweep directory and evaluate the
    pass/fail state; returns (text, ok)."""
    root = Path(artifacts_dir)
    if (root / "sweep_summary.csv").exists():
        texts = []
        ok = True
        point_dirs = sorted(p for p in root.iterdir() if p.is_dir() and p.name.startswith("point_"))
        for pd in point_dirs:
            try:
                report = load_report(pd)
            except PipelineError as exc:
                texts.append(f"== {pd.name}: MISSING ({exc})")
                ok = False
                continue
            point_ok = all(c["passed"] for c in report["checks"])
            ok &= point_ok
            texts.append(f"== {pd.name} [{'PASS' if point_ok else 'FAIL'}]")
            texts.append(render_report(report))
        with open(root / "sweep_summary.csv", "r", encoding="utf-8") as fh:
            texts.append(fh.read())
        return "\n".join(texts), ok
    report = load_report(root)
    missing = [a for a in report["artifacts"] if not (root / a).exists()]
    ok = all(c["passed"] for c in report["checks"]) and not missing
    text = render_report(report)
    if missing:
        text += "missing artifacts:\n" + "\n".join(f"  {m}" for m in missing) + "\n"
    return text, ok
