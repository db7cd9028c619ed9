"""Flat key=value run configuration with explicit unit suffixes.

Frequency-like quantities take Hz/kHz/MHz/GHz (or mHz) suffixes.  Fields
declared angular are converted to rad/s internally (the stored value is
2*pi times the suffixed cycles/s); sampling and analysis frequencies stay in
plain Hz.  Times take s/ms, temperatures K, phases rad.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .model import CavityPumpParams, DerivedRates, OscillatorParams
from .synth import SimGrid
from .detect import DetectionParams, schedule_drive

TWO_PI = 2.0 * math.pi

# kind -> accepted suffixes and multiplier to the stored unit
ANGULAR = "angular_freq"  # suffix in Hz-family, stored rad/s
PLAIN_HZ = "plain_freq"  # suffix in Hz-family, stored Hz
TIME = "time"
TEMP = "temperature"
PHASE = "phase"
FLOAT = "float"
INT = "int"
BOOL = "bool"
STR = "str"
FLOAT_LIST = "float_list"

_HZ_SCALE = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9, "mHz": 1e-3}
_TIME_SCALE = {"s": 1.0, "ms": 1e-3, "us": 1e-6}

# name -> (kind, default-as-text, help)
FIELDS: dict[str, tuple[str, str, str]] = {
    # oscillator
    "omega_m": (ANGULAR, "530kHz", "mechanical mode frequency"),
    "q_factor": (FLOAT, "6.4e6", "mechanical quality factor (sets gamma_m)"),
    "gamma_m": (ANGULAR, "", "intrinsic damping; overrides q_factor when set"),
    "n_bar": (FLOAT, "5.8", "steady-state occupancy under cooling"),
    "temperature": (TEMP, "7K", "bath temperature (thermal occupancy only)"),
    "mass": (FLOAT, "", "oscillator mass in kg (x_zpf only)"),
    # cavity / pump
    "kappa": (ANGULAR, "1.4MHz", "cavity linewidth"),
    "g": (ANGULAR, "5kHz", "total pump optomechanical coupling"),
    "epsilon_c": (FLOAT, "0.8", "cooling-tone fraction of total pump power"),
    "delta_pump": (ANGULAR, "200kHz", "mean pump detuning (positive = red cooling tone)"),
    "delta_lo": (ANGULAR, "11kHz", "heterodyne LO offset"),
    "omega_par_offset": (ANGULAR, "12kHz", "modulation-tone shift in reference segments"),
    # rates
    "rate_source": (STR, "target", "target | params"),
    "gamma_eff_target": (ANGULAR, "20Hz", "effective width for rate_source=target"),
    "s_target": (FLOAT, "0.5", "parametric gain for rate_source=target"),
    # grid
    "sample_rate": (PLAIN_HZ, "250kHz", "record sample rate"),
    "duration": (TIME, "100s", "record duration"),
    "carrier": (ANGULAR, "50kHz", "reduced intermediate carrier"),
    "seed": (INT, "20260809", "master seed"),
    # detection
    "gain": (FLOAT, "1.0", "detector units per quadrature quantum"),
    "shot_psd": (FLOAT, "0.002", "flat one-sided noise floor, units^2/Hz"),
    "demod_phase_mode": (STR, "optimize", "optimize | fixed"),
    "demod_phase": (PHASE, "0rad", "lock-in phase for demod_phase_mode=fixed"),
    "lowpass_cutoff": (PLAIN_HZ, "13kHz", "lock-in low-pass passband edge"),
    "schedule_period": (TIME, "5s", "drive alternation period"),
    "decimate": (INT, "8", "demodulated-channel decimation factor"),
    # analysis
    "welch_segment": (TIME, "1s", "Welch segment length"),
    "welch_overlap": (FLOAT, "0.5", "Welch overlap fraction"),
    "window": (STR, "hann", "Welch window"),
    "fit_margin": (PLAIN_HZ, "500Hz", "half-width of each fit window"),
    # run
    "repetitions": (INT, "5", "independent repetitions per point"),
    "workers": (INT, "1", "concurrent sweep workers"),
    "keep_raw": (BOOL, "false", "persist raw records"),
}

_VALUE_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*([A-Za-z]*)\s*$")


def _parse_value(name: str, kind: str, text: str):
    text = text.strip()
    if kind == STR:
        return text
    if kind == BOOL:
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{name}: cannot parse boolean {text!r}")
    if kind == FLOAT_LIST:
        if not text:
            return []
        return [float(tok) for tok in text.split(",") if tok.strip()]
    if not text:
        return None
    m = _VALUE_RE.match(text)
    if m is None:
        raise ConfigError(f"{name}: cannot parse value {text!r}")
    number, suffix = float(m.group(1)), m.group(2)
    if kind in (ANGULAR, PLAIN_HZ):
        if suffix not in _HZ_SCALE:
            raise ConfigError(
                f"{name}: frequency needs an explicit Hz-family suffix, got {text!r}"
            )
        hz = number * _HZ_SCALE[suffix]
        return TWO_PI * hz if kind == ANGULAR else hz
    if kind == TIME:
        if suffix not in _TIME_SCALE:
            raise ConfigError(f"{name}: time needs an s/ms/us suffix, got {text!r}")
        return number * _TIME_SCALE[suffix]
    if kind == TEMP:
        if suffix not in ("K", ""):
            raise ConfigError(f"{name}: temperature takes a K suffix, got {text!r}")
        return number
    if kind == PHASE:
        if suffix not in ("rad", ""):
            raise ConfigError(f"{name}: phase takes a rad suffix, got {text!r}")
        return number
    if kind == FLOAT:
        if suffix:
            raise ConfigError(f"{name}: dimensionless value has suffix {suffix!r}")
        return number
    if kind == INT:
        if suffix:
            raise ConfigError(f"{name}: integer value has suffix {suffix!r}")
        return int(number)
    raise ConfigError(f"{name}: unknown kind {kind}")


@dataclass(frozen=True)
class RunConfig:
    """Resolved run configuration (angular rates in rad/s)."""

    values: dict
    raw_text: dict

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls.from_items({})

    @classmethod
    def from_items(cls, items: dict[str, str]) -> "RunConfig":
        unknown = sorted(set(items) - set(FIELDS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        raw = {name: FIELDS[name][1] for name in FIELDS}
        raw.update({k: v.strip() for k, v in items.items()})
        values = {
            name: _parse_value(name, FIELDS[name][0], raw[name]) for name in FIELDS
        }
        return cls(values=values, raw_text=raw)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        items = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
            key, value = stripped.split("=", 1)
            items[key.strip()] = value.strip()
        return cls.from_items(items)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def __getattr__(self, name):
        values = object.__getattribute__(self, "values")
        if name in values:
            return values[name]
        raise AttributeError(name)

    def with_overrides(self, **items: str) -> "RunConfig":
        merged = dict(self.raw_text)
        merged.update({k: str(v) for k, v in items.items()})
        return RunConfig.from_items(merged)

    def snapshot(self) -> str:
        """Canonical diff-friendly text; hashing input."""
        lines = [f"{name} = {self.raw_text[name]}" for name in sorted(FIELDS)]
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.snapshot().encode()).hexdigest()[:16]

    # --- domain object builders -------------------------------------------

    def oscillator(self) -> OscillatorParams:
        gamma_m = self.values["gamma_m"]
        if gamma_m is None:
            gamma_m = self.values["omega_m"] / self.values["q_factor"]
        return OscillatorParams(
            omega_m=self.values["omega_m"],
            gamma_m=gamma_m,
            n_bar=self.values["n_bar"],
            mass=self.values["mass"],
            temperature=self.values["temperature"],
        )

    def pump(self, epsilon_c: float | None = None) -> CavityPumpParams:
        return CavityPumpParams(
            kappa=self.values["kappa"],
            g=self.values["g"],
            epsilon_c=self.values["epsilon_c"] if epsilon_c is None else epsilon_c,
            delta_pump=self.values["delta_pump"],
            delta_lo=self.values["delta_lo"],
            omega_par_offset=self.values["omega_par_offset"],
        )

    def derived_rates(self, epsilon_c: float | None = None, s_target: float | None = None) -> DerivedRates:
        if self.values["rate_source"] == "target":
            s = self.values["s_target"] if s_target is None else s_target
            return DerivedRates.from_target(
                self.values["gamma_eff_target"], s, self.values["n_bar"]
            )
        return DerivedRates.from_params(self.pump(epsilon_c), self.oscillator())

    def detection(self, demod_phase: float | None = None) -> DetectionParams:
        return DetectionParams(
            gain=self.values["gain"],
            shot_psd=self.values["shot_psd"],
            demod_phase=self.values["demod_phase"] if demod_phase is None else demod_phase,
            lowpass_cutoff=self.values["lowpass_cutoff"],
            schedule_period=self.values["schedule_period"],
        )

    def grid(self, seed: int) -> SimGrid:
        return SimGrid(
            sample_rate=self.values["sample_rate"],
            duration=self.values["duration"],
            carrier=self.values["carrier"],
            seed=seed,
        )

    def passband_edge_hz(self, rates: DerivedRates) -> float:
        return (self.values["delta_lo"] + 10.0 * rates.gamma_plus) / TWO_PI


def validate_config(config: RunConfig) -> list[str]:
    """Cross-module precondition checks; returns human-readable problems."""
    problems: list[str] = []
    v = config.values
    try:
        osc = config.oscillator()
    except (ValueError, ConfigError) as exc:
        problems.append(f"oscillator: {exc}")
        osc = None
    rates = None
    try:
        rates = config.derived_rates()
    except Exception as exc:
        problems.append(f"rates: {exc}")
    if v["rate_source"] not in ("target", "params"):
        problems.append(f"rate_source must be 'target' or 'params', got {v['rate_source']!r}")
    if v["demod_phase_mode"] not in ("optimize", "fixed"):
        problems.append(f"demod_phase_mode must be 'optimize' or 'fixed', got {v['demod_phase_mode']!r}")
    if not v["delta_lo"] > 0:
        problems.append("delta_lo must be > 0")
    if osc is not None and v["delta_lo"] >= osc.omega_m / 5.0:
        problems.append("delta_lo must stay well below omega_m (limit omega_m/5)")
    if v["repetitions"] < 1:
        problems.append("repetitions must be >= 1")
    if v["workers"] < 1:
        problems.append("workers must be >= 1")
    if not 0.0 <= v["welch_overlap"] < 1.0:
        problems.append("welch_overlap must lie in [0, 1)")
    if v["decimate"] < 1:
        problems.append("decimate must be >= 1")
    # a quantum-squeezed regime (s > 2*n_bar) is a valid configuration: the
    # pipeline then falls back to analytic spectra and no record is ever
    # synthesized, so the synthesis-path checks below do not apply
    if rates is not None and min(rates.weights.as_tuple()) < 0.0:
        return problems
    if rates is not None:
        f_upper = (v["carrier"] + v["delta_lo"] + 10.0 * rates.gamma_plus) / TWO_PI
        if v["sample_rate"] <= 2.0 * f_upper:
            problems.append(
                f"sample_rate {v['sample_rate']:.6g} Hz below the Nyquist margin "
                f"2*{f_upper:.6g} Hz"
            )
        edge = config.passband_edge_hz(rates)
        if not edge < v["lowpass_cutoff"]:
            problems.append(
                f"lowpass_cutoff {v['lowpass_cutoff']:.6g} Hz must exceed the "
                f"passband edge {edge:.6g} Hz"
            )
        if not v["lowpass_cutoff"] < v["carrier"] / TWO_PI:
            problems.append("lowpass_cutoff must stay below the carrier")
        if v["decimate"] > 1 and v["lowpass_cutoff"] >= v["sample_rate"] / (2.0 * v["decimate"]):
            problems.append("lowpass_cutoff must stay below the decimated Nyquist")
        try:
            schedule_drive(config.grid(seed=0), v["schedule_period"], rates.gamma_minus)
        except Exception as exc:
            problems.append(f"schedule: {exc}")
        rbw = 1.0 / v["welch_segment"]
        gamma_minus_hz = rates.gamma_minus / TWO_PI
        if rbw > gamma_minus_hz / 5.0:
            problems.append(
                f"welch_segment {v['welch_segment']:.4g} s gives rbw {rbw:.4g} Hz "
                f"which cannot resolve gamma_minus/5 = {gamma_minus_hz / 5.0:.4g} Hz"
            )
        usable = v["schedule_period"] - 10.0 / rates.gamma_minus
        if v["welch_segment"] * 2 > usable:
            problems.append(
                f"welch_segment {v['welch_segment']:.4g} s too long for the "
                f"{usable:.4g} s usable part of each drive segment"
            )
    return problems


def require_valid(config: RunConfig) -> None:
    problems = validate_config(config)
    if problems:
        raise ConfigError("; ".join(problems))
