"""Welch PSD estimation with a strict normalization contract.

Densities are always units^2/Hz and integrate to the sample variance
(one-sided for real inputs, two-sided for complex ones), so fitted
Lorentzian areas carry physical meaning in quanta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import signal

from .errors import SpectralError

DEFAULT_WINDOW = "hann"
DEFAULT_OVERLAP = 0.5

# Windowed periodograms correlate neighbouring frequency bins (the kernel
# spans ~ENBW bins); statistics that assume independent bins should use every
# k-th bin instead.
BIN_STEP_BY_WINDOW = {"boxcar": 1, "hann": 2, "hamming": 2, "blackman": 3}


def bin_step_for(window: str) -> int:
    return BIN_STEP_BY_WINDOW.get(window, 2)


@dataclass(frozen=True)
class Psd:
    """Frequency axis (Hz) plus spectral density (units^2/Hz).

    rbw is the frequency resolution (segment-length reciprocal).
    n_averages counts averaged periodograms; effective_averages corrects
    that count for segment overlap and is what uncertainty models should use.
    """

    freqs: np.ndarray
    density: np.ndarray
    rbw: float
    n_averages: int
    effective_averages: float
    window: str
    onesided: bool

    def integral(self) -> float:
        """sum(density * df); equals the input variance within window tolerance."""
        return float(np.sum(self.density) * self.rbw)

    def band(self, f_lo: float, f_hi: float) -> "Psd":
        """Restrict to freqs in [f_lo, f_hi]."""
        sel = (self.freqs >= f_lo) & (self.freqs <= f_hi)
        return replace(self, freqs=self.freqs[sel], density=self.density[sel])


def _overlap_variance_factor(window_vals: np.ndarray, hop: int, n_segments: int) -> float:
    """Variance inflation of the segment average caused by segment overlap.

    Standard Welch result: 1 + 2 * sum_m (1 - m/K) * rho_m^2 with
    rho_m the normalized window correlation at lag m*hop.
    """
    if n_segments <= 1:
        return 1.0
    nw = len(window_vals)
    denom = float(np.sum(window_vals**2))
    factor = 1.0
    m = 1
    while m * hop < nw:
        lag = m * hop
        rho = float(np.sum(window_vals[: nw - lag] * window_vals[lag:])) / denom
        if m < n_segments:
            factor += 2.0 * (1.0 - m / n_segments) * rho**2
        m += 1
    return factor


def welch_psd(
    samples: np.ndarray,
    sample_rate: float,
    segment_len: int,
    overlap_frac: float = DEFAULT_OVERLAP,
    window: str = DEFAULT_WINDOW,
    detrend: str | bool = "constant",
) -> Psd:
    """Averaged modified periodogram with window power normalization.

    Real inputs produce a one-sided density (doubled except at DC/Nyquist);
    complex inputs produce a two-sided density on an fftshifted axis.
    Per-segment mean removal (the default) suppresses the DC bin; pass
    detrend=False when the spectrum right at zero frequency matters.
    Raises SpectralError when fewer than two segments fit.
    """
    samples = np.asarray(samples)
    n = samples.shape[-1]
    if segment_len > n:
        raise SpectralError(f"segment_len {segment_len} exceeds record length {n}")
    if not 0.0 <= overlap_frac < 1.0:
        raise SpectralError(f"overlap_frac must lie in [0, 1), got {overlap_frac}")
    noverlap = int(segment_len * overlap_frac)
    hop = segment_len - noverlap
    n_segments = 1 + (n - segment_len) // hop
    if n_segments < 2:
        raise SpectralError(
            f"only {n_segments} segment(s) fit: record {n}, segment {segment_len}, "
            f"overlap {overlap_frac}"
        )
    complex_input = np.iscomplexobj(samples)
    freqs, density = signal.welch(
        samples,
        fs=sample_rate,
        window=window,
        nperseg=segment_len,
        noverlap=noverlap,
        detrend=detrend,
        return_onesided=not complex_input,
        scaling="density",
    )
    if complex_input:
        freqs = np.fft.fftshift(freqs)
        density = np.fft.fftshift(density)
    win_vals = signal.get_window(window, segment_len)
    eff = n_segments / _overlap_variance_factor(win_vals, hop, n_segments)
    return Psd(
        freqs=freqs,
        density=density,
        rbw=sample_rate / segment_len,
        n_averages=n_segments,
        effective_averages=eff,
        window=window,
        onesided=not complex_input,
    )


def welch_psd_chunks(
    chunks: list[np.ndarray],
    sample_rate: float,
    segment_len: int,
    overlap_frac: float = DEFAULT_OVERLAP,
    window: str = DEFAULT_WINDOW,
) -> Psd:
    """Welch estimate pooled over disjoint record chunks (e.g. schedule segments).

    Each chunk is estimated separately and the averages combined with weights
    proportional to their segment counts, in list order (deterministic
    reduction).  Chunks shorter than two Welch segments are skipped; pooling
    fails only if nothing remains.
    """
    pooled = None
    total = 0
    total_eff = 0.0
    for chunk in chunks:
        try:
            psd = welch_psd(chunk, sample_rate, segment_len, overlap_frac, window)
        except SpectralError:
            continue
        if pooled is None:
            pooled = psd.density * psd.n_averages
            freqs = psd.freqs
            template = psd
        else:
            pooled = pooled + psd.density * psd.n_averages
        total += psd.n_averages
        total_eff += psd.effective_averages
    if pooled is None:
        raise SpectralError("no chunk was long enough for a Welch estimate")
    return Psd(
        freqs=freqs,
        density=pooled / total,
        rbw=template.rbw,
        n_averages=total,
        effective_averages=total_eff,
        window=window,
        onesided=template.onesided,
    )


def resolution_check(psd: Psd, min_width_hz: float) -> bool:
    """True when the resolution bandwidth resolves a Lorentzian of the given
    full width (rbw <= width/5)."""
    return psd.rbw <= min_width_hz / 5.0


def write_psd_csv(psd: Psd, path) -> None:
    """Two-column CSV (freq_hz, psd) with the estimation metadata in the header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# rbw_hz={psd.rbw:.12g} window={psd.window} "
            f"n_averages={psd.n_averages} "
            f"effective_averages={psd.effective_averages:.12g} "
            f"onesided={int(psd.onesided)}\n"
        )
        fh.write("freq_hz,psd\n")
        for f, d in zip(psd.freqs, psd.density):
            fh.write(f"{f:.12g},{d:.12g}\n")


def read_psd_csv(path) -> Psd:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        meta = dict(item.split("=") for item in header.lstrip("# ").split())
        fh.readline()
        rows = [line.strip().split(",") for line in fh if line.strip()]
    freqs = np.array([float(r[0]) for r in rows])
    density = np.array([float(r[1]) for r in rows])
    return Psd(
        freqs=freqs,
        density=density,
        rbw=float(meta["rbw_hz"]),
        n_averages=int(meta["n_averages"]),
        effective_averages=float(meta["effective_averages"]),
        window=meta["window"],
        onesided=bool(int(meta["onesided"])),
    )


def chi2_indistinguishable(a: Psd, b: Psd, level: float = 0.01) -> tuple[bool, float]:
    """Chi-square test that two averaged PSDs estimate the same spectrum.

    Per-bin sigma follows the chi-square statistics of averaged periodograms
    (sigma = S / sqrt(effective_averages)); bins are thinned to effective
    independence before summing (the window kernel correlates neighbours).
    Returns (indistinguishable, p_value): indistinguishable when the test does
    not reject at `level`.
    """
    from scipy.stats import chi2 as chi2_dist

    if len(a.freqs) != len(b.freqs):
        raise SpectralError("PSDs must share a frequency axis")
    step = bin_step_for(a.window)
    da = a.density[::step]
    db = b.density[::step]
    mean = 0.5 * (da + db)
    var = mean**2 * (1.0 / a.effective_averages + 1.0 / b.effective_averages)
    z2 = (da - db) ** 2 / var
    stat = float(np.sum(z2))
    dof = len(z2)
    p = float(chi2_dist.sf(stat, dof))
    return p > level, p
