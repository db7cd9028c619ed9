import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from parosc.config import RunConfig

# Reduced desk grid for fast synthesis tests: all physics depends only on the
# rates and the LO offset, so shrinking the carrier keeps statistics intact.
FAST_OVERRIDES = dict(
    sample_rate="25kHz",
    carrier="5kHz",
    delta_lo="1.1kHz",
    lowpass_cutoff="2.5kHz",
    decimate="4",
    duration="30s",
    welch_segment="1s",
    fit_margin="300Hz",
    repetitions="2",
    rate_source="target",
    gamma_eff_target="20Hz",
    s_target="0.5",
    n_bar="5.8",
    seed="42",
)


def fast_config(**overrides) -> RunConfig:
    merged = dict(FAST_OVERRIDES)
    merged.update(overrides)
    return RunConfig.defaults().with_overrides(**merged)
