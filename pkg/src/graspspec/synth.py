"""Synthetic quadratic-phase-coupling signals and a 3-class grasp-like dataset.

A QPC triad is three cosines at f1, f2 and f1+f2.  When coupled, the third
phase equals the sum of the first two, so the triad lights up the bispectrum
at (f1, f2); when uncoupled, the third phase is re-randomized every
256-sample block, which leaves the power spectrum unchanged but destroys the
phase alignment that segment averaging needs.  That contrast is the whole
point of going beyond the power spectrum, and it is what these generators
let the estimators prove.

The dataset generator mimics the scale of the real recordings it stands in
for: 3 classes x 50 trials x 8 channels x 6 s at 250 Hz, with class-specific
triads projected to the channels through central-electrode-weighted gains
plus independent channel noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._rng import substream
from .ingest import Epoch, EpochSet

UNCOUPLED_BLOCK = 256

DEFAULT_CHANNELS = ("Fz", "C3", "Cz", "C4", "Pz", "PO7", "Oz", "PO8")

# Rough motor-cortex topography: central electrodes carry the most signal.
DEFAULT_GAINS = {
    "Fz": 0.5,
    "C3": 1.0,
    "Cz": 0.8,
    "C4": 0.9,
    "Pz": 0.5,
    "PO7": 0.3,
    "Oz": 0.35,
    "PO8": 0.3,
}

CHANNEL_NOISE_AMP = 0.2


@dataclass
class QpcSpec:
    """One triad: cosines at f1, f2 and f1+f2 with optional phase coupling."""

    f1_hz: float
    f2_hz: float
    amp: float = 1.0
    coupled: bool = True
    snr_db: float = 20.0
    duration_s: float = 6.0
    fs_hz: float = 250.0

    def __post_init__(self):
        if self.f1_hz <= 0 or self.f2_hz <= 0:
            raise ValueError("triad frequencies must be positive")
        if self.f1_hz + self.f2_hz >= self.fs_hz / 2:
            raise ValueError(
                f"f1 + f2 = {self.f1_hz + self.f2_hz} must stay below Nyquist {self.fs_hz / 2}"
            )
        if self.amp < 0:
            raise ValueError("amp must be nonnegative")
        if self.duration_s <= 0 or self.fs_hz <= 0:
            raise ValueError("duration_s and fs_hz must be positive")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.fs_hz))


@dataclass
class SynthClassSpec:
    """Triads and overall amplitude for one class of trials."""

    label: str
    triads: list[QpcSpec] = field(default_factory=list)
    base_amp: float = 1.0

    def __post_init__(self):
        if self.base_amp <= 0:
            raise ValueError("base_amp must be positive")


def _triad(spec: QpcSpec, rng: np.random.Generator, t: np.ndarray) -> np.ndarray:
    phi1 = rng.uniform(0.0, 2.0 * np.pi)
    phi2 = rng.uniform(0.0, 2.0 * np.pi)
    x = np.cos(2.0 * np.pi * spec.f1_hz * t + phi1)
    x += np.cos(2.0 * np.pi * spec.f2_hz * t + phi2)
    f3 = spec.f1_hz + spec.f2_hz
    if spec.coupled:
        x += np.cos(2.0 * np.pi * f3 * t + phi1 + phi2)
    else:
        phase3 = np.empty(t.size)
        for start in range(0, t.size, UNCOUPLED_BLOCK):
            phase3[start : start + UNCOUPLED_BLOCK] = rng.uniform(0.0, 2.0 * np.pi)
        x += np.cos(2.0 * np.pi * f3 * t + phase3)
    return spec.amp * x


def qpc_signal(spec: QpcSpec, seed: int = 0) -> np.ndarray:
    """One noisy realization of a triad.

    White Gaussian noise is scaled so the triad-to-noise power ratio matches
    ``snr_db`` (triad power is 3 amp^2 / 2 analytically).  With amp = 0 the
    noise scale falls back to the unit-amplitude reference, i.e. the output
    is pure noise with RMS 10**(-snr_db/20).
    """
    rng = substream(seed, "qpc")
    t = np.arange(spec.n_samples) / spec.fs_hz
    x = _triad(spec, rng, t) if spec.amp > 0 else np.zeros(t.size)
    signal_rms = np.sqrt(1.5) * spec.amp if spec.amp > 0 else 1.0
    noise_std = signal_rms * 10.0 ** (-spec.snr_db / 20.0)
    return x + noise_std * rng.standard_normal(t.size)


def default_class_specs(epoch_seconds: float = 6.0, fs_hz: float = 250.0) -> list[SynthClassSpec]:
    """The default 3-class design: two movement triads and a noise-only rest class.

    Movement triads sit inside the 1-40 Hz analysis band with base amplitudes
    well above the 0.2 channel noise, so their bispectral magnitudes come out
    roughly an order of magnitude above the rest class.
    """

    def triad(f1, f2, amp):
        return QpcSpec(f1, f2, amp=amp, coupled=True, duration_s=epoch_seconds, fs_hz=fs_hz)

    return [
        SynthClassSpec("power", [triad(10.0, 10.0, 2.0)], base_amp=2.0),
        SynthClassSpec("precision", [triad(14.0, 6.0, 1.0)], base_amp=1.0),
        SynthClassSpec("none", [], base_amp=CHANNEL_NOISE_AMP),
    ]


def synth_dataset(
    specs: list[SynthClassSpec] | None = None,
    trials_per_class: int = 50,
    channels: int = 8,
    epoch_seconds: float = 6.0,
    fs_hz: float = 250.0,
    seed: int = 0,
) -> EpochSet:
    """Generate a labeled EpochSet of grasp-like trials.

    Per trial the class triads share one phase draw across channels (a common
    source seen by all electrodes), each channel scales it by its gain and
    adds independent Gaussian noise of amplitude 0.2.  Trials use per-trial
    substreams of the root seed, so the same seed is bit-reproducible.
    """
    if specs is None:
        specs = default_class_specs(epoch_seconds, fs_hz)
    if channels <= len(DEFAULT_CHANNELS):
        names = list(DEFAULT_CHANNELS[:channels])
    else:
        names = list(DEFAULT_CHANNELS) + [f"ch{i}" for i in range(len(DEFAULT_CHANNELS), channels)]
    gains = np.array([DEFAULT_GAINS.get(n, 0.4) for n in names])
    length = int(round(epoch_seconds * fs_hz))
    t = np.arange(length) / fs_hz
    epochs = []
    for cls in specs:
        for trial in range(trials_per_class):
            rng = substream(seed, "trial", cls.label, trial)
            source = np.zeros(length)
            for triad_spec in cls.triads:
                source += _triad(triad_spec, rng, t)
            noise = CHANNEL_NOISE_AMP * rng.standard_normal((len(names), length))
            data = gains[:, None] * source[None, :] + noise
            epochs.append(Epoch(cls.label, data, fs_hz))
    return EpochSet(epochs, names, fs_hz)


def dataset_manifest(
    specs: list[SynthClassSpec],
    trials_per_class: int,
    channels: int,
    epoch_seconds: float,
    fs_hz: float,
    seed: int,
) -> str:
    """JSON description of the generating configuration, for simulate runs."""
    doc = {
        "trials_per_class": trials_per_class,
        "channels": channels,
        "epoch_seconds": epoch_seconds,
        "fs_hz": fs_hz,
        "seed": seed,
        "channel_noise_amp": CHANNEL_NOISE_AMP,
        "classes": [
            {
                "label": c.label,
                "base_amp": c.base_amp,
                "triads": [
                    {
                        "f1_hz": q.f1_hz,
                        "f2_hz": q.f2_hz,
                        "amp": q.amp,
                        "coupled": q.coupled,
                    }
                    for q in c.triads
                ],
            }
            for c in specs
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
