"""Ten bispectral features per channel and the trial feature matrix.

Over a set of principal-region bin pairs, with m = |B| and phi = arg B
(phases of exact-zero bins are excluded from the phase statistics):

     1. mean_mag               mean m
     2. max_mag                max m
     3. sum_mag                sum m
     4. bispec_entropy         -sum p ln p / ln(n_pairs),  p = m / sum m
     5. max_bicoherence        max bicoherence over the region
     6. phase_coherence_real   Re( mean e^{i phi} )
     7. mean_phase_angle       arg( sum e^{i phi} ), in (-pi, pi]
     8. phase_second_moment    | mean e^{i 2 phi} |  (second circular moment)
     9. phase_entropy          -sum q ln q / ln 16, 16-bin histogram of phi
    10. phase_bicoherence_real Re( sum B / sum m )

Entropies are normalized to [0, 1] by the log of their support size; the
coherence-type features live in [-1, 1].  An all-zero grid yields the
all-zero feature vector.  Features 1-3 scale cubically with signal
amplitude; 4-10 are amplitude-scale invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .hos import SegmentPlan, SpectralGrid, principal_region, segment
from .ingest import EpochSet, write_text_atomic

FEATURE_NAMES = (
    "mean_mag",
    "max_mag",
    "sum_mag",
    "bispec_entropy",
    "max_bicoherence",
    "phase_coherence_real",
    "mean_phase_angle",
    "phase_second_moment",
    "phase_entropy",
    "phase_bicoherence_real",
)

PHASE_HIST_BINS = 16


@dataclass
class FeatureVector:
    values: np.ndarray
    names: list[str]
    label: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size != len(self.names):
            raise ValueError("values and names must be parallel 1-d sequences")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector contains non-finite values")


@dataclass
class FeatureMatrix:
    rows: list[FeatureVector]
    feature_names: list[str]

    def __post_init__(self):
        for i, r in enumerate(self.rows):
            if list(r.names) != list(self.feature_names):
                raise ValueError(f"row {i} feature names differ from the matrix header")

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack([r.values for r in self.rows])

    @property
    def labels(self) -> list[str]:
        return [r.label for r in self.rows]


def _normalized_entropy(weights: np.ndarray, support: int) -> float:
    total = weights.sum()
    if total <= 0 or support < 2:
        return 0.0
    p = weights[weights > 0] / total
    return float(-(p * np.log(p)).sum() / np.log(support))


def _features_from_values(b: np.ndarray, coh: np.ndarray) -> np.ndarray:
    """The ten features from region-sampled bispectrum/bicoherence values."""
    m = np.abs(b)
    total = m.sum()

    out = np.zeros(10)
    out[0] = m.mean()
    out[1] = m.max()
    out[2] = total
    out[3] = _normalized_entropy(m, m.size)
    out[4] = coh.max()

    phi = np.angle(b[m > 0])
    if phi.size:
        unit = np.exp(1j * phi)
        out[5] = unit.mean().real
        out[6] = np.angle(unit.sum())
        out[7] = np.abs(np.exp(2j * phi).mean())
        idx = np.floor((phi + np.pi) / (2.0 * np.pi) * PHASE_HIST_BINS).astype(int)
        idx = np.minimum(idx, PHASE_HIST_BINS - 1)
        counts = np.bincount(idx, minlength=PHASE_HIST_BINS)
        out[8] = _normalized_entropy(counts.astype(float), PHASE_HIST_BINS)
    if total > 0:
        out[9] = (b.sum() / total).real
    return out


def channel_features(
    bispec: SpectralGrid, bicoh: SpectralGrid, region: np.ndarray
) -> np.ndarray:
    """The ten features of one channel's bispectrum/bicoherence pair."""
    region = np.asarray(region, dtype=int)
    if region.ndim != 2 or region.shape[0] == 0 or region.shape[1] != 2:
        raise ValueError("region must be a nonempty (n, 2) array of bin pairs")
    if bispec.nfft != bicoh.nfft or bispec.fs_hz != bicoh.fs_hz:
        raise ValueError("bispectrum and bicoherence grids do not share nfft/fs")
    b = np.asarray(bispec.values[region[:, 0], region[:, 1]], dtype=complex)
    coh = np.asarray(bicoh.values[region[:, 0], region[:, 1]], dtype=float)
    return _features_from_values(b, coh)


def _region_estimates(spectra: np.ndarray, region: np.ndarray):
    """Bispectrum and bicoherence sampled at the region pairs only.

    Same per-segment accumulation as the full-grid estimators, just skipping
    the bins the features never read, so the sampled values are bit-identical
    to indexing the full grids.
    """
    k = spectra.shape[0]
    x1 = spectra[:, region[:, 0]]
    x2 = spectra[:, region[:, 1]]
    x3 = spectra[:, (region[:, 0] + region[:, 1]) % spectra.shape[1]]
    b = np.zeros(region.shape[0], dtype=complex)
    p12 = np.zeros(region.shape[0])
    p3 = np.zeros(region.shape[0])
    for r in range(k):
        pair = x1[r] * x2[r]
        b += pair * np.conj(x3[r])
        p12 += np.abs(pair) ** 2
        p3 += np.abs(x3[r]) ** 2
    b /= k
    denom = (p12 / k) * (p3 / k)
    coh = np.zeros(region.shape[0])
    ok = denom > 1e-30
    coh[ok] = np.abs(b[ok]) / np.sqrt(denom[ok])
    np.clip(coh, 0.0, 1.0, out=coh)
    return b, coh


def extract_features(
    epoch_set: EpochSet,
    plan: SegmentPlan | None = None,
    band: tuple[float, float] = (1.0, 40.0),
) -> FeatureMatrix:
    """Per trial, per channel: segment -> bispectrum + bicoherence -> features.

    Channels are concatenated in recording order, giving channels x 10
    features per trial named ``<channel>_<feature>``.
    """
    plan = plan or SegmentPlan()
    region = principal_region(plan.nfft, epoch_set.fs_hz, band)
    names = [f"{ch}_{feat}" for ch in epoch_set.channel_names for feat in FEATURE_NAMES]
    rows = []
    for epoch in epoch_set.epochs:
        vals = np.empty(len(names))
        for c in range(epoch.n_channels):
            spectra = segment(epoch.data[c], plan, epoch_set.fs_hz)
            if spectra.n_segments < 2:
                raise ValueError("feature extraction needs >= 2 segments per epoch")
            b, coh = _region_estimates(spectra.spectra, region)
            vals[c * 10 : (c + 1) * 10] = _features_from_values(b, coh)
        rows.append(FeatureVector(vals, names, epoch.label))
    return FeatureMatrix(rows, names)


def write_features(fm: FeatureMatrix, path) -> None:
    """Feature CSV: header ``label,<name1>,...``, one row per trial."""
    df = pd.DataFrame(fm.matrix, columns=fm.feature_names)
    df.insert(0, "label", fm.labels)
    write_text_atomic(path, df.to_csv(index=False))


def read_features(path) -> FeatureMatrix:
    df = pd.read_csv(path, float_precision="round_trip")
    if len(df.columns) < 2 or df.columns[0] != "label":
        raise ValueError(f"{path}: expected header 'label,<feature names...>'")
    names = list(df.columns[1:])
    values = df[names].to_numpy(dtype=float)
    rows = [FeatureVector(values[i], names, str(df["label"].iloc[i])) for i in range(len(df))]
    return FeatureMatrix(rows, names)
