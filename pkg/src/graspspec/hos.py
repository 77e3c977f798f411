"""Segment-averaged bispectrum, cross-bispectrum and bicoherence.

All estimators work on :class:`SegmentSpectra`, the per-segment DFTs of a
tapered, 50%-overlapping segmentation of a real signal (the direct FFT
method).  For segment DFTs ``X_r`` the auto-bispectrum estimate is

    B(k1, k2) = (1/K) sum_r  X_r(k1) * X_r(k2) * conj(X_r(k1 + k2 mod n))

on the full n x n bifrequency grid, where bin k carries frequency
``k * fs / n`` interpreted modulo n (negative frequencies at k > n/2).
The cross form keeps the conjugated sum-frequency factor on the second
signal, ``B_xxy(k1,k2) = mean X(k1) X(k2) conj(Y(k1+k2))``, which preserves
the k1 <-> k2 symmetry.  Bicoherence uses the Kim & Powers normalization
and is bounded in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRID_KINDS = ("bispectrum", "cross_bispectrum", "bicoherence")
_DENOM_FLOOR = 1e-30


@dataclass
class SegmentPlan:
    """Segmentation parameters: FFT length, overlap fraction and taper."""

    nfft: int = 256
    overlap_fraction: float = 0.5
    window: str = "hann"

    def __post_init__(self):
        if self.nfft < 2 or (self.nfft & (self.nfft - 1)) != 0:
            raise ValueError(f"nfft must be a power of two, got {self.nfft}")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValueError(f"overlap_fraction must be in [0, 1), got {self.overlap_fraction}")
        if self.window not in ("hann", "rectangular"):
            raise ValueError(f"window must be 'hann' or 'rectangular', got {self.window!r}")

    @property
    def hop(self) -> int:
        return max(1, int(round(self.nfft * (1.0 - self.overlap_fraction))))

    def taper(self, length: int) -> np.ndarray:
        if self.window == "hann":
            return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)
        return np.ones(length)


@dataclass
class SegmentSpectra:
    """Per-segment DFT rows (K x nfft complex) of one tapered segmentation."""

    spectra: np.ndarray
    fs_hz: float
    window_norm: float = field(default=1.0)

    def __post_init__(self):
        self.spectra = np.asarray(self.spectra, dtype=complex)
        if self.spectra.ndim != 2 or self.spectra.shape[0] < 1:
            raise ValueError("spectra must be a K x nfft matrix with K >= 1")

    @property
    def n_segments(self) -> int:
        return self.spectra.shape[0]

    @property
    def nfft(self) -> int:
        return self.spectra.shape[1]


@dataclass
class SpectralGrid:
    """nfft x nfft bifrequency grid of one of the GRID_KINDS."""

    values: np.ndarray
    fs_hz: float
    nfft: int
    kind: str

    def __post_init__(self):
        if self.kind not in GRID_KINDS:
            raise ValueError(f"kind must be one of {GRID_KINDS}, got {self.kind!r}")
        self.values = np.asarray(self.values)
        if self.values.shape != (self.nfft, self.nfft):
            raise ValueError(f"values shape {self.values.shape} != ({self.nfft}, {self.nfft})")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid contains non-finite entries")
        if self.kind == "bicoherence":
            v = np.asarray(self.values, dtype=float)
            if v.min() < 0.0 or v.max() > 1.0:
                raise ValueError("bicoherence values must lie in [0, 1]")

    def bin_frequencies(self) -> np.ndarray:
        """Frequency of each bin in Hz; bins above nfft/2 map to negatives."""
        return bin_frequencies(self.nfft, self.fs_hz)


def bin_frequencies(nfft: int, fs_hz: float) -> np.ndarray:
    k = np.arange(nfft)
    k = np.where(k > nfft // 2, k - nfft, k)
    return k * fs_hz / nfft


def segment(signal, plan: SegmentPlan, fs_hz: float, zero_pad: bool = False) -> SegmentSpectra:
    """Split a signal into tapered segments and DFT each one.

    Parameters
    ----------
    signal : 1-d real array
    plan : SegmentPlan
    fs_hz : sampling rate in Hz
    zero_pad : allow signals shorter than ``plan.nfft``; the whole signal
        becomes a single mean-removed, tapered, zero-padded segment (K=1).

    Returns
    -------
    SegmentSpectra with K = floor((L - nfft)/hop) + 1 rows.  Each segment is
    mean-removed before tapering to keep DC leakage out of the low bins.
    ``window_norm`` records the mean cubed taper for callers who want
    absolute scale calibration; the estimators themselves do not apply it.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ValueError("signal must be one-dimensional")
    n = plan.nfft
    if x.size < n:
        if not zero_pad:
            raise ValueError(
                f"signal length {x.size} < nfft {n}; pass zero_pad=True to pad a single segment"
            )
        taper = plan.taper(x.size)
        seg = (x - x.mean()) * taper
        padded = np.zeros(n)
        padded[: x.size] = seg
        spectra = np.fft.fft(padded)[None, :]
        return SegmentSpectra(spectra, fs_hz, window_norm=float(np.mean(taper**3)))
    hop = plan.hop
    n_seg = (x.size - n) // hop + 1
    taper = plan.taper(n)
    segs = np.empty((n_seg, n))
    for r in range(n_seg):
        chunk = x[r * hop : r * hop + n]
        segs[r] = (chunk - chunk.mean()) * taper
    spectra = np.fft.fft(segs, axis=1)
    return SegmentSpectra(spectra, fs_hz, window_norm=float(np.mean(taper**3)))


def _sum_index(nfft: int) -> np.ndarray:
    k = np.arange(nfft)
    return (k[:, None] + k[None, :]) % nfft


def _symmetrize(a: np.ndarray) -> np.ndarray:
    # The summand is symmetric in (k1, k2), but vectorized complex multiplies
    # are not bit-commutative on SIMD paths; mirroring the lower triangle
    # makes the exchange symmetry exact at the bit level.
    return np.tril(a) + np.tril(a, -1).T


def bispectrum(s: SegmentSpectra) -> SpectralGrid:
    """Segment-averaged auto-bispectrum on the full bifrequency grid."""
    n = s.nfft
    idx = _sum_index(n)
    acc = np.zeros((n, n), dtype=complex)
    for row in s.spectra:
        acc += row[:, None] * row[None, :] * np.conj(row[idx])
    return SpectralGrid(_symmetrize(acc) / s.n_segments, s.fs_hz, n, "bispectrum")


def cross_bispectrum(sx: SegmentSpectra, sy: SegmentSpectra) -> SpectralGrid:
    """Cross-bispectrum B_xxy: x at (k1, k2), y conjugated at the sum bin."""
    if sx.spectra.shape != sy.spectra.shape:
        raise ValueError(
            f"segment shape mismatch: {sx.spectra.shape} vs {sy.spectra.shape}"
        )
    if sx.fs_hz != sy.fs_hz:
        raise ValueError("inputs have different sampling rates")
    n = sx.nfft
    idx = _sum_index(n)
    acc = np.zeros((n, n), dtype=complex)
    for rx, ry in zip(sx.spectra, sy.spectra):
        acc += rx[:, None] * rx[None, :] * np.conj(ry[idx])
    return SpectralGrid(_symmetrize(acc) / sx.n_segments, sx.fs_hz, n, "cross_bispectrum")


def bicoherence(s: SegmentSpectra) -> SpectralGrid:
    """Kim & Powers normalized bispectrum magnitude, in [0, 1].

        b(k1, k2) = |B(k1, k2)| / sqrt( mean|X(k1) X(k2)|^2 * mean|X(k1+k2)|^2 )

    Bins whose denominator underflows the 1e-30 floor are set to 0.
    Needs at least two segments; a single segment is trivially 1 everywhere.
    """
    if s.n_segments < 2:
        raise ValueError(f"bicoherence needs K >= 2 segments, got {s.n_segments}")
    n = s.nfft
    idx = _sum_index(n)
    acc = np.zeros((n, n), dtype=complex)
    p12 = np.zeros((n, n))
    p3 = np.zeros(n)
    for row in s.spectra:
        pair = row[:, None] * row[None, :]
        acc += pair * np.conj(row[idx])
        p12 += np.abs(pair) ** 2
        p3 += np.abs(row) ** 2
    k = s.n_segments
    denom = (_symmetrize(p12) / k) * (p3 / k)[idx]
    acc = _symmetrize(acc)
    b = np.zeros((n, n))
    ok = denom > _DENOM_FLOOR
    b[ok] = np.abs(acc[ok] / k) / np.sqrt(denom[ok])
    np.clip(b, 0.0, 1.0, out=b)
    return SpectralGrid(b, s.fs_hz, n, "bicoherence")


def power_spectrum(s: SegmentSpectra) -> np.ndarray:
    """Segment-averaged |X(k)|^2 per bin (companion diagnostic to bicoherence)."""
    return np.mean(np.abs(s.spectra) ** 2, axis=0)


def principal_region(nfft: int, fs_hz: float, band: tuple[float, float]) -> np.ndarray:
    """Nonredundant (k1, k2) bin pairs of the bifrequency plane inside a band.

    Pairs satisfy 0 <= k2 <= k1, k1 + k2 <= nfft/2, and both bin-center
    frequencies k * fs / nfft within [low, high] inclusive.  Returned as an
    (n, 2) int array ordered by (k1, k2).  Raises if the band selects no pair.
    """
    low, high = band
    if not 0 <= low < high <= fs_hz / 2:
        raise ValueError(f"band must satisfy 0 <= low < high <= fs/2, got {band}")
    freqs = np.arange(nfft // 2 + 1) * fs_hz / nfft
    in_band = np.flatnonzero((freqs >= low) & (freqs <= high))
    pairs = [
        (int(k1), int(k2))
        for k1 in in_band
        for k2 in in_band
        if k2 <= k1 and k1 + k2 <= nfft // 2
    ]
    if not pairs:
        raise ValueError(f"band {band} selects no (k1, k2) pairs at nfft={nfft}, fs={fs_hz}")
    return np.array(sorted(pairs), dtype=int)
