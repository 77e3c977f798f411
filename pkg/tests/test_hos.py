import numpy as np
import pytest

from graspspec.hos import (
    SegmentPlan,
    bicoherence,
    bin_frequencies,
    bispectrum,
    cross_bispectrum,
    power_spectrum,
    principal_region,
    segment,
)
from graspspec.synth import QpcSpec, qpc_signal

FS = 250.0


def naive_dft(x):
    # direct O(N^2) definition, independent of np.fft
    n = x.size
    k = np.arange(n)
    return np.array([np.sum(x * np.exp(-2j * np.pi * kk * k / n)) for kk in range(n)])


def triple_product_oracle(x):
    X = naive_dft(x)
    n = x.size
    grid = np.empty((n, n), dtype=complex)
    for k1 in range(n):
        for k2 in range(n):
            grid[k1, k2] = X[k1] * X[k2] * np.conj(X[(k1 + k2) % n])
    return grid


def qpc_for_segments(n_segments, coupled, seed=5, snr_db=20.0):
    plan = SegmentPlan()
    length = (n_segments - 1) * plan.hop + plan.nfft
    spec = QpcSpec(
        10.0, 15.0, amp=1.0, coupled=coupled, snr_db=snr_db, duration_s=length / FS, fs_hz=FS
    )
    return qpc_signal(spec, seed=seed)


# ---------------------------------------------------------------------------
# segmentation


def test_segment_count_1500():
    x = np.random.default_rng(0).standard_normal(1500)
    s = segment(x, SegmentPlan(), FS)
    assert s.n_segments == 10


def test_segment_single():
    x = np.random.default_rng(0).standard_normal(256)
    s = segment(x, SegmentPlan(), FS)
    assert s.n_segments == 1


def test_segment_too_short_without_zero_pad():
    x = np.zeros(100)
    with pytest.raises(ValueError, match="zero_pad"):
        segment(x, SegmentPlan(), FS)
    s = segment(np.random.default_rng(1).standard_normal(100), SegmentPlan(), FS, zero_pad=True)
    assert s.n_segments == 1


def test_segment_window_norm_is_mean_cubed_taper():
    n = 256
    taper = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    s = segment(np.random.default_rng(2).standard_normal(300), SegmentPlan(), FS)
    assert s.window_norm == pytest.approx(np.mean(taper**3), abs=1e-15)


# ---------------------------------------------------------------------------
# bispectrum oracle and symmetries


def test_zero_signal_gives_zero_grid():
    s = segment(np.zeros(1024), SegmentPlan(nfft=256), FS)
    assert np.all(bispectrum(s).values == 0)


def test_bispectrum_matches_triple_product_oracle():
    rng = np.random.default_rng(7)
    x = rng.standard_normal(16)
    x = x - x.mean()
    plan = SegmentPlan(nfft=16, overlap_fraction=0.0, window="rectangular")
    est = bispectrum(segment(x, plan, FS)).values
    oracle = triple_product_oracle(x)
    assert np.max(np.abs(est - oracle)) <= 1e-10


def test_symmetries_over_100_random_signals():
    rng = np.random.default_rng(11)
    plan = SegmentPlan(nfft=32, overlap_fraction=0.5)
    ks = (-np.arange(32)) % 32
    for _ in range(100):
        x = rng.standard_normal(48)
        grid = bispectrum(segment(x, plan, FS)).values
        # k1 <-> k2 exchange symmetry is exact at the bit level
        assert np.array_equal(grid, grid.T)
        # real-signal conjugate symmetry within 1e-10
        assert np.max(np.abs(grid[np.ix_(ks, ks)] - np.conj(grid))) <= 1e-10


def test_cubic_amplitude_scaling():
    rng = np.random.default_rng(13)
    x = rng.standard_normal(1500)
    plan = SegmentPlan()
    b1 = bispectrum(segment(x, plan, FS)).values
    b2 = bispectrum(segment(2.0 * x, plan, FS)).values
    scale = np.max(np.abs(8.0 * b1))
    assert np.max(np.abs(b2 - 8.0 * b1)) / scale <= 1e-9


def test_bicoherence_amplitude_invariance():
    rng = np.random.default_rng(14)
    x = rng.standard_normal(1500)
    plan = SegmentPlan()
    c1 = bicoherence(segment(x, plan, FS)).values
    c2 = bicoherence(segment(2.0 * x, plan, FS)).values
    assert np.max(np.abs(c2 - c1)) <= 1e-9


# ---------------------------------------------------------------------------
# cross-bispectrum


def test_cross_reduces_to_auto_bit_for_bit():
    rng = np.random.default_rng(15)
    s = segment(rng.standard_normal(1500), SegmentPlan(), FS)
    assert np.array_equal(cross_bispectrum(s, s).values, bispectrum(s).values)


def test_cross_with_zero_is_zero():
    rng = np.random.default_rng(16)
    sx = segment(rng.standard_normal(1500), SegmentPlan(), FS)
    sy = segment(np.zeros(1500), SegmentPlan(), FS)
    assert np.all(cross_bispectrum(sx, sy).values == 0)


def test_cross_shape_mismatch():
    sx = segment(np.random.default_rng(1).standard_normal(1500), SegmentPlan(), FS)
    sy = segment(np.random.default_rng(2).standard_normal(256), SegmentPlan(), FS)
    with pytest.raises(ValueError, match="mismatch"):
        cross_bispectrum(sx, sy)


def test_cross_peak_for_shared_triad():
    # same coupled triad on both signals, independent noise
    rng = np.random.default_rng(17)
    plan = SegmentPlan()
    length = 63 * plan.hop + plan.nfft
    t = np.arange(length) / FS
    phi1, phi2 = rng.uniform(0, 2 * np.pi, 2)
    triad = (
        np.cos(2 * np.pi * 10.0 * t + phi1)
        + np.cos(2 * np.pi * 15.0 * t + phi2)
        + np.cos(2 * np.pi * 25.0 * t + phi1 + phi2)
    )
    x = triad + 0.1 * rng.standard_normal(length)
    y = triad + 0.1 * rng.standard_normal(length)
    grid = cross_bispectrum(segment(x, plan, FS), segment(y, plan, FS))
    region = principal_region(plan.nfft, FS, (1.0, 40.0))
    mags = np.abs(grid.values[region[:, 0], region[:, 1]])
    k1, k2 = region[np.argmax(mags)]
    assert (k1, k2) == (round(15 * 256 / FS), round(10 * 256 / FS))


# ---------------------------------------------------------------------------
# bicoherence


def test_bicoherence_requires_two_segments():
    s = segment(np.random.default_rng(3).standard_normal(256), SegmentPlan(), FS)
    with pytest.raises(ValueError, match="K >= 2"):
        bicoherence(s)


def test_bicoherence_high_for_coupled_triad():
    x = qpc_for_segments(64, coupled=True)
    coh = bicoherence(segment(x, SegmentPlan(), FS)).values
    assert coh[10, 15] >= 0.9


def test_bicoherence_low_for_uncoupled_triad():
    x = qpc_for_segments(64, coupled=False)
    coh = bicoherence(segment(x, SegmentPlan(), FS)).values
    assert coh[10, 15] <= 0.3


def test_bicoherence_bounded_for_random_inputs():
    rng = np.random.default_rng(19)
    for _ in range(20):
        x = rng.standard_normal(rng.integers(600, 2000))
        coh = bicoherence(segment(x, SegmentPlan(nfft=128), FS)).values
        assert coh.min() >= 0.0 and coh.max() <= 1.0


def test_coupled_and_uncoupled_share_power_spectrum():
    xc = qpc_for_segments(64, coupled=True)
    xu = qpc_for_segments(64, coupled=False)
    # non-overlapping segments align with the uncoupled phase blocks, so the
    # PSD cannot tell the signals apart even though bicoherence can
    plan = SegmentPlan(overlap_fraction=0.0)
    pc = power_spectrum(segment(xc, plan, FS))
    pu = power_spectrum(segment(xu, plan, FS))
    for f in (10.0, 15.0, 25.0):
        k = round(f * plan.nfft / FS)
        assert abs(pc[k] - pu[k]) / pc[k] < 0.10


def test_gaussian_noise_suppression_with_segment_count():
    rng = np.random.default_rng(23)
    plan = SegmentPlan()
    noise = rng.standard_normal(255 * plan.hop + plan.nfft)
    region = principal_region(plan.nfft, FS, (0.0, FS / 2))
    short = bispectrum(segment(noise[: 3 * plan.hop + plan.nfft], plan, FS))
    long = bispectrum(segment(noise, plan, FS))
    mean4 = np.abs(short.values[region[:, 0], region[:, 1]]).mean()
    mean256 = np.abs(long.values[region[:, 0], region[:, 1]]).mean()
    assert mean4 / mean256 >= 3.0


# ---------------------------------------------------------------------------
# principal region and axes


def test_principal_region_enumeration_nfft8():
    pairs = principal_region(8, 8.0, (0.0, 4.0))
    expected = {(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2), (3, 0), (3, 1), (4, 0)}
    assert {tuple(p) for p in pairs} == expected


def test_principal_region_band_excluding_all_bins():
    with pytest.raises(ValueError, match="no .*pairs"):
        principal_region(8, 8.0, (0.4, 0.6))


def test_principal_region_band_1_40():
    pairs = principal_region(256, 250.0, (1.0, 40.0))
    ks = np.unique(pairs)
    assert ks.min() == 2 and ks.max() == 40  # bin centers 1.95 .. 39.06 Hz
    assert np.all(pairs[:, 1] <= pairs[:, 0])
    assert np.all(pairs.sum(axis=1) <= 128)
    assert len(pairs) == sum(k1 - 2 + 1 for k1 in range(2, 41))


def test_bin_frequencies_negative_half():
    f = bin_frequencies(8, 8.0)
    np.testing.assert_allclose(f, [0, 1, 2, 3, 4, -3, -2, -1])
