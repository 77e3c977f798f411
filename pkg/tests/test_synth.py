import numpy as np
import pytest

from graspspec.hos import SegmentPlan, bicoherence, segment
from graspspec.synth import (
    QpcSpec,
    SynthClassSpec,
    dataset_manifest,
    default_class_specs,
    qpc_signal,
    synth_dataset,
)

FS = 250.0


def test_qpc_spec_invariants():
    with pytest.raises(ValueError, match="Nyquist"):
        QpcSpec(60.0, 70.0, fs_hz=FS)
    with pytest.raises(ValueError):
        QpcSpec(-1.0, 10.0)


def test_coupled_signal_lights_up_bicoherence():
    plan = SegmentPlan()
    length = 63 * plan.hop + plan.nfft
    spec = QpcSpec(10.0, 15.0, amp=1.0, coupled=True, snr_db=20.0, duration_s=length / FS, fs_hz=FS)
    coh = bicoherence(segment(qpc_signal(spec, seed=5), plan, FS)).values
    assert coh[10, 15] >= 0.9


def test_uncoupled_signal_stays_dark():
    plan = SegmentPlan()
    length = 63 * plan.hop + plan.nfft
    spec = QpcSpec(10.0, 15.0, amp=1.0, coupled=False, snr_db=20.0, duration_s=length / FS, fs_hz=FS)
    coh = bicoherence(segment(qpc_signal(spec, seed=5), plan, FS)).values
    assert coh[10, 15] <= 0.3


def test_zero_amp_gives_reference_noise():
    spec = QpcSpec(10.0, 15.0, amp=0.0, snr_db=20.0, duration_s=40.0, fs_hz=FS)
    x = qpc_signal(spec, seed=2)
    rms = np.sqrt(np.mean(x**2))
    assert rms == pytest.approx(10.0 ** (-20.0 / 20.0), rel=0.05)


def test_qpc_signal_is_seed_deterministic():
    spec = QpcSpec(10.0, 15.0, duration_s=6.0, fs_hz=FS)
    np.testing.assert_array_equal(qpc_signal(spec, seed=9), qpc_signal(spec, seed=9))
    assert not np.array_equal(qpc_signal(spec, seed=9), qpc_signal(spec, seed=10))


def test_default_dataset_counts():
    s = synth_dataset(trials_per_class=50, channels=8, epoch_seconds=6.0, fs_hz=FS, seed=0)
    assert len(s.epochs) == 150
    assert s.epochs[0].data.shape == (8, 1500)
    for lab in ("power", "precision", "none"):
        assert s.labels.count(lab) == 50


def test_single_trial_per_class():
    s = synth_dataset(trials_per_class=1, seed=0)
    assert len(s.epochs) == 3
    assert sorted(s.labels) == ["none", "power", "precision"]


def test_dataset_is_seed_deterministic():
    a = synth_dataset(trials_per_class=2, seed=4)
    b = synth_dataset(trials_per_class=2, seed=4)
    for ea, eb in zip(a.epochs, b.epochs):
        np.testing.assert_array_equal(ea.data, eb.data)


def test_movement_triads_are_shared_across_channels():
    # channels see the same source scaled by gains, plus independent noise
    s = synth_dataset(trials_per_class=1, channels=8, seed=6)
    power = next(e for e in s.epochs if e.label == "power")
    c3 = power.data[1]  # C3, gain 1.0
    c4 = power.data[3]  # C4, gain 0.9
    r = np.corrcoef(c3, c4)[0, 1]
    assert r >= 0.9


def test_default_specs_shape():
    specs = default_class_specs()
    assert [c.label for c in specs] == ["power", "precision", "none"]
    assert specs[2].triads == []
    text = dataset_manifest(specs, 50, 8, 6.0, FS, 11)
    assert '"trials_per_class": 50' in text
    assert text.endswith("\n")


def test_class_spec_validation():
    with pytest.raises(ValueError, match="base_amp"):
        SynthClassSpec("power", [], base_amp=0.0)
